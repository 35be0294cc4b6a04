#pragma once

#include "nhsim/analysis.hpp"
#include "nhsim/core.hpp"
#include "nhsim/encoding.hpp"

namespace nhsim {

// e^{-iHt}
MatrixXc propagator(const MatrixXc& h, double t);

struct OracleEvolution {
    Eigen::VectorXd time_grid;
    Eigen::MatrixXd omega_occupancies;  // time x site, unnormalized state
    Eigen::MatrixXd rho_occupancies;    // time x site, normalized
    Eigen::VectorXd norm;               // A_t
    bool truncated = false;             // norm underflow cut the grid short
};

OracleEvolution evolve_exact(const MatrixXc& h, const VectorXc& psi0, const Eigen::VectorXd& time_grid,
                             const SectorEncoding& enc);

// P_x(t) from the unnormalized evolution, trapezoid on a uniform grid of `intervals`
EscapeProfile escape_profile(const MatrixXc& h, const VectorXc& psi0, double gamma, double t_max,
                             const SectorEncoding& enc, int intervals = 2000);

struct SpectrumResult {
    VectorXc eigenvalues;
    double max_im = 0.0;
    double min_im = 0.0;
    double gap = 0.0;
};

SpectrumResult spectrum(const MatrixXc& h);

Eigen::VectorXd uniform_grid(double t_max, int intervals);

VectorXc basis_state(const SectorEncoding& enc, std::vector<int> sites);

}  // namespace nhsim
