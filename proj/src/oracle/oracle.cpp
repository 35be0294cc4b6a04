#include "nhsim/oracle.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace nhsim {

MatrixXc propagator(const MatrixXc& h, double t) {
    if (h.rows() != h.cols()) throw std::invalid_argument("propagator: matrix not square");
    if (!h.allFinite() || !std::isfinite(t)) throw std::invalid_argument("propagator: non-finite input");
    const MatrixXc gen = (-I * t) * h;
    MatrixXc u = gen.exp();
    if (!u.allFinite()) throw std::runtime_error("propagator: non-finite result");
    return u;
}

Eigen::VectorXd uniform_grid(double t_max, int intervals) {
    if (intervals < 1 || !(t_max > 0)) throw std::invalid_argument("uniform_grid: need t_max > 0 and intervals >= 1");
    return Eigen::VectorXd::LinSpaced(intervals + 1, 0.0, t_max);
}

VectorXc basis_state(const SectorEncoding& enc, std::vector<int> sites) {
    std::sort(sites.begin(), sites.end());
    VectorXc psi = VectorXc::Zero(static_cast<Eigen::Index>(enc.dim()));
    psi(static_cast<Eigen::Index>(enc.rank(sites))) = 1;
    return psi;
}

namespace {

Eigen::MatrixXd occupation_table(const SectorEncoding& enc) {
    Eigen::MatrixXd o = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(enc.dim()), enc.sites());
    for (std::size_t j = 0; j < enc.dim(); ++j)
        for (int s : enc.unrank(j)) o(static_cast<Eigen::Index>(j), s) = 1;
    return o;
}

}  // namespace

OracleEvolution evolve_exact(const MatrixXc& h, const VectorXc& psi0, const Eigen::VectorXd& grid,
                             const SectorEncoding& enc) {
    if (h.rows() != psi0.size() || psi0.size() != static_cast<Eigen::Index>(enc.dim()))
        throw std::invalid_argument("evolve_exact: dimension mismatch");
    if (std::abs(psi0.norm() - 1) > 1e-10) throw std::invalid_argument("evolve_exact: initial state not normalized");
    if (grid.size() == 0) throw std::invalid_argument("evolve_exact: empty grid");
    const Eigen::MatrixXd table = occupation_table(enc);
    const Eigen::Index nt = grid.size();

    bool uniform = nt > 2;
    const double dt0 = nt > 1 ? grid(1) - grid(0) : 0.0;
    for (Eigen::Index i = 1; i < nt && uniform; ++i)
        uniform = std::abs(grid(i) - grid(i - 1) - dt0) <= 1e-12 * std::max(1.0, std::abs(grid(nt - 1)));
    MatrixXc step;
    if (uniform) step = propagator(h, dt0);

    OracleEvolution out;
    out.omega_occupancies.resize(nt, enc.sites());
    out.rho_occupancies.resize(nt, enc.sites());
    out.norm.resize(nt);
    VectorXc psi = grid(0) == 0.0 ? psi0 : VectorXc(propagator(h, grid(0)) * psi0);
    Eigen::Index kept = nt;
    for (Eigen::Index i = 0; i < nt; ++i) {
        if (i > 0) psi = (uniform ? step : propagator(h, grid(i) - grid(i - 1))) * psi;
        const double a = psi.norm();
        if (a < 1e-12) {
            kept = i;
            out.truncated = true;
            break;
        }
        const Eigen::RowVectorXd occ = psi.cwiseAbs2().transpose() * table;
        out.omega_occupancies.row(i) = occ;
        out.rho_occupancies.row(i) = occ / (a * a);
        out.norm(i) = a;
    }
    out.time_grid = grid.head(kept);
    out.omega_occupancies.conservativeResize(kept, Eigen::NoChange);
    out.rho_occupancies.conservativeResize(kept, Eigen::NoChange);
    out.norm.conservativeResize(kept);
    return out;
}

EscapeProfile escape_profile(const MatrixXc& h, const VectorXc& psi0, double gamma, double t_max,
                             const SectorEncoding& enc, int intervals) {
    const OracleEvolution ev = evolve_exact(h, psi0, uniform_grid(t_max, intervals), enc);
    EscapeProfile out;
    out.time_grid = ev.time_grid;
    const Eigen::Index nt = ev.time_grid.size();
    out.px_t.resize(nt, enc.cells());
    for (int x = 0; x < enc.cells(); ++x)
        out.px_t.col(x) = 2 * gamma * cumulative_trapezoid(ev.time_grid, ev.omega_occupancies.col(2 * x + 1));
    out.p_t = out.px_t.rowwise().sum();
    out.final_px = out.px_t.row(nt - 1).transpose();
    out.residual = 1.0 - out.p_t(nt - 1);
    return out;
}

SpectrumResult spectrum(const MatrixXc& h) {
    Eigen::ComplexEigenSolver<MatrixXc> es(h, false);
    if (es.info() != Eigen::Success) throw std::runtime_error("spectrum: eigensolver failed");
    SpectrumResult out;
    out.eigenvalues = es.eigenvalues();
    out.max_im = out.eigenvalues.imag().maxCoeff();
    out.min_im = out.eigenvalues.imag().minCoeff();
    out.gap = std::max(0.0, -out.max_im);
    return out;
}

}  // namespace nhsim
