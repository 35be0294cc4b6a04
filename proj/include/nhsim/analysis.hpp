#pragma once

#include "nhsim/core.hpp"

namespace nhsim {

struct EscapeProfile {
    Eigen::VectorXd time_grid;
    Eigen::MatrixXd px_t;  // time x cell
    Eigen::VectorXd p_t;
    Eigen::VectorXd final_px;
    double residual = 1.0;  // 1 - P(t_max)
};

// running integral, out(0) = 0
Eigen::VectorXd cumulative_trapezoid(const Eigen::VectorXd& t, const Eigen::VectorXd& y);

Eigen::VectorXd recover_norm_integral(const Eigen::VectorXd& time_grid, const Eigen::VectorXd& b_sum, double gamma);
Eigen::VectorXd recover_norm_success(const Eigen::VectorXd& success);

// rho_b: time x cell occupancy of the b site on the normalized state
EscapeProfile escape_from_occupancies(const Eigen::VectorXd& time_grid, const Eigen::MatrixXd& rho_b,
                                      const Eigen::VectorXd& norm, double gamma);

// time x site -> time x cell (b columns)
Eigen::MatrixXd b_columns(const Eigen::MatrixXd& site_occupancies);

bool is_terminated(const Eigen::VectorXd& p_t, double threshold = 0.995);

enum class NormMethod { integral, success };

// normalized site occupancies -> escape profile via the chosen norm recovery
EscapeProfile escape_from_normalized(const Eigen::VectorXd& time_grid, const Eigen::MatrixXd& occupancies,
                                     const Eigen::VectorXd& success, double gamma,
                                     NormMethod method = NormMethod::integral);

}  // namespace nhsim
