#include "nhsim/analysis.hpp"

#include <cmath>

namespace nhsim {

Eigen::VectorXd cumulative_trapezoid(const Eigen::VectorXd& t, const Eigen::VectorXd& y) {
    if (t.size() != y.size()) throw std::invalid_argument("cumulative_trapezoid: size mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(t.size());
    for (Eigen::Index i = 1; i < t.size(); ++i) out(i) = out(i - 1) + 0.5 * (t(i) - t(i - 1)) * (y(i) + y(i - 1));
    return out;
}

namespace {

void check_grid(const Eigen::VectorXd& t) {
    if (t.size() == 0 || std::abs(t(0)) > 1e-14) throw std::invalid_argument("time grid must start at 0");
    for (Eigen::Index i = 1; i < t.size(); ++i)
        if (!(t(i) > t(i - 1))) throw std::invalid_argument("time grid must be strictly increasing");
}

}  // namespace

Eigen::VectorXd recover_norm_integral(const Eigen::VectorXd& t, const Eigen::VectorXd& b_sum, double gamma) {
    check_grid(t);
    if (b_sum.size() != t.size()) throw std::invalid_argument("recover_norm_integral: size mismatch");
    if (b_sum.size() && b_sum.minCoeff() < -1e-6)
        throw std::invalid_argument("recover_norm_integral: negative occupancy (unmitigated data?)");
    return (-gamma * cumulative_trapezoid(t, b_sum)).array().exp();
}

Eigen::VectorXd recover_norm_success(const Eigen::VectorXd& s) {
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (!(s(i) > 0)) throw std::invalid_argument("recover_norm_success: zero success probability (all shots failed)");
    return s.cwiseMin(1.0).cwiseSqrt();
}

EscapeProfile escape_from_occupancies(const Eigen::VectorXd& t, const Eigen::MatrixXd& rho_b,
                                      const Eigen::VectorXd& norm, double gamma) {
    check_grid(t);
    if (rho_b.rows() != t.size() || norm.size() != t.size())
        throw std::invalid_argument("escape_from_occupancies: inconsistent grids");
    EscapeProfile out;
    out.time_grid = t;
    out.px_t.resize(t.size(), rho_b.cols());
    const Eigen::VectorXd a2 = norm.cwiseAbs2();
    for (Eigen::Index x = 0; x < rho_b.cols(); ++x)
        out.px_t.col(x) = 2 * gamma * cumulative_trapezoid(t, a2.cwiseProduct(rho_b.col(x)));
    out.p_t = out.px_t.rowwise().sum();
    out.final_px = out.px_t.row(t.size() - 1).transpose();
    out.residual = 1.0 - out.p_t(t.size() - 1);
    return out;
}

Eigen::MatrixXd b_columns(const Eigen::MatrixXd& occ) {
    if (occ.cols() % 2) throw std::invalid_argument("b_columns: odd number of sites");
    Eigen::MatrixXd out(occ.rows(), occ.cols() / 2);
    for (Eigen::Index x = 0; x < out.cols(); ++x) out.col(x) = occ.col(2 * x + 1);
    return out;
}

bool is_terminated(const Eigen::VectorXd& p, double threshold) {
    return p.size() > 0 && p(p.size() - 1) >= threshold;
}

EscapeProfile escape_from_normalized(const Eigen::VectorXd& t, const Eigen::MatrixXd& occ,
                                     const Eigen::VectorXd& success, double gamma, NormMethod method) {
    const Eigen::MatrixXd rho_b = b_columns(occ);
    const Eigen::VectorXd norm = method == NormMethod::integral
                                     ? recover_norm_integral(t, rho_b.rowwise().sum(), gamma)
                                     : recover_norm_success(success);
    return escape_from_occupancies(t, rho_b, norm, gamma);
}

}  // namespace nhsim
