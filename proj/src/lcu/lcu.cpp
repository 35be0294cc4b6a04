#include "nhsim/lcu.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace nhsim {

double LcuSolution::norm() const {
    double s = a0;
    for (const auto& p : pairs) s += 2 * p.weight;
    return s;
}

double LcuSolution::response(double lambda) const {
    double s = a0;
    const double root = std::sqrt(std::max(lambda, 0.0));
    for (const auto& p : pairs) s += 2 * p.weight * std::cos(root * p.tau);
    return s;
}

namespace {

// (2j-1)!!, the even moments of a standard normal
double double_factorial_odd(int j) {
    double r = 1;
    for (int k = 2 * j - 1; k > 1; k -= 2) r *= k;
    return r;
}

// unknowns: s_b, y_b (A_b = s_b^2, tau_b = sqrt(2 dt) y_b), then s_0 if A0 is free
struct MomentSystem {
    int order, pairs;
    bool pin_a0;

    int unknowns() const { return 2 * pairs + (pin_a0 ? 0 : 1); }

    Eigen::VectorXd residual(const Eigen::VectorXd& v) const {
        Eigen::VectorXd f(order);
        for (int j = 0; j < order; ++j) {
            double s = (!pin_a0 && j == 0) ? v(2 * pairs) * v(2 * pairs) : 0.0;
            for (int b = 0; b < pairs; ++b) s += 2 * v(b) * v(b) * std::pow(v(pairs + b), 2 * j);
            f(j) = s - double_factorial_odd(j);
        }
        return f;
    }

    Eigen::MatrixXd jacobian(const Eigen::VectorXd& v) const {
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(order, unknowns());
        for (int j = 0; j < order; ++j) {
            for (int b = 0; b < pairs; ++b) {
                const double s = v(b), y = v(pairs + b);
                jac(j, b) = 4 * s * std::pow(y, 2 * j);
                jac(j, pairs + b) = j == 0 ? 0.0 : 2 * s * s * 2 * j * std::pow(y, 2 * j - 1);
            }
            if (!pin_a0 && j == 0) jac(j, 2 * pairs) = 2 * v(2 * pairs);
        }
        return jac;
    }
};

bool newton(const MomentSystem& sys, Eigen::VectorXd& v) {
    Eigen::VectorXd f = sys.residual(v);
    for (int it = 0; it < 200; ++it) {
        const double r = f.norm();
        if (r < 1e-12) return true;
        const Eigen::VectorXd step = sys.jacobian(v).completeOrthogonalDecomposition().solve(-f);
        double t = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 40; ++ls, t /= 2) {
            Eigen::VectorXd trial = v + t * step;
            Eigen::VectorXd ft = sys.residual(trial);
            if (ft.allFinite() && ft.norm() < r) {
                v = std::move(trial);
                f = std::move(ft);
                moved = true;
                break;
            }
        }
        if (!moved) return false;
    }
    return f.norm() < 1e-12;
}

}  // namespace

LcuSolution solve_expansion(int order, int pairs, double dt, bool pin_a0) {
    if (order < 2) throw std::invalid_argument("solve_expansion: order must be >= 2");
    if (pairs < 1) throw std::invalid_argument("solve_expansion: need at least one pair");
    if (!(dt > 0) || !std::isfinite(dt)) throw std::invalid_argument("solve_expansion: dt must be positive");
    MomentSystem sys{order, pairs, pin_a0};
    if (sys.unknowns() < order)
        throw std::invalid_argument("solve_expansion: not enough free parameters for the requested order");

    // a few geometric spreads of the starting nodes
    for (double spread : {1.8, 1.4, 2.5, 1.2, 3.5}) {
        Eigen::VectorXd v(sys.unknowns());
        for (int b = 0; b < pairs; ++b) {
            v(b) = std::sqrt(0.5 / pairs);
            v(pairs + b) = 0.6 * std::pow(spread, b);
        }
        if (!pin_a0) v(2 * pairs) = 0.5;
        if (!newton(sys, v)) continue;

        LcuSolution sol;
        sol.order = order;
        sol.a0 = pin_a0 ? 0.0 : v(2 * pairs) * v(2 * pairs);
        for (int b = 0; b < pairs; ++b)
            sol.pairs.push_back({v(b) * v(b), std::sqrt(2 * dt) * std::abs(v(pairs + b))});
        return sol;
    }
    throw ConvergenceError("solve_expansion: no real solution for order " + std::to_string(order) + " with " +
                           std::to_string(pairs) + " pairs within the iteration budget");
}

AuxGenerator hermitian_root(const MatrixXc& h_a) {
    if (h_a.rows() != h_a.cols()) throw std::invalid_argument("hermitian_root: matrix not square");
    if ((h_a - h_a.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("hermitian_root: matrix not Hermitian");
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(h_a);
    Eigen::VectorXd ev = es.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    if (ev.minCoeff() < -1e-10 * scale)
        throw std::invalid_argument("hermitian_root: negative eigenvalue, not a loss generator");
    ev = ev.cwiseMax(0.0).cwiseSqrt();
    AuxGenerator out;
    out.kind = AuxKind::root;
    out.matrix = es.eigenvectors() * ev.cast<cd>().asDiagonal() * es.eigenvectors().adjoint();
    out.matrix = (out.matrix + out.matrix.adjoint()) / 2.0;
    return out;
}

AuxGenerator exact_onsite(double gamma, double dt, const SectorEncoding& enc, OnsiteForm form) {
    if (!(gamma > 0)) throw std::invalid_argument("exact_onsite: gamma must be positive");
    const auto dim = static_cast<Eigen::Index>(enc.dim());
    AuxGenerator out;
    out.kind = AuxKind::exact_onsite;
    out.matrix = MatrixXc::Zero(dim, dim);

    std::vector<int> b_occ(dim), a_occ(dim);
    for (Eigen::Index j = 0; j < dim; ++j)
        for (int s : enc.unrank(static_cast<std::size_t>(j))) (is_b_site(s) ? b_occ : a_occ)[j]++;

    if (form == OnsiteForm::scalar_angle) {
        const double theta = std::acos(std::exp(-gamma * std::abs(dt)));
        out.eta = std::min(1.0, std::exp(gamma * dt));
        for (Eigen::Index j = 0; j < dim; ++j) out.matrix(j, j) = theta * (dt >= 0 ? b_occ[j] : a_occ[j]);
        return out;
    }
    Eigen::VectorXd d(dim);
    for (Eigen::Index j = 0; j < dim; ++j) d(j) = std::exp(-dt * gamma * b_occ[j]);
    if (!d.allFinite()) throw std::invalid_argument("exact_onsite: e^{-H_A dt} is not finite");
    out.eta = std::min(1.0, 1.0 / d.maxCoeff());
    for (Eigen::Index j = 0; j < dim; ++j) out.matrix(j, j) = std::acos(std::clamp(out.eta * d(j), 0.0, 1.0));
    return out;
}

MatrixXc realized_operator(const LcuSolution& sol, const MatrixXc& root) {
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(root);
    Eigen::VectorXd f(root.rows());
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        const double mu = es.eigenvalues()(i);
        double s = sol.a0;
        for (const auto& p : sol.pairs) s += 2 * p.weight * std::cos(mu * p.tau);
        f(i) = s;
    }
    return es.eigenvectors() * f.cast<cd>().asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace nhsim
