#include <doctest.h>

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "nhsim/lcu.hpp"
#include "nhsim/model.hpp"

using namespace nhsim;

namespace {

MatrixXc cos_of_hermitian(const MatrixXc& m) {
    const MatrixXc e = MatrixXc(I * m).exp();
    return (e + e.adjoint()) / 2.0;
}

double response_error(const LcuSolution& s, double lambda, double dt) {
    return std::abs(s.response(lambda) - std::exp(-lambda * dt));
}

}  // namespace

TEST_CASE("second order single pair") {
    const double dt = 0.02;
    const LcuSolution s = solve_expansion(2, 1, dt);
    REQUIRE(s.pairs.size() == 1);
    CHECK(s.a0 == 0.0);
    CHECK(s.pairs[0].weight == doctest::Approx(0.5));
    CHECK(s.pairs[0].tau == doctest::Approx(std::sqrt(2 * dt)));
    CHECK(s.norm() == doctest::Approx(1.0));
    CHECK(s.response(0) == doctest::Approx(1.0));
}

TEST_CASE("truncation error scales with order") {
    for (auto [order, pairs, pin] : {std::tuple{2, 1, true}, std::tuple{3, 2, true}, std::tuple{4, 2, true},
                                     std::tuple{5, 2, false}}) {
        CAPTURE(order);
        const double lambda = 1.3;
        const double e1 = response_error(solve_expansion(order, pairs, 0.04, pin), lambda, 0.04);
        const double e2 = response_error(solve_expansion(order, pairs, 0.02, pin), lambda, 0.02);
        const double ratio = e1 / e2;
        const double want = std::pow(2.0, order);
        CHECK(ratio > 0.7 * want);
        CHECK(ratio < 1.3 * want);
    }
}

TEST_CASE("moment conditions hold") {
    const LcuSolution s = solve_expansion(4, 2, 0.05);
    CHECK(s.norm() == doctest::Approx(1.0).epsilon(1e-10));
    for (const auto& p : s.pairs) {
        CHECK(p.weight > 0);
        CHECK(p.tau > 0);
    }
    // small lambda agrees with the series through lambda^3
    const double lam = 1e-2;
    CHECK(response_error(s, lam, 0.05) < 1e-10);
}

TEST_CASE("solver input checks") {
    CHECK_THROWS_AS(solve_expansion(1, 1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(solve_expansion(2, 0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(solve_expansion(2, 1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(solve_expansion(2, 1, std::nan("")), std::invalid_argument);
    CHECK_THROWS_AS(solve_expansion(4, 1, 0.1), std::invalid_argument);
}

TEST_CASE("hermitian root of the loss generator") {
    LadderParams p;
    p.cells = 3;
    p.v1 = 0.6;
    p.v2 = 1;
    p.gamma = 1.7;
    const auto parts = split(build_single_particle(p));
    const AuxGenerator r = hermitian_root(parts.antihermitian_generator);
    CHECK(r.kind == AuxKind::root);
    CHECK((r.matrix - r.matrix.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((r.matrix * r.matrix - parts.antihermitian_generator).cwiseAbs().maxCoeff() < 1e-12);

    MatrixXc neg = MatrixXc::Zero(2, 2);
    neg(0, 0) = -1;
    CHECK_THROWS(hermitian_root(neg));
    MatrixXc nh = MatrixXc::Zero(2, 2);
    nh(0, 1) = 1;
    CHECK_THROWS(hermitian_root(nh));
}

TEST_CASE("realized operator approximates the decay map") {
    LadderParams p;
    p.cells = 2;
    p.gamma = 1.2;
    const auto parts = split(build_single_particle(p));
    const MatrixXc root = hermitian_root(parts.antihermitian_generator).matrix;
    auto err = [&](double dt) {
        const MatrixXc want = MatrixXc(-parts.antihermitian_generator * dt).exp();
        return (realized_operator(solve_expansion(2, 1, dt), root) - want).cwiseAbs().maxCoeff();
    };
    CHECK(err(0.01) < 1e-3);
    CHECK(err(0.02) / err(0.01) == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("exact on-site generator") {
    const double gamma = 0.9;
    for (int particles : {1, 2}) {
        const SectorEncoding enc(3, particles);
        for (double dt : {0.05, 0.4, -0.3}) {
            CAPTURE(particles);
            CAPTURE(dt);
            const AuxGenerator g = exact_onsite(gamma, dt, enc);
            CHECK(g.kind == AuxKind::exact_onsite);
            CHECK(g.eta <= 1.0);
            CHECK((g.matrix - MatrixXc(g.matrix.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0);
            const MatrixXc lhs = cos_of_hermitian(g.matrix) / g.eta;
            for (std::size_t j = 0; j < enc.dim(); ++j) {
                int b = 0;
                for (int s : enc.unrank(j)) b += is_b_site(s);
                CHECK(lhs(j, j).real() == doctest::Approx(std::exp(-gamma * dt * b)).epsilon(1e-12));
            }
        }
    }
    SUBCASE("scalar angle form for one particle") {
        const SectorEncoding enc(3, 1);
        const AuxGenerator g = exact_onsite(gamma, 0.2, enc, OnsiteForm::scalar_angle);
        const MatrixXc lhs = cos_of_hermitian(g.matrix) / g.eta;
        for (std::size_t j = 0; j < enc.dim(); ++j)
            CHECK(lhs(j, j).real() ==
                  doctest::Approx(std::exp(-gamma * 0.2 * (is_b_site(enc.unrank(j)[0]) ? 1 : 0))).epsilon(1e-12));
    }
    CHECK_THROWS(exact_onsite(0.0, 0.1, SectorEncoding(2, 1)));
}
