#include <doctest.h>

#include <cmath>

#include "nhsim/model.hpp"
#include "nhsim/oracle.hpp"

using namespace nhsim;

namespace {

LadderParams ladder(int cells, double v1, double gamma) {
    LadderParams p;
    p.cells = cells;
    p.v1 = v1;
    p.v2 = 1.0;
    p.gamma = gamma;
    return p;
}

}  // namespace

TEST_CASE("propagator") {
    MatrixXc h = MatrixXc::Zero(2, 2);
    h(0, 1) = h(1, 0) = 1;
    const MatrixXc u = propagator(h, 0.4);
    CHECK(std::abs(u(0, 0) - std::cos(0.4)) < 1e-14);
    CHECK(std::abs(u(1, 0) - cd(0, -std::sin(0.4))) < 1e-14);
    CHECK((u * u.adjoint() - MatrixXc::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);

    MatrixXc d = MatrixXc::Zero(1, 1);
    d(0, 0) = cd(0, -0.5);
    CHECK(std::abs(propagator(d, 2.0)(0, 0) - std::exp(-1.0)) < 1e-14);
    CHECK_THROWS(propagator(MatrixXc::Zero(2, 3), 1.0));
    CHECK_THROWS(propagator(h, std::nan("")));
}

TEST_CASE("grid and basis states") {
    const Eigen::VectorXd g = uniform_grid(2.0, 4);
    REQUIRE(g.size() == 5);
    CHECK(g(1) == doctest::Approx(0.5));
    CHECK_THROWS(uniform_grid(0.0, 4));
    CHECK_THROWS(uniform_grid(1.0, 0));

    const SectorEncoding enc(3, 2);
    const VectorXc a = basis_state(enc, {4, 1}), b = basis_state(enc, {1, 4});
    CHECK(a == b);
    CHECK(a.norm() == doctest::Approx(1.0));
    const std::vector<int> s{1, 4};
    CHECK(std::abs(a(static_cast<Eigen::Index>(enc.rank(s)))) == 1.0);
}

TEST_CASE("hermitian evolution conserves the norm") {
    LadderParams p = ladder(4, 0.5, 1.0);
    const SectorEncoding enc(4, 1);
    MatrixXc h = split(build_single_particle(p)).hermitian_part;
    const auto ev = evolve_exact(h, basis_state(enc, {3}), uniform_grid(5.0, 100), enc);
    CHECK(!ev.truncated);
    CHECK((ev.norm.array() - 1.0).abs().maxCoeff() < 1e-10);
    CHECK((ev.omega_occupancies - ev.rho_occupancies).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("dimer closed form") {
    // one cell: a and b coupled by v1, loss on b
    const double v1 = 0.8, gamma = 0.6;
    LadderParams p = ladder(1, v1, gamma);
    p.v2 = 0;
    const SectorEncoding enc(1, 1);
    const Eigen::VectorXd grid = uniform_grid(4.0, 80);
    const auto ev = evolve_exact(build_single_particle(p), basis_state(enc, {0}), grid, enc);
    // underdamped: omega = sqrt(v1^2 - gamma^2/4)
    const double w = std::sqrt(v1 * v1 - gamma * gamma / 4);
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        const double t = grid(i);
        const double env = std::exp(-gamma * t / 2);
        const double a = env * (std::cos(w * t) + gamma / (2 * w) * std::sin(w * t));
        const double b = env * v1 / w * std::sin(w * t);
        CHECK(ev.omega_occupancies(i, 0) == doctest::Approx(a * a).epsilon(1e-9));
        CHECK(ev.omega_occupancies(i, 1) == doctest::Approx(b * b).epsilon(1e-9));
        CHECK(ev.norm(i) * ev.norm(i) == doctest::Approx(a * a + b * b).epsilon(1e-9));
    }
}

TEST_CASE("non-uniform grids and truncation") {
    LadderParams p = ladder(2, 1.0, 2.0);
    const SectorEncoding enc(2, 1);
    const MatrixXc h = build_single_particle(p);
    Eigen::VectorXd g(4);
    g << 0, 0.1, 0.5, 1.7;
    const auto ev = evolve_exact(h, basis_state(enc, {1}), g, enc);
    const auto ref = evolve_exact(h, basis_state(enc, {1}), uniform_grid(1.7, 17), enc);
    CHECK(ev.norm(3) == doctest::Approx(ref.norm(17)).epsilon(1e-10));
    CHECK(ev.norm(2) == doctest::Approx(ref.norm(5)).epsilon(1e-10));

    const auto cut = evolve_exact(h, basis_state(enc, {1}), uniform_grid(200.0, 200), enc);
    CHECK(cut.truncated);
    CHECK(cut.time_grid.size() < 201);
    CHECK(cut.norm.size() == cut.time_grid.size());

    CHECK_THROWS(evolve_exact(h, VectorXc::Zero(4), g, enc));
    CHECK_THROWS(evolve_exact(h, VectorXc::Ones(3), g, enc));
}

TEST_CASE("escape profile sums to the lost norm") {
    LadderParams p = ladder(4, 0.7, 1.0);
    const SectorEncoding enc(4, 1);
    const MatrixXc h = build_single_particle(p);
    const VectorXc psi = basis_state(enc, {4});
    const auto prof = escape_profile(h, psi, p.gamma, 10.0, enc, 4000);
    const auto ev = evolve_exact(h, psi, prof.time_grid, enc);
    const Eigen::Index last = prof.time_grid.size() - 1;
    const double lost = 1.0 - ev.norm(last) * ev.norm(last);
    CHECK(prof.p_t(last) == doctest::Approx(lost).epsilon(1e-5));
    CHECK(prof.residual == doctest::Approx(1.0 - prof.p_t(last)));
    CHECK(prof.final_px.size() == 4);
    CHECK(prof.final_px.minCoeff() >= 0.0);
    // trapezoid error shrinks with the grid
    const auto coarse = escape_profile(h, psi, p.gamma, 10.0, enc, 200);
    CHECK(std::abs(coarse.p_t(coarse.p_t.size() - 1) - lost) > std::abs(prof.p_t(last) - lost));
}

TEST_CASE("two particles: the first loss ends the run") {
    LadderParams p = ladder(3, 0.7, 1.0);
    const SectorEncoding enc(3, 2);
    const MatrixXc h = build_many_body(p, enc);
    const auto prof = escape_profile(h, basis_state(enc, {0, 4}), p.gamma, 60.0, enc, 6000);
    const double total = prof.p_t(prof.p_t.size() - 1);
    CHECK(total <= 1.0 + 1e-6);
    CHECK(total > 0.99);
}

TEST_CASE("spectrum") {
    MatrixXc d = MatrixXc::Zero(3, 3);
    d(0, 0) = cd(1, -0.5);
    d(1, 1) = cd(-2, -0.1);
    d(2, 2) = cd(0, -3);
    const SpectrumResult s = spectrum(d);
    CHECK(s.max_im == doctest::Approx(-0.1));
    CHECK(s.min_im == doctest::Approx(-3));
    CHECK(s.gap == doctest::Approx(0.1));

    LadderParams p = ladder(6, 1.5, 1.0);
    p.boundary = Boundary::periodic;
    const SpectrumResult lad = spectrum(build_single_particle(p));
    CHECK(lad.eigenvalues.size() == 12);
    CHECK(lad.max_im <= 1e-12);
    CHECK(lad.min_im >= -1.0 - 1e-12);
    CHECK(lad.eigenvalues.imag().sum() == doctest::Approx(-6.0));
}
