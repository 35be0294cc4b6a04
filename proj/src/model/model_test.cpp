#include <doctest.h>

#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "nhsim/model.hpp"
#include "nhsim/pauli.hpp"

using namespace nhsim;

namespace {

LadderParams ladder(int n, double v1, double v2, double g, Boundary b = Boundary::open) {
    LadderParams p;
    p.cells = n;
    p.v1 = v1;
    p.v2 = v2;
    p.gamma = g;
    p.boundary = b;
    return p;
}

double max_abs(const MatrixXc& m) { return m.cwiseAbs().maxCoeff(); }

// sort complex numbers for multiset comparison
std::vector<cd> sorted(std::vector<cd> v) {
    std::sort(v.begin(), v.end(), [](cd a, cd b) {
        if (std::abs(a.real() - b.real()) > 1e-7) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return v;
}

}  // namespace

TEST_CASE("single cell keeps only v1 and loss") {
    const MatrixXc h = build_single_particle(ladder(1, 1, 0, 2));
    MatrixXc want(2, 2);
    want << 0, 1, 1, cd(0, -2);
    CHECK(max_abs(h - want) < 1e-15);
}

TEST_CASE("no hopping leaves the loss diagonal") {
    const MatrixXc h = build_single_particle(ladder(2, 0, 0, 1));
    MatrixXc want = MatrixXc::Zero(4, 4);
    want(1, 1) = want(3, 3) = cd(0, -1);
    CHECK(max_abs(h - want) < 1e-15);
}

TEST_CASE("term-by-term construction agrees") {
    // independent build straight from the hopping sum, written as outer products
    const int n = 8;
    const double v2 = 1.0, v1 = 0.7, g = 0.9;
    const MatrixXc h = build_single_particle(ladder(n, v1, v2, g));
    MatrixXc ref = MatrixXc::Zero(2 * n, 2 * n);
    auto ket = [&](int x, char l) {
        VectorXc v = VectorXc::Zero(2 * n);
        v(2 * x - (l == 'a' ? 1 : 0) - 1) = 1;
        return v;
    };
    for (int x = 1; x <= n; ++x) {
        MatrixXc t = v1 * ket(x, 'a') * ket(x, 'b').adjoint();
        if (x < n) {
            t += (v2 / 2.0) * (ket(x + 1, 'a') * ket(x, 'b').adjoint() + ket(x + 1, 'b') * ket(x, 'a').adjoint());
            t += (I * v2 / 2.0) * (ket(x + 1, 'a') * ket(x, 'a').adjoint() - ket(x + 1, 'b') * ket(x, 'b').adjoint());
        }
        ref += t + MatrixXc(t.adjoint());
        ref -= I * g * ket(x, 'b') * ket(x, 'b').adjoint();
    }
    CHECK(max_abs(h - ref) < 1e-14);
    const auto parts = split(h);
    MatrixXc ha = MatrixXc::Zero(2 * n, 2 * n);
    for (int x = 1; x <= n; ++x) ha(2 * x - 1, 2 * x - 1) = g;
    CHECK(max_abs(parts.antihermitian_generator - ha) < 1e-14);
}

TEST_CASE("many-body sector reduces to single particle at p = 1") {
    auto p = ladder(5, 0.6, 1.0, 0.8);
    p.interactions[1] = 3.0;  // no pairs with one particle
    const SectorEncoding enc(5, 1);
    CHECK(max_abs(build_many_body(p, enc) - build_single_particle(p)) < 1e-15);
}

TEST_CASE("two particles without hopping: pair and loss counting") {
    auto p = ladder(2, 0, 0, 1);
    p.interactions[1] = 5;
    const SectorEncoding enc(2, 2);
    const MatrixXc h = build_many_body(p, enc);
    CHECK(max_abs(h - MatrixXc(h.diagonal().asDiagonal())) < 1e-15);
    const int zero_one[] = {0, 1};
    CHECK(std::abs(h(enc.rank(zero_one), enc.rank(zero_one)) - cd(5, -1)) < 1e-15);
    const int zero_three[] = {0, 3};
    CHECK(std::abs(h(enc.rank(zero_three), enc.rank(zero_three)) - cd(0, -1)) < 1e-15);
}

TEST_CASE("hardcore sector matches projected distinguishable-particle build") {
    const int n = 12;
    auto p = ladder(n, 0.8, 1.0, 1.5);
    p.interactions[1] = 2.5;
    const SectorEncoding enc(n, 2);
    const MatrixXc h = build_many_body(p, enc);
    const MatrixXc h1 = build_single_particle(p);
    const int s = 2 * n;
    // H0 x I + I x H0 + interaction diagonal, then symmetrized projection
    MatrixXc big = MatrixXc::Zero(s * s, s * s);
    const MatrixXc id = MatrixXc::Identity(s, s);
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j) {
            big.block(i * s, j * s, s, s) += h1(i, j) * id;
            if (i == j) big.block(i * s, i * s, s, s) += h1;
        }
    for (int a = 0; a < s; ++a)
        for (int b = 0; b < s; ++b)
            if (std::abs(a - b) == 1) big(a * s + b, a * s + b) += 2.5;
    MatrixXc proj = MatrixXc::Zero(s * s, static_cast<Eigen::Index>(enc.dim()));
    for (std::size_t k = 0; k < enc.dim(); ++k) {
        const auto c = enc.unrank(k);
        proj(c[0] * s + c[1], k) = 1 / std::sqrt(2.0);
        proj(c[1] * s + c[0], k) = 1 / std::sqrt(2.0);
    }
    const MatrixXc reduced = proj.adjoint() * big * proj;
    CHECK(max_abs(reduced - h) < 1e-12);

    Eigen::ComplexEigenSolver<MatrixXc> e1(h), e2(reduced);
    // nearest-neighbour match, sorting mixes up near-degenerate pairs
    double worst = 0;
    for (Eigen::Index i = 0; i < e1.eigenvalues().size(); ++i)
        worst = std::max(worst, (e2.eigenvalues().array() - e1.eigenvalues()(i)).abs().minCoeff());
    CHECK(worst < 1e-4);
}

TEST_CASE("number conservation: hops move exactly one particle") {
    auto p = ladder(4, 1, 1, 1);
    p.interactions[2] = 1;
    const SectorEncoding enc(4, 3);
    const MatrixXc h = build_many_body(p, enc);
    for (Eigen::Index r = 0; r < h.rows(); ++r)
        for (Eigen::Index c = 0; c < h.cols(); ++c) {
            if (r == c || h(r, c) == cd{}) continue;
            auto a = enc.unrank(r), b = enc.unrank(c);
            std::vector<int> diff;
            std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
            CHECK(diff.size() == 2);
        }
}

TEST_CASE("H_A spectrum is {0, gamma, ..., p gamma}") {
    auto p = ladder(3, 0.5, 1, 0.7);
    const SectorEncoding enc(3, 2);
    const auto parts = split(build_many_body(p, enc));
    const Eigen::VectorXd d = parts.antihermitian_generator.diagonal().real();
    CHECK(max_abs(parts.antihermitian_generator - MatrixXc(parts.antihermitian_generator.diagonal().asDiagonal())) < 1e-14);
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        const double k = d(i) / 0.7;
        CHECK(std::abs(k - std::round(k)) < 1e-12);
        CHECK(k >= -1e-12);
        CHECK(k <= 2 + 1e-12);
    }
}

TEST_CASE("bloch eigenvalues") {
    const double g = 0.8;
    SUBCASE("gap closing point at k = pi") {
        const auto r = bloch(ladder(1, 1, 1, g), std::numbers::pi);
        auto e = r.energies;
        if (e[0].imag() < e[1].imag()) std::swap(e[0], e[1]);
        CHECK(std::abs(e[0]) < 1e-12);
        CHECK(std::abs(e[1] - cd(0, -g)) < 1e-12);
    }
    SUBCASE("v2 = 0 closed form") {
        const double v1 = 0.3;
        const auto r = bloch(ladder(1, v1, 0, g), 1.234);
        const cd s = std::sqrt(cd(v1 * v1 - g * g / 4));
        const cd a = -I * g / 2.0 + s, b = -I * g / 2.0 - s;
        const bool direct = std::abs(r.energies[0] - a) < 1e-12 && std::abs(r.energies[1] - b) < 1e-12;
        const bool swapped = std::abs(r.energies[0] - b) < 1e-12 && std::abs(r.energies[1] - a) < 1e-12;
        CHECK((direct || swapped));
    }
    SUBCASE("Hermitian limit") {
        auto p = ladder(1, 1, 1, 1e-300);
        const auto r = bloch(p, 0.0);
        CHECK(std::abs(std::abs(r.energies[0].real()) - 2) < 1e-12);
        CHECK(std::abs(r.energies[0] + r.energies[1]) < 1e-12);
    }
    SUBCASE("matrix eigenvalues agree with returned pair") {
        const auto r = bloch(ladder(1, 0.4, 1.1, g), 2.2);
        Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(r.matrix);
        const cd s0 = es.eigenvalues()(0) + es.eigenvalues()(1);
        CHECK(std::abs(s0 - (r.energies[0] + r.energies[1])) < 1e-12);
    }
}

TEST_CASE("periodic spectrum equals Bloch bands on the k grid") {
    const int n = 10;
    const auto p = ladder(n, 0.6, 1.0, 0.9, Boundary::periodic);
    Eigen::ComplexEigenSolver<MatrixXc> es(build_single_particle(p));
    std::vector<cd> real_space(es.eigenvalues().data(), es.eigenvalues().data() + 2 * n), bands;
    for (int j = 0; j < n; ++j) {
        const auto r = bloch(p, 2 * std::numbers::pi * j / n);
        bands.push_back(r.energies[0]);
        bands.push_back(r.energies[1]);
    }
    real_space = sorted(real_space);
    bands = sorted(bands);
    double worst = 0;
    for (int i = 0; i < 2 * n; ++i) worst = std::max(worst, std::abs(real_space[i] - bands[i]));
    CHECK(worst < 1e-9);
}

TEST_CASE("periodic spectrum reflection symmetries") {
    const auto p = ladder(12, 0.7, 1.0, 1.0, Boundary::periodic);
    Eigen::ComplexEigenSolver<MatrixXc> es(build_single_particle(p));
    std::vector<cd> e(es.eigenvalues().data(), es.eigenvalues().data() + 24), r1, r2;
    for (cd z : e) {
        r1.push_back(-std::conj(z));
        r2.push_back(std::conj(z) - I * p.gamma);
    }
    e = sorted(e);
    r1 = sorted(r1);
    r2 = sorted(r2);
    double w1 = 0, w2 = 0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        w1 = std::max(w1, std::abs(e[i] - r1[i]));
        w2 = std::max(w2, std::abs(e[i] - r2[i]));
    }
    CHECK(w1 < 1e-9);
    CHECK(w2 < 1e-9);
}

TEST_CASE("split") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    MatrixXc m(6, 6);
    for (Eigen::Index i = 0; i < 36; ++i) m(i) = cd(nd(rng), nd(rng));
    const auto s = split(m);
    CHECK(max_abs(s.hermitian_part - MatrixXc(s.hermitian_part.adjoint())) < 1e-12);
    CHECK(max_abs(s.antihermitian_generator - MatrixXc(s.antihermitian_generator.adjoint())) < 1e-12);
    CHECK(max_abs(s.hermitian_part - I * s.antihermitian_generator - m) < 1e-12);

    MatrixXc herm = m + MatrixXc(m.adjoint());
    CHECK(max_abs(split(herm).antihermitian_generator) < 1e-15);

    MatrixXc loss = MatrixXc::Zero(4, 4);
    loss(1, 1) = loss(3, 3) = cd(0, -0.5);
    const auto sl = split(loss);
    CHECK(max_abs(sl.hermitian_part) < 1e-15);
    CHECK(std::abs(sl.antihermitian_generator(1, 1) - 0.5) < 1e-15);

    // templated on scalar: float matrices work too
    Eigen::MatrixXcf mf = m.cast<std::complex<float>>();
    const auto sf = split(mf);
    CHECK((sf.hermitian_part - std::complex<float>(0, 1) * sf.antihermitian_generator - mf).cwiseAbs().maxCoeff() < 1e-5f);
}

TEST_CASE("pauli decomposition") {
    SUBCASE("identity") {
        const auto t = pauli_decompose(MatrixXc::Identity(2, 2));
        REQUIRE(t.size() == 1);
        CHECK(t[0].string.str() == "I");
        CHECK(std::abs(t[0].coefficient - 1.0) < 1e-15);
    }
    SUBCASE("projector onto |1>") {
        MatrixXc m = MatrixXc::Zero(2, 2);
        m(1, 1) = 0.7;
        const auto t = pauli_decompose(m);
        REQUIRE(t.size() == 2);
        CHECK(t[0].string.str() == "I");
        CHECK(std::abs(t[0].coefficient - 0.35) < 1e-15);
        CHECK(t[1].string.str() == "Z");
        CHECK(std::abs(t[1].coefficient + 0.35) < 1e-15);
    }
    SUBCASE("Y letter phase") {
        const auto t = pauli_decompose(to_dense(PauliString::parse("XY")));
        REQUIRE(t.size() == 1);
        CHECK(t[0].string.str() == "XY");
        CHECK(std::abs(t[0].coefficient - 1.0) < 1e-14);
    }
    SUBCASE("ladder Hermitian part resums") {
        const auto parts = split(build_single_particle(ladder(8, 0.7, 1, 1)));
        const auto terms = real_terms(pauli_decompose(parts.hermitian_part, 4));
        CHECK(max_abs(to_dense(terms, 4) - parts.hermitian_part) < 1e-10);
    }
    SUBCASE("padded sector operators resum inside the top-left block") {
        auto p = ladder(3, 0.5, 1, 1);
        p.interactions[1] = 2;
        const SectorEncoding enc(3, 2);  // D = 15 in 16
        const MatrixXc h = build_many_body(p, enc);
        const auto terms = pauli_decompose(h, enc.n_qubits());
        CHECK(max_abs(to_dense(terms, enc.n_qubits()) - embed(h, enc.n_qubits())) < 1e-10);
    }
    SUBCASE("random complex matrix") {
        std::mt19937_64 rng(9);
        std::normal_distribution<double> nd;
        MatrixXc m(8, 8);
        for (Eigen::Index i = 0; i < 64; ++i) m(i) = cd(nd(rng), nd(rng));
        CHECK(max_abs(to_dense(pauli_decompose(m), 3) - m) < 1e-10);
    }
    SUBCASE("rejects non power of two without explicit register") {
        CHECK_THROWS_AS(pauli_decompose(MatrixXc::Identity(3, 3)), std::invalid_argument);
    }
}

TEST_CASE("pauli string algebra") {
    const auto a = PauliString::parse("XZI"), b = PauliString::parse("ZXI"), c = PauliString::parse("IXZ");
    CHECK(a.commutes(b));
    CHECK(!a.commutes(c));
    CHECK(a.support() == std::vector<int>{0, 1});
    CHECK(a.str() == "XZI");
    // commutation agrees with dense matrices
    const auto words = {"XY", "YZ", "ZZ", "XI", "IY", "YY"};
    for (auto u : words)
        for (auto v : words) {
            const auto pu = PauliString::parse(u), pv = PauliString::parse(v);
            const MatrixXc mu = to_dense(pu), mv = to_dense(pv);
            CHECK(pu.commutes(pv) == (max_abs(mu * mv - mv * mu) < 1e-12));
        }
}

TEST_CASE("dissipative gap") {
    for (double v1 : {0.25, 0.5, 0.75, 1.0}) {
        const auto g = dissipative_gap(ladder(1, v1, 1, 1));
        CHECK(g.gap < 1e-9);
        CHECK(g.min_im >= -1 - 1e-12);
    }
    double prev = 0;
    for (double v1 : {1.25, 1.5, 2.0}) {
        const auto g = dissipative_gap(ladder(1, v1, 1, 1));
        CHECK(g.gap > prev);
        prev = g.gap;
    }
    // dense scan agrees
    const auto p = ladder(1, 1.5, 1, 1);
    double best = -1e9, worst = 1e9;
    for (int j = 0; j < 20000; ++j) {
        const auto r = bloch(p, 2 * std::numbers::pi * j / 20000);
        for (cd e : r.energies) {
            best = std::max(best, e.imag());
            worst = std::min(worst, e.imag());
        }
    }
    const auto g = dissipative_gap(p);
    CHECK(g.max_im >= best - 1e-12);
    CHECK(g.max_im - best < 1e-6);
    CHECK(g.min_im <= worst + 1e-12);
    CHECK_THROWS(dissipative_gap(p, 10));
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(build_single_particle(ladder(0, 1, 1, 1)), ConfigError);
    CHECK_THROWS_AS(build_single_particle(ladder(2, 1, 1, 0)), ConfigError);
    CHECK_THROWS_AS(build_single_particle(ladder(2, -1, 1, 1)), ConfigError);
    auto p = ladder(2, 1, 1, 1);
    p.interactions[0] = 1;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}
