#include <doctest.h>

#include <random>

#include "nhsim/engine.hpp"
#include "nhsim/oracle.hpp"

using namespace nhsim;

namespace {

Circuit random_circuit(int n, int gates, Rng& rng) {
    Circuit c(n);
    std::uniform_int_distribution<int> q(0, n - 1), kind(0, 5);
    std::uniform_real_distribution<double> ang(-3, 3);
    for (int i = 0; i < gates; ++i) {
        const int a = q(rng);
        switch (kind(rng)) {
            case 0: c.h(a); break;
            case 1: c.s(a); break;
            case 2: c.rz(a, ang(rng)); break;
            case 3: c.rx(a, ang(rng)); break;
            default: {
                int b = q(rng);
                if (b == a) b = (a + 1) % n;
                c.cx(a, b);
            }
        }
    }
    return c;
}

EvolveRequest small_request(int steps) {
    EvolveRequest r;
    r.params.cells = 3;
    r.params.v1 = 0.7;
    r.params.v2 = 1.0;
    r.params.gamma = 1.0;
    r.particles = 1;
    r.initial.sites = {4};
    r.t_max = 3.0;
    r.steps = steps;
    return r;
}

double max_error_vs_oracle(const EvolveRequest& req, const RunResult& res) {
    const SectorEncoding enc(req.params.cells, req.particles);
    const MatrixXc h = build_many_body(req.params, enc);
    const auto ref = evolve_exact(h, basis_state(enc, req.initial.sites), res.time_grid, enc);
    return (ref.rho_occupancies - res.occupancies).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("state vector") {
    StateVector s(2, 1);
    CHECK(s.size() == 8);
    CHECK(s.norm() == doctest::Approx(1.0));
    s.set_basis_state(5);  // system 2, ancilla 1
    const Eigen::VectorXd p = s.system_probabilities();
    REQUIRE(p.size() == 4);
    CHECK(p(2) == doctest::Approx(1.0));
    CHECK_THROWS(s.set_basis_state(8));
    s.amplitudes() *= 3.0;
    s.normalize();
    CHECK(s.norm() == doctest::Approx(1.0));
    CHECK_THROWS(StateVector(31));
}

TEST_CASE("exact run prepares a Bell pair") {
    Circuit c(2);
    c.h(0).cx(0, 1);
    Rng rng(1);
    const RunOutput out = run(c, ExecMode::exact(), nullptr, rng);
    const VectorXc& a = out.state.amplitudes();
    CHECK(std::abs(a(0)) == doctest::Approx(std::sqrt(0.5)));
    CHECK(std::abs(a(3)) == doctest::Approx(std::sqrt(0.5)));
    CHECK(std::abs(a(1)) < 1e-15);
}

TEST_CASE("shot counts and readout flips") {
    Circuit c(2);
    c.h(0);
    c.measure(0);
    c.measure(1);
    Rng rng(3);
    const RunOutput out = run(c, ExecMode::sampled(20000), nullptr, rng);
    CHECK(out.counts.size() == 2);
    const double f = static_cast<double>(out.counts.at("10")) / 20000;
    CHECK(std::abs(f - 0.5) < 0.02);
    CHECK(out.counts.count("01") == 0);

    NoiseModel noise;
    noise.readout = {{0.0, 0.0}, {0.1, 0.2}};
    Circuit d(2);
    d.x(0);
    d.measure(0);
    d.measure(1);
    Rng rng2(4);
    const RunOutput flips = run(d, ExecMode::sampled(40000), &noise, rng2);
    const double f01 = static_cast<double>(flips.counts.at("11")) / 40000;
    CHECK(std::abs(f01 - 0.1) < 0.01);
    CHECK(flips.counts.count("00") == 0);

    Rng a(9), b(9);
    CHECK(run(c, ExecMode::sampled(500), &noise, a).counts == run(c, ExecMode::sampled(500), &noise, b).counts);
}

TEST_CASE("depolarizing noise mixes the state") {
    Circuit c(1);
    for (int i = 0; i < 200; ++i) c.x(0);
    c.measure(0);
    NoiseModel noise;
    noise.p1 = 0.05;
    Rng rng(5);
    const RunOutput out = run(c, ExecMode::sampled(4000), &noise, rng);
    const double ones = static_cast<double>(out.counts.count("1") ? out.counts.at("1") : 0) / 4000;
    CHECK(std::abs(ones - 0.5) < 0.05);
}

TEST_CASE("noise model validation") {
    NoiseModel n;
    n.p1 = 1.2;
    CHECK_THROWS_AS(n.validate(), ConfigError);
    n.p1 = 0;
    n.readout = {{0.1, -0.1}};
    CHECK_THROWS_AS(n.validate(), ConfigError);
    n.readout = {{0.1, 0.2}};
    CHECK(n.readout_for(7)[1] == 0.2);
}

TEST_CASE("readout sampling") {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(4);
    p(2) = 1;
    Rng rng(6);
    for (int i = 0; i < 50; ++i) CHECK(sample_readout(p, 2, 0, nullptr, rng) == 2);
    NoiseModel n;
    n.readout = {{0.0, 0.0}, {0.25, 0.0}};
    int flipped = 0;
    for (int i = 0; i < 20000; ++i) flipped += sample_readout(p, 2, 0, &n, rng) == 3;
    CHECK(std::abs(flipped / 20000.0 - 0.25) < 0.015);
}

TEST_CASE("fused programs agree with gate-by-gate execution") {
    Rng rng(7);
    for (int n : {3, 5, 7}) {
        Circuit c = random_circuit(n, 120, rng);
        c.barrier();
        c.append(random_circuit(n, 40, rng));
        const MatrixXc u = circuit_unitary(c);
        const Program fused(c, 100000), plain(c, 1);
        if (n < 7) CHECK(fused.dense_blocks() >= 1);  // 2^7 exceeds the run length
        CHECK(plain.dense_blocks() == 0);
        for (int col : {0, 1, (1 << n) - 1}) {
            VectorXc a = VectorXc::Zero(1 << n), b = a;
            a(col) = 1;
            b(col) = 1;
            CHECK(fused.run_postselected(a) == doctest::Approx(1.0));
            plain.run_postselected(b);
            CHECK((a - u.col(col)).norm() < 1e-10);
            CHECK((b - u.col(col)).norm() < 1e-10);
        }
    }
}

TEST_CASE("post-selected program reports the branch probability") {
    Circuit c(2);
    c.rx(1, 1.0);
    const int m = c.measure(1);
    c.reset_conditional(1, m);
    VectorXc psi = VectorXc::Zero(4);
    psi(0) = 1;
    const double p0 = Program(c, 1).run_postselected(psi);
    CHECK(p0 == doctest::Approx(std::cos(0.5) * std::cos(0.5)));
    CHECK(std::abs(psi(0)) == doctest::Approx(1.0));
}

TEST_CASE("exact-mode evolution converges to the reference") {
    const EngineOptions opt;
    const EvolveRequest r1 = small_request(60), r2 = small_request(120);
    const RunResult a = evolve(r1, opt), b = evolve(r2, opt);
    CHECK(a.time_grid.size() == 61);
    CHECK(a.occupancies.cols() == 6);
    for (Eigen::Index t = 0; t < a.occupancies.rows(); ++t)
        CHECK(a.occupancies.row(t).sum() == doctest::Approx(1.0).epsilon(1e-9));
    const double e1 = max_error_vs_oracle(r1, a), e2 = max_error_vs_oracle(r2, b);
    CHECK(e1 < 0.02);
    CHECK(e2 < e1);
    CHECK(e1 / e2 > 1.6);

    // cumulative success tracks the norm of the unnormalized reference
    const SectorEncoding enc(3, 1);
    const auto ref = evolve_exact(build_many_body(r2.params, enc), basis_state(enc, {4}), b.time_grid, enc);
    CHECK((ref.norm.cwiseAbs2() - b.success_probability).cwiseAbs().maxCoeff() < 0.02);
    CHECK(b.success_probability(0) == doctest::Approx(1.0));
    for (Eigen::Index t = 1; t < b.success_probability.size(); ++t)
        CHECK(b.success_probability(t) <= b.success_probability(t - 1) + 1e-12);
}

TEST_CASE("two particles with interactions") {
    EvolveRequest r = small_request(200);
    r.params.cells = 3;
    r.params.interactions = {{1, 2.0}};
    r.particles = 2;
    r.initial.sites = {1, 4};
    r.t_max = 2.0;
    EngineOptions opt;
    const RunResult res = evolve(r, opt);
    CHECK(max_error_vs_oracle(r, res) < 0.02);
    for (Eigen::Index t = 0; t < res.occupancies.rows(); ++t)
        CHECK(res.occupancies.row(t).sum() == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("shot mode matches exact mode statistically and is thread independent") {
    EvolveRequest r = small_request(30);
    r.t_max = 1.5;
    EngineOptions ex;
    const RunResult exact = evolve(r, ex);
    EngineOptions sh;
    sh.mode = ExecMode::sampled(20000);
    sh.seed = 12;
    const RunResult a = evolve(r, sh);
    CHECK((a.occupancies - exact.occupancies).cwiseAbs().maxCoeff() < 0.03);
    CHECK((a.success_probability - exact.success_probability).cwiseAbs().maxCoeff() < 0.02);
    sh.threads = 3;
    const RunResult b = evolve(r, sh);
    CHECK(a.counts == b.counts);
    CHECK(a.occupancies == b.occupancies);
    sh.seed = 13;
    CHECK(evolve(r, sh).counts != a.counts);
}

TEST_CASE("maximally mixed ensemble") {
    const SectorEncoding enc(2, 2);
    const auto states = prepare_maximally_mixed(enc);
    CHECK(states.size() == enc.dim());
    EvolveRequest r = small_request(20);
    r.params.cells = 2;
    r.particles = 1;
    r.initial.sites.clear();
    r.initial.maximally_mixed = true;
    EngineOptions opt;
    opt.keep_distributions = true;
    const RunResult res = evolve(r, opt);
    CHECK(res.occupancies.row(0).sum() == doctest::Approx(1.0));
    for (Eigen::Index s = 0; s < 4; ++s) CHECK(res.occupancies(0, s) == doctest::Approx(0.25));
    CHECK(res.distributions.rows() == res.time_grid.size());
}

TEST_CASE("imaginary energy by Hamiltonian averaging") {
    LadderParams p;
    p.cells = 2;
    p.gamma = 1.5;
    const SectorEncoding enc(2, 1);
    const auto parts = split(build_many_body(p, enc));
    const auto terms = real_terms(pauli_decompose(embed(parts.antihermitian_generator, 2), 2));
    const auto groups = group_commuting(terms);
    Eigen::VectorXd probs = Eigen::VectorXd::Zero(4);
    probs(1) = 1;  // particle on a b site
    CHECK(measure_imaginary_energy(probs, terms, groups) == doctest::Approx(-1.5));
    probs.setConstant(0.25);
    CHECK(measure_imaginary_energy(probs, terms, groups) == doctest::Approx(-0.75));
    VectorXc psi = VectorXc::Zero(4);
    psi(0) = psi(3) = std::sqrt(0.5);
    CHECK(measure_imaginary_energy(psi, terms, groups) == doctest::Approx(-0.75));
    std::vector<std::vector<RealPauliTerm>> partial(groups.begin(), groups.end() - 1);
    if (!groups.empty() && groups.size() > 1) CHECK_THROWS(measure_imaginary_energy(probs, terms, partial));
}

TEST_CASE("post-selected distribution helpers") {
    LayeredCounts counts;
    counts[{0, 0}] = 30;
    counts[{0, 1}] = 10;
    counts[{1, 0}] = 50;  // failed
    counts[{0, 5}] = 7;   // outside the sector
    std::uint64_t disc = 0;
    const Eigen::VectorXd p = postselected_distribution(counts, 4, &disc);
    CHECK(disc == 7);
    CHECK(p(0) == doctest::Approx(0.75));
    CHECK(p(1) == doctest::Approx(0.25));

    const SectorEncoding enc(2, 2);
    Eigen::VectorXd q = Eigen::VectorXd::Zero(enc.dim());
    q(0) = 1;
    const Eigen::VectorXd occ = occupancies_from_distribution(q, enc);
    const auto sites = enc.unrank(0);
    CHECK(occ.sum() == doctest::Approx(2.0));
    for (int s : sites) CHECK(occ(s) == 1.0);
    CHECK_THROWS(occupancies_from_distribution(Eigen::VectorXd::Zero(3), enc));
}

TEST_CASE("evolve rejects bad requests") {
    EngineOptions opt;
    EvolveRequest r = small_request(0);
    CHECK_THROWS_AS(evolve(r, opt), ConfigError);
    r = small_request(10);
    r.initial.sites = {99};
    CHECK_THROWS_AS(evolve(r, opt), ConfigError);
    r = small_request(10);
    opt.qubit_cap = 2;
    CHECK_THROWS_AS(evolve(r, opt), ConfigError);
}

TEST_CASE("step circuit layout") {
    const EvolveRequest r = small_request(10);
    const SectorEncoding enc(3, 1);
    const StepCircuit sc = build_step(r, enc);
    CHECK(sc.step.n_qubits() == enc.n_qubits() + 1);
    CHECK(sc.tau == 1.0);
    CHECK(sc.aux.kind == AuxKind::exact_onsite);
    int measures = 0;
    for (const auto& ins : sc.step.instructions()) measures += ins.kind == OpKind::measure;
    CHECK(measures == 1);
}
