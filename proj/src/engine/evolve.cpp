#include <algorithm>
#include <cmath>
#include <set>

#include "engine/pool.hpp"
#include "engine/trajectory.hpp"
#include "nhsim/engine.hpp"

namespace nhsim {

StepCircuit build_step(const EvolveRequest& req, const SectorEncoding& enc) {
    const MatrixXc h = build_many_body(req.params, enc);
    const auto parts = split(h);
    const int n = enc.n_qubits();
    const int anc = n;
    const double dt = req.t_max / req.steps;

    StepCircuit sc;
    sc.h_terms = real_terms(pauli_decompose(embed(parts.hermitian_part, n), n));
    if (req.lcu == LcuKind::exact_onsite) {
        sc.aux = exact_onsite(req.params.gamma, dt, enc, req.onsite_form);
        sc.tau = 1.0;
    } else {
        const LcuSolution sol = solve_expansion(2, 1, dt);
        sc.aux = hermitian_root(parts.antihermitian_generator);
        sc.tau = sol.pairs.at(0).tau;
    }
    sc.aux_terms = real_terms(pauli_decompose(embed(sc.aux.matrix, n), n));

    const Circuit plus = trotter_step(sc.aux_terms, -sc.tau, anc, n + 1);
    const Circuit minus = trotter_step(sc.aux_terms, sc.tau, anc, n + 1);
    sc.step = Circuit(n + 1);
    sc.step.append(trotter_step(sc.h_terms, dt, std::nullopt, n + 1));
    sc.step.barrier();
    sc.step.append(lcu_step(plus, minus, {1.0, 1.0}, anc));
    sc.step.validate();
    return sc;
}

std::vector<std::uint64_t> prepare_maximally_mixed(const SectorEncoding& enc) {
    std::vector<std::uint64_t> out(enc.dim());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
    return out;
}

namespace {

Eigen::MatrixXd occupation_table(const SectorEncoding& enc) {
    Eigen::MatrixXd o = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(enc.dim()), enc.sites());
    for (std::size_t j = 0; j < enc.dim(); ++j)
        for (int s : enc.unrank(j)) o(static_cast<Eigen::Index>(j), s) = 1;
    return o;
}

std::uint64_t initial_index(const EvolveRequest& req, const SectorEncoding& enc) {
    std::vector<int> s = req.initial.sites;
    std::sort(s.begin(), s.end());
    if (static_cast<int>(s.size()) != req.particles)
        throw ConfigError("initial state lists " + std::to_string(s.size()) + " sites for " +
                          std::to_string(req.particles) + " particles");
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw ConfigError("initial sites must be distinct");
    for (int z : s)
        if (z < 0 || z >= enc.sites()) throw ConfigError("initial site " + std::to_string(z) + " outside the ladder");
    return enc.rank(s);
}

struct ExactTrace {
    Eigen::VectorXd success, phys;  // per time
    Eigen::MatrixXd dist;           // time x D, normalized on the physical sector
};

RunResult evolve_exact_mode(const EvolveRequest& req, const EngineOptions& opt, const SectorEncoding& enc,
                            const StepCircuit& sc) {
    const int n = enc.n_qubits() + 1;
    const auto dim = static_cast<Eigen::Index>(enc.dim());
    const int nt = req.steps + 1;
    std::vector<std::uint64_t> starts =
        req.initial.maximally_mixed ? prepare_maximally_mixed(enc) : std::vector<std::uint64_t>{initial_index(req, enc)};

    const Program prog(sc.step, static_cast<std::size_t>(req.steps) * starts.size());
    std::vector<ExactTrace> traces(starts.size());
    detail::parallel_for(starts.size(), opt.threads, [&](std::size_t i) {
        ExactTrace& tr = traces[i];
        tr.success.resize(nt);
        tr.phys.resize(nt);
        tr.dist.resize(nt, dim);
        VectorXc psi = VectorXc::Zero(Eigen::Index{1} << n);
        psi(static_cast<Eigen::Index>(starts[i] << 1)) = 1;
        double s_acc = 1.0;
        auto record = [&](int t) {
            Eigen::Map<const MatrixXc> m(psi.data(), 2, psi.size() / 2);
            const Eigen::VectorXd sysp = m.cwiseAbs2().colwise().sum().transpose();
            const double tot = sysp.head(dim).sum();
            tr.success(t) = s_acc;
            tr.phys(t) = tot;
            tr.dist.row(t) = tot > 0 ? Eigen::RowVectorXd(sysp.head(dim).transpose() / tot)
                                     : Eigen::RowVectorXd::Zero(dim);
        };
        record(0);
        for (int s = 1; s <= req.steps; ++s) {
            s_acc *= prog.run_postselected(psi);
            record(s);
        }
    });

    RunResult out;
    out.steps = req.steps;
    out.n_system_qubits = enc.n_qubits();
    out.sector_dim = enc.dim();
    out.seed = opt.seed;
    out.time_grid = Eigen::VectorXd::LinSpaced(nt, 0.0, req.t_max);
    out.success_probability = Eigen::VectorXd::Zero(nt);
    out.unphysical_mass = Eigen::VectorXd::Zero(nt);
    Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(nt, dim);
    Eigen::VectorXd wsum = Eigen::VectorXd::Zero(nt);
    for (const auto& tr : traces) {
        const Eigen::VectorXd w = tr.success.cwiseProduct(tr.phys);
        dist += w.asDiagonal() * tr.dist;
        wsum += w;
        out.success_probability += tr.success;
        out.unphysical_mass += tr.success.cwiseProduct(Eigen::VectorXd::Ones(nt) - tr.phys);
    }
    const Eigen::VectorXd ssum = out.success_probability;
    out.success_probability /= static_cast<double>(traces.size());
    for (int t = 0; t < nt; ++t) {
        if (!(wsum(t) > 0)) throw ConvergenceError("evolve: post-selected weight vanished at step " + std::to_string(t));
        dist.row(t) /= wsum(t);
        out.unphysical_mass(t) /= ssum(t);
    }
    out.occupancies = dist * occupation_table(enc);
    out.discarded_shots.assign(nt, 0);
    out.accepted_shots.assign(nt, 0);
    if (opt.keep_distributions) out.distributions = std::move(dist);
    return out;
}

RunResult evolve_shots_mode(const EvolveRequest& req, const EngineOptions& opt, const SectorEncoding& enc,
                            const StepCircuit& sc) {
    const int n_sys = enc.n_qubits();
    const int n = n_sys + 1;
    const int nt = req.steps + 1;
    const std::size_t shots = opt.mode.shots;
    if (shots == 0) throw ConfigError("shots mode needs at least one shot");
    const NoiseModel* noise = opt.noise ? &*opt.noise : nullptr;
    if (noise) noise->validate();
    const std::uint64_t start = req.initial.maximally_mixed ? 0 : initial_index(req, enc);

    const Circuit base = lower(sc.step);
    int anc_clbit = -1;
    for (const auto& ins : base.instructions())
        if (ins.kind == OpKind::measure) anc_clbit = ins.clbit;
    const bool randomized = opt.fold_lambda > 1.0 || opt.twirl_instances > 0;
    const int instances = std::max(1, opt.twirl_instances);
    const TwirlTable table = make_twirl_table();

    // chunks are fixed by trajectory index, so merged counts do not depend on thread count
    constexpr std::size_t chunk = 256;
    std::vector<std::vector<LayeredCounts>> parts;

    std::size_t first = 0;
    for (int inst = 0; inst < instances; ++inst) {
        const std::size_t count = shots / instances + (static_cast<std::size_t>(inst) < shots % instances ? 1 : 0);
        std::vector<Circuit> variants;
        if (randomized) {
            variants.reserve(req.steps);
            for (int s = 0; s < req.steps; ++s) {
                Rng rc = detail::stream(opt.seed, 2, static_cast<std::uint64_t>(inst) * req.steps + s);
                Circuit v = fold(base, opt.fold_lambda, rc);
                if (opt.twirl_instances > 0) v = twirl(v, rc, table);
                variants.push_back(std::move(v));
            }
        }
        const std::size_t n_chunks = (count + chunk - 1) / chunk;
        const std::size_t offset = parts.size();
        parts.resize(offset + n_chunks);
        detail::parallel_for(n_chunks, opt.threads, [&](std::size_t c) {
            auto& local = parts[offset + c];
            local.assign(nt, {});
            VectorXc psi(Eigen::Index{1} << n);
            std::vector<int> bits(base.n_clbits(), 0);
            for (std::size_t j = c * chunk; j < std::min(count, (c + 1) * chunk); ++j) {
                Rng r = detail::stream(opt.seed, 1, first + j);
                std::uint64_t init = start;
                if (req.initial.maximally_mixed)
                    init = std::uniform_int_distribution<std::uint64_t>(0, (std::uint64_t{1} << n_sys) - 1)(r);
                psi.setZero();
                psi(static_cast<Eigen::Index>(init << 1)) = 1;
                int k = 0;
                detail::Trajectory tr{psi, n, bits, noise, r};
                auto snapshot = [&](int t) {
                    Eigen::Map<const MatrixXc> m(psi.data(), 2, psi.size() / 2);
                    const Eigen::VectorXd sysp = m.cwiseAbs2().colwise().sum().transpose();
                    local[t][{k, sample_readout(sysp, n_sys, 0, noise, r)}]++;
                };
                snapshot(0);
                for (int s = 1; s <= req.steps; ++s) {
                    const Circuit& circ = randomized ? variants[s - 1] : base;
                    std::fill(bits.begin(), bits.end(), 0);
                    for (const auto& ins : circ.instructions()) tr.exec(ins);
                    if (anc_clbit >= 0) k += bits[anc_clbit];
                    snapshot(s);
                }
            }
        });
        first += count;
    }

    RunResult out;
    out.steps = req.steps;
    out.n_system_qubits = n_sys;
    out.sector_dim = enc.dim();
    out.seed = opt.seed;
    out.time_grid = Eigen::VectorXd::LinSpaced(nt, 0.0, req.t_max);
    out.counts.assign(nt, {});
    for (const auto& p : parts)
        for (int t = 0; t < nt; ++t)
            for (const auto& [key, v] : p[t]) out.counts[t][key] += v;
    out.success_probability.resize(nt);
    out.unphysical_mass = Eigen::VectorXd::Zero(nt);
    out.occupancies.resize(nt, enc.sites());
    out.discarded_shots.assign(nt, 0);
    out.accepted_shots.assign(nt, 0);
    const Eigen::MatrixXd table_occ = occupation_table(enc);
    if (opt.keep_distributions) out.distributions.resize(nt, static_cast<Eigen::Index>(enc.dim()));
    for (int t = 0; t < nt; ++t) {
        std::uint64_t ok = 0;
        for (const auto& [key, v] : out.counts[t])
            if (key.first == 0) ok += v;
        out.success_probability(t) = static_cast<double>(ok) / static_cast<double>(shots);
        std::uint64_t disc = 0;
        const Eigen::VectorXd dist = postselected_distribution(out.counts[t], enc.dim(), &disc);
        out.discarded_shots[t] = disc;
        out.accepted_shots[t] = ok - disc;
        if (ok == disc) throw ConvergenceError("evolve: every shot failed post-selection at step " + std::to_string(t));
        out.unphysical_mass(t) = static_cast<double>(disc) / static_cast<double>(ok);
        out.occupancies.row(t) = dist.transpose() * table_occ;
        if (opt.keep_distributions) out.distributions.row(t) = dist.transpose();
    }
    return out;
}

}  // namespace

RunResult evolve(const EvolveRequest& req, const EngineOptions& opt) {
    req.params.validate();
    if (req.steps < 1) throw ConfigError("evolve: steps must be >= 1");
    if (!(req.t_max > 0) || !std::isfinite(req.t_max)) throw ConfigError("evolve: t_max must be positive");
    const SectorEncoding enc(req.params.cells, req.particles);
    if (enc.n_qubits() + 1 > opt.qubit_cap)
        throw ConfigError("evolve: " + std::to_string(enc.n_qubits() + 1) + " qubits exceeds the cap of " +
                          std::to_string(opt.qubit_cap));
    const StepCircuit sc = build_step(req, enc);
    return opt.mode.kind == ExecMode::Kind::exact ? evolve_exact_mode(req, opt, enc, sc)
                                                  : evolve_shots_mode(req, opt, enc, sc);
}

Eigen::VectorXd postselected_distribution(const LayeredCounts& counts, std::size_t dim, std::uint64_t* discarded) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    std::uint64_t bad = 0;
    for (const auto& [key, v] : counts) {
        if (key.first != 0) continue;
        if (key.second < dim) p(static_cast<Eigen::Index>(key.second)) += static_cast<double>(v);
        else bad += v;
    }
    if (discarded) *discarded = bad;
    const double tot = p.sum();
    if (tot > 0) p /= tot;
    return p;
}

Eigen::VectorXd occupancies_from_distribution(const Eigen::VectorXd& probs, const SectorEncoding& enc) {
    if (probs.size() != static_cast<Eigen::Index>(enc.dim()))
        throw std::invalid_argument("occupancies_from_distribution: size mismatch");
    return occupation_table(enc).transpose() * probs;
}

namespace {

void check_groups(const std::vector<RealPauliTerm>& terms, const std::vector<std::vector<RealPauliTerm>>& groups) {
    std::size_t total = 0;
    for (const auto& g : groups) {
        total += g.size();
        for (std::size_t i = 0; i < g.size(); ++i)
            for (std::size_t j = i + 1; j < g.size(); ++j)
                if (!g[i].string.commutes(g[j].string))
                    throw std::invalid_argument("measure_imaginary_energy: group has non-commuting terms");
    }
    if (total != terms.size()) throw std::invalid_argument("measure_imaginary_energy: groups do not cover the terms");
}

}  // namespace

double measure_imaginary_energy(const Eigen::VectorXd& probs, const std::vector<RealPauliTerm>& terms,
                                const std::vector<std::vector<RealPauliTerm>>& groups) {
    check_groups(terms, groups);
    double e = 0;
    for (const auto& g : groups) {
        // one computational-basis setting per diagonal group
        for (const auto& t : g) {
            if (t.string.x != 0)
                throw std::invalid_argument("measure_imaginary_energy: counts only support Z-diagonal groups");
            double ev = 0;
            for (Eigen::Index s = 0; s < probs.size(); ++s)
                ev += probs(s) * ((popcount(t.string.z & static_cast<std::uint64_t>(s)) & 1) ? -1.0 : 1.0);
            e += t.coefficient * ev;
        }
    }
    return -e;
}

double measure_imaginary_energy(const VectorXc& state, const std::vector<RealPauliTerm>& terms,
                                const std::vector<std::vector<RealPauliTerm>>& groups) {
    check_groups(terms, groups);
    const double nrm2 = state.squaredNorm();
    double e = 0;
    for (const auto& g : groups)
        for (const auto& t : g) {
            cd ev{};
            for (Eigen::Index j = 0; j < state.size(); ++j) {
                const auto jj = static_cast<std::uint64_t>(j);
                ev += std::conj(state(static_cast<Eigen::Index>(jj ^ t.string.x))) * pauli_phase(t.string, jj) *
                      state(j);
            }
            e += t.coefficient * ev.real() / nrm2;
        }
    return -e;
}

}  // namespace nhsim
