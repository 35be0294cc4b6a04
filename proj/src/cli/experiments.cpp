#include <chrono>
#include <cmath>
#include <iostream>
#include <set>
#include <sstream>

#include "engine/pool.hpp"
#include "nhsim/circuit.hpp"
#include "nhsim/cli.hpp"
#include "nhsim/oracle.hpp"

namespace nhsim {

namespace {

EvolveRequest request_for(const ExperimentConfig& cfg, int steps) {
    EvolveRequest rq;
    rq.params = cfg.model;
    rq.particles = cfg.particles;
    rq.initial = cfg.initial;
    rq.t_max = cfg.t_max;
    rq.steps = steps;
    rq.lcu = cfg.lcu;
    rq.onsite_form = cfg.onsite_form;
    return rq;
}

EngineOptions options_for(const ExperimentConfig& cfg) {
    EngineOptions op;
    op.mode = cfg.mode;
    op.noise = cfg.noise;
    op.seed = cfg.seed;
    op.threads = cfg.threads;
    op.qubit_cap = cfg.qubit_cap;
    return op;
}

EscapeProfile profile(const RunResult& r, double gamma, NormMethod m) {
    return escape_from_normalized(r.time_grid, r.occupancies, r.success_probability, gamma, m);
}

}  // namespace

int base_steps(const ExperimentConfig& cfg) {
    const SectorEncoding enc(cfg.model.cells, cfg.particles);
    const int n = enc.n_qubits();
    const auto parts = split(build_many_body(cfg.model, enc));
    double coef = 0;
    for (const auto& t : real_terms(pauli_decompose(embed(parts.hermitian_part, n), n)))
        if (!t.string.is_identity()) coef = std::max(coef, std::abs(t.coefficient));
    double dt = 0.05 / cfg.model.gamma;
    if (coef > 0) dt = std::min(dt, 0.05 / coef);
    return std::max(1, static_cast<int>(std::ceil(cfg.t_max / dt - 1e-9)));
}

EvolveOutcome run_evolve(const ExperimentConfig& cfg) {
    const EngineOptions op = options_for(cfg);
    const double g = cfg.model.gamma;
    EvolveOutcome out;
    if (cfg.steps) {
        out.run = evolve(request_for(cfg, *cfg.steps), op);
    } else {
        if (cfg.mode.kind != ExecMode::Kind::exact)
            throw ConfigError(cfg.source + ": the automatic step rule needs exact mode; set evolution.steps");
        int m = base_steps(cfg);
        RunResult prev = evolve(request_for(cfg, m), op);
        bool done = false;
        for (int d = 0; d < cfg.max_doublings && !done; ++d) {
            m *= 2;
            RunResult next = evolve(request_for(cfg, m), op);
            const double change =
                (profile(next, g, NormMethod::integral).final_px - profile(prev, g, NormMethod::integral).final_px)
                    .cwiseAbs()
                    .maxCoeff();
            std::cerr << "step rule: m=" << m << " max change " << change << "\n";
            done = change < 0.005;
            prev = std::move(next);
        }
        if (!done)
            throw ConvergenceError("step rule: escape probabilities still moving after " +
                                   std::to_string(cfg.max_doublings) + " doublings (m=" + std::to_string(m) + ")");
        out.run = std::move(prev);
    }
    out.run.config_hash = cfg.hash;
    out.steps = out.run.steps;
    out.escape = profile(out.run, g, NormMethod::integral);
    out.escape_success = profile(out.run, g, NormMethod::success);
    out.terminated = is_terminated(out.escape.p_t, cfg.termination_threshold);
    const SectorEncoding enc(cfg.model.cells, cfg.particles);
    if (cfg.compare_oracle && !cfg.initial.maximally_mixed && enc.dim() <= 4096) out.oracle = run_oracle(cfg);
    return out;
}

EscapeProfile run_oracle(const ExperimentConfig& cfg) {
    if (cfg.initial.maximally_mixed) throw ConfigError(cfg.source + ": the oracle escape profile needs initial sites");
    const SectorEncoding enc(cfg.model.cells, cfg.particles);
    const MatrixXc h = build_many_body(cfg.model, enc);
    return escape_profile(h, basis_state(enc, cfg.initial.sites), cfg.model.gamma, cfg.t_max, enc,
                          cfg.oracle_intervals);
}

std::vector<SpectralPoint> run_spectral(const ExperimentConfig& cfg) {
    if (!cfg.spectral) throw ConfigError(cfg.source + ": missing [spectral] table");
    const auto& values = cfg.spectral->v1_values;
    std::vector<SpectralPoint> pts(values.size());
    // scan points run in parallel, each engine run single-threaded
    detail::parallel_for(values.size(), cfg.threads, [&](std::size_t i) {
        ExperimentConfig c = cfg;
        c.model.v1 = values[i];
        c.initial = {};
        c.initial.maximally_mixed = true;
        c.threads = 1;
        SpectralPoint& p = pts[i];
        p.v1 = values[i];

        const SectorEncoding enc(c.model.cells, c.particles);
        const int n = enc.n_qubits();
        const MatrixXc h = build_many_body(c.model, enc);
        const auto parts = split(h);
        const auto ha_terms = real_terms(pauli_decompose(embed(parts.antihermitian_generator, n), n));
        const auto groups = group_commuting(ha_terms);

        EngineOptions op = options_for(c);
        op.keep_distributions = true;
        const int steps = c.steps ? *c.steps : base_steps(c);
        const RunResult r = evolve(request_for(c, steps), op);
        const Eigen::Index last = r.distributions.rows() - 1;
        const Eigen::Index prev = std::max<Eigen::Index>(0, last - c.record_every);
        p.engine_max_im = measure_imaginary_energy(Eigen::VectorXd(r.distributions.row(last).transpose()), ha_terms, groups);
        const double before =
            measure_imaginary_energy(Eigen::VectorXd(r.distributions.row(prev).transpose()), ha_terms, groups);
        p.drift = std::abs(p.engine_max_im - before);
        p.converged = p.drift <= cfg.spectral->drift_tolerance * c.model.gamma;

        if (c.particles == 1) {
            const GapResult gr = dissipative_gap(c.model);
            p.oracle_max_im = gr.max_im;
            p.oracle_min_im = gr.min_im;
            p.oracle_gap = gr.gap;
        }
        const SpectrumResult sr = spectrum(h);
        p.spectrum = sr.eigenvalues;
        p.finite_max_im = sr.max_im;
        p.finite_min_im = sr.min_im;
        if (c.particles != 1) {
            p.oracle_max_im = sr.max_im;
            p.oracle_min_im = sr.min_im;
            p.oracle_gap = sr.gap;
        }
    });
    return pts;
}

std::vector<LambdaRun> run_noisy_schedule(const ExperimentConfig& cfg) {
    if (!cfg.mitigation) throw ConfigError(cfg.source + ": missing [mitigation] table");
    if (cfg.mode.kind != ExecMode::Kind::shots) throw ConfigError(cfg.source + ": mitigation needs execution.mode = \"shots\"");
    if (!cfg.steps) throw ConfigError(cfg.source + ": mitigation runs need an explicit evolution.steps");
    std::vector<LambdaRun> out;
    for (double lam : cfg.mitigation->lambdas) {
        EngineOptions op = options_for(cfg);
        op.fold_lambda = lam;
        op.twirl_instances = cfg.mitigation->twirls;
        const auto t0 = std::chrono::steady_clock::now();
        LambdaRun lr{lam, evolve(request_for(cfg, *cfg.steps), op)};
        lr.run.config_hash = cfg.hash;
        std::cerr << "lambda " << lam << ": "
                  << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
        out.push_back(std::move(lr));
    }
    return out;
}

CalibrationSet run_calibration(const ExperimentConfig& cfg) {
    const SectorEncoding enc(cfg.model.cells, cfg.particles);
    const int n = enc.n_qubits() + 1;
    const MitigationConfig mc = cfg.mitigation.value_or(MitigationConfig{});
    const auto regs = mc.sub_registers.empty() ? default_sub_registers(n) : mc.sub_registers;
    const NoiseModel* nm = cfg.noise ? &*cfg.noise : nullptr;
    return calibrate(nm, n, regs, mc.calibration_shots, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
}

MitigationOutcome mitigate_runs(const ExperimentConfig& cfg, const std::vector<LambdaRun>& runs,
                                const CalibrationSet& cal) {
    if (runs.size() < 2) throw ConfigError("mitigation needs data at two or more noise levels");
    if (runs.front().lambda != 1.0) throw ConfigError("mitigation data must include lambda = 1");
    const SectorEncoding enc(cfg.model.cells, cfg.particles);
    const int n_sys = enc.n_qubits();
    std::vector<int> sys(n_sys);
    for (int q = 0; q < n_sys; ++q) sys[q] = q;
    const Eigen::Index nt = runs.front().run.time_grid.size();
    const Eigen::Index sites = enc.sites();
    for (const auto& r : runs)
        if (r.run.time_grid.size() != nt || static_cast<Eigen::Index>(r.run.counts.size()) != nt)
            throw ConfigError("mitigation runs disagree on the time grid or lack counts");

    std::vector<Eigen::MatrixXd> ro(runs.size(), Eigen::MatrixXd(nt, sites));
    for (std::size_t l = 0; l < runs.size(); ++l)
        for (Eigen::Index t = 0; t < nt; ++t) {
            const Eigen::VectorXd d = mitigate_postselected(runs[l].run.counts[t], static_cast<int>(t), n_sys, sys,
                                                            enc.dim(), cal);
            ro[l].row(t) = occupancies_from_distribution(d, enc).transpose();
        }

    MitigationOutcome out;
    out.time_grid = runs.front().run.time_grid;
    out.raw = runs.front().run.occupancies;
    out.readout = ro.front();
    out.full.resize(nt, sites);
    ZneInput zi;
    for (const auto& r : runs) zi.lambdas.push_back(r.lambda);
    zi.kinds.assign(sites, ObservableKind::occupancy);
    zi.occupancy_bounds = true;
    zi.number_sum = cfg.particles;
    zi.values.resize(sites, static_cast<Eigen::Index>(runs.size()));
    for (Eigen::Index t = 0; t < nt; ++t) {
        for (std::size_t l = 0; l < runs.size(); ++l) zi.values.col(static_cast<Eigen::Index>(l)) = ro[l].row(t).transpose();
        const ZneResult zr = zne(zi);
        out.full.row(t) = zr.intercepts.transpose();
        out.max_kkt = std::max(out.max_kkt, zr.kkt_residual);
    }
    const Eigen::VectorXd& s = runs.front().run.success_probability;
    const double g = cfg.model.gamma;
    out.escape_raw = escape_from_normalized(out.time_grid, out.raw, s, g);
    out.escape_readout = escape_from_normalized(out.time_grid, out.readout, s, g);
    out.escape_full = escape_from_normalized(out.time_grid, out.full.cwiseMax(0.0), s, g);
    return out;
}

// ---- verbs ----------------------------------------------------------------------

namespace {

namespace fs = std::filesystem;

struct Resolved {
    ExperimentConfig cfg;
    fs::path config_file;
    fs::path out;
};

Resolved resolve(const CommandOptions& o, const std::string& verb, bool allow_run_dir = false) {
    if (o.config && o.preset) throw ConfigError("pass either --config or --preset, not both");
    Resolved r;
    if (o.preset) r.config_file = preset_path(*o.preset);
    else if (o.config) r.config_file = *o.config;
    else if (allow_run_dir && o.out && fs::exists(fs::path(*o.out) / "config.toml"))
        r.config_file = fs::path(*o.out) / "config.toml";
    else throw ConfigError(verb + ": pass --config FILE or --preset NAME");
    r.cfg = load_config(r.config_file);
    if (o.seed) r.cfg.seed = *o.seed;
    if (o.threads) {
        if (*o.threads < 1) throw ConfigError("--threads must be >= 1");
        r.cfg.threads = *o.threads;
    }
    if (o.out) r.out = *o.out;
    else if (!r.cfg.out_dir.empty()) r.out = r.cfg.out_dir;
    else r.out = fs::path("runs") / r.cfg.name;
    fs::create_directories(r.out);
    const fs::path copy = r.out / "config.toml";
    if (!fs::exists(copy) || !fs::equivalent(copy, r.config_file))
        fs::copy_file(r.config_file, copy, fs::copy_options::overwrite_existing);
    return r;
}

OutputMeta meta_for(const ExperimentConfig& cfg, const std::string& cmd) { return {cfg.hash, cfg.seed, cmd}; }

std::vector<std::string> cell_labels(int cells) {
    std::vector<std::string> out;
    for (int x = 1; x <= cells; ++x) out.push_back(std::to_string(x));
    return out;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void write_occupancies(const fs::path& path, const OutputMeta& meta, const Eigen::VectorXd& t,
                       const Eigen::MatrixXd& occ, const Eigen::VectorXd& s, int every) {
    CsvWriter w(path, meta, {"step", "t", "site", "cell", "sublattice", "occupancy", "success_probability"});
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        if (i % every != 0 && i != t.size() - 1) continue;
        for (Eigen::Index z = 0; z < occ.cols(); ++z) {
            w << static_cast<long long>(i) << t(i) << static_cast<long long>(z) << static_cast<long long>(z / 2 + 1)
              << std::string(z % 2 ? "b" : "a") << occ(i, z) << s(i);
            w.end_row();
        }
    }
}

void write_escape_t(const fs::path& path, const OutputMeta& meta, const EscapeProfile& e, int every) {
    CsvWriter w(path, meta, {"t", "cell", "escape", "total"});
    for (Eigen::Index i = 0; i < e.time_grid.size(); ++i) {
        if (i % every != 0 && i != e.time_grid.size() - 1) continue;
        for (Eigen::Index x = 0; x < e.px_t.cols(); ++x) {
            w << e.time_grid(i) << static_cast<long long>(x + 1) << e.px_t(i, x) << e.p_t(i);
            w.end_row();
        }
    }
}

void write_counts(const fs::path& path, const OutputMeta& meta, const std::vector<LambdaRun>& runs) {
    CsvWriter w(path, meta, {"lambda", "step", "t", "failures", "system_value", "count"});
    for (const auto& lr : runs)
        for (std::size_t t = 0; t < lr.run.counts.size(); ++t)
            for (const auto& [key, v] : lr.run.counts[t]) {
                w << lr.lambda << static_cast<long long>(t) << lr.run.time_grid(static_cast<Eigen::Index>(t))
                  << static_cast<long long>(key.first) << static_cast<std::uint64_t>(key.second)
                  << static_cast<std::uint64_t>(v);
                w.end_row();
            }
}

std::vector<Series> escape_curves(const EscapeProfile& e, const std::string& prefix, bool dashed) {
    std::vector<Series> out;
    for (Eigen::Index x = 0; x < e.px_t.cols(); ++x)
        out.push_back({prefix + "x=" + std::to_string(x + 1), to_std(e.time_grid), to_std(e.px_t.col(x)), dashed});
    return out;
}

nlohmann::json vec_json(const Eigen::VectorXd& v) { return to_std(v); }

}  // namespace

int cmd_evolve(const CommandOptions& o) {
    Resolved r = resolve(o, "evolve");
    const auto& cfg = r.cfg;
    const OutputMeta meta = meta_for(cfg, "evolve");
    const auto t0 = std::chrono::steady_clock::now();

    EvolveOutcome res;
    std::vector<LambdaRun> schedule;
    if (cfg.mitigation && cfg.mode.kind == ExecMode::Kind::shots) {
        schedule = run_noisy_schedule(cfg);
        res.run = schedule.front().run;
        res.steps = res.run.steps;
        res.escape = profile(res.run, cfg.model.gamma, NormMethod::integral);
        res.escape_success = profile(res.run, cfg.model.gamma, NormMethod::success);
        res.terminated = is_terminated(res.escape.p_t, cfg.termination_threshold);
        if (cfg.compare_oracle && !cfg.initial.maximally_mixed) res.oracle = run_oracle(cfg);
        write_counts(r.out / "counts.csv", meta, schedule);
    } else {
        res = run_evolve(cfg);
        if (cfg.mode.kind == ExecMode::Kind::shots) write_counts(r.out / "counts.csv", meta, {{1.0, res.run}});
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    write_occupancies(r.out / "occupancies.csv", meta, res.run.time_grid, res.run.occupancies,
                      res.run.success_probability, cfg.record_every);
    write_escape_t(r.out / "escape_t.csv", meta, res.escape, cfg.record_every);
    {
        std::vector<std::string> head{"cell", "escape", "escape_success_norm"};
        if (res.oracle) head.push_back("escape_oracle");
        CsvWriter w(r.out / "escape.csv", meta, head);
        for (Eigen::Index x = 0; x < res.escape.final_px.size(); ++x) {
            w << static_cast<long long>(x + 1) << res.escape.final_px(x) << res.escape_success.final_px(x);
            if (res.oracle) w << res.oracle->final_px(x);
            w.end_row();
        }
    }
    nlohmann::json j;
    j["name"] = cfg.name;
    j["steps"] = res.steps;
    j["t_max"] = cfg.t_max;
    j["n_system_qubits"] = res.run.n_system_qubits;
    j["sector_dim"] = res.run.sector_dim;
    j["mode"] = cfg.mode.kind == ExecMode::Kind::exact ? "exact" : "shots";
    j["shots"] = cfg.mode.shots;
    j["final_total_escape"] = res.escape.p_t(res.escape.p_t.size() - 1);
    j["terminated"] = res.terminated;
    j["escape"] = vec_json(res.escape.final_px);
    j["escape_success_norm"] = vec_json(res.escape_success.final_px);
    j["max_unphysical_mass"] = res.run.unphysical_mass.maxCoeff();
    if (res.oracle) {
        j["escape_oracle"] = vec_json(res.oracle->final_px);
        j["max_abs_error_vs_oracle"] = (res.escape.final_px - res.oracle->final_px).cwiseAbs().maxCoeff();
    }
    if (!schedule.empty()) {
        std::vector<double> l;
        for (const auto& s : schedule) l.push_back(s.lambda);
        j["lambdas"] = l;
    }
    write_json(r.out / "run.json", meta, j);

    if (cfg.plots) {
        plot_heatmap(r.out / "occupancy_heatmap.svg", cfg.name + ": site occupancy", res.run.time_grid,
                     res.run.occupancies, "t", "site");
        auto curves = escape_curves(res.escape, "", false);
        plot_lines(r.out / "escape_curves.svg", cfg.name + ": P_x(t)", "t", "P_x(t)", curves);
        std::vector<Series> bars{{"engine", {}, to_std(res.escape.final_px)}};
        if (res.oracle) bars.push_back({"oracle", {}, to_std(res.oracle->final_px)});
        plot_bars(r.out / "escape_bars.svg", cfg.name + ": escape probability per cell", "cell x",
                  cell_labels(cfg.model.cells), bars);
    }
    std::cerr << "evolve: m=" << res.steps << ", P(t_max)=" << res.escape.p_t(res.escape.p_t.size() - 1) << ", "
              << secs << " s -> " << r.out.string() << "\n";
    if (cfg.require_termination && !res.terminated) {
        std::cerr << "evolve: total escape " << res.escape.p_t(res.escape.p_t.size() - 1) << " below "
                  << cfg.termination_threshold << "; increase evolution.t_max\n";
        return kExitConvergence;
    }
    return kExitOk;
}

int cmd_oracle(const CommandOptions& o) {
    Resolved r = resolve(o, "oracle");
    const auto& cfg = r.cfg;
    const OutputMeta meta = meta_for(cfg, "oracle");
    const SectorEncoding enc(cfg.model.cells, cfg.particles);
    const MatrixXc h = build_many_body(cfg.model, enc);

    const SpectrumResult sr = spectrum(h);
    {
        CsvWriter w(r.out / "oracle_spectrum.csv", meta, {"index", "re", "im"});
        for (Eigen::Index i = 0; i < sr.eigenvalues.size(); ++i) {
            w << static_cast<long long>(i) << sr.eigenvalues(i).real() << sr.eigenvalues(i).imag();
            w.end_row();
        }
    }
    nlohmann::json j;
    j["name"] = cfg.name;
    j["sector_dim"] = enc.dim();
    j["spectrum_max_im"] = sr.max_im;
    j["spectrum_min_im"] = sr.min_im;
    j["spectrum_gap"] = sr.gap;
    if (cfg.particles == 1 && cfg.model.boundary == Boundary::periodic) {
        const GapResult g = dissipative_gap(cfg.model);
        j["bloch_gap"] = g.gap;
        j["bloch_max_im"] = g.max_im;
        j["bloch_min_im"] = g.min_im;
    }
    if (cfg.plots) {
        Series s{"eigenvalues", {}, {}};
        for (Eigen::Index i = 0; i < sr.eigenvalues.size(); ++i) {
            s.x.push_back(sr.eigenvalues(i).real());
            s.y.push_back(sr.eigenvalues(i).imag());
        }
        plot_scatter(r.out / "oracle_spectrum.svg", cfg.name + ": complex spectrum", {s}, "Re E", "Im E");
    }

    if (!cfg.initial.maximally_mixed) {
        const EscapeProfile e = run_oracle(cfg);
        const Eigen::VectorXd grid = uniform_grid(cfg.t_max, cfg.oracle_intervals);
        const OracleEvolution ev = evolve_exact(h, basis_state(enc, cfg.initial.sites), grid, enc);
        const Eigen::VectorXd norm2 = ev.norm.cwiseAbs2();
        const int every = std::max(1, cfg.oracle_intervals / 1000);
        write_occupancies(r.out / "oracle_occupancies.csv", meta, ev.time_grid, ev.rho_occupancies, norm2, every);
        write_escape_t(r.out / "oracle_escape_t.csv", meta, e, every);
        {
            CsvWriter w(r.out / "oracle_escape.csv", meta, {"cell", "escape"});
            for (Eigen::Index x = 0; x < e.final_px.size(); ++x) {
                w << static_cast<long long>(x + 1) << e.final_px(x);
                w.end_row();
            }
        }
        j["escape"] = vec_json(e.final_px);
        j["final_total_escape"] = e.p_t(e.p_t.size() - 1);
        j["terminated"] = is_terminated(e.p_t, cfg.termination_threshold);
        j["truncated_grid"] = ev.truncated;
        if (cfg.plots) {
            std::vector<Series> bars{{"oracle", {}, to_std(e.final_px)}};
            // overlay an engine run from the same directory when present
            const fs::path engine = r.out / "escape.csv";
            if (fs::exists(engine)) {
                const CsvTable t = read_csv(engine);
                Series s{"engine", {}, {}};
                for (const auto& row : t.rows) s.y.push_back(std::stod(row.at(t.column("escape"))));
                if (static_cast<Eigen::Index>(s.y.size()) == e.final_px.size()) bars.insert(bars.begin(), s);
            }
            plot_bars(r.out / "oracle_escape_bars.svg", cfg.name + ": escape probability (oracle)", "cell x",
                      cell_labels(cfg.model.cells), bars);
            plot_lines(r.out / "oracle_escape_curves.svg", cfg.name + ": P_x(t), oracle", "t", "P_x(t)",
                       escape_curves(e, "", true));
            plot_heatmap(r.out / "oracle_occupancy_heatmap.svg", cfg.name + ": site occupancy (oracle)", ev.time_grid,
                         ev.rho_occupancies, "t", "site");
        }
    }
    write_json(r.out / "oracle.json", meta, j);
    std::cerr << "oracle -> " << r.out.string() << "\n";
    return kExitOk;
}

int cmd_spectral(const CommandOptions& o) {
    Resolved r = resolve(o, "spectral");
    const auto& cfg = r.cfg;
    const OutputMeta meta = meta_for(cfg, "spectral");
    const auto pts = run_spectral(cfg);
    const double g = cfg.model.gamma;
    {
        CsvWriter w(r.out / "spectral.csv", meta,
                    {"v1", "v1_over_v2", "engine_max_im", "drift", "converged", "oracle_max_im", "oracle_min_im",
                     "oracle_gap", "finite_max_im", "finite_min_im"});
        for (const auto& p : pts) {
            w << p.v1 << p.v1 / cfg.model.v2 << p.engine_max_im << p.drift << std::string(p.converged ? "1" : "0")
              << p.oracle_max_im << p.oracle_min_im << p.oracle_gap << p.finite_max_im << p.finite_min_im;
            w.end_row();
        }
    }
    {
        CsvWriter w(r.out / "pbc_spectra.csv", meta, {"v1", "index", "re", "im"});
        for (const auto& p : pts)
            for (Eigen::Index i = 0; i < p.spectrum.size(); ++i) {
                w << p.v1 << static_cast<long long>(i) << p.spectrum(i).real() << p.spectrum(i).imag();
                w.end_row();
            }
    }
    if (cfg.plots) {
        Series omax{"oracle max Im E", {}, {}}, omin{"oracle min Im E", {}, {}}, emax{"engine max Im E", {}, {}, true};
        for (const auto& p : pts) {
            const double x = p.v1 / cfg.model.v2;
            omax.x.push_back(x);
            omax.y.push_back(p.oracle_max_im / g);
            omin.x.push_back(x);
            omin.y.push_back(p.oracle_min_im / g);
            emax.x.push_back(x);
            emax.y.push_back(p.engine_max_im / g);
        }
        plot_lines(r.out / "spectral_scan.svg", cfg.name + ": extremal imaginary energy", "v1/v2", "Im E / gamma",
                   {omax, omin, emax});
        std::vector<Series> sc;
        for (const auto& p : pts) {
            Series s{"v1/v2=" + format_double(p.v1 / cfg.model.v2), {}, {}};
            for (Eigen::Index i = 0; i < p.spectrum.size(); ++i) {
                s.x.push_back(p.spectrum(i).real());
                s.y.push_back(p.spectrum(i).imag());
            }
            sc.push_back(std::move(s));
        }
        plot_scatter(r.out / "pbc_spectra.svg", cfg.name + ": periodic spectra", sc, "Re E", "Im E");
    }
    nlohmann::json j;
    j["name"] = cfg.name;
    j["points"] = pts.size();
    int bad = 0;
    for (const auto& p : pts) bad += p.converged ? 0 : 1;
    j["unconverged_points"] = bad;
    write_json(r.out / "spectral.json", meta, j);
    if (bad) {
        std::cerr << "spectral: " << bad << " scan point(s) did not purify within tolerance\n";
        return kExitConvergence;
    }
    std::cerr << "spectral -> " << r.out.string() << "\n";
    return kExitOk;
}

int cmd_calibrate(const CommandOptions& o) {
    Resolved r = resolve(o, "calibrate", true);
    const auto& cfg = r.cfg;
    const CalibrationSet cal = run_calibration(cfg);
    const OutputMeta meta = meta_for(cfg, "calibrate");
    nlohmann::json j = nlohmann::json::parse(calibration_to_json(cal));
    write_json(r.out / "calibration.json", meta, j);
    std::cerr << "calibrate: " << cal.circuits << " circuits, " << cal.sub_registers.size() << " sub-register(s) -> "
              << (r.out / "calibration.json").string() << "\n";
    return kExitOk;
}

int cmd_mitigate(const CommandOptions& o) {
    Resolved r = resolve(o, "mitigate", true);
    auto& cfg = r.cfg;
    const fs::path counts = r.out / "counts.csv", calib = r.out / "calibration.json", run = r.out / "run.json";
    if (!fs::exists(counts)) throw ConfigError("mitigate: " + counts.string() + " missing; run `nhsim evolve` first");
    if (!fs::exists(calib)) throw ConfigError("mitigate: " + calib.string() + " missing; run `nhsim calibrate` first");
    if (fs::exists(run) && !o.seed) {
        std::ifstream in(run);
        cfg.seed = nlohmann::json::parse(in).at("seed").get<std::uint64_t>();
    }
    std::ifstream cin(calib);
    const CalibrationSet cal = calibration_from_json(std::string(std::istreambuf_iterator<char>(cin), {}));

    // rebuild per-lambda runs from the counts table
    const CsvTable t = read_csv(counts);
    const int cl = t.column("lambda"), cs = t.column("step"), ct = t.column("t"), cf = t.column("failures"),
              cv = t.column("system_value"), cc = t.column("count");
    std::map<double, LambdaRun> by;
    for (const auto& row : t.rows) {
        const double lam = std::stod(row.at(cl));
        auto& lr = by[lam];
        lr.lambda = lam;
        const auto step = static_cast<std::size_t>(std::stoull(row.at(cs)));
        if (lr.run.counts.size() <= step) lr.run.counts.resize(step + 1);
        if (lr.run.time_grid.size() <= static_cast<Eigen::Index>(step)) {
            lr.run.time_grid.conservativeResize(static_cast<Eigen::Index>(step) + 1);
        }
        lr.run.time_grid(static_cast<Eigen::Index>(step)) = std::stod(row.at(ct));
        lr.run.counts[step][{std::stoi(row.at(cf)), std::stoull(row.at(cv))}] += std::stoull(row.at(cc));
    }
    if (by.size() < 2) throw ConfigError("mitigate: counts.csv holds " + std::to_string(by.size()) +
                                         " noise level(s); zero-noise extrapolation needs at least two");
    if (!by.count(1.0)) throw ConfigError("mitigate: counts.csv has no lambda = 1 data");
    if (cfg.mitigation)
        for (double lam : cfg.mitigation->lambdas)
            if (!by.count(lam)) throw ConfigError("mitigate: missing data for lambda = " + format_double(lam));

    const SectorEncoding enc(cfg.model.cells, cfg.particles);
    std::vector<LambdaRun> runs;
    for (auto& [lam, lr] : by) {
        const Eigen::Index nt = lr.run.time_grid.size();
        lr.run.success_probability.resize(nt);
        lr.run.occupancies.resize(nt, enc.sites());
        for (Eigen::Index s = 0; s < nt; ++s) {
            std::uint64_t total = 0, ok = 0;
            for (const auto& [key, v] : lr.run.counts[s]) {
                total += v;
                if (key.first == 0) ok += v;
            }
            if (total == 0) throw ConfigError("mitigate: no counts at step " + std::to_string(s));
            lr.run.success_probability(s) = static_cast<double>(ok) / static_cast<double>(total);
            lr.run.occupancies.row(s) =
                occupancies_from_distribution(postselected_distribution(lr.run.counts[s], enc.dim()), enc).transpose();
        }
        runs.push_back(std::move(lr));
    }

    const MitigationOutcome m = mitigate_runs(cfg, runs, cal);
    const OutputMeta meta = meta_for(cfg, "mitigate");
    {
        CsvWriter w(r.out / "mitigated_occupancies.csv", meta, {"step", "t", "site", "raw", "readout", "full"});
        for (Eigen::Index i = 0; i < m.time_grid.size(); ++i)
            for (Eigen::Index z = 0; z < m.raw.cols(); ++z) {
                w << static_cast<long long>(i) << m.time_grid(i) << static_cast<long long>(z) << m.raw(i, z)
                  << m.readout(i, z) << m.full(i, z);
                w.end_row();
            }
    }
    std::optional<EscapeProfile> oracle;
    if (!cfg.initial.maximally_mixed) oracle = run_oracle(cfg);
    {
        std::vector<std::string> head{"cell", "raw", "readout", "full"};
        if (oracle) head.push_back("oracle");
        CsvWriter w(r.out / "mitigated_escape.csv", meta, head);
        for (Eigen::Index x = 0; x < m.escape_raw.final_px.size(); ++x) {
            w << static_cast<long long>(x + 1) << m.escape_raw.final_px(x) << m.escape_readout.final_px(x)
              << m.escape_full.final_px(x);
            if (oracle) w << oracle->final_px(x);
            w.end_row();
        }
    }
    nlohmann::json j;
    j["name"] = cfg.name;
    j["max_kkt_residual"] = m.max_kkt;
    j["escape_raw"] = vec_json(m.escape_raw.final_px);
    j["escape_readout"] = vec_json(m.escape_readout.final_px);
    j["escape_full"] = vec_json(m.escape_full.final_px);
    if (oracle) {
        auto mae = [&](const EscapeProfile& e) { return (e.final_px - oracle->final_px).cwiseAbs().mean(); };
        j["escape_oracle"] = vec_json(oracle->final_px);
        j["mae_raw"] = mae(m.escape_raw);
        j["mae_readout"] = mae(m.escape_readout);
        j["mae_full"] = mae(m.escape_full);
        std::cerr << "mitigate: mean abs error vs oracle raw " << mae(m.escape_raw) << ", readout "
                  << mae(m.escape_readout) << ", full " << mae(m.escape_full) << "\n";
    }
    write_json(r.out / "mitigation.json", meta, j);
    if (cfg.plots) {
        std::vector<Series> bars{{"raw", {}, to_std(m.escape_raw.final_px)},
                                 {"readout only", {}, to_std(m.escape_readout.final_px)},
                                 {"ZNE + readout", {}, to_std(m.escape_full.final_px)}};
        if (oracle) bars.push_back({"oracle", {}, to_std(oracle->final_px)});
        plot_bars(r.out / "mitigation_comparison.svg", cfg.name + ": mitigation before/after", "cell x",
                  cell_labels(cfg.model.cells), bars);
    }
    return kExitOk;
}

}  // namespace nhsim
