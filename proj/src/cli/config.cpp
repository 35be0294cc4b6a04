#define TOML_HEADER_ONLY 1
#include <toml.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "nhsim/cli.hpp"

namespace nhsim {

std::string hash_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

class Reader {
public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const toml::node* n, const std::string& msg) const {
        std::string where = source_;
        if (n && n->source().begin) where += ":" + std::to_string(n->source().begin.line);
        throw ConfigError(where + ": " + msg);
    }

    // reject keys outside the schema, typos included
    void only(const toml::table& t, const std::string& path, std::initializer_list<const char*> keys) const {
        for (const auto& [k, v] : t) {
            const bool ok = std::any_of(keys.begin(), keys.end(), [&](const char* a) { return k.str() == a; });
            if (!ok) fail(&v, "unknown key '" + (path.empty() ? "" : path + ".") + std::string(k.str()) + "'");
        }
    }

    const toml::table* table(const toml::table& t, const char* key, bool required, const std::string& path) const {
        const toml::node* n = t.get(key);
        if (!n) {
            if (required) fail(&t, "missing table [" + path + "]");
            return nullptr;
        }
        if (!n->is_table()) fail(n, "'" + path + "' must be a table");
        return n->as_table();
    }

    double number(const toml::table& t, const char* key, const std::string& path, std::optional<double> def) const {
        const toml::node* n = t.get(key);
        if (!n) {
            if (!def) fail(&t, "missing key '" + path + "'");
            return *def;
        }
        if (auto v = n->value<double>()) {
            if (!std::isfinite(*v)) fail(n, "'" + path + "' must be finite");
            return *v;
        }
        fail(n, "'" + path + "' must be a number");
    }

    long long integer(const toml::table& t, const char* key, const std::string& path, std::optional<long long> def) const {
        const toml::node* n = t.get(key);
        if (!n) {
            if (!def) fail(&t, "missing key '" + path + "'");
            return *def;
        }
        if (auto v = n->as_integer()) return v->get();
        fail(n, "'" + path + "' must be an integer");
    }

    bool boolean(const toml::table& t, const char* key, const std::string& path, bool def) const {
        const toml::node* n = t.get(key);
        if (!n) return def;
        if (auto v = n->as_boolean()) return v->get();
        fail(n, "'" + path + "' must be true or false");
    }

    std::string string(const toml::table& t, const char* key, const std::string& path,
                       std::optional<std::string> def) const {
        const toml::node* n = t.get(key);
        if (!n) {
            if (!def) fail(&t, "missing key '" + path + "'");
            return *def;
        }
        if (auto v = n->as_string()) return v->get();
        fail(n, "'" + path + "' must be a string");
    }

    std::vector<double> numbers(const toml::node* n, const std::string& path) const {
        const auto* a = n->as_array();
        if (!a) fail(n, "'" + path + "' must be an array of numbers");
        std::vector<double> out;
        for (const auto& e : *a) {
            auto v = e.value<double>();
            if (!v || !std::isfinite(*v)) fail(&e, "'" + path + "' must contain only finite numbers");
            out.push_back(*v);
        }
        return out;
    }

    std::vector<int> integers(const toml::node* n, const std::string& path) const {
        const auto* a = n->as_array();
        if (!a) fail(n, "'" + path + "' must be an array of integers");
        std::vector<int> out;
        for (const auto& e : *a) {
            auto v = e.as_integer();
            if (!v) fail(&e, "'" + path + "' must contain only integers");
            out.push_back(static_cast<int>(v->get()));
        }
        return out;
    }

    const std::string& source() const { return source_; }

private:
    std::string source_;
};

void parse_model(const Reader& r, const toml::table& t, ExperimentConfig& cfg) {
    r.only(t, "model", {"cells", "v1", "v2", "gamma", "boundary", "hardcore", "interactions"});
    auto& m = cfg.model;
    m.cells = static_cast<int>(r.integer(t, "cells", "model.cells", std::nullopt));
    m.v1 = r.number(t, "v1", "model.v1", std::nullopt);
    m.v2 = r.number(t, "v2", "model.v2", std::nullopt);
    m.gamma = r.number(t, "gamma", "model.gamma", std::nullopt);
    const std::string b = r.string(t, "boundary", "model.boundary", "open");
    if (b == "open") m.boundary = Boundary::open;
    else if (b == "periodic") m.boundary = Boundary::periodic;
    else r.fail(t.get("boundary"), "model.boundary must be \"open\" or \"periodic\"");
    m.hardcore = r.boolean(t, "hardcore", "model.hardcore", true);
    if (!m.hardcore) r.fail(t.get("hardcore"), "only hardcore bosons are supported");
    if (const auto* it = r.table(t, "interactions", false, "model.interactions")) {
        for (const auto& [k, v] : *it) {
            int dist = 0;
            try {
                std::size_t used = 0;
                dist = std::stoi(std::string(k.str()), &used);
                if (used != k.str().size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                r.fail(&v, "model.interactions keys are distances, got '" + std::string(k.str()) + "'");
            }
            if (dist < 1) r.fail(&v, "interaction distance must be >= 1");
            auto u = v.value<double>();
            if (!u) r.fail(&v, "interaction strength must be a number");
            m.interactions[dist] = *u;
        }
    }
    try {
        m.validate();
    } catch (const ConfigError& e) {
        r.fail(&t, e.what());
    }
}

void parse_particles(const Reader& r, const toml::table& t, ExperimentConfig& cfg) {
    r.only(t, "particles", {"count", "initial_sites", "initial"});
    cfg.particles = static_cast<int>(r.integer(t, "count", "particles.count", 1));
    const std::string kind = r.string(t, "initial", "particles.initial", "sites");
    if (kind == "maximally_mixed") {
        cfg.initial.maximally_mixed = true;
        return;
    }
    if (kind != "sites") r.fail(t.get("initial"), "particles.initial must be \"sites\" or \"maximally_mixed\"");
    const toml::node* n = t.get("initial_sites");
    if (!n) r.fail(&t, "missing key 'particles.initial_sites'");
    cfg.initial.sites = r.integers(n, "particles.initial_sites");
    if (static_cast<int>(cfg.initial.sites.size()) != cfg.particles)
        r.fail(n, "particles.initial_sites lists " + std::to_string(cfg.initial.sites.size()) + " sites for " +
                      std::to_string(cfg.particles) + " particles");
    std::set<int> seen;
    for (int s : cfg.initial.sites) {
        if (s < 0 || s >= 2 * cfg.model.cells)
            r.fail(n, "initial site " + std::to_string(s) + " outside [0, " + std::to_string(2 * cfg.model.cells) + ")");
        if (!seen.insert(s).second) r.fail(n, "initial sites must be distinct");
    }
}

void parse_evolution(const Reader& r, const toml::table& t, ExperimentConfig& cfg) {
    r.only(t, "evolution", {"t_max", "steps", "max_doublings", "lcu", "onsite_form", "record_every",
                            "termination_threshold", "require_termination"});
    cfg.t_max = r.number(t, "t_max", "evolution.t_max", std::nullopt);
    if (!(cfg.t_max > 0)) r.fail(t.get("t_max"), "evolution.t_max must be positive");
    if (const toml::node* n = t.get("steps")) {
        if (auto s = n->as_string()) {
            if (s->get() != "auto") r.fail(n, "evolution.steps must be a positive integer or \"auto\"");
        } else if (auto i = n->as_integer()) {
            if (i->get() < 1) r.fail(n, "evolution.steps must be >= 1");
            cfg.steps = static_cast<int>(i->get());
        } else {
            r.fail(n, "evolution.steps must be a positive integer or \"auto\"");
        }
    }
    cfg.max_doublings = static_cast<int>(r.integer(t, "max_doublings", "evolution.max_doublings", 4));
    if (cfg.max_doublings < 1) r.fail(t.get("max_doublings"), "evolution.max_doublings must be >= 1");
    const std::string lcu = r.string(t, "lcu", "evolution.lcu", "exact_onsite");
    if (lcu == "exact_onsite") cfg.lcu = LcuKind::exact_onsite;
    else if (lcu == "cosine") cfg.lcu = LcuKind::cosine;
    else r.fail(t.get("lcu"), "evolution.lcu must be \"exact_onsite\" or \"cosine\"");
    const std::string form = r.string(t, "onsite_form", "evolution.onsite_form", "per_state");
    if (form == "per_state") cfg.onsite_form = OnsiteForm::per_state;
    else if (form == "scalar_angle") cfg.onsite_form = OnsiteForm::scalar_angle;
    else r.fail(t.get("onsite_form"), "evolution.onsite_form must be \"per_state\" or \"scalar_angle\"");
    cfg.record_every = static_cast<int>(r.integer(t, "record_every", "evolution.record_every", 1));
    if (cfg.record_every < 1) r.fail(t.get("record_every"), "evolution.record_every must be >= 1");
    cfg.termination_threshold = r.number(t, "termination_threshold", "evolution.termination_threshold", 0.995);
    cfg.require_termination = r.boolean(t, "require_termination", "evolution.require_termination", true);
}

void parse_execution(const Reader& r, const toml::table& t, ExperimentConfig& cfg) {
    r.only(t, "execution", {"mode", "shots", "threads", "qubit_cap"});
    const std::string mode = r.string(t, "mode", "execution.mode", "exact");
    if (mode == "exact") {
        cfg.mode = ExecMode::exact();
    } else if (mode == "shots") {
        const long long shots = r.integer(t, "shots", "execution.shots", std::nullopt);
        if (shots < 1) r.fail(t.get("shots"), "execution.shots must be >= 1");
        cfg.mode = ExecMode::sampled(static_cast<std::size_t>(shots));
    } else {
        r.fail(t.get("mode"), "execution.mode must be \"exact\" or \"shots\"");
    }
    cfg.threads = static_cast<int>(r.integer(t, "threads", "execution.threads", 1));
    if (cfg.threads < 1) r.fail(t.get("threads"), "execution.threads must be >= 1");
    cfg.qubit_cap = static_cast<int>(r.integer(t, "qubit_cap", "execution.qubit_cap", 24));
}

void parse_noise(const Reader& r, const toml::table& t, ExperimentConfig& cfg) {
    r.only(t, "noise", {"p1", "p2", "readout", "seed"});
    NoiseModel nm;
    nm.p1 = r.number(t, "p1", "noise.p1", 0.0);
    nm.p2 = r.number(t, "p2", "noise.p2", 0.0);
    nm.seed = static_cast<std::uint64_t>(r.integer(t, "seed", "noise.seed", 0));
    if (const toml::node* n = t.get("readout")) {
        const auto* a = n->as_array();
        if (!a) r.fail(n, "noise.readout must be an array of [p(1|0), p(0|1)] pairs");
        for (const auto& e : *a) {
            const auto v = r.numbers(&e, "noise.readout");
            if (v.size() != 2) r.fail(&e, "noise.readout entries are [p(1|0), p(0|1)]");
            nm.readout.push_back({v[0], v[1]});
        }
    }
    try {
        nm.validate();
    } catch (const ConfigError& e) {
        r.fail(&t, e.what());
    }
    cfg.noise = nm;
}

void parse_mitigation(const Reader& r, const toml::table& t, ExperimentConfig& cfg) {
    r.only(t, "mitigation", {"lambdas", "twirls", "sub_registers", "calibration_shots"});
    MitigationConfig mc;
    if (const toml::node* n = t.get("lambdas")) {
        mc.lambdas = r.numbers(n, "mitigation.lambdas");
        if (mc.lambdas.size() < 2) r.fail(n, "mitigation.lambdas needs at least two noise levels");
        if (mc.lambdas.front() != 1.0) r.fail(n, "mitigation.lambdas must start at 1");
        for (std::size_t i = 1; i < mc.lambdas.size(); ++i)
            if (!(mc.lambdas[i] > mc.lambdas[i - 1])) r.fail(n, "mitigation.lambdas must be strictly increasing");
    }
    mc.twirls = static_cast<int>(r.integer(t, "twirls", "mitigation.twirls", 16));
    if (mc.twirls < 0) r.fail(t.get("twirls"), "mitigation.twirls must be >= 0");
    if (const toml::node* n = t.get("sub_registers")) {
        const auto* a = n->as_array();
        if (!a) r.fail(n, "mitigation.sub_registers must be an array of qubit lists");
        for (const auto& e : *a) {
            auto reg = r.integers(&e, "mitigation.sub_registers");
            if (reg.empty() || reg.size() > 5) r.fail(&e, "sub-registers hold 1 to 5 qubits");
            mc.sub_registers.push_back(std::move(reg));
        }
    }
    const long long shots = r.integer(t, "calibration_shots", "mitigation.calibration_shots", 100000);
    if (shots < 1000) r.fail(t.get("calibration_shots"), "mitigation.calibration_shots must be >= 1000");
    mc.calibration_shots = static_cast<std::size_t>(shots);
    cfg.mitigation = mc;
}

void parse_spectral(const Reader& r, const toml::table& t, ExperimentConfig& cfg) {
    r.only(t, "spectral", {"v1_values", "drift_tolerance"});
    SpectralConfig sc;
    const toml::node* n = t.get("v1_values");
    if (!n) r.fail(&t, "missing key 'spectral.v1_values'");
    sc.v1_values = r.numbers(n, "spectral.v1_values");
    if (sc.v1_values.empty()) r.fail(n, "spectral.v1_values must not be empty");
    for (double v : sc.v1_values)
        if (v < 0) r.fail(n, "spectral.v1_values must be non-negative");
    sc.drift_tolerance = r.number(t, "drift_tolerance", "spectral.drift_tolerance", 0.01);
    cfg.spectral = sc;
}

void parse_oracle(const Reader& r, const toml::table& t, ExperimentConfig& cfg) {
    r.only(t, "oracle", {"compare", "intervals"});
    cfg.compare_oracle = r.boolean(t, "compare", "oracle.compare", true);
    cfg.oracle_intervals = static_cast<int>(r.integer(t, "intervals", "oracle.intervals", 4000));
    if (cfg.oracle_intervals < 10) r.fail(t.get("intervals"), "oracle.intervals must be >= 10");
}

void parse_outputs(const Reader& r, const toml::table& t, ExperimentConfig& cfg) {
    r.only(t, "outputs", {"directory", "plots"});
    cfg.out_dir = r.string(t, "directory", "outputs.directory", "");
    cfg.plots = r.boolean(t, "plots", "outputs.plots", true);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
    toml::table doc;
    try {
        doc = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        throw ConfigError(source + ":" + std::to_string(e.source().begin.line) + ": " + std::string(e.description()));
    }
    const Reader r(source);
    r.only(doc, "", {"name", "description", "seed", "model", "particles", "evolution", "execution", "noise",
                     "mitigation", "spectral", "oracle", "outputs"});
    ExperimentConfig cfg;
    cfg.source = source;
    cfg.name = r.string(doc, "name", "name", "experiment");
    cfg.description = r.string(doc, "description", "description", "");
    const long long seed = r.integer(doc, "seed", "seed", 1);
    if (seed < 0) r.fail(doc.get("seed"), "seed must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(seed);

    parse_model(r, *r.table(doc, "model", true, "model"), cfg);
    if (const auto* t = r.table(doc, "particles", false, "particles")) parse_particles(r, *t, cfg);
    else cfg.initial.maximally_mixed = false;
    parse_evolution(r, *r.table(doc, "evolution", true, "evolution"), cfg);
    if (const auto* t = r.table(doc, "execution", false, "execution")) parse_execution(r, *t, cfg);
    if (const auto* t = r.table(doc, "noise", false, "noise")) parse_noise(r, *t, cfg);
    if (const auto* t = r.table(doc, "mitigation", false, "mitigation")) parse_mitigation(r, *t, cfg);
    if (const auto* t = r.table(doc, "spectral", false, "spectral")) parse_spectral(r, *t, cfg);
    if (const auto* t = r.table(doc, "oracle", false, "oracle")) parse_oracle(r, *t, cfg);
    if (const auto* t = r.table(doc, "outputs", false, "outputs")) parse_outputs(r, *t, cfg);

    if (!cfg.initial.maximally_mixed && cfg.initial.sites.empty() && !cfg.spectral)
        r.fail(&doc, "missing [particles] table with initial_sites");
    if (cfg.noise && cfg.mode.kind == ExecMode::Kind::exact && !cfg.mitigation)
        r.fail(doc.get("noise"), "a [noise] block needs execution.mode = \"shots\"");

    // hash the normalized document so comments and layout do not matter
    std::ostringstream norm;
    norm << doc;
    cfg.hash = hash_hex(norm.str());
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::filesystem::path preset_path(const std::string& name) {
    std::filesystem::path dir = NHSIM_PRESET_DIR;
    if (const char* env = std::getenv("NHSIM_PRESETS")) dir = env;
    const auto p = dir / (name + ".toml");
    if (!std::filesystem::exists(p)) {
        std::string known;
        for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
        throw ConfigError("unknown preset '" + name + "' (available: " + known + ")");
    }
    return p;
}

std::vector<std::string> preset_names() {
    std::filesystem::path dir = NHSIM_PRESET_DIR;
    if (const char* env = std::getenv("NHSIM_PRESETS")) dir = env;
    std::vector<std::string> out;
    if (!std::filesystem::is_directory(dir)) return out;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.path().extension() == ".toml") out.push_back(e.path().stem().string());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace nhsim
