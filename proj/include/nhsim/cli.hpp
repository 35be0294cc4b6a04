#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nhsim/analysis.hpp"
#include "nhsim/engine.hpp"
#include "nhsim/mitigation.hpp"
#include "nhsim/model.hpp"

namespace nhsim {

// ---- configuration -------------------------------------------------------------

struct MitigationConfig {
    std::vector<double> lambdas{1.0, 1.25, 1.5, 1.75, 2.0};
    int twirls = 16;
    std::vector<std::vector<int>> sub_registers;  // empty: contiguous blocks of <= 5
    std::size_t calibration_shots = 100000;
};

struct SpectralConfig {
    std::vector<double> v1_values;
    double drift_tolerance = 0.01;  // in units of gamma
};

struct ExperimentConfig {
    std::string name;
    std::string description;
    std::string source;  // file the config came from
    std::string hash;    // of the normalized document
    std::uint64_t seed = 1;

    LadderParams model;
    int particles = 1;
    InitialState initial;

    double t_max = 1.0;
    std::optional<int> steps;  // empty: automatic step rule
    int max_doublings = 4;
    LcuKind lcu = LcuKind::exact_onsite;
    OnsiteForm onsite_form = OnsiteForm::per_state;
    int record_every = 1;
    double termination_threshold = 0.995;
    bool require_termination = true;

    ExecMode mode = ExecMode::exact();
    int threads = 1;
    int qubit_cap = 24;
    std::optional<NoiseModel> noise;

    std::optional<MitigationConfig> mitigation;
    std::optional<SpectralConfig> spectral;

    bool compare_oracle = true;
    int oracle_intervals = 4000;

    std::string out_dir;
    bool plots = true;
};

// throws ConfigError with "<source>:<line>: message"
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);
std::filesystem::path preset_path(const std::string& name);
std::vector<std::string> preset_names();

// FNV-1a over bytes, 16 hex digits
std::string hash_hex(const std::string& bytes);

// ---- outputs --------------------------------------------------------------------

struct OutputMeta {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string command;
};

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const OutputMeta& meta, const std::vector<std::string>& header);
    CsvWriter& operator<<(double v);
    CsvWriter& operator<<(long long v);
    CsvWriter& operator<<(int v) { return *this << static_cast<long long>(v); }
    CsvWriter& operator<<(std::uint64_t v);
    CsvWriter& operator<<(const std::string& v);
    void end_row();

private:
    std::ofstream out_;
    bool first_ = true;
};

std::string format_double(double v);

// metadata comment lines are skipped; returns header + rows as strings
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    int column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const OutputMeta& meta, nlohmann::json body);

// ---- plots (static SVG) -----------------------------------------------------------

struct Series {
    std::string label;
    std::vector<double> x, y;
    bool dashed = false;
};

void plot_lines(const std::filesystem::path& path, const std::string& title, const std::string& xlabel,
                const std::string& ylabel, const std::vector<Series>& series);
void plot_bars(const std::filesystem::path& path, const std::string& title, const std::string& xlabel,
               const std::vector<std::string>& categories, const std::vector<Series>& groups);
void plot_heatmap(const std::filesystem::path& path, const std::string& title, const Eigen::VectorXd& x,
                  const Eigen::MatrixXd& values, const std::string& xlabel, const std::string& ylabel);
void plot_scatter(const std::filesystem::path& path, const std::string& title, const std::vector<Series>& series,
                  const std::string& xlabel, const std::string& ylabel);

// ---- experiments -----------------------------------------------------------------

struct EvolveOutcome {
    RunResult run;
    EscapeProfile escape;          // integral norm recovery
    EscapeProfile escape_success;  // success-probability norm recovery
    std::optional<EscapeProfile> oracle;
    int steps = 0;
    bool terminated = false;
};

// auto step rule; returns the initial m before doubling
int base_steps(const ExperimentConfig& cfg);

EvolveOutcome run_evolve(const ExperimentConfig& cfg);
EscapeProfile run_oracle(const ExperimentConfig& cfg);

struct SpectralPoint {
    double v1 = 0;
    double engine_max_im = 0;
    double drift = 0;
    bool converged = true;
    double oracle_max_im = 0;  // Bloch continuum
    double oracle_min_im = 0;
    double oracle_gap = 0;
    double finite_max_im = 0;  // periodic ladder of the configured size
    double finite_min_im = 0;
    VectorXc spectrum;
};
std::vector<SpectralPoint> run_spectral(const ExperimentConfig& cfg);

struct LambdaRun {
    double lambda = 1;
    RunResult run;
};
std::vector<LambdaRun> run_noisy_schedule(const ExperimentConfig& cfg);

struct MitigationOutcome {
    Eigen::VectorXd time_grid;
    Eigen::MatrixXd raw, readout, full;  // time x site occupancies
    EscapeProfile escape_raw, escape_readout, escape_full;
    double max_kkt = 0;
};
// readout inversion per lambda, then constrained extrapolation per time point
MitigationOutcome mitigate_runs(const ExperimentConfig& cfg, const std::vector<LambdaRun>& runs,
                                const CalibrationSet& cal);

CalibrationSet run_calibration(const ExperimentConfig& cfg);

// ---- verbs ---------------------------------------------------------------------

struct CommandOptions {
    std::optional<std::string> config;
    std::optional<std::string> preset;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

// exit codes
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitConvergence = 3;

int cmd_evolve(const CommandOptions& o);
int cmd_spectral(const CommandOptions& o);
int cmd_oracle(const CommandOptions& o);
int cmd_mitigate(const CommandOptions& o);
int cmd_calibrate(const CommandOptions& o);

}  // namespace nhsim
