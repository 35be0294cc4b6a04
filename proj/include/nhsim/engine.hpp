#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nhsim/circuit.hpp"
#include "nhsim/core.hpp"
#include "nhsim/encoding.hpp"
#include "nhsim/lcu.hpp"
#include "nhsim/model.hpp"

namespace nhsim {

class StateVector {
public:
    StateVector(int n_system, int n_ancilla = 0);

    int n_system() const { return n_system_; }
    int n_ancilla() const { return n_ancilla_; }
    int n_qubits() const { return n_system_ + n_ancilla_; }
    std::size_t size() const { return static_cast<std::size_t>(amps_.size()); }

    VectorXc& amplitudes() { return amps_; }
    const VectorXc& amplitudes() const { return amps_; }

    void set_basis_state(std::uint64_t index);
    double norm() const { return amps_.norm(); }
    void normalize();

    // |amp|^2 summed over the ancilla bits, indexed by system value
    Eigen::VectorXd system_probabilities() const;

private:
    int n_system_, n_ancilla_;
    VectorXc amps_;
};

struct NoiseModel {
    double p1 = 0.0;
    double p2 = 0.0;
    std::vector<std::array<double, 2>> readout;  // per qubit (p(1|0), p(0|1)); one entry = all qubits
    std::uint64_t seed = 0;

    bool gate_noise() const { return p1 > 0 || p2 > 0; }
    std::array<double, 2> readout_for(int q) const;
    void validate() const;
};

struct ExecMode {
    enum class Kind { exact, shots } kind = Kind::exact;
    std::size_t shots = 0;

    static ExecMode exact() { return {}; }
    static ExecMode sampled(std::size_t n) { return {Kind::shots, n}; }
};

struct RunOutput {
    StateVector state{1};
    std::vector<int> clbits;                      // last trajectory
    std::map<std::string, std::uint64_t> counts;  // clbit 0 first
};

// default cap keeps vectors at 256 MiB
RunOutput run(const Circuit& c, ExecMode mode, const NoiseModel* noise, Rng& rng, int qubit_cap = 24);

// dense unitary of a measurement-free circuit (tests, small registers)
MatrixXc circuit_unitary(const Circuit& c);

// readout from an explicit distribution over the given qubits; applies flips
std::uint64_t sample_readout(const Eigen::VectorXd& probs, int n_bits, int first_qubit, const NoiseModel* noise,
                             Rng& rng);

// ---- compiled programs -------------------------------------------------------

namespace detail {

struct Block {
    bool dense = false;
    int lead = 0;     // dense: acts on qubits [0, lead)
    MatrixXc ut;      // dense: transpose of the block unitary
    Instruction ins;  // otherwise
};

}  // namespace detail

// A circuit prepared for repeated noiseless execution: unitary runs are fused
// into dense blocks when that is cheaper over `executions` repeats.
class Program {
public:
    Program(const Circuit& c, std::size_t executions, int max_fuse_qubits = 11);

    int n_qubits() const { return n_qubits_; }
    std::size_t block_count() const { return blocks_.size(); }
    std::size_t dense_blocks() const;

    // measurement outcomes are forced to 0; returns the product of their probabilities
    double run_postselected(VectorXc& psi) const;

private:
    int n_qubits_;
    int n_clbits_;
    std::vector<detail::Block> blocks_;
};

// ---- time evolution ----------------------------------------------------------

enum class LcuKind { exact_onsite, cosine };

struct InitialState {
    std::vector<int> sites;        // flattened site indices, p of them
    bool maximally_mixed = false;  // uniform ensemble over the sector
};

struct EvolveRequest {
    LadderParams params;
    int particles = 1;
    InitialState initial;
    double t_max = 1.0;
    int steps = 100;
    LcuKind lcu = LcuKind::exact_onsite;
    OnsiteForm onsite_form = OnsiteForm::per_state;
};

struct EngineOptions {
    ExecMode mode = ExecMode::exact();
    std::optional<NoiseModel> noise;
    std::uint64_t seed = 1;
    int threads = 1;
    double fold_lambda = 1.0;
    int twirl_instances = 0;  // 0: no twirling, one instance
    int qubit_cap = 24;
    bool keep_distributions = false;
};

// (reported ancilla failures so far, system readout value)
using LayeredKey = std::pair<int, std::uint64_t>;
using LayeredCounts = std::map<LayeredKey, std::uint64_t>;

struct RunResult {
    Eigen::VectorXd time_grid;
    Eigen::MatrixXd occupancies;          // time x site, on the normalized state
    Eigen::VectorXd success_probability;  // cumulative
    Eigen::VectorXd unphysical_mass;      // exact mode: leaked probability before renormalization
    Eigen::MatrixXd distributions;        // time x physical basis state (optional)
    std::vector<LayeredCounts> counts;    // shots mode
    std::vector<std::uint64_t> discarded_shots;
    std::vector<std::uint64_t> accepted_shots;
    int steps = 0;
    int n_system_qubits = 0;
    std::size_t sector_dim = 0;
    std::uint64_t seed = 0;
    std::string config_hash;
};

struct StepCircuit {
    std::vector<RealPauliTerm> h_terms;
    std::vector<RealPauliTerm> aux_terms;
    AuxGenerator aux;
    double tau = 1.0;
    Circuit step;  // M_H then M_A on n_system + 1 qubits, ancilla last
};

StepCircuit build_step(const EvolveRequest& req, const SectorEncoding& enc);

RunResult evolve(const EvolveRequest& req, const EngineOptions& opt);

// ensemble of basis-state trajectories equivalent to the maximally mixed state
std::vector<std::uint64_t> prepare_maximally_mixed(const SectorEncoding& enc);

// Im E = -<H_A> by Hamiltonian averaging over commuting groups; probs over basis states
double measure_imaginary_energy(const Eigen::VectorXd& probs, const std::vector<RealPauliTerm>& h_a_terms,
                                const std::vector<std::vector<RealPauliTerm>>& groups);
double measure_imaginary_energy(const VectorXc& state, const std::vector<RealPauliTerm>& h_a_terms,
                                const std::vector<std::vector<RealPauliTerm>>& groups);

// physical-sector distribution from post-selected layered counts (k == 0 keys)
Eigen::VectorXd postselected_distribution(const LayeredCounts& counts, std::size_t dim,
                                          std::uint64_t* discarded = nullptr);

Eigen::VectorXd occupancies_from_distribution(const Eigen::VectorXd& probs, const SectorEncoding& enc);

}  // namespace nhsim
