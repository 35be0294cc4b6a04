#pragma once

#include <array>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nhsim/core.hpp"
#include "nhsim/pauli.hpp"

namespace nhsim {

using Rng = std::mt19937_64;

enum class GateKind { X, Y, Z, H, S, Sdg, RZ, RX, CX };

// rotation is a macro op: exp(-i angle/2 * word) on `qubits`, optionally
// controlled; lower() rewrites it into basis gates.
enum class OpKind { gate, rotation, measure, reset_conditional, barrier };

struct Condition {
    int clbit = -1;
    int value = 1;
};

struct Instruction {
    OpKind kind = OpKind::gate;
    GateKind gate = GateKind::X;
    std::vector<int> qubits;
    double angle = 0.0;
    int clbit = -1;
    std::optional<Condition> condition;
    PauliString word;  // rotation only; letter i acts on qubits[i]
    int control = -1;  // rotation only
};

const char* gate_name(GateKind g);
int gate_arity(GateKind g);
bool is_parametric(GateKind g);
Eigen::Matrix2cd gate_matrix(GateKind g, double angle = 0.0);  // 1q gates only

class Circuit {
public:
    explicit Circuit(int n_qubits = 0, int n_clbits = 0) : n_qubits_(n_qubits), n_clbits_(n_clbits) {}

    int n_qubits() const { return n_qubits_; }
    int n_clbits() const { return n_clbits_; }
    const std::vector<Instruction>& instructions() const { return ops_; }
    std::size_t size() const { return ops_.size(); }

    Circuit& gate(GateKind g, std::vector<int> qubits, double angle = 0.0);
    Circuit& x(int q) { return gate(GateKind::X, {q}); }
    Circuit& h(int q) { return gate(GateKind::H, {q}); }
    Circuit& s(int q) { return gate(GateKind::S, {q}); }
    Circuit& sdg(int q) { return gate(GateKind::Sdg, {q}); }
    Circuit& rz(int q, double a) { return gate(GateKind::RZ, {q}, a); }
    Circuit& rx(int q, double a) { return gate(GateKind::RX, {q}, a); }
    Circuit& cx(int c, int t) { return gate(GateKind::CX, {c, t}); }
    Circuit& rotation(const PauliString& word, std::vector<int> qubits, double angle, int control = -1);

    int measure(int q);  // into a fresh clbit, returns its index
    Circuit& measure(int q, int clbit);
    Circuit& reset_conditional(int q, int clbit);  // X on q when clbit reads 1
    Circuit& barrier();

    // appends other's instructions; its clbits are renumbered after ours
    Circuit& append(const Circuit& other);
    Circuit& push(Instruction ins);

    void validate() const;  // lint: ranges, arities, conditions after writes

    std::size_t gate_count(int arity) const;  // lowered gates only

private:
    int n_qubits_;
    int n_clbits_;
    std::vector<Instruction> ops_;
};

// exp(-i theta/2 * word) on qubits 0..word.n-1, lowered to basis gates
Circuit pauli_rotation(const PauliString& word, double theta, std::optional<int> control = {}, int n_qubits = -1);

// rewrite rotation macros into basis gates
Circuit lower(const Circuit& c);

// prod_k exp(-i alpha_k P_k dt) in the given order, as rotation macros
Circuit trotter_step(const std::vector<RealPauliTerm>& terms, double dt, std::optional<int> control, int n_qubits);

template <class Scalar>
std::vector<std::vector<PauliTerm<Scalar>>> group_commuting(const std::vector<PauliTerm<Scalar>>& terms);

// V on ancilla, plus controlled on |0>, minus on |1>, V^dagger, measure, conditional reset
Circuit lcu_step(const Circuit& plus, const Circuit& minus, std::array<double, 2> weights, int ancilla);

Circuit inverse(const Circuit& c);  // unitary part only
Circuit fold(const Circuit& c, double lambda, Rng& rng);

struct TwirlEntry {
    std::array<char, 2> pre;   // (P_c, P_d) applied before the CX
    std::array<char, 2> post;  // (P_a, P_b) applied after
};

struct TwirlTable {
    std::array<TwirlEntry, 16> entries;
};

TwirlTable make_twirl_table();  // brute force, verified against 4x4 matrices
Circuit twirl(const Circuit& c, Rng& rng, const TwirlTable& table);

std::string to_json(const Circuit& c);

}  // namespace nhsim
