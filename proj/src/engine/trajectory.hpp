#pragma once

#include <random>
#include <string>
#include <vector>

#include "engine/kernels.hpp"
#include "nhsim/circuit.hpp"
#include "nhsim/engine.hpp"

namespace nhsim::detail {

struct Trajectory {
    VectorXc& psi;
    int n;
    std::vector<int>& clbits;
    const NoiseModel* noise;
    Rng& rng;
    std::size_t width = 1;  // columns when psi holds a row-major block

    void pauli(char p, int q) {
        switch (p) {
            case 'X': kernel::apply_1q(psi.data(), n, q, gate_matrix(GateKind::X), width); break;
            case 'Y': kernel::apply_1q(psi.data(), n, q, gate_matrix(GateKind::Y), width); break;
            case 'Z': kernel::apply_diag_1q(psi.data(), n, q, 1.0, -1.0, width); break;
            default: break;
        }
    }

    void gate_noise(const Instruction& ins) {
        if (!noise) return;
        static constexpr char letters[4] = {'I', 'X', 'Y', 'Z'};
        if (ins.qubits.size() == 1) {
            if (noise->p1 <= 0 || !std::bernoulli_distribution(noise->p1)(rng)) return;
            pauli(letters[std::uniform_int_distribution<int>(1, 3)(rng)], ins.qubits[0]);
        } else {
            if (noise->p2 <= 0 || !std::bernoulli_distribution(noise->p2)(rng)) return;
            const int k = std::uniform_int_distribution<int>(1, 15)(rng);
            pauli(letters[k / 4], ins.qubits[0]);
            pauli(letters[k % 4], ins.qubits[1]);
        }
    }

    void gate(const Instruction& ins) {
        if (ins.gate == GateKind::CX) kernel::apply_cx(psi.data(), n, ins.qubits[0], ins.qubits[1], width);
        else if (ins.gate == GateKind::RZ)
            kernel::apply_diag_1q(psi.data(), n, ins.qubits[0], std::exp(-I * ins.angle / 2.0),
                                  std::exp(I * ins.angle / 2.0), width);
        else kernel::apply_1q(psi.data(), n, ins.qubits[0], gate_matrix(ins.gate, ins.angle), width);
        gate_noise(ins);
    }

    int measure(int q) {
        const std::uint64_t bit = kernel::qbit(n, q);
        double p1 = 0;
        for (Eigen::Index i = 0; i < psi.size(); ++i)
            if (i & bit) p1 += std::norm(psi(i));
        const int outcome = std::uniform_real_distribution<double>(0, 1)(rng) < p1 ? 1 : 0;
        const double keep = outcome ? p1 : 1 - p1;
        const double scale = keep > 0 ? 1 / std::sqrt(keep) : 0.0;
        for (Eigen::Index i = 0; i < psi.size(); ++i)
            psi(i) = (((i & bit) != 0) == (outcome == 1)) ? psi(i) * scale : cd{};
        int reported = outcome;
        if (noise) {
            const auto ro = noise->readout_for(q);
            if (std::bernoulli_distribution(ro[outcome])(rng)) reported ^= 1;
        }
        return reported;
    }

    void exec(const Instruction& ins) {
        if (ins.condition && clbits[ins.condition->clbit] != ins.condition->value) return;
        switch (ins.kind) {
            case OpKind::gate:
            case OpKind::reset_conditional: gate(ins); break;
            case OpKind::rotation: {
                std::uint64_t x = 0, z = 0;
                for (int i = 0; i < ins.word.n; ++i) {
                    const char p = ins.word.at(i);
                    const std::uint64_t b = kernel::qbit(n, ins.qubits[i]);
                    if (p == 'X' || p == 'Y') x |= b;
                    if (p == 'Z' || p == 'Y') z |= b;
                }
                const std::uint64_t ctrl = ins.control >= 0 ? kernel::qbit(n, ins.control) : 0;
                kernel::apply_rotation(psi.data(), n, x, z, ins.angle, ctrl, width);
                break;
            }
            case OpKind::measure: clbits[ins.clbit] = measure(ins.qubits[0]); break;
            case OpKind::barrier: break;
        }
    }
};

inline std::string bits_key(const std::vector<int>& bits) {
    std::string s(bits.size(), '0');
    for (std::size_t i = 0; i < bits.size(); ++i) s[i] = bits[i] ? '1' : '0';
    return s;
}

inline Rng stream(std::uint64_t base, std::uint64_t tag, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

}  // namespace nhsim::detail
