#include "nhsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "engine/kernels.hpp"
#include "engine/pool.hpp"
#include "engine/trajectory.hpp"

namespace nhsim {

StateVector::StateVector(int n_system, int n_ancilla) : n_system_(n_system), n_ancilla_(n_ancilla) {
    if (n_system < 0 || n_ancilla < 0 || n_system + n_ancilla > 30)
        throw std::invalid_argument("StateVector: bad register size");
    amps_ = VectorXc::Zero(Eigen::Index{1} << (n_system + n_ancilla));
    amps_(0) = 1;
}

void StateVector::set_basis_state(std::uint64_t index) {
    if (index >= size()) throw std::out_of_range("set_basis_state: index out of range");
    amps_.setZero();
    amps_(static_cast<Eigen::Index>(index)) = 1;
}

void StateVector::normalize() {
    const double nrm = amps_.norm();
    if (!(nrm > 0)) throw std::runtime_error("normalize: zero state");
    amps_ /= nrm;
}

Eigen::VectorXd StateVector::system_probabilities() const {
    const Eigen::Index na = Eigen::Index{1} << n_ancilla_;
    Eigen::Map<const MatrixXc> m(amps_.data(), na, amps_.size() / na);
    return m.cwiseAbs2().colwise().sum().transpose();
}

std::array<double, 2> NoiseModel::readout_for(int q) const {
    if (readout.empty()) return {0.0, 0.0};
    if (readout.size() == 1) return readout[0];
    if (q < 0 || q >= static_cast<int>(readout.size())) throw std::out_of_range("readout_for: qubit without readout entry");
    return readout[q];
}

void NoiseModel::validate() const {
    auto ok = [](double p) { return p >= 0.0 && p < 1.0; };
    if (!ok(p1) || !ok(p2)) throw ConfigError("noise: gate error probabilities must lie in [0, 1)");
    for (const auto& r : readout)
        if (!ok(r[0]) || !ok(r[1])) throw ConfigError("noise: readout flip probabilities must lie in [0, 1)");
}

using detail::Trajectory;
using detail::stream;
using detail::bits_key;

RunOutput run(const Circuit& c, ExecMode mode, const NoiseModel* noise, Rng& rng, int qubit_cap) {
    c.validate();
    if (c.n_qubits() > qubit_cap)
        throw std::invalid_argument("run: " + std::to_string(c.n_qubits()) + " qubits exceeds the cap of " +
                                    std::to_string(qubit_cap));
    if (noise) noise->validate();
    const Circuit lowered = (noise && noise->gate_noise()) ? lower(c) : c;
    RunOutput out;
    out.state = StateVector(c.n_qubits());
    auto one = [&](Rng& r, StateVector& st, std::vector<int>& bits) {
        st.set_basis_state(0);
        bits.assign(c.n_clbits(), 0);
        Trajectory tr{st.amplitudes(), c.n_qubits(), bits, noise, r};
        for (const auto& ins : lowered.instructions()) tr.exec(ins);
    };
    if (mode.kind == ExecMode::Kind::exact) {
        one(rng, out.state, out.clbits);
        return out;
    }
    const std::uint64_t base = rng();
    StateVector st(c.n_qubits());
    for (std::size_t s = 0; s < mode.shots; ++s) {
        Rng r = stream(base, 0, s);
        one(r, st, out.clbits);
        out.counts[bits_key(out.clbits)]++;
    }
    out.state = st;
    return out;
}

MatrixXc circuit_unitary(const Circuit& c) {
    const int n = c.n_qubits();
    if (n > 12) throw std::invalid_argument("circuit_unitary: register too large");
    const Eigen::Index dim = Eigen::Index{1} << n;
    MatrixXc u = MatrixXc::Identity(dim, dim);
    std::vector<int> bits(c.n_clbits(), 0);
    Rng rng(0);
    for (Eigen::Index col = 0; col < dim; ++col) {
        VectorXc v = u.col(col);
        Trajectory tr{v, n, bits, nullptr, rng};
        for (const auto& ins : c.instructions()) {
            if (ins.kind == OpKind::measure || ins.kind == OpKind::reset_conditional || ins.condition)
                throw std::invalid_argument("circuit_unitary: circuit has non-unitary instructions");
            tr.exec(ins);
        }
        u.col(col) = v;
    }
    return u;
}

std::uint64_t sample_readout(const Eigen::VectorXd& probs, int n_bits, int first_qubit, const NoiseModel* noise,
                             Rng& rng) {
    const double total = probs.sum();
    double u = std::uniform_real_distribution<double>(0, total)(rng);
    std::uint64_t v = 0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        v = static_cast<std::uint64_t>(i);
        u -= probs(i);
        if (u < 0) break;
    }
    if (noise && !noise->readout.empty()) {
        for (int q = 0; q < n_bits; ++q) {
            const std::uint64_t bit = std::uint64_t{1} << (n_bits - 1 - q);
            const int b = (v & bit) ? 1 : 0;
            if (std::bernoulli_distribution(noise->readout_for(first_qubit + q)[b])(rng)) v ^= bit;
        }
    }
    return v;
}

// ---- Program -----------------------------------------------------------------

namespace {

bool is_unitary_op(const Instruction& ins) {
    return !ins.condition && (ins.kind == OpKind::gate || ins.kind == OpKind::rotation);
}

int max_qubit(const Instruction& ins) {
    int m = -1;
    for (int q : ins.qubits) m = std::max(m, q);
    return std::max(m, ins.control);
}

}  // namespace

Program::Program(const Circuit& c, std::size_t executions, int max_fuse_qubits)
    : n_qubits_(c.n_qubits()), n_clbits_(c.n_clbits()) {
    c.validate();
    const auto& ops = c.instructions();
    const int n = n_qubits_;
    std::vector<int> dummy_bits(c.n_clbits(), 0);
    Rng dummy_rng(0);
    std::size_t i = 0;
    while (i < ops.size()) {
        if (!is_unitary_op(ops[i])) {
            // a barrier only fences fusion
            if (ops[i].kind != OpKind::barrier) blocks_.push_back({false, 0, {}, ops[i]});
            ++i;
            continue;
        }
        std::size_t j = i;
        int k = 0;
        while (j < ops.size() && is_unitary_op(ops[j])) k = std::max(k, max_qubit(ops[j++]) + 1);
        const double len = static_cast<double>(j - i), e = static_cast<double>(executions);
        const double d_full = std::ldexp(1.0, n), d_k = std::ldexp(1.0, k);
        const bool fuse = k > 0 && k <= max_fuse_qubits && len > 1 &&
                          len * d_k * d_k + e * d_k * d_full < e * len * d_full;
        if (!fuse) {
            for (; i < j; ++i) blocks_.push_back({false, 0, {}, ops[i]});
            continue;
        }
        const Eigen::Index dk = Eigen::Index{1} << k;
        // row-major identity, every op hits all columns at once
        VectorXc rows = VectorXc::Zero(dk * dk);
        for (Eigen::Index r = 0; r < dk; ++r) rows(r * dk + r) = 1;
        Trajectory tr{rows, k, dummy_bits, nullptr, dummy_rng, static_cast<std::size_t>(dk)};
        for (std::size_t t = i; t < j; ++t) tr.exec(ops[t]);
        // row-major U read as column-major is U^T
        blocks_.push_back({true, k, Eigen::Map<const MatrixXc>(rows.data(), dk, dk), {}});
        i = j;
    }
}

std::size_t Program::dense_blocks() const {
    return std::count_if(blocks_.begin(), blocks_.end(), [](const detail::Block& b) { return b.dense; });
}

double Program::run_postselected(VectorXc& psi) const {
    const int n = n_qubits_;
    std::vector<int> bits(n_clbits_, 0);
    Rng dummy(0);
    Trajectory tr{psi, n, bits, nullptr, dummy};
    double weight = 1.0;
    for (const auto& b : blocks_) {
        if (b.dense) {
            const Eigen::Index rows = Eigen::Index{1} << (n - b.lead);
            Eigen::Map<MatrixXc> m(psi.data(), rows, b.ut.rows());
            if (rows == 1) psi = (m * b.ut).transpose();
            else m = m * b.ut;
            continue;
        }
        const auto& ins = b.ins;
        if (ins.kind == OpKind::measure) {
            const std::uint64_t bit = kernel::qbit(n, ins.qubits[0]);
            double p0 = 0;
            for (Eigen::Index r = 0; r < psi.size(); ++r) {
                if (r & bit) psi(r) = 0;
                else p0 += std::norm(psi(r));
            }
            weight *= p0;
            if (!(p0 > 0)) return 0.0;
            psi /= std::sqrt(p0);
            bits[ins.clbit] = 0;
            continue;
        }
        tr.exec(ins);
    }
    return weight;
}

}  // namespace nhsim
