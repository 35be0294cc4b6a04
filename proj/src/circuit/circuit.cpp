#include "nhsim/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

namespace nhsim {

const char* gate_name(GateKind g) {
    switch (g) {
        case GateKind::X: return "X";
        case GateKind::Y: return "Y";
        case GateKind::Z: return "Z";
        case GateKind::H: return "H";
        case GateKind::S: return "S";
        case GateKind::Sdg: return "Sdg";
        case GateKind::RZ: return "RZ";
        case GateKind::RX: return "RX";
        case GateKind::CX: return "CX";
    }
    return "?";
}

int gate_arity(GateKind g) { return g == GateKind::CX ? 2 : 1; }
bool is_parametric(GateKind g) { return g == GateKind::RZ || g == GateKind::RX; }

Eigen::Matrix2cd gate_matrix(GateKind g, double a) {
    Eigen::Matrix2cd m;
    const double r = 1 / std::sqrt(2.0);
    switch (g) {
        case GateKind::X: m << 0, 1, 1, 0; break;
        case GateKind::Y: m << 0, -I, I, 0; break;
        case GateKind::Z: m << 1, 0, 0, -1; break;
        case GateKind::H: m << r, r, r, -r; break;
        case GateKind::S: m << 1, 0, 0, I; break;
        case GateKind::Sdg: m << 1, 0, 0, -I; break;
        case GateKind::RZ: m << std::exp(-I * a / 2.0), 0, 0, std::exp(I * a / 2.0); break;
        case GateKind::RX:
            m << std::cos(a / 2), -I * std::sin(a / 2), -I * std::sin(a / 2), std::cos(a / 2);
            break;
        case GateKind::CX: throw std::invalid_argument("gate_matrix: CX is not a 1q gate");
    }
    return m;
}

Circuit& Circuit::push(Instruction ins) {
    ops_.push_back(std::move(ins));
    return *this;
}

Circuit& Circuit::gate(GateKind g, std::vector<int> qubits, double angle) {
    Instruction ins;
    ins.kind = OpKind::gate;
    ins.gate = g;
    ins.qubits = std::move(qubits);
    ins.angle = angle;
    return push(std::move(ins));
}

Circuit& Circuit::rotation(const PauliString& word, std::vector<int> qubits, double angle, int control) {
    Instruction ins;
    ins.kind = OpKind::rotation;
    ins.word = word;
    ins.qubits = std::move(qubits);
    ins.angle = angle;
    ins.control = control;
    return push(std::move(ins));
}

int Circuit::measure(int q) {
    const int c = n_clbits_++;
    measure(q, c);
    return c;
}

Circuit& Circuit::measure(int q, int clbit) {
    Instruction ins;
    ins.kind = OpKind::measure;
    ins.qubits = {q};
    ins.clbit = clbit;
    n_clbits_ = std::max(n_clbits_, clbit + 1);
    return push(std::move(ins));
}

Circuit& Circuit::reset_conditional(int q, int clbit) {
    Instruction ins;
    ins.kind = OpKind::reset_conditional;
    ins.gate = GateKind::X;
    ins.qubits = {q};
    ins.condition = Condition{clbit, 1};
    return push(std::move(ins));
}

Circuit& Circuit::barrier() {
    Instruction ins;
    ins.kind = OpKind::barrier;
    return push(std::move(ins));
}

Circuit& Circuit::append(const Circuit& other) {
    if (other.n_qubits_ > n_qubits_) throw std::invalid_argument("append: fragment is wider than circuit");
    const int off = n_clbits_;
    ops_.reserve(ops_.size() + other.ops_.size());
    for (Instruction ins : other.ops_) {
        if (ins.clbit >= 0) ins.clbit += off;
        if (ins.condition) ins.condition->clbit += off;
        ops_.push_back(std::move(ins));
    }
    n_clbits_ += other.n_clbits_;
    return *this;
}

void Circuit::validate() const {
    auto in_range = [&](int q) { return q >= 0 && q < n_qubits_; };
    std::set<int> written;
    for (std::size_t k = 0; k < ops_.size(); ++k) {
        const auto& ins = ops_[k];
        const std::string where = "instruction " + std::to_string(k) + ": ";
        for (int q : ins.qubits)
            if (!in_range(q)) throw std::invalid_argument(where + "qubit " + std::to_string(q) + " out of range");
        if (ins.condition && !written.count(ins.condition->clbit))
            throw std::invalid_argument(where + "condition reads a clbit no earlier measurement wrote");
        switch (ins.kind) {
            case OpKind::gate:
            case OpKind::reset_conditional:
                if (static_cast<int>(ins.qubits.size()) != gate_arity(ins.gate))
                    throw std::invalid_argument(where + "arity mismatch for " + gate_name(ins.gate));
                if (ins.qubits.size() == 2 && ins.qubits[0] == ins.qubits[1])
                    throw std::invalid_argument(where + "CX control equals target");
                if (!std::isfinite(ins.angle)) throw std::invalid_argument(where + "non-finite angle");
                break;
            case OpKind::rotation: {
                if (static_cast<int>(ins.qubits.size()) != ins.word.n)
                    throw std::invalid_argument(where + "rotation word/qubit length mismatch");
                if (ins.word.is_identity()) throw std::invalid_argument(where + "identity rotation");
                if (!std::isfinite(ins.angle)) throw std::invalid_argument(where + "non-finite angle");
                std::set<int> qs(ins.qubits.begin(), ins.qubits.end());
                if (qs.size() != ins.qubits.size()) throw std::invalid_argument(where + "repeated qubit");
                if (ins.control >= 0 && (!in_range(ins.control) || qs.count(ins.control)))
                    throw std::invalid_argument(where + "bad rotation control");
                break;
            }
            case OpKind::measure:
                if (ins.qubits.size() != 1 || ins.clbit < 0 || ins.clbit >= n_clbits_)
                    throw std::invalid_argument(where + "bad measurement");
                written.insert(ins.clbit);
                break;
            case OpKind::barrier: break;
        }
    }
}

std::size_t Circuit::gate_count(int arity) const {
    return std::count_if(ops_.begin(), ops_.end(), [&](const Instruction& i) {
        return i.kind == OpKind::gate && gate_arity(i.gate) == arity;
    });
}

namespace {

void emit_rotation(Circuit& out, const PauliString& word, const std::vector<int>& qubits, double theta,
                   int control) {
    std::vector<int> sup;  // physical qubits in support, word order
    for (int i = 0; i < word.n; ++i)
        if (word.at(i) != 'I') sup.push_back(qubits[i]);
    if (sup.empty()) throw std::invalid_argument("pauli_rotation: identity word");

    auto basis = [&](bool pre) {
        for (int i = 0; i < word.n; ++i) {
            const int q = qubits[i];
            switch (word.at(i)) {
                case 'X': out.h(q); break;
                case 'Y':
                    if (pre) out.sdg(q).h(q);
                    else out.h(q).s(q);
                    break;
                default: break;
            }
        }
    };
    basis(true);
    for (std::size_t i = 0; i + 1 < sup.size(); ++i) out.cx(sup[i], sup[i + 1]);
    const int t = sup.back();
    if (control < 0) {
        out.rz(t, theta);
    } else {
        out.rz(t, theta / 2).cx(control, t).rz(t, -theta / 2).cx(control, t);
    }
    for (std::size_t i = sup.size() - 1; i-- > 0;) out.cx(sup[i], sup[i + 1]);
    basis(false);
}

std::vector<int> iota(int n) {
    std::vector<int> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

}  // namespace

Circuit pauli_rotation(const PauliString& word, double theta, std::optional<int> control, int n_qubits) {
    if (word.is_identity()) throw std::invalid_argument("pauli_rotation: identity word is a global phase");
    if (!std::isfinite(theta)) throw std::invalid_argument("pauli_rotation: non-finite angle");
    int width = word.n;
    if (control) width = std::max(width, *control + 1);
    if (n_qubits < 0) n_qubits = width;
    if (n_qubits < width) throw std::invalid_argument("pauli_rotation: register too small");
    if (control && *control < word.n) throw std::invalid_argument("pauli_rotation: control overlaps word");
    Circuit out(n_qubits);
    emit_rotation(out, word, iota(word.n), theta, control.value_or(-1));
    return out;
}

Circuit lower(const Circuit& c) {
    Circuit out(c.n_qubits(), c.n_clbits());
    for (const auto& ins : c.instructions()) {
        if (ins.kind == OpKind::rotation) emit_rotation(out, ins.word, ins.qubits, ins.angle, ins.control);
        else out.push(ins);
    }
    return out;
}

Circuit trotter_step(const std::vector<RealPauliTerm>& terms, double dt, std::optional<int> control,
                     int n_qubits) {
    Circuit out(n_qubits);
    for (const auto& t : terms) {
        const double theta = 2 * t.coefficient * dt;
        if (t.string.n > n_qubits) throw std::invalid_argument("trotter_step: term wider than register");
        if (t.string.is_identity()) {
            // controlled global phase e^{-i theta/2} on |1> is a phase gate on the control
            if (control) out.rz(*control, -theta / 2);
            continue;
        }
        out.rotation(t.string, iota(t.string.n), theta, control.value_or(-1));
    }
    return out;
}

template <class Scalar>
std::vector<std::vector<PauliTerm<Scalar>>> group_commuting(const std::vector<PauliTerm<Scalar>>& terms) {
    const std::size_t n = terms.size();
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (!terms[i].string.commutes(terms[j].string)) {
                adj[i].push_back(j);
                adj[j].push_back(i);
            }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return adj[a].size() > adj[b].size(); });
    std::vector<int> color(n, -1);
    int n_colors = 0;
    for (std::size_t v : order) {
        std::vector<char> used(n_colors + 1, 0);
        for (std::size_t u : adj[v])
            if (color[u] >= 0) used[color[u]] = 1;
        int c = 0;
        while (used[c]) ++c;
        color[v] = c;
        n_colors = std::max(n_colors, c + 1);
    }
    std::vector<std::vector<PauliTerm<Scalar>>> groups(n_colors);
    for (std::size_t i = 0; i < n; ++i) groups[color[i]].push_back(terms[i]);
    return groups;
}

template std::vector<std::vector<PauliTerm<double>>> group_commuting(const std::vector<PauliTerm<double>>&);
template std::vector<std::vector<PauliTerm<cd>>> group_commuting(const std::vector<PauliTerm<cd>>&);

Circuit lcu_step(const Circuit& plus, const Circuit& minus, std::array<double, 2> w, int ancilla) {
    if (!(w[0] >= 0) || !(w[1] >= 0) || w[0] + w[1] <= 0) throw std::invalid_argument("lcu_step: invalid weights");
    for (const Circuit* f : {&plus, &minus})
        for (const auto& ins : f->instructions())
            if (ins.kind == OpKind::measure || ins.kind == OpKind::reset_conditional)
                throw std::invalid_argument("lcu_step: branches must be unitary");
    const int width = std::max({plus.n_qubits(), minus.n_qubits(), ancilla + 1});
    Circuit out(width);
    const bool equal = std::abs(w[0] - w[1]) <= 1e-15 * (w[0] + w[1]);
    const double theta = 2 * std::acos(std::sqrt(w[0] / (w[0] + w[1])));
    auto prep = [&](double sign) {
        if (equal) out.h(ancilla);
        else out.sdg(ancilla).rx(ancilla, sign * theta).s(ancilla);
    };
    prep(1);
    out.x(ancilla);
    out.append(plus);
    out.x(ancilla);
    out.append(minus);
    prep(-1);
    const int c = out.measure(ancilla);
    out.reset_conditional(ancilla, c);
    return out;
}

namespace {

Instruction inverted(Instruction ins) {
    if (ins.kind == OpKind::rotation) {
        ins.angle = -ins.angle;
        return ins;
    }
    switch (ins.gate) {
        case GateKind::S: ins.gate = GateKind::Sdg; break;
        case GateKind::Sdg: ins.gate = GateKind::S; break;
        case GateKind::RZ:
        case GateKind::RX: ins.angle = -ins.angle; break;
        default: break;
    }
    return ins;
}

bool foldable(const Instruction& ins) { return ins.kind == OpKind::gate && !ins.condition; }

}  // namespace

Circuit inverse(const Circuit& c) {
    Circuit out(c.n_qubits(), 0);
    const auto& ops = c.instructions();
    for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
        if (it->kind == OpKind::barrier) continue;
        if (it->kind != OpKind::gate && it->kind != OpKind::rotation)
            throw std::invalid_argument("inverse: circuit is not unitary");
        if (it->condition) throw std::invalid_argument("inverse: conditional gate");
        out.push(inverted(*it));
    }
    return out;
}

Circuit fold(const Circuit& c, double lambda, Rng& rng) {
    if (!(lambda >= 1.0)) throw std::invalid_argument("fold: lambda must be >= 1");
    Circuit cur = lower(c);
    auto fold_round = [&](double prob) {
        std::bernoulli_distribution coin(std::clamp(prob, 0.0, 1.0));
        Circuit out(cur.n_qubits(), cur.n_clbits());
        for (const auto& ins : cur.instructions()) {
            out.push(ins);
            if (foldable(ins) && (prob >= 1.0 || (prob > 0.0 && coin(rng)))) {
                out.push(inverted(ins));
                out.push(ins);
            }
        }
        cur = std::move(out);
    };
    while (lambda > 3.0 + 1e-12) {
        fold_round(1.0);
        lambda /= 3.0;
    }
    if (lambda > 1.0) fold_round((lambda - 1.0) / 2.0);
    return cur;
}

namespace {

Eigen::Matrix4cd cx_matrix() {
    Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
    m(0, 0) = m(1, 1) = m(2, 3) = m(3, 2) = 1;  // control is qubit 0 (most significant)
    return m;
}

Eigen::Matrix2cd pauli2(char p) {
    switch (p) {
        case 'X': return gate_matrix(GateKind::X);
        case 'Y': return gate_matrix(GateKind::Y);
        case 'Z': return gate_matrix(GateKind::Z);
        default: return Eigen::Matrix2cd::Identity();
    }
}

Eigen::Matrix4cd kron2(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
    Eigen::Matrix4cd m;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) m.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return m;
}

// |tr(A^dag B)| / 4 == 1 iff A = phase * B for unitaries
bool equal_up_to_phase(const Eigen::Matrix4cd& a, const Eigen::Matrix4cd& b, double tol) {
    return std::abs(std::abs((a.adjoint() * b).trace()) / 4.0 - 1.0) < tol;
}

GateKind pauli_gate(char p) {
    return p == 'X' ? GateKind::X : p == 'Y' ? GateKind::Y : GateKind::Z;
}

}  // namespace

TwirlTable make_twirl_table() {
    static constexpr char letters[4] = {'I', 'X', 'Y', 'Z'};
    const Eigen::Matrix4cd cx = cx_matrix();
    TwirlTable table;
    int k = 0;
    for (char c : letters)
        for (char d : letters) {
            const Eigen::Matrix4cd target = cx * kron2(pauli2(c), pauli2(d)) * cx;
            bool found = false;
            for (char a : letters)
                for (char b : letters) {
                    if (found || !equal_up_to_phase(kron2(pauli2(a), pauli2(b)), target, 1e-12)) continue;
                    const Eigen::Matrix4cd full = kron2(pauli2(a), pauli2(b)) * cx * kron2(pauli2(c), pauli2(d));
                    if (!equal_up_to_phase(full, cx, 1e-12)) throw std::logic_error("twirl table identity failed");
                    table.entries[k++] = TwirlEntry{{c, d}, {a, b}};
                    found = true;
                }
            if (!found) throw std::logic_error("twirl table: no post pair");
        }
    return table;
}

Circuit twirl(const Circuit& c, Rng& rng, const TwirlTable& table) {
    const Circuit low = lower(c);
    Circuit out(low.n_qubits(), low.n_clbits());
    std::uniform_int_distribution<int> pick(0, 15);
    auto emit = [&](char p, int q) {
        if (p != 'I') out.gate(pauli_gate(p), {q});
    };
    for (const auto& ins : low.instructions()) {
        if (ins.kind != OpKind::gate || ins.gate != GateKind::CX || ins.condition) {
            out.push(ins);
            continue;
        }
        const auto& e = table.entries[pick(rng)];
        emit(e.pre[0], ins.qubits[0]);
        emit(e.pre[1], ins.qubits[1]);
        out.push(ins);
        emit(e.post[0], ins.qubits[0]);
        emit(e.post[1], ins.qubits[1]);
    }
    return out;
}

std::string to_json(const Circuit& c) {
    using nlohmann::json;
    json j;
    j["n_qubits"] = c.n_qubits();
    j["n_clbits"] = c.n_clbits();
    json list = json::array();
    for (const auto& ins : c.instructions()) {
        json e;
        switch (ins.kind) {
            case OpKind::gate: e["op"] = gate_name(ins.gate); break;
            case OpKind::rotation:
                e["op"] = "PauliRotation";
                e["word"] = ins.word.str();
                if (ins.control >= 0) e["control"] = ins.control;
                break;
            case OpKind::measure: e["op"] = "measure"; break;
            case OpKind::reset_conditional: e["op"] = "reset_conditional"; break;
            case OpKind::barrier: e["op"] = "barrier"; break;
        }
        e["qubits"] = ins.qubits;
        if (ins.kind == OpKind::rotation || (ins.kind == OpKind::gate && is_parametric(ins.gate)))
            e["angle"] = ins.angle;
        if (ins.clbit >= 0) e["clbit"] = ins.clbit;
        if (ins.condition) e["condition"] = {ins.condition->clbit, ins.condition->value};
        list.push_back(std::move(e));
    }
    j["instructions"] = std::move(list);
    return j.dump(1);
}

}  // namespace nhsim
