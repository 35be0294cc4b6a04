#include "nhsim/pauli.hpp"

#include <algorithm>
#include <tuple>

namespace nhsim {

PauliString PauliString::parse(std::string_view word) {
    if (word.empty() || word.size() > 63) throw std::invalid_argument("pauli word length out of range");
    PauliString p;
    p.n = static_cast<int>(word.size());
    for (int q = 0; q < p.n; ++q) {
        const std::uint64_t b = p.bit(q);
        switch (word[q]) {
            case 'I': break;
            case 'X': p.x |= b; break;
            case 'Z': p.z |= b; break;
            case 'Y': p.x |= b; p.z |= b; break;
            default: throw std::invalid_argument("bad pauli letter in '" + std::string(word) + "'");
        }
    }
    return p;
}

char PauliString::at(int q) const {
    const bool bx = x & bit(q), bz = z & bit(q);
    return bx ? (bz ? 'Y' : 'X') : (bz ? 'Z' : 'I');
}

std::string PauliString::str() const {
    std::string s(n, 'I');
    for (int q = 0; q < n; ++q) s[q] = at(q);
    return s;
}

std::vector<int> PauliString::support() const {
    std::vector<int> out;
    for (int q = 0; q < n; ++q)
        if ((x | z) & bit(q)) out.push_back(q);
    return out;
}

int qubits_for(std::size_t dim) {
    int n = 1;
    while ((std::size_t{1} << n) < dim) ++n;
    return n;
}

MatrixXc embed(const MatrixXc& m, int n_qubits) {
    const Eigen::Index dim = Eigen::Index{1} << n_qubits;
    if (m.rows() != m.cols() || m.rows() > dim) throw std::invalid_argument("embed: operator does not fit");
    MatrixXc out = MatrixXc::Zero(dim, dim);
    out.topLeftCorner(m.rows(), m.cols()) = m;
    return out;
}

std::vector<ComplexPauliTerm> pauli_decompose(const MatrixXc& m, int n_qubits, double drop_tol) {
    if (m.rows() != m.cols()) throw std::invalid_argument("pauli_decompose: matrix not square");
    const auto rows = static_cast<std::size_t>(m.rows());
    if (n_qubits < 0) {
        if (rows == 0 || (rows & (rows - 1)) != 0)
            throw std::invalid_argument("pauli_decompose: dimension is not a power of two; pass n_qubits");
        n_qubits = qubits_for(rows);
        if (rows == 1) n_qubits = 0;
    }
    if (n_qubits > 14) throw std::invalid_argument("pauli_decompose: too many qubits");
    const std::uint64_t dim = std::uint64_t{1} << n_qubits;
    if (rows > dim) throw std::invalid_argument("pauli_decompose: matrix larger than qubit space");

    std::vector<ComplexPauliTerm> out;
    std::vector<cd> h(dim);
    static constexpr cd ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    for (std::uint64_t f = 0; f < dim; ++f) {
        bool any = false;
        for (std::uint64_t j = 0; j < dim; ++j) {
            const std::uint64_t k = j ^ f;
            h[j] = (j < rows && k < rows) ? m(j, k) : cd{};
            any |= h[j] != cd{};
        }
        if (!any) continue;
        // Walsh-Hadamard over z
        for (std::uint64_t len = 1; len < dim; len <<= 1)
            for (std::uint64_t i = 0; i < dim; i += len << 1)
                for (std::uint64_t j = i; j < i + len; ++j) {
                    const cd a = h[j], b = h[j + len];
                    h[j] = a + b;
                    h[j + len] = a - b;
                }
        for (std::uint64_t z = 0; z < dim; ++z) {
            const cd c = ipow[popcount(f & z) & 3] * h[z] / static_cast<double>(dim);
            if (std::abs(c) <= drop_tol) continue;
            out.push_back({c, PauliString{n_qubits, f, z}});
        }
    }
    canonical_order(out);
    return out;
}

std::vector<RealPauliTerm> real_terms(const std::vector<ComplexPauliTerm>& terms, double tol) {
    std::vector<RealPauliTerm> out;
    out.reserve(terms.size());
    for (const auto& t : terms) {
        if (std::abs(t.coefficient.imag()) > tol)
            throw std::invalid_argument("real_terms: operator is not Hermitian (term " + t.string.str() + ")");
        if (t.coefficient.real() != 0.0) out.push_back({t.coefficient.real(), t.string});
    }
    return out;
}

MatrixXc to_dense(const PauliString& p) {
    const std::uint64_t dim = std::uint64_t{1} << p.n;
    MatrixXc out = MatrixXc::Zero(dim, dim);
    for (std::uint64_t j = 0; j < dim; ++j) out(j ^ p.x, j) = pauli_phase(p, j);
    return out;
}

template <class Scalar>
void canonical_order(std::vector<PauliTerm<Scalar>>& terms) {
    auto key = [](const PauliString& p) { return std::make_tuple(p.support(), p.str()); };
    std::stable_sort(terms.begin(), terms.end(),
                     [&](const auto& a, const auto& b) { return key(a.string) < key(b.string); });
}

template void canonical_order(std::vector<PauliTerm<double>>&);
template void canonical_order(std::vector<PauliTerm<cd>>&);

}  // namespace nhsim
