#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "nhsim/core.hpp"

namespace nhsim {

// Pauli word on n qubits in symplectic form, P = i^{|x&z|} X^x Z^z.
// Qubit 0 is the most significant bit of the masks (big-endian register).
struct PauliString {
    int n = 0;
    std::uint64_t x = 0;
    std::uint64_t z = 0;

    static PauliString parse(std::string_view word);
    std::string str() const;

    std::uint64_t bit(int q) const { return std::uint64_t{1} << (n - 1 - q); }
    char at(int q) const;
    bool is_identity() const { return (x | z) == 0; }
    int weight() const { return popcount(x | z); }
    std::vector<int> support() const;  // ascending qubit index
    bool commutes(const PauliString& o) const {
        return ((popcount(x & o.z) + popcount(z & o.x)) & 1) == 0;
    }

    friend bool operator==(const PauliString&, const PauliString&) = default;
};

template <class Scalar>
struct PauliTerm {
    Scalar coefficient{};
    PauliString string;
};

using RealPauliTerm = PauliTerm<double>;
using ComplexPauliTerm = PauliTerm<cd>;

// zero-pad a D x D operator into the 2^n space (top-left block)
MatrixXc embed(const MatrixXc& m, int n_qubits);

int qubits_for(std::size_t dim);  // ceil(log2 dim), at least 1

std::vector<ComplexPauliTerm> pauli_decompose(const MatrixXc& m, int n_qubits = -1,
                                              double drop_tol = 1e-12);

// For Hermitian inputs; throws if an imaginary part above tol survives.
std::vector<RealPauliTerm> real_terms(const std::vector<ComplexPauliTerm>& terms,
                                      double tol = 1e-10);

MatrixXc to_dense(const PauliString& p);

template <class Scalar>
MatrixXc to_dense(const std::vector<PauliTerm<Scalar>>& terms, int n_qubits) {
    const Eigen::Index dim = Eigen::Index{1} << n_qubits;
    MatrixXc out = MatrixXc::Zero(dim, dim);
    for (const auto& t : terms) out += cd(t.coefficient) * to_dense(t.string);
    return out;
}

// phase of row r in P|col>: P|j> = phase(j) |j ^ x>
inline cd pauli_phase(const PauliString& p, std::uint64_t j) {
    // i^{|x&z|} (-1)^{|z&j|}
    static constexpr cd ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    return ipow[(popcount(p.x & p.z) + 2 * popcount(p.z & j)) & 3];
}

// sort by support mask then by word, the fixed order used inside a Trotter step
template <class Scalar>
void canonical_order(std::vector<PauliTerm<Scalar>>& terms);

}  // namespace nhsim
