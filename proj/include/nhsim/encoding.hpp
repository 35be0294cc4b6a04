#pragma once

#include <span>
#include <vector>

#include "nhsim/core.hpp"

namespace nhsim {

enum class Sublattice { a, b };

// zero-based flattened site of (cell x in [1, N], sublattice)
int encode_site(int cell, Sublattice s, int cells);
inline bool is_b_site(int site) { return site % 2 == 1; }
inline int cell_of(int site) { return site / 2 + 1; }

// p hardcore bosons on 2N sites <-> [0, D), lexicographic order of sorted site sets
class SectorEncoding {
public:
    SectorEncoding(int cells, int particles);

    int cells() const { return cells_; }
    int sites() const { return 2 * cells_; }
    int particles() const { return particles_; }
    int n_qubits() const { return n_qubits_; }
    std::size_t dim() const { return dim_; }

    std::size_t rank(std::span<const int> sorted_sites) const;
    std::vector<int> unrank(std::size_t index) const;

    bool is_physical(std::uint64_t value) const { return value < dim_; }
    std::vector<int> occupancy(std::size_t index) const;  // 0/1 per site

private:
    std::uint64_t binom(int n, int k) const;

    int cells_, particles_, n_qubits_;
    std::size_t dim_;
    std::vector<std::vector<std::uint64_t>> table_;
};

inline SectorEncoding build_encoding(int cells, int particles) { return {cells, particles}; }

}  // namespace nhsim
