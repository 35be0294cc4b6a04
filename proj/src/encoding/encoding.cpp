#include "nhsim/encoding.hpp"

#include <limits>

#include "nhsim/pauli.hpp"

namespace nhsim {

int encode_site(int cell, Sublattice s, int cells) {
    if (cell < 1 || cell > cells) throw std::out_of_range("encode_site: cell " + std::to_string(cell) + " out of range");
    return 2 * cell - (s == Sublattice::a ? 1 : 0) - 1;
}

SectorEncoding::SectorEncoding(int cells, int particles) : cells_(cells), particles_(particles) {
    if (cells < 1) throw std::invalid_argument("encoding: need at least one cell");
    const int n = 2 * cells;
    if (particles < 1 || particles > n)
        throw std::invalid_argument("encoding: particle count " + std::to_string(particles) + " outside [1, 2N]");
    constexpr std::uint64_t sat = std::numeric_limits<std::uint64_t>::max() / 4;
    table_.assign(n + 1, std::vector<std::uint64_t>(particles + 1, 0));
    for (int i = 0; i <= n; ++i) {
        table_[i][0] = 1;
        for (int k = 1; k <= std::min(i, particles); ++k)
            table_[i][k] = std::min(sat, table_[i - 1][k - 1] + (k <= i - 1 ? table_[i - 1][k] : 0));
    }
    if (table_[n][particles] > (std::uint64_t{1} << 30)) throw std::invalid_argument("encoding: sector too large");
    dim_ = table_[n][particles];
    n_qubits_ = qubits_for(dim_);
}

std::uint64_t SectorEncoding::binom(int n, int k) const {
    if (k < 0 || n < 0 || k > n) return 0;
    return table_[n][k];
}

std::size_t SectorEncoding::rank(std::span<const int> s) const {
    const int n = sites();
    if (static_cast<int>(s.size()) != particles_) throw std::invalid_argument("rank: wrong number of sites");
    std::size_t r = 0;
    int prev = -1;
    for (int i = 0; i < particles_; ++i) {
        if (s[i] <= prev || s[i] >= n) throw std::invalid_argument("rank: sites must be sorted, distinct, in range");
        for (int v = prev + 1; v < s[i]; ++v) r += binom(n - 1 - v, particles_ - 1 - i);
        prev = s[i];
    }
    return r;
}

std::vector<int> SectorEncoding::unrank(std::size_t index) const {
    if (index >= dim_) throw std::out_of_range("unrank: index " + std::to_string(index) + " is unphysical");
    const int n = sites();
    std::vector<int> out(particles_);
    int v = 0;
    for (int i = 0; i < particles_; ++i) {
        for (;; ++v) {
            const std::uint64_t c = binom(n - 1 - v, particles_ - 1 - i);
            if (index < c) break;
            index -= c;
        }
        out[i] = v++;
    }
    return out;
}

std::vector<int> SectorEncoding::occupancy(std::size_t index) const {
    std::vector<int> occ(sites(), 0);
    for (int s : unrank(index)) occ[s] = 1;
    return occ;
}

}  // namespace nhsim
