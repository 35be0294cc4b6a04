#pragma once

// statevector kernels; qubit 0 is the most significant bit of the index.
// w > 1 treats a as a row-major matrix and acts on every column at once

#include <algorithm>

#include "nhsim/core.hpp"

namespace nhsim::kernel {

inline std::uint64_t qbit(int n, int q) { return std::uint64_t{1} << (n - 1 - q); }

inline void apply_1q(cd* a, int n, int q, const Eigen::Matrix2cd& m, std::size_t w = 1) {
    const std::uint64_t bit = qbit(n, q), dim = std::uint64_t{1} << n;
    const cd m00 = m(0, 0), m01 = m(0, 1), m10 = m(1, 0), m11 = m(1, 1);
    for (std::uint64_t base = 0; base < dim; base += 2 * bit)
        for (std::uint64_t i = base; i < base + bit; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                cd& u = a[i * w + j];
                cd& v = a[(i | bit) * w + j];
                const cd x = u, y = v;
                u = m00 * x + m01 * y;
                v = m10 * x + m11 * y;
            }
}

inline void apply_diag_1q(cd* a, int n, int q, cd d0, cd d1, std::size_t w = 1) {
    const std::uint64_t bit = qbit(n, q), dim = std::uint64_t{1} << n;
    for (std::uint64_t i = 0; i < dim; ++i) {
        const cd d = (i & bit) ? d1 : d0;
        for (std::size_t j = 0; j < w; ++j) a[i * w + j] *= d;
    }
}

inline void apply_cx(cd* a, int n, int c, int t, std::size_t w = 1) {
    const std::uint64_t cb = qbit(n, c), tb = qbit(n, t), dim = std::uint64_t{1} << n;
    for (std::uint64_t i = 0; i < dim; ++i)
        if ((i & cb) && !(i & tb)) std::swap_ranges(a + i * w, a + (i + 1) * w, a + (i | tb) * w);
}

// exp(-i theta/2 P) with P = i^{|x&z|} X^x Z^z on the full register; ctrl is a bit mask (0: none)
inline void apply_rotation(cd* a, int n, std::uint64_t x, std::uint64_t z, double theta, std::uint64_t ctrl,
                           std::size_t w = 1) {
    const std::uint64_t dim = std::uint64_t{1} << n;
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    static constexpr cd ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    const cd base = ipow[popcount(x & z) & 3];
    if (x == 0) {
        const cd plus = cd(c, -s), minus = cd(c, s);  // c - i s (+1), c - i s (-1)
        for (std::uint64_t r = 0; r < dim; ++r) {
            if (ctrl && !(r & ctrl)) continue;
            const cd f = (popcount(z & r) & 1) ? minus : plus;
            for (std::size_t j = 0; j < w; ++j) a[r * w + j] *= f;
        }
        return;
    }
    const std::uint64_t pivot = std::uint64_t{1} << (63 - __builtin_clzll(x));
    const cd mis = cd(0, -s) * base;  // -i s i^{|x&z|}
    for (std::uint64_t r = 0; r < dim; ++r) {
        if ((r & pivot) || (ctrl && !(r & ctrl))) continue;
        const std::uint64_t r2 = r ^ x;
        // (P a)[r] = phase(r2) a[r2],  phase(j) = base (-1)^{|z&j|}
        const cd f2 = mis * ((popcount(z & r2) & 1) ? -1.0 : 1.0);
        const cd f1 = mis * ((popcount(z & r) & 1) ? -1.0 : 1.0);
        cd* u = a + r * w;
        cd* v = a + r2 * w;
        for (std::size_t j = 0; j < w; ++j) {
            const cd ar = u[j], ar2 = v[j];
            u[j] = c * ar + f2 * ar2;
            v[j] = c * ar2 + f1 * ar;
        }
    }
}

}  // namespace nhsim::kernel
