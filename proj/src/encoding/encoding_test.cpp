#include <doctest.h>

#include <algorithm>
#include <random>

#include "nhsim/encoding.hpp"

using namespace nhsim;

TEST_CASE("site flattening") {
    CHECK(encode_site(1, Sublattice::a, 8) == 0);
    CHECK(encode_site(1, Sublattice::b, 8) == 1);
    CHECK(encode_site(6, Sublattice::a, 8) == 10);
    CHECK(encode_site(8, Sublattice::b, 8) == 15);
    CHECK_THROWS_AS(encode_site(9, Sublattice::a, 8), std::out_of_range);
    CHECK_THROWS_AS(encode_site(0, Sublattice::a, 8), std::out_of_range);
}

TEST_CASE("sector sizes") {
    const SectorEncoding e1(8, 1);
    CHECK(e1.dim() == 16);
    CHECK(e1.n_qubits() == 4);
    const SectorEncoding e2(2, 2);
    CHECK(e2.dim() == 6);
    const int first[] = {0, 1}, last[] = {2, 3};
    CHECK(e2.rank(first) == 0);
    CHECK(e2.rank(last) == 5);
    const SectorEncoding e3(12, 2);
    CHECK(e3.dim() == 276);
    CHECK(e3.n_qubits() == 9);
    CHECK(SectorEncoding(14, 2).n_qubits() == 9);
    CHECK(SectorEncoding(64, 1).n_qubits() == 7);
    CHECK_THROWS_AS(SectorEncoding(2, 0), std::invalid_argument);
    CHECK_THROWS_AS(SectorEncoding(2, 5), std::invalid_argument);
}

TEST_CASE("exhaustive lexicographic enumeration matches rank") {
    const int n = 24;
    const SectorEncoding e(12, 2);
    std::size_t idx = 0;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            const int s[] = {a, b};
            CHECK(e.rank(s) == idx);
            ++idx;
        }
    CHECK(idx == e.dim());
}

TEST_CASE("round trip for all small sectors") {
    for (int n = 1; n <= 16; ++n)
        for (int p = 1; p <= std::min(3, 2 * n); ++p) {
            const SectorEncoding e(n, p);
            bool ok = true;
            for (std::size_t i = 0; i < e.dim(); ++i) {
                const auto s = e.unrank(i);
                ok &= std::is_sorted(s.begin(), s.end()) && e.rank(s) == i;
            }
            CHECK(ok);
        }
}

TEST_CASE("rank is monotone in lexicographic order") {
    const SectorEncoding e(10, 3);
    std::mt19937_64 rng(5);
    std::vector<int> all(20);
    std::iota(all.begin(), all.end(), 0);
    for (int t = 0; t < 500; ++t) {
        std::vector<int> a, b;
        std::sample(all.begin(), all.end(), std::back_inserter(a), 3, rng);
        std::sample(all.begin(), all.end(), std::back_inserter(b), 3, rng);
        if (a == b) continue;
        CHECK((a < b) == (e.rank(a) < e.rank(b)));
    }
}

TEST_CASE("single particle is the identity on site indices") {
    const SectorEncoding e(7, 1);
    for (int z = 0; z < 14; ++z) {
        const int s[] = {z};
        CHECK(e.rank(s) == static_cast<std::size_t>(z));
    }
}

TEST_CASE("physicality and occupancy") {
    CHECK(SectorEncoding(8, 1).is_physical(15));
    CHECK(!SectorEncoding(12, 2).is_physical(300));
    CHECK(SectorEncoding(12, 2).is_physical(0));
    const auto occ = SectorEncoding(8, 1).occupancy(10);
    CHECK(std::count(occ.begin(), occ.end(), 1) == 1);
    CHECK(occ[10] == 1);
    const auto o2 = SectorEncoding(2, 2).occupancy(0);
    CHECK(o2 == std::vector<int>{1, 1, 0, 0});
    CHECK_THROWS_AS(SectorEncoding(12, 2).occupancy(300), std::out_of_range);
}

TEST_CASE("rank rejects malformed sets") {
    const SectorEncoding e(3, 2);
    const int unsorted[] = {3, 1}, dup[] = {2, 2}, out[] = {0, 6};
    CHECK_THROWS(e.rank(unsorted));
    CHECK_THROWS(e.rank(dup));
    CHECK_THROWS(e.rank(out));
}
