#include <doctest.h>

#include <set>
#include <vector>

#include "nodulekit/rng.hpp"

using namespace nodulekit;

TEST_SUITE("rng") {

TEST_CASE("same seed produces identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform stays in [0,1) and covers the range") {
    Rng rng(7);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("uniform_int is in range and hits every value") {
    Rng rng(3);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const auto v = rng.uniform_int(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("normal has roughly the requested moments") {
    Rng rng(11);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal(5.0, 2.0);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(mean == doctest::Approx(5.0).epsilon(0.01));
    CHECK(var == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("shuffle is a permutation and deterministic") {
    std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8}, v2 = v1;
    Rng a(9), b(9);
    a.shuffle(v1);
    b.shuffle(v2);
    CHECK(v1 == v2);
    std::sort(v1.begin(), v1.end());
    CHECK(v1 == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8});
}

TEST_CASE("derive_seed separates tags and indices") {
    CHECK(derive_seed(1, "phantom") != derive_seed(1, "split"));
    CHECK(derive_seed(1, "phantom") != derive_seed(2, "phantom"));
    CHECK(derive_seed(1, "tree", 0) != derive_seed(1, "tree", 1));
    CHECK(derive_seed(1, "tree", 3) == derive_seed(1, "tree", 3));
}

}  // TEST_SUITE
