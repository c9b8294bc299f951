#include <doctest.h>

#include <cmath>
#include <vector>

#include "nodulekit/kernels.hpp"
#include "nodulekit/rng.hpp"

using namespace nodulekit;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

// Sizes chosen to hit the unrolled bodies and every remainder path.
const std::size_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 125, 288, 1000};

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar dot matches a hand sum") {
    const double x[] = {1.0, 2.0, 3.0};
    const double y[] = {4.0, 5.0, 6.0};
    CHECK(kernels::scalar_ops.dot(x, y, 3) == doctest::Approx(32.0));
}

TEST_CASE("active ISA is usable") {
    const auto& ops = kernels::ops();
    const double x[] = {2.0, -3.0};
    CHECK(ops.sum(x, 2) == doctest::Approx(-1.0));
}

#if defined(__x86_64__) || defined(_M_X64)
TEST_CASE("avx2 variants agree with scalar references") {
    if (!kernels::avx2_available()) return;  // nothing to compare on this CPU
    const auto& scalar = kernels::scalar_ops;
    const auto& simd = kernels::avx2_ops;
    Rng rng(1234);

    for (const std::size_t n : kSizes) {
        auto x = random_vec(rng, n);
        auto y = random_vec(rng, n);

        // dot and sum reorder the accumulation; agreement is to rounding
        const double tol = 1e-13 * (static_cast<double>(n) + 1.0);
        CHECK(std::abs(simd.dot(x.data(), y.data(), n) -
                       scalar.dot(x.data(), y.data(), n)) <= tol);
        CHECK(std::abs(simd.sum(x.data(), n) - scalar.sum(x.data(), n)) <= tol);

        // element-wise kernels must agree exactly bit for bit
        auto y1 = y, y2 = y;
        scalar.axpy(0.37, x.data(), y1.data(), n);
        simd.axpy(0.37, x.data(), y2.data(), n);
        CHECK(y1 == y2);

        auto s1 = x, s2 = x;
        scalar.scale(s1.data(), -1.618, n);
        simd.scale(s2.data(), -1.618, n);
        CHECK(s1 == s2);

        std::vector<double> r1(n), r2(n);
        scalar.relu(x.data(), r1.data(), n);
        simd.relu(x.data(), r2.data(), n);
        CHECK(r1 == r2);

        auto g1 = y, g2 = y;
        scalar.relu_mask(x.data(), g1.data(), n);
        simd.relu_mask(x.data(), g2.data(), n);
        CHECK(g1 == g2);
    }
}

TEST_CASE("force_isa round-trips") {
    const auto original = kernels::active_isa();
    kernels::force_isa(kernels::Isa::scalar);
    CHECK(kernels::active_isa() == kernels::Isa::scalar);
    kernels::force_isa(original);
    CHECK(kernels::active_isa() == original);
}
#endif

TEST_CASE("a dense-kernel consumer agrees across ISAs") {
    // dot products drive the dense layers; the same matvec evaluated under
    // each ISA must agree to rounding
    Rng rng(77);
    std::vector<double> w(64 * 17), x(17), out_a(64), out_b(64);
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);

    const auto original = kernels::active_isa();
    kernels::force_isa(kernels::Isa::scalar);
    for (int j = 0; j < 64; ++j)
        out_a[static_cast<std::size_t>(j)] =
            kernels::ops().dot(x.data(), w.data() + static_cast<std::size_t>(j) * 17, 17);
    kernels::force_isa(original);
    for (int j = 0; j < 64; ++j)
        out_b[static_cast<std::size_t>(j)] =
            kernels::ops().dot(x.data(), w.data() + static_cast<std::size_t>(j) * 17, 17);
    for (int j = 0; j < 64; ++j)
        CHECK(std::abs(out_a[static_cast<std::size_t>(j)] - out_b[static_cast<std::size_t>(j)]) <=
              1e-13);
}

TEST_CASE("relu_mask zeroes gradients at non-positive inputs") {
    const auto& ops = kernels::ops();
    const double x[] = {-1.0, 0.0, 2.0, -0.5, 3.0};
    double g[] = {10.0, 10.0, 10.0, 10.0, 10.0};
    ops.relu_mask(x, g, 5);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 10.0);
    CHECK(g[3] == 0.0);
    CHECK(g[4] == 10.0);
}

}  // TEST_SUITE
