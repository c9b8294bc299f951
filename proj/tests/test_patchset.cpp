#include <doctest.h>

#include "nodulekit/patch.hpp"
#include "nodulekit/rng.hpp"

using namespace nodulekit;

namespace {

CTVolume gradient_volume(int nx, int ny, int nz) {
    CTVolume vol;
    vol.dims = {nx, ny, nz};
    vol.spacing = {1.0, 1.0, 1.0};
    vol.patient_id = "T";
    vol.voxels.resize(vol.dims.count());
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                vol.voxels[vol.dims.index(x, y, z)] =
                    static_cast<std::int16_t>(x + 10 * y + 100 * z - 800);
    return vol;
}

PatchSet random_patch_set(Rng& rng, std::size_t n_items, PatchShape shape) {
    PatchSet set;
    set.design = "s1_vs_s45";
    set.normalization = NormMode::scan_minmax;
    for (std::size_t i = 0; i < n_items; ++i) {
        Patch p;
        p.shape = shape;
        p.item_id = "item" + std::to_string(i);
        p.label = static_cast<int>(rng.uniform_int(2));
        p.scan_min_hu = -1024.0 + rng.uniform(0.0, 10.0);
        p.scan_max_hu = 2000.0 + rng.uniform(0.0, 500.0);
        p.values.resize(shape.count());
        for (auto& v : p.values) v = static_cast<float>(rng.uniform());
        set.patches.push_back(std::move(p));
    }
    return set;
}

}  // namespace

TEST_SUITE("patchset") {

TEST_CASE("interior extraction reproduces the volume values") {
    const CTVolume vol = gradient_volume(32, 32, 16);
    const RawPatch p = extract_patch(vol, {15.0, 15.0, 7.0}, {5, 5, 3});
    // centre of the patch equals the centre voxel
    const std::size_t centre = 1 * 25 + 2 * 5 + 2;
    CHECK(p.hu[centre] == static_cast<double>(vol.at(15, 15, 7)));
    // corner check: offset (-2,-2,-1) from the centre
    CHECK(p.hu[0] == static_cast<double>(vol.at(13, 13, 6)));
}

TEST_CASE("centre is rounded half away from zero per axis") {
    const CTVolume vol = gradient_volume(32, 32, 16);
    const RawPatch a = extract_patch(vol, {15.5, 14.4, 7.0}, {3, 3, 1});
    const RawPatch b = extract_patch(vol, {16.0, 14.0, 7.0}, {3, 3, 1});
    CHECK(a.hu == b.hu);
}

TEST_CASE("out-of-volume voxels are filled with air") {
    const CTVolume vol = gradient_volume(32, 32, 16);
    // centre 2 voxels from the x=0 face with W=21: columns -8..-1 are padded
    const RawPatch p = extract_patch(vol, {2.0, 15.0, 7.0}, {21, 21, 1});
    int padded_per_row = 0;
    for (int x = 0; x < 21; ++x)
        if (p.hu[static_cast<std::size_t>(10) * 21 + x] == -1000.0) ++padded_per_row;
    CHECK(padded_per_row == 8);
}

TEST_CASE("requested shape is honoured") {
    const CTVolume vol = gradient_volume(64, 64, 16);
    const RawPatch p = extract_patch(vol, {32.0, 32.0, 8.0}, {21, 21, 5});
    CHECK(p.shape.w == 21);
    CHECK(p.shape.h == 21);
    CHECK(p.shape.d == 5);
    CHECK(p.hu.size() == 21u * 21u * 5u);
}

TEST_CASE("centre outside the volume is rejected") {
    const CTVolume vol = gradient_volume(8, 8, 4);
    CHECK_THROWS_AS(extract_patch(vol, {9.0, 3.0, 1.0}, {3, 3, 1}), CenterOutOfBounds);
    CHECK_THROWS_AS(extract_patch(vol, {3.0, 3.0, -1.0}, {3, 3, 1}), CenterOutOfBounds);
}

TEST_CASE("even patch dimensions are rejected") {
    const CTVolume vol = gradient_volume(8, 8, 4);
    CHECK_THROWS_AS(extract_patch(vol, {4.0, 4.0, 2.0}, {4, 3, 1}), ShapeMismatch);
}

TEST_CASE("translation consistency in the interior") {
    const CTVolume vol = gradient_volume(48, 48, 16);
    CTVolume shifted = vol;
    // shift content by (3, 2, 1): shifted(x,y,z) = vol(x-3, y-2, z-1)
    for (int z = 0; z < 16; ++z)
        for (int y = 0; y < 48; ++y)
            for (int x = 0; x < 48; ++x)
                shifted.voxels[vol.dims.index(x, y, z)] =
                    vol.at_clamped(x - 3, y - 2, z - 1);
    const RawPatch a = extract_patch(vol, {20.0, 20.0, 7.0}, {7, 7, 3});
    const RawPatch b = extract_patch(shifted, {23.0, 22.0, 8.0}, {7, 7, 3});
    CHECK(a.hu == b.hu);
}

TEST_CASE("hu_window endpoints, midpoint, and clamping") {
    RawPatch raw;
    raw.shape = {5, 1, 1};
    raw.hu = {-1000.0, 400.0, -300.0, 1000.0, -2000.0};
    const Patch p = normalize_patch(raw, NormMode::hu_window, 0, 0);
    CHECK(p.values[0] == 0.0f);
    CHECK(p.values[1] == 1.0f);
    CHECK(p.values[2] == doctest::Approx(0.5));  // (-300+1000)/1400
    CHECK(p.values[3] == 1.0f);
    CHECK(p.values[4] == 0.0f);
}

TEST_CASE("scan_minmax maps the scan range and rejects degenerate ranges") {
    RawPatch raw;
    raw.shape = {3, 1, 1};
    raw.hu = {-500.0, 0.0, 500.0};
    const Patch p = normalize_patch(raw, NormMode::scan_minmax, -500.0, 500.0);
    CHECK(p.values[0] == 0.0f);
    CHECK(p.values[1] == doctest::Approx(0.5));
    CHECK(p.values[2] == 1.0f);
    CHECK_THROWS_AS(normalize_patch(raw, NormMode::scan_minmax, 100.0, 100.0), DegenerateRange);
    CHECK_THROWS_AS(normalize_patch(raw, NormMode::scan_minmax, 100.0, 50.0), DegenerateRange);
}

TEST_CASE("normalization is monotone non-decreasing in HU") {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const double a = rng.uniform(-2000.0, 2000.0);
        const double b = rng.uniform(-2000.0, 2000.0);
        RawPatch raw;
        raw.shape = {1, 1, 1};
        raw.hu = {std::min(a, b)};
        const float lo_w = normalize_patch(raw, NormMode::hu_window, 0, 0).values[0];
        const float lo_m = normalize_patch(raw, NormMode::scan_minmax, -1200, 3000).values[0];
        raw.hu = {std::max(a, b)};
        CHECK(normalize_patch(raw, NormMode::hu_window, 0, 0).values[0] >= lo_w);
        CHECK(normalize_patch(raw, NormMode::scan_minmax, -1200, 3000).values[0] >= lo_m);
    }
}

TEST_CASE("NDX1 round-trip of a two-patch set") {
    Rng rng(21);
    const PatchSet set = random_patch_set(rng, 2, {5, 5, 3});
    const auto bytes = container_to_bytes(set);
    const PatchSet back = container_from_bytes(bytes);
    CHECK(back == set);
}

TEST_CASE("NDX1 bytes are deterministic") {
    Rng rng(22);
    const PatchSet set = random_patch_set(rng, 3, {3, 3, 1});
    CHECK(container_to_bytes(set) == container_to_bytes(set));
}

TEST_CASE("NDX1 bad magic, truncation, version") {
    Rng rng(23);
    auto bytes = container_to_bytes(random_patch_set(rng, 1, {3, 3, 1}));
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(container_from_bytes(bad), BadMagic);

    auto trunc = bytes;
    trunc.pop_back();
    CHECK_THROWS_AS(container_from_bytes(trunc), TruncatedPayload);

    auto newer = bytes;
    newer[4] = 9;
    CHECK_THROWS_AS(container_from_bytes(newer), VersionUnsupported);
}

TEST_CASE("empty set round-trips with a zero-item header") {
    PatchSet empty;
    const auto bytes = container_to_bytes(empty);
    const PatchSet back = container_from_bytes(bytes);
    CHECK(back.patches.empty());
    CHECK(back.design == "none");
}

TEST_CASE("random NDX1 round-trips are bit-exact") {
    Rng rng(24);
    for (int trial = 0; trial < 30; ++trial) {
        const auto n = rng.uniform_int(5);
        const PatchSet set = random_patch_set(rng, n, {3, 5, 1});
        const auto bytes = container_to_bytes(set);
        const PatchSet back = container_from_bytes(bytes);
        CHECK(back == set);
        CHECK(container_to_bytes(back) == bytes);
    }
}

}  // TEST_SUITE
