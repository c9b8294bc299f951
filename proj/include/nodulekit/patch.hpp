#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nodulekit/volume.hpp"

namespace nodulekit {

struct PatchShape {
    int w = 0, h = 0, d = 0;  // d = slice/channel count
    std::size_t count() const {
        return static_cast<std::size_t>(w) * h * d;
    }
    bool operator==(const PatchShape&) const = default;
};

// Raw HU block around a centre point, before normalization.
struct RawPatch {
    PatchShape shape;
    std::vector<double> hu;  // x-fastest, then y, then slice
};

enum class NormMode { hu_window, scan_minmax };
const char* norm_mode_name(NormMode m);
NormMode norm_mode_from_name(const std::string& name);

// Normalized patch as stored in an NDX1 container. Values are float so the
// on-disk representation is exactly the in-memory one.
struct Patch {
    PatchShape shape;
    std::vector<float> values;  // all in [0, 1]
    std::string item_id;
    int label = 0;
    double scan_min_hu = 0.0;
    double scan_max_hu = 0.0;

    bool operator==(const Patch&) const = default;
};

struct PatchSet {
    std::vector<Patch> patches;
    std::string design = "none";
    NormMode normalization = NormMode::hu_window;

    bool operator==(const PatchSet&) const = default;
};

// Voxel block centred at round(center), half away from zero per axis;
// voxels outside the volume are filled with -1000 HU. W, H, D must be odd.
RawPatch extract_patch(const CTVolume& volume, const Vec3& center, const PatchShape& shape);

// hu_window maps [-1000, 400] HU to [0, 1] with clamping; scan_minmax maps
// [scan_min, scan_max] likewise.
Patch normalize_patch(const RawPatch& raw, NormMode mode, double scan_min, double scan_max);

// NDX1 container: magic "NDX1", u32-LE version=1, u32-LE header length, JSON
// header {n_items, shape, normalization, design, ids, labels, scan_min,
// scan_max}, then n_items*W*H*D little-endian f32, item-major.
std::vector<std::uint8_t> container_to_bytes(const PatchSet& set);
PatchSet container_from_bytes(const std::vector<std::uint8_t>& bytes);

std::size_t write_container(const PatchSet& set, const std::filesystem::path& path);
PatchSet read_container(const std::filesystem::path& path);

}  // namespace nodulekit
