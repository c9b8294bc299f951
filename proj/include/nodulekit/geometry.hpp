#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstddef>

namespace nodulekit {

// Grid dimensions, x-fastest voxel ordering throughout.
struct Dims {
    int nx = 0, ny = 0, nz = 0;

    std::size_t count() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
               static_cast<std::size_t>(nz);
    }
    bool contains(int x, int y, int z) const {
        return x >= 0 && x < nx && y >= 0 && y < ny && z >= 0 && z < nz;
    }
    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(z) * ny * nx +
               static_cast<std::size_t>(y) * nx + static_cast<std::size_t>(x);
    }
    bool operator==(const Dims&) const = default;
};

// Voxel spacing in millimetres.
struct Spacing {
    double sx = 1.0, sy = 1.0, sz = 1.0;
    bool operator==(const Spacing&) const = default;
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
    bool operator==(const Vec3&) const = default;
};

struct IVec3 {
    int x = 0, y = 0, z = 0;
    bool operator==(const IVec3&) const = default;
};

// Round half away from zero, the tie rule used for centers and ratings.
inline int round_half_away(double v) {
    return static_cast<int>(std::llround(v));
}

}  // namespace nodulekit
