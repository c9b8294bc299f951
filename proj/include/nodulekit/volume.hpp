#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nodulekit/errors.hpp"
#include "nodulekit/geometry.hpp"

namespace nodulekit {

// 3-D signed-intensity grid in Hounsfield units. Immutable after parsing;
// voxels are stored x-fastest.
struct CTVolume {
    Dims dims;
    Spacing spacing;
    std::vector<std::int16_t> voxels;
    std::string patient_id;

    std::int16_t at(int x, int y, int z) const { return voxels[dims.index(x, y, z)]; }

    // Reads with clamp-to-edge, used by gradient estimation near borders.
    std::int16_t at_clamped(int x, int y, int z) const {
        x = x < 0 ? 0 : (x >= dims.nx ? dims.nx - 1 : x);
        y = y < 0 ? 0 : (y >= dims.ny ? dims.ny - 1 : y);
        z = z < 0 ? 0 : (z >= dims.nz ? dims.nz - 1 : z);
        return voxels[dims.index(x, y, z)];
    }
};

// In-plane pixel mask for one slice.
class Mask2D {
public:
    Mask2D() = default;
    Mask2D(int nx, int ny) : nx_(nx), ny_(ny), bits_(static_cast<std::size_t>(nx) * ny, 0) {}

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    bool test(int x, int y) const { return bits_[idx(x, y)] != 0; }
    void set(int x, int y) {
        auto& b = bits_[idx(x, y)];
        if (!b) { b = 1; ++count_; }
    }
    void clear(int x, int y) {
        auto& b = bits_[idx(x, y)];
        if (b) { b = 0; --count_; }
    }
    std::size_t count() const { return count_; }

private:
    std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * nx_ + x; }
    int nx_ = 0, ny_ = 0;
    std::vector<std::uint8_t> bits_;
    std::size_t count_ = 0;
};

// Voxel bitset over a full volume grid.
class Mask3D {
public:
    Mask3D() = default;
    explicit Mask3D(Dims dims)
        : dims_(dims), words_((dims.count() + 63) / 64, 0) {}

    const Dims& dims() const { return dims_; }
    std::size_t voxel_count() const { return count_; }
    bool empty() const { return count_ == 0; }

    bool test(int x, int y, int z) const {
        const std::size_t i = dims_.index(x, y, z);
        return (words_[i >> 6] >> (i & 63)) & 1u;
    }
    void set(int x, int y, int z) {
        const std::size_t i = dims_.index(x, y, z);
        std::uint64_t& w = words_[i >> 6];
        const std::uint64_t bit = 1ULL << (i & 63);
        if (!(w & bit)) { w |= bit; ++count_; }
    }
    void clear(int x, int y, int z) {
        const std::size_t i = dims_.index(x, y, z);
        std::uint64_t& w = words_[i >> 6];
        const std::uint64_t bit = 1ULL << (i & 63);
        if (w & bit) { w &= ~bit; --count_; }
    }

    bool intersects(const Mask3D& other) const {
        const std::size_t n = std::min(words_.size(), other.words_.size());
        for (std::size_t i = 0; i < n; ++i)
            if (words_[i] & other.words_[i]) return true;
        return false;
    }

    std::size_t intersection_count(const Mask3D& other) const {
        std::size_t total = 0;
        const std::size_t n = std::min(words_.size(), other.words_.size());
        for (std::size_t i = 0; i < n; ++i)
            total += static_cast<std::size_t>(__builtin_popcountll(words_[i] & other.words_[i]));
        return total;
    }

    // Visits set voxels in x-fastest order.
    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (int z = 0; z < dims_.nz; ++z)
            for (int y = 0; y < dims_.ny; ++y)
                for (int x = 0; x < dims_.nx; ++x)
                    if (test(x, y, z)) fn(x, y, z);
    }

    Vec3 center_of_mass() const {
        if (count_ == 0) throw EmptyMask("center_of_mass: empty mask");
        double sx = 0, sy = 0, sz = 0;
        for_each([&](int x, int y, int z) { sx += x; sy += y; sz += z; });
        const double n = static_cast<double>(count_);
        return {sx / n, sy / n, sz / n};
    }

private:
    Dims dims_;
    std::vector<std::uint64_t> words_;
    std::size_t count_ = 0;
};

inline double dice(const Mask3D& a, const Mask3D& b) {
    const std::size_t inter = a.intersection_count(b);
    const std::size_t total = a.voxel_count() + b.voxel_count();
    return total == 0 ? 0.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

}  // namespace nodulekit
