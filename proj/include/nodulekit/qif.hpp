#pragma once

#include <array>
#include <string>
#include <vector>

#include "nodulekit/volume.hpp"

namespace nodulekit::qif {

inline constexpr int kFeatureCount = 50;
inline constexpr int kSizeFeatureCount = 12;
inline constexpr int kReducedFeatureCount = kFeatureCount - kSizeFeatureCount;

struct FeatureInfo {
    const char* name;
    const char* unit;  // "" for dimensionless
    bool is_size_measure;
};

// Fixed registry; index i holds feature f(i+1). Order never changes across
// the artifact (CSV columns, model inputs, and the reduced set all key off
// this).
const std::array<FeatureInfo, kFeatureCount>& feature_registry();

struct FeatureVector {
    std::array<double, kFeatureCount> values{};

    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
};

// 26-connected region growth from `seed` over voxels >= -450 HU, clipped to a
// 15 mm radius ball around the seed. A seed below the threshold yields the
// single-voxel mask at the seed.
Mask3D auto_segment(const CTVolume& volume, const IVec3& seed);

// The 50 registry features for volume+mask. 2-D features use the mask's
// largest-area slice; dimensional features are in mm via the volume spacing.
FeatureVector compute_features(const CTVolume& volume, const Mask3D& mask);

// Removes the 12 size-measure entries, preserving the order of the rest.
std::vector<double> strip_size_features(const std::vector<double>& features);

// Index list (0-based) of non-size registry entries, in registry order.
std::vector<int> non_size_feature_indices();

// Registry index (0-based) of the LM baseline input, sqrt of the largest
// cross-sectional area.
int sqrt_area_feature_index();

}  // namespace nodulekit::qif
