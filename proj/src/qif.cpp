#include "nodulekit/qif.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace nodulekit::qif {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kGrowThresholdHu = -450.0;
constexpr double kGrowRadiusMm = 15.0;
constexpr double kWindowLoHu = -1000.0;
constexpr double kWindowHiHu = 400.0;

// ---------------------------------------------------------------------------
// registry

const std::array<FeatureInfo, kFeatureCount> kRegistry = {{
    {"area_2d", "mm^2", true},                 // f01
    {"perimeter_2d", "mm", true},              // f02
    {"equiv_circular_diameter", "mm", true},   // f03
    {"sqrt_area", "mm", true},                 // f04
    {"circularity", "", false},                // f05
    {"eccentricity_2d", "", false},            // f06
    {"solidity_2d", "", false},                // f07
    {"extent_2d", "", false},                  // f08
    {"major_axis_2d", "mm", true},             // f09
    {"minor_axis_2d", "mm", true},             // f10
    {"aspect_ratio_2d", "", false},            // f11
    {"volume", "mm^3", true},                  // f12
    {"surface_area", "mm^2", true},            // f13
    {"equiv_spherical_diameter", "mm", true},  // f14
    {"sphericity", "", false},                 // f15
    {"bbox_compactness", "", false},           // f16
    {"elongation", "", false},                 // f17
    {"flatness", "", false},                   // f18
    {"bbox_max_dimension", "mm", true},        // f19
    {"surface_to_volume", "1/mm", true},       // f20
    {"slice_span", "slices", true},            // f21
    {"hu_mean", "HU", false},                  // f22
    {"hu_median", "HU", false},                // f23
    {"hu_std", "HU", false},                   // f24
    {"hu_min", "HU", false},                   // f25
    {"hu_max", "HU", false},                   // f26
    {"hu_range", "HU", false},                 // f27
    {"hu_skewness", "", false},                // f28
    {"hu_kurtosis_excess", "", false},         // f29
    {"windowed_mean_square", "", false},       // f30
    {"hu_entropy", "nats", false},             // f31
    {"hu_p10", "HU", false},                   // f32
    {"hu_p25", "HU", false},                   // f33
    {"hu_p75", "HU", false},                   // f34
    {"hu_p90", "HU", false},                   // f35
    {"hu_iqr", "HU", false},                   // f36
    {"fraction_above_-50hu", "", false},       // f37
    {"fraction_below_-600hu", "", false},      // f38
    {"boundary_gradient_mean", "HU/mm", false},  // f39
    {"boundary_gradient_std", "HU/mm", false},   // f40
    {"rim_mean_hu", "HU", false},              // f41
    {"inside_rim_contrast", "HU", false},      // f42
    {"glcm_contrast", "", false},              // f43
    {"glcm_correlation", "", false},           // f44
    {"glcm_energy", "", false},                // f45
    {"glcm_homogeneity", "", false},           // f46
    {"glcm_entropy", "", false},               // f47
    {"local_mad_3x3", "HU", false},            // f48
    {"slice_area_cov", "", false},             // f49
    {"radial_hu_slope", "HU", false},          // f50
}};

// ---------------------------------------------------------------------------
// small numeric helpers

double percentile(const std::vector<double>& sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = (static_cast<double>(n) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= n) return sorted[n - 1];
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

// Eigenvalues of a symmetric 2x2 [[a, b], [b, c]], descending.
std::pair<double, double> eig2(double a, double b, double c) {
    const double tr = a + c;
    const double det = a * c - b * b;
    double disc = tr * tr / 4.0 - det;
    if (disc < 0.0) disc = 0.0;
    const double s = std::sqrt(disc);
    return {tr / 2.0 + s, tr / 2.0 - s};
}

// Eigenvalues of a symmetric 3x3, descending (analytic, Smith's method).
std::array<double, 3> eig3(double a11, double a12, double a13, double a22, double a23,
                           double a33) {
    const double p1 = a12 * a12 + a13 * a13 + a23 * a23;
    std::array<double, 3> eig;
    if (p1 < 1e-30) {
        eig = {a11, a22, a33};
    } else {
        const double q = (a11 + a22 + a33) / 3.0;
        const double b11 = a11 - q, b22 = a22 - q, b33 = a33 - q;
        const double p2 = b11 * b11 + b22 * b22 + b33 * b33 + 2.0 * p1;
        const double p = std::sqrt(p2 / 6.0);
        // det(B)/2 with B = (A - qI)/p
        const double inv_p = 1.0 / p;
        const double c11 = b11 * inv_p, c22 = b22 * inv_p, c33 = b33 * inv_p;
        const double c12 = a12 * inv_p, c13 = a13 * inv_p, c23 = a23 * inv_p;
        const double detb = c11 * (c22 * c33 - c23 * c23) - c12 * (c12 * c33 - c23 * c13) +
                            c13 * (c12 * c23 - c22 * c13);
        double r = detb / 2.0;
        if (r < -1.0) r = -1.0;
        if (r > 1.0) r = 1.0;
        const double phi = std::acos(r) / 3.0;
        eig[0] = q + 2.0 * p * std::cos(phi);
        eig[2] = q + 2.0 * p * std::cos(phi + 2.0 * kPi / 3.0);
        eig[1] = 3.0 * q - eig[0] - eig[2];
    }
    std::sort(eig.begin(), eig.end(), std::greater<>());
    return eig;
}

double cross(const std::pair<double, double>& o, const std::pair<double, double>& a,
             const std::pair<double, double>& b) {
    return (a.first - o.first) * (b.second - o.second) -
           (a.second - o.second) * (b.first - o.first);
}

// Andrew's monotone chain; returns CCW hull including the first point once.
std::vector<std::pair<double, double>> convex_hull(std::vector<std::pair<double, double>> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const std::size_t n = pts.size();
    if (n < 3) return pts;
    std::vector<std::pair<double, double>> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    const std::size_t lower = k + 1;
    for (std::size_t i = n - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

double polygon_area(const std::vector<std::pair<double, double>>& poly) {
    double acc = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& [x1, y1] = poly[i];
        const auto& [x2, y2] = poly[(i + 1) % n];
        acc += x1 * y2 - x2 * y1;
    }
    return std::abs(acc) / 2.0;
}

int window_bin(double hu, int n_bins) {
    const double t = (hu - kWindowLoHu) / (kWindowHiHu - kWindowLoHu);
    int bin = static_cast<int>(std::floor(t * n_bins));
    if (bin < 0) bin = 0;
    if (bin >= n_bins) bin = n_bins - 1;
    return bin;
}

struct MaskVoxel {
    int x, y, z;
    double hu;
};

}  // namespace

const std::array<FeatureInfo, kFeatureCount>& feature_registry() { return kRegistry; }

std::vector<int> non_size_feature_indices() {
    std::vector<int> out;
    for (int i = 0; i < kFeatureCount; ++i)
        if (!kRegistry[i].is_size_measure) out.push_back(i);
    return out;
}

int sqrt_area_feature_index() { return 3; }  // f04

Mask3D auto_segment(const CTVolume& volume, const IVec3& seed) {
    if (!volume.dims.contains(seed.x, seed.y, seed.z))
        throw SeedOutOfBounds("auto_segment: seed outside volume");

    Mask3D mask(volume.dims);
    mask.set(seed.x, seed.y, seed.z);
    if (static_cast<double>(volume.at(seed.x, seed.y, seed.z)) < kGrowThresholdHu)
        return mask;  // nothing tissue-like at the seed

    const double r2 = kGrowRadiusMm * kGrowRadiusMm;
    const Spacing sp = volume.spacing;
    std::deque<IVec3> frontier{seed};
    while (!frontier.empty()) {
        const IVec3 v = frontier.front();
        frontier.pop_front();
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0 && dz == 0) continue;
                    const int x = v.x + dx, y = v.y + dy, z = v.z + dz;
                    if (!volume.dims.contains(x, y, z) || mask.test(x, y, z)) continue;
                    if (static_cast<double>(volume.at(x, y, z)) < kGrowThresholdHu) continue;
                    const double ddx = (x - seed.x) * sp.sx;
                    const double ddy = (y - seed.y) * sp.sy;
                    const double ddz = (z - seed.z) * sp.sz;
                    if (ddx * ddx + ddy * ddy + ddz * ddz > r2) continue;
                    mask.set(x, y, z);
                    frontier.push_back({x, y, z});
                }
    }
    return mask;
}

FeatureVector compute_features(const CTVolume& volume, const Mask3D& mask) {
    if (mask.empty()) throw EmptyMask("compute_features: empty mask");
    if (!(mask.dims() == volume.dims))
        throw ShapeMismatch("compute_features: mask dims differ from volume");

    const Dims dims = volume.dims;
    const Spacing sp = volume.spacing;
    FeatureVector f;

    std::vector<MaskVoxel> voxels;
    voxels.reserve(mask.voxel_count());
    int min_x = dims.nx, max_x = -1, min_y = dims.ny, max_y = -1, min_z = dims.nz, max_z = -1;
    std::vector<std::size_t> slice_counts(static_cast<std::size_t>(dims.nz), 0);
    mask.for_each([&](int x, int y, int z) {
        voxels.push_back({x, y, z, static_cast<double>(volume.at(x, y, z))});
        min_x = std::min(min_x, x); max_x = std::max(max_x, x);
        min_y = std::min(min_y, y); max_y = std::max(max_y, y);
        min_z = std::min(min_z, z); max_z = std::max(max_z, z);
        ++slice_counts[static_cast<std::size_t>(z)];
    });
    const double n = static_cast<double>(voxels.size());

    // ---- largest-area slice (ties -> lowest z) --------------------------
    int best_z = min_z;
    for (int z = min_z; z <= max_z; ++z)
        if (slice_counts[static_cast<std::size_t>(z)] >
            slice_counts[static_cast<std::size_t>(best_z)])
            best_z = z;
    std::vector<std::pair<int, int>> slice_pixels;
    for (const MaskVoxel& v : voxels)
        if (v.z == best_z) slice_pixels.emplace_back(v.x, v.y);
    const double slice_n = static_cast<double>(slice_pixels.size());

    const auto in_slice = [&](int x, int y) {
        return dims.contains(x, y, best_z) && mask.test(x, y, best_z);
    };

    // ---- 2-D size and shape --------------------------------------------
    const double pixel_area = sp.sx * sp.sy;
    const double area = slice_n * pixel_area;
    f[0] = area;  // f01

    double perimeter = 0.0;
    for (const auto& [x, y] : slice_pixels) {
        if (!in_slice(x - 1, y)) perimeter += sp.sy;
        if (!in_slice(x + 1, y)) perimeter += sp.sy;
        if (!in_slice(x, y - 1)) perimeter += sp.sx;
        if (!in_slice(x, y + 1)) perimeter += sp.sx;
    }
    f[1] = perimeter;                            // f02
    f[2] = 2.0 * std::sqrt(area / kPi);          // f03
    f[3] = std::sqrt(area);                      // f04
    f[4] = 4.0 * kPi * area / (perimeter * perimeter);  // f05

    // second central moments of pixel centres (mm) + pixel-extent correction
    {
        double mx = 0, my = 0;
        for (const auto& [x, y] : slice_pixels) { mx += x * sp.sx; my += y * sp.sy; }
        mx /= slice_n; my /= slice_n;
        double cxx = 0, cyy = 0, cxy = 0;
        for (const auto& [x, y] : slice_pixels) {
            const double dx = x * sp.sx - mx, dy = y * sp.sy - my;
            cxx += dx * dx; cyy += dy * dy; cxy += dx * dy;
        }
        cxx = cxx / slice_n + sp.sx * sp.sx / 12.0;
        cyy = cyy / slice_n + sp.sy * sp.sy / 12.0;
        cxy /= slice_n;
        const auto [l1, l2] = eig2(cxx, cxy, cyy);
        f[5] = std::sqrt(std::max(0.0, 1.0 - l2 / l1));  // f06
        f[8] = 4.0 * std::sqrt(l1);                      // f09
        f[9] = 4.0 * std::sqrt(std::max(0.0, l2));       // f10
        f[10] = f[8] / f[9];                             // f11
    }

    // solidity over the pixel-corner hull
    {
        std::vector<std::pair<double, double>> corners;
        corners.reserve(slice_pixels.size() * 4);
        for (const auto& [x, y] : slice_pixels) {
            corners.emplace_back((x - 0.5) * sp.sx, (y - 0.5) * sp.sy);
            corners.emplace_back((x + 0.5) * sp.sx, (y - 0.5) * sp.sy);
            corners.emplace_back((x - 0.5) * sp.sx, (y + 0.5) * sp.sy);
            corners.emplace_back((x + 0.5) * sp.sx, (y + 0.5) * sp.sy);
        }
        const double hull_area = polygon_area(convex_hull(std::move(corners)));
        f[6] = hull_area > 0.0 ? std::min(1.0, area / hull_area) : 1.0;  // f07
    }

    // extent over the in-plane bounding box of the slice
    {
        int sx0 = dims.nx, sx1 = -1, sy0 = dims.ny, sy1 = -1;
        for (const auto& [x, y] : slice_pixels) {
            sx0 = std::min(sx0, x); sx1 = std::max(sx1, x);
            sy0 = std::min(sy0, y); sy1 = std::max(sy1, y);
        }
        const double bbox = static_cast<double>(sx1 - sx0 + 1) * (sy1 - sy0 + 1) * pixel_area;
        f[7] = area / bbox;  // f08
    }

    // ---- 3-D size and shape --------------------------------------------
    const double voxel_volume = sp.sx * sp.sy * sp.sz;
    const double vol = n * voxel_volume;
    f[11] = vol;  // f12

    const auto in_mask = [&](int x, int y, int z) {
        return dims.contains(x, y, z) && mask.test(x, y, z);
    };
    double surface = 0.0;
    for (const MaskVoxel& v : voxels) {
        if (!in_mask(v.x - 1, v.y, v.z)) surface += sp.sy * sp.sz;
        if (!in_mask(v.x + 1, v.y, v.z)) surface += sp.sy * sp.sz;
        if (!in_mask(v.x, v.y - 1, v.z)) surface += sp.sx * sp.sz;
        if (!in_mask(v.x, v.y + 1, v.z)) surface += sp.sx * sp.sz;
        if (!in_mask(v.x, v.y, v.z - 1)) surface += sp.sx * sp.sy;
        if (!in_mask(v.x, v.y, v.z + 1)) surface += sp.sx * sp.sy;
    }
    f[12] = surface;                                                     // f13
    f[13] = std::cbrt(6.0 * vol / kPi);                                  // f14
    f[14] = std::pow(kPi, 1.0 / 3.0) * std::pow(6.0 * vol, 2.0 / 3.0) / surface;  // f15

    const double bbox_w = (max_x - min_x + 1) * sp.sx;
    const double bbox_h = (max_y - min_y + 1) * sp.sy;
    const double bbox_d = (max_z - min_z + 1) * sp.sz;
    f[15] = vol / (bbox_w * bbox_h * bbox_d);                   // f16
    f[18] = std::max({bbox_w, bbox_h, bbox_d});                 // f19
    f[19] = surface / vol;                                      // f20
    f[20] = static_cast<double>(max_z - min_z + 1);             // f21

    // PCA of voxel coordinates (mm) with voxel-extent correction
    {
        double mx = 0, my = 0, mz = 0;
        for (const MaskVoxel& v : voxels) { mx += v.x * sp.sx; my += v.y * sp.sy; mz += v.z * sp.sz; }
        mx /= n; my /= n; mz /= n;
        double cxx = 0, cyy = 0, czz = 0, cxy = 0, cxz = 0, cyz = 0;
        for (const MaskVoxel& v : voxels) {
            const double dx = v.x * sp.sx - mx, dy = v.y * sp.sy - my, dz = v.z * sp.sz - mz;
            cxx += dx * dx; cyy += dy * dy; czz += dz * dz;
            cxy += dx * dy; cxz += dx * dz; cyz += dy * dz;
        }
        cxx = cxx / n + sp.sx * sp.sx / 12.0;
        cyy = cyy / n + sp.sy * sp.sy / 12.0;
        czz = czz / n + sp.sz * sp.sz / 12.0;
        cxy /= n; cxz /= n; cyz /= n;
        const auto lam = eig3(cxx, cxy, cxz, cyy, cyz, czz);
        f[16] = std::sqrt(std::max(0.0, lam[1] / lam[0]));  // f17
        f[17] = std::sqrt(std::max(0.0, lam[2] / lam[0]));  // f18
    }

    // ---- intensity statistics ------------------------------------------
    std::vector<double> hu;
    hu.reserve(voxels.size());
    for (const MaskVoxel& v : voxels) hu.push_back(v.hu);
    std::sort(hu.begin(), hu.end());

    const double mean = std::accumulate(hu.begin(), hu.end(), 0.0) / n;
    double m2 = 0, m3 = 0, m4 = 0;
    for (const double v : hu) {
        const double d = v - mean;
        m2 += d * d; m3 += d * d * d; m4 += d * d * d * d;
    }
    m2 /= n; m3 /= n; m4 /= n;
    const double stddev = std::sqrt(m2);

    f[21] = mean;                 // f22
    f[22] = percentile(hu, 0.5);  // f23
    f[23] = stddev;               // f24
    f[24] = hu.front();           // f25
    f[25] = hu.back();            // f26
    f[26] = hu.back() - hu.front();  // f27
    f[27] = stddev > 0.0 ? m3 / (m2 * stddev) : 0.0;  // f28
    f[28] = stddev > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;  // f29

    double sq = 0.0;
    for (const double v : hu) {
        double w = (v - kWindowLoHu) / (kWindowHiHu - kWindowLoHu);
        if (w < 0.0) w = 0.0;
        if (w > 1.0) w = 1.0;
        sq += w * w;
    }
    f[29] = sq / n;  // f30

    {
        std::array<double, 64> hist{};
        for (const double v : hu) hist[static_cast<std::size_t>(window_bin(v, 64))] += 1.0;
        double entropy = 0.0;
        for (const double c : hist)
            if (c > 0.0) {
                const double p = c / n;
                entropy -= p * std::log(p);
            }
        f[30] = entropy;  // f31
    }

    f[31] = percentile(hu, 0.10);  // f32
    f[32] = percentile(hu, 0.25);  // f33
    f[33] = percentile(hu, 0.75);  // f34
    f[34] = percentile(hu, 0.90);  // f35
    f[35] = f[33] - f[32];         // f36

    std::size_t above = 0, below = 0;
    for (const double v : hu) {
        if (v > -50.0) ++above;
        if (v < -600.0) ++below;
    }
    f[36] = static_cast<double>(above) / n;  // f37
    f[37] = static_cast<double>(below) / n;  // f38

    // ---- margin ----------------------------------------------------------
    {
        std::vector<double> grads;
        for (const MaskVoxel& v : voxels) {
            const bool boundary = !in_mask(v.x - 1, v.y, v.z) || !in_mask(v.x + 1, v.y, v.z) ||
                                  !in_mask(v.x, v.y - 1, v.z) || !in_mask(v.x, v.y + 1, v.z) ||
                                  !in_mask(v.x, v.y, v.z - 1) || !in_mask(v.x, v.y, v.z + 1);
            if (!boundary) continue;
            const double gx = (volume.at_clamped(v.x + 1, v.y, v.z) -
                               volume.at_clamped(v.x - 1, v.y, v.z)) / (2.0 * sp.sx);
            const double gy = (volume.at_clamped(v.x, v.y + 1, v.z) -
                               volume.at_clamped(v.x, v.y - 1, v.z)) / (2.0 * sp.sy);
            const double gz = (volume.at_clamped(v.x, v.y, v.z + 1) -
                               volume.at_clamped(v.x, v.y, v.z - 1)) / (2.0 * sp.sz);
            grads.push_back(std::sqrt(gx * gx + gy * gy + gz * gz));
        }
        const double gn = static_cast<double>(grads.size());
        const double gmean = std::accumulate(grads.begin(), grads.end(), 0.0) / gn;
        double gvar = 0.0;
        for (const double g : grads) gvar += (g - gmean) * (g - gmean);
        f[38] = gmean;                  // f39
        f[39] = std::sqrt(gvar / gn);   // f40
    }

    // two-voxel outer rim
    {
        Mask3D rim(dims);
        for (const MaskVoxel& v : voxels)
            for (int dz = -2; dz <= 2; ++dz)
                for (int dy = -2; dy <= 2; ++dy)
                    for (int dx = -2; dx <= 2; ++dx) {
                        const int x = v.x + dx, y = v.y + dy, z = v.z + dz;
                        if (dims.contains(x, y, z) && !mask.test(x, y, z)) rim.set(x, y, z);
                    }
        double rim_sum = 0.0;
        rim.for_each([&](int x, int y, int z) { rim_sum += volume.at(x, y, z); });
        const double rim_mean =
            rim.empty() ? mean : rim_sum / static_cast<double>(rim.voxel_count());
        f[40] = rim_mean;        // f41
        f[41] = mean - rim_mean; // f42
    }

    // ---- GLCM on the largest slice ---------------------------------------
    {
        constexpr int kLevels = 32;
        const int offsets[4][2] = {{1, 0}, {1, -1}, {0, 1}, {1, 1}};
        std::vector<double> avg(kLevels * kLevels, 0.0);
        int active_offsets = 0;
        for (const auto& off : offsets) {
            std::vector<double> counts(kLevels * kLevels, 0.0);
            double total = 0.0;
            for (const auto& [x, y] : slice_pixels) {
                const int x2 = x + off[0], y2 = y + off[1];
                if (!in_slice(x2, y2)) continue;
                const int a = window_bin(volume.at(x, y, best_z), kLevels);
                const int b = window_bin(volume.at(x2, y2, best_z), kLevels);
                counts[static_cast<std::size_t>(a) * kLevels + b] += 1.0;
                counts[static_cast<std::size_t>(b) * kLevels + a] += 1.0;
                total += 2.0;
            }
            if (total == 0.0) continue;
            ++active_offsets;
            for (std::size_t i = 0; i < counts.size(); ++i) avg[i] += counts[i] / total;
        }
        if (active_offsets == 0) {
            f[42] = 0.0; f[43] = 0.0; f[44] = 1.0; f[45] = 1.0; f[46] = 0.0;
        } else {
            for (double& p : avg) p /= active_offsets;
            double mu_i = 0, mu_j = 0;
            for (int i = 0; i < kLevels; ++i)
                for (int j = 0; j < kLevels; ++j) {
                    const double p = avg[static_cast<std::size_t>(i) * kLevels + j];
                    mu_i += i * p;
                    mu_j += j * p;
                }
            double var_i = 0, var_j = 0, contrast = 0, corr_num = 0, energy = 0,
                   homogeneity = 0, entropy = 0;
            for (int i = 0; i < kLevels; ++i)
                for (int j = 0; j < kLevels; ++j) {
                    const double p = avg[static_cast<std::size_t>(i) * kLevels + j];
                    if (p == 0.0) continue;
                    var_i += (i - mu_i) * (i - mu_i) * p;
                    var_j += (j - mu_j) * (j - mu_j) * p;
                    contrast += (i - j) * (i - j) * p;
                    corr_num += (i - mu_i) * (j - mu_j) * p;
                    energy += p * p;
                    homogeneity += p / (1.0 + std::abs(i - j));
                    entropy -= p * std::log(p);
                }
            f[42] = contrast;  // f43
            f[43] = (var_i > 1e-12 && var_j > 1e-12)
                        ? corr_num / std::sqrt(var_i * var_j)
                        : 0.0;  // f44: defined 0 for degenerate marginals
            f[44] = energy;       // f45
            f[45] = homogeneity;  // f46
            f[46] = entropy;      // f47
        }
    }

    // ---- local texture -----------------------------------------------------
    {
        double mad = 0.0;
        for (const MaskVoxel& v : voxels) {
            double acc = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    acc += volume.at_clamped(v.x + dx, v.y + dy, v.z);
            mad += std::abs(v.hu - acc / 9.0);
        }
        f[47] = mad / n;  // f48
    }

    {
        std::vector<double> areas;
        for (int z = min_z; z <= max_z; ++z)
            if (slice_counts[static_cast<std::size_t>(z)] > 0)
                areas.push_back(static_cast<double>(slice_counts[static_cast<std::size_t>(z)]) *
                                pixel_area);
        const double a_n = static_cast<double>(areas.size());
        const double a_mean = std::accumulate(areas.begin(), areas.end(), 0.0) / a_n;
        double a_var = 0.0;
        for (const double a : areas) a_var += (a - a_mean) * (a - a_mean);
        f[48] = a_mean > 0.0 ? std::sqrt(a_var / a_n) / a_mean : 0.0;  // f49
    }

    {
        double mx = 0, my = 0, mz = 0;
        for (const MaskVoxel& v : voxels) { mx += v.x * sp.sx; my += v.y * sp.sy; mz += v.z * sp.sz; }
        mx /= n; my /= n; mz /= n;
        std::vector<double> radii(voxels.size());
        double r_max = 0.0;
        for (std::size_t i = 0; i < voxels.size(); ++i) {
            const double dx = voxels[i].x * sp.sx - mx;
            const double dy = voxels[i].y * sp.sy - my;
            const double dz = voxels[i].z * sp.sz - mz;
            radii[i] = std::sqrt(dx * dx + dy * dy + dz * dz);
            r_max = std::max(r_max, radii[i]);
        }
        double slope = 0.0;
        if (r_max > 0.0) {
            double r_mean = 0.0;
            for (double& r : radii) { r /= r_max; r_mean += r; }
            r_mean /= n;
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < voxels.size(); ++i) {
                num += (radii[i] - r_mean) * (voxels[i].hu - mean);
                den += (radii[i] - r_mean) * (radii[i] - r_mean);
            }
            if (den > 0.0) slope = num / den;
        }
        f[49] = slope;  // f50
    }

    return f;
}

std::vector<double> strip_size_features(const std::vector<double>& features) {
    if (features.size() != static_cast<std::size_t>(kFeatureCount))
        throw LengthMismatch("strip_size_features: expected " +
                             std::to_string(kFeatureCount) + " features, got " +
                             std::to_string(features.size()));
    std::vector<double> out;
    out.reserve(kReducedFeatureCount);
    for (int i = 0; i < kFeatureCount; ++i)
        if (!kRegistry[i].is_size_measure) out.push_back(features[i]);
    return out;
}

}  // namespace nodulekit::qif
