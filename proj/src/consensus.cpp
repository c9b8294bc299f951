#include "nodulekit/consensus.hpp"

#include <algorithm>
#include <numeric>

#include "nodulekit/rng.hpp"

namespace nodulekit {

namespace {

// Exact integer tests for pixel-centre membership; vertices are integers so
// no floating point is involved.
bool on_segment(int px, int py, int x1, int y1, int x2, int y2) {
    const long long cross = static_cast<long long>(x2 - x1) * (py - y1) -
                            static_cast<long long>(y2 - y1) * (px - x1);
    if (cross != 0) return false;
    return px >= std::min(x1, x2) && px <= std::max(x1, x2) &&
           py >= std::min(y1, y2) && py <= std::max(y1, y2);
}

// Even-odd crossing count parity for a rightward ray from (px, py); the
// half-open rule on y makes vertex hits unambiguous.
bool crosses(int px, int py, int x1, int y1, int x2, int y2) {
    if ((y1 > py) == (y2 > py)) return false;
    // px < x1 + (py-y1)*(x2-x1)/(y2-y1), rearranged to integer arithmetic
    const long long lhs = static_cast<long long>(px - x1) * (y2 - y1);
    const long long rhs = static_cast<long long>(py - y1) * (x2 - x1);
    return (y2 - y1) > 0 ? lhs < rhs : lhs > rhs;
}

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), std::size_t{0});
    }
    std::size_t find(std::size_t i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace

Mask2D rasterize_roi(const std::vector<std::pair<int, int>>& polygon, int nx, int ny) {
    if (polygon.empty()) throw EmptyPolygon("rasterize_roi: no vertices");
    Mask2D mask(nx, ny);

    if (polygon.size() == 1) {
        const auto [x, y] = polygon[0];
        if (x >= 0 && x < nx && y >= 0 && y < ny) mask.set(x, y);
        return mask;
    }

    int min_x = polygon[0].first, max_x = polygon[0].first;
    int min_y = polygon[0].second, max_y = polygon[0].second;
    for (const auto& [x, y] : polygon) {
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
    }
    min_x = std::max(min_x, 0);
    min_y = std::max(min_y, 0);
    max_x = std::min(max_x, nx - 1);
    max_y = std::min(max_y, ny - 1);

    const std::size_t n = polygon.size();
    for (int y = min_y; y <= max_y; ++y) {
        for (int x = min_x; x <= max_x; ++x) {
            bool inside = false;
            bool boundary = false;
            for (std::size_t i = 0; i < n && !boundary; ++i) {
                const auto [x1, y1] = polygon[i];
                const auto [x2, y2] = polygon[(i + 1) % n];
                if (on_segment(x, y, x1, y1, x2, y2)) boundary = true;
                else if (crosses(x, y, x1, y1, x2, y2)) inside = !inside;
            }
            if (boundary || inside) mask.set(x, y);
        }
    }
    return mask;
}

Mask3D rasterize_reading(const NoduleReading& reading, const Dims& dims) {
    Mask3D mask(dims);
    for (const Roi& roi : reading.rois) {
        if (roi.slice_index < 0 || roi.slice_index >= dims.nz) continue;
        const Mask2D slice = rasterize_roi(roi.vertices, dims.nx, dims.ny);
        for (int y = 0; y < dims.ny; ++y)
            for (int x = 0; x < dims.nx; ++x)
                if (slice.test(x, y)) mask.set(x, y, roi.slice_index);
    }
    return mask;
}

std::vector<RasterizedReading> rasterize_all(const AnnotationSet& set, const Dims& dims) {
    std::vector<RasterizedReading> out;
    for (std::size_t s = 0; s < set.sessions.size(); ++s) {
        for (const NoduleReading& reading : set.sessions[s].nodules) {
            out.push_back({static_cast<int>(s), reading.nodule_id, reading.malignancy,
                           rasterize_reading(reading, dims)});
        }
    }
    return out;
}

std::vector<std::vector<std::size_t>> group_readings(
    const std::vector<RasterizedReading>& readings) {
    UnionFind uf(readings.size());
    for (std::size_t i = 0; i < readings.size(); ++i)
        for (std::size_t j = i + 1; j < readings.size(); ++j)
            if (readings[i].mask.intersects(readings[j].mask)) uf.unite(i, j);

    // groups ordered by their first reading's document order
    std::vector<std::vector<std::size_t>> groups;
    std::vector<long> group_of_root(readings.size(), -1);
    for (std::size_t i = 0; i < readings.size(); ++i) {
        const std::size_t root = uf.find(i);
        if (group_of_root[root] < 0) {
            group_of_root[root] = static_cast<long>(groups.size());
            groups.emplace_back();
        }
        groups[static_cast<std::size_t>(group_of_root[root])].push_back(i);
    }
    return groups;
}

Mask3D consensus_mask(const std::vector<const Mask3D*>& members) {
    if (members.empty()) throw EmptyMask("consensus_mask: no members");
    const Dims dims = members[0]->dims();
    for (const Mask3D* m : members)
        if (!(m->dims() == dims)) throw ShapeMismatch("consensus_mask: dims differ");

    const std::size_t k = members.size();
    Mask3D out(dims);
    for (int z = 0; z < dims.nz; ++z)
        for (int y = 0; y < dims.ny; ++y)
            for (int x = 0; x < dims.nx; ++x) {
                std::size_t votes = 0;
                for (const Mask3D* m : members) votes += m->test(x, y, z);
                if (2 * votes >= k) out.set(x, y, z);
            }
    return out;
}

int consensus_rating(const std::vector<int>& ratings) {
    if (ratings.empty()) throw Error("consensus_rating: no ratings");
    long long sum = 0;
    for (const int r : ratings) {
        if (r < 1 || r > 5) throw RatingOutOfRange("rating " + std::to_string(r));
        sum += r;
    }
    // round half away from zero; ratings are positive so this is round-half-up,
    // done in exact integer arithmetic
    const long long k = static_cast<long long>(ratings.size());
    return static_cast<int>((2 * sum + k) / (2 * k));
}

Vec3 consensus_centroid(const std::vector<const Mask3D*>& members) {
    if (members.empty()) throw EmptyMask("consensus_centroid: no members");
    Vec3 acc;
    for (const Mask3D* m : members) {
        const Vec3 c = m->center_of_mass();  // throws EmptyMask on empty member
        acc.x += c.x;
        acc.y += c.y;
        acc.z += c.z;
    }
    const double k = static_cast<double>(members.size());
    return {acc.x / k, acc.y / k, acc.z / k};
}

std::vector<ConsensusNodule> build_consensus(const AnnotationSet& set, const Dims& dims) {
    std::vector<RasterizedReading> readings = rasterize_all(set, dims);
    // readings whose ROIs all fell outside the volume cannot participate
    std::erase_if(readings, [](const RasterizedReading& r) { return r.mask.empty(); });

    std::vector<ConsensusNodule> out;
    for (const auto& group : group_readings(readings)) {
        std::vector<const Mask3D*> masks;
        std::vector<int> ratings;
        ConsensusNodule nodule;
        for (const std::size_t idx : group) {
            masks.push_back(&readings[idx].mask);
            ratings.push_back(readings[idx].rating);
            nodule.member_readings.emplace_back(readings[idx].session,
                                                readings[idx].nodule_id);
        }
        nodule.patient_id = set.patient_id;
        nodule.nodule_uid = set.patient_id + "_n" + std::to_string(out.size());
        nodule.consensus_mask = consensus_mask(masks);
        nodule.rating = consensus_rating(ratings);
        nodule.centroid = consensus_centroid(masks);
        out.push_back(std::move(nodule));
    }
    return out;
}

std::vector<NonNoduleLocus> collect_non_nodules(const AnnotationSet& set) {
    std::vector<NonNoduleLocus> out;
    std::vector<IVec3> seen;
    for (const auto& session : set.sessions) {
        for (const IVec3& p : session.non_nodules) {
            if (std::find(seen.begin(), seen.end(), p) != seen.end()) continue;
            seen.push_back(p);
            NonNoduleLocus locus;
            locus.patient_id = set.patient_id;
            locus.locus_id = set.patient_id + "_x" + std::to_string(out.size());
            locus.position = p;
            out.push_back(std::move(locus));
        }
    }
    return out;
}

const char* design_name(Design d) {
    switch (d) {
        case Design::S1vS45: return "s1_vs_s45";
        case Design::S12vS45: return "s12_vs_s45";
        case Design::S0vS1_5: return "s0_vs_s1_5";
    }
    return "?";
}

Design design_from_name(const std::string& name) {
    if (name == "s1_vs_s45") return Design::S1vS45;
    if (name == "s12_vs_s45") return Design::S12vS45;
    if (name == "s0_vs_s1_5") return Design::S0vS1_5;
    throw Error("unknown design '" + name + "'");
}

std::vector<CohortItem> build_cohort(const std::vector<ConsensusNodule>& nodules,
                                     const std::vector<NonNoduleLocus>& non_nodules,
                                     Design design, bool balance, std::uint64_t seed) {
    std::vector<CohortItem> items;
    const auto add_nodule = [&](const ConsensusNodule& n, CohortLabel label) {
        items.push_back({n.nodule_uid, n.patient_id, label, CohortSource::nodule,
                         n.rating, n.centroid});
    };

    for (const ConsensusNodule& n : nodules) {
        switch (design) {
            case Design::S1vS45:
                if (n.rating == 1) add_nodule(n, CohortLabel::negative);
                else if (n.rating >= 4) add_nodule(n, CohortLabel::positive);
                break;
            case Design::S12vS45:
                if (n.rating <= 2) add_nodule(n, CohortLabel::negative);
                else if (n.rating >= 4) add_nodule(n, CohortLabel::positive);
                break;
            case Design::S0vS1_5:
                add_nodule(n, CohortLabel::positive);
                break;
        }
    }
    if (design == Design::S0vS1_5) {
        for (const NonNoduleLocus& locus : non_nodules) {
            items.push_back({locus.locus_id, locus.patient_id, CohortLabel::negative,
                             CohortSource::non_nodule, 0,
                             {static_cast<double>(locus.position.x),
                              static_cast<double>(locus.position.y),
                              static_cast<double>(locus.position.z)}});
        }
    }

    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < items.size(); ++i)
        (items[i].label == CohortLabel::positive ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty())
        throw EmptyClass(std::string("design ") + design_name(design) +
                         " produced an empty class");

    if (!balance || pos.size() == neg.size()) return items;

    auto& majority = pos.size() > neg.size() ? pos : neg;
    const std::size_t keep_count = std::min(pos.size(), neg.size());
    Rng rng(derive_seed(seed, "cohort_balance"));
    rng.shuffle(majority);
    majority.resize(keep_count);
    std::sort(majority.begin(), majority.end());

    std::vector<std::size_t> keep;
    keep.reserve(2 * keep_count);
    keep.insert(keep.end(), pos.begin(), pos.end());
    keep.insert(keep.end(), neg.begin(), neg.end());
    std::sort(keep.begin(), keep.end());

    std::vector<CohortItem> balanced;
    balanced.reserve(keep.size());
    for (const std::size_t i : keep) balanced.push_back(items[i]);
    return balanced;
}

}  // namespace nodulekit
