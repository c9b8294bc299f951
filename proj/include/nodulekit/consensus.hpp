#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nodulekit/annotations.hpp"
#include "nodulekit/volume.hpp"

namespace nodulekit {

// Merged multi-reader nodule.
struct ConsensusNodule {
    std::string nodule_uid;
    std::string patient_id;
    std::vector<std::pair<int, std::string>> member_readings;  // (session index, nodule id)
    Mask3D consensus_mask;
    int rating = 0;  // 1..5
    Vec3 centroid;   // continuous voxel coordinates
};

// A non-nodule locus carried through to cohort building.
struct NonNoduleLocus {
    std::string locus_id;
    std::string patient_id;
    IVec3 position;
};

enum class Design { S1vS45, S12vS45, S0vS1_5 };

const char* design_name(Design d);
Design design_from_name(const std::string& name);  // throws Error on unknown

enum class CohortLabel { positive, negative };
enum class CohortSource { nodule, non_nodule };

struct CohortItem {
    std::string item_id;  // nodule_uid or locus id
    std::string patient_id;
    CohortLabel label = CohortLabel::negative;
    CohortSource source = CohortSource::nodule;
    int rating = 0;  // 0 for non-nodule loci
    Vec3 centroid;
};

// Even-odd scanline fill of the closed polygon; pixels whose centre lies
// exactly on an edge are included. A single vertex marks exactly one pixel.
Mask2D rasterize_roi(const std::vector<std::pair<int, int>>& polygon, int nx, int ny);

// All of a reading's per-slice ROIs rasterized into one volume-shaped mask.
Mask3D rasterize_reading(const NoduleReading& reading, const Dims& dims);

// One rasterized reading plus its provenance.
struct RasterizedReading {
    int session = 0;
    std::string nodule_id;
    int rating = 0;
    Mask3D mask;
};

std::vector<RasterizedReading> rasterize_all(const AnnotationSet& set, const Dims& dims);

// Partition such that two readings share a group iff their masks are
// connected by a chain of pairwise voxel overlaps.
std::vector<std::vector<std::size_t>> group_readings(
    const std::vector<RasterizedReading>& readings);

// Voxel kept iff present in >= 50% of member masks (k members: threshold k/2,
// inclusive).
Mask3D consensus_mask(const std::vector<const Mask3D*>& members);

// Mean of member ratings, rounded to nearest; exact .5 rounds away from zero.
int consensus_rating(const std::vector<int>& ratings);

// Unweighted mean of the member masks' centres of mass.
Vec3 consensus_centroid(const std::vector<const Mask3D*>& members);

// Full consensus pass for one patient.
std::vector<ConsensusNodule> build_consensus(const AnnotationSet& set, const Dims& dims);

// Collects non-nodule loci (deduplicated across sessions by exact position).
std::vector<NonNoduleLocus> collect_non_nodules(const AnnotationSet& set);

// Applies a design's labelling rule; optionally undersamples the majority
// class to the minority size using `seed`.
std::vector<CohortItem> build_cohort(const std::vector<ConsensusNodule>& nodules,
                                     const std::vector<NonNoduleLocus>& non_nodules,
                                     Design design, bool balance, std::uint64_t seed);

}  // namespace nodulekit
