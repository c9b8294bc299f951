#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nodulekit/annotations.hpp"
#include "nodulekit/volume.hpp"

namespace nodulekit::phantom {

struct PhantomConfig {
    int n_patients = 10;
    int nodules_per_class = 1;  // per patient: benign-like and malignant-like each
    int non_nodules_per_patient = 2;
    Dims dims{128, 128, 32};
    Spacing spacing{0.7, 0.7, 2.5};
    double noise_sigma = 30.0;  // HU
    int readers = 4;            // 1..4 reading sessions
    std::uint64_t seed = 0;
};

struct NoduleTruth {
    std::string patient_id;
    bool malignant = false;
    Vec3 centroid;  // voxel coordinates
    double mean_hu_in_mask = 0.0;
    std::size_t voxel_count = 0;
};

struct LocusTruth {
    std::string patient_id;
    IVec3 position;
};

// One patient's study in memory; generate_phantom serializes these.
struct PatientStudy {
    CTVolume volume;
    AnnotationSet annotations;
    std::vector<Mask3D> truth_masks;  // one per nodule, malignant-like first
    std::vector<NoduleTruth> nodules;
    std::vector<LocusTruth> loci;
};

struct PhantomManifest {
    std::vector<std::string> rawct_files;
    std::vector<std::string> xml_files;
    std::vector<NoduleTruth> nodules;
    std::vector<LocusTruth> loci;
};

// Deterministic for a fixed config+seed; patient p depends only on the
// derived sub-seed, so studies can be produced in any order or in parallel.
PatientStudy generate_patient(const PhantomConfig& config, int patient_index);

// Writes <id>.rawct and <id>.xml per patient plus manifest.json; returns the
// manifest. Identical config+seed produces byte-identical files.
PhantomManifest generate_phantom(const PhantomConfig& config,
                                 const std::filesystem::path& out_dir, int threads = 1);

// Traced outer contours (one per 8-connected component) of one mask slice;
// used to emit edge-map ROIs that rasterize back to the mask.
std::vector<std::vector<std::pair<int, int>>> trace_slice_contours(const Mask3D& mask, int z);

}  // namespace nodulekit::phantom
