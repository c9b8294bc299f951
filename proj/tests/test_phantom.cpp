#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "nodulekit/consensus.hpp"
#include "nodulekit/phantom.hpp"
#include "nodulekit/rawct.hpp"

using namespace nodulekit;
using phantom::PhantomConfig;

namespace {

PhantomConfig small_config(std::uint64_t seed) {
    PhantomConfig config;
    config.n_patients = 2;
    config.nodules_per_class = 1;
    config.non_nodules_per_patient = 1;
    config.dims = {96, 96, 32};
    config.noise_sigma = 30.0;
    config.readers = 4;
    config.seed = seed;
    return config;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE("phantom") {

TEST_CASE("same config and seed produce byte-identical outputs") {
    const auto dir1 = std::filesystem::temp_directory_path() / "ndk_ph_a";
    const auto dir2 = std::filesystem::temp_directory_path() / "ndk_ph_b";
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
    const PhantomConfig config = small_config(11);
    phantom::generate_phantom(config, dir1);
    phantom::generate_phantom(config, dir2);
    for (const auto& entry : std::filesystem::directory_iterator(dir1)) {
        const auto name = entry.path().filename();
        CHECK(read_file(entry.path()) == read_file(dir2 / name));
    }
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("file and nodule counts follow the config") {
    const auto dir = std::filesystem::temp_directory_path() / "ndk_ph_c";
    std::filesystem::remove_all(dir);
    PhantomConfig config = small_config(5);
    config.n_patients = 4;
    const auto manifest = phantom::generate_phantom(config, dir);
    CHECK(manifest.rawct_files.size() == 4);
    CHECK(manifest.xml_files.size() == 4);
    CHECK(manifest.nodules.size() == 8);  // 2 per patient
    CHECK(manifest.loci.size() == 4);
    CHECK(std::filesystem::exists(dir / "manifest.json"));
    for (const auto& f : manifest.rawct_files) CHECK(std::filesystem::exists(dir / f));
    std::filesystem::remove_all(dir);
}

TEST_CASE("generated studies parse cleanly with no warnings") {
    const PhantomConfig config = small_config(21);
    for (int p = 0; p < config.n_patients; ++p) {
        const auto study = phantom::generate_patient(config, p);
        const std::string xml = serialize_annotations(study.annotations);
        const AnnotationSet parsed = parse_annotations(xml);
        CHECK(parsed.warnings.empty());
        CHECK(parsed.same_content(study.annotations));
        CHECK(validate_bounds(parsed, config.dims).empty());
        CHECK(parsed.sessions.size() == 4);
    }
}

TEST_CASE("contour round-trip: traced ROIs rasterize back to the reader mask") {
    const PhantomConfig config = small_config(31);
    const auto study = phantom::generate_patient(config, 0);
    // rasterize the parsed annotations and compare against the truth masks
    const auto readings = rasterize_all(study.annotations, config.dims);
    REQUIRE(readings.size() == 8);  // 2 nodules x 4 readers
    for (const auto& reading : readings) {
        // match to the closest truth mask by overlap
        double best = 0.0;
        for (const auto& truth : study.truth_masks) best = std::max(best, dice(reading.mask, truth));
        CHECK(best > 0.75);
    }
}

TEST_CASE("consensus of perturbed readers overlaps truth with dice >= 0.7") {
    const PhantomConfig config = small_config(41);
    for (int p = 0; p < 2; ++p) {
        const auto study = phantom::generate_patient(config, p);
        const auto nodules = build_consensus(study.annotations, config.dims);
        REQUIRE(nodules.size() == study.truth_masks.size());
        for (const auto& nodule : nodules) {
            double best = 0.0;
            for (const auto& truth : study.truth_masks)
                best = std::max(best, dice(nodule.consensus_mask, truth));
            CHECK(best >= 0.7);
        }
    }
}

TEST_CASE("class separation: malignant-like mean HU well above benign-like") {
    PhantomConfig config = small_config(51);
    config.n_patients = 12;  // 24 nodules
    double benign = 0.0, malignant = 0.0;
    int nb = 0, nm = 0;
    for (int p = 0; p < config.n_patients; ++p) {
        const auto study = phantom::generate_patient(config, p);
        for (const auto& truth : study.nodules) {
            if (truth.malignant) { malignant += truth.mean_hu_in_mask; ++nm; }
            else { benign += truth.mean_hu_in_mask; ++nb; }
        }
    }
    CHECK(nb == 12);
    CHECK(nm == 12);
    CHECK(malignant / nm - benign / nb >= 50.0);
}

TEST_CASE("rawct files round-trip through the ingest parser") {
    const auto dir = std::filesystem::temp_directory_path() / "ndk_ph_d";
    std::filesystem::remove_all(dir);
    const PhantomConfig config = small_config(61);
    phantom::generate_phantom(config, dir);
    const CTVolume vol = parse_volume(dir / "PH0001.rawct");
    CHECK(vol.dims == config.dims);
    CHECK(vol.spacing == config.spacing);
    CHECK(vol.patient_id == "PH0001");
    const AnnotationSet set = parse_annotations(read_file(dir / "PH0001.xml"));
    CHECK(set.patient_id == "PH0001");
    std::filesystem::remove_all(dir);
}

TEST_CASE("threaded generation matches single-threaded output") {
    const auto dir1 = std::filesystem::temp_directory_path() / "ndk_ph_e";
    const auto dir2 = std::filesystem::temp_directory_path() / "ndk_ph_f";
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
    PhantomConfig config = small_config(71);
    config.n_patients = 3;
    phantom::generate_phantom(config, dir1, 1);
    phantom::generate_phantom(config, dir2, 3);
    for (const auto& entry : std::filesystem::directory_iterator(dir1))
        CHECK(read_file(entry.path()) == read_file(dir2 / entry.path().filename()));
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("contour tracing handles singletons, lines, and blobs") {
    const Dims dims{12, 12, 1};
    Mask3D m(dims);
    m.set(3, 3, 0);  // singleton
    for (int x = 6; x <= 9; ++x) m.set(x, 6, 0);  // horizontal line
    const auto contours = phantom::trace_slice_contours(m, 0);
    REQUIRE(contours.size() == 2);
    CHECK(contours[0] == std::vector<std::pair<int, int>>{{3, 3}});
    // rasterizing each contour back reproduces the component
    const Mask2D line = rasterize_roi(contours[1], 12, 12);
    CHECK(line.count() == 4);
    for (int x = 6; x <= 9; ++x) CHECK(line.test(x, 6));
}

}  // TEST_SUITE
