#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nodulekit/consensus.hpp"
#include "nodulekit/metrics.hpp"
#include "nodulekit/nn_train.hpp"
#include "nodulekit/qif.hpp"

namespace nodulekit {

// One evaluable item joined across the cohort manifest, patch container, and
// feature CSV.
struct EvalItem {
    std::string item_id;
    std::string patient_id;
    int label = 0;  // 0 negative, 1 positive
    int rating = 0; // 0 marks a non-nodule locus
};

struct ExperimentData {
    std::vector<EvalItem> items;
    std::map<std::string, std::size_t> patch_index;  // item_id -> index in patches
    PatchSet patches;
    std::map<std::string, std::vector<double>> qif;  // item_id -> 50 features
};

// Design labelling shared by cohort building and experiment runners; empty
// when the rating is excluded by the design.
std::optional<int> design_label(Design design, int rating, bool is_non_nodule);

// Patient-disjoint partition: no patient spans both sides; the train side is
// filled with shuffled patients until it reaches the item-count target. With
// balance, each side is undersampled to equal class counts.
void split_by_patient(const std::vector<EvalItem>& items, double train_fraction, bool balance,
                      std::uint64_t seed, std::vector<std::size_t>& train_out,
                      std::vector<std::size_t>& validation_out);

struct ModelRow {
    std::string model;
    double auc = 0.0, acc = 0.0, sens = 0.0, spc = 0.0;

    bool operator==(const ModelRow&) const = default;
};

struct EvalReport {
    std::string design;
    std::uint64_t seed = 0;
    double threshold = 0.5;
    std::string config_hash;
    std::vector<ModelRow> rows;
    std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> roc;

    bool operator==(const EvalReport&) const = default;
};

struct RunOptions {
    double threshold = 0.5;
    bool balance = true;
    int n_trees = 1000;
    int threads = 1;
    nn::TrainConfig train;  // its seed field is ignored; sub-seeds derive from the run seed
    std::string config_hash;
};

// Trains every requested model on the training side of a patient-disjoint
// 80/20 split and evaluates all of them on the identical validation side.
// Models: cnn21, cnn47 (softmax probability), cnn21+rf / cnn47+rf (fused
// 250-feature forest), rf (50-feature forest), lm (sqrt-area logistic).
EvalReport run_design(Design design, const std::vector<std::string>& models,
                      const ExperimentData& data, std::uint64_t seed,
                      const RunOptions& options);

enum class ReducedModel { rf, rf_no_size, lm };
ReducedModel reduced_model_from_name(const std::string& name);
const char* reduced_model_name(ReducedModel m);

enum class ReducedMode { train80, train20, one_plus_one_minus };
ReducedMode reduced_mode_from_name(const std::string& name);
const char* reduced_mode_name(ReducedMode m);

struct ReducedResult {
    Design design;
    ReducedModel model;
    ReducedMode mode;
    double mean_accuracy = 0.0;
    int n_features_used = 0;
    std::vector<double> per_trial;  // one entry for train80/train20
};

// Table-2 style protocols over QIF features only. one_plus_one_minus trains
// on one random positive and one random negative item per trial, tests on the
// remainder, and averages accuracy over `trials` seeded trials.
ReducedResult run_reduced_training(Design design, ReducedModel model, ReducedMode mode,
                                   const ExperimentData& data, int trials, std::uint64_t seed,
                                   const RunOptions& options);

// metrics CSV (model, design, auc, acc, sens, spc, seed) and one ROC SVG per
// model; byte-deterministic for identical reports.
std::vector<std::filesystem::path> export_report(const EvalReport& report,
                                                 const std::filesystem::path& out_dir);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& json_text);

// --- CSV interfaces -------------------------------------------------------

struct CohortRow {
    std::string item_id;
    std::string patient_id;
    std::string design;
    std::string label;  // "positive", "negative", or "none"
    int rating = 0;
    Vec3 centroid;
};

void write_cohort_csv(const std::vector<CohortRow>& rows, const std::filesystem::path& path);
std::vector<CohortRow> read_cohort_csv(const std::filesystem::path& path);

void write_features_csv(const std::vector<std::pair<std::string, std::string>>& ids,
                        const std::vector<qif::FeatureVector>& features,
                        const std::filesystem::path& path);
void write_feature_registry_sidecar(const std::filesystem::path& path);
std::map<std::string, std::vector<double>> read_features_csv(const std::filesystem::path& path);

void write_cnn_features_csv(const std::vector<std::string>& ids,
                            const std::vector<std::vector<double>>& features,
                            const std::filesystem::path& path);
std::map<std::string, std::vector<double>> read_cnn_features_csv(
    const std::filesystem::path& path);

}  // namespace nodulekit
