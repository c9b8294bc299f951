#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "nodulekit/experiment.hpp"
#include "nodulekit/rng.hpp"

using namespace nodulekit;

namespace {

// O(n^2) all-pairs oracle for the Mann-Whitney statistic.
double auc_pair_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
    double num = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) num += 1.0;
            else if (scores[i] == scores[j]) num += 0.5;
        }
    }
    return num / pairs;
}

void random_instance(Rng& rng, std::size_t n, bool ties, std::vector<double>& scores,
                     std::vector<int>& labels) {
    scores.clear();
    labels.clear();
    for (std::size_t i = 0; i < n; ++i) {
        double s = rng.uniform();
        if (ties) s = std::floor(s * 8.0) / 8.0;  // quantize to force ties
        scores.push_back(s);
        labels.push_back(static_cast<int>(rng.uniform_int(2)));
    }
    labels[0] = 0;  // guarantee both classes
    labels[n - 1] = 1;
}

std::vector<EvalItem> synthetic_cohort(int n_patients, int items_per_patient) {
    // alternating ratings so every multi-item patient carries both classes,
    // keeping balanced splits feasible for every seed
    std::vector<EvalItem> items;
    for (int p = 0; p < n_patients; ++p)
        for (int k = 0; k < items_per_patient; ++k) {
            EvalItem item;
            item.patient_id = "P" + std::to_string(p);
            item.item_id = item.patient_id + "_n" + std::to_string(k);
            item.rating = (p + k) % 2 == 0 ? 5 : 1;
            item.label = item.rating >= 4 ? 1 : 0;
            items.push_back(item);
        }
    return items;
}

// QIF-only experiment data with a class-separated informative feature.
ExperimentData synthetic_data(Rng& rng, int n_patients, int items_per_patient) {
    ExperimentData data;
    data.items = synthetic_cohort(n_patients, items_per_patient);
    for (const EvalItem& item : data.items) {
        std::vector<double> f(static_cast<std::size_t>(qif::kFeatureCount));
        for (auto& v : f) v = rng.uniform();
        // plant signal in a handful of features including sqrt_area (f04)
        const double shift = item.label == 1 ? 2.0 : 0.0;
        f[3] += shift + rng.normal(0.0, 0.3);
        f[21] += shift;
        f[42] += shift * 0.5;
        data.qif[item.item_id] = f;
    }
    return data;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("auc: perfect ranking, all ties, single-class error") {
    CHECK(auc({0.9, 0.8, 0.3, 0.2}, {1, 1, 0, 0}) == 1.0);
    CHECK(auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == 0.5);
    CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 1}), SingleClass);
}

TEST_CASE("auc matches the all-pairs oracle on 200 random instances") {
    Rng rng(1);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.uniform_int(499);
        random_instance(rng, n, trial % 2 == 0, scores, labels);
        CHECK(std::abs(auc(scores, labels) - auc_pair_oracle(scores, labels)) <= 1e-12);
    }
}

TEST_CASE("auc is invariant under strictly monotone transforms") {
    Rng rng(2);
    std::vector<double> scores;
    std::vector<int> labels;
    random_instance(rng, 200, true, scores, labels);
    const double base = auc(scores, labels);
    std::vector<double> affine(scores), expmap(scores);
    for (auto& s : affine) s = 3.0 * s + 7.0;
    for (auto& s : expmap) s = std::exp(s);
    CHECK(auc(affine, labels) == base);
    CHECK(auc(expmap, labels) == base);
}

TEST_CASE("auc complement identity for tie-free scores") {
    Rng rng(3);
    std::vector<double> scores;
    std::vector<int> labels;
    random_instance(rng, 101, false, scores, labels);
    std::vector<int> flipped(labels);
    for (auto& y : flipped) y = 1 - y;
    CHECK(auc(scores, labels) + auc(scores, flipped) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("roc endpoints and degenerate single score") {
    const auto pts = roc_points({0.9, 0.8, 0.3, 0.2}, {1, 1, 0, 0});
    CHECK(pts.front() == std::pair<double, double>{0.0, 0.0});
    CHECK(pts.back() == std::pair<double, double>{1.0, 1.0});
    bool through_0_1 = false;
    for (const auto& p : pts) through_0_1 = through_0_1 || (p.first == 0.0 && p.second == 1.0);
    CHECK(through_0_1);

    const auto degenerate = roc_points({0.4, 0.4, 0.4}, {1, 0, 1});
    REQUIRE(degenerate.size() == 2);
    CHECK(degenerate[0] == std::pair<double, double>{0.0, 0.0});
    CHECK(degenerate[1] == std::pair<double, double>{1.0, 1.0});
}

TEST_CASE("trapezoid area over roc points equals auc") {
    Rng rng(4);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.uniform_int(300);
        random_instance(rng, n, true, scores, labels);
        CHECK(std::abs(trapezoid_area(roc_points(scores, labels)) - auc(scores, labels)) <=
              1e-12);
    }
}

TEST_CASE("confusion at threshold") {
    const Confusion perfect = confusion_at({0.6, 0.4}, {1, 0});
    CHECK(perfect.acc == 1.0);
    CHECK(perfect.sens == 1.0);
    CHECK(perfect.spc == 1.0);

    // score exactly at the threshold counts positive
    const Confusion edge = confusion_at({0.5, 0.4}, {1, 0});
    CHECK(edge.sens == 1.0);

    const Confusion all_pos = confusion_at({0.9, 0.8}, {1, 0}, 0.5);
    CHECK(all_pos.sens == 1.0);
    CHECK(all_pos.spc == 0.0);
}

TEST_CASE("split_by_patient: fractions, grouping, balance") {
    Rng rng(5);
    const auto items = synthetic_cohort(10, 1);
    std::vector<std::size_t> train, val;
    split_by_patient(items, 0.8, false, 7, train, val);
    CHECK(train.size() == 8);
    CHECK(val.size() == 2);

    // items of one patient never span both sides
    const auto multi = synthetic_cohort(12, 3);
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        split_by_patient(multi, 0.8, false, seed, train, val);
        std::set<std::string> train_patients, val_patients;
        for (const std::size_t i : train) train_patients.insert(multi[i].patient_id);
        for (const std::size_t i : val) val_patients.insert(multi[i].patient_id);
        for (const auto& p : train_patients) CHECK(val_patients.count(p) == 0);
        CHECK(train.size() + val.size() == multi.size());
    }

    // balancing equalizes the class counts on each side
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        split_by_patient(multi, 0.8, true, seed, train, val);
        int tp = 0, tn = 0, vp = 0, vn = 0;
        for (const std::size_t i : train) (multi[i].label == 1 ? tp : tn)++;
        for (const std::size_t i : val) (multi[i].label == 1 ? vp : vn)++;
        CHECK(tp == tn);
        CHECK(vp == vn);
    }
}

TEST_CASE("split_by_patient rejects fewer than two patients") {
    Rng rng(6);
    const auto items = synthetic_cohort(1, 5);
    std::vector<std::size_t> train, val;
    CHECK_THROWS_AS(split_by_patient(items, 0.8, false, 1, train, val), TooFewPatients);
}

TEST_CASE("run_design on QIF-only models is deterministic and well-formed") {
    Rng rng(7);
    const ExperimentData data = synthetic_data(rng, 16, 3);
    RunOptions options;
    options.n_trees = 51;
    const EvalReport a = run_design(Design::S1vS45, {"rf", "lm"}, data, 42, options);
    const EvalReport b = run_design(Design::S1vS45, {"rf", "lm"}, data, 42, options);
    CHECK(a == b);
    REQUIRE(a.rows.size() == 2);
    CHECK(a.rows[0].model == "rf");
    CHECK(a.rows[1].model == "lm");
    for (const auto& row : a.rows) {
        CHECK(row.auc >= 0.0);
        CHECK(row.auc <= 1.0);
        CHECK(row.acc >= 0.0);
        CHECK(row.acc <= 1.0);
    }
    // the planted signal is strong enough to rank well
    CHECK(a.rows[0].auc > 0.8);
    CHECK(a.rows[1].auc > 0.8);

    const EvalReport c = run_design(Design::S1vS45, {"rf", "lm"}, data, 43, options);
    CHECK(!(a == c));
}

TEST_CASE("reduced-training protocols behave mechanically") {
    Rng rng(8);
    const ExperimentData data = synthetic_data(rng, 24, 2);
    RunOptions options;
    options.n_trees = 51;

    const ReducedResult t80 = run_reduced_training(Design::S1vS45, ReducedModel::rf,
                                                   ReducedMode::train80, data, 1, 5, options);
    CHECK(t80.per_trial.size() == 1);
    CHECK(t80.n_features_used == 50);
    CHECK(t80.mean_accuracy >= 0.0);
    CHECK(t80.mean_accuracy <= 1.0);

    const ReducedResult nosize = run_reduced_training(Design::S1vS45, ReducedModel::rf_no_size,
                                                      ReducedMode::train80, data, 1, 5, options);
    CHECK(nosize.n_features_used == 38);

    const ReducedResult lm = run_reduced_training(Design::S1vS45, ReducedModel::lm,
                                                  ReducedMode::train20, data, 1, 5, options);
    CHECK(lm.n_features_used == 1);

    const ReducedResult ones = run_reduced_training(Design::S1vS45, ReducedModel::rf,
                                                    ReducedMode::one_plus_one_minus, data, 25, 5,
                                                    options);
    CHECK(ones.per_trial.size() == 25);
    CHECK(ones.mean_accuracy > 0.5);  // planted signal learnable from 2 samples

    // threaded trials match single-threaded
    RunOptions threaded = options;
    threaded.threads = 3;
    const ReducedResult ones_mt = run_reduced_training(Design::S1vS45, ReducedModel::rf,
                                                       ReducedMode::one_plus_one_minus, data, 25,
                                                       5, threaded);
    CHECK(ones_mt.per_trial == ones.per_trial);
}

TEST_CASE("export_report writes metrics CSV and one SVG per model, byte-stable") {
    EvalReport report;
    report.design = "s1_vs_s45";
    report.seed = 9;
    report.threshold = 0.5;
    report.rows = {{"rf", 0.93, 0.88, 0.9, 0.86}, {"lm", 0.81, 0.7, 0.72, 0.68}};
    report.roc = {{"rf", {{0, 0}, {0.1, 0.8}, {1, 1}}}, {"lm", {{0, 0}, {0.4, 0.7}, {1, 1}}}};

    const auto dir = std::filesystem::temp_directory_path() / "ndk_export_test";
    std::filesystem::remove_all(dir);
    const auto files = export_report(report, dir);
    REQUIRE(files.size() == 3);  // CSV + 2 SVG
    CHECK(std::filesystem::exists(dir / "metrics.csv"));
    CHECK(std::filesystem::exists(dir / "roc_rf.svg"));
    CHECK(std::filesystem::exists(dir / "roc_lm.svg"));

    const auto read_bytes = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    const std::string csv1 = read_bytes(dir / "metrics.csv");
    export_report(report, dir);
    CHECK(read_bytes(dir / "metrics.csv") == csv1);
    CHECK(csv1.find("rf,s1_vs_s45,0.93,0.88,0.9,0.86,9") != std::string::npos);

    // empty model list gives a header-only CSV
    EvalReport empty;
    empty.design = "s1_vs_s45";
    const auto dir2 = std::filesystem::temp_directory_path() / "ndk_export_empty";
    std::filesystem::remove_all(dir2);
    export_report(empty, dir2);
    CHECK(read_bytes(dir2 / "metrics.csv") == "model,design,auc,acc,sens,spc,seed\n");
    std::filesystem::remove_all(dir);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("report JSON round-trips") {
    EvalReport report;
    report.design = "s12_vs_s45";
    report.seed = 77;
    report.threshold = 0.4;
    report.config_hash = "abc123";
    report.rows = {{"cnn21", 0.912345678901, 0.8, 0.75, 0.85}};
    report.roc = {{"cnn21", {{0, 0}, {0.25, 0.5}, {1, 1}}}};
    const EvalReport back = report_from_json(report_to_json(report));
    CHECK(back == report);
}

TEST_CASE("cohort and feature CSV round-trips") {
    std::vector<CohortRow> rows = {
        {"P0_n0", "P0", "none", "none", 4, {1.5, 2.25, 3.0}},
        {"P1_x0", "P1", "s0_vs_s1_5", "negative", 0, {10.0, 11.0, 4.0}},
    };
    const auto dir = std::filesystem::temp_directory_path() / "ndk_csv_test";
    std::filesystem::create_directories(dir);
    write_cohort_csv(rows, dir / "cohort.csv");
    const auto back = read_cohort_csv(dir / "cohort.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[0].item_id == "P0_n0");
    CHECK(back[0].rating == 4);
    CHECK(back[0].centroid == Vec3{1.5, 2.25, 3.0});
    CHECK(back[1].label == "negative");

    Rng rng(10);
    std::vector<std::pair<std::string, std::string>> ids = {{"a", "P0"}, {"b", "P1"}};
    std::vector<qif::FeatureVector> features(2);
    for (auto& f : features)
        for (int i = 0; i < qif::kFeatureCount; ++i)
            f[static_cast<std::size_t>(i)] = rng.uniform(-100.0, 100.0);
    write_features_csv(ids, features, dir / "features.csv");
    const auto fmap = read_features_csv(dir / "features.csv");
    REQUIRE(fmap.size() == 2);
    for (int i = 0; i < qif::kFeatureCount; ++i) {
        CHECK(fmap.at("a")[static_cast<std::size_t>(i)] ==
              features[0][static_cast<std::size_t>(i)]);
        CHECK(fmap.at("b")[static_cast<std::size_t>(i)] ==
              features[1][static_cast<std::size_t>(i)]);
    }
    std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
