#include "nodulekit/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "nodulekit/forest.hpp"
#include "nodulekit/logistic.hpp"
#include "nodulekit/rng.hpp"

namespace nodulekit {

namespace {

// shortest round-trip formatting, locale-independent
std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw IoError("bad numeric field '" + s + "'");
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

std::string sanitize_csv_field(const std::string& s) {
    if (s.find(',') != std::string::npos || s.find('\n') != std::string::npos)
        throw IoError("CSV field contains a separator: '" + s + "'");
    return s;
}

struct TrainedCnn {
    nn::NetworkModel model;
    nn::CheckpointSet checkpoints;
};

PatchSet subset_patches(const ExperimentData& data, const std::vector<EvalItem>& items,
                        const std::vector<std::size_t>& idx) {
    PatchSet out;
    out.design = data.patches.design;
    out.normalization = data.patches.normalization;
    for (const std::size_t i : idx) {
        const auto it = data.patch_index.find(items[i].item_id);
        if (it == data.patch_index.end())
            throw Error("no patch for item '" + items[i].item_id + "'");
        Patch p = data.patches.patches[it->second];
        p.label = items[i].label;
        out.patches.push_back(std::move(p));
    }
    return out;
}

const std::vector<double>& qif_for(const ExperimentData& data, const EvalItem& item) {
    const auto it = data.qif.find(item.item_id);
    if (it == data.qif.end()) throw Error("no QIF features for item '" + item.item_id + "'");
    if (it->second.size() != static_cast<std::size_t>(qif::kFeatureCount))
        throw LengthMismatch("QIF vector for '" + item.item_id + "' has " +
                             std::to_string(it->second.size()) + " entries");
    return it->second;
}

}  // namespace

std::optional<int> design_label(Design design, int rating, bool is_non_nodule) {
    switch (design) {
        case Design::S1vS45:
            if (is_non_nodule) return std::nullopt;
            if (rating == 1) return 0;
            if (rating >= 4) return 1;
            return std::nullopt;
        case Design::S12vS45:
            if (is_non_nodule) return std::nullopt;
            if (rating >= 1 && rating <= 2) return 0;
            if (rating >= 4) return 1;
            return std::nullopt;
        case Design::S0vS1_5:
            return is_non_nodule ? 0 : 1;
    }
    return std::nullopt;
}

void split_by_patient(const std::vector<EvalItem>& items, double train_fraction, bool balance,
                      std::uint64_t seed, std::vector<std::size_t>& train_out,
                      std::vector<std::size_t>& validation_out) {
    train_out.clear();
    validation_out.clear();

    // patients in first-appearance order
    std::vector<std::string> patients;
    std::map<std::string, std::vector<std::size_t>> by_patient;
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto& bucket = by_patient[items[i].patient_id];
        if (bucket.empty()) patients.push_back(items[i].patient_id);
        bucket.push_back(i);
    }
    if (patients.size() < 2)
        throw TooFewPatients("split_by_patient: need at least 2 patients, have " +
                             std::to_string(patients.size()));

    Rng rng(seed);
    rng.shuffle(patients);

    const double target = train_fraction * static_cast<double>(items.size());
    double train_count = 0.0;
    for (const std::string& patient : patients) {
        const auto& bucket = by_patient[patient];
        auto& side = train_count < target ? train_out : validation_out;
        if (&side == &train_out) train_count += static_cast<double>(bucket.size());
        side.insert(side.end(), bucket.begin(), bucket.end());
    }
    // a fraction that rounds to everything would leave validation empty; give
    // it the last patient
    if (validation_out.empty() && patients.size() >= 2) {
        const auto& bucket = by_patient[patients.back()];
        std::vector<std::size_t> keep;
        for (const std::size_t i : train_out)
            if (std::find(bucket.begin(), bucket.end(), i) == bucket.end()) keep.push_back(i);
        train_out = std::move(keep);
        validation_out = bucket;
    }
    std::sort(train_out.begin(), train_out.end());
    std::sort(validation_out.begin(), validation_out.end());

    if (!balance) return;
    const auto balance_side = [&](std::vector<std::size_t>& side, const char* tag) {
        std::vector<std::size_t> pos, neg;
        for (const std::size_t i : side) (items[i].label == 1 ? pos : neg).push_back(i);
        if (pos.empty() || neg.empty())
            throw EmptyClass(std::string("split_by_patient: ") + tag +
                             " side lost a class before balancing");
        auto& majority = pos.size() > neg.size() ? pos : neg;
        const std::size_t keep = std::min(pos.size(), neg.size());
        Rng side_rng(derive_seed(seed, tag));
        side_rng.shuffle(majority);
        majority.resize(keep);
        side.clear();
        side.insert(side.end(), pos.begin(), pos.end());
        side.insert(side.end(), neg.begin(), neg.end());
        std::sort(side.begin(), side.end());
    };
    balance_side(train_out, "balance_train");
    balance_side(validation_out, "balance_validation");
}

EvalReport run_design(Design design, const std::vector<std::string>& models,
                      const ExperimentData& data, std::uint64_t seed,
                      const RunOptions& options) {
    std::vector<EvalItem> labeled;
    for (const EvalItem& item : data.items) {
        const auto label = design_label(design, item.rating, item.rating == 0);
        if (!label) continue;
        EvalItem copy = item;
        copy.label = *label;
        labeled.push_back(copy);
    }
    if (labeled.empty()) throw EmptyClass("run_design: no eligible items for design");

    std::vector<std::size_t> train_idx, val_idx;
    split_by_patient(labeled, 0.8, options.balance, derive_seed(seed, "split"), train_idx,
                     val_idx);

    std::vector<int> val_labels;
    val_labels.reserve(val_idx.size());
    for (const std::size_t i : val_idx) val_labels.push_back(labeled[i].label);

    EvalReport report;
    report.design = design_name(design);
    report.seed = seed;
    report.threshold = options.threshold;
    report.config_hash = options.config_hash;

    // cnn21 and cnn21+rf share one trained network (same for cnn47)
    std::map<std::string, TrainedCnn> cnn_cache;
    const auto trained_cnn = [&](const std::string& arch_tag) -> TrainedCnn& {
        auto it = cnn_cache.find(arch_tag);
        if (it != cnn_cache.end()) return it->second;
        const nn::Arch arch = nn::arch_from_name(arch_tag);
        TrainedCnn trained{nn::build_network(arch, derive_seed(seed, arch_tag)), {}};
        nn::TrainConfig config = options.train;
        config.seed = derive_seed(seed, arch_tag + "_train");
        const PatchSet train_set = subset_patches(data, labeled, train_idx);
        trained.checkpoints = nn::train(trained.model, train_set, config);
        // evaluate the best snapshot by held-out loss
        if (!trained.checkpoints.best.empty())
            trained.model.set_parameters(trained.checkpoints.best.front().parameters);
        return cnn_cache.emplace(arch_tag, std::move(trained)).first->second;
    };

    for (const std::string& name : models) {
        std::vector<double> scores;
        if (name == "cnn21" || name == "cnn47") {
            TrainedCnn& trained = trained_cnn(name);
            const PatchSet val_set = subset_patches(data, labeled, val_idx);
            scores = nn::predict_proba(trained.model, val_set);
        } else if (name == "cnn21+rf" || name == "cnn47+rf") {
            const std::string arch_tag = name.substr(0, 5);
            TrainedCnn& trained = trained_cnn(arch_tag);
            const PatchSet train_set = subset_patches(data, labeled, train_idx);
            const PatchSet val_set = subset_patches(data, labeled, val_idx);
            const auto train_feats = nn::extract_cnn_features(trained.model, train_set);
            const auto val_feats = nn::extract_cnn_features(trained.model, val_set);

            std::vector<std::vector<double>> X;
            std::vector<int> y;
            for (std::size_t k = 0; k < train_idx.size(); ++k) {
                X.push_back(concat_features(train_feats[k], qif_for(data, labeled[train_idx[k]])));
                y.push_back(labeled[train_idx[k]].label);
            }
            const ForestModel forest = train_forest(X, y, options.n_trees,
                                                    derive_seed(seed, name), options.threads);
            for (std::size_t k = 0; k < val_idx.size(); ++k)
                scores.push_back(forest_proba(
                    forest, concat_features(val_feats[k], qif_for(data, labeled[val_idx[k]]))));
        } else if (name == "rf") {
            std::vector<std::vector<double>> X;
            std::vector<int> y;
            for (const std::size_t i : train_idx) {
                X.push_back(qif_for(data, labeled[i]));
                y.push_back(labeled[i].label);
            }
            const ForestModel forest = train_forest(X, y, options.n_trees,
                                                    derive_seed(seed, name), options.threads);
            for (const std::size_t i : val_idx)
                scores.push_back(forest_proba(forest, qif_for(data, labeled[i])));
        } else if (name == "lm") {
            const int fx = qif::sqrt_area_feature_index();
            std::vector<double> x;
            std::vector<int> y;
            for (const std::size_t i : train_idx) {
                x.push_back(qif_for(data, labeled[i])[static_cast<std::size_t>(fx)]);
                y.push_back(labeled[i].label);
            }
            const LogisticModel lm = fit_logistic(x, y);
            for (const std::size_t i : val_idx)
                scores.push_back(logistic_proba(
                    lm, qif_for(data, labeled[i])[static_cast<std::size_t>(fx)]));
        } else {
            throw Error("run_design: unknown model '" + name + "'");
        }

        ModelRow row;
        row.model = name;
        row.auc = auc(scores, val_labels);
        const Confusion c = confusion_at(scores, val_labels, options.threshold);
        row.acc = c.acc;
        row.sens = c.sens;
        row.spc = c.spc;
        report.rows.push_back(row);
        report.roc.emplace_back(name, roc_points(scores, val_labels));
    }
    return report;
}

ReducedModel reduced_model_from_name(const std::string& name) {
    if (name == "rf") return ReducedModel::rf;
    if (name == "rf_no_size") return ReducedModel::rf_no_size;
    if (name == "lm") return ReducedModel::lm;
    throw Error("unknown reduced-training model '" + name + "'");
}

const char* reduced_model_name(ReducedModel m) {
    switch (m) {
        case ReducedModel::rf: return "rf";
        case ReducedModel::rf_no_size: return "rf_no_size";
        case ReducedModel::lm: return "lm";
    }
    return "?";
}

ReducedMode reduced_mode_from_name(const std::string& name) {
    if (name == "train80") return ReducedMode::train80;
    if (name == "train20") return ReducedMode::train20;
    if (name == "one_plus_one_minus" || name == "1+1-") return ReducedMode::one_plus_one_minus;
    throw Error("unknown reduced-training mode '" + name + "'");
}

const char* reduced_mode_name(ReducedMode m) {
    switch (m) {
        case ReducedMode::train80: return "train80";
        case ReducedMode::train20: return "train20";
        case ReducedMode::one_plus_one_minus: return "one_plus_one_minus";
    }
    return "?";
}

ReducedResult run_reduced_training(Design design, ReducedModel model, ReducedMode mode,
                                   const ExperimentData& data, int trials, std::uint64_t seed,
                                   const RunOptions& options) {
    std::vector<EvalItem> labeled;
    std::vector<std::vector<double>> features;
    for (const EvalItem& item : data.items) {
        const auto label = design_label(design, item.rating, item.rating == 0);
        if (!label) continue;
        EvalItem copy = item;
        copy.label = *label;
        const std::vector<double>& qv = qif_for(data, item);
        switch (model) {
            case ReducedModel::rf: features.push_back(qv); break;
            case ReducedModel::rf_no_size: features.push_back(qif::strip_size_features(qv)); break;
            case ReducedModel::lm:
                features.push_back(
                    {qv[static_cast<std::size_t>(qif::sqrt_area_feature_index())]});
                break;
        }
        labeled.push_back(copy);
    }
    if (labeled.empty()) throw EmptyClass("run_reduced_training: no eligible items");

    const auto fit_and_score = [&](const std::vector<std::size_t>& train_idx,
                                   const std::vector<std::size_t>& test_idx,
                                   std::uint64_t fit_seed) {
        std::vector<int> test_labels;
        std::vector<double> scores;
        for (const std::size_t i : test_idx) test_labels.push_back(labeled[i].label);
        if (model == ReducedModel::lm) {
            std::vector<double> x;
            std::vector<int> y;
            for (const std::size_t i : train_idx) {
                x.push_back(features[i][0]);
                y.push_back(labeled[i].label);
            }
            const LogisticModel lm = fit_logistic(x, y);
            for (const std::size_t i : test_idx)
                scores.push_back(logistic_proba(lm, features[i][0]));
        } else {
            std::vector<std::vector<double>> X;
            std::vector<int> y;
            for (const std::size_t i : train_idx) {
                X.push_back(features[i]);
                y.push_back(labeled[i].label);
            }
            const ForestModel forest = train_forest(X, y, options.n_trees, fit_seed, 1);
            for (const std::size_t i : test_idx)
                scores.push_back(forest_proba(forest, features[i]));
        }
        return confusion_at(scores, test_labels, options.threshold).acc;
    };

    ReducedResult result;
    result.design = design;
    result.model = model;
    result.mode = mode;
    result.n_features_used = static_cast<int>(features[0].size());

    if (mode == ReducedMode::train80 || mode == ReducedMode::train20) {
        const double fraction = mode == ReducedMode::train80 ? 0.8 : 0.2;
        std::vector<std::size_t> train_idx, test_idx;
        split_by_patient(labeled, fraction, false, derive_seed(seed, "split"), train_idx,
                         test_idx);
        result.per_trial.push_back(fit_and_score(train_idx, test_idx, derive_seed(seed, "fit")));
        result.mean_accuracy = result.per_trial[0];
        return result;
    }

    // one positive and one negative item at random per trial, tested on the rest
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labeled.size(); ++i)
        (labeled[i].label == 1 ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty()) throw EmptyClass("run_reduced_training: missing a class");

    result.per_trial.assign(static_cast<std::size_t>(trials), 0.0);
    const auto run_trial = [&](int t) {
        Rng rng(derive_seed(seed, "trial", static_cast<std::uint64_t>(t)));
        const std::size_t p = pos[static_cast<std::size_t>(rng.uniform_int(pos.size()))];
        const std::size_t n = neg[static_cast<std::size_t>(rng.uniform_int(neg.size()))];
        std::vector<std::size_t> train_idx{p, n};
        std::vector<std::size_t> test_idx;
        for (std::size_t i = 0; i < labeled.size(); ++i)
            if (i != p && i != n) test_idx.push_back(i);
        result.per_trial[static_cast<std::size_t>(t)] =
            fit_and_score(train_idx, test_idx, derive_seed(seed, "trial_fit",
                                                           static_cast<std::uint64_t>(t)));
    };

    if (options.threads <= 1) {
        for (int t = 0; t < trials; ++t) run_trial(t);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (trials + options.threads - 1) / options.threads;
        for (int w = 0; w < options.threads; ++w) {
            const int from = w * chunk, to = std::min(trials, from + chunk);
            if (from < to)
                pool.emplace_back([&, from, to] { for (int t = from; t < to; ++t) run_trial(t); });
        }
        for (auto& th : pool) th.join();
    }

    double mean = 0.0;
    for (const double a : result.per_trial) mean += a;
    result.mean_accuracy = mean / static_cast<double>(trials);
    return result;
}

// ---------------------------------------------------------------------------
// report output

namespace {

std::string svg_for_roc(const std::string& model, double auc_value,
                        const std::vector<std::pair<double, double>>& points) {
    // plot area: x 60..440, y 20..400 (y axis flipped)
    const auto px = [](double v) { return 60.0 + 380.0 * v; };
    const auto py = [](double v) { return 400.0 - 380.0 * v; };
    char buf[128];
    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" "
           "viewBox=\"0 0 480 480\">\n";
    svg += "<rect x=\"60\" y=\"20\" width=\"380\" height=\"380\" fill=\"none\" "
           "stroke=\"black\"/>\n";
    svg += "<line x1=\"60\" y1=\"400\" x2=\"440\" y2=\"20\" stroke=\"#bbbbbb\" "
           "stroke-dasharray=\"4 4\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = i * 0.25;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.2f\" y=\"416\" font-size=\"12\" text-anchor=\"middle\">%.2f"
                      "</text>\n", px(v), v);
        svg += buf;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"52\" y=\"%.2f\" font-size=\"12\" text-anchor=\"end\">%.2f"
                      "</text>\n", py(v) + 4.0, v);
        svg += buf;
    }
    svg += "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%s%.3f,%.3f", i ? " " : "", px(points[i].first),
                      py(points[i].second));
        svg += buf;
    }
    svg += "\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<text x=\"250\" y=\"444\" font-size=\"14\" text-anchor=\"middle\">"
                  "False positive rate</text>\n");
    svg += buf;
    svg += "<text x=\"16\" y=\"210\" font-size=\"14\" text-anchor=\"middle\" "
           "transform=\"rotate(-90 16 210)\">True positive rate</text>\n";
    std::snprintf(buf, sizeof buf,
                  "<text x=\"250\" y=\"14\" font-size=\"14\" text-anchor=\"middle\">%s "
                  "(AUC=%.3f)</text>\n", model.c_str(), auc_value);
    svg += buf;
    svg += "</svg>\n";
    return svg;
}

}  // namespace

std::vector<std::filesystem::path> export_report(const EvalReport& report,
                                                 const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;

    const auto csv_path = out_dir / "metrics.csv";
    {
        std::ofstream out(csv_path, std::ios::trunc);
        if (!out) throw IoError("cannot write " + csv_path.string());
        out << "model,design,auc,acc,sens,spc,seed\n";
        for (const ModelRow& row : report.rows)
            out << sanitize_csv_field(row.model) << ',' << report.design << ',' << fmt(row.auc)
                << ',' << fmt(row.acc) << ',' << fmt(row.sens) << ',' << fmt(row.spc) << ','
                << report.seed << "\n";
    }
    written.push_back(csv_path);

    for (const auto& [model, points] : report.roc) {
        double auc_value = 0.0;
        for (const ModelRow& row : report.rows)
            if (row.model == model) auc_value = row.auc;
        const auto svg_path = out_dir / ("roc_" + model + ".svg");
        std::ofstream out(svg_path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + svg_path.string());
        out << svg_for_roc(model, auc_value, points);
        written.push_back(svg_path);
    }
    return written;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const ModelRow& r : report.rows)
        rows.push_back({{"model", r.model},
                        {"auc", r.auc},
                        {"acc", r.acc},
                        {"sens", r.sens},
                        {"spc", r.spc}});
    nlohmann::json roc = nlohmann::json::array();
    for (const auto& [model, points] : report.roc) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& [fpr, tpr] : points) pts.push_back({fpr, tpr});
        roc.push_back({{"model", model}, {"points", pts}});
    }
    const nlohmann::json body = {{"design", report.design},
                                 {"seed", report.seed},
                                 {"threshold", report.threshold},
                                 {"config_hash", report.config_hash},
                                 {"rows", rows},
                                 {"roc", roc}};
    return body.dump(2);
}

EvalReport report_from_json(const std::string& json_text) {
    EvalReport report;
    try {
        const nlohmann::json body = nlohmann::json::parse(json_text);
        report.design = body.at("design").get<std::string>();
        report.seed = body.at("seed").get<std::uint64_t>();
        report.threshold = body.at("threshold").get<double>();
        report.config_hash = body.value("config_hash", std::string());
        for (const auto& r : body.at("rows"))
            report.rows.push_back({r.at("model").get<std::string>(), r.at("auc").get<double>(),
                                   r.at("acc").get<double>(), r.at("sens").get<double>(),
                                   r.at("spc").get<double>()});
        for (const auto& m : body.at("roc")) {
            std::vector<std::pair<double, double>> points;
            for (const auto& p : m.at("points"))
                points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
            report.roc.emplace_back(m.at("model").get<std::string>(), std::move(points));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad report JSON: ") + e.what());
    }
    return report;
}

// ---------------------------------------------------------------------------
// CSV interfaces

void write_cohort_csv(const std::vector<CohortRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "nodule_uid,patient_id,design,label,rating,centroid_x,centroid_y,centroid_z\n";
    for (const CohortRow& r : rows)
        out << sanitize_csv_field(r.item_id) << ',' << sanitize_csv_field(r.patient_id) << ','
            << r.design << ',' << r.label << ',' << r.rating << ',' << fmt(r.centroid.x) << ','
            << fmt(r.centroid.y) << ',' << fmt(r.centroid.z) << "\n";
}

std::vector<CohortRow> read_cohort_csv(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || split_csv_line(lines[0])[0] != "nodule_uid")
        throw IoError("not a cohort manifest: " + path.string());
    std::vector<CohortRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split_csv_line(lines[i]);
        if (f.size() != 8) throw IoError("bad cohort row: " + lines[i]);
        CohortRow row;
        row.item_id = f[0];
        row.patient_id = f[1];
        row.design = f[2];
        row.label = f[3];
        row.rating = static_cast<int>(parse_double(f[4]));
        row.centroid = {parse_double(f[5]), parse_double(f[6]), parse_double(f[7])};
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_features_csv(const std::vector<std::pair<std::string, std::string>>& ids,
                        const std::vector<qif::FeatureVector>& features,
                        const std::filesystem::path& path) {
    if (ids.size() != features.size())
        throw LengthMismatch("write_features_csv: ids/features size mismatch");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "item_id,patient_id";
    char col[8];
    for (int i = 1; i <= qif::kFeatureCount; ++i) {
        std::snprintf(col, sizeof col, ",f%02d", i);
        out << col;
    }
    out << "\n";
    for (std::size_t r = 0; r < ids.size(); ++r) {
        out << sanitize_csv_field(ids[r].first) << ',' << sanitize_csv_field(ids[r].second);
        for (int i = 0; i < qif::kFeatureCount; ++i)
            out << ',' << fmt(features[r][static_cast<std::size_t>(i)]);
        out << "\n";
    }
}

void write_feature_registry_sidecar(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "index,name,unit,is_size_measure\n";
    const auto& reg = qif::feature_registry();
    char col[8];
    for (int i = 0; i < qif::kFeatureCount; ++i) {
        std::snprintf(col, sizeof col, "f%02d", i + 1);
        out << col << ',' << reg[static_cast<std::size_t>(i)].name << ','
            << reg[static_cast<std::size_t>(i)].unit << ','
            << (reg[static_cast<std::size_t>(i)].is_size_measure ? 1 : 0) << "\n";
    }
}

std::map<std::string, std::vector<double>> read_features_csv(
    const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || split_csv_line(lines[0])[0] != "item_id")
        throw IoError("not a feature CSV: " + path.string());
    std::map<std::string, std::vector<double>> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split_csv_line(lines[i]);
        if (f.size() != 2 + static_cast<std::size_t>(qif::kFeatureCount))
            throw IoError("bad feature row: " + lines[i]);
        std::vector<double> values;
        values.reserve(static_cast<std::size_t>(qif::kFeatureCount));
        for (std::size_t c = 2; c < f.size(); ++c) values.push_back(parse_double(f[c]));
        out.emplace(f[0], std::move(values));
    }
    return out;
}

void write_cnn_features_csv(const std::vector<std::string>& ids,
                            const std::vector<std::vector<double>>& features,
                            const std::filesystem::path& path) {
    if (ids.size() != features.size())
        throw LengthMismatch("write_cnn_features_csv: ids/features size mismatch");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "item_id";
    char col[8];
    for (int i = 1; i <= 200; ++i) {
        std::snprintf(col, sizeof col, ",c%03d", i);
        out << col;
    }
    out << "\n";
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (features[r].size() != 200)
            throw LengthMismatch("write_cnn_features_csv: feature vector must have 200 entries");
        out << sanitize_csv_field(ids[r]);
        for (const double v : features[r]) out << ',' << fmt(v);
        out << "\n";
    }
}

std::map<std::string, std::vector<double>> read_cnn_features_csv(
    const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || split_csv_line(lines[0])[0] != "item_id")
        throw IoError("not a CNN feature CSV: " + path.string());
    std::map<std::string, std::vector<double>> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split_csv_line(lines[i]);
        if (f.size() != 201) throw IoError("bad CNN feature row: " + lines[i]);
        std::vector<double> values;
        values.reserve(200);
        for (std::size_t c = 1; c < f.size(); ++c) values.push_back(parse_double(f[c]));
        out.emplace(f[0], std::move(values));
    }
    return out;
}

}  // namespace nodulekit
