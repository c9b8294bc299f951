// nodulekit command-line interface: phantom generation, ingestion checks,
// consensus building, patch/QIF extraction, CNN and forest training, and the
// evaluation harness. All randomness flows from --seed through named
// sub-seeds; --threads 1 is the bit-deterministic reference path.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nodulekit/consensus.hpp"
#include "nodulekit/experiment.hpp"
#include "nodulekit/forest.hpp"
#include "nodulekit/logistic.hpp"
#include "nodulekit/nn_train.hpp"
#include "nodulekit/phantom.hpp"
#include "nodulekit/qif.hpp"
#include "nodulekit/rawct.hpp"
#include "nodulekit/rng.hpp"
#include "nodulekit/version.hpp"

namespace fs = std::filesystem;
using namespace nodulekit;

namespace {

// ---------------------------------------------------------------------------
// config file + run manifest plumbing

struct RunContext {
    std::string command;
    nlohmann::json config_file;      // from --config, or an empty object
    nlohmann::json resolved = nlohmann::json::object();
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
    std::uint64_t seed = 0;
};

nlohmann::json load_config(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad config JSON: ") + e.what());
    }
}

// flag > config file > built-in default
template <typename T>
T resolve(RunContext& ctx, const std::optional<T>& flag, const char* key, T fallback) {
    T value = fallback;
    if (ctx.config_file.contains(key)) value = ctx.config_file.at(key).get<T>();
    if (flag.has_value()) value = *flag;
    ctx.resolved[key] = value;
    return value;
}

std::uint64_t hash_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_run_manifest(const RunContext& ctx, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    nlohmann::json input_hashes = nlohmann::json::object();
    for (const fs::path& p : ctx.inputs)
        if (fs::is_regular_file(p)) input_hashes[p.string()] = hex64(hash_file(p));
    nlohmann::json outputs = nlohmann::json::array();
    for (const fs::path& p : ctx.outputs) outputs.push_back(p.string());
    const nlohmann::json manifest = {{"command", ctx.command},
                                     {"config", ctx.resolved},
                                     {"input_hashes", input_hashes},
                                     {"outputs", outputs},
                                     {"seed", ctx.seed},
                                     {"tool_version", kVersion}};
    const fs::path final_path = out_dir / "run_manifest.json";
    const fs::path tmp_path = out_dir / "run_manifest.json.tmp";
    {
        std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp_path.string());
        out << manifest.dump(2) << "\n";
    }
    fs::rename(tmp_path, final_path);
}

// ---------------------------------------------------------------------------
// shared loading helpers

struct Study {
    fs::path rawct;
    fs::path xml;
};

std::vector<Study> scan_studies(const fs::path& in_dir) {
    if (!fs::is_directory(in_dir)) throw IoError(in_dir.string() + " is not a directory");
    std::vector<Study> studies;
    for (const auto& entry : fs::directory_iterator(in_dir))
        if (entry.path().extension() == ".rawct") {
            Study s;
            s.rawct = entry.path();
            s.xml = entry.path();
            s.xml.replace_extension(".xml");
            if (!fs::exists(s.xml))
                throw IoError("no annotation file for " + s.rawct.string());
            studies.push_back(s);
        }
    std::sort(studies.begin(), studies.end(),
              [](const Study& a, const Study& b) { return a.rawct < b.rawct; });
    if (studies.empty()) throw IoError("no .rawct studies in " + in_dir.string());
    return studies;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

int label_from_string(const std::string& label) {
    if (label == "positive") return 1;
    if (label == "negative") return 0;
    return 0;
}

ExperimentData load_experiment_data(const fs::path& cohort_csv,
                                    const std::optional<fs::path>& patches_path,
                                    const std::optional<fs::path>& qif_path) {
    ExperimentData data;
    for (const CohortRow& row : read_cohort_csv(cohort_csv)) {
        EvalItem item;
        item.item_id = row.item_id;
        item.patient_id = row.patient_id;
        item.rating = row.rating;
        item.label = label_from_string(row.label);
        data.items.push_back(std::move(item));
    }
    if (patches_path) {
        data.patches = read_container(*patches_path);
        for (std::size_t i = 0; i < data.patches.patches.size(); ++i)
            data.patch_index[data.patches.patches[i].item_id] = i;
    }
    if (qif_path) data.qif = read_features_csv(*qif_path);
    return data;
}

nn::TrainConfig resolve_train_config(RunContext& ctx, const std::optional<int>& epochs,
                                     const std::optional<int>& batch,
                                     const std::optional<double>& lr,
                                     const std::optional<double>& momentum,
                                     const std::optional<std::string>& augment) {
    nn::TrainConfig config;
    config.epochs = resolve(ctx, epochs, "epochs", config.epochs);
    config.batch_size = resolve(ctx, batch, "batch_size", config.batch_size);
    config.learning_rate = resolve(ctx, lr, "learning_rate", config.learning_rate);
    config.momentum = resolve(ctx, momentum, "momentum", config.momentum);
    config.augment = resolve(ctx, augment, "augment", std::string("on")) == "on";
    return config;
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(csv);
    while (std::getline(in, item, ',')) out.push_back(item);
    return out;
}

// ---------------------------------------------------------------------------
// subcommand bodies (each returns the out dir used for the run manifest)

struct CommonFlags {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string config_path;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--seed", flags.seed, "global random seed (default 0)");
    cmd->add_option("--threads", flags.threads, "worker threads; 1 is the reference path");
    cmd->add_option("--config", flags.config_path, "JSON config file with option defaults");
}

RunContext make_context(const CommonFlags& flags, int argc, char** argv) {
    RunContext ctx;
    for (int i = 0; i < argc; ++i) {
        if (i) ctx.command += ' ';
        ctx.command += argv[i];
    }
    ctx.config_file = load_config(flags.config_path);
    return ctx;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lung-nodule malignancy pipeline (phantom data, CNN, QIF, forest fusion)"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // phantom gen ------------------------------------------------------------
    auto* phantom_cmd = app.add_subcommand("phantom", "synthetic study generation");
    auto* phantom_gen = phantom_cmd->add_subcommand("gen", "generate a phantom dataset");
    CommonFlags pg_common;
    std::optional<int> pg_patients, pg_per_class, pg_non_nodules, pg_readers;
    std::optional<double> pg_noise;
    std::vector<int> pg_dims_raw;
    std::vector<double> pg_spacing_raw;
    std::string pg_out;
    phantom_gen->add_option("--patients", pg_patients, "number of patients");
    phantom_gen->add_option("--nodules-per-class", pg_per_class,
                            "benign-like and malignant-like nodules per patient");
    phantom_gen->add_option("--non-nodules", pg_non_nodules, "vessel loci per patient");
    phantom_gen->add_option("--readers", pg_readers, "reading sessions per study (1-4)");
    phantom_gen->add_option("--noise", pg_noise, "Gaussian noise sigma in HU");
    phantom_gen->add_option("--dims", pg_dims_raw, "volume dims nx,ny,nz")->delimiter(',');
    phantom_gen->add_option("--spacing", pg_spacing_raw, "voxel spacing mm sx,sy,sz")
        ->delimiter(',');
    phantom_gen->add_option("--out", pg_out, "output directory")->required();
    add_common(phantom_gen, pg_common);

    // ingest check -----------------------------------------------------------
    auto* ingest_cmd = app.add_subcommand("ingest", "raw study ingestion");
    auto* ingest_check = ingest_cmd->add_subcommand("check", "parse and validate studies");
    CommonFlags ic_common;
    std::string ic_in, ic_out;
    ingest_check->add_option("--in", ic_in, "directory of .rawct/.xml studies")->required();
    ingest_check->add_option("--out", ic_out, "output directory for the check report")
        ->required();
    add_common(ingest_check, ic_common);

    // consensus build ----------------------------------------------------------
    auto* consensus_cmd = app.add_subcommand("consensus", "multi-reader consensus");
    auto* consensus_build = consensus_cmd->add_subcommand("build", "build the cohort manifest");
    CommonFlags cb_common;
    std::string cb_in, cb_out;
    std::optional<std::string> cb_design, cb_balance;
    bool cb_include_non_nodules = false;
    consensus_build->add_option("--in", cb_in, "directory of studies")->required();
    consensus_build->add_option("--design", cb_design,
                                "label rule: s1_vs_s45, s12_vs_s45, s0_vs_s1_5");
    consensus_build->add_option("--balance", cb_balance, "on|off majority undersampling");
    consensus_build->add_flag("--include-non-nodules", cb_include_non_nodules,
                              "list non-nodule loci when no design is given");
    consensus_build->add_option("--out", cb_out, "output directory")->required();
    add_common(consensus_build, cb_common);

    // patches extract ----------------------------------------------------------
    auto* patches_cmd = app.add_subcommand("patches", "CNN input patches");
    auto* patches_extract = patches_cmd->add_subcommand("extract", "extract an NDX1 container");
    CommonFlags px_common;
    std::string px_in, px_cohort, px_out;
    std::optional<std::string> px_arch, px_norm;
    patches_extract->add_option("--in", px_in, "directory of studies")->required();
    patches_extract->add_option("--cohort", px_cohort, "cohort manifest CSV")->required();
    patches_extract->add_option("--arch", px_arch, "cnn21 (21x21x5) or cnn47 (47x47x5)");
    patches_extract->add_option("--normalization", px_norm, "hu_window or scan_minmax");
    patches_extract->add_option("--out", px_out, "output .ndx1 path")->required();
    add_common(patches_extract, px_common);

    // qif extract ---------------------------------------------------------------
    auto* qif_cmd = app.add_subcommand("qif", "quantitative image features");
    auto* qif_extract = qif_cmd->add_subcommand("extract", "compute the 50-feature vectors");
    CommonFlags qx_common;
    std::string qx_in, qx_cohort, qx_out;
    qif_extract->add_option("--in", qx_in, "directory of studies")->required();
    qif_extract->add_option("--cohort", qx_cohort, "cohort manifest CSV")->required();
    qif_extract->add_option("--out", qx_out, "output directory")->required();
    add_common(qif_extract, qx_common);

    // cnn train / features --------------------------------------------------------
    auto* cnn_cmd = app.add_subcommand("cnn", "convolutional network");
    auto* cnn_train = cnn_cmd->add_subcommand("train", "train on an NDX1 container");
    CommonFlags ct_common;
    std::string ct_patches, ct_out;
    std::optional<std::string> ct_arch, ct_augment;
    std::optional<int> ct_epochs, ct_batch;
    std::optional<double> ct_lr, ct_momentum;
    cnn_train->add_option("--patches", ct_patches, "training NDX1 container")->required();
    cnn_train->add_option("--arch", ct_arch, "cnn21 or cnn47");
    cnn_train->add_option("--epochs", ct_epochs, "training epochs (default 300)");
    cnn_train->add_option("--batch", ct_batch, "minibatch size (default 64)");
    cnn_train->add_option("--lr", ct_lr, "learning rate (default 1e-3)");
    cnn_train->add_option("--momentum", ct_momentum, "SGD momentum (default 0.9)");
    cnn_train->add_option("--augment", ct_augment, "on|off training augmentation");
    cnn_train->add_option("--out", ct_out, "output directory")->required();
    add_common(cnn_train, ct_common);

    auto* cnn_features = cnn_cmd->add_subcommand("features", "penultimate 200-vectors");
    CommonFlags cf_common;
    std::string cf_patches, cf_weights, cf_out;
    cnn_features->add_option("--patches", cf_patches, "NDX1 container")->required();
    cnn_features->add_option("--weights", cf_weights, "NDXW checkpoint")->required();
    cnn_features->add_option("--out", cf_out, "output directory")->required();
    add_common(cnn_features, cf_common);

    // fuse train-rf --------------------------------------------------------------
    auto* fuse_cmd = app.add_subcommand("fuse", "CNN+QIF fusion");
    auto* fuse_train = fuse_cmd->add_subcommand("train-rf", "train the fused random forest");
    CommonFlags ft_common;
    std::string ft_cnn, ft_qif, ft_cohort, ft_out;
    std::optional<std::string> ft_design;
    std::optional<int> ft_trees;
    fuse_train->add_option("--cnn-features", ft_cnn, "CNN feature CSV")->required();
    fuse_train->add_option("--qif", ft_qif, "QIF feature CSV")->required();
    fuse_train->add_option("--cohort", ft_cohort, "cohort manifest CSV")->required();
    fuse_train->add_option("--design", ft_design, "label rule for training");
    fuse_train->add_option("--trees", ft_trees, "forest size (default 1000)");
    fuse_train->add_option("--out", ft_out, "output directory")->required();
    add_common(fuse_train, ft_common);

    // eval run / reduced ------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "experiment runners");
    auto* eval_run = eval_cmd->add_subcommand("run", "train and evaluate a model set");
    CommonFlags er_common;
    std::string er_out;
    std::optional<std::string> er_cohort, er_patches, er_qif;
    std::optional<std::string> er_design, er_models, er_balance, er_augment;
    std::optional<double> er_threshold, er_lr, er_momentum;
    std::optional<int> er_epochs, er_batch, er_trees;
    eval_run->add_option("--cohort", er_cohort, "cohort manifest CSV");
    eval_run->add_option("--patches", er_patches, "NDX1 container (CNN models)");
    eval_run->add_option("--qif", er_qif, "QIF feature CSV (rf/lm/+rf models)");
    eval_run->add_option("--design", er_design, "dataset design");
    eval_run->add_option("--models", er_models,
                         "comma list from cnn21,cnn47,cnn21+rf,cnn47+rf,rf,lm");
    eval_run->add_option("--threshold", er_threshold, "classification threshold (default 0.5)");
    eval_run->add_option("--balance", er_balance, "on|off per-side class balancing");
    eval_run->add_option("--trees", er_trees, "forest size (default 1000)");
    eval_run->add_option("--epochs", er_epochs, "CNN epochs override");
    eval_run->add_option("--batch", er_batch, "CNN batch size override");
    eval_run->add_option("--lr", er_lr, "CNN learning rate override");
    eval_run->add_option("--momentum", er_momentum, "CNN momentum override");
    eval_run->add_option("--augment", er_augment, "on|off CNN augmentation");
    eval_run->add_option("--out", er_out, "output directory")->required();
    add_common(eval_run, er_common);

    auto* eval_reduced = eval_cmd->add_subcommand("reduced", "reduced-training protocols");
    CommonFlags ed_common;
    std::string ed_cohort, ed_qif, ed_out;
    std::optional<std::string> ed_design, ed_model, ed_mode;
    std::optional<int> ed_trials, ed_trees;
    std::optional<double> ed_threshold;
    eval_reduced->add_option("--cohort", ed_cohort, "cohort manifest CSV")->required();
    eval_reduced->add_option("--qif", ed_qif, "QIF feature CSV")->required();
    eval_reduced->add_option("--design", ed_design, "dataset design");
    eval_reduced->add_option("--model", ed_model, "rf, rf_no_size, or lm");
    eval_reduced->add_option("--mode", ed_mode, "train80, train20, or one_plus_one_minus");
    eval_reduced->add_option("--trials", ed_trials, "trial count for 1+/1- (default 200)");
    eval_reduced->add_option("--trees", ed_trees, "forest size (default 1000)");
    eval_reduced->add_option("--threshold", ed_threshold, "classification threshold");
    eval_reduced->add_option("--out", ed_out, "output directory")->required();
    add_common(eval_reduced, ed_common);

    // report export ------------------------------------------------------------------
    auto* report_cmd = app.add_subcommand("report", "report rendering");
    auto* report_export = report_cmd->add_subcommand("export", "metrics CSV + ROC SVGs");
    CommonFlags re_common;
    std::string re_report, re_out;
    report_export->add_option("--report", re_report, "report JSON from eval run")->required();
    report_export->add_option("--out", re_out, "output directory")->required();
    add_common(report_export, re_common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 1;
    }

    try {
        // ---- phantom gen ----
        if (phantom_gen->parsed()) {
            RunContext ctx = make_context(pg_common, argc, argv);
            phantom::PhantomConfig config;
            config.n_patients = resolve(ctx, pg_patients, "patients", 10);
            config.nodules_per_class = resolve(ctx, pg_per_class, "nodules_per_class", 1);
            config.non_nodules_per_patient = resolve(ctx, pg_non_nodules, "non_nodules", 2);
            config.readers = resolve(ctx, pg_readers, "readers", 4);
            config.noise_sigma = resolve(ctx, pg_noise, "noise_sigma", 30.0);
            const std::optional<std::vector<int>> pg_dims =
                pg_dims_raw.empty() ? std::nullopt : std::optional(pg_dims_raw);
            const std::optional<std::vector<double>> pg_spacing =
                pg_spacing_raw.empty() ? std::nullopt : std::optional(pg_spacing_raw);
            const auto dims = resolve(ctx, pg_dims, "dims", std::vector<int>{128, 128, 32});
            const auto spacing =
                resolve(ctx, pg_spacing, "spacing_mm", std::vector<double>{0.7, 0.7, 2.5});
            if (dims.size() != 3 || spacing.size() != 3)
                throw Error("phantom gen: --dims and --spacing need three values");
            config.dims = {dims[0], dims[1], dims[2]};
            config.spacing = {spacing[0], spacing[1], spacing[2]};
            config.seed = ctx.seed = resolve(ctx, pg_common.seed, "seed", std::uint64_t{0});
            const int threads = resolve(ctx, pg_common.threads, "threads", 1);

            const auto manifest = phantom::generate_phantom(config, pg_out, threads);
            for (const auto& f : manifest.rawct_files) ctx.outputs.push_back(fs::path(pg_out) / f);
            for (const auto& f : manifest.xml_files) ctx.outputs.push_back(fs::path(pg_out) / f);
            ctx.outputs.push_back(fs::path(pg_out) / "manifest.json");
            write_run_manifest(ctx, pg_out);
            std::cout << "phantom: wrote " << manifest.rawct_files.size() << " studies, "
                      << manifest.nodules.size() << " nodules, " << manifest.loci.size()
                      << " non-nodule loci to " << pg_out << "\n";
        }

        // ---- ingest check ----
        if (ingest_check->parsed()) {
            RunContext ctx = make_context(ic_common, argc, argv);
            ctx.seed = resolve(ctx, ic_common.seed, "seed", std::uint64_t{0});
            const auto studies = scan_studies(ic_in);
            fs::create_directories(ic_out);
            const fs::path report_path = fs::path(ic_out) / "ingest_check.txt";
            std::ofstream report(report_path, std::ios::trunc);
            std::size_t warnings = 0, problems = 0;
            for (const Study& s : studies) {
                ctx.inputs.push_back(s.rawct);
                ctx.inputs.push_back(s.xml);
                const CTVolume vol = parse_volume(s.rawct);
                const AnnotationSet set = parse_annotations(read_text(s.xml));
                const auto bounds = validate_bounds(set, vol.dims);
                std::size_t readings = 0;
                for (const auto& session : set.sessions) readings += session.nodules.size();
                report << vol.patient_id << ": dims " << vol.dims.nx << "x" << vol.dims.ny
                       << "x" << vol.dims.nz << ", sessions " << set.sessions.size()
                       << ", readings " << readings << "\n";
                for (const auto& w : set.warnings) {
                    report << "  warning: " << w << "\n";
                    ++warnings;
                }
                for (const auto& b : bounds) {
                    report << "  bounds: " << b << "\n";
                    ++problems;
                }
            }
            report << "studies " << studies.size() << ", warnings " << warnings
                   << ", bounds problems " << problems << "\n";
            report.close();
            ctx.outputs.push_back(report_path);
            write_run_manifest(ctx, ic_out);
            std::cout << "ingest check: " << studies.size() << " studies, " << warnings
                      << " warnings, " << problems << " bounds problems\n";
            if (problems > 0) return 2;
        }

        // ---- consensus build ----
        if (consensus_build->parsed()) {
            RunContext ctx = make_context(cb_common, argc, argv);
            ctx.seed = resolve(ctx, cb_common.seed, "seed", std::uint64_t{0});
            const std::string design_str = resolve(ctx, cb_design, "design", std::string("none"));
            const bool balance =
                resolve(ctx, cb_balance, "balance", std::string("off")) == "on";

            // consensus is per patient, but labelling and balancing apply to
            // the whole cohort at once
            std::vector<ConsensusNodule> all_nodules;
            std::vector<NonNoduleLocus> all_loci;
            for (const Study& s : scan_studies(cb_in)) {
                ctx.inputs.push_back(s.rawct);
                ctx.inputs.push_back(s.xml);
                const CTVolume vol = parse_volume(s.rawct);
                const AnnotationSet set = parse_annotations(read_text(s.xml));
                for (auto& n : build_consensus(set, vol.dims))
                    all_nodules.push_back(std::move(n));
                for (auto& l : collect_non_nodules(set)) all_loci.push_back(std::move(l));
            }

            std::vector<CohortRow> rows;
            if (design_str == "none") {
                for (const auto& n : all_nodules)
                    rows.push_back({n.nodule_uid, n.patient_id, "none", "none", n.rating,
                                    n.centroid});
                if (cb_include_non_nodules)
                    for (const auto& l : all_loci)
                        rows.push_back({l.locus_id, l.patient_id, "none", "none", 0,
                                        {static_cast<double>(l.position.x),
                                         static_cast<double>(l.position.y),
                                         static_cast<double>(l.position.z)}});
            } else {
                const Design design = design_from_name(design_str);
                for (const auto& item : build_cohort(all_nodules, all_loci, design, balance,
                                                     derive_seed(ctx.seed, "cohort"))) {
                    rows.push_back({item.item_id, item.patient_id, design_str,
                                    item.label == CohortLabel::positive ? "positive"
                                                                        : "negative",
                                    item.rating, item.centroid});
                }
            }
            fs::create_directories(cb_out);
            const fs::path csv = fs::path(cb_out) / "cohort.csv";
            write_cohort_csv(rows, csv);
            ctx.outputs.push_back(csv);
            write_run_manifest(ctx, cb_out);
            std::cout << "consensus: wrote " << rows.size() << " cohort rows to "
                      << csv.string() << "\n";
        }

        // ---- patches extract ----
        if (patches_extract->parsed()) {
            RunContext ctx = make_context(px_common, argc, argv);
            ctx.seed = resolve(ctx, px_common.seed, "seed", std::uint64_t{0});
            const std::string arch = resolve(ctx, px_arch, "arch", std::string("cnn21"));
            const std::string norm =
                resolve(ctx, px_norm, "normalization", std::string("hu_window"));
            const PatchShape shape = arch == "cnn21" ? PatchShape{21, 21, 5}
                                   : arch == "cnn47" ? PatchShape{47, 47, 5}
                                                     : throw UnknownArchitecture(arch);
            const NormMode mode = norm_mode_from_name(norm);

            const auto rows = read_cohort_csv(px_cohort);
            ctx.inputs.push_back(px_cohort);
            PatchSet set;
            set.design = rows.empty() ? "none" : rows[0].design;
            set.normalization = mode;

            std::string loaded_patient;
            CTVolume volume;
            double scan_min = 0.0, scan_max = 0.0;
            for (const CohortRow& row : rows) {
                if (row.patient_id != loaded_patient) {
                    const fs::path rawct = fs::path(px_in) / (row.patient_id + ".rawct");
                    volume = parse_volume(rawct);
                    ctx.inputs.push_back(rawct);
                    loaded_patient = row.patient_id;
                    scan_min = 32767.0;
                    scan_max = -32768.0;
                    for (const std::int16_t v : volume.voxels) {
                        scan_min = std::min(scan_min, static_cast<double>(v));
                        scan_max = std::max(scan_max, static_cast<double>(v));
                    }
                }
                const RawPatch raw = extract_patch(volume, row.centroid, shape);
                Patch patch = normalize_patch(raw, mode, scan_min, scan_max);
                patch.item_id = row.item_id;
                patch.label = label_from_string(row.label);
                set.patches.push_back(std::move(patch));
            }
            const fs::path out_path(px_out);
            fs::create_directories(out_path.parent_path().empty() ? "."
                                                                  : out_path.parent_path());
            const std::size_t bytes = write_container(set, out_path);
            ctx.outputs.push_back(out_path);
            write_run_manifest(ctx, out_path.parent_path().empty() ? "." : out_path.parent_path());
            std::cout << "patches: wrote " << set.patches.size() << " patches (" << bytes
                      << " bytes) to " << px_out << "\n";
        }

        // ---- qif extract ----
        if (qif_extract->parsed()) {
            RunContext ctx = make_context(qx_common, argc, argv);
            ctx.seed = resolve(ctx, qx_common.seed, "seed", std::uint64_t{0});
            const auto rows = read_cohort_csv(qx_cohort);
            ctx.inputs.push_back(qx_cohort);

            std::vector<std::pair<std::string, std::string>> ids;
            std::vector<qif::FeatureVector> features;
            std::string loaded_patient;
            CTVolume volume;
            std::vector<ConsensusNodule> nodules;
            for (const CohortRow& row : rows) {
                if (row.patient_id != loaded_patient) {
                    const fs::path rawct = fs::path(qx_in) / (row.patient_id + ".rawct");
                    const fs::path xml = fs::path(qx_in) / (row.patient_id + ".xml");
                    volume = parse_volume(rawct);
                    nodules = build_consensus(parse_annotations(read_text(xml)), volume.dims);
                    ctx.inputs.push_back(rawct);
                    ctx.inputs.push_back(xml);
                    loaded_patient = row.patient_id;
                }
                Mask3D mask;
                if (row.rating > 0) {
                    const ConsensusNodule* found = nullptr;
                    for (const auto& n : nodules)
                        if (n.nodule_uid == row.item_id) found = &n;
                    if (!found)
                        throw Error("qif extract: cohort row '" + row.item_id +
                                    "' has no consensus nodule; rebuild the cohort");
                    mask = found->consensus_mask;
                } else {
                    mask = qif::auto_segment(
                        volume, {static_cast<int>(std::llround(row.centroid.x)),
                                 static_cast<int>(std::llround(row.centroid.y)),
                                 static_cast<int>(std::llround(row.centroid.z))});
                }
                ids.emplace_back(row.item_id, row.patient_id);
                features.push_back(qif::compute_features(volume, mask));
            }
            fs::create_directories(qx_out);
            const fs::path csv = fs::path(qx_out) / "features.csv";
            const fs::path sidecar = fs::path(qx_out) / "feature_registry.csv";
            write_features_csv(ids, features, csv);
            write_feature_registry_sidecar(sidecar);
            ctx.outputs.push_back(csv);
            ctx.outputs.push_back(sidecar);
            write_run_manifest(ctx, qx_out);
            std::cout << "qif: wrote " << features.size() << " feature vectors to "
                      << csv.string() << "\n";
        }

        // ---- cnn train ----
        if (cnn_train->parsed()) {
            RunContext ctx = make_context(ct_common, argc, argv);
            ctx.seed = resolve(ctx, ct_common.seed, "seed", std::uint64_t{0});
            const std::string arch_tag = resolve(ctx, ct_arch, "arch", std::string("cnn21"));
            nn::TrainConfig config =
                resolve_train_config(ctx, ct_epochs, ct_batch, ct_lr, ct_momentum, ct_augment);
            config.seed = derive_seed(ctx.seed, "cnn_train");

            ctx.inputs.push_back(ct_patches);
            const PatchSet set = read_container(ct_patches);
            nn::NetworkModel model =
                nn::build_network(nn::arch_from_name(arch_tag), derive_seed(ctx.seed, arch_tag));
            const nn::CheckpointSet checkpoints = nn::train(model, set, config);

            fs::create_directories(ct_out);
            model.set_parameters(checkpoints.final_parameters);
            const fs::path final_path = fs::path(ct_out) / "final.ndxw";
            nn::write_checkpoint(model, final_path);
            ctx.outputs.push_back(final_path);
            for (std::size_t i = 0; i < checkpoints.best.size(); ++i) {
                model.set_parameters(checkpoints.best[i].parameters);
                const fs::path p = fs::path(ct_out) / ("best" + std::to_string(i + 1) + ".ndxw");
                nn::write_checkpoint(model, p);
                ctx.outputs.push_back(p);
            }
            const fs::path log_path = fs::path(ct_out) / "training_log.csv";
            nn::write_training_log(checkpoints.log, log_path);
            ctx.outputs.push_back(log_path);
            write_run_manifest(ctx, ct_out);
            std::cout << "cnn train: " << checkpoints.log.size() << " epochs, "
                      << checkpoints.best.size() << " snapshots, final heldout loss "
                      << checkpoints.log.back().heldout_loss << "\n";
        }

        // ---- cnn features ----
        if (cnn_features->parsed()) {
            RunContext ctx = make_context(cf_common, argc, argv);
            ctx.seed = resolve(ctx, cf_common.seed, "seed", std::uint64_t{0});
            ctx.inputs.push_back(cf_patches);
            ctx.inputs.push_back(cf_weights);
            const PatchSet set = read_container(cf_patches);
            nn::NetworkModel model = nn::read_checkpoint(cf_weights);
            const auto features = nn::extract_cnn_features(model, set);
            std::vector<std::string> ids;
            for (const Patch& p : set.patches) ids.push_back(p.item_id);
            fs::create_directories(cf_out);
            const fs::path csv = fs::path(cf_out) / "cnn_features.csv";
            write_cnn_features_csv(ids, features, csv);
            ctx.outputs.push_back(csv);
            write_run_manifest(ctx, cf_out);
            std::cout << "cnn features: wrote " << features.size() << " vectors to "
                      << csv.string() << "\n";
        }

        // ---- fuse train-rf ----
        if (fuse_train->parsed()) {
            RunContext ctx = make_context(ft_common, argc, argv);
            ctx.seed = resolve(ctx, ft_common.seed, "seed", std::uint64_t{0});
            const std::string design_str =
                resolve(ctx, ft_design, "design", std::string("s1_vs_s45"));
            const int n_trees = resolve(ctx, ft_trees, "n_trees", 1000);
            const int threads = resolve(ctx, ft_common.threads, "threads", 1);
            const Design design = design_from_name(design_str);

            ctx.inputs.push_back(ft_cnn);
            ctx.inputs.push_back(ft_qif);
            ctx.inputs.push_back(ft_cohort);
            const auto cnn_map = read_cnn_features_csv(ft_cnn);
            const auto qif_map = read_features_csv(ft_qif);
            std::vector<std::vector<double>> X;
            std::vector<int> y;
            for (const CohortRow& row : read_cohort_csv(ft_cohort)) {
                const auto label = design_label(design, row.rating, row.rating == 0);
                if (!label) continue;
                const auto ci = cnn_map.find(row.item_id);
                const auto qi = qif_map.find(row.item_id);
                if (ci == cnn_map.end() || qi == qif_map.end())
                    throw Error("fuse: missing features for item '" + row.item_id + "'");
                X.push_back(concat_features(ci->second, qi->second));
                y.push_back(*label);
            }
            const ForestModel forest =
                train_forest(X, y, n_trees, derive_seed(ctx.seed, "forest"), threads);
            fs::create_directories(ft_out);
            const fs::path model_path = fs::path(ft_out) / "fused_rf.ndxf";
            write_forest(forest, model_path);
            ctx.outputs.push_back(model_path);
            write_run_manifest(ctx, ft_out);
            std::cout << "fuse: trained " << n_trees << " trees on " << X.size()
                      << " items (mtry " << forest.mtry << ") -> " << model_path.string()
                      << "\n";
        }

        // ---- eval run ----
        if (eval_run->parsed()) {
            RunContext ctx = make_context(er_common, argc, argv);
            ctx.seed = resolve(ctx, er_common.seed, "seed", std::uint64_t{0});
            const std::string design_str =
                resolve(ctx, er_design, "design", std::string("s1_vs_s45"));
            const std::string models_str =
                resolve(ctx, er_models, "models", std::string("cnn21,cnn21+rf,lm"));
            RunOptions options;
            options.threshold = resolve(ctx, er_threshold, "threshold", 0.5);
            options.balance = resolve(ctx, er_balance, "balance", std::string("on")) == "on";
            options.n_trees = resolve(ctx, er_trees, "n_trees", 1000);
            options.threads = resolve(ctx, er_common.threads, "threads", 1);
            options.train =
                resolve_train_config(ctx, er_epochs, er_batch, er_lr, er_momentum, er_augment);
            options.config_hash = hex64(fnv1a(ctx.resolved.dump()));

            // data paths may come from the config file instead of flags
            const std::string cohort = resolve(ctx, er_cohort, "cohort", std::string());
            if (cohort.empty()) throw Error("eval run: --cohort (or config 'cohort') required");
            const std::string patches_str = resolve(ctx, er_patches, "patches", std::string());
            const std::string qif_str = resolve(ctx, er_qif, "qif", std::string());

            ctx.inputs.push_back(cohort);
            std::optional<fs::path> patches_path, qif_path;
            if (!patches_str.empty()) {
                patches_path = patches_str;
                ctx.inputs.push_back(*patches_path);
            }
            if (!qif_str.empty()) {
                qif_path = qif_str;
                ctx.inputs.push_back(*qif_path);
            }
            const ExperimentData data = load_experiment_data(cohort, patches_path, qif_path);
            const EvalReport report = run_design(design_from_name(design_str),
                                                 split_list(models_str), data, ctx.seed, options);
            fs::create_directories(er_out);
            const fs::path report_path = fs::path(er_out) / "report.json";
            {
                std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
                out << report_to_json(report) << "\n";
            }
            ctx.outputs.push_back(report_path);
            for (const auto& p : export_report(report, er_out)) ctx.outputs.push_back(p);
            write_run_manifest(ctx, er_out);
            for (const ModelRow& row : report.rows)
                std::cout << row.model << ": auc " << row.auc << " acc " << row.acc << " sens "
                          << row.sens << " spc " << row.spc << "\n";
        }

        // ---- eval reduced ----
        if (eval_reduced->parsed()) {
            RunContext ctx = make_context(ed_common, argc, argv);
            ctx.seed = resolve(ctx, ed_common.seed, "seed", std::uint64_t{0});
            const std::string design_str =
                resolve(ctx, ed_design, "design", std::string("s1_vs_s45"));
            const std::string model_str = resolve(ctx, ed_model, "model", std::string("rf"));
            const std::string mode_str = resolve(ctx, ed_mode, "mode", std::string("one_plus_one_minus"));
            const int trials = resolve(ctx, ed_trials, "trials", 200);
            RunOptions options;
            options.threshold = resolve(ctx, ed_threshold, "threshold", 0.5);
            options.n_trees = resolve(ctx, ed_trees, "n_trees", 1000);
            options.threads = resolve(ctx, ed_common.threads, "threads", 1);

            ctx.inputs.push_back(ed_cohort);
            ctx.inputs.push_back(ed_qif);
            const ExperimentData data =
                load_experiment_data(ed_cohort, std::nullopt, fs::path(ed_qif));
            const ReducedResult result = run_reduced_training(
                design_from_name(design_str), reduced_model_from_name(model_str),
                reduced_mode_from_name(mode_str), data, trials, ctx.seed, options);

            fs::create_directories(ed_out);
            const fs::path csv = fs::path(ed_out) / "reduced.csv";
            {
                std::ofstream out(csv, std::ios::trunc);
                out << "design,model,mode,trial,accuracy\n";
                for (std::size_t t = 0; t < result.per_trial.size(); ++t) {
                    char buf[64];
                    std::snprintf(buf, sizeof buf, "%.9g", result.per_trial[t]);
                    out << design_str << ',' << model_str << ',' << mode_str << ',' << t << ','
                        << buf << "\n";
                }
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.9g", result.mean_accuracy);
                out << design_str << ',' << model_str << ',' << mode_str << ",mean," << buf
                    << "\n";
            }
            ctx.outputs.push_back(csv);
            write_run_manifest(ctx, ed_out);
            std::cout << "eval reduced: " << design_str << " " << model_str << " " << mode_str
                      << " mean accuracy " << result.mean_accuracy << " ("
                      << result.n_features_used << " features)\n";
        }

        // ---- report export ----
        if (report_export->parsed()) {
            RunContext ctx = make_context(re_common, argc, argv);
            ctx.seed = resolve(ctx, re_common.seed, "seed", std::uint64_t{0});
            ctx.inputs.push_back(re_report);
            const EvalReport report = report_from_json(read_text(re_report));
            for (const auto& p : export_report(report, re_out)) ctx.outputs.push_back(p);
            write_run_manifest(ctx, re_out);
            std::cout << "report: exported " << report.rows.size() << " model rows to "
                      << re_out << "\n";
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
