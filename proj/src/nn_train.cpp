#include "nodulekit/nn_train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "nodulekit/errors.hpp"

namespace nodulekit::nn {

namespace {

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f64le(std::vector<std::uint8_t>& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

double read_f64le(const std::uint8_t* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

std::vector<double> batch_from_indices(const PatchSet& set, const std::vector<std::size_t>& idx,
                                       bool do_augment, Rng& rng) {
    std::vector<double> batch;
    if (idx.empty()) return batch;
    const std::size_t item = set.patches[idx[0]].values.size();
    batch.resize(idx.size() * item);
    std::vector<double> scratch;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const Patch& p = set.patches[idx[i]];
        if (do_augment) {
            const AugmentParams params = sample_augment_params(rng, p.shape.w, p.shape.h);
            augment_into(p, params, scratch);
            std::copy(scratch.begin(), scratch.end(), batch.begin() + static_cast<long>(i * item));
        } else {
            for (std::size_t j = 0; j < item; ++j)
                batch[i * item + j] = static_cast<double>(p.values[j]);
        }
    }
    return batch;
}

struct HeldoutEval {
    double loss = 0.0;
    double accuracy = 0.0;
};

HeldoutEval evaluate(NetworkModel& model, const PatchSet& set,
                     const std::vector<std::size_t>& idx) {
    Rng rng(0);
    const auto batch = batch_from_indices(set, idx, false, rng);
    const ForwardResult fwd = forward(model, batch.data(), idx.size(), false, rng);
    HeldoutEval eval;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const int y = set.patches[idx[i]].label;
        const double py = fwd.probabilities[i][static_cast<std::size_t>(y)];
        eval.loss -= std::log(py > 1e-300 ? py : 1e-300);
        const int pred = fwd.probabilities[i][1] >= 0.5 ? 1 : 0;
        correct += pred == y;
    }
    eval.loss /= static_cast<double>(idx.size());
    eval.accuracy = static_cast<double>(correct) / static_cast<double>(idx.size());
    return eval;
}

}  // namespace

AugmentParams sample_augment_params(Rng& rng, int w, int h) {
    AugmentParams p;
    p.shift_x = rng.uniform(-0.3 * w, 0.3 * w);
    p.shift_y = rng.uniform(-0.3 * h, 0.3 * h);
    p.angle_rad = rng.uniform(0.0, 3.14159265358979323846);
    p.scale = rng.uniform(0.9, 1.1);
    return p;
}

void augment_into(const Patch& patch, const AugmentParams& params, std::vector<double>& out) {
    const int w = patch.shape.w, h = patch.shape.h, d = patch.shape.d;
    out.resize(patch.values.size());
    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
    const double cos_t = std::cos(params.angle_rad), sin_t = std::sin(params.angle_rad);
    const double inv_s = 1.0 / params.scale;

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            // inverse map of: scale about centre, rotate about centre, shift
            const double ux = (x - cx - params.shift_x) * inv_s;
            const double uy = (y - cy - params.shift_y) * inv_s;
            const double sx = cos_t * ux + sin_t * uy + cx;
            const double sy = -sin_t * ux + cos_t * uy + cy;

            const double fx = std::floor(sx), fy = std::floor(sy);
            const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
            const double ax = sx - fx, ay = sy - fy;

            for (int c = 0; c < d; ++c) {
                const float* plane = patch.values.data() + static_cast<std::size_t>(c) * w * h;
                const auto sample = [&](int px, int py) -> double {
                    if (px < 0 || px >= w || py < 0 || py >= h) return 0.0;
                    return static_cast<double>(plane[static_cast<std::size_t>(py) * w + px]);
                };
                const double v = (1 - ax) * (1 - ay) * sample(x0, y0) +
                                 ax * (1 - ay) * sample(x0 + 1, y0) +
                                 (1 - ax) * ay * sample(x0, y0 + 1) +
                                 ax * ay * sample(x0 + 1, y0 + 1);
                out[static_cast<std::size_t>(c) * w * h + static_cast<std::size_t>(y) * w + x] = v;
            }
        }
}

Patch augment(const Patch& patch, Rng& rng) {
    const AugmentParams params = sample_augment_params(rng, patch.shape.w, patch.shape.h);
    std::vector<double> values;
    augment_into(patch, params, values);
    Patch out = patch;
    for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = static_cast<float>(values[i]);
    return out;
}

CheckpointSet train(NetworkModel& model, const PatchSet& data, const TrainConfig& config) {
    if (config.batch_size < 1 || config.epochs < 1)
        throw Error("train: batch_size and epochs must be positive");
    if (data.patches.size() < 2)
        throw SingleClassTrainingSet("train: need at least 2 items");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < data.patches.size(); ++i) {
        const int y = data.patches[i].label;
        if (y != 0 && y != 1) throw ShapeMismatch("train: labels must be 0 or 1");
        (y == 1 ? pos : neg).push_back(i);
    }
    if (pos.empty() || neg.empty())
        throw SingleClassTrainingSet("train: both classes must be present");
    const PatchShape want = model.input_shape();
    for (const Patch& p : data.patches)
        if (!(p.shape == want)) throw ShapeMismatch("train: patch shape mismatch");

    // stratified 80/20 split
    Rng split_rng(derive_seed(config.seed, "split"));
    split_rng.shuffle(pos);
    split_rng.shuffle(neg);
    std::vector<std::size_t> train_idx, heldout_idx;
    const auto take = [&](std::vector<std::size_t>& cls) {
        const std::size_t n_train =
            std::max<std::size_t>(1, static_cast<std::size_t>(0.8 * static_cast<double>(cls.size())));
        for (std::size_t i = 0; i < cls.size(); ++i)
            (i < n_train ? train_idx : heldout_idx).push_back(cls[i]);
    };
    take(pos);
    take(neg);
    if (heldout_idx.empty()) heldout_idx = train_idx;  // degenerate tiny sets

    // momentum buffers per parameter tensor
    std::vector<std::vector<double>> velocity;
    for (auto& layer : model.layers)
        for (const auto p : layer->parameters()) velocity.emplace_back(p.size(), 0.0);

    Rng rng(derive_seed(config.seed, "train"));
    CheckpointSet result;
    result.arch = model.arch;
    std::deque<Snapshot> snapshots;
    double best_loss = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(train_idx);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t at = 0; at < train_idx.size();
             at += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t bs = std::min(static_cast<std::size_t>(config.batch_size),
                                            train_idx.size() - at);
            const std::vector<std::size_t> batch_idx(train_idx.begin() + static_cast<long>(at),
                                                     train_idx.begin() + static_cast<long>(at + bs));
            const auto batch = batch_from_indices(data, batch_idx, config.augment, rng);
            std::vector<int> labels(bs);
            for (std::size_t i = 0; i < bs; ++i)
                labels[i] = data.patches[batch_idx[i]].label;

            const double loss = gradients(model, batch.data(), labels.data(), bs, rng);
            epoch_loss += loss * static_cast<double>(bs);
            seen += bs;

            // v = m*v - lr*g; w += v
            std::size_t t = 0;
            for (auto& layer : model.layers) {
                const auto params = layer->parameters();
                const auto grads = layer->gradients();
                for (std::size_t k = 0; k < params.size(); ++k, ++t) {
                    auto& v = velocity[t];
                    for (std::size_t j = 0; j < v.size(); ++j) {
                        v[j] = config.momentum * v[j] - config.learning_rate * grads[k][j];
                        params[k][j] += v[j];
                    }
                }
            }
        }

        const HeldoutEval eval = evaluate(model, data, heldout_idx);
        result.log.push_back({epoch, epoch_loss / static_cast<double>(seen), eval.loss,
                              eval.accuracy});
        if (eval.loss < best_loss) {
            best_loss = eval.loss;
            snapshots.push_back({epoch, eval.loss, model.flatten_parameters()});
            if (snapshots.size() > 3) snapshots.pop_front();
        }
    }

    result.final_parameters = model.flatten_parameters();
    result.best.assign(snapshots.begin(), snapshots.end());
    std::sort(result.best.begin(), result.best.end(),
              [](const Snapshot& a, const Snapshot& b) { return a.heldout_loss < b.heldout_loss; });
    model.eval_mode = true;
    return result;
}

std::vector<std::uint8_t> checkpoint_to_bytes(NetworkModel& model) {
    nlohmann::json tensors = nlohmann::json::array();
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        auto params = model.layers[i]->parameters();
        for (std::size_t k = 0; k < params.size(); ++k)
            tensors.push_back({{"layer", i},
                               {"type", model.layers[i]->type()},
                               {"tensor", k == 0 ? "weights" : "bias"},
                               {"size", params[k].size()}});
    }
    const nlohmann::json manifest = {{"arch", arch_name(model.arch)}, {"tensors", tensors}};
    const std::string m = manifest.dump();

    std::vector<std::uint8_t> out = {'N', 'D', 'X', 'W'};
    put_u32le(out, 1);
    put_u32le(out, static_cast<std::uint32_t>(m.size()));
    out.insert(out.end(), m.begin(), m.end());
    for (auto& layer : model.layers)
        for (const auto p : layer->parameters())
            for (const double v : p) put_f64le(out, v);
    return out;
}

NetworkModel checkpoint_from_bytes(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "NDXW", 4) != 0)
        throw BadMagic("NDXW: bad magic");
    if (bytes.size() < 12) throw TruncatedPayload("NDXW: truncated header");
    if (read_u32le(bytes.data() + 4) != 1) throw VersionUnsupported("NDXW: bad version");
    const std::uint32_t mlen = read_u32le(bytes.data() + 8);
    if (bytes.size() < 12 + static_cast<std::size_t>(mlen))
        throw TruncatedPayload("NDXW: truncated manifest");

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + mlen);
    } catch (const nlohmann::json::exception&) {
        throw TruncatedPayload("NDXW: manifest is not valid JSON");
    }

    std::string arch_tag;
    std::size_t total = 0;
    try {
        arch_tag = manifest.at("arch").get<std::string>();
        for (const auto& t : manifest.at("tensors")) total += t.at("size").get<std::size_t>();
    } catch (const nlohmann::json::exception&) {
        throw TruncatedPayload("NDXW: missing manifest field");
    }
    NetworkModel model = build_network(arch_from_name(arch_tag), 0);
    if (bytes.size() != 12 + mlen + 8 * total)
        throw TruncatedPayload("NDXW: payload size mismatch");

    const std::uint8_t* p = bytes.data() + 12 + mlen;
    std::vector<double> flat(total);
    for (std::size_t i = 0; i < total; ++i, p += 8) flat[i] = read_f64le(p);
    model.set_parameters(flat);
    model.eval_mode = true;
    return model;
}

void write_checkpoint(NetworkModel& model, const std::filesystem::path& path) {
    const auto bytes = checkpoint_to_bytes(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

NetworkModel read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return checkpoint_from_bytes(bytes);
}

void write_training_log(const std::vector<EpochLog>& log, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "epoch,train_loss,heldout_loss,heldout_acc\n";
    char buf[64];
    for (const EpochLog& e : log) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g\n", e.epoch, e.train_loss,
                      e.heldout_loss, e.heldout_acc);
        out << buf;
    }
}

}  // namespace nodulekit::nn
