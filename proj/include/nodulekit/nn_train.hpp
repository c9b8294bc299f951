#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nodulekit/nn.hpp"

namespace nodulekit::nn {

struct TrainConfig {
    int epochs = 300;          // paper range is 200-400
    int batch_size = 64;
    double learning_rate = 1e-3;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    bool augment = true;

    bool operator==(const TrainConfig&) const = default;
};

// In-plane affine augmentation applied identically to every slice.
struct AugmentParams {
    double angle_rad = 0.0;  // [0, pi]
    double scale = 1.0;      // [0.9, 1.1]
    double shift_x = 0.0;    // [-0.3 W, 0.3 W]
    double shift_y = 0.0;    // [-0.3 H, 0.3 H]
};

AugmentParams sample_augment_params(Rng& rng, int w, int h);

// Bilinear resample of `patch` under `params`; out-of-support fill is 0.
void augment_into(const Patch& patch, const AugmentParams& params, std::vector<double>& out);

Patch augment(const Patch& patch, Rng& rng);

struct Snapshot {
    int epoch = 0;
    double heldout_loss = 0.0;
    std::vector<double> parameters;

    bool operator==(const Snapshot&) const = default;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double heldout_loss = 0.0;
    double heldout_acc = 0.0;

    bool operator==(const EpochLog&) const = default;
};

// Final weights plus up to three best-by-held-out-loss snapshots, ascending
// by loss (equivalently newest first; snapshots are taken on new minima).
struct CheckpointSet {
    Arch arch = Arch::cnn21;
    std::vector<double> final_parameters;
    std::vector<Snapshot> best;
    std::vector<EpochLog> log;

    bool operator==(const CheckpointSet&) const = default;
};

// Minibatch SGD with momentum over an internal stratified 80/20 split; a
// snapshot is stored whenever the held-out loss reaches a new minimum. The
// model is left holding the final weights in eval mode.
CheckpointSet train(NetworkModel& model, const PatchSet& data, const TrainConfig& config);

// NDXW weight file: magic "NDXW", u32-LE version=1, u32-LE manifest length,
// JSON manifest (arch + tensor sizes), then raw little-endian f64 tensors in
// manifest order.
std::vector<std::uint8_t> checkpoint_to_bytes(NetworkModel& model);
NetworkModel checkpoint_from_bytes(const std::vector<std::uint8_t>& bytes);
void write_checkpoint(NetworkModel& model, const std::filesystem::path& path);
NetworkModel read_checkpoint(const std::filesystem::path& path);

void write_training_log(const std::vector<EpochLog>& log, const std::filesystem::path& path);

}  // namespace nodulekit::nn
