#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nodulekit/errors.hpp"

namespace nodulekit {

// One binary axis-aligned decision tree stored as flat node arrays. Leaves
// have feature == -1 and carry training-sample class counts.
struct Tree {
    std::vector<int> feature;
    std::vector<double> threshold;  // route left iff x[feature] <= threshold
    std::vector<int> left;
    std::vector<int> right;
    std::vector<std::uint32_t> count0;
    std::vector<std::uint32_t> count1;

    bool operator==(const Tree&) const = default;

    // 1 for a positive vote (leaf majority, ties positive), else 0.
    int vote(const std::vector<double>& x) const;
};

struct ForestModel {
    int n_trees = 1000;
    int n_features = 0;
    int mtry = 0;  // floor(sqrt(p))
    std::uint64_t seed = 0;
    std::vector<Tree> trees;

    bool operator==(const ForestModel&) const = default;
};

// 250-vector fusion: CNN features at 0..199, QIF at 200..249.
std::vector<double> concat_features(const std::vector<double>& cnn_vec,
                                    const std::vector<double>& qif_vec);

// Bootstrap + per-node mtry feature sampling + best Gini split, grown until
// pure or no valid split. Deterministic for a fixed seed; trees use derived
// sub-seeds so the result is independent of scheduling.
ForestModel train_forest(const std::vector<std::vector<double>>& X,
                         const std::vector<int>& y, int n_trees, std::uint64_t seed,
                         int threads = 1);

// Fraction of trees voting positive.
double forest_proba(const ForestModel& model, const std::vector<double>& x);

// NDXF: magic, u32 version=1, u32 manifest length, JSON manifest, then per
// tree the flat node arrays (i32 feature, f64 threshold, i32 left, i32 right,
// u32 count0, u32 count1), little-endian.
std::vector<std::uint8_t> forest_to_bytes(const ForestModel& model);
ForestModel forest_from_bytes(const std::vector<std::uint8_t>& bytes);
void write_forest(const ForestModel& model, const std::filesystem::path& path);
ForestModel read_forest(const std::filesystem::path& path);

}  // namespace nodulekit
