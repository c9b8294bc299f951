#include "nodulekit/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "nodulekit/rng.hpp"

namespace nodulekit {

namespace {

struct Matrix {
    const std::vector<std::vector<double>>* rows;
    double at(std::size_t i, int f) const { return (*rows)[i][static_cast<std::size_t>(f)]; }
};

struct Builder {
    Matrix X;
    const std::vector<int>* y;
    int p = 0;
    int mtry = 0;
    Rng rng;
    Tree tree;
    std::vector<int> feature_pool;

    int add_leaf(std::uint32_t c0, std::uint32_t c1) {
        tree.feature.push_back(-1);
        tree.threshold.push_back(0.0);
        tree.left.push_back(-1);
        tree.right.push_back(-1);
        tree.count0.push_back(c0);
        tree.count1.push_back(c1);
        return static_cast<int>(tree.feature.size()) - 1;
    }

    // Draws mtry distinct features by partial Fisher-Yates over the pool.
    void sample_features(std::vector<int>& out) {
        out.clear();
        for (int i = 0; i < mtry; ++i) {
            const auto j = i + static_cast<int>(rng.uniform_int(
                                   static_cast<std::uint64_t>(p - i)));
            std::swap(feature_pool[static_cast<std::size_t>(i)],
                      feature_pool[static_cast<std::size_t>(j)]);
            out.push_back(feature_pool[static_cast<std::size_t>(i)]);
        }
    }

    int split(std::vector<std::size_t>& idx) {
        std::uint32_t c0 = 0, c1 = 0;
        for (const std::size_t i : idx) ((*y)[i] == 1 ? c1 : c0)++;
        if (c0 == 0 || c1 == 0 || idx.size() < 2) return add_leaf(c0, c1);

        const double n = static_cast<double>(idx.size());
        int best_feature = -1;
        double best_threshold = 0.0;
        double best_impurity = 2.0;
        std::vector<int> candidates;
        std::vector<std::pair<double, int>> vals;

        // a fresh mtry draw is attempted a few times when every candidate is
        // constant at this node, mirroring the reference implementation
        for (int attempt = 0; attempt < 10 && best_feature < 0; ++attempt) {
            sample_features(candidates);
            for (const int f : candidates) {
                vals.clear();
                for (const std::size_t i : idx) vals.emplace_back(X.at(i, f), (*y)[i]);
                std::sort(vals.begin(), vals.end());
                std::uint32_t l0 = 0, l1 = 0;
                for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
                    (vals[k].second == 1 ? l1 : l0)++;
                    if (vals[k].first == vals[k + 1].first) continue;
                    const double nl = static_cast<double>(l0 + l1);
                    const double nr = n - nl;
                    const double r0 = c0 - l0, r1 = c1 - l1;
                    const double gini_l =
                        1.0 - (l0 * static_cast<double>(l0) + l1 * static_cast<double>(l1)) /
                                  (nl * nl);
                    const double gini_r = 1.0 - (r0 * r0 + r1 * r1) / (nr * nr);
                    const double impurity = (nl * gini_l + nr * gini_r) / n;
                    if (impurity < best_impurity) {
                        best_impurity = impurity;
                        best_feature = f;
                        best_threshold = vals[k].first + (vals[k + 1].first - vals[k].first) / 2.0;
                    }
                }
            }
        }
        if (best_feature < 0) return add_leaf(c0, c1);  // no valid split

        std::vector<std::size_t> left_idx, right_idx;
        for (const std::size_t i : idx)
            (X.at(i, best_feature) <= best_threshold ? left_idx : right_idx).push_back(i);
        idx.clear();
        idx.shrink_to_fit();

        const int node = add_leaf(c0, c1);
        tree.feature[static_cast<std::size_t>(node)] = best_feature;
        tree.threshold[static_cast<std::size_t>(node)] = best_threshold;
        const int l = split(left_idx);
        tree.left[static_cast<std::size_t>(node)] = l;
        const int r = split(right_idx);
        tree.right[static_cast<std::size_t>(node)] = r;
        return node;
    }
};

Tree build_tree(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                int mtry, std::uint64_t tree_seed) {
    Builder b{{&X}, &y, static_cast<int>(X[0].size()), mtry, Rng(tree_seed), {}, {}};
    b.feature_pool.resize(static_cast<std::size_t>(b.p));
    for (int i = 0; i < b.p; ++i) b.feature_pool[static_cast<std::size_t>(i)] = i;

    const std::size_t n = X.size();
    std::vector<std::size_t> bootstrap(n);
    for (std::size_t i = 0; i < n; ++i)
        bootstrap[i] = static_cast<std::size_t>(b.rng.uniform_int(n));
    std::sort(bootstrap.begin(), bootstrap.end());

    b.split(bootstrap);
    return std::move(b.tree);
}

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

}  // namespace

int Tree::vote(const std::vector<double>& x) const {
    int node = 0;
    while (feature[static_cast<std::size_t>(node)] >= 0) {
        const auto f = static_cast<std::size_t>(feature[static_cast<std::size_t>(node)]);
        node = x[f] <= threshold[static_cast<std::size_t>(node)]
                   ? left[static_cast<std::size_t>(node)]
                   : right[static_cast<std::size_t>(node)];
    }
    // leaf majority; ties vote positive
    return count1[static_cast<std::size_t>(node)] >= count0[static_cast<std::size_t>(node)] ? 1
                                                                                            : 0;
}

std::vector<double> concat_features(const std::vector<double>& cnn_vec,
                                    const std::vector<double>& qif_vec) {
    if (cnn_vec.size() != 200)
        throw LengthMismatch("concat_features: CNN vector must have 200 entries, got " +
                             std::to_string(cnn_vec.size()));
    if (qif_vec.size() != 50)
        throw LengthMismatch("concat_features: QIF vector must have 50 entries, got " +
                             std::to_string(qif_vec.size()));
    std::vector<double> fused;
    fused.reserve(250);
    fused.insert(fused.end(), cnn_vec.begin(), cnn_vec.end());
    fused.insert(fused.end(), qif_vec.begin(), qif_vec.end());
    return fused;
}

ForestModel train_forest(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                         int n_trees, std::uint64_t seed, int threads) {
    if (n_trees < 1) throw Error("train_forest: n_trees must be positive");
    if (X.size() < 2 || X.size() != y.size())
        throw SingleClassTrainingSet("train_forest: need at least 2 samples");
    if (X[0].empty()) throw LengthMismatch("train_forest: need at least 1 feature");
    bool has0 = false, has1 = false;
    for (const int label : y) {
        if (label == 1) has1 = true;
        else if (label == 0) has0 = true;
        else throw SingleClassTrainingSet("train_forest: labels must be 0 or 1");
    }
    if (!has0 || !has1)
        throw SingleClassTrainingSet("train_forest: both classes must be present");
    const std::size_t p = X[0].size();
    for (const auto& row : X)
        if (row.size() != p) throw LengthMismatch("train_forest: ragged feature matrix");

    ForestModel model;
    model.n_trees = n_trees;
    model.n_features = static_cast<int>(p);
    model.mtry = static_cast<int>(std::floor(std::sqrt(static_cast<double>(p))));
    model.seed = seed;
    model.trees.resize(static_cast<std::size_t>(n_trees));

    const auto build_range = [&](int from, int to) {
        for (int t = from; t < to; ++t)
            model.trees[static_cast<std::size_t>(t)] =
                build_tree(X, y, model.mtry, seed ^ static_cast<std::uint64_t>(t));
    };

    if (threads <= 1) {
        build_range(0, n_trees);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (n_trees + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int from = t * chunk;
            const int to = std::min(n_trees, from + chunk);
            if (from < to) pool.emplace_back(build_range, from, to);
        }
        for (auto& th : pool) th.join();
    }
    return model;
}

double forest_proba(const ForestModel& model, const std::vector<double>& x) {
    if (x.size() != static_cast<std::size_t>(model.n_features))
        throw LengthMismatch("forest_proba: expected " + std::to_string(model.n_features) +
                             " features, got " + std::to_string(x.size()));
    std::size_t votes = 0;
    for (const Tree& tree : model.trees) votes += static_cast<std::size_t>(tree.vote(x));
    return static_cast<double>(votes) / static_cast<double>(model.trees.size());
}

std::vector<std::uint8_t> forest_to_bytes(const ForestModel& model) {
    nlohmann::json n_nodes = nlohmann::json::array();
    for (const Tree& t : model.trees) n_nodes.push_back(t.feature.size());
    const nlohmann::json manifest = {{"n_trees", model.n_trees},
                                     {"n_features", model.n_features},
                                     {"mtry", model.mtry},
                                     {"seed", model.seed},
                                     {"n_nodes", n_nodes}};
    const std::string m = manifest.dump();

    std::vector<std::uint8_t> out = {'N', 'D', 'X', 'F'};
    put_u32le(out, 1);
    put_u32le(out, static_cast<std::uint32_t>(m.size()));
    out.insert(out.end(), m.begin(), m.end());
    for (const Tree& t : model.trees) {
        for (const int v : t.feature) put_u32le(out, static_cast<std::uint32_t>(v));
        for (const double v : t.threshold) put_f64le(out, v);
        for (const int v : t.left) put_u32le(out, static_cast<std::uint32_t>(v));
        for (const int v : t.right) put_u32le(out, static_cast<std::uint32_t>(v));
        for (const std::uint32_t v : t.count0) put_u32le(out, v);
        for (const std::uint32_t v : t.count1) put_u32le(out, v);
    }
    return out;
}

ForestModel forest_from_bytes(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "NDXF", 4) != 0)
        throw BadMagic("NDXF: bad magic");
    if (bytes.size() < 12) throw TruncatedPayload("NDXF: truncated header");
    if (read_u32le(bytes.data() + 4) != 1) throw VersionUnsupported("NDXF: bad version");
    const std::uint32_t mlen = read_u32le(bytes.data() + 8);
    if (bytes.size() < 12 + static_cast<std::size_t>(mlen))
        throw TruncatedPayload("NDXF: truncated manifest");

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + mlen);
    } catch (const nlohmann::json::exception&) {
        throw TruncatedPayload("NDXF: manifest is not valid JSON");
    }

    ForestModel model;
    std::vector<std::size_t> n_nodes;
    try {
        model.n_trees = manifest.at("n_trees").get<int>();
        model.n_features = manifest.at("n_features").get<int>();
        model.mtry = manifest.at("mtry").get<int>();
        model.seed = manifest.at("seed").get<std::uint64_t>();
        for (const auto& n : manifest.at("n_nodes")) n_nodes.push_back(n.get<std::size_t>());
    } catch (const nlohmann::json::exception&) {
        throw TruncatedPayload("NDXF: missing manifest field");
    }

    std::size_t payload = 0;
    for (const std::size_t n : n_nodes) payload += n * (4 + 8 + 4 + 4 + 4 + 4);
    if (bytes.size() != 12 + mlen + payload)
        throw TruncatedPayload("NDXF: payload size mismatch");

    const std::uint8_t* p = bytes.data() + 12 + mlen;
    for (const std::size_t n : n_nodes) {
        Tree t;
        t.feature.resize(n);
        t.threshold.resize(n);
        t.left.resize(n);
        t.right.resize(n);
        t.count0.resize(n);
        t.count1.resize(n);
        for (auto& v : t.feature) { v = static_cast<int>(read_u32le(p)); p += 4; }
        for (auto& v : t.threshold) { v = read_f64le(p); p += 8; }
        for (auto& v : t.left) { v = static_cast<int>(read_u32le(p)); p += 4; }
        for (auto& v : t.right) { v = static_cast<int>(read_u32le(p)); p += 4; }
        for (auto& v : t.count0) { v = read_u32le(p); p += 4; }
        for (auto& v : t.count1) { v = read_u32le(p); p += 4; }
        model.trees.push_back(std::move(t));
    }
    return model;
}

void write_forest(const ForestModel& model, const std::filesystem::path& path) {
    const auto bytes = forest_to_bytes(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

ForestModel read_forest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return forest_from_bytes(bytes);
}

}  // namespace nodulekit
