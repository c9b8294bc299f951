#include <doctest.h>

#include <cmath>

#include "nodulekit/forest.hpp"
#include "nodulekit/logistic.hpp"
#include "nodulekit/rng.hpp"

using namespace nodulekit;

namespace {

double train_accuracy(const ForestModel& model, const std::vector<std::vector<double>>& X,
                      const std::vector<int>& y) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < X.size(); ++i)
        correct += (forest_proba(model, X[i]) >= 0.5 ? 1 : 0) == y[i];
    return static_cast<double>(correct) / static_cast<double>(X.size());
}

Tree leaf_tree(std::uint32_t c0, std::uint32_t c1) {
    Tree t;
    t.feature = {-1};
    t.threshold = {0.0};
    t.left = {-1};
    t.right = {-1};
    t.count0 = {c0};
    t.count1 = {c1};
    return t;
}

}  // namespace

TEST_SUITE("classifiers") {

TEST_CASE("concat_features fuses 200 + 50 in order") {
    std::vector<double> cnn(200), qif_vec(50);
    for (int i = 0; i < 200; ++i) cnn[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < 50; ++i) qif_vec[static_cast<std::size_t>(i)] = 1000 + i;
    const auto fused = concat_features(cnn, qif_vec);
    REQUIRE(fused.size() == 250);
    CHECK(fused[0] == 0.0);
    CHECK(fused[199] == 199.0);
    CHECK(fused[200] == 1000.0);
    CHECK(fused[249] == 1049.0);

    cnn.pop_back();
    CHECK_THROWS_AS(concat_features(cnn, qif_vec), LengthMismatch);
}

TEST_CASE("mtry is floor(sqrt(p)); 15 for p=250") {
    Rng rng(1);
    std::vector<std::vector<double>> X;
    std::vector<int> y;
    for (int i = 0; i < 6; ++i) {
        std::vector<double> row(250);
        for (auto& v : row) v = rng.uniform();
        X.push_back(row);
        y.push_back(i % 2);
    }
    const ForestModel model = train_forest(X, y, 5, 7);
    CHECK(model.mtry == 15);
    CHECK(model.n_features == 250);
    CHECK(model.trees.size() == 5);
}

TEST_CASE("dominant duplicated positives give probability 1 at the point") {
    std::vector<std::vector<double>> X;
    std::vector<int> y;
    for (int i = 0; i < 10; ++i) {
        X.push_back({5.0, 5.0});
        y.push_back(1);
        X.push_back({0.0, 0.0});
        y.push_back(0);
    }
    const ForestModel model = train_forest(X, y, 250, 3);
    CHECK(forest_proba(model, {5.0, 5.0}) == 1.0);
    CHECK(forest_proba(model, {0.0, 0.0}) == 0.0);
}

TEST_CASE("XOR is learned exactly with 250 trees") {
    const std::vector<std::vector<double>> X = {{0, 0}, {1, 1}, {0, 1}, {1, 0}};
    const std::vector<int> y = {1, 1, 0, 0};
    const ForestModel model = train_forest(X, y, 250, 11);
    CHECK(train_accuracy(model, X, y) == 1.0);
}

TEST_CASE("vote granularity and the hand-built 3-tree oracle") {
    ForestModel manual;
    manual.n_trees = 3;
    manual.n_features = 1;
    manual.mtry = 1;
    manual.trees.push_back(leaf_tree(0, 5));  // always positive
    manual.trees.push_back(leaf_tree(5, 0));  // always negative
    Tree stump;                               // x <= 0.5 ? negative : positive
    stump.feature = {0, -1, -1};
    stump.threshold = {0.5, 0.0, 0.0};
    stump.left = {1, -1, -1};
    stump.right = {2, -1, -1};
    stump.count0 = {5, 5, 0};
    stump.count1 = {5, 0, 5};
    manual.trees.push_back(stump);

    CHECK(forest_proba(manual, {0.7}) == doctest::Approx(2.0 / 3.0));
    CHECK(forest_proba(manual, {0.2}) == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_AS(forest_proba(manual, {0.1, 0.2}), LengthMismatch);

    // leaf tie votes positive
    ForestModel tie;
    tie.n_trees = 1;
    tie.n_features = 1;
    tie.trees.push_back(leaf_tree(3, 3));
    CHECK(forest_proba(tie, {0.0}) == 1.0);
}

TEST_CASE("forest training is deterministic for a fixed seed") {
    Rng rng(21);
    std::vector<std::vector<double>> X;
    std::vector<int> y;
    for (int i = 0; i < 40; ++i) {
        X.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
        y.push_back(static_cast<int>(rng.uniform_int(2)));
    }
    const ForestModel a = train_forest(X, y, 31, 17);
    const ForestModel b = train_forest(X, y, 31, 17);
    CHECK(a == b);
    const ForestModel c = train_forest(X, y, 31, 18);
    CHECK(!(a == c));
    // threaded construction matches the single-threaded result
    const ForestModel d = train_forest(X, y, 31, 17, 3);
    CHECK(a == d);
}

TEST_CASE("majority vote is no worse than a single tree on training data") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<double>> X;
        std::vector<int> y;
        const int n = 24 + static_cast<int>(rng.uniform_int(30));
        for (int i = 0; i < n; ++i) {
            const int label = static_cast<int>(rng.uniform_int(2));
            // noisy class-dependent mean keeps the problem learnable but not trivial
            X.push_back({rng.normal(label * 1.0, 0.8), rng.normal(-label * 0.5, 0.8),
                         rng.uniform()});
            y.push_back(label);
        }
        const ForestModel forest = train_forest(X, y, 51, 1000 + trial);
        const ForestModel single = train_forest(X, y, 1, 1000 + trial);
        CHECK(train_accuracy(forest, X, y) >= train_accuracy(single, X, y) - 0.02);
    }
}

TEST_CASE("single-class forest input is rejected") {
    std::vector<std::vector<double>> X = {{0.0}, {1.0}};
    CHECK_THROWS_AS(train_forest(X, {1, 1}, 5, 1), SingleClassTrainingSet);
    CHECK_THROWS_AS(train_forest(X, {0, 0}, 5, 1), SingleClassTrainingSet);
}

TEST_CASE("NDXF round-trips bit-exactly") {
    Rng rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::vector<double>> X;
        std::vector<int> y;
        for (int i = 0; i < 20; ++i) {
            X.push_back({rng.uniform(), rng.uniform()});
            y.push_back(static_cast<int>(rng.uniform_int(2)));
        }
        const ForestModel model = train_forest(X, y, 7, 100 + trial);
        const auto bytes = forest_to_bytes(model);
        const ForestModel back = forest_from_bytes(bytes);
        CHECK(back == model);
        CHECK(forest_to_bytes(back) == bytes);
    }
    auto bytes = forest_to_bytes(train_forest({{0.0}, {1.0}}, {0, 1}, 1, 1));
    bytes[0] = 'Q';
    CHECK_THROWS_AS(forest_from_bytes(bytes), BadMagic);
}

TEST_CASE("malformed NDXF manifests raise typed errors") {
    // a valid envelope whose manifest lacks the required fields
    const std::string manifest = R"({"n_trees":1})";
    std::vector<std::uint8_t> bytes = {'N', 'D', 'X', 'F', 1, 0, 0, 0};
    const auto len = static_cast<std::uint32_t>(manifest.size());
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>((len >> (8 * i)) & 0xff));
    bytes.insert(bytes.end(), manifest.begin(), manifest.end());
    CHECK_THROWS_AS(forest_from_bytes(bytes), TruncatedPayload);
    CHECK_THROWS_AS(train_forest({{0.0}, {1.0}}, {0, 1}, 0, 1), Error);  // n_trees < 1
}

TEST_CASE("logistic fit on symmetric data has zero intercept") {
    // mirrored pairs (x, y) and (-x, 1-y) with overlapping class supports so
    // the MLE exists; symmetry forces the intercept to zero
    std::vector<double> x;
    std::vector<int> y;
    Rng rng(51);
    for (int i = 0; i < 100; ++i) {
        const int label = static_cast<int>(rng.uniform_int(2));
        const double v = rng.normal(label == 1 ? 0.5 : -0.5, 1.5);
        x.push_back(v);
        y.push_back(label);
        x.push_back(-v);
        y.push_back(1 - label);
    }
    const LogisticModel model = fit_logistic(x, y);
    CHECK(model.converged);
    CHECK(std::abs(model.intercept) < 1e-8);
    CHECK(model.slope > 0.0);
}

TEST_CASE("logistic recovery of beta = (-2.0, 1.5) from 10k draws") {
    Rng rng(61);
    std::vector<double> x;
    std::vector<int> y;
    for (int i = 0; i < 10000; ++i) {
        const double v = rng.uniform(-4.0, 4.0);
        const double p = 1.0 / (1.0 + std::exp(-(-2.0 + 1.5 * v)));
        x.push_back(v);
        y.push_back(rng.uniform() < p ? 1 : 0);
    }
    const LogisticModel model = fit_logistic(x, y);
    CHECK(model.converged);
    CHECK(std::abs(model.intercept - (-2.0)) < 0.1);
    CHECK(std::abs(model.slope - 1.5) < 0.1);
}

TEST_CASE("perfect separation is flagged and coefficients stay bounded") {
    std::vector<double> x;
    std::vector<int> y;
    for (int i = 0; i < 20; ++i) {
        x.push_back(i < 10 ? -2.0 - i * 0.1 : 2.0 + i * 0.1);
        y.push_back(i < 10 ? 0 : 1);
    }
    const LogisticModel model = fit_logistic(x, y);
    CHECK(!model.converged);
    CHECK(std::isfinite(model.intercept));
    CHECK(std::isfinite(model.slope));
    CHECK(std::sqrt(model.intercept * model.intercept + model.slope * model.slope) <= 1e4);
}

TEST_CASE("log-likelihood is non-decreasing across IRLS iterations") {
    Rng rng(71);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> x;
        std::vector<int> y;
        for (int i = 0; i < 60; ++i) {
            const double v = rng.normal(0.0, 2.0);
            const double p = 1.0 / (1.0 + std::exp(-(0.3 + 0.8 * v)));
            x.push_back(v);
            y.push_back(rng.uniform() < p ? 1 : 0);
        }
        std::vector<double> trace;
        fit_logistic_traced(x, y, &trace);
        for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-12);
    }
}

TEST_CASE("logistic probabilities: boundary, monotonicity, hand value") {
    LogisticModel model;
    model.intercept = -1.2;
    model.slope = 0.6;
    CHECK(logistic_proba(model, 1.2 / 0.6) == doctest::Approx(0.5));
    double prev = 0.0;
    for (double v = -10.0; v <= 10.0; v += 0.5) {
        const double p = logistic_proba(model, v);
        CHECK(p >= prev);
        prev = p;
    }
    LogisticModel unit;
    unit.intercept = 0.0;
    unit.slope = 1.0;
    CHECK(logistic_proba(unit, 0.0) == doctest::Approx(0.5));
}

TEST_CASE("single-class logistic input is rejected") {
    CHECK_THROWS_AS(fit_logistic({1.0, 2.0}, {1, 1}), SingleClassTrainingSet);
}

TEST_CASE("NDXL round-trips bit-exactly") {
    LogisticModel model;
    model.intercept = -2.3456789012345678;
    model.slope = 0.000123456789;
    model.converged = true;
    model.iterations = 13;
    const auto bytes = logistic_to_bytes(model);
    const LogisticModel back = logistic_from_bytes(bytes);
    CHECK(back == model);
    CHECK(logistic_to_bytes(back) == bytes);

    auto bad = bytes;
    bad[3] = 'Z';
    CHECK_THROWS_AS(logistic_from_bytes(bad), BadMagic);
}

}  // TEST_SUITE
