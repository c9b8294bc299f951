#include "nodulekit/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace nodulekit {

namespace {

void check_two_classes(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw SingleClass("scores and labels must be non-empty and equal length");
    bool has0 = false, has1 = false;
    for (const int y : labels) (y == 1 ? has1 : has0) = true;
    if (!has0 || !has1) throw SingleClass("both classes must be present");
}

}  // namespace

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_two_classes(scores, labels);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double pairs = 0.0;
    double neg_below = 0.0, pos_total = 0.0, neg_total = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        double pos_tie = 0.0, neg_tie = 0.0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? pos_tie : neg_tie) += 1.0;
            ++j;
        }
        pairs += pos_tie * neg_below + 0.5 * pos_tie * neg_tie;
        neg_below += neg_tie;
        pos_total += pos_tie;
        neg_total += neg_tie;
        i = j;
    }
    return pairs / (pos_total * neg_total);
}

std::vector<std::pair<double, double>> roc_points(const std::vector<double>& scores,
                                                  const std::vector<int>& labels) {
    check_two_classes(scores, labels);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double pos_total = 0.0, neg_total = 0.0;
    for (const int y : labels) (y == 1 ? pos_total : neg_total) += 1.0;

    std::vector<std::pair<double, double>> points{{0.0, 0.0}};
    double tp = 0.0, fp = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? tp : fp) += 1.0;
            ++j;
        }
        points.emplace_back(fp / neg_total, tp / pos_total);
        i = j;
    }
    return points;  // the last point is (1,1) by construction
}

double trapezoid_area(const std::vector<std::pair<double, double>>& points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        area += (points[i].first - points[i - 1].first) *
                (points[i].second + points[i - 1].second) / 2.0;
    return area;
}

Confusion confusion_at(const std::vector<double>& scores, const std::vector<int>& labels,
                       double threshold) {
    check_two_classes(scores, labels);
    double tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (labels[i] == 1) (predicted ? tp : fn) += 1.0;
        else (predicted ? fp : tn) += 1.0;
    }
    Confusion c;
    c.acc = (tp + tn) / static_cast<double>(scores.size());
    c.sens = tp / (tp + fn);
    c.spc = tn / (tn + fp);
    return c;
}

}  // namespace nodulekit
