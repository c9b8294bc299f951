#pragma once

#include <utility>
#include <vector>

#include "nodulekit/errors.hpp"

namespace nodulekit {

// Mann-Whitney AUC: P(score+ > score-) + 0.5 P(tie), computed exactly from a
// single sort with tie grouping.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// ROC points at every unique score threshold (descending) plus the (0,0)
// endpoint; the final point is (1,1). Trapezoidal area over these points
// equals auc() to rounding.
std::vector<std::pair<double, double>> roc_points(const std::vector<double>& scores,
                                                  const std::vector<int>& labels);

double trapezoid_area(const std::vector<std::pair<double, double>>& points);

struct Confusion {
    double acc = 0.0;
    double sens = 0.0;
    double spc = 0.0;
};

// Predict positive iff score >= threshold.
Confusion confusion_at(const std::vector<double>& scores, const std::vector<int>& labels,
                       double threshold = 0.5);

}  // namespace nodulekit
