#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nodulekit/errors.hpp"

namespace nodulekit {

struct LogisticModel {
    double intercept = 0.0;
    double slope = 0.0;
    bool converged = false;
    int iterations = 0;

    bool operator==(const LogisticModel&) const = default;
};

// Maximum-likelihood fit of P(y=1|x) = sigmoid(b0 + b1 x) by IRLS with
// step-halving (log-likelihood never decreases). x is standardized
// internally and the coefficients back-transformed. Stops when the max
// coefficient change drops below 1e-8 or after 100 iterations; a diverging
// coefficient norm (> 1e4, perfect separation) stops early with
// converged=false and the best iterate kept.
LogisticModel fit_logistic(const std::vector<double>& x, const std::vector<int>& y);

double logistic_proba(const LogisticModel& model, double x);

// Per-sample log-likelihood trace support for the monotonicity property.
double logistic_log_likelihood(const std::vector<double>& x, const std::vector<int>& y,
                               double intercept, double slope);

// Exposes the per-iteration log-likelihood values from the last fit path.
LogisticModel fit_logistic_traced(const std::vector<double>& x, const std::vector<int>& y,
                                  std::vector<double>* ll_trace);

// NDXL: magic, u32 version=1, u32 length, JSON {intercept, slope, converged,
// iterations}.
std::vector<std::uint8_t> logistic_to_bytes(const LogisticModel& model);
LogisticModel logistic_from_bytes(const std::vector<std::uint8_t>& bytes);
void write_logistic(const LogisticModel& model, const std::filesystem::path& path);
LogisticModel read_logistic(const std::filesystem::path& path);

}  // namespace nodulekit
