#include "nodulekit/logistic.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace nodulekit {

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

double logistic_log_likelihood(const std::vector<double>& x, const std::vector<int>& y,
                               double intercept, double slope) {
    double ll = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double eta = intercept + slope * x[i];
        // log(sigmoid) written in the numerically safe form
        ll += y[i] == 1 ? -std::log1p(std::exp(-eta)) : -std::log1p(std::exp(eta));
    }
    return ll;
}

LogisticModel fit_logistic_traced(const std::vector<double>& x, const std::vector<int>& y,
                                  std::vector<double>* ll_trace) {
    if (x.size() < 2 || x.size() != y.size())
        throw SingleClassTrainingSet("fit_logistic: need at least 2 samples");
    bool has0 = false, has1 = false;
    for (const int label : y) {
        if (label == 1) has1 = true;
        else if (label == 0) has0 = true;
        else throw SingleClassTrainingSet("fit_logistic: labels must be 0 or 1");
    }
    if (!has0 || !has1)
        throw SingleClassTrainingSet("fit_logistic: both classes must be present");

    const std::size_t n = x.size();

    // standardize for IRLS conditioning; coefficients are back-transformed
    double mean = 0.0;
    for (const double v : x) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = (x[i] - mean) / sd;

    const auto back = [&](double b0, double b1) {
        return std::pair<double, double>{b0 - b1 * mean / sd, b1 / sd};
    };

    double b0 = 0.0, b1 = 0.0;
    double ll = logistic_log_likelihood(z, y, b0, b1);
    if (ll_trace) ll_trace->push_back(ll);

    LogisticModel model;
    constexpr int kMaxIterations = 100;
    constexpr double kTolerance = 1e-8;
    constexpr double kDivergenceNorm = 1e4;

    for (int iter = 1; iter <= kMaxIterations; ++iter) {
        double sw = 0, swz = 0, swzz = 0, swt = 0, swzt = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double eta = b0 + b1 * z[i];
            const double mu = sigmoid(eta);
            double w = mu * (1.0 - mu);
            if (w < 1e-10) w = 1e-10;
            const double t = eta + (y[i] - mu) / w;
            sw += w;
            swz += w * z[i];
            swzz += w * z[i] * z[i];
            swt += w * t;
            swzt += w * z[i] * t;
        }
        const double det = sw * swzz - swz * swz;
        if (std::abs(det) < 1e-300) break;
        const double nb0 = (swzz * swt - swz * swzt) / det;
        const double nb1 = (sw * swzt - swz * swt) / det;

        // step-halving keeps the log-likelihood non-decreasing
        double step = 1.0;
        double cb0 = nb0, cb1 = nb1, cll = logistic_log_likelihood(z, y, cb0, cb1);
        for (int halving = 0; halving < 30 && cll < ll; ++halving) {
            step /= 2.0;
            cb0 = b0 + step * (nb0 - b0);
            cb1 = b1 + step * (nb1 - b1);
            cll = logistic_log_likelihood(z, y, cb0, cb1);
        }
        if (cll < ll) break;  // no improving step exists

        const auto [prev_i, prev_s] = back(b0, b1);
        const auto [next_i, next_s] = back(cb0, cb1);
        model.iterations = iter;

        if (std::sqrt(next_i * next_i + next_s * next_s) > kDivergenceNorm) {
            // perfect separation: keep the last bounded iterate
            model.converged = false;
            model.intercept = prev_i;
            model.slope = prev_s;
            if (ll_trace) ll_trace->push_back(cll);
            return model;
        }

        b0 = cb0;
        b1 = cb1;
        ll = cll;
        if (ll_trace) ll_trace->push_back(ll);

        if (std::max(std::abs(next_i - prev_i), std::abs(next_s - prev_s)) < kTolerance) {
            model.converged = true;
            break;
        }
    }

    const auto [bi, bs] = back(b0, b1);
    model.intercept = bi;
    model.slope = bs;
    return model;
}

LogisticModel fit_logistic(const std::vector<double>& x, const std::vector<int>& y) {
    return fit_logistic_traced(x, y, nullptr);
}

double logistic_proba(const LogisticModel& model, double x) {
    return sigmoid(model.intercept + model.slope * x);
}

std::vector<std::uint8_t> logistic_to_bytes(const LogisticModel& model) {
    const nlohmann::json body = {{"intercept", model.intercept},
                                 {"slope", model.slope},
                                 {"converged", model.converged},
                                 {"iterations", model.iterations}};
    const std::string m = body.dump();
    std::vector<std::uint8_t> out = {'N', 'D', 'X', 'L'};
    put_u32le(out, 1);
    put_u32le(out, static_cast<std::uint32_t>(m.size()));
    out.insert(out.end(), m.begin(), m.end());
    return out;
}

LogisticModel logistic_from_bytes(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "NDXL", 4) != 0)
        throw BadMagic("NDXL: bad magic");
    if (bytes.size() < 12) throw TruncatedPayload("NDXL: truncated header");
    if (read_u32le(bytes.data() + 4) != 1) throw VersionUnsupported("NDXL: bad version");
    const std::uint32_t len = read_u32le(bytes.data() + 8);
    if (bytes.size() != 12 + static_cast<std::size_t>(len))
        throw TruncatedPayload("NDXL: body size mismatch");
    LogisticModel model;
    try {
        const nlohmann::json body = nlohmann::json::parse(bytes.begin() + 12, bytes.end());
        model.intercept = body.at("intercept").get<double>();
        model.slope = body.at("slope").get<double>();
        model.converged = body.at("converged").get<bool>();
        model.iterations = body.at("iterations").get<int>();
    } catch (const nlohmann::json::exception&) {
        throw TruncatedPayload("NDXL: malformed body");
    }
    return model;
}

void write_logistic(const LogisticModel& model, const std::filesystem::path& path) {
    const auto bytes = logistic_to_bytes(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

LogisticModel read_logistic(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return logistic_from_bytes(bytes);
}

}  // namespace nodulekit
