#include "nodulekit/nn.hpp"

#include <cmath>

#include "nodulekit/errors.hpp"
#include "nodulekit/kernels.hpp"

namespace nodulekit::nn {

const char* arch_name(Arch a) { return a == Arch::cnn21 ? "cnn21" : "cnn47"; }

Arch arch_from_name(const std::string& name) {
    if (name == "cnn21") return Arch::cnn21;
    if (name == "cnn47") return Arch::cnn47;
    throw UnknownArchitecture("unknown architecture '" + name + "'");
}

// ---------------------------------------------------------------------------
// Conv2D

Conv2D::Conv2D(int in_w, int in_h, int in_c, int kernel, int filters)
    : in_w_(in_w), in_h_(in_h), in_c_(in_c), kernel_(kernel), filters_(filters) {
    const std::size_t per_filter = static_cast<std::size_t>(kernel) * kernel * in_c;
    weights_.assign(per_filter * filters, 0.0);
    bias_.assign(static_cast<std::size_t>(filters), 0.0);
    grad_weights_.assign(weights_.size(), 0.0);
    grad_bias_.assign(bias_.size(), 0.0);
    cols_.assign(static_cast<std::size_t>(out_w()) * out_h() * per_filter, 0.0);
}

std::size_t Conv2D::input_size() const {
    return static_cast<std::size_t>(in_w_) * in_h_ * in_c_;
}

std::size_t Conv2D::output_size() const {
    return static_cast<std::size_t>(out_w()) * out_h() * filters_;
}

void Conv2D::im2col(const double* item, std::vector<double>& cols) const {
    const int ow = out_w(), oh = out_h();
    const std::size_t per_filter = static_cast<std::size_t>(kernel_) * kernel_ * in_c_;
    std::size_t col = 0;
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
            double* dst = cols.data() + col * per_filter;
            for (int c = 0; c < in_c_; ++c) {
                const double* plane = item + static_cast<std::size_t>(c) * in_w_ * in_h_;
                for (int ky = 0; ky < kernel_; ++ky) {
                    const double* row = plane + static_cast<std::size_t>(oy + ky) * in_w_ + ox;
                    for (int kx = 0; kx < kernel_; ++kx) *dst++ = row[kx];
                }
            }
            ++col;
        }
}

void Conv2D::forward(const double* in, double* out, std::size_t batch, bool, Rng&) {
    const auto& ops = kernels::ops();
    const std::size_t per_filter = static_cast<std::size_t>(kernel_) * kernel_ * in_c_;
    const std::size_t positions = static_cast<std::size_t>(out_w()) * out_h();
    for (std::size_t b = 0; b < batch; ++b) {
        im2col(in + b * input_size(), cols_);
        double* out_item = out + b * output_size();
        for (int f = 0; f < filters_; ++f) {
            const double* w = weights_.data() + static_cast<std::size_t>(f) * per_filter;
            double* plane = out_item + static_cast<std::size_t>(f) * positions;
            for (std::size_t p = 0; p < positions; ++p)
                plane[p] = ops.dot(cols_.data() + p * per_filter, w, per_filter) +
                           bias_[static_cast<std::size_t>(f)];
        }
    }
}

void Conv2D::backward(const double* in, const double*, const double* grad_out,
                      double* grad_in, std::size_t batch) {
    const auto& ops = kernels::ops();
    const std::size_t per_filter = static_cast<std::size_t>(kernel_) * kernel_ * in_c_;
    const std::size_t positions = static_cast<std::size_t>(out_w()) * out_h();
    std::vector<double> grad_cols(positions * per_filter);

    for (std::size_t b = 0; b < batch; ++b) {
        im2col(in + b * input_size(), cols_);
        const double* g_item = grad_out + b * output_size();
        std::fill(grad_cols.begin(), grad_cols.end(), 0.0);

        for (int f = 0; f < filters_; ++f) {
            const double* g_plane = g_item + static_cast<std::size_t>(f) * positions;
            double* gw = grad_weights_.data() + static_cast<std::size_t>(f) * per_filter;
            const double* w = weights_.data() + static_cast<std::size_t>(f) * per_filter;
            double gb = 0.0;
            for (std::size_t p = 0; p < positions; ++p) {
                const double g = g_plane[p];
                if (g == 0.0) continue;
                ops.axpy(g, cols_.data() + p * per_filter, gw, per_filter);
                ops.axpy(g, w, grad_cols.data() + p * per_filter, per_filter);
                gb += g;
            }
            grad_bias_[static_cast<std::size_t>(f)] += gb;
        }

        // col2im scatter-add
        double* g_in = grad_in + b * input_size();
        std::fill(g_in, g_in + input_size(), 0.0);
        const int ow = out_w(), oh = out_h();
        std::size_t col = 0;
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                const double* src = grad_cols.data() + col * per_filter;
                for (int c = 0; c < in_c_; ++c) {
                    double* plane = g_in + static_cast<std::size_t>(c) * in_w_ * in_h_;
                    for (int ky = 0; ky < kernel_; ++ky) {
                        double* row = plane + static_cast<std::size_t>(oy + ky) * in_w_ + ox;
                        for (int kx = 0; kx < kernel_; ++kx) row[kx] += *src++;
                    }
                }
                ++col;
            }
    }
}

std::vector<std::span<double>> Conv2D::parameters() {
    return {std::span<double>(weights_), std::span<double>(bias_)};
}

std::vector<std::span<double>> Conv2D::gradients() {
    return {std::span<double>(grad_weights_), std::span<double>(grad_bias_)};
}

// ---------------------------------------------------------------------------
// Relu

void Relu::forward(const double* in, double* out, std::size_t batch, bool, Rng&) {
    kernels::ops().relu(in, out, size_ * batch);
}

void Relu::backward(const double* in, const double*, const double* grad_out,
                    double* grad_in, std::size_t batch) {
    const std::size_t n = size_ * batch;
    std::copy(grad_out, grad_out + n, grad_in);
    kernels::ops().relu_mask(in, grad_in, n);
}

// ---------------------------------------------------------------------------
// MaxPool2x2

MaxPool2x2::MaxPool2x2(int in_w, int in_h, int channels)
    : in_w_(in_w), in_h_(in_h), channels_(channels) {}

std::size_t MaxPool2x2::input_size() const {
    return static_cast<std::size_t>(in_w_) * in_h_ * channels_;
}

std::size_t MaxPool2x2::output_size() const {
    return static_cast<std::size_t>(out_w()) * out_h() * channels_;
}

void MaxPool2x2::forward(const double* in, double* out, std::size_t batch, bool, Rng&) {
    const int ow = out_w(), oh = out_h();
    for (std::size_t b = 0; b < batch; ++b)
        for (int c = 0; c < channels_; ++c) {
            const double* plane =
                in + b * input_size() + static_cast<std::size_t>(c) * in_w_ * in_h_;
            double* dst = out + b * output_size() + static_cast<std::size_t>(c) * ow * oh;
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const double* p = plane + static_cast<std::size_t>(2 * oy) * in_w_ + 2 * ox;
                    double m = p[0];
                    if (p[1] > m) m = p[1];
                    if (p[in_w_] > m) m = p[in_w_];
                    if (p[in_w_ + 1] > m) m = p[in_w_ + 1];
                    dst[static_cast<std::size_t>(oy) * ow + ox] = m;
                }
        }
}

void MaxPool2x2::backward(const double* in, const double*, const double* grad_out,
                          double* grad_in, std::size_t batch) {
    const int ow = out_w(), oh = out_h();
    std::fill(grad_in, grad_in + batch * input_size(), 0.0);
    for (std::size_t b = 0; b < batch; ++b)
        for (int c = 0; c < channels_; ++c) {
            const double* plane =
                in + b * input_size() + static_cast<std::size_t>(c) * in_w_ * in_h_;
            double* g_plane =
                grad_in + b * input_size() + static_cast<std::size_t>(c) * in_w_ * in_h_;
            const double* g_out =
                grad_out + b * output_size() + static_cast<std::size_t>(c) * ow * oh;
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const std::size_t base = static_cast<std::size_t>(2 * oy) * in_w_ + 2 * ox;
                    // first maximum in scan order receives the gradient
                    std::size_t best = base;
                    if (plane[base + 1] > plane[best]) best = base + 1;
                    if (plane[base + in_w_] > plane[best]) best = base + in_w_;
                    if (plane[base + in_w_ + 1] > plane[best]) best = base + in_w_ + 1;
                    g_plane[best] += g_out[static_cast<std::size_t>(oy) * ow + ox];
                }
        }
}

// ---------------------------------------------------------------------------
// Dropout

void Dropout::forward(const double* in, double* out, std::size_t batch, bool train,
                      Rng& rng) {
    const std::size_t n = size_ * batch;
    if (!train) {
        std::copy(in, in + n, out);
        return;
    }
    mask_.resize(n);
    const double scale = 1.0 / (1.0 - rate_);
    for (std::size_t i = 0; i < n; ++i) {
        mask_[i] = rng.uniform() < rate_ ? 0.0 : scale;
        out[i] = in[i] * mask_[i];
    }
}

void Dropout::backward(const double*, const double*, const double* grad_out,
                       double* grad_in, std::size_t batch) {
    const std::size_t n = size_ * batch;
    if (mask_.size() != n) throw ShapeMismatch("dropout backward without matching forward");
    for (std::size_t i = 0; i < n; ++i) grad_in[i] = grad_out[i] * mask_[i];
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::size_t in, std::size_t out) : in_(in), out_(out) {
    weights_.assign(in * out, 0.0);
    bias_.assign(out, 0.0);
    grad_weights_.assign(in * out, 0.0);
    grad_bias_.assign(out, 0.0);
}

void Dense::forward(const double* in, double* out, std::size_t batch, bool, Rng&) {
    const auto& ops = kernels::ops();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* x = in + b * in_;
        double* y = out + b * out_;
        for (std::size_t j = 0; j < out_; ++j)
            y[j] = ops.dot(x, weights_.data() + j * in_, in_) + bias_[j];
    }
}

void Dense::backward(const double* in, const double*, const double* grad_out,
                     double* grad_in, std::size_t batch) {
    const auto& ops = kernels::ops();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* x = in + b * in_;
        const double* g = grad_out + b * out_;
        double* gi = grad_in + b * in_;
        std::fill(gi, gi + in_, 0.0);
        for (std::size_t j = 0; j < out_; ++j) {
            if (g[j] != 0.0) {
                ops.axpy(g[j], x, grad_weights_.data() + j * in_, in_);
                ops.axpy(g[j], weights_.data() + j * in_, gi, in_);
            }
            grad_bias_[j] += g[j];
        }
    }
}

std::vector<std::span<double>> Dense::parameters() {
    return {std::span<double>(weights_), std::span<double>(bias_)};
}

std::vector<std::span<double>> Dense::gradients() {
    return {std::span<double>(grad_weights_), std::span<double>(grad_bias_)};
}

// ---------------------------------------------------------------------------
// NetworkModel

PatchShape NetworkModel::input_shape() const {
    return arch == Arch::cnn21 ? PatchShape{21, 21, 5} : PatchShape{47, 47, 5};
}

std::size_t NetworkModel::parameter_count() {
    std::size_t n = 0;
    for (auto& layer : layers)
        for (const auto p : layer->parameters()) n += p.size();
    return n;
}

std::vector<double> NetworkModel::flatten_parameters() {
    std::vector<double> flat;
    for (auto& layer : layers)
        for (const auto p : layer->parameters()) flat.insert(flat.end(), p.begin(), p.end());
    return flat;
}

void NetworkModel::set_parameters(const std::vector<double>& flat) {
    std::size_t at = 0;
    for (auto& layer : layers)
        for (auto p : layer->parameters()) {
            if (at + p.size() > flat.size())
                throw ShapeMismatch("set_parameters: flat vector too short");
            std::copy(flat.begin() + static_cast<long>(at),
                      flat.begin() + static_cast<long>(at + p.size()), p.begin());
            at += p.size();
        }
    if (at != flat.size()) throw ShapeMismatch("set_parameters: flat vector too long");
}

void NetworkModel::initialize(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "init"));
    for (auto& layer : layers) {
        const auto params = layer->parameters();
        if (params.empty()) continue;
        // params[0] is the weight tensor, params[1] the bias
        double fan_in = 0.0;
        if (auto* conv = dynamic_cast<Conv2D*>(layer.get()))
            fan_in = static_cast<double>(conv->kernel()) * conv->kernel() * conv->in_channels();
        else
            fan_in = static_cast<double>(layer->input_size());
        const double limit = std::sqrt(6.0 / fan_in);
        for (double& w : params[0]) w = rng.uniform(-limit, limit);
        for (double& b : params[1]) b = 0.0;
    }
}

NetworkModel build_network(Arch arch, std::uint64_t seed) {
    NetworkModel model;
    model.arch = arch;
    auto& L = model.layers;
    if (arch == Arch::cnn21) {
        L.push_back(std::make_unique<Conv2D>(21, 21, 5, 5, 32));  // -> 32x17x17
        L.push_back(std::make_unique<Relu>(32u * 17 * 17));
        L.push_back(std::make_unique<MaxPool2x2>(17, 17, 32));    // -> 32x8x8
        L.push_back(std::make_unique<Conv2D>(8, 8, 32, 3, 64));   // -> 64x6x6
        L.push_back(std::make_unique<Relu>(64u * 6 * 6));
        L.push_back(std::make_unique<MaxPool2x2>(6, 6, 64));      // -> 64x3x3 = 576
        L.push_back(std::make_unique<Dropout>(576, 0.25));
        L.push_back(std::make_unique<Dense>(576, 200));
        L.push_back(std::make_unique<Relu>(200));
        L.push_back(std::make_unique<Dropout>(200, 0.50));
        L.push_back(std::make_unique<Dense>(200, 2));
    } else {
        L.push_back(std::make_unique<Conv2D>(47, 47, 5, 5, 32));  // -> 32x43x43
        L.push_back(std::make_unique<Relu>(32u * 43 * 43));
        L.push_back(std::make_unique<MaxPool2x2>(43, 43, 32));    // -> 32x21x21
        L.push_back(std::make_unique<Conv2D>(21, 21, 32, 5, 64)); // -> 64x17x17
        L.push_back(std::make_unique<Relu>(64u * 17 * 17));
        L.push_back(std::make_unique<MaxPool2x2>(17, 17, 64));    // -> 64x8x8
        L.push_back(std::make_unique<Conv2D>(8, 8, 64, 3, 128));  // -> 128x6x6 = 4608
        L.push_back(std::make_unique<Relu>(128u * 6 * 6));
        L.push_back(std::make_unique<Dropout>(4608, 0.25));
        L.push_back(std::make_unique<Dense>(4608, 200));
        L.push_back(std::make_unique<Relu>(200));
        L.push_back(std::make_unique<Dropout>(200, 0.50));
        L.push_back(std::make_unique<Dense>(200, 2));
    }
    // activation index of the ReLU after the 200-unit dense layer
    for (std::size_t i = 0; i < L.size(); ++i)
        if (std::string(L[i]->type()) == "relu" && L[i]->output_size() == 200)
            model.feature_layer = static_cast<int>(i + 1);
    model.initialize(seed);
    return model;
}

void softmax2(const double* logits, double* probs) {
    const double m = logits[0] > logits[1] ? logits[0] : logits[1];
    const double e0 = std::exp(logits[0] - m);
    const double e1 = std::exp(logits[1] - m);
    const double denom = e0 + e1;
    probs[0] = e0 / denom;
    probs[1] = e1 / denom;
}

ForwardResult forward(NetworkModel& model, const double* batch, std::size_t batch_size,
                      bool train, Rng& rng) {
    if (model.layers.empty()) throw ShapeMismatch("forward: empty network");
    ForwardResult result;
    result.activations.resize(model.layers.size() + 1);
    result.activations[0].assign(batch, batch + batch_size * model.layers[0]->input_size());
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        Layer& layer = *model.layers[i];
        result.activations[i + 1].resize(batch_size * layer.output_size());
        layer.forward(result.activations[i].data(), result.activations[i + 1].data(),
                      batch_size, train, rng);
    }
    const auto& logits = result.activations.back();
    result.probabilities.resize(batch_size);
    for (std::size_t b = 0; b < batch_size; ++b)
        softmax2(logits.data() + 2 * b, result.probabilities[b].data());
    return result;
}

std::vector<double> batch_from_patches(const PatchSet& set, std::size_t first,
                                       std::size_t count) {
    std::vector<double> batch;
    if (count == 0) return batch;
    const std::size_t item = set.patches.at(first).values.size();
    batch.resize(count * item);
    for (std::size_t i = 0; i < count; ++i) {
        const Patch& p = set.patches.at(first + i);
        if (p.values.size() != item) throw ShapeMismatch("batch_from_patches: ragged set");
        for (std::size_t j = 0; j < item; ++j)
            batch[i * item + j] = static_cast<double>(p.values[j]);
    }
    return batch;
}

double gradients(NetworkModel& model, const double* batch, const int* labels,
                 std::size_t batch_size, Rng& rng) {
    for (auto& layer : model.layers) layer->zero_gradients();
    ForwardResult fwd = forward(model, batch, batch_size, true, rng);

    // softmax cross-entropy: dlogits = (p - onehot)/batch
    double loss = 0.0;
    std::vector<double> grad(batch_size * 2);
    for (std::size_t b = 0; b < batch_size; ++b) {
        const int y = labels[b];
        if (y != 0 && y != 1) throw ShapeMismatch("gradients: labels must be 0 or 1");
        const auto& p = fwd.probabilities[b];
        const double py = p[static_cast<std::size_t>(y)];
        loss -= std::log(py > 1e-300 ? py : 1e-300);
        grad[2 * b] = (p[0] - (y == 0 ? 1.0 : 0.0)) / static_cast<double>(batch_size);
        grad[2 * b + 1] = (p[1] - (y == 1 ? 1.0 : 0.0)) / static_cast<double>(batch_size);
    }
    loss /= static_cast<double>(batch_size);

    std::vector<double> grad_in;
    for (std::size_t i = model.layers.size(); i-- > 0;) {
        Layer& layer = *model.layers[i];
        grad_in.resize(batch_size * layer.input_size());
        layer.backward(fwd.activations[i].data(), fwd.activations[i + 1].data(), grad.data(),
                       grad_in.data(), batch_size);
        grad.swap(grad_in);
    }
    return loss;
}

std::vector<double> predict_proba(NetworkModel& model, const PatchSet& set) {
    const PatchShape want = model.input_shape();
    std::vector<double> out;
    out.reserve(set.patches.size());
    Rng rng(0);  // unused in eval mode
    for (std::size_t i = 0; i < set.patches.size(); ++i) {
        if (!(set.patches[i].shape == want))
            throw ShapeMismatch("predict_proba: patch shape mismatch");
        const auto batch = batch_from_patches(set, i, 1);
        const ForwardResult fwd = forward(model, batch.data(), 1, false, rng);
        out.push_back(fwd.probabilities[0][1]);
    }
    return out;
}

std::vector<std::vector<double>> extract_cnn_features(NetworkModel& model,
                                                      const PatchSet& set) {
    const PatchShape want = model.input_shape();
    if (model.feature_layer < 0) throw ShapeMismatch("extract_cnn_features: no feature tap");
    std::vector<std::vector<double>> out;
    out.reserve(set.patches.size());
    Rng rng(0);
    for (std::size_t i = 0; i < set.patches.size(); ++i) {
        if (!(set.patches[i].shape == want))
            throw ShapeMismatch("extract_cnn_features: patch shape mismatch");
        const auto batch = batch_from_patches(set, i, 1);
        ForwardResult fwd = forward(model, batch.data(), 1, false, rng);
        out.push_back(std::move(fwd.activations[static_cast<std::size_t>(model.feature_layer)]));
    }
    return out;
}

}  // namespace nodulekit::nn
