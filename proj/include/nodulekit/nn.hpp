#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nodulekit/patch.hpp"
#include "nodulekit/rng.hpp"

namespace nodulekit::nn {

enum class Arch { cnn21, cnn47 };
const char* arch_name(Arch a);
Arch arch_from_name(const std::string& name);

// Activations are stored channel-major per item ([channel][y][x]), which is
// exactly the NDX1 patch layout with slices as channels.

class Layer {
public:
    virtual ~Layer() = default;
    virtual const char* type() const = 0;
    virtual std::size_t input_size() const = 0;
    virtual std::size_t output_size() const = 0;

    // Batched forward; `train` enables dropout, which draws from `rng`.
    virtual void forward(const double* in, double* out, std::size_t batch, bool train,
                         Rng& rng) = 0;

    // Accumulates parameter gradients and writes grad_in. `in`/`out` are the
    // activations from the matching forward call.
    virtual void backward(const double* in, const double* out, const double* grad_out,
                          double* grad_in, std::size_t batch) = 0;

    virtual std::vector<std::span<double>> parameters() { return {}; }
    virtual std::vector<std::span<double>> gradients() { return {}; }
    void zero_gradients() {
        for (auto g : gradients())
            for (double& v : g) v = 0.0;
    }
};

// Valid (no padding) 2-D convolution over multi-channel input, shared across
// the batch. Weight layout per filter matches im2col column order:
// channel-major, then kernel row, then kernel column.
class Conv2D : public Layer {
public:
    Conv2D(int in_w, int in_h, int in_c, int kernel, int filters);
    const char* type() const override { return "conv2d"; }
    std::size_t input_size() const override;
    std::size_t output_size() const override;
    void forward(const double* in, double* out, std::size_t batch, bool train,
                 Rng& rng) override;
    void backward(const double* in, const double* out, const double* grad_out,
                  double* grad_in, std::size_t batch) override;
    std::vector<std::span<double>> parameters() override;
    std::vector<std::span<double>> gradients() override;

    int out_w() const { return in_w_ - kernel_ + 1; }
    int out_h() const { return in_h_ - kernel_ + 1; }
    int filters() const { return filters_; }
    int kernel() const { return kernel_; }
    int in_channels() const { return in_c_; }

private:
    void im2col(const double* item, std::vector<double>& cols) const;

    int in_w_, in_h_, in_c_, kernel_, filters_;
    std::vector<double> weights_, bias_;
    std::vector<double> grad_weights_, grad_bias_;
    std::vector<double> cols_;  // scratch
};

class Relu : public Layer {
public:
    explicit Relu(std::size_t size) : size_(size) {}
    const char* type() const override { return "relu"; }
    std::size_t input_size() const override { return size_; }
    std::size_t output_size() const override { return size_; }
    void forward(const double* in, double* out, std::size_t batch, bool train,
                 Rng& rng) override;
    void backward(const double* in, const double* out, const double* grad_out,
                  double* grad_in, std::size_t batch) override;

private:
    std::size_t size_;
};

// 2x2 max pooling with stride 2; trailing rows/columns that do not fill a
// window are dropped. Gradient flows only to the argmax position (first in
// scan order on ties).
class MaxPool2x2 : public Layer {
public:
    MaxPool2x2(int in_w, int in_h, int channels);
    const char* type() const override { return "maxpool2x2"; }
    std::size_t input_size() const override;
    std::size_t output_size() const override;
    void forward(const double* in, double* out, std::size_t batch, bool train,
                 Rng& rng) override;
    void backward(const double* in, const double* out, const double* grad_out,
                  double* grad_in, std::size_t batch) override;

    int out_w() const { return in_w_ / 2; }
    int out_h() const { return in_h_ / 2; }

private:
    int in_w_, in_h_, channels_;
};

// Inverted dropout: training scales kept units by 1/(1-p); eval is identity.
class Dropout : public Layer {
public:
    Dropout(std::size_t size, double rate) : size_(size), rate_(rate) {}
    const char* type() const override { return "dropout"; }
    std::size_t input_size() const override { return size_; }
    std::size_t output_size() const override { return size_; }
    void forward(const double* in, double* out, std::size_t batch, bool train,
                 Rng& rng) override;
    void backward(const double* in, const double* out, const double* grad_out,
                  double* grad_in, std::size_t batch) override;
    double rate() const { return rate_; }

private:
    std::size_t size_;
    double rate_;
    std::vector<double> mask_;  // scale factors from the last training forward
};

class Dense : public Layer {
public:
    Dense(std::size_t in, std::size_t out);
    const char* type() const override { return "dense"; }
    std::size_t input_size() const override { return in_; }
    std::size_t output_size() const override { return out_; }
    void forward(const double* in, double* out, std::size_t batch, bool train,
                 Rng& rng) override;
    void backward(const double* in, const double* out, const double* grad_out,
                  double* grad_in, std::size_t batch) override;
    std::vector<std::span<double>> parameters() override;
    std::vector<std::span<double>> gradients() override;

private:
    std::size_t in_, out_;
    std::vector<double> weights_, bias_;  // weights_[j*in_ + i]
    std::vector<double> grad_weights_, grad_bias_;
};

struct NetworkModel {
    Arch arch = Arch::cnn21;
    std::vector<std::unique_ptr<Layer>> layers;
    int feature_layer = -1;  // activation index holding the 200-unit features
    bool eval_mode = true;

    PatchShape input_shape() const;
    std::size_t parameter_count();
    std::vector<double> flatten_parameters();
    void set_parameters(const std::vector<double>& flat);
    void initialize(std::uint64_t seed);  // He-uniform weights, zero biases
};

// CNN21: conv5x5->32, pool, conv3x3->64, pool, dropout 25%, dense 200, relu,
// dropout 50%, dense 2. CNN47 adds a third convolution stage. Softmax is
// applied at the loss/prediction boundary.
NetworkModel build_network(Arch arch, std::uint64_t seed);

// Per-item forward pass; returns all activation planes (index 0 is the input,
// back() is the logits).
struct ForwardResult {
    std::vector<std::vector<double>> activations;
    std::vector<std::array<double, 2>> probabilities;
};

ForwardResult forward(NetworkModel& model, const double* batch, std::size_t batch_size,
                      bool train, Rng& rng);

// Convenience conversion: PatchSet items to a channel-major double batch.
std::vector<double> batch_from_patches(const PatchSet& set, std::size_t first,
                                       std::size_t count);

// Mean cross-entropy plus exact parameter gradients, accumulated in layers.
double gradients(NetworkModel& model, const double* batch, const int* labels,
                 std::size_t batch_size, Rng& rng);

// P(class 1) per item; independent of batch grouping.
std::vector<double> predict_proba(NetworkModel& model, const PatchSet& set);

// Post-ReLU activations of the 200-unit fully-connected layer.
std::vector<std::vector<double>> extract_cnn_features(NetworkModel& model,
                                                      const PatchSet& set);

void softmax2(const double* logits, double* probs);

}  // namespace nodulekit::nn
