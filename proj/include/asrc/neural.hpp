#pragma once

// Minimal dense-network engine: layers with manual backpropagation and an
// Adam optimizer. All arithmetic is in 64-bit floats.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace asrc::neural {

enum class Activation : std::uint8_t { Identity = 0, ReLU = 1, Sigmoid = 2 };

double sigmoid(double x);

struct DenseLayer {
    int out = 0;
    int in = 0;
    std::vector<double> w;  // out x in, row-major
    std::vector<double> b;  // out
    Activation act = Activation::Identity;

    int n_params() const { return out * in + out; }
};

/// Kaiming-style uniform init, bound sqrt(6/fan_in); biases zero.
DenseLayer make_layer(int out, int in, Activation act, std::mt19937_64& rng);

struct LayerCache {
    std::vector<double> input;
    std::vector<double> pre;  // pre-activation values
};

/// y = act(W x + b). The cache keeps what backward needs.
void layer_forward(const DenseLayer& layer, std::span<const double> x,
                   std::vector<double>& y, LayerCache& cache);

struct LayerGrads {
    std::vector<double> w;
    std::vector<double> b;

    void match(const DenseLayer& layer);
    void zero();
};

/// Accumulates dL/dW and dL/db into `grads` and writes dL/dx to `dx`.
void layer_backward(const DenseLayer& layer, const LayerCache& cache,
                    std::span<const double> dy, LayerGrads& grads,
                    std::vector<double>& dx);

using Mlp = std::vector<DenseLayer>;
using MlpCache = std::vector<LayerCache>;
using MlpGrads = std::vector<LayerGrads>;

void mlp_forward(const Mlp& net, std::span<const double> x,
                 std::vector<double>& y, MlpCache& cache);
void mlp_backward(const Mlp& net, const MlpCache& cache,
                  std::span<const double> dy, MlpGrads& grads,
                  std::vector<double>& dx);

MlpGrads make_grads(const Mlp& net);

/// Trainable weights plus biases. Linear readouts without bias are counted
/// where they are defined, not here.
long count_parameters(const Mlp& net);

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double lr = 0.002;
    double decay = 0.99;         // per-epoch learning-rate multiplier
    double l2_weight_decay = 0;  // optional true weight decay, off by default
};

/// Bias-corrected Adam over a fixed set of parameter blocks. The effective
/// learning rate for epoch e is lr * decay^e.
class Adam {
  public:
    Adam(std::vector<std::size_t> block_sizes, AdamParams hp);

    void step(const std::vector<std::span<double>>& params,
              const std::vector<std::span<const double>>& grads, int epoch);

    long step_count() const { return t_; }
    const AdamParams& params() const { return hp_; }

  private:
    AdamParams hp_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    long t_ = 0;
};

// Checkpoint block: shapes + f64 payload, round-trip exact.
void write_mlp(std::ostream& os, const Mlp& net);
Mlp read_mlp(std::istream& is);

}  // namespace asrc::neural
