#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "imle/rng.hpp"
#include "imle/tensor.hpp"

namespace imle {

enum class Activation : std::uint8_t { kRelu = 0 };

// Generator nets map (latent, observation) to an action sequence; velocity
// nets map (x_t, observation, t) to a velocity with the same shape.
enum class NetKind : std::uint8_t { kGenerator = 0, kVelocity = 1 };

// [horizon, action_dim] layout of the flat network output.
struct OutputShape {
  std::size_t horizon = 0;
  std::size_t action_dim = 0;

  std::size_t width() const { return horizon * action_dim; }
  bool operator==(const OutputShape&) const = default;
};

// Weights and biases of every dense layer, in layer order. Also used for
// gradients and optimizer moments, which must shape-match the parameters.
struct ParameterSet {
  std::vector<DenseArray> weights;  // weights[k]: [layer_sizes[k], layer_sizes[k+1]]
  std::vector<DenseArray> biases;   // biases[k]: [layer_sizes[k+1]]

  // Zero-filled set with the same shapes as `like`.
  static ParameterSet ZerosLike(const ParameterSet& like);

  std::size_t Count() const;
  void SetZero();
  void AddScaled(const ParameterSet& other, double scale);
  void Scale(double s);
  bool SameShapes(const ParameterSet& other) const;

  // Flat view: W0, b0, W1, b1, ...
  double Get(std::size_t flat_index) const;
  void Set(std::size_t flat_index, double value);
  std::vector<double> Flatten() const;

  bool operator==(const ParameterSet&) const = default;
};

// Fully connected network, relu on hidden layers, linear output layer.
class GeneratorNet {
 public:
  GeneratorNet() = default;

  // Zero-initialized parameters. layer_sizes includes input and output width;
  // the output width must equal out.width().
  GeneratorNet(std::vector<std::size_t> layer_sizes, OutputShape out,
               NetKind kind = NetKind::kGenerator);

  // Weights ~ Uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)); zero biases.
  static GeneratorNet Initialized(std::vector<std::size_t> layer_sizes,
                                  OutputShape out, Rng& rng,
                                  NetKind kind = NetKind::kGenerator);

  const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
  std::size_t num_layers() const { return layer_sizes_.size() - 1; }
  std::size_t input_width() const { return layer_sizes_.front(); }
  std::size_t output_width() const { return layer_sizes_.back(); }
  OutputShape output_shape() const { return out_; }
  NetKind kind() const { return kind_; }
  Activation activation() const { return Activation::kRelu; }

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  DenseArray& weights(std::size_t k) { return params_.weights[k]; }
  const DenseArray& weights(std::size_t k) const { return params_.weights[k]; }
  DenseArray& biases(std::size_t k) { return params_.biases[k]; }
  const DenseArray& biases(std::size_t k) const { return params_.biases[k]; }

  std::size_t ParameterCount() const { return params_.Count(); }

  bool operator==(const GeneratorNet&) const = default;

 private:
  std::vector<std::size_t> layer_sizes_;
  OutputShape out_;
  NetKind kind_ = NetKind::kGenerator;
  ParameterSet params_;
};

// Single forward pass on input = concat(z, y). Returns [horizon, action_dim].
DenseArray Forward(const GeneratorNet& net, std::span<const double> z,
                   std::span<const double> y);

// Single forward pass on an already concatenated input row.
DenseArray ForwardInput(const GeneratorNet& net, std::span<const double> input);

// Batched forward: inputs [B, input_width] -> outputs [B, output_width].
DenseArray ForwardBatch(const GeneratorNet& net, const DenseArray& inputs);

// Reverse-mode gradients of <Forward(net, z, y), output_grad> w.r.t. every
// weight and bias.
ParameterSet Backward(const GeneratorNet& net, std::span<const double> z,
                      std::span<const double> y, const DenseArray& output_grad);

// Same as Backward on a concatenated input, accumulating into `grads`.
void AccumulateBackward(const GeneratorNet& net, std::span<const double> input,
                        std::span<const double> output_grad,
                        ParameterSet& grads);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
  AdamState() = default;
  AdamState(const GeneratorNet& net, AdamConfig config);

  AdamConfig config;
  std::uint64_t step_count = 0;
  ParameterSet first_moment;
  ParameterSet second_moment;
};

// Bias-corrected adaptive-moment update, in place. Throws NumericError naming
// the flat parameter index of the first non-finite gradient entry, before any
// parameter is touched.
void AdamStep(GeneratorNet& net, const ParameterSet& grads, AdamState& state);

}  // namespace imle
