#include "imle/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "imle/errors.hpp"

namespace imle {

namespace {

void CheckInputWidth(const GeneratorNet& net, std::size_t width) {
  if (width != net.input_width()) {
    throw DimensionError("layer 0 expects input width " +
                         std::to_string(net.input_width()) + ", got " +
                         std::to_string(width));
  }
}

// out[b, :] = in[b, :] * W + bias for a [rows, n_in] block.
constexpr std::size_t kTileRows = 4;
constexpr std::size_t kTileCols = 8;

// out[r, j0:j0+kTileCols] for kTileRows rows, accumulated in registers.
inline void DenseTile(const double* x, std::size_t n_in, const double* wd,
                      std::size_t n_out, const double* bd, std::size_t j0,
                      double* out) {
  double acc[kTileRows][kTileCols];
  for (std::size_t r = 0; r < kTileRows; ++r) {
    for (std::size_t c = 0; c < kTileCols; ++c) acc[r][c] = bd[j0 + c];
  }
  for (std::size_t i = 0; i < n_in; ++i) {
    const double* wrow = wd + i * n_out + j0;
    for (std::size_t r = 0; r < kTileRows; ++r) {
      const double xi = x[r * n_in + i];
      for (std::size_t c = 0; c < kTileCols; ++c) acc[r][c] += xi * wrow[c];
    }
  }
  for (std::size_t r = 0; r < kTileRows; ++r) {
    for (std::size_t c = 0; c < kTileCols; ++c) out[r * n_out + j0 + c] = acc[r][c];
  }
}

// out[0:n_out] for one row, streaming over weight rows.
inline void DenseRow(const double* x, std::size_t n_in, const double* wd,
                     std::size_t n_out, const double* bd, std::size_t j0,
                     double* out) {
  std::copy(bd + j0, bd + n_out, out + j0);
  for (std::size_t i = 0; i < n_in; ++i) {
    const double xi = x[i];
    const double* wrow = wd + i * n_out;
    for (std::size_t j = j0; j < n_out; ++j) out[j] += xi * wrow[j];
  }
}

void DenseLayer(const double* in, std::size_t rows, std::size_t n_in,
                const DenseArray& w, const DenseArray& bias, bool relu,
                double* out) {
  const std::size_t n_out = bias.size();
  const double* wd = w.values().data();
  const double* bd = bias.values().data();
  const std::size_t tiled_cols = n_out - n_out % kTileCols;
  std::size_t b = 0;
  for (; b + kTileRows <= rows; b += kTileRows) {
    for (std::size_t j0 = 0; j0 < tiled_cols; j0 += kTileCols) {
      DenseTile(in + b * n_in, n_in, wd, n_out, bd, j0, out + b * n_out);
    }
    if (tiled_cols < n_out) {
      for (std::size_t r = b; r < b + kTileRows; ++r) {
        DenseRow(in + r * n_in, n_in, wd, n_out, bd, tiled_cols, out + r * n_out);
      }
    }
  }
  for (; b < rows; ++b) {
    DenseRow(in + b * n_in, n_in, wd, n_out, bd, 0, out + b * n_out);
  }
  if (relu) {
    for (std::size_t k = 0; k < rows * n_out; ++k) out[k] = out[k] > 0.0 ? out[k] : 0.0;
  }
}

void CheckFinite(const DenseArray& out) {
  if (!out.AllFinite()) {
    throw NumericError("forward produced a non-finite output");
  }
}

}  // namespace

ParameterSet ParameterSet::ZerosLike(const ParameterSet& like) {
  ParameterSet p;
  for (const auto& w : like.weights) p.weights.emplace_back(w.shape(), 0.0);
  for (const auto& b : like.biases) p.biases.emplace_back(b.shape(), 0.0);
  return p;
}

std::size_t ParameterSet::Count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

void ParameterSet::SetZero() {
  for (auto& w : weights) w.Fill(0.0);
  for (auto& b : biases) b.Fill(0.0);
}

void ParameterSet::AddScaled(const ParameterSet& other, double scale) {
  if (!SameShapes(other)) throw DimensionError("ParameterSet shape mismatch");
  for (std::size_t k = 0; k < weights.size(); ++k) {
    auto dst = weights[k].values();
    auto src = other.weights[k].values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
    auto bdst = biases[k].values();
    auto bsrc = other.biases[k].values();
    for (std::size_t i = 0; i < bdst.size(); ++i) bdst[i] += scale * bsrc[i];
  }
}

void ParameterSet::Scale(double s) {
  for (auto& w : weights)
    for (double& v : w.values()) v *= s;
  for (auto& b : biases)
    for (double& v : b.values()) v *= s;
}

bool ParameterSet::SameShapes(const ParameterSet& other) const {
  if (weights.size() != other.weights.size() ||
      biases.size() != other.biases.size()) {
    return false;
  }
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k].shape() != other.weights[k].shape()) return false;
    if (biases[k].shape() != other.biases[k].shape()) return false;
  }
  return true;
}

double ParameterSet::Get(std::size_t flat_index) const {
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (flat_index < weights[k].size()) return weights[k][flat_index];
    flat_index -= weights[k].size();
    if (flat_index < biases[k].size()) return biases[k][flat_index];
    flat_index -= biases[k].size();
  }
  throw DimensionError("parameter index out of range");
}

void ParameterSet::Set(std::size_t flat_index, double value) {
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (flat_index < weights[k].size()) {
      weights[k][flat_index] = value;
      return;
    }
    flat_index -= weights[k].size();
    if (flat_index < biases[k].size()) {
      biases[k][flat_index] = value;
      return;
    }
    flat_index -= biases[k].size();
  }
  throw DimensionError("parameter index out of range");
}

std::vector<double> ParameterSet::Flatten() const {
  std::vector<double> flat;
  flat.reserve(Count());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    flat.insert(flat.end(), weights[k].data().begin(), weights[k].data().end());
    flat.insert(flat.end(), biases[k].data().begin(), biases[k].data().end());
  }
  return flat;
}

GeneratorNet::GeneratorNet(std::vector<std::size_t> layer_sizes,
                           OutputShape out, NetKind kind)
    : layer_sizes_(std::move(layer_sizes)), out_(out), kind_(kind) {
  if (layer_sizes_.size() < 2) {
    throw DimensionError("GeneratorNet needs at least input and output widths");
  }
  if (layer_sizes_.back() != out_.width()) {
    throw DimensionError("output width " + std::to_string(layer_sizes_.back()) +
                         " != horizon x action_dim = " +
                         std::to_string(out_.width()));
  }
  for (std::size_t k = 0; k + 1 < layer_sizes_.size(); ++k) {
    if (layer_sizes_[k] == 0 || layer_sizes_[k + 1] == 0) {
      throw DimensionError("layer " + std::to_string(k) + " has zero width");
    }
    params_.weights.emplace_back(
        std::vector<std::size_t>{layer_sizes_[k], layer_sizes_[k + 1]}, 0.0);
    params_.biases.emplace_back(std::vector<std::size_t>{layer_sizes_[k + 1]},
                                0.0);
  }
}

GeneratorNet GeneratorNet::Initialized(std::vector<std::size_t> layer_sizes,
                                       OutputShape out, Rng& rng,
                                       NetKind kind) {
  GeneratorNet net(std::move(layer_sizes), out, kind);
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    const double fan_in = static_cast<double>(net.layer_sizes_[k]);
    const double fan_out = static_cast<double>(net.layer_sizes_[k + 1]);
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : net.weights(k).values()) v = rng.Uniform(-a, a);
  }
  return net;
}

DenseArray ForwardBatch(const GeneratorNet& net, const DenseArray& inputs) {
  if (inputs.rank() != 2) {
    throw DimensionError("ForwardBatch expects [batch, width] inputs, got " +
                         ShapeString(inputs.shape()));
  }
  CheckInputWidth(net, inputs.dim(1));
  const std::size_t rows = inputs.dim(0);
  std::vector<double> cur(inputs.values().begin(), inputs.values().end());
  std::vector<double> next;
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    const std::size_t n_in = net.layer_sizes()[k];
    const std::size_t n_out = net.layer_sizes()[k + 1];
    next.assign(rows * n_out, 0.0);
    DenseLayer(cur.data(), rows, n_in, net.weights(k), net.biases(k),
               k + 1 < net.num_layers(), next.data());
    cur.swap(next);
  }
  DenseArray out({rows, net.output_width()}, std::move(cur));
  CheckFinite(out);
  return out;
}

DenseArray ForwardInput(const GeneratorNet& net, std::span<const double> input) {
  CheckInputWidth(net, input.size());
  DenseArray batch({1, input.size()},
                   std::vector<double>(input.begin(), input.end()));
  const OutputShape shape = net.output_shape();
  return ForwardBatch(net, batch).Reshaped({shape.horizon, shape.action_dim});
}

DenseArray Forward(const GeneratorNet& net, std::span<const double> z,
                   std::span<const double> y) {
  if (z.size() + y.size() != net.input_width()) {
    throw DimensionError("layer 0 expects input width " +
                         std::to_string(net.input_width()) + ", got dim(z) + "
                         "dim(y) = " + std::to_string(z.size() + y.size()));
  }
  std::vector<double> input(z.begin(), z.end());
  input.insert(input.end(), y.begin(), y.end());
  return ForwardInput(net, input);
}

void AccumulateBackward(const GeneratorNet& net, std::span<const double> input,
                        std::span<const double> output_grad,
                        ParameterSet& grads) {
  CheckInputWidth(net, input.size());
  if (output_grad.size() != net.output_width()) {
    throw DimensionError("output_grad has " +
                         std::to_string(output_grad.size()) +
                         " entries, layer " + std::to_string(net.num_layers() - 1) +
                         " produces " + std::to_string(net.output_width()));
  }
  if (!grads.SameShapes(net.params())) {
    throw DimensionError("gradient accumulator does not match net parameters");
  }
  const std::size_t layers = net.num_layers();

  // activations[k] is the input of layer k (post-relu of layer k-1).
  std::vector<std::vector<double>> activations(layers);
  activations[0].assign(input.begin(), input.end());
  for (std::size_t k = 0; k + 1 < layers; ++k) {
    activations[k + 1].assign(net.layer_sizes()[k + 1], 0.0);
    DenseLayer(activations[k].data(), 1, net.layer_sizes()[k], net.weights(k),
               net.biases(k), true, activations[k + 1].data());
  }

  std::vector<double> delta(output_grad.begin(), output_grad.end());
  std::vector<double> prev;
  for (std::size_t kk = layers; kk-- > 0;) {
    const std::size_t n_in = net.layer_sizes()[kk];
    const std::size_t n_out = net.layer_sizes()[kk + 1];
    const std::vector<double>& a = activations[kk];
    double* gw = grads.weights[kk].values().data();
    double* gb = grads.biases[kk].values().data();
    for (std::size_t j = 0; j < n_out; ++j) gb[j] += delta[j];
    for (std::size_t i = 0; i < n_in; ++i) {
      const double ai = a[i];
      if (ai == 0.0) continue;
      double* row = gw + i * n_out;
      for (std::size_t j = 0; j < n_out; ++j) row[j] += ai * delta[j];
    }
    if (kk == 0) break;
    const double* w = net.weights(kk).values().data();
    prev.assign(n_in, 0.0);
    for (std::size_t i = 0; i < n_in; ++i) {
      // relu'(pre) == (post > 0)
      if (a[i] <= 0.0) continue;
      const double* row = w + i * n_out;
      double s = 0.0;
      for (std::size_t j = 0; j < n_out; ++j) s += row[j] * delta[j];
      prev[i] = s;
    }
    delta.swap(prev);
  }
}

ParameterSet Backward(const GeneratorNet& net, std::span<const double> z,
                      std::span<const double> y, const DenseArray& output_grad) {
  const OutputShape shape = net.output_shape();
  if (output_grad.size() != shape.width()) {
    throw DimensionError("output_grad shape " + ShapeString(output_grad.shape()) +
                         " does not match forward output [" +
                         std::to_string(shape.horizon) + ", " +
                         std::to_string(shape.action_dim) + "]");
  }
  if (z.size() + y.size() != net.input_width()) {
    throw DimensionError("layer 0 expects input width " +
                         std::to_string(net.input_width()) + ", got " +
                         std::to_string(z.size() + y.size()));
  }
  std::vector<double> input(z.begin(), z.end());
  input.insert(input.end(), y.begin(), y.end());
  ParameterSet grads = ParameterSet::ZerosLike(net.params());
  AccumulateBackward(net, input, output_grad.values(), grads);
  return grads;
}

AdamState::AdamState(const GeneratorNet& net, AdamConfig cfg)
    : config(cfg),
      first_moment(ParameterSet::ZerosLike(net.params())),
      second_moment(ParameterSet::ZerosLike(net.params())) {}

void AdamStep(GeneratorNet& net, const ParameterSet& grads, AdamState& state) {
  ParameterSet& params = net.params();
  if (!grads.SameShapes(params) || !state.first_moment.SameShapes(params) ||
      !state.second_moment.SameShapes(params)) {
    throw DimensionError("AdamStep: gradients/moments do not match parameters");
  }
  std::size_t flat = 0;
  for (std::size_t k = 0; k < grads.weights.size(); ++k) {
    for (const DenseArray* g : {&grads.weights[k], &grads.biases[k]}) {
      for (double v : g->values()) {
        if (!std::isfinite(v)) {
          throw NumericError("non-finite gradient at parameter index " +
                             std::to_string(flat));
        }
        ++flat;
      }
    }
  }

  const AdamConfig& c = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);

  auto update = [&](DenseArray& p, const DenseArray& g, DenseArray& m,
                    DenseArray& v) {
    auto pd = p.values();
    auto gd = g.values();
    auto md = m.values();
    auto vd = v.values();
    for (std::size_t i = 0; i < pd.size(); ++i) {
      md[i] = c.beta1 * md[i] + (1.0 - c.beta1) * gd[i];
      vd[i] = c.beta2 * vd[i] + (1.0 - c.beta2) * gd[i] * gd[i];
      const double m_hat = md[i] / bc1;
      const double v_hat = vd[i] / bc2;
      pd[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  };
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    update(params.weights[k], grads.weights[k], state.first_moment.weights[k],
           state.second_moment.weights[k]);
    update(params.biases[k], grads.biases[k], state.first_moment.biases[k],
           state.second_moment.biases[k]);
  }
}

}  // namespace imle
