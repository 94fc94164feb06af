#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ldamend/errors.hpp"
#include "ldamend/types.hpp"

namespace ldamend {

enum class Activation : std::uint8_t { identity = 0, relu = 1, tanh = 2 };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation: " + std::string(s));
}

template <typename Derived>
auto apply_activation(Activation a, const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  Mat<Scalar> out = z;
  switch (a) {
    case Activation::identity: break;
    case Activation::relu: out = out.cwiseMax(Scalar(0)); break;
    case Activation::tanh: out = out.array().tanh().matrix(); break;
  }
  return out;
}

// Derivative of the activation expressed through its output, which is what
// the forward cache keeps.
template <typename Derived>
auto activation_derivative(Activation a, const Eigen::MatrixBase<Derived>& out) {
  using Scalar = typename Derived::Scalar;
  Mat<Scalar> d(out.rows(), out.cols());
  switch (a) {
    case Activation::identity: d.setOnes(); break;
    case Activation::relu: d = (out.array() > Scalar(0)).template cast<Scalar>().matrix(); break;
    case Activation::tanh: d = (Scalar(1) - out.array().square()).matrix(); break;
  }
  return d;
}

template <typename Scalar = double>
struct DenseLayer {
  Mat<Scalar> weights;  // out_dim x in_dim
  Vec<Scalar> bias;     // out_dim
  Activation activation = Activation::identity;

  Index in_dim() const { return weights.cols(); }
  Index out_dim() const { return weights.rows(); }
  Index parameter_count() const { return weights.size() + bias.size(); }

  void validate() const {
    if (bias.size() != weights.rows())
      throw DimensionError("dense layer bias has " + std::to_string(bias.size()) +
                           " entries, expected " + std::to_string(weights.rows()));
    if (!weights.allFinite() || !bias.allFinite())
      throw NumericError("dense layer holds non-finite parameters");
  }

  // Glorot-uniform weights, zero bias.
  static DenseLayer glorot(Index in_dim, Index out_dim, Activation act, Rng& rng) {
    if (in_dim <= 0 || out_dim <= 0) throw DimensionError("dense layer dimensions must be positive");
    const Scalar limit = std::sqrt(Scalar(6) / Scalar(in_dim + out_dim));
    std::uniform_real_distribution<Scalar> dist(-limit, limit);
    DenseLayer layer;
    layer.weights.resize(out_dim, in_dim);
    for (Index j = 0; j < in_dim; ++j)
      for (Index i = 0; i < out_dim; ++i) layer.weights(i, j) = dist(rng);
    layer.bias = Vec<Scalar>::Zero(out_dim);
    layer.activation = act;
    return layer;
  }
};

template <typename Scalar = double>
struct LayerGrad {
  Mat<Scalar> weights;
  Vec<Scalar> bias;
};

template <typename Scalar = double>
struct ForwardCache {
  std::uint64_t revision = 0;
  // inputs[l] is the input of layer l, outputs[l] its activated output; the
  // last output is the network output. Columns are samples.
  std::vector<Mat<Scalar>> inputs;
  std::vector<Mat<Scalar>> outputs;
};

template <typename Scalar = double>
struct BackwardResult {
  Mat<Scalar> input_grad;
  std::vector<LayerGrad<Scalar>> layers;
};

template <typename Scalar = double>
class Mlp {
 public:
  Mlp() = default;

  explicit Mlp(std::vector<DenseLayer<Scalar>> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw DimensionError("network needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      layers_[l].validate();
      if (l > 0 && layers_[l].in_dim() != layers_[l - 1].out_dim())
        throw DimensionError("layer " + std::to_string(l) + " expects " +
                             std::to_string(layers_[l].in_dim()) + " inputs but previous layer emits " +
                             std::to_string(layers_[l - 1].out_dim()));
    }
  }

  // dims = {in, h1, ..., out}; hidden layers use `hidden`, the last `output`.
  static Mlp create(std::span<const Index> dims, Activation hidden, Activation output, Rng& rng) {
    if (dims.size() < 2) throw DimensionError("network needs at least input and output dimensions");
    std::vector<DenseLayer<Scalar>> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      const bool last = l + 2 == dims.size();
      layers.push_back(DenseLayer<Scalar>::glorot(dims[l], dims[l + 1], last ? output : hidden, rng));
    }
    return Mlp(std::move(layers));
  }

  static Mlp create(std::initializer_list<Index> dims, Activation hidden, Activation output, Rng& rng) {
    std::vector<Index> d(dims);
    return create(std::span<const Index>(d), hidden, output, rng);
  }

  Index in_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
  Index out_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }
  std::size_t depth() const { return layers_.size(); }
  const std::vector<DenseLayer<Scalar>>& layers() const { return layers_; }
  const DenseLayer<Scalar>& layer(std::size_t l) const { return layers_.at(l); }
  std::uint64_t revision() const { return revision_; }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& layer : layers_) n += layer.parameter_count();
    return n;
  }

  // Flat parameter order: per layer, weights column-major then bias.
  Vec<Scalar> parameters() const {
    Vec<Scalar> p(parameter_count());
    Index off = 0;
    for (const auto& layer : layers_) {
      p.segment(off, layer.weights.size()) = layer.weights.reshaped();
      off += layer.weights.size();
      p.segment(off, layer.bias.size()) = layer.bias;
      off += layer.bias.size();
    }
    return p;
  }

  void set_parameters(const Vec<Scalar>& p) {
    if (p.size() != parameter_count())
      throw DimensionError("parameter vector has " + std::to_string(p.size()) + " entries, network has " +
                           std::to_string(parameter_count()));
    Index off = 0;
    for (auto& layer : layers_) {
      layer.weights.reshaped() = p.segment(off, layer.weights.size());
      off += layer.weights.size();
      layer.bias = p.segment(off, layer.bias.size());
      off += layer.bias.size();
    }
    ++revision_;
  }

  template <typename Derived>
  Mat<Scalar> forward(const Eigen::MatrixBase<Derived>& x, ForwardCache<Scalar>* cache = nullptr) const {
    if (layers_.empty()) throw DimensionError("forward on an empty network");
    if (x.rows() != in_dim())
      throw DimensionError("network expects inputs of size " + std::to_string(in_dim()) + ", got " +
                           std::to_string(x.rows()));
    Mat<Scalar> h = x;
    if (!h.allFinite()) throw NumericError("network input is not finite");
    if (cache) {
      cache->revision = revision_;
      cache->inputs.clear();
      cache->outputs.clear();
    }
    for (const auto& layer : layers_) {
      Mat<Scalar> z = layer.weights * h;
      z.colwise() += layer.bias;
      Mat<Scalar> out = apply_activation(layer.activation, z);
      if (cache) {
        cache->inputs.push_back(std::move(h));
        cache->outputs.push_back(out);
      }
      h = std::move(out);
    }
    return h;
  }

  // Gradients are summed over the batch columns.
  template <typename Derived>
  BackwardResult<Scalar> backward(const ForwardCache<Scalar>& cache,
                                  const Eigen::MatrixBase<Derived>& output_grad) const {
    if (cache.revision != revision_ || cache.inputs.size() != layers_.size())
      throw Error("forward cache does not belong to the current network state");
    const Index batch = cache.outputs.back().cols();
    if (output_grad.rows() != out_dim() || output_grad.cols() != batch)
      throw DimensionError("output gradient shape does not match the cached forward pass");
    BackwardResult<Scalar> result;
    result.layers.resize(layers_.size());
    Mat<Scalar> delta = output_grad;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const auto& layer = layers_[l];
      delta.array() *= activation_derivative(layer.activation, cache.outputs[l]).array();
      result.layers[l].weights = delta * cache.inputs[l].transpose();
      result.layers[l].bias = delta.rowwise().sum();
      delta = layer.weights.transpose() * delta;
    }
    result.input_grad = std::move(delta);
    return result;
  }

 private:
  std::vector<DenseLayer<Scalar>> layers_;
  std::uint64_t revision_ = 0;
};

template <typename Scalar>
Vec<Scalar> flatten(const std::vector<LayerGrad<Scalar>>& grads) {
  Index n = 0;
  for (const auto& g : grads) n += g.weights.size() + g.bias.size();
  Vec<Scalar> out(n);
  Index off = 0;
  for (const auto& g : grads) {
    out.segment(off, g.weights.size()) = g.weights.reshaped();
    off += g.weights.size();
    out.segment(off, g.bias.size()) = g.bias;
    off += g.bias.size();
  }
  return out;
}

}  // namespace ldamend
