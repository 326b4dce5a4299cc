#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "nwadapt/rng.hpp"
#include "nwadapt/tensor.hpp"

namespace nwadapt {

enum class LayerKind { conv2d, relu, maxpool2d, flatten, dense, dropout, softmax_output };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

// One entry of a sequential network. Only the fields of the layer's own kind
// are meaningful; the rest stay zero. softmax_output is the classifier head:
// a dense layer whose output is the logits (softmax lives in the loss).
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::string name;

  // conv2d
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t padding = 0;
  // conv2d and maxpool2d
  std::size_t stride = 1;
  // maxpool2d
  std::size_t window = 0;
  // dense and softmax_output
  std::size_t out_features = 0;
  std::size_t in_features = 0;
  // dropout
  double rate = 0.0;

  static LayerSpec conv(std::string name, std::size_t out_channels, std::size_t in_channels, std::size_t kernel,
                        std::size_t stride = 1, std::size_t padding = 0);
  static LayerSpec relu(std::string name);
  static LayerSpec maxpool(std::string name, std::size_t window, std::size_t stride);
  static LayerSpec flatten(std::string name);
  static LayerSpec dense(std::string name, std::size_t out_features, std::size_t in_features);
  static LayerSpec dropout(std::string name, double rate);
  static LayerSpec classifier(std::string name, std::size_t out_features, std::size_t in_features);

  bool parameterized() const {
    return kind == LayerKind::conv2d || kind == LayerKind::dense || kind == LayerKind::softmax_output;
  }
  // conv2d and dense; the classifier keeps its output width.
  bool prunable() const { return kind == LayerKind::conv2d || kind == LayerKind::dense; }
  // Output channels / units of a parameterized layer.
  std::size_t width() const { return kind == LayerKind::conv2d ? out_channels : out_features; }
  Shape weight_shape() const;
  Shape bias_shape() const;

  bool operator==(const LayerSpec&) const = default;
};

// Input shape is per sample, {C, H, W}.
struct NetworkSpec {
  Shape input;
  std::vector<LayerSpec> layers;

  bool operator==(const NetworkSpec&) const = default;
};

// Validates names and the whole shape chain; returns each layer's per-sample
// output shape ({C,H,W} for spatial layers, {F} after flatten/dense).
std::vector<Shape> infer_shapes(const NetworkSpec& spec);

NetworkSpec make_vgg16_spec(std::size_t num_classes, std::size_t input_hw, double dropout = 0.5);

// One conv3x3(pad 1) + relu + maxpool2 stage per width, then
// flatten -> fc6 -> relu -> dropout -> classifier.
NetworkSpec make_tiny_cnn_spec(std::size_t num_classes, std::size_t input_hw, const std::vector<std::size_t>& widths,
                               std::size_t fc_width = 64, double dropout = 0.5);

enum class Mode { train, eval };

template <typename Real>
struct LayerParams {
  BasicTensor<Real> weight;
  BasicTensor<Real> bias;

  bool operator==(const LayerParams&) const = default;
};

template <typename Real>
class BasicNetwork {
 public:
  BasicNetwork() = default;
  // Zero-initialized parameters. Fails on an invalid shape chain before
  // allocating anything.
  explicit BasicNetwork(NetworkSpec spec);

  // He-normal weights (stddev sqrt(2 / fan_in)), zero biases, drawn in layer
  // order.
  static BasicNetwork initialized(NetworkSpec spec, Rng& rng);

  const NetworkSpec& spec() const noexcept { return spec_; }
  const std::vector<LayerSpec>& layers() const noexcept { return spec_.layers; }
  const LayerSpec& layer(std::size_t i) const { return spec_.layers.at(i); }
  const Shape& input_shape() const noexcept { return spec_.input; }
  const std::vector<Shape>& output_shapes() const noexcept { return output_shapes_; }
  // Per-sample input shape of layer i.
  const Shape& layer_input_shape(std::size_t i) const { return i == 0 ? spec_.input : output_shapes_.at(i - 1); }
  std::size_t size() const noexcept { return spec_.layers.size(); }
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  // Empty tensors for non-parameterized layers.
  const LayerParams<Real>& params(std::size_t i) const { return params_.at(i); }
  LayerParams<Real>& params(std::size_t i) { return params_.at(i); }
  const std::vector<LayerParams<Real>>& all_params() const noexcept { return params_; }
  // Replaces all parameters; shapes must match the spec.
  void set_params(std::vector<LayerParams<Real>> params);

  // Dropout rate of every dropout layer.
  void set_dropout(double rate);

  Mode mode() const noexcept { return mode_; }
  void set_mode(Mode mode) noexcept { mode_ = mode; }

  template <typename Other>
  BasicNetwork<Other> cast() const {
    BasicNetwork<Other> out(spec_);
    std::vector<LayerParams<Other>> params;
    params.reserve(params_.size());
    for (const auto& p : params_) params.push_back({p.weight.template cast<Other>(), p.bias.template cast<Other>()});
    out.set_params(std::move(params));
    out.set_mode(mode_);
    return out;
  }

  bool operator==(const BasicNetwork&) const = default;

 private:
  NetworkSpec spec_;
  std::vector<Shape> output_shapes_;
  std::vector<LayerParams<Real>> params_;
  Mode mode_ = Mode::eval;
};

using Network = BasicNetwork<float>;
using NetworkD = BasicNetwork<double>;

// Backpropagation bookkeeping for one layer of one train-mode forward call.
template <typename Real>
struct TapeEntry {
  std::string name;
  std::size_t layer = 0;
  BasicTensor<Real> input;
  // dropout: scaled keep mask.
  BasicTensor<Real> aux;
  // maxpool2d: flat input offset of each output's maximum.
  std::vector<std::size_t> argmax;
  // Parameter shape at forward time; backward rejects a tape whose layer has
  // since been resized.
  Shape weight_shape;
};

template <typename Real>
struct ForwardResult {
  // [N, features] (the last layer's output flattened per sample).
  BasicTensor<Real> logits;
  // One entry per layer in train mode; empty in eval mode.
  std::vector<TapeEntry<Real>> tape;
  // Output of every layer, index-aligned with the spec, when requested.
  std::vector<BasicTensor<Real>> activations;
};

struct ForwardOptions {
  bool keep_activations = false;
  // Record a tape even in eval mode (gradient checks through eval forwards).
  bool force_tape = false;
};

// x is [N, C, H, W] matching the declared input shape. `rng` drives dropout
// and is required in train mode when any dropout rate is positive.
template <typename Real>
ForwardResult<Real> forward(const BasicNetwork<Real>& net, const BasicTensor<Real>& x, Rng* rng = nullptr,
                            ForwardOptions options = {});

// Eval-mode logits regardless of the network's mode.
template <typename Real>
BasicTensor<Real> predict(const BasicNetwork<Real>& net, const BasicTensor<Real>& x);

// Single eval-mode layer application; x is the batched input of layer i.
template <typename Real>
BasicTensor<Real> apply_layer(const BasicNetwork<Real>& net, std::size_t i, const BasicTensor<Real>& x);

template <typename Real>
struct Gradients {
  // Index-aligned with the network layers; empty for parameter-free layers.
  std::vector<LayerParams<Real>> params;
  // Gradient with respect to the network input.
  BasicTensor<Real> input;
};

template <typename Real>
Gradients<Real> backward(const BasicNetwork<Real>& net, const std::vector<TapeEntry<Real>>& tape,
                         const BasicTensor<Real>& dlogits);

}  // namespace nwadapt
