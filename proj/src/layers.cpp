#include "nwadapt/layers.hpp"

#include <Eigen/Core>
#include <cmath>
#include <set>

#include "nwadapt/parallel.hpp"

namespace nwadapt {

namespace {

template <typename Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MatMap = Eigen::Map<RowMat<Real>>;
template <typename Real>
using ConstMatMap = Eigen::Map<const RowMat<Real>>;

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

[[noreturn]] void chain_error(const LayerSpec& layer, const std::string& what) {
  fail(ErrorKind::shape_mismatch, "layer '" + layer.name + "' (" + std::string(to_string(layer.kind)) + "): " + what);
}

// Lowers one C x H x W image into a (C*kh*kw) x (Ho*Wo) column matrix.
template <typename Real>
void im2col(const Real* image, const LayerSpec& s, std::size_t height, std::size_t width, std::size_t out_h,
            std::size_t out_w, Real* cols) {
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < s.in_channels; ++c) {
    for (std::size_t ki = 0; ki < s.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < s.kernel_w; ++kj) {
        Real* row = cols + ((c * s.kernel_h + ki) * s.kernel_w + kj) * plane;
        for (std::size_t oh = 0; oh < out_h; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * s.stride + ki) - static_cast<std::ptrdiff_t>(s.padding);
          for (std::size_t ow = 0; ow < out_w; ++ow) {
            const auto iw =
                static_cast<std::ptrdiff_t>(ow * s.stride + kj) - static_cast<std::ptrdiff_t>(s.padding);
            const bool inside = ih >= 0 && iw >= 0 && ih < static_cast<std::ptrdiff_t>(height) &&
                                iw < static_cast<std::ptrdiff_t>(width);
            row[oh * out_w + ow] =
                inside ? image[(c * height + static_cast<std::size_t>(ih)) * width + static_cast<std::size_t>(iw)]
                       : Real{0};
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters column gradients back into the image gradient.
template <typename Real>
void col2im(const Real* cols, const LayerSpec& s, std::size_t height, std::size_t width, std::size_t out_h,
            std::size_t out_w, Real* image) {
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < s.in_channels; ++c) {
    for (std::size_t ki = 0; ki < s.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < s.kernel_w; ++kj) {
        const Real* row = cols + ((c * s.kernel_h + ki) * s.kernel_w + kj) * plane;
        for (std::size_t oh = 0; oh < out_h; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * s.stride + ki) - static_cast<std::ptrdiff_t>(s.padding);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(height)) continue;
          for (std::size_t ow = 0; ow < out_w; ++ow) {
            const auto iw =
                static_cast<std::ptrdiff_t>(ow * s.stride + kj) - static_cast<std::ptrdiff_t>(s.padding);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(width)) continue;
            image[(c * height + static_cast<std::size_t>(ih)) * width + static_cast<std::size_t>(iw)] +=
                row[oh * out_w + ow];
          }
        }
      }
    }
  }
}

Shape batched(std::size_t n, const Shape& per_sample) {
  Shape s{n};
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return s;
}

template <typename Real>
BasicTensor<Real> conv_forward(const LayerSpec& s, const LayerParams<Real>& p, const BasicTensor<Real>& x,
                               const Shape& out_shape) {
  const std::size_t n = x.extent(0), height = x.extent(2), width = x.extent(3);
  const std::size_t out_h = out_shape[1], out_w = out_shape[2];
  const std::size_t patch = s.in_channels * s.kernel_h * s.kernel_w;
  const std::size_t plane = out_h * out_w;
  BasicTensor<Real> y(batched(n, out_shape));
  const ConstMatMap<Real> w(p.weight.raw(), static_cast<Eigen::Index>(s.out_channels),
                            static_cast<Eigen::Index>(patch));
  parallel_for(n, [&](std::size_t i) {
    std::vector<Real> cols(patch * plane);
    im2col(x.raw() + i * s.in_channels * height * width, s, height, width, out_h, out_w, cols.data());
    const ConstMatMap<Real> colm(cols.data(), static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(plane));
    MatMap<Real> out(y.raw() + i * s.out_channels * plane, static_cast<Eigen::Index>(s.out_channels),
                     static_cast<Eigen::Index>(plane));
    out.noalias() = w * colm;
    for (std::size_t k = 0; k < s.out_channels; ++k) out.row(static_cast<Eigen::Index>(k)).array() += p.bias[k];
  });
  return y;
}

template <typename Real>
BasicTensor<Real> dense_forward(const LayerSpec& s, const LayerParams<Real>& p, const BasicTensor<Real>& x) {
  const std::size_t n = x.extent(0);
  BasicTensor<Real> y(Shape{n, s.out_features});
  const ConstMatMap<Real> xm(x.raw(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s.in_features));
  const ConstMatMap<Real> w(p.weight.raw(), static_cast<Eigen::Index>(s.out_features),
                            static_cast<Eigen::Index>(s.in_features));
  MatMap<Real> ym(y.raw(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s.out_features));
  ym.noalias() = xm * w.transpose();
  const Eigen::Map<const Eigen::Matrix<Real, 1, Eigen::Dynamic>> b(p.bias.raw(),
                                                                    static_cast<Eigen::Index>(s.out_features));
  ym.rowwise() += b;
  return y;
}

template <typename Real>
BasicTensor<Real> maxpool_forward(const LayerSpec& s, const BasicTensor<Real>& x, const Shape& out_shape,
                                  std::vector<std::size_t>* argmax) {
  const std::size_t n = x.extent(0), channels = x.extent(1), height = x.extent(2), width = x.extent(3);
  const std::size_t out_h = out_shape[1], out_w = out_shape[2];
  BasicTensor<Real> y(batched(n, out_shape));
  if (argmax) argmax->assign(y.size(), 0);
  std::size_t o = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = (i * channels + c) * height * width;
      for (std::size_t oh = 0; oh < out_h; ++oh) {
        for (std::size_t ow = 0; ow < out_w; ++ow, ++o) {
          std::size_t best = base + (oh * s.stride) * width + ow * s.stride;
          for (std::size_t di = 0; di < s.window; ++di) {
            for (std::size_t dj = 0; dj < s.window; ++dj) {
              const std::size_t idx = base + (oh * s.stride + di) * width + ow * s.stride + dj;
              if (x[idx] > x[best]) best = idx;
            }
          }
          y[o] = x[best];
          if (argmax) (*argmax)[o] = best;
        }
      }
    }
  }
  return y;
}

template <typename Real>
BasicTensor<Real> layer_forward(const BasicNetwork<Real>& net, std::size_t li, const BasicTensor<Real>& x,
                                bool train, Rng* rng, TapeEntry<Real>* tape) {
  const LayerSpec& s = net.layer(li);
  const Shape& out_shape = net.output_shapes()[li];
  const std::size_t n = x.extent(0);
  switch (s.kind) {
    case LayerKind::conv2d: return conv_forward(s, net.params(li), x, out_shape);
    case LayerKind::dense:
    case LayerKind::softmax_output: return dense_forward(s, net.params(li), x);
    case LayerKind::relu: return max_with_zero(x);
    case LayerKind::maxpool2d: return maxpool_forward(s, x, out_shape, tape ? &tape->argmax : nullptr);
    case LayerKind::flatten: return x.reshaped(batched(n, out_shape));
    case LayerKind::dropout: {
      if (!train || s.rate == 0.0) return x;
      if (!rng) fail(ErrorKind::invalid_argument, "train-mode dropout requires an rng");
      BasicTensor<Real> mask(x.shape());
      const Real keep_scale = Real{1} / static_cast<Real>(1.0 - s.rate);
      for (auto& m : mask.data()) m = rng->uniform() < s.rate ? Real{0} : keep_scale;
      BasicTensor<Real> y = mul(x, mask);
      if (tape) tape->aux = std::move(mask);
      return y;
    }
  }
  fail(ErrorKind::invalid_argument, "unknown layer kind");
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
    case LayerKind::dropout: return "dropout";
    case LayerKind::softmax_output: return "softmax_output";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (LayerKind k : {LayerKind::conv2d, LayerKind::relu, LayerKind::maxpool2d, LayerKind::flatten, LayerKind::dense,
                      LayerKind::dropout, LayerKind::softmax_output}) {
    if (to_string(k) == name) return k;
  }
  fail(ErrorKind::format, "unknown layer kind '" + std::string(name) + "'");
}

LayerSpec LayerSpec::conv(std::string name, std::size_t out_channels, std::size_t in_channels, std::size_t kernel,
                          std::size_t stride, std::size_t padding) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.name = std::move(name);
  s.out_channels = out_channels;
  s.in_channels = in_channels;
  s.kernel_h = s.kernel_w = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::relu(std::string name) {
  LayerSpec s;
  s.kind = LayerKind::relu;
  s.name = std::move(name);
  return s;
}

LayerSpec LayerSpec::maxpool(std::string name, std::size_t window, std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::maxpool2d;
  s.name = std::move(name);
  s.window = window;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::flatten(std::string name) {
  LayerSpec s;
  s.kind = LayerKind::flatten;
  s.name = std::move(name);
  return s;
}

LayerSpec LayerSpec::dense(std::string name, std::size_t out_features, std::size_t in_features) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.name = std::move(name);
  s.out_features = out_features;
  s.in_features = in_features;
  return s;
}

LayerSpec LayerSpec::dropout(std::string name, double rate) {
  LayerSpec s;
  s.kind = LayerKind::dropout;
  s.name = std::move(name);
  s.rate = rate;
  return s;
}

LayerSpec LayerSpec::classifier(std::string name, std::size_t out_features, std::size_t in_features) {
  LayerSpec s = dense(std::move(name), out_features, in_features);
  s.kind = LayerKind::softmax_output;
  return s;
}

Shape LayerSpec::weight_shape() const {
  if (kind == LayerKind::conv2d) return {out_channels, in_channels, kernel_h, kernel_w};
  if (kind == LayerKind::dense || kind == LayerKind::softmax_output) return {out_features, in_features};
  return {};
}

Shape LayerSpec::bias_shape() const {
  if (!parameterized()) return {};
  return {width()};
}

std::vector<Shape> infer_shapes(const NetworkSpec& spec) {
  if (spec.input.size() != 3) fail(ErrorKind::invalid_shape, "network input must be C x H x W");
  validate_shape(spec.input);
  std::set<std::string> names;
  std::vector<Shape> shapes;
  shapes.reserve(spec.layers.size());
  Shape cur = spec.input;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerSpec& s = spec.layers[li];
    if (s.name.empty()) fail(ErrorKind::invalid_argument, "layer " + std::to_string(li) + " has no name");
    if (!names.insert(s.name).second) fail(ErrorKind::invalid_argument, "duplicate layer name '" + s.name + "'");
    switch (s.kind) {
      case LayerKind::conv2d: {
        if (cur.size() != 3) chain_error(s, "expects a C x H x W input, got " + shape_string(cur));
        if (s.in_channels != cur[0]) {
          chain_error(s, "in_channels " + std::to_string(s.in_channels) + " but input has " +
                             std::to_string(cur[0]) + " channels");
        }
        if (s.out_channels == 0 || s.kernel_h == 0 || s.kernel_w == 0 || s.stride == 0) {
          chain_error(s, "zero channel count, kernel or stride");
        }
        if (cur[1] + 2 * s.padding < s.kernel_h || cur[2] + 2 * s.padding < s.kernel_w) {
          chain_error(s, "kernel larger than padded input " + shape_string(cur));
        }
        cur = {s.out_channels, conv_out_extent(cur[1], s.kernel_h, s.stride, s.padding),
               conv_out_extent(cur[2], s.kernel_w, s.stride, s.padding)};
        break;
      }
      case LayerKind::maxpool2d: {
        if (cur.size() != 3) chain_error(s, "expects a C x H x W input, got " + shape_string(cur));
        if (s.window == 0 || s.stride == 0) chain_error(s, "zero window or stride");
        if (cur[1] < s.window || cur[2] < s.window) chain_error(s, "window larger than input " + shape_string(cur));
        cur = {cur[0], (cur[1] - s.window) / s.stride + 1, (cur[2] - s.window) / s.stride + 1};
        break;
      }
      case LayerKind::flatten: {
        if (cur.size() != 3) chain_error(s, "expects a C x H x W input, got " + shape_string(cur));
        cur = {cur[0] * cur[1] * cur[2]};
        break;
      }
      case LayerKind::dense:
      case LayerKind::softmax_output: {
        if (cur.size() != 1) chain_error(s, "expects a flat input, got " + shape_string(cur));
        if (s.in_features != cur[0]) {
          chain_error(s, "in_features " + std::to_string(s.in_features) + " but input has " +
                             std::to_string(cur[0]) + " features");
        }
        if (s.out_features == 0) chain_error(s, "zero out_features");
        if (s.kind == LayerKind::softmax_output && li + 1 != spec.layers.size()) {
          chain_error(s, "the classifier head must be the last layer");
        }
        cur = {s.out_features};
        break;
      }
      case LayerKind::dropout:
        if (!(s.rate >= 0.0 && s.rate < 1.0)) {
          fail(ErrorKind::invalid_argument, "layer '" + s.name + "': dropout rate must lie in [0, 1)");
        }
        break;
      case LayerKind::relu:
        break;
    }
    shapes.push_back(cur);
  }
  return shapes;
}

NetworkSpec make_vgg16_spec(std::size_t num_classes, std::size_t input_hw, double dropout) {
  if (num_classes == 0) fail(ErrorKind::invalid_argument, "num_classes must be positive");
  if (input_hw == 0 || input_hw % 32 != 0) {
    fail(ErrorKind::invalid_argument, "VGG-16 input extent must be a positive multiple of 32, got " +
                                          std::to_string(input_hw));
  }
  const std::vector<std::pair<std::size_t, std::size_t>> stages{{2, 64}, {2, 128}, {3, 256}, {3, 512}, {3, 512}};
  NetworkSpec spec;
  spec.input = {3, input_hw, input_hw};
  std::size_t channels = 3;
  for (std::size_t st = 0; st < stages.size(); ++st) {
    const auto [convs, width] = stages[st];
    for (std::size_t j = 0; j < convs; ++j) {
      const std::string suffix = std::to_string(st + 1) + "_" + std::to_string(j + 1);
      spec.layers.push_back(LayerSpec::conv("conv" + suffix, width, channels, 3, 1, 1));
      spec.layers.push_back(LayerSpec::relu("relu" + suffix));
      channels = width;
    }
    spec.layers.push_back(LayerSpec::maxpool("pool" + std::to_string(st + 1), 2, 2));
  }
  const std::size_t spatial = input_hw / 32;
  spec.layers.push_back(LayerSpec::flatten("flatten"));
  spec.layers.push_back(LayerSpec::dense("fc6", 4096, channels * spatial * spatial));
  spec.layers.push_back(LayerSpec::relu("relu6"));
  spec.layers.push_back(LayerSpec::dropout("drop6", dropout));
  spec.layers.push_back(LayerSpec::dense("fc7", 4096, 4096));
  spec.layers.push_back(LayerSpec::relu("relu7"));
  spec.layers.push_back(LayerSpec::dropout("drop7", dropout));
  spec.layers.push_back(LayerSpec::classifier("classifier", num_classes, 4096));
  infer_shapes(spec);
  return spec;
}

NetworkSpec make_tiny_cnn_spec(std::size_t num_classes, std::size_t input_hw, const std::vector<std::size_t>& widths,
                               std::size_t fc_width, double dropout) {
  if (num_classes == 0) fail(ErrorKind::invalid_argument, "num_classes must be positive");
  if (widths.empty()) fail(ErrorKind::invalid_argument, "tiny CNN needs at least one stage width");
  for (std::size_t w : widths) {
    if (w < 2) fail(ErrorKind::invalid_argument, "stage widths must be at least 2");
  }
  if (fc_width < 2) fail(ErrorKind::invalid_argument, "fc width must be at least 2");
  const std::size_t reduction = std::size_t{1} << widths.size();
  if (input_hw == 0 || input_hw % reduction != 0) {
    fail(ErrorKind::invalid_argument, "input extent " + std::to_string(input_hw) + " not divisible by " +
                                          std::to_string(reduction));
  }
  NetworkSpec spec;
  spec.input = {3, input_hw, input_hw};
  std::size_t channels = 3;
  for (std::size_t st = 0; st < widths.size(); ++st) {
    const std::string suffix = std::to_string(st + 1);
    spec.layers.push_back(LayerSpec::conv("conv" + suffix + "_1", widths[st], channels, 3, 1, 1));
    spec.layers.push_back(LayerSpec::relu("relu" + suffix + "_1"));
    spec.layers.push_back(LayerSpec::maxpool("pool" + suffix, 2, 2));
    channels = widths[st];
  }
  const std::size_t spatial = input_hw / reduction;
  spec.layers.push_back(LayerSpec::flatten("flatten"));
  spec.layers.push_back(LayerSpec::dense("fc6", fc_width, channels * spatial * spatial));
  spec.layers.push_back(LayerSpec::relu("relu6"));
  spec.layers.push_back(LayerSpec::dropout("drop6", dropout));
  spec.layers.push_back(LayerSpec::classifier("classifier", num_classes, fc_width));
  infer_shapes(spec);
  return spec;
}

template <typename Real>
BasicNetwork<Real>::BasicNetwork(NetworkSpec spec) : spec_(std::move(spec)), output_shapes_(infer_shapes(spec_)) {
  params_.resize(spec_.layers.size());
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& s = spec_.layers[i];
    if (!s.parameterized()) continue;
    params_[i].weight = BasicTensor<Real>(s.weight_shape());
    params_[i].bias = BasicTensor<Real>(s.bias_shape());
  }
}

template <typename Real>
BasicNetwork<Real> BasicNetwork<Real>::initialized(NetworkSpec spec, Rng& rng) {
  BasicNetwork net(std::move(spec));
  for (std::size_t i = 0; i < net.size(); ++i) {
    const LayerSpec& s = net.layer(i);
    if (!s.parameterized()) continue;
    const std::size_t fan_in =
        s.kind == LayerKind::conv2d ? s.in_channels * s.kernel_h * s.kernel_w : s.in_features;
    net.params_[i].weight = rand_normal<Real>(s.weight_shape(), 0.0, std::sqrt(2.0 / static_cast<double>(fan_in)), rng);
  }
  return net;
}

template <typename Real>
std::optional<std::size_t> BasicNetwork<Real>::find(std::string_view name) const {
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    if (spec_.layers[i].name == name) return i;
  }
  return std::nullopt;
}

template <typename Real>
std::size_t BasicNetwork<Real>::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  fail(ErrorKind::invalid_argument, "no layer named '" + std::string(name) + "'");
}

template <typename Real>
void BasicNetwork<Real>::set_params(std::vector<LayerParams<Real>> params) {
  if (params.size() != spec_.layers.size()) {
    fail(ErrorKind::shape_mismatch, "parameter list length does not match layer count");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const LayerSpec& s = spec_.layers[i];
    if (s.parameterized()) {
      if (params[i].weight.shape() != s.weight_shape() || params[i].bias.shape() != s.bias_shape()) {
        fail(ErrorKind::shape_mismatch, "parameter shape mismatch at layer '" + s.name + "': weight " +
                                            shape_string(params[i].weight.shape()) + " expected " +
                                            shape_string(s.weight_shape()));
      }
    } else if (!params[i].weight.empty() || !params[i].bias.empty()) {
      fail(ErrorKind::shape_mismatch, "layer '" + s.name + "' takes no parameters");
    }
  }
  params_ = std::move(params);
}

template <typename Real>
void BasicNetwork<Real>::set_dropout(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) fail(ErrorKind::invalid_argument, "dropout rate must lie in [0, 1)");
  for (auto& s : spec_.layers) {
    if (s.kind == LayerKind::dropout) s.rate = rate;
  }
}

template <typename Real>
ForwardResult<Real> forward(const BasicNetwork<Real>& net, const BasicTensor<Real>& x, Rng* rng,
                            ForwardOptions options) {
  const Shape expected = batched(x.rank() == 4 ? x.extent(0) : 0, net.input_shape());
  if (x.rank() != 4 || x.shape() != expected) {
    fail(ErrorKind::shape_mismatch,
         "network input must be N x " + shape_string(net.input_shape()) + ", got " + shape_string(x.shape()));
  }
  const bool train = net.mode() == Mode::train;
  const bool record = train || options.force_tape;
  ForwardResult<Real> result;
  if (record) result.tape.resize(net.size());
  if (options.keep_activations) result.activations.reserve(net.size());
  BasicTensor<Real> cur = x;
  for (std::size_t li = 0; li < net.size(); ++li) {
    TapeEntry<Real>* entry = record ? &result.tape[li] : nullptr;
    BasicTensor<Real> next = layer_forward(net, li, cur, train, rng, entry);
    if (entry) {
      entry->name = net.layer(li).name;
      entry->layer = li;
      entry->weight_shape = net.params(li).weight.shape();
      entry->input = std::move(cur);
    }
    cur = std::move(next);
    if (options.keep_activations) result.activations.push_back(cur);
  }
  const std::size_t n = cur.extent(0);
  const std::size_t total = cur.size();
  result.logits = std::move(cur).reshaped(Shape{n, total / n});
  return result;
}

template <typename Real>
BasicTensor<Real> predict(const BasicNetwork<Real>& net, const BasicTensor<Real>& x) {
  if (x.rank() != 4 || x.shape() != batched(x.extent(0), net.input_shape())) {
    fail(ErrorKind::shape_mismatch,
         "network input must be N x " + shape_string(net.input_shape()) + ", got " + shape_string(x.shape()));
  }
  BasicTensor<Real> cur = x;
  for (std::size_t li = 0; li < net.size(); ++li) cur = layer_forward<Real>(net, li, cur, false, nullptr, nullptr);
  const std::size_t n = cur.extent(0);
  const std::size_t total = cur.size();
  return std::move(cur).reshaped(Shape{n, total / n});
}

template <typename Real>
BasicTensor<Real> apply_layer(const BasicNetwork<Real>& net, std::size_t i, const BasicTensor<Real>& x) {
  if (x.rank() < 2 || x.shape() != batched(x.extent(0), net.layer_input_shape(i))) {
    fail(ErrorKind::shape_mismatch, "layer '" + net.layer(i).name + "' input mismatch: " + shape_string(x.shape()));
  }
  return layer_forward<Real>(net, i, x, false, nullptr, nullptr);
}

template <typename Real>
Gradients<Real> backward(const BasicNetwork<Real>& net, const std::vector<TapeEntry<Real>>& tape,
                         const BasicTensor<Real>& dlogits) {
  if (tape.size() != net.size()) fail(ErrorKind::tape_mismatch, "tape length does not match the network");
  for (std::size_t li = 0; li < net.size(); ++li) {
    const auto& e = tape[li];
    if (e.name != net.layer(li).name || e.weight_shape != net.params(li).weight.shape() ||
        e.input.rank() < 2 || e.input.shape() != batched(e.input.extent(0), net.layer_input_shape(li))) {
      fail(ErrorKind::tape_mismatch, "stale tape at layer '" + net.layer(li).name + "'");
    }
  }
  const std::size_t n = tape.front().input.extent(0);
  const Shape last = batched(n, net.output_shapes().back());
  if (dlogits.rank() != 2 || dlogits.extent(0) != n || dlogits.size() != shape_size(last)) {
    fail(ErrorKind::shape_mismatch, "dlogits shape " + shape_string(dlogits.shape()) + " does not match logits");
  }

  Gradients<Real> grads;
  grads.params.resize(net.size());
  BasicTensor<Real> g = dlogits.reshaped(last);
  for (std::size_t li = net.size(); li-- > 0;) {
    const LayerSpec& s = net.layer(li);
    const TapeEntry<Real>& e = tape[li];
    const BasicTensor<Real>& x = e.input;
    switch (s.kind) {
      case LayerKind::conv2d: {
        const LayerParams<Real>& p = net.params(li);
        const std::size_t height = x.extent(2), width = x.extent(3);
        const std::size_t out_h = g.extent(2), out_w = g.extent(3);
        const std::size_t patch = s.in_channels * s.kernel_h * s.kernel_w;
        const std::size_t plane = out_h * out_w;
        const auto rows = static_cast<Eigen::Index>(s.out_channels);
        LayerParams<Real> grad{BasicTensor<Real>(s.weight_shape()), BasicTensor<Real>(s.bias_shape())};
        MatMap<Real> dw(grad.weight.raw(), rows, static_cast<Eigen::Index>(patch));
        std::vector<Real> cols(patch * plane);
        // Ascending sample order keeps the weight-gradient sum deterministic.
        for (std::size_t i = 0; i < n; ++i) {
          im2col(x.raw() + i * s.in_channels * height * width, s, height, width, out_h, out_w, cols.data());
          const ConstMatMap<Real> colm(cols.data(), static_cast<Eigen::Index>(patch),
                                       static_cast<Eigen::Index>(plane));
          const ConstMatMap<Real> dy(g.raw() + i * s.out_channels * plane, rows, static_cast<Eigen::Index>(plane));
          dw.noalias() += dy * colm.transpose();
          for (std::size_t k = 0; k < s.out_channels; ++k) grad.bias[k] += dy.row(static_cast<Eigen::Index>(k)).sum();
        }
        BasicTensor<Real> dx(x.shape());
        const ConstMatMap<Real> w(p.weight.raw(), rows, static_cast<Eigen::Index>(patch));
        parallel_for(n, [&](std::size_t i) {
          RowMat<Real> dcols = w.transpose() * ConstMatMap<Real>(g.raw() + i * s.out_channels * plane, rows,
                                                                  static_cast<Eigen::Index>(plane));
          col2im(dcols.data(), s, height, width, out_h, out_w, dx.raw() + i * s.in_channels * height * width);
        });
        grads.params[li] = std::move(grad);
        g = std::move(dx);
        break;
      }
      case LayerKind::dense:
      case LayerKind::softmax_output: {
        const LayerParams<Real>& p = net.params(li);
        const auto nn = static_cast<Eigen::Index>(n);
        const auto out = static_cast<Eigen::Index>(s.out_features);
        const auto in = static_cast<Eigen::Index>(s.in_features);
        LayerParams<Real> grad{BasicTensor<Real>(s.weight_shape()), BasicTensor<Real>(s.bias_shape())};
        const ConstMatMap<Real> dy(g.raw(), nn, out);
        const ConstMatMap<Real> xm(x.raw(), nn, in);
        MatMap<Real>(grad.weight.raw(), out, in).noalias() = dy.transpose() * xm;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t k = 0; k < s.out_features; ++k) grad.bias[k] += g[i * s.out_features + k];
        }
        BasicTensor<Real> dx(x.shape());
        MatMap<Real>(dx.raw(), nn, in).noalias() = dy * ConstMatMap<Real>(p.weight.raw(), out, in);
        grads.params[li] = std::move(grad);
        g = std::move(dx);
        break;
      }
      case LayerKind::relu: {
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (!(x[i] > Real{0})) g[i] = Real{0};
        }
        break;
      }
      case LayerKind::maxpool2d: {
        BasicTensor<Real> dx(x.shape());
        for (std::size_t o = 0; o < g.size(); ++o) dx[e.argmax[o]] += g[o];
        g = std::move(dx);
        break;
      }
      case LayerKind::flatten:
        g = std::move(g).reshaped(x.shape());
        break;
      case LayerKind::dropout:
        if (!e.aux.empty()) g = mul(g, e.aux);
        break;
    }
  }
  grads.input = std::move(g);
  return grads;
}

template class BasicNetwork<float>;
template class BasicNetwork<double>;

template ForwardResult<float> forward(const Network&, const Tensor&, Rng*, ForwardOptions);
template ForwardResult<double> forward(const NetworkD&, const TensorD&, Rng*, ForwardOptions);
template Tensor predict(const Network&, const Tensor&);
template TensorD predict(const NetworkD&, const TensorD&);
template Tensor apply_layer(const Network&, std::size_t, const Tensor&);
template TensorD apply_layer(const NetworkD&, std::size_t, const TensorD&);
template Gradients<float> backward(const Network&, const std::vector<TapeEntry<float>>&, const Tensor&);
template Gradients<double> backward(const NetworkD&, const std::vector<TapeEntry<double>>&, const TensorD&);

}  // namespace nwadapt
