#include "nwadapt/surgery.hpp"

#include <numeric>

namespace nwadapt {

namespace {

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

Json arch_delta_to_json(const ArchDelta& delta) {
  Json layers = Json::array();
  for (const auto& l : delta.layers) layers.push_back({{"name", l.name}, {"before", l.before}, {"after", l.after}});
  return Json{{"params_before", delta.params_before},
              {"params_after", delta.params_after},
              {"flops_before", delta.flops_before},
              {"flops_after", delta.flops_after},
              {"layers", std::move(layers)}};
}

std::pair<Network, ArchDelta> apply_masks(const Network& net, const PruneDecision& decision) {
  for (const auto& ld : decision.layers) {
    const auto idx = net.find(ld.name);
    if (!idx || !net.layer(*idx).prunable()) {
      fail(ErrorKind::invalid_argument, "decision names '" + ld.name + "', which is not a prunable layer");
    }
    if (ld.mask.size() != net.layer(*idx).width()) {
      fail(ErrorKind::shape_mismatch, "mask for '" + ld.name + "' has length " + std::to_string(ld.mask.size()) +
                                          ", layer width is " + std::to_string(net.layer(*idx).width()));
    }
    const std::size_t kept = ld.kept();
    if (kept == 0 || (ld.gated && kept < std::min(decision.config.min_filters_per_layer, ld.mask.size()))) {
      fail(ErrorKind::floor_violation, "mask for '" + ld.name + "' keeps " + std::to_string(kept) +
                                           " filters, below the floor");
    }
  }

  NetworkSpec spec = net.spec();
  std::vector<LayerParams<float>> params(net.size());
  ArchDelta delta;
  // Surviving indices of the current activation along its channel (spatial)
  // or feature (flat) axis, in terms of the original network.
  std::vector<std::size_t> kept_in = all_indices(net.input_shape()[0]);

  for (std::size_t i = 0; i < net.size(); ++i) {
    LayerSpec& s = spec.layers[i];
    const LayerSpec& orig = net.layer(i);
    switch (orig.kind) {
      case LayerKind::conv2d:
      case LayerKind::dense:
      case LayerKind::softmax_output: {
        std::vector<std::size_t> kept_out = all_indices(orig.width());
        if (const LayerDecision* ld = decision.find(orig.name)) {
          kept_out.clear();
          for (std::size_t k = 0; k < ld->mask.size(); ++k) {
            if (ld->mask[k]) kept_out.push_back(k);
          }
        }
        const Tensor& w = net.params(i).weight;
        const Tensor& b = net.params(i).bias;
        const std::size_t in_total = orig.kind == LayerKind::conv2d ? orig.in_channels : orig.in_features;
        const std::size_t inner = orig.kind == LayerKind::conv2d ? orig.kernel_h * orig.kernel_w : 1;
        if (orig.kind == LayerKind::conv2d) {
          s.out_channels = kept_out.size();
          s.in_channels = kept_in.size();
        } else {
          s.out_features = kept_out.size();
          s.in_features = kept_in.size();
        }
        LayerParams<float> p{Tensor(s.weight_shape()), Tensor(s.bias_shape())};
        for (std::size_t o = 0; o < kept_out.size(); ++o) {
          for (std::size_t c = 0; c < kept_in.size(); ++c) {
            const float* src = w.raw() + (kept_out[o] * in_total + kept_in[c]) * inner;
            std::copy(src, src + inner, p.weight.raw() + (o * kept_in.size() + c) * inner);
          }
          p.bias[o] = b[kept_out[o]];
        }
        params[i] = std::move(p);
        if (orig.prunable()) delta.layers.push_back({orig.name, orig.width(), kept_out.size()});
        kept_in = std::move(kept_out);
        break;
      }
      case LayerKind::flatten: {
        const Shape& in_shape = net.layer_input_shape(i);
        const std::size_t plane = in_shape[1] * in_shape[2];
        std::vector<std::size_t> features;
        features.reserve(kept_in.size() * plane);
        for (std::size_t c : kept_in) {
          for (std::size_t k = 0; k < plane; ++k) features.push_back(c * plane + k);
        }
        kept_in = std::move(features);
        break;
      }
      case LayerKind::relu:
      case LayerKind::maxpool2d:
      case LayerKind::dropout:
        break;
    }
  }

  Network pruned(spec);
  pruned.set_params(std::move(params));
  pruned.set_mode(net.mode());
  delta.params_before = count_params(net);
  delta.params_after = count_params(pruned);
  delta.flops_before = count_flops(net);
  delta.flops_after = count_flops(pruned);
  return {std::move(pruned), std::move(delta)};
}

std::size_t count_params(const NetworkSpec& spec) {
  std::size_t total = 0;
  for (const auto& s : spec.layers) {
    if (s.parameterized()) total += shape_size(s.weight_shape()) + shape_size(s.bias_shape());
  }
  return total;
}

std::size_t count_params(const Network& net) { return count_params(net.spec()); }

std::uint64_t count_flops(const NetworkSpec& spec, std::optional<std::size_t> input_hw) {
  NetworkSpec resized = spec;
  if (input_hw) {
    if (resized.input.size() != 3) fail(ErrorKind::invalid_shape, "network input must be C x H x W");
    resized.input[1] = resized.input[2] = *input_hw;
  }
  const auto shapes = infer_shapes(resized);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < resized.layers.size(); ++i) {
    const LayerSpec& s = resized.layers[i];
    if (s.kind == LayerKind::conv2d) {
      total += 2ULL * s.out_channels * s.in_channels * s.kernel_h * s.kernel_w * shapes[i][1] * shapes[i][2];
    } else if (s.kind == LayerKind::dense || s.kind == LayerKind::softmax_output) {
      total += 2ULL * s.out_features * s.in_features;
    }
  }
  return total;
}

std::uint64_t count_flops(const Network& net, std::optional<std::size_t> input_hw) {
  return count_flops(net.spec(), input_hw);
}

std::vector<std::pair<std::string, std::size_t>> prunable_widths(const NetworkSpec& spec) {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& s : spec.layers) {
    if (s.prunable()) out.emplace_back(s.name, s.width());
  }
  return out;
}

}  // namespace nwadapt
