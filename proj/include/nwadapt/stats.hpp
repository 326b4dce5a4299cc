#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nwadapt/data.hpp"
#include "nwadapt/layers.hpp"
#include "nwadapt/util.hpp"

namespace nwadapt {

// Dataset-averaged channel activations of one prunable layer.
struct LayerProfile {
  std::string name;
  std::size_t n_samples = 0;
  // Mean over samples of each channel's spatial mean (non-negative).
  std::vector<double> mean_activation;
  // mean_activation / its L1 norm; all zeros for a dead layer.
  std::vector<double> normalized;
  // Channel indices ordered by descending normalized value, ties by index.
  std::vector<std::size_t> sort_perm;
  // Running sum of normalized values in sort_perm order.
  std::vector<double> cumsum;
  // Every channel averaged to exactly zero.
  bool dead = false;

  std::size_t width() const noexcept { return mean_activation.size(); }
};

struct ActivationProfile {
  std::vector<LayerProfile> layers;
  std::size_t n_samples = 0;

  const LayerProfile* find(std::string_view name) const;
};

// Spatial mean per channel of one sample's output: [K, H, W] or [K] (dense
// layers, H = W = 1).
std::vector<double> channel_mean(const Tensor& activation);

// Normalization, descending stable sort and cumulative sum of a layer's mean
// activation vector.
LayerProfile make_layer_profile(std::string name, std::vector<double> mean_activation, std::size_t n_samples);

// For each prunable layer (conv2d and dense; never the classifier), the index
// of the layer whose output is measured: the ReLU directly after it when
// present, otherwise the layer itself.
struct MeasurementPoint {
  std::size_t layer = 0;
  std::size_t measured = 0;
};
std::vector<MeasurementPoint> measurement_points(const Network& net);

// Streams the dataset through the network in eval mode (no dropout, no
// augmentation, center crops) and accumulates channel means in ascending
// sample order.
ActivationProfile collect_profile(const Network& net, const Dataset& dataset, std::size_t batch_size = 64);

// {layer name: {n_samples, mean_activation, normalized, sort_perm, cumsum}},
// reals rounded to 9 significant digits.
Json profile_to_json(const ActivationProfile& profile);
std::string profile_fingerprint(const ActivationProfile& profile);

}  // namespace nwadapt
