#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nwadapt/layers.hpp"
#include "nwadapt/rng.hpp"
#include "nwadapt/tensor.hpp"
#include "nwadapt/util.hpp"

namespace nwadapt {

enum class Split { train, val, test };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

struct Sample {
  Tensor image;  // C x H x W, values in [0, 1]
  int label = 0;

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> class_names;
  // Per-channel means subtracted from every image before it enters a network.
  std::vector<float> channel_means;
  Split split = Split::train;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  std::size_t num_classes() const noexcept { return class_names.size(); }
  const Shape& image_shape() const;

  // Labels in range, uniform image shapes, one mean per channel.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;

  bool operator==(const DatasetSplits&) const = default;
};

struct AugmentConfig {
  int jitter_px = 4;
  std::pair<double, double> scale_range{0.9, 1.1};
  double rotation_deg = 10.0;
  bool enabled = false;

  void validate() const;
};

Json augment_config_to_json(const AugmentConfig& cfg);
AugmentConfig augment_config_from_json(const Json& j);

// Bilinear resize so the longer side becomes `target`, then symmetric zero
// padding of the shorter side (odd remainder goes to the trailing edge).
Tensor resize_with_aspect_pad(const Tensor& image, std::size_t target);

// Random translation, scale and rotation about the image center as a single
// affine warp; bilinear sampling with zero fill.
Tensor augment(const Tensor& image, const AugmentConfig& cfg, Rng& rng);

Tensor horizontal_flip(const Tensor& image);
Tensor crop(const Tensor& image, std::size_t top, std::size_t left, std::size_t height, std::size_t width);
Tensor subtract_channel_means(const Tensor& image, std::span<const float> means);

// Mean class probabilities over the four corner crops and the center crop of
// the image and of its mirror. `image` must already be preprocessed (mean
// subtracted); the network input must be C x crop x crop.
std::vector<double> ten_crop_predict(const Network& net, const Tensor& image, std::size_t crop_extent);

std::vector<double> softmax(std::span<const float> logits);

// Balanced synthetic set: class c draws shape c from {rectangle, disk,
// triangle, cross, ring, stripes, checker, dot-grid} at random position,
// scale, intensity and tint, plus N(0, 0.05^2) pixel noise. Labels
// interleave (sample i has label i % classes).
Dataset generate_synthetic(std::size_t classes, std::size_t per_class, std::size_t hw, Rng& rng,
                           std::size_t channels = 3);

std::vector<float> compute_channel_means(const Dataset& dataset);

// Per-class seeded holdout: round(fraction * class count) samples of every
// class go to the second dataset. Relative order is preserved on both sides.
std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, double fraction, Rng& rng);

// Writes manifest.json plus one TNSR file per image under images/.
void save_dataset(const std::filesystem::path& dir, const DatasetSplits& splits);
DatasetSplits load_dataset(const std::filesystem::path& dir);

// How images become network input batches.
struct BatchOptions {
  bool train = false;
  AugmentConfig augment;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
};

// Stacks preprocessed images into [N, C, h, w] for the network input extent
// (h, w): random crop when training on larger images, center crop otherwise.
// Per-sample randomness comes from Rng::derived(seed, {epoch, index}).
Tensor make_batch(const Dataset& dataset, std::span<const std::size_t> indices, const Shape& input_shape,
                  const BatchOptions& options = {});

}  // namespace nwadapt
