#pragma once

#include "nwadapt/data.hpp"
#include "nwadapt/layers.hpp"
#include "nwadapt/train.hpp"

namespace fixtures {

using namespace nwadapt;

struct Splits {
  Dataset train;
  Dataset val;
};

// Synthetic images split into train and val; val shares the train means.
inline Splits synthetic(std::uint64_t seed, std::size_t classes, std::size_t per_class, std::size_t hw,
                        double val_fraction = 0.25) {
  Rng rng(seed);
  const Dataset all = generate_synthetic(classes, per_class, hw, rng);
  Rng split_rng = Rng::derived(seed, {1});
  auto [train, val] = stratified_split(all, val_fraction, split_rng);
  train.channel_means = compute_channel_means(train);
  val.channel_means = train.channel_means;
  return {std::move(train), std::move(val)};
}

inline TrainConfig quick_train(std::uint64_t seed, int epochs = 8) {
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.lr_initial = 0.02;
  cfg.max_epochs = epochs;
  cfg.seed = seed;
  return cfg;
}

}  // namespace fixtures
