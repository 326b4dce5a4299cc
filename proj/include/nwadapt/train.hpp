#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nwadapt/data.hpp"
#include "nwadapt/layers.hpp"
#include "nwadapt/util.hpp"

namespace nwadapt {

struct TrainConfig {
  std::size_t batch_size = 32;
  double lr_initial = 1e-4;
  double lr_drop_factor = 10.0;
  int lr_plateau_patience = 3;
  int early_stop_patience = 6;
  int max_epochs = 30;
  double weight_decay = 5e-4;
  double dropout = 0.5;
  std::uint64_t seed = 0;

  // ErrorKind::invalid_argument on any violated bound.
  void validate() const;
};

// Flat object with exactly the field names above; unknown keys are rejected.
Json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const Json& j);

template <typename Real>
struct LossResult {
  double loss = 0.0;
  BasicTensor<Real> dlogits;
};

// Mean softmax cross-entropy over the batch and its gradient w.r.t. logits.
template <typename Real>
LossResult<Real> cross_entropy_loss(const BasicTensor<Real>& logits, std::span<const int> labels);

// w <- w - lr (g + weight_decay w); biases are not decayed.
template <typename Real>
void sgd_step(BasicNetwork<Real>& net, const Gradients<Real>& grads, double lr, double weight_decay);

struct EpochRecord {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;
};

struct FitResult {
  std::vector<LayerParams<float>> best_params;
  double best_val_accuracy = 0.0;
  // -1 when no epoch ran.
  int best_epoch = -1;
  std::vector<EpochRecord> history;
};

Json fit_result_to_json(const FitResult& result);

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t samples = 0;
};

// Eval-mode loss and single-crop accuracy, batches in ascending index order.
Evaluation evaluate(const Network& net, const Dataset& dataset, std::size_t batch_size = 64);

// Accuracy of the ten-crop averaged prediction; crop extent is the network's
// input extent.
double evaluate_ten_crop(const Network& net, const Dataset& dataset);

// Trains `net` in place. Seeded shuffling each epoch; the learning rate is
// divided by lr_drop_factor after lr_plateau_patience epochs without a new
// validation-loss minimum, and training stops after early_stop_patience such
// epochs or at max_epochs. On return `net` holds the parameters of the epoch
// with the best validation accuracy (earliest on ties). Network dropout
// layers take cfg.dropout.
FitResult fit(Network& net, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
              const AugmentConfig& augment = {});

}  // namespace nwadapt
