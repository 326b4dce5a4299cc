#include "nwadapt/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nwadapt {

void TrainConfig::validate() const {
  if (batch_size < 1) fail(ErrorKind::invalid_argument, "batch_size must be at least 1");
  if (!(lr_initial >= 0.0) || !std::isfinite(lr_initial)) fail(ErrorKind::invalid_argument, "lr_initial must be >= 0");
  if (!(lr_drop_factor > 1.0)) fail(ErrorKind::invalid_argument, "lr_drop_factor must exceed 1");
  if (lr_plateau_patience < 1 || early_stop_patience < 1) {
    fail(ErrorKind::invalid_argument, "patiences must be at least 1");
  }
  if (max_epochs < 0) fail(ErrorKind::invalid_argument, "max_epochs must be non-negative");
  if (!(weight_decay >= 0.0)) fail(ErrorKind::invalid_argument, "weight_decay must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorKind::invalid_argument, "dropout must lie in [0, 1)");
}

Json train_config_to_json(const TrainConfig& cfg) {
  return Json{{"batch_size", cfg.batch_size},
              {"lr_initial", cfg.lr_initial},
              {"lr_drop_factor", cfg.lr_drop_factor},
              {"lr_plateau_patience", cfg.lr_plateau_patience},
              {"early_stop_patience", cfg.early_stop_patience},
              {"max_epochs", cfg.max_epochs},
              {"weight_decay", cfg.weight_decay},
              {"dropout", cfg.dropout},
              {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorKind::usage, "train config must be a JSON object");
  TrainConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "batch_size") cfg.batch_size = value.get<std::size_t>();
      else if (key == "lr_initial") cfg.lr_initial = value.get<double>();
      else if (key == "lr_drop_factor") cfg.lr_drop_factor = value.get<double>();
      else if (key == "lr_plateau_patience") cfg.lr_plateau_patience = value.get<int>();
      else if (key == "early_stop_patience") cfg.early_stop_patience = value.get<int>();
      else if (key == "max_epochs") cfg.max_epochs = value.get<int>();
      else if (key == "weight_decay") cfg.weight_decay = value.get<double>();
      else if (key == "dropout") cfg.dropout = value.get<double>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else fail(ErrorKind::usage, "unknown train config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::usage, std::string("bad train config value: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(ErrorKind::usage, e.what());
  }
  return cfg;
}

template <typename Real>
LossResult<Real> cross_entropy_loss(const BasicTensor<Real>& logits, std::span<const int> labels) {
  if (logits.rank() != 2) fail(ErrorKind::shape_mismatch, "logits must be N x classes");
  const std::size_t n = logits.extent(0), classes = logits.extent(1);
  if (labels.size() != n) fail(ErrorKind::shape_mismatch, "label count does not match batch size");
  LossResult<Real> out;
  out.dlogits = BasicTensor<Real>(logits.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      fail(ErrorKind::invalid_label, "label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
    }
    const Real* row = logits.raw() + i * classes;
    const double m = *std::max_element(row, row + classes);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(static_cast<double>(row[c]) - m);
    const double log_sum = m + std::log(sum);
    total += log_sum - static_cast<double>(row[label]);
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(static_cast<double>(row[c]) - log_sum);
      out.dlogits[i * classes + c] =
          static_cast<Real>((p - (static_cast<std::size_t>(label) == c ? 1.0 : 0.0)) / static_cast<double>(n));
    }
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

template <typename Real>
void sgd_step(BasicNetwork<Real>& net, const Gradients<Real>& grads, double lr, double weight_decay) {
  if (grads.params.size() != net.size()) fail(ErrorKind::shape_mismatch, "gradient list does not match network");
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (!net.layer(i).parameterized()) continue;
    LayerParams<Real>& p = net.params(i);
    const LayerParams<Real>& g = grads.params[i];
    if (g.weight.shape() != p.weight.shape() || g.bias.shape() != p.bias.shape()) {
      fail(ErrorKind::shape_mismatch, "gradient shape mismatch at layer '" + net.layer(i).name + "'");
    }
    const auto rate = static_cast<Real>(lr), decay = static_cast<Real>(weight_decay);
    for (std::size_t k = 0; k < p.weight.size(); ++k) p.weight[k] -= rate * (g.weight[k] + decay * p.weight[k]);
    for (std::size_t k = 0; k < p.bias.size(); ++k) p.bias[k] -= rate * g.bias[k];
  }
}

template LossResult<float> cross_entropy_loss(const Tensor&, std::span<const int>);
template LossResult<double> cross_entropy_loss(const TensorD&, std::span<const int>);
template void sgd_step(Network&, const Gradients<float>&, double, double);
template void sgd_step(NetworkD&, const Gradients<double>&, double, double);

Json fit_result_to_json(const FitResult& result) {
  Json history = Json::array();
  for (const auto& e : result.history) {
    history.push_back({{"train_loss", round_significant(e.train_loss)},
                       {"val_loss", round_significant(e.val_loss)},
                       {"val_accuracy", round_significant(e.val_accuracy)},
                       {"lr", round_significant(e.lr)}});
  }
  return Json{{"best_val_accuracy", round_significant(result.best_val_accuracy)},
              {"best_epoch", result.best_epoch},
              {"history", std::move(history)}};
}

namespace {

std::vector<int> labels_of(const Dataset& ds, std::span<const std::size_t> idx) {
  std::vector<int> labels(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = ds.samples[idx[i]].label;
  return labels;
}

}  // namespace

Evaluation evaluate(const Network& net, const Dataset& dataset, std::size_t batch_size) {
  if (dataset.empty()) fail(ErrorKind::data, "cannot evaluate on an empty dataset");
  Evaluation ev;
  ev.samples = dataset.size();
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    const std::size_t end = std::min(dataset.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor logits = predict(net, make_batch(dataset, idx, net.input_shape()));
    const auto labels = labels_of(dataset, idx);
    loss_sum += cross_entropy_loss(logits, labels).loss * static_cast<double>(idx.size());
    const std::size_t classes = logits.extent(1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const float* row = logits.raw() + i * classes;
      const auto best = static_cast<int>(std::max_element(row, row + classes) - row);
      if (best == labels[i]) ++correct;
    }
  }
  ev.loss = loss_sum / static_cast<double>(dataset.size());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());
  return ev;
}

double evaluate_ten_crop(const Network& net, const Dataset& dataset) {
  if (dataset.empty()) fail(ErrorKind::data, "cannot evaluate on an empty dataset");
  const std::size_t crop_extent = net.input_shape()[1];
  std::size_t correct = 0;
  for (const auto& s : dataset.samples) {
    const auto p = ten_crop_predict(net, subtract_channel_means(s.image, dataset.channel_means), crop_extent);
    const auto best = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    if (best == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

FitResult fit(Network& net, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
              const AugmentConfig& augment) {
  cfg.validate();
  if (train_set.empty() || val_set.empty()) fail(ErrorKind::data, "fit needs non-empty train and validation sets");
  if (net.output_shapes().back() != Shape{train_set.num_classes()}) {
    fail(ErrorKind::data, "classifier width " + shape_string(net.output_shapes().back()) + " does not match " +
                              std::to_string(train_set.num_classes()) + " classes");
  }
  net.set_dropout(cfg.dropout);

  FitResult result;
  result.best_params = net.all_params();
  if (cfg.max_epochs == 0) {
    result.best_val_accuracy = evaluate(net, val_set).accuracy;
    return result;
  }

  Rng shuffle_rng = Rng::derived(cfg.seed, {0x5348554646ULL});
  double best_val_loss = std::numeric_limits<double>::infinity();
  int drops = 0;
  int since_plateau_reset = 0;
  int since_improvement = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = cfg.lr_initial / std::pow(cfg.lr_drop_factor, drops);
    for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[shuffle_rng.below(k)]);

    Rng dropout_rng = Rng::derived(cfg.seed, {0x44524f50ULL, static_cast<std::uint64_t>(epoch)});
    const BatchOptions batch_opts{true, augment, cfg.seed, static_cast<std::uint64_t>(epoch)};
    net.set_mode(Mode::train);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Tensor x = make_batch(train_set, idx, net.input_shape(), batch_opts);
      const auto labels = labels_of(train_set, idx);
      auto fwd = forward(net, x, &dropout_rng);
      const auto loss = cross_entropy_loss(fwd.logits, labels);
      if (!std::isfinite(loss.loss)) {
        net.set_mode(Mode::eval);
        throw DivergenceError(epoch, -1, "non-finite training loss in epoch " + std::to_string(epoch));
      }
      loss_sum += loss.loss * static_cast<double>(idx.size());
      const auto grads = backward(net, fwd.tape, loss.dlogits);
      sgd_step(net, grads, lr, cfg.weight_decay);
    }
    net.set_mode(Mode::eval);

    const Evaluation val = evaluate(net, val_set);
    if (!std::isfinite(val.loss)) {
      throw DivergenceError(epoch, -1, "non-finite validation loss in epoch " + std::to_string(epoch));
    }
    result.history.push_back({loss_sum / static_cast<double>(order.size()), val.loss, val.accuracy, lr});
    if (result.best_epoch < 0 || val.accuracy > result.best_val_accuracy) {
      result.best_val_accuracy = val.accuracy;
      result.best_epoch = epoch;
      result.best_params = net.all_params();
    }

    if (val.loss < best_val_loss) {
      best_val_loss = val.loss;
      since_improvement = 0;
      since_plateau_reset = 0;
    } else {
      ++since_improvement;
      ++since_plateau_reset;
    }
    if (since_improvement >= cfg.early_stop_patience) break;
    if (since_plateau_reset >= cfg.lr_plateau_patience) {
      ++drops;
      since_plateau_reset = 0;
    }
  }
  net.set_params(result.best_params);
  return result;
}

}  // namespace nwadapt
