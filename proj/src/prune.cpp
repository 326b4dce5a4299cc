#include "nwadapt/prune.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nwadapt {

namespace {

std::size_t floor_for(const PruneConfig& cfg, std::size_t width) { return std::min(cfg.min_filters_per_layer, width); }

// `keep` channels drawn uniformly without replacement.
std::vector<std::uint8_t> random_mask(std::size_t keep, std::size_t width, Rng& rng) {
  std::vector<std::size_t> idx(width);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < keep; ++i) std::swap(idx[i], idx[i + rng.below(width - i)]);
  std::vector<std::uint8_t> mask(width, 0);
  for (std::size_t i = 0; i < keep; ++i) mask[idx[i]] = 1;
  return mask;
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(round_significant(v)) : Json(nullptr); }

}  // namespace

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::nwa: return "nwa";
    case Strategy::uniform_least_activated: return "uniform_least_activated";
    case Strategy::uniform_random: return "uniform_random";
    case Strategy::count_matched_random: return "count_matched_random";
  }
  return "nwa";
}

Strategy strategy_from_string(std::string_view name) {
  for (Strategy s : {Strategy::nwa, Strategy::uniform_least_activated, Strategy::uniform_random,
                     Strategy::count_matched_random}) {
    if (to_string(s) == name) return s;
  }
  fail(ErrorKind::usage, "unknown pruning strategy '" + std::string(name) + "'");
}

PruneConfig PruneConfig::from_budget(double budget) {
  if (!(budget >= 0.0 && budget < 1.0)) fail(ErrorKind::invalid_argument, "prune budget must lie in [0, 1)");
  PruneConfig cfg;
  cfg.keep_threshold = 1.0 - budget;
  return cfg;
}

bool PruneConfig::excluded(std::string_view name) const {
  return std::find(excluded_layers.begin(), excluded_layers.end(), name) != excluded_layers.end();
}

void PruneConfig::validate() const {
  if (!(keep_threshold > 0.0 && keep_threshold <= 1.0)) {
    fail(ErrorKind::invalid_argument, "keep_threshold must lie in (0, 1]");
  }
  if (min_filters_per_layer < 1) fail(ErrorKind::invalid_argument, "min_filters_per_layer must be at least 1");
  if (!(uniform_fraction >= 0.0 && uniform_fraction < 1.0)) {
    fail(ErrorKind::invalid_argument, "uniform_fraction must lie in [0, 1)");
  }
}

Json prune_config_to_json(const PruneConfig& cfg) {
  return Json{{"keep_threshold", cfg.keep_threshold},
              {"excluded_layers", cfg.excluded_layers},
              {"min_filters_per_layer", cfg.min_filters_per_layer},
              {"strategy", to_string(cfg.strategy)},
              {"uniform_fraction", cfg.uniform_fraction}};
}

PruneConfig prune_config_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorKind::usage, "prune config must be a JSON object");
  PruneConfig cfg;
  bool have_threshold = false;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "keep_threshold") {
        if (have_threshold) fail(ErrorKind::usage, "give either keep_threshold or prune_budget, not both");
        cfg.keep_threshold = value.get<double>();
        have_threshold = true;
      } else if (key == "prune_budget") {
        if (have_threshold) fail(ErrorKind::usage, "give either keep_threshold or prune_budget, not both");
        cfg.keep_threshold = 1.0 - value.get<double>();
        have_threshold = true;
      } else if (key == "excluded_layers") {
        cfg.excluded_layers = value.get<std::vector<std::string>>();
      } else if (key == "min_filters_per_layer") {
        cfg.min_filters_per_layer = value.get<std::size_t>();
      } else if (key == "strategy") {
        cfg.strategy = strategy_from_string(value.get<std::string>());
      } else if (key == "uniform_fraction") {
        cfg.uniform_fraction = value.get<double>();
      } else {
        fail(ErrorKind::usage, "unknown prune config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::usage, std::string("bad prune config value: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(ErrorKind::usage, e.what());
  }
  return cfg;
}

std::size_t LayerDecision::kept() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

const LayerDecision* PruneDecision::find(std::string_view name) const {
  for (const auto& l : layers) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

std::size_t PruneDecision::gated_count() const {
  return static_cast<std::size_t>(std::count_if(layers.begin(), layers.end(), [](const auto& l) { return l.gated; }));
}

std::size_t threshold_index(std::span<const double> cumsum, double keep_threshold) {
  if (cumsum.empty()) fail(ErrorKind::invalid_argument, "threshold_index: empty cumulative sum");
  std::size_t best = 0;
  double best_gap = std::abs(cumsum[0] - keep_threshold);
  for (std::size_t k = 1; k < cumsum.size(); ++k) {
    const double gap = std::abs(cumsum[k] - keep_threshold);
    if (gap < best_gap) {
      best_gap = gap;
      best = k;
    }
  }
  return best + 1;
}

std::vector<std::uint8_t> build_mask(std::span<const std::size_t> sort_perm, std::size_t keep, std::size_t width) {
  if (sort_perm.size() != width) fail(ErrorKind::invalid_argument, "build_mask: permutation length != width");
  if (keep > width) fail(ErrorKind::invalid_argument, "build_mask: keep count exceeds width");
  std::vector<std::uint8_t> seen(width, 0);
  for (std::size_t i : sort_perm) {
    if (i >= width || seen[i]) fail(ErrorKind::invalid_argument, "build_mask: sort_perm is not a permutation");
    seen[i] = 1;
  }
  std::vector<std::uint8_t> mask(width, 0);
  for (std::size_t r = 0; r < keep; ++r) mask[sort_perm[r]] = 1;
  return mask;
}

double layer_priority(double keep_threshold, std::size_t threshold, std::size_t width) {
  if (width == 0) fail(ErrorKind::invalid_argument, "layer_priority: width must be positive");
  if (threshold > width) fail(ErrorKind::invalid_argument, "layer_priority: threshold exceeds width");
  if (threshold == width) return std::numeric_limits<double>::infinity();
  return (1.0 - keep_threshold) / (1.0 - static_cast<double>(threshold) / static_cast<double>(width));
}

Gating gate(std::span<const double> priorities, std::span<const std::uint8_t> eligible) {
  if (priorities.size() != eligible.size()) fail(ErrorKind::invalid_argument, "gate: length mismatch");
  Gating g;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < priorities.size(); ++i) {
    if (!eligible[i] || !std::isfinite(priorities[i])) continue;
    sum += priorities[i];
    ++count;
  }
  g.mean_priority = count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
  g.gated.assign(priorities.size(), 0);
  if (count == 0) return g;
  for (std::size_t i = 0; i < priorities.size(); ++i) {
    g.gated[i] = eligible[i] && std::isfinite(priorities[i]) && priorities[i] < g.mean_priority - kGateEpsilon;
  }
  return g;
}

PruneDecision decide(const ActivationProfile& profile, const PruneConfig& cfg, Rng& rng,
                     const PruneDecision* reference) {
  cfg.validate();
  if (cfg.strategy == Strategy::count_matched_random && !reference) {
    fail(ErrorKind::invalid_argument, "count_matched_random needs a reference decision");
  }
  PruneDecision d;
  d.config = cfg;
  d.seed = rng.seed();
  d.profile_fingerprint = profile_fingerprint(profile);

  for (const auto& lp : profile.layers) {
    LayerDecision ld;
    ld.name = lp.name;
    ld.width = lp.width();
    if (ld.width == 0) fail(ErrorKind::profile_mismatch, "layer '" + lp.name + "' has an empty profile");
    ld.excluded = cfg.excluded(lp.name);
    ld.dead = lp.dead;
    ld.threshold = threshold_index(lp.cumsum, cfg.keep_threshold);
    ld.priority = layer_priority(cfg.keep_threshold, ld.threshold, ld.width);
    ld.mask.assign(ld.width, 1);
    d.layers.push_back(std::move(ld));
  }

  std::vector<double> priorities;
  std::vector<std::uint8_t> eligible;
  for (const auto& ld : d.layers) {
    priorities.push_back(ld.priority);
    eligible.push_back(!ld.excluded && !ld.dead);
  }
  const Gating gating = gate(priorities, eligible);
  d.mean_priority = gating.mean_priority;

  for (std::size_t i = 0; i < d.layers.size(); ++i) {
    LayerDecision& ld = d.layers[i];
    const LayerProfile& lp = profile.layers[i];
    if (ld.excluded) continue;
    const std::size_t floor = floor_for(cfg, ld.width);
    switch (cfg.strategy) {
      case Strategy::nwa: {
        ld.gated = gating.gated[i] != 0;
        if (ld.gated) ld.mask = build_mask(lp.sort_perm, std::max(ld.threshold, floor), ld.width);
        break;
      }
      case Strategy::uniform_least_activated:
      case Strategy::uniform_random: {
        const auto drop = static_cast<std::size_t>(std::floor(cfg.uniform_fraction * static_cast<double>(ld.width)));
        const std::size_t keep = std::max(ld.width - drop, floor);
        ld.gated = true;
        ld.mask = cfg.strategy == Strategy::uniform_least_activated ? build_mask(lp.sort_perm, keep, ld.width)
                                                                     : random_mask(keep, ld.width, rng);
        break;
      }
      case Strategy::count_matched_random: {
        const LayerDecision* ref = reference->find(ld.name);
        if (!ref) fail(ErrorKind::profile_mismatch, "reference decision has no layer '" + ld.name + "'");
        if (ref->width != ld.width) {
          fail(ErrorKind::profile_mismatch, "reference width for '" + ld.name + "' differs from the profile");
        }
        ld.gated = ref->gated;
        ld.mask = random_mask(std::max(ref->kept(), floor), ld.width, rng);
        break;
      }
    }
  }
  return d;
}

PruneDecision decide(const Network& net, const ActivationProfile& profile, const PruneConfig& cfg, Rng& rng,
                     const PruneDecision* reference) {
  for (std::size_t i = 0; i < net.size(); ++i) {
    const LayerSpec& s = net.layer(i);
    if (!s.prunable()) continue;
    const LayerProfile* lp = profile.find(s.name);
    if (!lp) {
      if (cfg.excluded(s.name)) continue;
      fail(ErrorKind::profile_mismatch, "profile is missing layer '" + s.name + "'");
    }
    if (lp->width() != s.width()) {
      fail(ErrorKind::profile_mismatch, "profile width for '" + s.name + "' is " + std::to_string(lp->width()) +
                                            ", network has " + std::to_string(s.width()));
    }
  }
  for (const auto& lp : profile.layers) {
    const auto idx = net.find(lp.name);
    if (!idx || !net.layer(*idx).prunable()) {
      fail(ErrorKind::profile_mismatch, "profile layer '" + lp.name + "' is not a prunable layer of the network");
    }
  }
  return decide(profile, cfg, rng, reference);
}

Json decision_to_json(const PruneDecision& decision) {
  Json layers = Json::array();
  for (const auto& l : decision.layers) {
    std::string bits(l.mask.size(), '0');
    for (std::size_t i = 0; i < l.mask.size(); ++i) bits[i] = l.mask[i] ? '1' : '0';
    layers.push_back({{"name", l.name},
                      {"K", l.width},
                      {"h", l.threshold},
                      {"kept", l.kept()},
                      {"priority", finite_or_null(l.priority)},
                      {"gated", l.gated},
                      {"excluded", l.excluded},
                      {"dead", l.dead},
                      {"mask", bits}});
  }
  return Json{{"strategy", to_string(decision.config.strategy)},
              {"keep_threshold", decision.config.keep_threshold},
              {"prune_budget", round_significant(decision.config.budget())},
              {"seed", decision.seed},
              {"mean_priority", finite_or_null(decision.mean_priority)},
              {"profile_fingerprint", decision.profile_fingerprint},
              {"config", prune_config_to_json(decision.config)},
              {"layers", std::move(layers)}};
}

}  // namespace nwadapt
