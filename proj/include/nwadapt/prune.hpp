#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nwadapt/layers.hpp"
#include "nwadapt/rng.hpp"
#include "nwadapt/stats.hpp"
#include "nwadapt/util.hpp"

namespace nwadapt {

enum class Strategy { nwa, uniform_least_activated, uniform_random, count_matched_random };

std::string_view to_string(Strategy strategy);
Strategy strategy_from_string(std::string_view name);

struct PruneConfig {
  // Cumulative activation mass to keep, rho in (0, 1]. A prune budget b maps
  // to rho = 1 - b.
  double keep_threshold = 0.98;
  std::vector<std::string> excluded_layers;
  std::size_t min_filters_per_layer = 1;
  Strategy strategy = Strategy::nwa;
  // Fraction of each layer removed by the uniform strategies.
  double uniform_fraction = 0.10;

  static PruneConfig from_budget(double budget);
  double budget() const { return 1.0 - keep_threshold; }
  bool excluded(std::string_view name) const;
  void validate() const;
};

Json prune_config_to_json(const PruneConfig& cfg);
PruneConfig prune_config_from_json(const Json& j);

struct LayerDecision {
  std::string name;
  std::size_t width = 0;
  // Threshold index as a count in [1, width].
  std::size_t threshold = 0;
  // 1 = keep, original channel order.
  std::vector<std::uint8_t> mask;
  // +infinity when threshold == width.
  double priority = 0.0;
  bool gated = false;
  bool excluded = false;
  bool dead = false;

  std::size_t kept() const;
};

struct PruneDecision {
  std::vector<LayerDecision> layers;
  // Mean of the finite priorities of non-excluded, non-dead layers; NaN when
  // there are none.
  double mean_priority = 0.0;
  PruneConfig config;
  std::uint64_t seed = 0;
  std::string profile_fingerprint;

  const LayerDecision* find(std::string_view name) const;
  std::size_t gated_count() const;
};

inline constexpr double kGateEpsilon = 1e-12;

// Smallest count h minimizing |c[h-1] - keep_threshold|.
std::size_t threshold_index(std::span<const double> cumsum, double keep_threshold);

// Keeps the first `keep` channels of sort_perm, reported in original order.
std::vector<std::uint8_t> build_mask(std::span<const std::size_t> sort_perm, std::size_t keep, std::size_t width);

// (1 - rho) / (1 - h / K); +infinity when h == K.
double layer_priority(double keep_threshold, std::size_t threshold, std::size_t width);

struct Gating {
  // Mean of the finite priorities of eligible layers; NaN when there are none.
  double mean_priority = 0.0;
  std::vector<std::uint8_t> gated;
};

// A layer is gated when it is eligible, its priority is finite and it lies
// more than kGateEpsilon below the mean.
Gating gate(std::span<const double> priorities, std::span<const std::uint8_t> eligible);

// One pruning decision over every profiled layer. `reference` supplies the
// per-layer removal counts for count_matched_random and is ignored otherwise.
PruneDecision decide(const ActivationProfile& profile, const PruneConfig& cfg, Rng& rng,
                     const PruneDecision* reference = nullptr);

// Same, after checking that the profile covers every prunable layer of `net`
// with matching widths (ErrorKind::profile_mismatch otherwise).
PruneDecision decide(const Network& net, const ActivationProfile& profile, const PruneConfig& cfg, Rng& rng,
                     const PruneDecision* reference = nullptr);

Json decision_to_json(const PruneDecision& decision);

}  // namespace nwadapt
