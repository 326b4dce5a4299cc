#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nwadapt/data.hpp"
#include "nwadapt/layers.hpp"
#include "nwadapt/prune.hpp"
#include "nwadapt/surgery.hpp"
#include "nwadapt/train.hpp"
#include "nwadapt/util.hpp"

namespace nwadapt {

struct AdaptConfig {
  int iterations = 20;
  PruneConfig prune;
  TrainConfig train;
  // Stop once validation accuracy falls more than this fraction below the
  // best seen so far.
  std::optional<double> stop_on_val_drop;
  // Stop at the first iteration whose params / params(iteration 0) is below
  // this ratio.
  std::optional<double> stop_below_param_ratio;

  void validate() const;
};

Json adapt_config_to_json(const AdaptConfig& cfg);
AdaptConfig adapt_config_from_json(const Json& j);

struct IterationRecord {
  int iteration = 0;
  double val_accuracy = 0.0;
  std::optional<double> test_accuracy;
  std::size_t params = 0;
  std::uint64_t flops = 0;
  std::vector<std::pair<std::string, std::size_t>> widths;
  std::vector<double> lr_history;
  int best_epoch = -1;
  double wall_seconds = 0.0;
  // Profile the pruning decision of this iteration was made from (empty for
  // iteration 0).
  std::string profile_fingerprint;
  // Parameters at the end of this iteration.
  std::string params_fingerprint;
  std::size_t gated_layers = 0;
  std::optional<ArchDelta> delta;
};

struct AdaptReport {
  std::vector<IterationRecord> rows;
  // decisions[i - 1] produced iteration i.
  std::vector<PruneDecision> decisions;
  int best_iteration = 0;
  std::uint64_t seed = 0;
  AdaptConfig config;
  // completed | val_drop | param_ratio | network_exhausted | reference_exhausted
  std::string stop_reason = "completed";
  std::vector<std::string> warnings;
};

struct AdaptOptions {
  const Dataset* test_set = nullptr;
  AugmentConfig augment;
  // Record zero wall-clock times so reports are byte-stable.
  bool deterministic = false;
  bool keep_snapshots = false;
  // Per-iteration decisions to copy removal counts from (count_matched_random).
  const std::vector<PruneDecision>* reference_decisions = nullptr;
};

struct AdaptOutcome {
  AdaptReport report;
  Network best;
  // Fine-tuned network of every recorded iteration when keep_snapshots is set.
  std::vector<Network> snapshots;
};

// Result of the initial fine-tune, shared by sweep and ablation branches.
struct Step0 {
  Network tuned;
  FitResult fit;
  IterationRecord row;
};

Step0 run_step0(Network net, const Dataset& train_set, const Dataset& val_set, const AdaptConfig& cfg,
                const AdaptOptions& options = {});

// Iterations 1..cfg.iterations starting from a Step-0 checkpoint.
AdaptOutcome run_from(const Step0& start, const Dataset& train_set, const Dataset& val_set, const AdaptConfig& cfg,
                      const AdaptOptions& options = {});

// Step 0 followed by the pruning iterations. Returns the network of the
// iteration with the best validation accuracy (earliest on ties).
AdaptOutcome run(Network net, const Dataset& train_set, const Dataset& val_set, const AdaptConfig& cfg,
                 const AdaptOptions& options = {});

// One independent run per prune budget from the same Step-0 checkpoint; branch
// b trains with seed ^ b.
std::vector<AdaptOutcome> sweep_budgets(const Step0& start, const Dataset& train_set, const Dataset& val_set,
                                        const AdaptConfig& cfg, const std::vector<double>& budgets,
                                        const AdaptOptions& options = {});

enum class AblationMode { uniform_random_vs_least, count_matched };

std::string_view to_string(AblationMode mode);
AblationMode ablation_mode_from_string(std::string_view name);

struct AblationRun {
  Strategy strategy = Strategy::nwa;
  std::uint64_t seed = 0;
  AdaptOutcome outcome;
};

struct AblationResult {
  AblationMode mode = AblationMode::uniform_random_vs_least;
  std::vector<AblationRun> runs;
  // Mean best validation accuracy per strategy, in first-seen order.
  std::vector<std::pair<Strategy, double>> mean_val_accuracy;
};

inline constexpr int kAblationSeeds = 5;
inline constexpr double kAblationFraction = 0.10;

// uniform_random_vs_least: kAblationSeeds single-iteration runs each of
// uniform_random and uniform_least_activated at kAblationFraction.
// count_matched: a full nwa run plus a count_matched_random run copying its
// per-iteration removal counts.
AblationResult run_ablation(const Step0& start, const Dataset& train_set, const Dataset& val_set,
                            const AdaptConfig& cfg, AblationMode mode, const AdaptOptions& options = {});

Json report_to_json(const AdaptReport& report);
Json ablation_to_json(const AblationResult& result);

// CSV renderings of a report JSON document.
// curves: iteration,val_acc,test_acc,params,flops,params_ratio,flops_ratio
std::string curves_csv(const Json& report);
// widths: iteration followed by one column per prunable layer.
std::string widths_csv(const Json& report);
// Markdown summary table.
std::string report_markdown(const Json& report);

// Writes report.json, curves.csv and widths.csv into dir.
void write_report_files(const std::string& dir, const AdaptReport& report);

std::string params_fingerprint(const Network& net);

}  // namespace nwadapt
