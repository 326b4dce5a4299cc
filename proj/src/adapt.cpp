#include "nwadapt/adapt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "nwadapt/error.hpp"
#include "nwadapt/model_io.hpp"
#include "nwadapt/stats.hpp"

namespace nwadapt {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kDecideStream = 0x44454349;  // "DECI"

double seconds_since(Clock::time_point start, bool deterministic) {
  if (deterministic) return 0.0;
  return std::chrono::duration<double>(Clock::now() - start).count();
}

IterationRecord make_row(int iteration, const Network& net, const FitResult& fit, const AdaptOptions& options) {
  IterationRecord row;
  row.iteration = iteration;
  row.val_accuracy = fit.best_val_accuracy;
  if (options.test_set != nullptr) row.test_accuracy = evaluate(net, *options.test_set).accuracy;
  row.params = count_params(net);
  row.flops = count_flops(net);
  row.widths = prunable_widths(net.spec());
  for (const auto& e : fit.history) row.lr_history.push_back(e.lr);
  row.best_epoch = fit.best_epoch;
  row.params_fingerprint = params_fingerprint(net);
  return row;
}

TrainConfig iteration_train_config(const AdaptConfig& cfg, int iteration) {
  TrainConfig t = cfg.train;
  t.seed = cfg.train.seed + static_cast<std::uint64_t>(iteration);
  return t;
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void AdaptConfig::validate() const {
  if (iterations < 0) fail(ErrorKind::invalid_argument, "iterations must be >= 0");
  prune.validate();
  train.validate();
  if (stop_on_val_drop && !(*stop_on_val_drop >= 0.0 && *stop_on_val_drop < 1.0)) {
    fail(ErrorKind::invalid_argument, "stop_on_val_drop must be in [0, 1)");
  }
  if (stop_below_param_ratio && !(*stop_below_param_ratio > 0.0 && *stop_below_param_ratio < 1.0)) {
    fail(ErrorKind::invalid_argument, "stop_below_param_ratio must be in (0, 1)");
  }
}

Json adapt_config_to_json(const AdaptConfig& cfg) {
  Json j;
  j["iterations"] = cfg.iterations;
  j["prune"] = prune_config_to_json(cfg.prune);
  j["train"] = train_config_to_json(cfg.train);
  j["stop_on_val_drop"] = cfg.stop_on_val_drop ? Json(*cfg.stop_on_val_drop) : Json(nullptr);
  j["stop_below_param_ratio"] = cfg.stop_below_param_ratio ? Json(*cfg.stop_below_param_ratio) : Json(nullptr);
  return j;
}

AdaptConfig adapt_config_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorKind::usage, "adapt config must be a JSON object");
  AdaptConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "iterations") {
        cfg.iterations = value.get<int>();
      } else if (key == "prune") {
        cfg.prune = prune_config_from_json(value);
      } else if (key == "train") {
        cfg.train = train_config_from_json(value);
      } else if (key == "stop_on_val_drop") {
        if (!value.is_null()) cfg.stop_on_val_drop = value.get<double>();
      } else if (key == "stop_below_param_ratio") {
        if (!value.is_null()) cfg.stop_below_param_ratio = value.get<double>();
      } else {
        fail(ErrorKind::usage, "unknown adapt config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::usage, std::string("bad adapt config: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(ErrorKind::usage, e.what());
  }
  return cfg;
}

std::string params_fingerprint(const Network& net) {
  std::ostringstream out;
  write_model(out, net);
  return hex64(fnv1a64(out.str()));
}

Step0 run_step0(Network net, const Dataset& train_set, const Dataset& val_set, const AdaptConfig& cfg,
                const AdaptOptions& options) {
  cfg.validate();
  const auto start = Clock::now();
  Step0 s;
  try {
    s.fit = fit(net, train_set, val_set, iteration_train_config(cfg, 0), options.augment);
  } catch (const DivergenceError& e) {
    throw DivergenceError(e.epoch(), 0, e.what());
  }
  s.row = make_row(0, net, s.fit, options);
  s.row.wall_seconds = seconds_since(start, options.deterministic);
  s.tuned = std::move(net);
  return s;
}

AdaptOutcome run_from(const Step0& start, const Dataset& train_set, const Dataset& val_set, const AdaptConfig& cfg,
                      const AdaptOptions& options) {
  cfg.validate();
  AdaptOutcome out;
  AdaptReport& report = out.report;
  report.seed = cfg.train.seed;
  report.config = cfg;
  report.rows.push_back(start.row);
  if (options.deterministic) report.rows[0].wall_seconds = 0.0;
  out.best = start.tuned;
  if (options.keep_snapshots) out.snapshots.push_back(start.tuned);

  Network current = start.tuned;
  double running_best = start.row.val_accuracy;
  const double params0 = static_cast<double>(start.row.params);

  for (int it = 1; it <= cfg.iterations; ++it) {
    const auto t0 = Clock::now();
    const PruneDecision* reference = nullptr;
    if (cfg.prune.strategy == Strategy::count_matched_random) {
      if (options.reference_decisions == nullptr) {
        fail(ErrorKind::invalid_argument, "count_matched_random needs reference decisions");
      }
      if (static_cast<std::size_t>(it) > options.reference_decisions->size()) {
        report.stop_reason = "reference_exhausted";
        break;
      }
      reference = &(*options.reference_decisions)[static_cast<std::size_t>(it - 1)];
    }

    const ActivationProfile profile = collect_profile(current, train_set);
    Rng rng = Rng::derived(cfg.train.seed, {kDecideStream, static_cast<std::uint64_t>(it)});
    PruneDecision decision = decide(current, profile, cfg.prune, rng, reference);
    decision.seed = cfg.train.seed;

    std::pair<Network, ArchDelta> surgery;
    try {
      surgery = apply_masks(current, decision);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::floor_violation) throw;
      report.stop_reason = "network_exhausted";
      report.warnings.push_back("iteration " + std::to_string(it) + ": " + e.what());
      break;
    }
    if (decision.gated_count() == 0) {
      report.warnings.push_back("iteration " + std::to_string(it) + ": no layer gated");
    }

    Network pruned = std::move(surgery.first);
    FitResult fr;
    try {
      fr = fit(pruned, train_set, val_set, iteration_train_config(cfg, it), options.augment);
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.epoch(), it, std::string(e.what()) + " (iteration " + std::to_string(it) + ")");
    }

    IterationRecord row = make_row(it, pruned, fr, options);
    row.profile_fingerprint = decision.profile_fingerprint;
    row.gated_layers = decision.gated_count();
    row.delta = std::move(surgery.second);
    row.wall_seconds = seconds_since(t0, options.deterministic);
    report.rows.push_back(std::move(row));
    report.decisions.push_back(std::move(decision));
    if (options.keep_snapshots) out.snapshots.push_back(pruned);

    const IterationRecord& last = report.rows.back();
    if (last.val_accuracy > report.rows[static_cast<std::size_t>(report.best_iteration)].val_accuracy) {
      report.best_iteration = it;
      out.best = pruned;
    }
    current = std::move(pruned);

    if (cfg.stop_below_param_ratio && static_cast<double>(last.params) / params0 < *cfg.stop_below_param_ratio) {
      report.stop_reason = "param_ratio";
      break;
    }
    if (cfg.stop_on_val_drop && last.val_accuracy < running_best * (1.0 - *cfg.stop_on_val_drop)) {
      report.stop_reason = "val_drop";
      break;
    }
    running_best = std::max(running_best, last.val_accuracy);
  }
  return out;
}

AdaptOutcome run(Network net, const Dataset& train_set, const Dataset& val_set, const AdaptConfig& cfg,
                 const AdaptOptions& options) {
  const Step0 start = run_step0(std::move(net), train_set, val_set, cfg, options);
  return run_from(start, train_set, val_set, cfg, options);
}

std::vector<AdaptOutcome> sweep_budgets(const Step0& start, const Dataset& train_set, const Dataset& val_set,
                                        const AdaptConfig& cfg, const std::vector<double>& budgets,
                                        const AdaptOptions& options) {
  for (double b : budgets) {
    if (!(b > 0.0 && b < 1.0)) fail(ErrorKind::invalid_argument, "prune budgets must lie in (0, 1)");
  }
  std::vector<AdaptOutcome> outcomes;
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    AdaptConfig branch = cfg;
    branch.prune.keep_threshold = 1.0 - budgets[i];
    branch.train.seed = cfg.train.seed ^ static_cast<std::uint64_t>(i);
    outcomes.push_back(run_from(start, train_set, val_set, branch, options));
  }
  return outcomes;
}

std::string_view to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::uniform_random_vs_least:
      return "uniform_random_vs_least";
    case AblationMode::count_matched:
      return "count_matched";
  }
  return "?";
}

AblationMode ablation_mode_from_string(std::string_view name) {
  if (name == "uniform_random_vs_least") return AblationMode::uniform_random_vs_least;
  if (name == "count_matched") return AblationMode::count_matched;
  fail(ErrorKind::usage, "unknown ablation mode '" + std::string(name) + "'");
}

AblationResult run_ablation(const Step0& start, const Dataset& train_set, const Dataset& val_set,
                            const AdaptConfig& cfg, AblationMode mode, const AdaptOptions& options) {
  AblationResult result;
  result.mode = mode;
  if (mode == AblationMode::uniform_random_vs_least) {
    for (int s = 0; s < kAblationSeeds; ++s) {
      for (Strategy strategy : {Strategy::uniform_random, Strategy::uniform_least_activated}) {
        AdaptConfig branch = cfg;
        branch.iterations = 1;
        branch.prune.strategy = strategy;
        branch.prune.uniform_fraction = kAblationFraction;
        // Both strategies of a seed share the training stream.
        branch.train.seed = cfg.train.seed ^ static_cast<std::uint64_t>(s + 1);
        AdaptOptions opts = options;
        opts.reference_decisions = nullptr;
        result.runs.push_back({strategy, branch.train.seed, run_from(start, train_set, val_set, branch, opts)});
      }
    }
  } else {
    AdaptConfig nwa = cfg;
    nwa.prune.strategy = Strategy::nwa;
    AblationRun reference{Strategy::nwa, nwa.train.seed, run_from(start, train_set, val_set, nwa, options)};

    AdaptConfig random = cfg;
    random.prune.strategy = Strategy::count_matched_random;
    random.stop_on_val_drop.reset();
    random.stop_below_param_ratio.reset();
    random.iterations = static_cast<int>(reference.outcome.report.decisions.size());
    random.train.seed = cfg.train.seed ^ 1ULL;
    AdaptOptions opts = options;
    opts.reference_decisions = &reference.outcome.report.decisions;
    AblationRun paired{Strategy::count_matched_random, random.train.seed,
                       run_from(start, train_set, val_set, random, opts)};
    result.runs.push_back(std::move(reference));
    result.runs.push_back(std::move(paired));
  }

  for (const auto& r : result.runs) {
    const auto& report = r.outcome.report;
    const double best = report.rows[static_cast<std::size_t>(report.best_iteration)].val_accuracy;
    auto it = std::find_if(result.mean_val_accuracy.begin(), result.mean_val_accuracy.end(),
                           [&](const auto& p) { return p.first == r.strategy; });
    if (it == result.mean_val_accuracy.end()) {
      result.mean_val_accuracy.emplace_back(r.strategy, best);
    } else {
      it->second += best;
    }
  }
  for (auto& [strategy, total] : result.mean_val_accuracy) {
    const auto n = std::count_if(result.runs.begin(), result.runs.end(),
                                 [&](const AblationRun& r) { return r.strategy == strategy; });
    total /= static_cast<double>(n);
  }
  return result;
}

Json report_to_json(const AdaptReport& report) {
  Json j;
  j["seed"] = report.seed;
  j["config"] = adapt_config_to_json(report.config);
  j["keep_threshold"] = report.config.prune.keep_threshold;
  j["prune_budget"] = round_significant(report.config.prune.budget());
  j["threshold_semantics"] = "keep_threshold is the cumulative activation mass kept; prune_budget = 1 - keep_threshold";
  j["flop_convention"] = "2 per multiply-accumulate; conv 2*K*C*kh*kw*Ho*Wo, dense 2*out*in; activations, pooling free";
  j["best_iteration"] = report.best_iteration;
  j["stop_reason"] = report.stop_reason;
  j["warnings"] = report.warnings;
  Json rows = Json::array();
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const IterationRecord& r = report.rows[i];
    Json row;
    row["iteration"] = r.iteration;
    row["val_accuracy"] = round_significant(r.val_accuracy);
    row["test_accuracy"] = r.test_accuracy ? Json(round_significant(*r.test_accuracy)) : Json(nullptr);
    row["params"] = r.params;
    row["flops"] = r.flops;
    Json widths = Json::object();
    for (const auto& [name, w] : r.widths) widths[name] = w;
    row["widths"] = std::move(widths);
    Json lrs = Json::array();
    for (double lr : r.lr_history) lrs.push_back(round_significant(lr));
    row["lr_history"] = std::move(lrs);
    row["best_epoch"] = r.best_epoch;
    row["wall_seconds"] = round_significant(r.wall_seconds);
    row["profile_fingerprint"] = r.profile_fingerprint.empty() ? Json(nullptr) : Json(r.profile_fingerprint);
    row["params_fingerprint"] = r.params_fingerprint;
    if (i >= 1 && i - 1 < report.decisions.size()) {
      const PruneDecision& d = report.decisions[i - 1];
      row["gated_layers"] = r.gated_layers;
      row["mean_priority"] = std::isfinite(d.mean_priority) ? Json(round_significant(d.mean_priority)) : Json(nullptr);
      Json layers = Json::array();
      for (const auto& l : d.layers) {
        layers.push_back({{"name", l.name},
                          {"K", l.width},
                          {"h", l.threshold},
                          {"kept", l.kept()},
                          {"priority", std::isfinite(l.priority) ? Json(round_significant(l.priority)) : Json(nullptr)},
                          {"gated", l.gated},
                          {"excluded", l.excluded},
                          {"dead", l.dead}});
      }
      row["decision"] = std::move(layers);
    }
    row["arch_delta"] = r.delta ? arch_delta_to_json(*r.delta) : Json(nullptr);
    rows.push_back(std::move(row));
  }
  j["iterations"] = std::move(rows);
  return j;
}

Json ablation_to_json(const AblationResult& result) {
  Json j;
  j["mode"] = std::string(to_string(result.mode));
  Json runs = Json::array();
  for (const auto& r : result.runs) {
    const auto& report = r.outcome.report;
    Json kept = Json::array();
    for (const auto& d : report.decisions) {
      Json per = Json::object();
      for (const auto& l : d.layers) per[l.name] = l.kept();
      kept.push_back(std::move(per));
    }
    runs.push_back({{"strategy", std::string(to_string(r.strategy))},
                    {"seed", r.seed},
                    {"best_val_accuracy",
                     round_significant(report.rows[static_cast<std::size_t>(report.best_iteration)].val_accuracy)},
                    {"kept_per_iteration", std::move(kept)},
                    {"report", report_to_json(report)}});
  }
  j["runs"] = std::move(runs);
  Json means = Json::object();
  for (const auto& [strategy, mean] : result.mean_val_accuracy) {
    means[std::string(to_string(strategy))] = round_significant(mean);
  }
  j["mean_val_accuracy"] = std::move(means);
  return j;
}

std::string curves_csv(const Json& report) {
  std::string out = "iteration,val_acc,test_acc,params,flops,params_ratio,flops_ratio\n";
  const Json& rows = report.at("iterations");
  if (rows.empty()) return out;
  const double p0 = rows[0].at("params").get<double>();
  const double f0 = rows[0].at("flops").get<double>();
  for (const auto& r : rows) {
    const double p = r.at("params").get<double>();
    const double f = r.at("flops").get<double>();
    out += std::to_string(r.at("iteration").get<int>()) + ',';
    out += format_real(r.at("val_accuracy").get<double>()) + ',';
    if (!r.at("test_accuracy").is_null()) out += format_real(r.at("test_accuracy").get<double>());
    out += ',' + std::to_string(r.at("params").get<std::uint64_t>()) + ',';
    out += std::to_string(r.at("flops").get<std::uint64_t>()) + ',';
    out += format_real(p0 > 0 ? p / p0 : 0.0) + ',';
    out += format_real(f0 > 0 ? f / f0 : 0.0) + '\n';
  }
  return out;
}

std::string widths_csv(const Json& report) {
  const Json& rows = report.at("iterations");
  std::string out = "iteration";
  if (rows.empty()) return out + '\n';
  std::vector<std::string> names;
  for (const auto& [name, w] : rows[0].at("widths").items()) {
    names.push_back(name);
    out += ',' + name;
  }
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.at("iteration").get<int>());
    const Json& widths = r.at("widths");
    for (const auto& name : names) {
      out += ',';
      if (widths.contains(name)) out += std::to_string(widths.at(name).get<std::size_t>());
    }
    out += '\n';
  }
  return out;
}

std::string report_markdown(const Json& report) {
  const Json& rows = report.at("iterations");
  std::string out = "| iteration | val_acc | test_acc | params | flops | params_ratio | flops_ratio |\n";
  out += "|---:|---:|---:|---:|---:|---:|---:|\n";
  const double p0 = rows.empty() ? 0.0 : rows[0].at("params").get<double>();
  const double f0 = rows.empty() ? 0.0 : rows[0].at("flops").get<double>();
  const int best = report.value("best_iteration", -1);
  for (const auto& r : rows) {
    const int it = r.at("iteration").get<int>();
    out += "| " + std::to_string(it) + (it == best ? " (best)" : "") + " | ";
    out += format_real(r.at("val_accuracy").get<double>()) + " | ";
    out += (r.at("test_accuracy").is_null() ? std::string("-") : format_real(r.at("test_accuracy").get<double>()));
    out += " | " + std::to_string(r.at("params").get<std::uint64_t>());
    out += " | " + std::to_string(r.at("flops").get<std::uint64_t>());
    out += " | " + format_real(p0 > 0 ? r.at("params").get<double>() / p0 : 0.0);
    out += " | " + format_real(f0 > 0 ? r.at("flops").get<double>() / f0 : 0.0) + " |\n";
  }
  out += "\nstop reason: " + report.value("stop_reason", std::string("?")) + '\n';
  return out;
}

void write_report_files(const std::string& dir, const AdaptReport& report) {
  std::filesystem::create_directories(dir);
  const Json j = report_to_json(report);
  write_file(dir + "/report.json", j.dump(2) + '\n');
  write_file(dir + "/curves.csv", curves_csv(j));
  write_file(dir + "/widths.csv", widths_csv(j));
}

}  // namespace nwadapt
