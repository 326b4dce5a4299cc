#include "nwadapt/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "nwadapt/adapt.hpp"
#include "nwadapt/data.hpp"
#include "nwadapt/error.hpp"
#include "nwadapt/model_io.hpp"
#include "nwadapt/prune.hpp"
#include "nwadapt/stats.hpp"
#include "nwadapt/surgery.hpp"
#include "nwadapt/train.hpp"
#include "nwadapt/util.hpp"

namespace fs = std::filesystem;

namespace nwadapt {

namespace {

struct Args {
  // common
  std::optional<std::uint64_t> seed_flag;
  // Effective seed: the flag, else the config's train.seed.
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
  bool deterministic = false;

  // synth
  std::size_t classes = 3;
  std::size_t per_class = 60;
  std::size_t test_per_class = 20;
  std::size_t hw = 40;
  double val_fraction = 0.2;

  // data and model
  std::string data;
  std::string model;
  std::string arch = "tiny";
  std::size_t input = 0;
  std::vector<std::size_t> widths{8, 16};
  std::size_t fc_width = 64;
  std::string split = "val";

  // training
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  bool augment = false;

  // pruning
  std::optional<double> prune_budget;
  std::optional<double> keep_threshold;
  std::vector<std::string> exclude_layers;
  std::optional<std::string> strategy;
  std::optional<std::size_t> min_filters;
  std::optional<int> iterations;
  std::optional<double> stop_on_val_drop;
  std::optional<double> stop_below_param_ratio;
  bool keep_snapshots = false;
  std::string decision;

  // sweep / ablation / report
  std::vector<double> budgets{0.02, 0.05, 0.10};
  std::string mode = "uniform_random_vs_least";
  std::string report;
};

struct Resolved {
  AdaptConfig cfg;
  AugmentConfig augment;
};

void add_common(CLI::App* cmd, Args& a) {
  cmd->add_option("--seed", a.seed_flag, "Random seed");
  cmd->add_option("--config", a.config, "JSON config file; flags override it");
  cmd->add_option("--out", a.out, "Output directory")->required();
  cmd->add_flag("--deterministic", a.deterministic, "Zero all timestamps and wall-clock fields");
}

void add_model(CLI::App* cmd, Args& a, bool model_required) {
  cmd->add_option("--data", a.data, "Dataset directory")->required();
  auto* m = cmd->add_option("--model", a.model, "NWAD model file");
  if (model_required) {
    m->required();
    return;
  }
  cmd->add_option("--arch", a.arch, "Architecture when no --model is given")
      ->check(CLI::IsMember({"tiny", "vgg16"}));
  cmd->add_option("--input", a.input, "Network input extent (default: derived from the image size)");
  cmd->add_option("--widths", a.widths, "Tiny CNN conv widths")->delimiter(',');
  cmd->add_option("--fc-width", a.fc_width, "Tiny CNN hidden dense width");
}

void add_train(CLI::App* cmd, Args& a) {
  cmd->add_option("--epochs", a.epochs, "max_epochs");
  cmd->add_option("--lr", a.lr, "lr_initial");
  cmd->add_option("--batch-size", a.batch_size, "batch_size");
  cmd->add_flag("--augment", a.augment, "Enable training augmentation");
}

void add_prune(CLI::App* cmd, Args& a) {
  cmd->add_option("--prune-budget", a.prune_budget, "Prune budget b; keep threshold is 1 - b");
  cmd->add_option("--keep-threshold", a.keep_threshold, "Cumulative keep threshold");
  cmd->add_option("--exclude-layers", a.exclude_layers, "Comma-separated layers never pruned")->delimiter(',');
  cmd->add_option("--strategy", a.strategy, "nwa | uniform_least_activated | uniform_random");
  cmd->add_option("--min-filters", a.min_filters, "Per-layer floor");
}

void add_adapt(CLI::App* cmd, Args& a) {
  cmd->add_option("--iterations", a.iterations, "Adaptation iterations");
  cmd->add_option("--stop-on-val-drop", a.stop_on_val_drop, "Relative validation drop that stops the run");
  cmd->add_option("--stop-below-param-ratio", a.stop_below_param_ratio, "Parameter ratio that stops the run");
  cmd->add_flag("--keep-snapshots", a.keep_snapshots, "Save every iteration's model");
}

Resolved resolve(const Args& a) {
  Resolved r;
  if (!a.config.empty()) {
    Json j;
    try {
      j = Json::parse(read_file(a.config));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::usage, "config '" + a.config + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::usage, "config must be a JSON object");
    if (j.contains("augment")) {
      r.augment = augment_config_from_json(j["augment"]);
      j.erase("augment");
    }
    r.cfg = adapt_config_from_json(j);
  }
  TrainConfig& t = r.cfg.train;
  if (a.seed_flag) t.seed = *a.seed_flag;
  if (a.epochs) t.max_epochs = *a.epochs;
  if (a.lr) t.lr_initial = *a.lr;
  if (a.batch_size) t.batch_size = *a.batch_size;
  if (a.augment) r.augment.enabled = true;

  PruneConfig& p = r.cfg.prune;
  if (a.prune_budget && a.keep_threshold) fail(ErrorKind::usage, "--prune-budget and --keep-threshold are exclusive");
  if (a.prune_budget) p.keep_threshold = 1.0 - *a.prune_budget;
  if (a.keep_threshold) p.keep_threshold = *a.keep_threshold;
  if (!a.exclude_layers.empty()) p.excluded_layers = a.exclude_layers;
  if (a.strategy) {
    p.strategy = strategy_from_string(*a.strategy);
    if (p.strategy == Strategy::count_matched_random) {
      fail(ErrorKind::usage, "count_matched_random needs a paired run; use the ablation command");
    }
  }
  if (a.min_filters) p.min_filters_per_layer = *a.min_filters;
  if (a.iterations) r.cfg.iterations = *a.iterations;
  if (a.stop_on_val_drop) r.cfg.stop_on_val_drop = *a.stop_on_val_drop;
  if (a.stop_below_param_ratio) r.cfg.stop_below_param_ratio = *a.stop_below_param_ratio;
  try {
    r.cfg.validate();
    r.augment.validate();
  } catch (const Error& e) {
    fail(ErrorKind::usage, e.what());
  }
  return r;
}

std::int64_t timestamp(bool deterministic) {
  if (deterministic) return 0;
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string file_hash(const std::string& path) { return hex64(fnv1a64(read_file(path))); }

void write_manifest(const Args& a, const std::string& command, const std::vector<std::string>& argv,
                    const Json& config) {
  fs::create_directories(a.out);
  Json artifacts = Json::object();
  if (!a.data.empty()) artifacts["dataset_manifest"] = file_hash((fs::path(a.data) / "manifest.json").string());
  if (!a.model.empty()) artifacts["model"] = file_hash(a.model);
  if (!a.report.empty()) artifacts["report"] = file_hash(a.report);
  Json m;
  m["tool"] = "nwadapt";
  m["version"] = kToolVersion;
  m["command"] = command;
  m["argv"] = argv;
  m["seed"] = a.seed;
  m["deterministic"] = a.deterministic;
  m["created"] = timestamp(a.deterministic);
  m["config"] = config;
  m["artifacts"] = std::move(artifacts);
  write_file((fs::path(a.out) / "manifest.json").string(), m.dump(2) + '\n');
}

Json resolved_json(const Resolved& r) {
  Json j = adapt_config_to_json(r.cfg);
  j["augment"] = augment_config_to_json(r.augment);
  return j;
}

Json model_metadata(const Args& a, const std::string& command) {
  return Json{{"created", timestamp(a.deterministic)}, {"command", command}, {"seed", a.seed}};
}

std::size_t auto_input(std::size_t image_hw, std::size_t multiple) {
  const std::size_t target = image_hw * 4 / 5 / multiple * multiple;
  return std::max(multiple, std::min(target, image_hw / multiple * multiple));
}

DatasetSplits load_data(const Args& a) { return load_dataset(a.data); }

// The network to train: a loaded model (with a fresh head on class-count
// mismatch) or a newly initialized architecture.
Network make_network(const Args& a, const Dataset& train_set) {
  const Shape& image = train_set.image_shape();
  const std::size_t classes = train_set.num_classes();
  Rng rng = Rng::derived(a.seed, {0x494e4954});  // "INIT"
  if (!a.model.empty()) {
    ModelFile mf = load_model(a.model);
    if (mf.net.input_shape()[0] != image[0]) {
      fail(ErrorKind::data, "model expects " + std::to_string(mf.net.input_shape()[0]) + " channels, dataset has " +
                                std::to_string(image[0]));
    }
    if (mf.net.input_shape()[1] > image[1] || mf.net.input_shape()[2] > image[2]) {
      fail(ErrorKind::data, "dataset images are smaller than the model input");
    }
    const auto& head = mf.net.layers().back();
    if (head.kind == LayerKind::softmax_output && head.out_features != classes) {
      return with_fresh_head(mf.net, classes, rng);
    }
    return std::move(mf.net);
  }
  if (image[0] != 3) fail(ErrorKind::data, "built-in architectures expect 3-channel images");
  NetworkSpec spec;
  if (a.arch == "vgg16") {
    spec = make_vgg16_spec(classes, a.input ? a.input : auto_input(image[1], 32));
  } else {
    const std::size_t multiple = std::size_t{1} << a.widths.size();
    spec = make_tiny_cnn_spec(classes, a.input ? a.input : auto_input(image[1], multiple), a.widths, a.fc_width);
  }
  if (spec.input[1] > image[1]) fail(ErrorKind::usage, "--input exceeds the dataset image size");
  return Network::initialized(std::move(spec), rng);
}

void check_excluded(const Network& net, const PruneConfig& p) {
  for (const auto& name : p.excluded_layers) {
    const auto i = net.find(name);
    if (!i || !net.layer(*i).prunable()) fail(ErrorKind::usage, "--exclude-layers: '" + name + "' is not prunable");
  }
}

PruneDecision decision_from_file(const std::string& path, const PruneConfig& cfg) {
  Json j;
  try {
    j = Json::parse(read_file(path));
    PruneDecision d;
    d.config = cfg;
    for (const auto& l : j.at("layers")) {
      LayerDecision ld;
      ld.name = l.at("name").get<std::string>();
      const auto bits = l.at("mask").get<std::string>();
      ld.width = bits.size();
      for (char c : bits) {
        if (c != '0' && c != '1') fail(ErrorKind::format, "mask of '" + ld.name + "' must be a 0/1 string");
        ld.mask.push_back(c == '1');
      }
      ld.threshold = ld.kept();
      d.layers.push_back(std::move(ld));
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, "decision file '" + path + "': " + e.what());
  }
}

void save_outcome(const fs::path& dir, const AdaptOutcome& o, const Args& a, const std::string& command) {
  write_report_files(dir.string(), o.report);
  save_model(dir / "best.nwad", o.best, model_metadata(a, command));
  if (!o.snapshots.empty()) {
    fs::create_directories(dir / "snapshots");
    for (std::size_t i = 0; i < o.snapshots.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "iter_%02zu.nwad", i);
      save_model(dir / "snapshots" / name, o.snapshots[i], model_metadata(a, command));
    }
  }
}

AdaptOptions adapt_options(const Args& a, const Resolved& r, const DatasetSplits& d) {
  AdaptOptions o;
  o.test_set = d.test.empty() ? nullptr : &d.test;
  o.augment = r.augment;
  o.deterministic = a.deterministic;
  o.keep_snapshots = a.keep_snapshots;
  return o;
}

std::string budget_dir(double b) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "budget_%g", b);
  return buf;
}

void print_json(const Json& j) { std::cout << j.dump(2) << '\n'; }

int dispatch(const std::string& command, Args a, const std::vector<std::string>& argv) {
  const Resolved r = resolve(a);
  a.seed = r.cfg.train.seed;
  const fs::path out(a.out);

  if (command == "synth") {
    if (a.classes < 2 || a.classes > 8) fail(ErrorKind::usage, "--classes must be in [2, 8]");
    if (!(a.val_fraction > 0.0 && a.val_fraction < 1.0)) fail(ErrorKind::usage, "--val-fraction must be in (0, 1)");
    write_manifest(a, command, argv, resolved_json(r));
    Rng rng = Rng::derived(a.seed, {1});
    Dataset pool = generate_synthetic(a.classes, a.per_class, a.hw, rng);
    Rng split_rng = Rng::derived(a.seed, {2});
    auto [train_set, val_set] = stratified_split(pool, a.val_fraction, split_rng);
    Dataset test_set;
    if (a.test_per_class > 0) {
      Rng test_rng = Rng::derived(a.seed, {3});
      test_set = generate_synthetic(a.classes, a.test_per_class, a.hw, test_rng);
    }
    const auto means = compute_channel_means(train_set);
    train_set.channel_means = val_set.channel_means = means;
    train_set.split = Split::train;
    val_set.split = Split::val;
    if (!test_set.empty()) {
      test_set.channel_means = means;
      test_set.split = Split::test;
    }
    save_dataset(out, {std::move(train_set), std::move(val_set), std::move(test_set)});
    return 0;
  }

  if (command == "report") {
    write_manifest(a, command, argv, Json::object());
    Json report;
    try {
      report = Json::parse(read_file(a.report));
      const std::string md = report_markdown(report);
      write_file((out / "curves.csv").string(), curves_csv(report));
      write_file((out / "widths.csv").string(), widths_csv(report));
      write_file((out / "summary.md").string(), md);
      std::cout << md;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::format, "report '" + a.report + "': " + e.what());
    }
    return 0;
  }

  DatasetSplits data = load_data(a);
  if (data.train.empty()) fail(ErrorKind::data, "dataset has no training samples");

  if (command == "stats" || command == "eval" || command == "prune_once") {
    ModelFile mf = load_model(a.model);
    const Network& net = mf.net;
    if (command == "stats") {
      const Dataset& ds = a.split == "train" ? data.train : a.split == "val" ? data.val : data.test;
      write_manifest(a, command, argv, Json{{"split", a.split}});
      const auto profile = collect_profile(net, ds);
      write_file((out / "profile.json").string(), profile_to_json(profile).dump(2) + '\n');
      return 0;
    }
    if (command == "eval") {
      const Dataset& ds = a.split == "train" ? data.train : a.split == "val" ? data.val : data.test;
      if (ds.empty()) fail(ErrorKind::data, "split '" + a.split + "' is empty");
      write_manifest(a, command, argv, Json{{"split", a.split}});
      const Evaluation single = evaluate(net, ds);
      const double ten = evaluate_ten_crop(net, ds);
      Json j{{"split", a.split},
             {"samples", single.samples},
             {"loss", round_significant(single.loss)},
             {"single_crop_accuracy", round_significant(single.accuracy)},
             {"ten_crop_accuracy", round_significant(ten)}};
      write_file((out / "eval.json").string(), j.dump(2) + '\n');
      print_json(j);
      return 0;
    }
    check_excluded(net, r.cfg.prune);
    write_manifest(a, command, argv, resolved_json(r));
    PruneDecision decision;
    if (!a.decision.empty()) {
      decision = decision_from_file(a.decision, r.cfg.prune);
    } else {
      const auto profile = collect_profile(net, data.train);
      Rng rng = Rng::derived(a.seed, {0x44454349, 1});
      decision = decide(net, profile, r.cfg.prune, rng);
      decision.seed = a.seed;
    }
    auto [pruned, delta] = apply_masks(net, decision);
    Json dj = decision_to_json(decision);
    dj["arch_delta"] = arch_delta_to_json(delta);
    write_file((out / "decision.json").string(), dj.dump(2) + '\n');
    Json meta = mf.metadata.is_object() ? mf.metadata : Json::object();
    if (meta.contains("created")) meta["created"] = timestamp(a.deterministic);
    save_model(out / "pruned.nwad", pruned, meta);
    return 0;
  }

  Network net = make_network(a, data.train);
  if (data.val.empty()) fail(ErrorKind::data, "dataset has no validation samples");
  check_excluded(net, r.cfg.prune);

  if (command == "finetune") {
    write_manifest(a, command, argv, resolved_json(r));
    const FitResult fr = fit(net, data.train, data.val, r.cfg.train, r.augment);
    save_model(out / "model.nwad", net, model_metadata(a, command));
    Json j = fit_result_to_json(fr);
    write_file((out / "fit.json").string(), j.dump(2) + '\n');
    std::cout << "best val accuracy " << fr.best_val_accuracy << " at epoch " << fr.best_epoch << '\n';
    return 0;
  }

  const AdaptOptions opts = adapt_options(a, r, data);
  if (command == "adapt") {
    write_manifest(a, command, argv, resolved_json(r));
    const AdaptOutcome o = run(std::move(net), data.train, data.val, r.cfg, opts);
    save_outcome(out, o, a, command);
    std::cout << report_markdown(report_to_json(o.report));
    return 0;
  }

  if (command == "sweep") {
    for (double b : a.budgets) {
      if (!(b > 0.0 && b < 1.0)) fail(ErrorKind::usage, "--budgets entries must lie in (0, 1)");
    }
    Json cfg = resolved_json(r);
    cfg["budgets"] = a.budgets;
    write_manifest(a, command, argv, cfg);
    const Step0 start = run_step0(std::move(net), data.train, data.val, r.cfg, opts);
    save_model(out / "step0.nwad", start.tuned, model_metadata(a, command));
    const auto outcomes = sweep_budgets(start, data.train, data.val, r.cfg, a.budgets, opts);
    Json summary = Json::array();
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      const auto& rep = outcomes[i].report;
      save_outcome(out / budget_dir(a.budgets[i]), outcomes[i], a, command);
      summary.push_back({{"budget", a.budgets[i]},
                         {"dir", budget_dir(a.budgets[i])},
                         {"best_iteration", rep.best_iteration},
                         {"best_val_accuracy", round_significant(rep.rows[rep.best_iteration].val_accuracy)},
                         {"final_params", rep.rows.back().params}});
    }
    write_file((out / "sweep.json").string(), summary.dump(2) + '\n');
    print_json(summary);
    return 0;
  }

  if (command == "ablation") {
    const AblationMode mode = ablation_mode_from_string(a.mode);
    Json cfg = resolved_json(r);
    cfg["mode"] = a.mode;
    write_manifest(a, command, argv, cfg);
    const Step0 start = run_step0(std::move(net), data.train, data.val, r.cfg, opts);
    const AblationResult res = run_ablation(start, data.train, data.val, r.cfg, mode, opts);
    Json j = ablation_to_json(res);
    write_file((out / "ablation.json").string(), j.dump(2) + '\n');
    if (mode == AblationMode::count_matched) {
      for (const auto& run : res.runs) {
        write_report_files((out / std::string(to_string(run.strategy))).string(), run.outcome.report);
      }
    }
    print_json(j["mean_val_accuracy"]);
    return 0;
  }

  fail(ErrorKind::usage, "unknown command '" + command + "'");
}

void report_error(ErrorKind kind, const std::string& message, Json extra = Json::object()) {
  Json j{{"error", std::string(to_string(kind))}, {"message", message}, {"exit_code", exit_code_for(kind)}};
  for (auto& [k, v] : extra.items()) j[k] = v;
  std::cerr << j.dump() << '\n';
}

}  // namespace

Network with_fresh_head(const Network& net, std::size_t num_classes, Rng& rng) {
  if (net.size() == 0 || net.layers().back().kind != LayerKind::softmax_output) {
    fail(ErrorKind::invalid_argument, "network has no classifier head");
  }
  if (num_classes < 2) fail(ErrorKind::invalid_argument, "need at least two classes");
  NetworkSpec spec = net.spec();
  LayerSpec& head = spec.layers.back();
  head = LayerSpec::classifier(head.name, num_classes, head.in_features);
  Network fresh(spec);
  std::vector<LayerParams<float>> params = net.all_params();
  const double stddev = std::sqrt(2.0 / static_cast<double>(head.in_features));
  params.back().weight = rand_normal<float>(head.weight_shape(), 0.0, stddev, rng);
  params.back().bias = zeros<float>(head.bias_shape());
  fresh.set_params(std::move(params));
  fresh.set_mode(net.mode());
  return fresh;
}

int run_cli(int argc, const char* const* argv) {
  Args a;
  CLI::App app{"Iterative activation-based filter pruning for target-task adaptation", "nwadapt"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic shape dataset");
  add_common(synth, a);
  synth->add_option("--classes", a.classes, "Number of classes (2-8)");
  synth->add_option("--per-class", a.per_class, "Train+val images per class");
  synth->add_option("--test-per-class", a.test_per_class, "Test images per class");
  synth->add_option("--hw", a.hw, "Image extent");
  synth->add_option("--val-fraction", a.val_fraction, "Validation holdout fraction");

  auto* finetune = app.add_subcommand("finetune", "Train a network on a dataset (Step 0)");
  add_common(finetune, a);
  add_model(finetune, a, false);
  add_train(finetune, a);

  auto* adapt = app.add_subcommand("adapt", "Full iterative adaptation");
  add_common(adapt, a);
  add_model(adapt, a, false);
  add_train(adapt, a);
  add_prune(adapt, a);
  add_adapt(adapt, a);

  auto* prune_once = app.add_subcommand("prune_once", "One profile + decision + surgery, no retraining");
  add_common(prune_once, a);
  add_model(prune_once, a, true);
  add_prune(prune_once, a);
  prune_once->add_option("--decision", a.decision, "Apply the masks of a decision JSON instead of deciding");

  auto* stats = app.add_subcommand("stats", "Write the activation profile of a model");
  add_common(stats, a);
  add_model(stats, a, true);
  stats->add_option("--split", a.split, "Dataset split")->check(CLI::IsMember({"train", "val", "test"}));

  auto* eval = app.add_subcommand("eval", "Single-crop and ten-crop accuracy");
  add_common(eval, a);
  add_model(eval, a, true);
  eval->add_option("--split", a.split, "Dataset split")->check(CLI::IsMember({"train", "val", "test"}));

  auto* sweep = app.add_subcommand("sweep", "Independent runs per prune budget from one Step-0 model");
  add_common(sweep, a);
  add_model(sweep, a, false);
  add_train(sweep, a);
  add_prune(sweep, a);
  add_adapt(sweep, a);
  sweep->add_option("--budgets", a.budgets, "Comma-separated prune budgets")->delimiter(',');

  auto* ablation = app.add_subcommand("ablation", "Random versus least-activated baselines");
  add_common(ablation, a);
  add_model(ablation, a, false);
  add_train(ablation, a);
  add_prune(ablation, a);
  add_adapt(ablation, a);
  ablation->add_option("--mode", a.mode, "uniform_random_vs_least | count_matched")
      ->check(CLI::IsMember({"uniform_random_vs_least", "count_matched"}));

  auto* report = app.add_subcommand("report", "Render CSV and Markdown tables from report.json");
  add_common(report, a);
  report->add_option("--report", a.report, "report.json path")->required();

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error(ErrorKind::usage, e.what());
    return exit_code_for(ErrorKind::usage);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return dispatch(command, a, args);
  } catch (const DivergenceError& e) {
    report_error(e.kind(), e.what(), Json{{"epoch", e.epoch()}, {"iteration", e.iteration()}});
    return exit_code_for(e.kind());
  } catch (const Error& e) {
    report_error(e.kind(), e.what());
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    report_error(ErrorKind::io, e.what());
    return exit_code_for(ErrorKind::io);
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"nwadapt"};
  for (const auto& s : args) argv.push_back(s.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace nwadapt
