// One PASS/FAIL line per acceptance criterion; exits nonzero on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "gradcases.hpp"
#include "nets.hpp"
#include "nwadapt/adapt.hpp"
#include "nwadapt/cli.hpp"
#include "nwadapt/model_io.hpp"
#include "nwadapt/stats.hpp"
#include "nwadapt/surgery.hpp"
#include "nwadapt/tensor_io.hpp"
#include "nwadapt/util.hpp"
#include "oracles.hpp"

using namespace nwadapt;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Collects failed checks of one criterion with a short reason each.
struct Verdict {
  std::vector<std::string> failures;
  std::string detail;

  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok && failures.size() == 5) failures.push_back("...");
  }
  bool ok() const { return failures.empty(); }
};

int failed_criteria = 0;

template <typename F>
void criterion(int id, const char* title, F&& body) {
  Verdict v;
  const auto t0 = Clock::now();
  try {
    body(v);
  } catch (const std::exception& e) {
    v.failures.push_back(std::string("exception: ") + e.what());
  }
  const double secs = seconds_since(t0);
  std::printf("%s criterion %d: %s (%.1fs)%s%s\n", v.ok() ? "PASS" : "FAIL", id, title, secs,
              v.detail.empty() ? "" : " | ", v.detail.c_str());
  for (const auto& f : v.failures) std::printf("    %s\n", f.c_str());
  std::fflush(stdout);
  if (!v.ok()) ++failed_criteria;
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

void gradient_oracle(Verdict& v) {
  const auto t0 = Clock::now();
  Rng rng(1001);
  const auto cases = gradcases::make(rng, 3);
  double worst = 0.0;
  for (const auto& c : cases) {
    const auto r = oracle::check_gradients(c.net, c.x, c.labels, c.dropout_seed);
    worst = std::max(worst, r.max_rel_error);
    v.expect(r.checked > 0, c.label + ": nothing checked");
    v.expect(r.max_rel_error <= 1e-6, c.label + fmt(": relative error %.3g", r.max_rel_error));
  }
  const double secs = seconds_since(t0);
  v.expect(cases.size() >= 20, "fewer than 20 instances");
  v.expect(secs < 30.0, fmt("took %.1f s", secs));
  v.detail = fmt("%.0f instances, max rel error %.2g", static_cast<double>(cases.size()), worst);
}

void convolution_oracle(Verdict& v) {
  Rng rng(1002);
  double worst = 0.0;
  int strided = 0, padded = 0, trials = 0;
  for (; trials < 200; ++trials) {
    const std::size_t c = testnets::pick(rng, 1, 4), k = testnets::pick(rng, 1, 6);
    const std::size_t kernel = testnets::pick(rng, 1, 5), stride = testnets::pick(rng, 1, 3);
    const std::size_t pad = testnets::pick(rng, 0, 2);
    const std::size_t h = kernel + testnets::pick(rng, 0, 7);
    NetworkSpec spec;
    spec.input = {c, h, h};
    spec.layers = {LayerSpec::conv("conv", k, c, kernel, stride, pad)};
    NetworkD net = NetworkD::initialized(spec, rng);
    for (auto& b : net.params(0).bias.data()) b = rng.normal();
    const TensorD x = rand_normal<double>({testnets::pick(rng, 1, 3), c, h, h}, 0.0, 1.0, rng);
    const TensorD got = apply_layer(net, 0, x);
    const TensorD want = oracle::conv2d(x, net.params(0).weight, net.params(0).bias, stride, pad);
    if (got.shape() != want.shape()) {
      v.expect(false, "shape mismatch");
      continue;
    }
    for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
    strided += stride > 1;
    padded += pad > 0;
  }
  v.expect(worst <= 1e-12, fmt("max abs error %.3g", worst));
  v.expect(strided > 0 && padded > 0, "stride or padding not covered");
  v.detail = fmt("%.0f shapes (%.0f strided, %.0f padded)", trials, strided, padded) + fmt(", max error %.2g", worst);
}

void masked_forward(Verdict& v) {
  Rng rng(1003);
  double worst = 0.0;
  const int triples = 120;
  for (int t = 0; t < triples; ++t) {
    // Every chain has conv->conv, conv->flatten->dense and dense->dense.
    const Network net = testnets::random_network(testnets::random_chain_spec(rng), rng);
    const PruneDecision d = testnets::random_decision(net, rng);
    const Tensor x = testnets::random_input(net, testnets::pick(rng, 1, 4), rng);
    const Network pruned = apply_masks(net, d).first;
    const Tensor got = predict(pruned, x);
    const Tensor want = oracle::masked_forward(net, d, x);
    for (std::size_t i = 0; i < got.size(); ++i)
      worst = std::max(worst, std::abs(static_cast<double>(got[i]) - want[i]));
  }
  v.expect(worst <= 1e-5, fmt("max abs error %.3g", worst));
  v.detail = fmt("%.0f triples, max error %.2g", triples, worst);
}

void selection_oracle(Verdict& v) {
  Rng rng(1004);
  int ties = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = testnets::pick(rng, 1, 12);
    std::vector<double> a(k);
    if (t % 2 == 0) {
      // Small integers give repeated values and exact dyadic-free ties.
      for (auto& x : a) x = static_cast<double>(rng.below(4));
      if (std::all_of(a.begin(), a.end(), [](double x) { return x == 0.0; })) a[0] = 1.0;
    } else {
      for (auto& x : a) x = rng.uniform();
    }
    const LayerProfile p = make_layer_profile("v", a, 1);
    std::vector<double> sorted = p.normalized;
    std::sort(sorted.begin(), sorted.end());
    ties += std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
    std::vector<double> rhos{rng.uniform(0.01, 1.0)};
    if (k > 1) {
      const std::size_t j = rng.below(k - 1);
      rhos.push_back((p.cumsum[j] + p.cumsum[j + 1]) / 2.0);
    }
    for (double rho : rhos) {
      const auto want = oracle::brute_force_select(p.normalized, rho);
      const std::size_t h = threshold_index(p.cumsum, rho);
      v.expect(h == want.h, fmt("vector %.0f: h %.0f vs %.0f", t, h, want.h));
      v.expect(build_mask(p.sort_perm, h, k) == want.mask, fmt("vector %.0f: mask differs", t));
    }
  }
  const LayerProfile ex = make_layer_profile("ex", {0.4, 0.3, 0.2, 0.1}, 1);
  const std::size_t h = threshold_index(ex.cumsum, 0.85);
  const double s = layer_priority(0.85, h, 4);
  v.expect(h == 3, "worked example h != 3");
  v.expect(std::abs(s - 0.6) <= 1e-12, fmt("worked example s = %.17g", s));
  v.detail = fmt("1000 vectors (%.0f with ties), worked example h=%.0f s=%.3g", ties, h, s);
}

void priority_gating(Verdict& v) {
  const std::vector<std::uint8_t> two{1, 1}, three{1, 1, 1};
  v.expect(gate(std::vector<double>{0.5, 1.5}, two).gated == std::vector<std::uint8_t>{1, 0}, "{0.5, 1.5}");
  v.expect(gate(std::vector<double>{0.8, 0.8, 0.8}, three).gated == std::vector<std::uint8_t>{0, 0, 0},
           "equal priorities gated");
  Rng rng(1005);
  int profiles = 0, gated_total = 0;
  for (; profiles < 500; ++profiles) {
    ActivationProfile prof;
    const std::size_t layers = testnets::pick(rng, 1, 6);
    for (std::size_t l = 0; l < layers; ++l) {
      std::vector<double> m(testnets::pick(rng, 1, 24));
      const double skew = rng.uniform(0.5, 6.0);
      for (auto& x : m) x = std::pow(rng.uniform(), skew);
      prof.layers.push_back(make_layer_profile("l" + std::to_string(l), m, 1));
    }
    PruneConfig cfg = PruneConfig::from_budget(rng.uniform(0.01, 0.3));
    Rng r(1);
    const PruneDecision d = decide(prof, cfg, r);
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& l : d.layers)
      if (std::isfinite(l.priority)) mx = std::max(mx, l.priority);
    for (const auto& l : d.layers) {
      if (l.priority == mx) v.expect(!l.gated, fmt("profile %.0f: max-priority layer gated", profiles));
      gated_total += l.gated;
    }
  }
  v.detail = fmt("%.0f random profiles, %.0f gated layers", profiles, gated_total);
}

void accounting(Verdict& v) {
  // Closed form: 13 3x3 convs from the channel table, then three dense layers.
  const std::size_t ch[14] = {3, 64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512, 512};
  std::size_t closed = 0;
  for (int i = 0; i < 13; ++i) closed += ch[i + 1] * (ch[i] * 9 + 1);
  closed += 4096 * (512 * 7 * 7 + 1) + 4096 * (4096 + 1) + 1000 * (4096 + 1);
  const std::size_t counted = count_params(make_vgg16_spec(1000, 224));
  v.expect(closed == 138357544, "closed form disagrees with 138,357,544");
  v.expect(counted == closed, fmt("count_params gives %.0f", static_cast<double>(counted)));

  NetworkSpec first;
  first.input = {3, 64, 64};
  first.layers = {LayerSpec::conv("conv1_1", 64, 3, 3, 1, 1)};
  v.expect(count_flops(first) == 14155776, "first conv at 64x64");
  NetworkSpec strided;
  strided.input = {2, 7, 7};
  strided.layers = {LayerSpec::conv("c", 5, 2, 3, 2, 0), LayerSpec::relu("r"), LayerSpec::flatten("f"),
                    LayerSpec::dense("d", 4, 45), LayerSpec::classifier("o", 3, 4)};
  // conv: 2*5*2*3*3 * 3*3 = 1620; dense: 2*4*45 = 360; head: 2*3*4 = 24.
  v.expect(count_flops(strided) == 1620 + 360 + 24, "strided conv and dense case");
  // conv 3x3 pad 1 on 224: 2*64*3*9*224*224.
  v.expect(count_flops(make_vgg16_spec(1000, 224)) > count_flops(first), "VGG flops");
  std::uint64_t vgg = 0;
  std::size_t hw = 224;
  int conv = 0;
  for (int stage = 0, per[5] = {2, 2, 3, 3, 3}; stage < 5; ++stage) {
    for (int j = 0; j < per[stage]; ++j, ++conv) vgg += 2ull * ch[conv + 1] * ch[conv] * 9 * hw * hw;
    hw /= 2;
  }
  vgg += 2ull * (4096 * 25088 + 4096 * 4096 + 1000 * 4096);
  v.expect(count_flops(make_vgg16_spec(1000, 224)) == vgg, "VGG-16 flops");
  v.detail = fmt("VGG-16 params %.0f, first-conv flops %.0f", static_cast<double>(counted),
                 static_cast<double>(count_flops(first)));
}

void profile_invariants(Verdict& v) {
  Rng rng(1007);
  double worst_sum = 0.0, worst_stream = 0.0, worst_scale = 0.0;
  for (int t = 0; t < 20; ++t) {
    const NetworkSpec spec = testnets::random_chain_spec(rng);
    Network net = testnets::random_network(spec, rng);
    Dataset ds;
    for (std::size_t c = 0; c < spec.layers.back().out_features; ++c) ds.class_names.push_back("c");
    const std::size_t n = testnets::pick(rng, 5, 40);
    for (std::size_t i = 0; i < n; ++i) ds.samples.push_back({rand_normal<float>(spec.input, 0.5, 1.0, rng), 0});
    ds.channel_means.assign(spec.input[0], 0.0f);

    const ActivationProfile prof = collect_profile(net, ds, testnets::pick(rng, 1, 16));
    const auto want = oracle::materialized_means(net, ds);
    for (std::size_t l = 0; l < prof.layers.size(); ++l) {
      const LayerProfile& p = prof.layers[l];
      if (p.dead) continue;
      double total = 0.0;
      for (double x : p.normalized) total += x;
      worst_sum = std::max(worst_sum, std::abs(total - 1.0));
      for (std::size_t i = 1; i < p.cumsum.size(); ++i) v.expect(p.cumsum[i] >= p.cumsum[i - 1], "cumsum decreases");
      v.expect(std::abs(p.cumsum.back() - 1.0) <= 1e-6, "cumsum does not end at 1");
      for (std::size_t k = 0; k < p.width(); ++k) {
        const double err = std::abs(p.mean_activation[k] - want[l][k]) / std::max(1.0, std::abs(want[l][k]));
        worst_stream = std::max(worst_stream, err);
      }
      const double lambda = rng.uniform(0.1, 10.0);
      std::vector<double> scaled = p.mean_activation;
      for (auto& x : scaled) x *= lambda;
      const LayerProfile q = make_layer_profile(p.name, scaled, p.n_samples);
      for (std::size_t k = 0; k < p.width(); ++k)
        worst_scale = std::max(worst_scale, std::abs(q.normalized[k] - p.normalized[k]));
    }

    // Bias-free network: scaling the data by lambda leaves normalized profiles
    // unchanged.
    for (std::size_t i = 0; i < net.size(); ++i)
      if (net.layer(i).parameterized())
        for (auto& b : net.params(i).bias.data()) b = 0.0f;
    const double lambda = rng.uniform(0.1, 10.0);
    Dataset scaled = ds;
    for (auto& s : scaled.samples)
      for (auto& x : s.image.data()) x *= static_cast<float>(lambda);
    const ActivationProfile a = collect_profile(net, ds), b = collect_profile(net, scaled);
    for (std::size_t l = 0; l < a.layers.size(); ++l)
      for (std::size_t k = 0; k < a.layers[l].width(); ++k)
        worst_scale = std::max(worst_scale, std::abs(a.layers[l].normalized[k] - b.layers[l].normalized[k]));
  }
  v.expect(worst_sum <= 1e-6, fmt("normalized sum off by %.3g", worst_sum));
  v.expect(worst_stream <= 1e-5, fmt("streaming vs materialized %.3g", worst_stream));
  v.expect(worst_scale <= 1e-6, fmt("scale invariance off by %.3g", worst_scale));
  v.detail = fmt("sum err %.2g, stream err %.2g, scale err %.2g", worst_sum, worst_stream, worst_scale);
}

struct DeskRun {
  fixtures::Splits data;
  AdaptConfig cfg;
  Network init;
};

DeskRun desk_setup() {
  DeskRun d;
  d.data = fixtures::synthetic(2024, 3, 120, 40, 0.3);
  d.cfg.iterations = 5;
  d.cfg.prune = PruneConfig::from_budget(0.10);
  d.cfg.train = fixtures::quick_train(2024, 30);
  Rng rng(2024);
  d.init = Network::initialized(make_tiny_cnn_spec(3, 32, {8, 16}, 64), rng);
  return d;
}

void desk_run(Verdict& v) {
  const DeskRun d = desk_setup();
  AdaptOptions opts;
  opts.deterministic = true;
  const AdaptOutcome a = run(d.init, d.data.train, d.data.val, d.cfg, opts);
  const AdaptOutcome b = run(d.init, d.data.train, d.data.val, d.cfg, opts);
  const auto& rows = a.report.rows;
  const double step0 = rows[0].val_accuracy;
  v.expect(step0 >= 0.90, fmt("step 0 val accuracy %.4f", step0));
  v.expect(rows.size() == 6, fmt("%.0f rows", static_cast<double>(rows.size())));
  const double reduction = 1.0 - static_cast<double>(rows.back().params) / static_cast<double>(rows[0].params);
  v.expect(reduction >= 0.25, fmt("params reduced by %.3f", reduction));
  double best_pruned = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    best_pruned = std::max(best_pruned, rows[i].val_accuracy);
    v.expect(rows[i].params <= rows[i - 1].params, fmt("params grew at iteration %.0f", i));
  }
  const double best = rows[static_cast<std::size_t>(a.report.best_iteration)].val_accuracy;
  v.expect(best >= step0 - 0.02, fmt("best val %.4f vs step 0 %.4f", best, step0));
  v.expect(best_pruned >= step0 - 0.02, fmt("best pruned val %.4f vs step 0 %.4f", best_pruned, step0));
  const std::string ja = report_to_json(a.report).dump(2), jb = report_to_json(b.report).dump(2);
  v.expect(ja == jb, "reports differ between identical runs");

  std::string trail;
  for (const auto& r : rows) trail += (trail.empty() ? "" : "->") + std::to_string(r.params);
  v.detail = fmt("step0 %.3f, best pruned %.3f, params -%.1f%%", step0, best_pruned, 100.0 * reduction) + " (" +
             trail + ")";
}

std::vector<std::size_t> kept_counts(const PruneDecision& d) {
  std::vector<std::size_t> k;
  for (const auto& l : d.layers) k.push_back(l.kept());
  return k;
}

void ablation(Verdict& v) {
  const DeskRun d = desk_setup();
  AdaptConfig cfg = d.cfg;
  cfg.train.max_epochs = 15;
  AdaptOptions opts;
  opts.deterministic = true;
  const Step0 start = run_step0(d.init, d.data.train, d.data.val, cfg, opts);

  const AblationResult matched = run_ablation(start, d.data.train, d.data.val, cfg, AblationMode::count_matched, opts);
  const auto& nwa = matched.runs.at(0).outcome.report;
  const auto& rnd = matched.runs.at(1).outcome.report;
  v.expect(nwa.decisions.size() == rnd.decisions.size(), "iteration counts differ");
  for (std::size_t i = 0; i < std::min(nwa.decisions.size(), rnd.decisions.size()); ++i)
    v.expect(kept_counts(nwa.decisions[i]) == kept_counts(rnd.decisions[i]),
             fmt("kept counts differ at iteration %.0f", i + 1));

  const AblationResult uni =
      run_ablation(start, d.data.train, d.data.val, cfg, AblationMode::uniform_random_vs_least, opts);
  double least = -1.0, random = -1.0;
  for (const auto& [s, m] : uni.mean_val_accuracy) {
    if (s == Strategy::uniform_least_activated) least = m;
    if (s == Strategy::uniform_random) random = m;
  }
  int seeds_least = 0, seeds_random = 0;
  for (const auto& r : uni.runs) (r.strategy == Strategy::uniform_least_activated ? seeds_least : seeds_random)++;
  v.expect(seeds_least == 5 && seeds_random == 5, "expected 5 seeds per strategy");
  v.expect(least >= 0.0 && random >= 0.0, "missing strategy means");
  v.expect(least >= random - 0.01, fmt("least-activated %.4f vs random %.4f", least, random));
  v.detail = fmt("%.0f paired iterations; mean val least %.4f vs random %.4f",
                 static_cast<double>(nwa.decisions.size()), least, random);
}

void round_trips(Verdict& v) {
  oracle::TempDir dir("accept");
  const std::string data = dir.str("data"), ft = dir.str("ft");
  v.expect(run_cli({"synth", "--out", data, "--seed", "9", "--per-class", "6", "--test-per-class", "0", "--hw", "16",
                    "--deterministic"}) == 0,
           "synth failed");
  v.expect(run_cli({"finetune", "--data", data, "--out", ft, "--seed", "9", "--epochs", "1", "--widths", "4,8",
                    "--fc-width", "8", "--deterministic"}) == 0,
           "finetune failed");
  const std::string model = ft + "/model.nwad";
  const std::string bytes = read_file(model);
  const ModelFile mf = load_model(model);
  save_model(dir.path / "again.nwad", mf.net, mf.metadata);
  v.expect(read_file(dir.str("again.nwad")) == bytes, "NWAD save-load-save differs");

  int tensors = 0;
  for (const auto& entry : fs::directory_iterator(fs::path(data) / "images")) {
    const std::string raw = read_file(entry.path().string());
    save_tensor(dir.path / "t.tnsr", load_tensor(entry.path()));
    v.expect(read_file(dir.str("t.tnsr")) == raw, "TNSR save-load-save differs");
    ++tensors;
  }

  auto kind_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return std::string(to_string(e.kind()));
    }
    return std::string("none");
  };
  auto mutated = [&](const std::string& src, std::size_t pos, char c, const std::string& name) {
    std::string b = read_file(src);
    b[pos] = c;
    write_file(dir.str(name), b);
    return dir.str(name);
  };
  const std::string some_tensor = fs::directory_iterator(fs::path(data) / "images")->path().string();
  v.expect(kind_of([&] { load_model(mutated(model, 0, 'X', "m1.nwad")); }) == "format", "NWAD magic");
  v.expect(kind_of([&] { load_model(mutated(model, 11, '\x7f', "m2.nwad")); }) == "format", "NWAD header length");
  v.expect(kind_of([&] { load_tensor(mutated(some_tensor, 1, 'Q', "t1.tnsr")); }) == "format", "TNSR magic");
  v.expect(kind_of([&] { load_tensor(mutated(some_tensor, 15, '\x40', "t2.tnsr")); }) == "format", "TNSR extent");
  write_file(dir.str("short.nwad"), bytes.substr(0, bytes.size() / 2));
  v.expect(kind_of([&] { load_model(dir.str("short.nwad")); }) == "format", "truncated NWAD");
  v.expect(kind_of([&] { load_model(dir.str("absent.nwad")); }) == "io", "missing file");
  v.detail = fmt("1 model and %.0f tensors byte-identical; corruption classified", tensors);
}

}  // namespace

int main() {
  criterion(1, "gradient oracle", gradient_oracle);
  criterion(2, "convolution oracle", convolution_oracle);
  criterion(3, "masked-forward equivalence", masked_forward);
  criterion(4, "selection oracle", selection_oracle);
  criterion(5, "priority gating", priority_gating);
  criterion(6, "parameter and FLOP accounting", accounting);
  criterion(7, "activation profile invariants", profile_invariants);
  criterion(8, "end-to-end desk run", desk_run);
  criterion(9, "ablation harness", ablation);
  criterion(10, "format round trips", round_trips);
  std::printf("%d of 10 criteria failed\n", failed_criteria);
  return failed_criteria == 0 ? 0 : 1;
}
