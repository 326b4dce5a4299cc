#include <cmath>

#include "doctest.h"
#include "expect.hpp"
#include "fixtures.hpp"
#include "nets.hpp"
#include "nwadapt/train.hpp"
#include "oracles.hpp"

using namespace nwadapt;

TEST_SUITE("train") {
  TEST_CASE("cross-entropy matches the oracle and its gradient") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = testnets::pick(rng, 1, 5), f = testnets::pick(rng, 2, 6);
      const TensorD logits = rand_normal<double>({n, f}, 0.0, 3.0, rng);
      std::vector<int> labels;
      for (std::size_t i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng.below(f)));
      const auto r = cross_entropy_loss(logits, labels);
      CHECK(r.loss == doctest::Approx(oracle::cross_entropy(logits, labels)).epsilon(1e-12));
      for (std::size_t k = 0; k < logits.size(); ++k) {
        TensorD up = logits, down = logits;
        up[k] += 1e-6;
        down[k] -= 1e-6;
        const double fd = (oracle::cross_entropy(up, labels) - oracle::cross_entropy(down, labels)) / 2e-6;
        CHECK(r.dlogits[k] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
      }
    }
  }

  TEST_CASE("cross-entropy is stable for large logits") {
    const Tensor logits({1, 3}, {1000.0f, 0.0f, -1000.0f});
    const std::vector<int> labels{0};
    const auto r = cross_entropy_loss(logits, labels);
    CHECK(r.loss == doctest::Approx(0.0));
    CHECK(std::isfinite(r.loss));
  }

  TEST_CASE("labels outside the class range are rejected") {
    const Tensor logits({2, 3});
    const std::vector<int> high{0, 3}, negative{-1, 0}, short_list{0};
    CHECK(error_kind([&] { cross_entropy_loss(logits, high); }) == ErrorKind::invalid_label);
    CHECK(error_kind([&] { cross_entropy_loss(logits, negative); }) == ErrorKind::invalid_label);
    CHECK(error_kind([&] { cross_entropy_loss(logits, short_list); }) == ErrorKind::shape_mismatch);
  }

  TEST_CASE("sgd step decays weights but not biases") {
    Rng rng(4);
    NetworkD net = NetworkD::initialized(make_tiny_cnn_spec(2, 8, {2, 3}, 4, 0.0), rng);
    for (std::size_t i = 0; i < net.size(); ++i)
      if (net.layer(i).parameterized())
        for (auto& b : net.params(i).bias.data()) b = rng.normal();
    const NetworkD before = net;
    Gradients<double> g;
    for (std::size_t i = 0; i < net.size(); ++i) {
      LayerParams<double> p;
      if (net.layer(i).parameterized()) {
        p.weight = rand_normal<double>(net.params(i).weight.shape(), 0.0, 1.0, rng);
        p.bias = rand_normal<double>(net.params(i).bias.shape(), 0.0, 1.0, rng);
      }
      g.params.push_back(p);
    }
    const double lr = 0.1, wd = 0.01;
    sgd_step(net, g, lr, wd);
    for (std::size_t i = 0; i < net.size(); ++i) {
      if (!net.layer(i).parameterized()) continue;
      const auto& w0 = before.params(i).weight;
      const auto& b0 = before.params(i).bias;
      for (std::size_t k = 0; k < w0.size(); ++k)
        CHECK(net.params(i).weight[k] == doctest::Approx(w0[k] - lr * (g.params[i].weight[k] + wd * w0[k])));
      for (std::size_t k = 0; k < b0.size(); ++k)
        CHECK(net.params(i).bias[k] == doctest::Approx(b0[k] - lr * g.params[i].bias[k]));
    }
    g.params.pop_back();
    CHECK(error_kind([&] { sgd_step(net, g, lr, wd); }) == ErrorKind::shape_mismatch);
  }

  TEST_CASE("train config json round trip and rejection") {
    TrainConfig cfg;
    cfg.batch_size = 7;
    cfg.lr_initial = 0.5;
    cfg.seed = 99;
    const Json j = train_config_to_json(cfg);
    CHECK(train_config_to_json(train_config_from_json(j)) == j);
    CHECK(error_kind([] { train_config_from_json(Json{{"momentum", 0.9}}); }) == ErrorKind::usage);
    CHECK(error_kind([] { train_config_from_json(Json{{"batch_size", "big"}}); }) == ErrorKind::usage);
    CHECK(error_kind([] { train_config_from_json(Json{{"lr_drop_factor", 1.0}}); }) == ErrorKind::usage);
    CHECK(error_kind([] { train_config_from_json(Json::array()); }) == ErrorKind::usage);
    TrainConfig bad;
    bad.dropout = 1.0;
    CHECK(error_kind([&] { bad.validate(); }) == ErrorKind::invalid_argument);
    bad = {};
    bad.batch_size = 0;
    CHECK(error_kind([&] { bad.validate(); }) == ErrorKind::invalid_argument);
  }

  TEST_CASE("evaluate counts argmax hits") {
    const auto data = fixtures::synthetic(5, 3, 8, 16);
    Rng rng(5);
    const Network net = Network::initialized(make_tiny_cnn_spec(3, 12, {4, 4}, 8), rng);
    const Evaluation e = evaluate(net, data.val, 5);
    std::size_t hits = 0;
    double loss = 0.0;
    for (std::size_t i = 0; i < data.val.size(); ++i) {
      const std::vector<std::size_t> idx{i};
      const Tensor logits = predict(net, make_batch(data.val, idx, net.input_shape()));
      const auto v = logits.values();
      const auto best = std::max_element(v.begin(), v.end()) - v.begin();
      hits += best == data.val.samples[i].label;
      loss += oracle::cross_entropy(logits.cast<double>(), {data.val.samples[i].label});
    }
    CHECK(e.samples == data.val.size());
    CHECK(e.accuracy == doctest::Approx(static_cast<double>(hits) / data.val.size()));
    CHECK(e.loss == doctest::Approx(loss / data.val.size()).epsilon(1e-5));
  }

  TEST_CASE("zero epochs reports the initial accuracy and leaves the network alone") {
    const auto data = fixtures::synthetic(6, 3, 8, 16);
    Rng rng(6);
    Network net = Network::initialized(make_tiny_cnn_spec(3, 12, {4, 4}, 8), rng);
    const Network before = net;
    TrainConfig cfg = fixtures::quick_train(1, 0);
    const FitResult r = fit(net, data.train, data.val, cfg);
    CHECK(r.best_epoch == -1);
    CHECK(r.history.empty());
    CHECK(r.best_val_accuracy == evaluate(before, data.val).accuracy);
    CHECK(net.all_params() == before.all_params());
  }

  TEST_CASE("fit learns the synthetic task and is reproducible") {
    const auto data = fixtures::synthetic(7, 3, 60, 40);
    Rng rng(7);
    const Network init = Network::initialized(make_tiny_cnn_spec(3, 32, {8, 16}, 64), rng);
    Network a = init, b = init;
    const TrainConfig cfg = fixtures::quick_train(11, 15);
    const FitResult ra = fit(a, data.train, data.val, cfg);
    const FitResult rb = fit(b, data.train, data.val, cfg);
    CHECK(ra.best_val_accuracy >= 0.8);
    CHECK(a.all_params() == b.all_params());
    CHECK(fit_result_to_json(ra) == fit_result_to_json(rb));
    REQUIRE(ra.best_epoch >= 0);
    CHECK(ra.best_val_accuracy == ra.history[static_cast<std::size_t>(ra.best_epoch)].val_accuracy);
    for (std::size_t e = 0; e < static_cast<std::size_t>(ra.best_epoch); ++e)
      CHECK(ra.history[e].val_accuracy < ra.best_val_accuracy);
    CHECK(evaluate(a, data.val).accuracy == ra.best_val_accuracy);
  }

  TEST_CASE("plateaus drop the learning rate and end training") {
    const auto data = fixtures::synthetic(8, 3, 8, 16);
    Rng rng(8);
    Network net = Network::initialized(make_tiny_cnn_spec(3, 12, {4, 4}, 8), rng);
    TrainConfig cfg = fixtures::quick_train(2, 30);
    // Updates below float resolution leave the validation loss frozen.
    cfg.lr_initial = 1e-30;
    cfg.weight_decay = 0.0;
    cfg.lr_plateau_patience = 1;
    cfg.early_stop_patience = 3;
    const FitResult r = fit(net, data.train, data.val, cfg);
    REQUIRE(r.history.size() == 4);
    CHECK(r.history[0].lr == 1e-30);
    CHECK(r.history[1].lr == 1e-30);
    CHECK(r.history[2].lr == doctest::Approx(1e-31).epsilon(1e-9));
    CHECK(r.history[3].lr == doctest::Approx(1e-32).epsilon(1e-9));
    CHECK(r.best_epoch == 0);
  }

  TEST_CASE("a huge learning rate raises a divergence error") {
    const auto data = fixtures::synthetic(9, 3, 8, 16);
    Rng rng(9);
    Network net = Network::initialized(make_tiny_cnn_spec(3, 12, {4, 4}, 8), rng);
    TrainConfig cfg = fixtures::quick_train(3, 5);
    cfg.lr_initial = 1e30;
    try {
      fit(net, data.train, data.val, cfg);
      FAIL("no divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.kind() == ErrorKind::divergence);
      CHECK(e.epoch() >= 0);
    }
  }

  TEST_CASE("fit rejects mismatched heads and empty sets") {
    const auto data = fixtures::synthetic(10, 3, 4, 16);
    Rng rng(10);
    Network net = Network::initialized(make_tiny_cnn_spec(4, 12, {4, 4}, 8), rng);
    CHECK(error_kind([&] { fit(net, data.train, data.val, fixtures::quick_train(1, 1)); }) == ErrorKind::data);
    Network ok = Network::initialized(make_tiny_cnn_spec(3, 12, {4, 4}, 8), rng);
    CHECK(error_kind([&] { fit(ok, data.train, Dataset{}, fixtures::quick_train(1, 1)); }) == ErrorKind::data);
  }
}
