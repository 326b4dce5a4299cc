#include "nwadapt/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nwadapt {

const LayerProfile* ActivationProfile::find(std::string_view name) const {
  for (const auto& l : layers) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

std::vector<double> channel_mean(const Tensor& activation) {
  if (activation.rank() != 1 && activation.rank() != 3) {
    fail(ErrorKind::invalid_shape, "channel_mean expects [K] or [K, H, W], got " + shape_string(activation.shape()));
  }
  const std::size_t channels = activation.extent(0);
  const std::size_t plane = activation.size() / channels;
  std::vector<double> means(channels);
  for (std::size_t k = 0; k < channels; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += activation[k * plane + i];
    means[k] = acc / static_cast<double>(plane);
  }
  return means;
}

LayerProfile make_layer_profile(std::string name, std::vector<double> mean_activation, std::size_t n_samples) {
  LayerProfile p;
  p.name = std::move(name);
  p.n_samples = n_samples;
  const std::size_t k = mean_activation.size();
  p.mean_activation = std::move(mean_activation);
  double l1 = 0.0;
  for (double v : p.mean_activation) l1 += std::abs(v);
  p.dead = l1 == 0.0;
  p.normalized.assign(k, 0.0);
  if (!p.dead) {
    for (std::size_t i = 0; i < k; ++i) p.normalized[i] = p.mean_activation[i] / l1;
  }
  p.sort_perm.resize(k);
  std::iota(p.sort_perm.begin(), p.sort_perm.end(), 0);
  std::stable_sort(p.sort_perm.begin(), p.sort_perm.end(),
                   [&](std::size_t a, std::size_t b) { return p.normalized[a] > p.normalized[b]; });
  p.cumsum.resize(k);
  double running = 0.0;
  for (std::size_t i = 0; i < k; ++i) p.cumsum[i] = running += p.normalized[p.sort_perm[i]];
  return p;
}

std::vector<MeasurementPoint> measurement_points(const Network& net) {
  std::vector<MeasurementPoint> points;
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (!net.layer(i).prunable()) continue;
    const bool relu_next = i + 1 < net.size() && net.layer(i + 1).kind == LayerKind::relu;
    points.push_back({i, relu_next ? i + 1 : i});
  }
  return points;
}

ActivationProfile collect_profile(const Network& net, const Dataset& dataset, std::size_t batch_size) {
  if (dataset.empty()) fail(ErrorKind::data, "cannot collect activation statistics on an empty dataset");
  if (batch_size == 0) fail(ErrorKind::invalid_argument, "batch_size must be positive");
  const auto points = measurement_points(net);
  ActivationProfile profile;
  profile.n_samples = dataset.size();
  if (points.empty()) return profile;
  const std::size_t last = points.back().measured;

  std::vector<std::vector<double>> sums(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) sums[p].assign(net.layer(points[p].layer).width(), 0.0);

  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    const std::size_t end = std::min(dataset.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    Tensor cur = make_batch(dataset, idx, net.input_shape());
    std::size_t next_point = 0;
    for (std::size_t li = 0; li <= last; ++li) {
      cur = apply_layer(net, li, cur);
      while (next_point < points.size() && points[next_point].measured == li) {
        auto& acc = sums[next_point];
        const std::size_t per = cur.size() / cur.extent(0);
        const std::size_t plane = per / acc.size();
        for (std::size_t n = 0; n < idx.size(); ++n) {
          const float* base = cur.raw() + n * per;
          for (std::size_t k = 0; k < acc.size(); ++k) {
            double channel = 0.0;
            for (std::size_t i = 0; i < plane; ++i) channel += base[k * plane + i];
            acc[k] += channel / static_cast<double>(plane);
          }
        }
        ++next_point;
      }
    }
  }
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (auto& v : sums[p]) v /= static_cast<double>(dataset.size());
    profile.layers.push_back(make_layer_profile(net.layer(points[p].layer).name, std::move(sums[p]), dataset.size()));
  }
  return profile;
}

Json profile_to_json(const ActivationProfile& profile) {
  auto rounded = [](const std::vector<double>& v) {
    Json arr = Json::array();
    for (double x : v) arr.push_back(round_significant(x));
    return arr;
  };
  Json j = Json::object();
  for (const auto& l : profile.layers) {
    j[l.name] = Json{{"n_samples", l.n_samples},
                     {"mean_activation", rounded(l.mean_activation)},
                     {"normalized", rounded(l.normalized)},
                     {"sort_perm", l.sort_perm},
                     {"cumsum", rounded(l.cumsum)}};
  }
  return j;
}

std::string profile_fingerprint(const ActivationProfile& profile) {
  return hex64(fnv1a64(profile_to_json(profile).dump()));
}

}  // namespace nwadapt
