#include "nwadapt/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include "nwadapt/tensor_io.hpp"

namespace nwadapt {

namespace fs = std::filesystem;

namespace {

// Bilinear sample at (y, x) in pixel-center coordinates; out-of-range
// neighbours contribute zero.
float sample_bilinear(const Tensor& img, std::size_t c, double y, double x) {
  const auto height = static_cast<std::ptrdiff_t>(img.extent(1));
  const auto width = static_cast<std::ptrdiff_t>(img.extent(2));
  const double fy = std::floor(y), fx = std::floor(x);
  const auto y0 = static_cast<std::ptrdiff_t>(fy), x0 = static_cast<std::ptrdiff_t>(fx);
  const double wy = y - fy, wx = x - fx;
  auto px = [&](std::ptrdiff_t yy, std::ptrdiff_t xx) -> double {
    if (yy < 0 || xx < 0 || yy >= height || xx >= width) return 0.0;
    return img[(c * static_cast<std::size_t>(height) + static_cast<std::size_t>(yy)) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(xx)];
  };
  double v = (1 - wy) * (1 - wx) * px(y0, x0);
  if (wx != 0.0) v += (1 - wy) * wx * px(y0, x0 + 1);
  if (wy != 0.0) v += wy * (1 - wx) * px(y0 + 1, x0);
  if (wx != 0.0 && wy != 0.0) v += wy * wx * px(y0 + 1, x0 + 1);
  return static_cast<float>(v);
}

// Plain bilinear resize (edge-clamped, pixel-center aligned).
Tensor resize_bilinear(const Tensor& img, std::size_t out_h, std::size_t out_w) {
  const std::size_t channels = img.extent(0), height = img.extent(1), width = img.extent(2);
  if (out_h == height && out_w == width) return img;
  Tensor out(Shape{channels, out_h, out_w});
  const double sy = static_cast<double>(height) / static_cast<double>(out_h);
  const double sx = static_cast<double>(width) / static_cast<double>(out_w);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < out_h; ++i) {
      const double y = std::clamp((static_cast<double>(i) + 0.5) * sy - 0.5, 0.0, static_cast<double>(height - 1));
      const auto y0 = static_cast<std::size_t>(y);
      const std::size_t y1 = std::min(y0 + 1, height - 1);
      const double wy = y - static_cast<double>(y0);
      for (std::size_t j = 0; j < out_w; ++j) {
        const double x = std::clamp((static_cast<double>(j) + 0.5) * sx - 0.5, 0.0, static_cast<double>(width - 1));
        const auto x0 = static_cast<std::size_t>(x);
        const std::size_t x1 = std::min(x0 + 1, width - 1);
        const double wx = x - static_cast<double>(x0);
        auto at = [&](std::size_t yy, std::size_t xx) -> double { return img[(c * height + yy) * width + xx]; };
        const double v = (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x1)) +
                         wy * ((1 - wx) * at(y1, x0) + wx * at(y1, x1));
        out[(c * out_h + i) * out_w + j] = static_cast<float>(v);
      }
    }
  }
  return out;
}

void require_image(const Tensor& image, const char* what) {
  if (image.rank() != 3) fail(ErrorKind::invalid_shape, std::string(what) + ": expected a C x H x W image");
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  fail(ErrorKind::data, "unknown split '" + std::string(name) + "'");
}

const Shape& Dataset::image_shape() const {
  if (samples.empty()) fail(ErrorKind::data, "empty dataset has no image shape");
  return samples.front().image.shape();
}

void Dataset::validate() const {
  if (samples.empty()) return;
  const Shape& shape = image_shape();
  if (shape.size() != 3) fail(ErrorKind::data, "images must be C x H x W");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= class_names.size()) {
      fail(ErrorKind::data, "sample " + std::to_string(i) + " has label " + std::to_string(s.label) +
                                " outside [0, " + std::to_string(class_names.size()) + ")");
    }
    if (s.image.shape() != shape) {
      fail(ErrorKind::data, "sample " + std::to_string(i) + " has shape " + shape_string(s.image.shape()) +
                                ", expected " + shape_string(shape));
    }
  }
  if (!channel_means.empty() && channel_means.size() != shape[0]) {
    fail(ErrorKind::data, "channel_means length does not match image channels");
  }
}

void AugmentConfig::validate() const {
  if (jitter_px < 0) fail(ErrorKind::invalid_argument, "jitter_px must be non-negative");
  if (!(scale_range.first > 0.0 && scale_range.second >= scale_range.first)) {
    fail(ErrorKind::invalid_argument, "scale_range must be positive and ordered");
  }
  if (!(rotation_deg >= 0.0)) fail(ErrorKind::invalid_argument, "rotation_deg must be non-negative");
}

Json augment_config_to_json(const AugmentConfig& cfg) {
  return Json{{"jitter_px", cfg.jitter_px},
              {"scale_range", {cfg.scale_range.first, cfg.scale_range.second}},
              {"rotation_deg", cfg.rotation_deg},
              {"enabled", cfg.enabled}};
}

AugmentConfig augment_config_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorKind::usage, "augment config must be a JSON object");
  AugmentConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "jitter_px") {
      cfg.jitter_px = value.get<int>();
    } else if (key == "scale_range") {
      const auto r = value.get<std::vector<double>>();
      if (r.size() != 2) fail(ErrorKind::usage, "scale_range needs two values");
      cfg.scale_range = {r[0], r[1]};
    } else if (key == "rotation_deg") {
      cfg.rotation_deg = value.get<double>();
    } else if (key == "enabled") {
      cfg.enabled = value.get<bool>();
    } else {
      fail(ErrorKind::usage, "unknown augment config key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

Tensor resize_with_aspect_pad(const Tensor& image, std::size_t target) {
  require_image(image, "resize_with_aspect_pad");
  if (target == 0) fail(ErrorKind::invalid_argument, "resize target must be positive");
  const std::size_t channels = image.extent(0), height = image.extent(1), width = image.extent(2);
  const std::size_t longest = std::max(height, width);
  auto scaled = [&](std::size_t extent) {
    const auto v = static_cast<std::size_t>(
        std::llround(static_cast<double>(extent) * static_cast<double>(target) / static_cast<double>(longest)));
    return std::clamp<std::size_t>(v, 1, target);
  };
  const std::size_t content_h = height >= width ? target : scaled(height);
  const std::size_t content_w = width >= height ? target : scaled(width);
  const Tensor content = resize_bilinear(image, content_h, content_w);
  if (content_h == target && content_w == target) return content;
  Tensor out(Shape{channels, target, target});
  const std::size_t top = (target - content_h) / 2, left = (target - content_w) / 2;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < content_h; ++i) {
      for (std::size_t j = 0; j < content_w; ++j) {
        out[(c * target + top + i) * target + left + j] = content[(c * content_h + i) * content_w + j];
      }
    }
  }
  return out;
}

Tensor augment(const Tensor& image, const AugmentConfig& cfg, Rng& rng) {
  require_image(image, "augment");
  if (!cfg.enabled) return image;
  cfg.validate();
  const auto jitter = static_cast<std::uint64_t>(cfg.jitter_px);
  const double ty = static_cast<double>(rng.below(2 * jitter + 1)) - static_cast<double>(jitter);
  const double tx = static_cast<double>(rng.below(2 * jitter + 1)) - static_cast<double>(jitter);
  const double s = rng.uniform(cfg.scale_range.first, cfg.scale_range.second);
  const double theta = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg) * std::numbers::pi / 180.0;
  if (ty == 0.0 && tx == 0.0 && s == 1.0 && theta == 0.0) return image;

  const std::size_t channels = image.extent(0), height = image.extent(1), width = image.extent(2);
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  Tensor out(image.shape());
  // Inverse map: source = center + R(-theta) (p - center - t) / s.
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      const double dy = static_cast<double>(i) - cy - ty;
      const double dx = static_cast<double>(j) - cx - tx;
      const double sy = cy + (cos_t * dy - sin_t * dx) / s;
      const double sx = cx + (sin_t * dy + cos_t * dx) / s;
      for (std::size_t c = 0; c < channels; ++c) out[(c * height + i) * width + j] = sample_bilinear(image, c, sy, sx);
    }
  }
  return out;
}

Tensor horizontal_flip(const Tensor& image) {
  require_image(image, "horizontal_flip");
  const std::size_t channels = image.extent(0), height = image.extent(1), width = image.extent(2);
  Tensor out(image.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < height; ++i) {
      for (std::size_t j = 0; j < width; ++j) {
        out[(c * height + i) * width + j] = image[(c * height + i) * width + (width - 1 - j)];
      }
    }
  }
  return out;
}

Tensor crop(const Tensor& image, std::size_t top, std::size_t left, std::size_t height, std::size_t width) {
  require_image(image, "crop");
  if (top + height > image.extent(1) || left + width > image.extent(2)) {
    fail(ErrorKind::invalid_argument, "crop window exceeds image " + shape_string(image.shape()));
  }
  const std::size_t channels = image.extent(0), src_w = image.extent(2), src_h = image.extent(1);
  Tensor out(Shape{channels, height, width});
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < height; ++i) {
      const float* src = image.raw() + (c * src_h + top + i) * src_w + left;
      std::copy(src, src + width, out.raw() + (c * height + i) * width);
    }
  }
  return out;
}

Tensor subtract_channel_means(const Tensor& image, std::span<const float> means) {
  require_image(image, "subtract_channel_means");
  if (means.empty()) return image;
  if (means.size() != image.extent(0)) fail(ErrorKind::shape_mismatch, "channel mean count mismatch");
  Tensor out = image;
  const std::size_t plane = image.extent(1) * image.extent(2);
  for (std::size_t c = 0; c < means.size(); ++c) {
    for (std::size_t k = 0; k < plane; ++k) out[c * plane + k] -= means[c];
  }
  return out;
}

std::vector<double> softmax(std::span<const float> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double m = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) total += p[i] = std::exp(static_cast<double>(logits[i]) - m);
  for (auto& v : p) v /= total;
  return p;
}

std::vector<double> ten_crop_predict(const Network& net, const Tensor& image, std::size_t crop_extent) {
  require_image(image, "ten_crop_predict");
  const std::size_t channels = image.extent(0), height = image.extent(1), width = image.extent(2);
  if (crop_extent == 0 || crop_extent > height || crop_extent > width) {
    fail(ErrorKind::invalid_argument, "crop extent " + std::to_string(crop_extent) + " does not fit image " +
                                          shape_string(image.shape()));
  }
  const std::size_t bottom = height - crop_extent, right = width - crop_extent;
  const std::array<std::pair<std::size_t, std::size_t>, 5> origins{
      {{0, 0}, {0, right}, {bottom, 0}, {bottom, right}, {bottom / 2, right / 2}}};
  const std::size_t per = channels * crop_extent * crop_extent;
  Tensor batch(Shape{10, channels, crop_extent, crop_extent});
  for (std::size_t k = 0; k < origins.size(); ++k) {
    const Tensor view = crop(image, origins[k].first, origins[k].second, crop_extent, crop_extent);
    const Tensor mirrored = horizontal_flip(view);
    std::copy(view.data().begin(), view.data().end(), batch.raw() + k * per);
    std::copy(mirrored.data().begin(), mirrored.data().end(), batch.raw() + (k + 5) * per);
  }
  const Tensor logits = predict(net, batch);
  const std::size_t classes = logits.extent(1);
  std::vector<double> mean(classes, 0.0);
  for (std::size_t k = 0; k < 10; ++k) {
    const auto p = softmax(logits.data().subspan(k * classes, classes));
    for (std::size_t c = 0; c < classes; ++c) mean[c] += p[c];
  }
  for (auto& v : mean) v /= 10.0;
  return mean;
}

namespace {

using ShapeMask = bool (*)(double dy, double dx, double r);

// Shape membership tests in coordinates relative to the shape center,
// normalized so the shape roughly fills a disk of radius r.
bool in_rectangle(double dy, double dx, double r) { return std::abs(dy) <= 0.6 * r && std::abs(dx) <= r; }
bool in_disk(double dy, double dx, double r) { return dy * dy + dx * dx <= r * r; }
bool in_triangle(double dy, double dx, double r) {
  // Apex up, base at dy = +r.
  if (dy < -r || dy > r) return false;
  return std::abs(dx) <= (dy + r) / 2.0;
}
bool in_cross(double dy, double dx, double r) {
  const double arm = 0.3 * r;
  return (std::abs(dy) <= arm && std::abs(dx) <= r) || (std::abs(dx) <= arm && std::abs(dy) <= r);
}
bool in_ring(double dy, double dx, double r) {
  const double d2 = dy * dy + dx * dx;
  return d2 <= r * r && d2 >= 0.45 * r * r;
}
bool in_stripes(double dy, double dx, double r) {
  if (std::abs(dy) > r || std::abs(dx) > r) return false;
  return static_cast<int>(std::floor((dy + r) / (r / 2.5))) % 2 == 0;
}
bool in_checker(double dy, double dx, double r) {
  if (std::abs(dy) > r || std::abs(dx) > r) return false;
  const int a = static_cast<int>(std::floor((dy + r) / (r / 2.0)));
  const int b = static_cast<int>(std::floor((dx + r) / (r / 2.0)));
  return (a + b) % 2 == 0;
}
bool in_dot_grid(double dy, double dx, double r) {
  if (std::abs(dy) > r || std::abs(dx) > r) return false;
  const double pitch = 2.0 * r / 3.0;
  const double oy = std::fmod(dy + r, pitch) - pitch / 2.0;
  const double ox = std::fmod(dx + r, pitch) - pitch / 2.0;
  return oy * oy + ox * ox <= (0.3 * pitch) * (0.3 * pitch);
}

constexpr std::array<ShapeMask, 8> kShapes{in_rectangle, in_disk,     in_triangle, in_cross,
                                           in_ring,      in_stripes, in_checker,  in_dot_grid};
constexpr std::array<const char*, 8> kShapeNames{"rectangle", "disk",    "triangle", "cross",
                                                 "ring",      "stripes", "checker",  "dot_grid"};

}  // namespace

Dataset generate_synthetic(std::size_t classes, std::size_t per_class, std::size_t hw, Rng& rng,
                           std::size_t channels) {
  if (classes < 2 || classes > kShapes.size()) {
    fail(ErrorKind::invalid_argument, "synthetic class count must lie in [2, 8], got " + std::to_string(classes));
  }
  if (per_class < 2) fail(ErrorKind::invalid_argument, "per_class must be at least 2");
  if (hw < 8) fail(ErrorKind::invalid_argument, "synthetic images need at least 8 x 8 pixels");
  if (channels == 0) fail(ErrorKind::invalid_argument, "channels must be positive");

  Dataset ds;
  ds.split = Split::train;
  for (std::size_t c = 0; c < classes; ++c) ds.class_names.emplace_back(kShapeNames[c]);
  const auto extent = static_cast<double>(hw);
  for (std::size_t i = 0; i < classes * per_class; ++i) {
    const std::size_t label = i % classes;
    const double radius = rng.uniform(0.22, 0.36) * extent;
    const double cy = rng.uniform(radius, extent - radius);
    const double cx = rng.uniform(radius, extent - radius);
    const double intensity = rng.uniform(0.55, 1.0);
    const double background = rng.uniform(0.0, 0.2);
    std::vector<double> tint(channels);
    for (auto& t : tint) t = rng.uniform(0.6, 1.0);
    Tensor img(Shape{channels, hw, hw});
    for (std::size_t y = 0; y < hw; ++y) {
      for (std::size_t x = 0; x < hw; ++x) {
        const bool on = kShapes[label](static_cast<double>(y) + 0.5 - cy, static_cast<double>(x) + 0.5 - cx, radius);
        for (std::size_t ch = 0; ch < channels; ++ch) {
          const double base = on ? intensity * tint[ch] : background;
          const double v = base + 0.05 * rng.normal();
          img[(ch * hw + y) * hw + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
    ds.samples.push_back({std::move(img), static_cast<int>(label)});
  }
  ds.channel_means = compute_channel_means(ds);
  return ds;
}

std::vector<float> compute_channel_means(const Dataset& dataset) {
  if (dataset.empty()) return {};
  const Shape& shape = dataset.image_shape();
  const std::size_t plane = shape[1] * shape[2];
  std::vector<double> sums(shape[0], 0.0);
  for (const auto& s : dataset.samples) {
    for (std::size_t c = 0; c < shape[0]; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < plane; ++k) acc += s.image[c * plane + k];
      sums[c] += acc / static_cast<double>(plane);
    }
  }
  std::vector<float> means(shape[0]);
  for (std::size_t c = 0; c < means.size(); ++c) {
    means[c] = static_cast<float>(sums[c] / static_cast<double>(dataset.size()));
  }
  return means;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction < 1.0)) fail(ErrorKind::invalid_argument, "split fraction must lie in [0, 1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset.samples[i].label].push_back(i);
  std::vector<bool> held_out(dataset.size(), false);
  for (auto& [label, idx] : by_class) {
    for (std::size_t k = idx.size(); k > 1; --k) std::swap(idx[k - 1], idx[rng.below(k)]);
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < take; ++k) held_out[idx[k]] = true;
  }
  Dataset kept, holdout;
  kept.class_names = holdout.class_names = dataset.class_names;
  kept.channel_means = holdout.channel_means = dataset.channel_means;
  kept.split = dataset.split;
  holdout.split = Split::val;
  for (std::size_t i = 0; i < dataset.size(); ++i) (held_out[i] ? holdout : kept).samples.push_back(dataset.samples[i]);
  return {std::move(kept), std::move(holdout)};
}

void save_dataset(const fs::path& dir, const DatasetSplits& splits) {
  fs::create_directories(dir / "images");
  const Dataset* reference = !splits.train.class_names.empty() ? &splits.train
                             : !splits.val.class_names.empty() ? &splits.val
                                                                : &splits.test;
  Json manifest;
  manifest["class_names"] = reference->class_names;
  manifest["channel_means"] = Json::array();
  for (float m : reference->channel_means) manifest["channel_means"].push_back(m);
  manifest["samples"] = Json::array();
  std::size_t counter = 0;
  for (const auto* part : {&splits.train, &splits.val, &splits.test}) {
    for (const auto& s : part->samples) {
      char name[32];
      std::snprintf(name, sizeof name, "images/%06zu.tnsr", counter++);
      save_tensor(dir / name, s.image);
      manifest["samples"].push_back({{"file", name}, {"label", s.label}, {"split", to_string(part->split)}});
    }
  }
  write_file((dir / "manifest.json").string(), manifest.dump(1) + "\n");
}

DatasetSplits load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) fail(ErrorKind::data, "missing manifest: " + manifest_path.string());
  Json manifest;
  try {
    manifest = Json::parse(read_file(manifest_path.string()));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, "manifest is not valid JSON: " + std::string(e.what()));
  }
  DatasetSplits out;
  try {
    const auto names = manifest.at("class_names").get<std::vector<std::string>>();
    const auto means = manifest.value("channel_means", std::vector<float>{});
    for (Dataset* d : {&out.train, &out.val, &out.test}) {
      d->class_names = names;
      d->channel_means = means;
    }
    out.train.split = Split::train;
    out.val.split = Split::val;
    out.test.split = Split::test;
    for (const auto& entry : manifest.at("samples")) {
      const auto file = entry.at("file").get<std::string>();
      const int label = entry.at("label").get<int>();
      if (label < 0 || static_cast<std::size_t>(label) >= names.size()) {
        fail(ErrorKind::data, "manifest entry '" + file + "' has label " + std::to_string(label) +
                                  " but there are " + std::to_string(names.size()) + " classes");
      }
      const fs::path path = dir / file;
      if (!fs::exists(path)) fail(ErrorKind::data, "manifest references missing file '" + file + "'");
      const Split split = split_from_string(entry.value("split", "train"));
      Dataset& target = split == Split::train ? out.train : split == Split::val ? out.val : out.test;
      target.samples.push_back({load_tensor(path), label});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, "malformed manifest: " + std::string(e.what()));
  }
  Shape shape;
  for (const Dataset* d : {&out.train, &out.val, &out.test}) {
    d->validate();
    if (d->empty()) continue;
    if (shape.empty()) shape = d->image_shape();
    if (d->image_shape() != shape) fail(ErrorKind::data, "image shapes differ between splits");
  }
  return out;
}

Tensor make_batch(const Dataset& dataset, std::span<const std::size_t> indices, const Shape& input_shape,
                  const BatchOptions& options) {
  if (input_shape.size() != 3) fail(ErrorKind::invalid_shape, "network input must be C x H x W");
  const Shape& image_shape = dataset.image_shape();
  if (image_shape[0] != input_shape[0] || image_shape[1] < input_shape[1] || image_shape[2] < input_shape[2]) {
    fail(ErrorKind::shape_mismatch, "images " + shape_string(image_shape) + " cannot feed network input " +
                                        shape_string(input_shape));
  }
  const std::size_t per = shape_size(input_shape);
  Tensor batch(Shape{indices.size(), input_shape[0], input_shape[1], input_shape[2]});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const std::size_t idx = indices[b];
    Tensor img = subtract_channel_means(dataset.samples.at(idx).image, dataset.channel_means);
    const std::size_t slack_h = image_shape[1] - input_shape[1], slack_w = image_shape[2] - input_shape[2];
    if (options.train) {
      Rng rng = Rng::derived(options.seed, {options.epoch, idx});
      std::size_t top = slack_h / 2, left = slack_w / 2;
      if (slack_h || slack_w) {
        top = rng.below(slack_h + 1);
        left = rng.below(slack_w + 1);
      }
      if (slack_h || slack_w) img = crop(img, top, left, input_shape[1], input_shape[2]);
      img = augment(img, options.augment, rng);
    } else if (slack_h || slack_w) {
      img = crop(img, slack_h / 2, slack_w / 2, input_shape[1], input_shape[2]);
    }
    std::copy(img.data().begin(), img.data().end(), batch.raw() + b * per);
  }
  return batch;
}

}  // namespace nwadapt
