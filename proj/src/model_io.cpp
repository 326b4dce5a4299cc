#include "nwadapt/model_io.hpp"

#include <array>
#include <fstream>
#include <istream>
#include <ostream>

#include "nwadapt/tensor_io.hpp"

namespace nwadapt {

namespace {

constexpr std::array<char, 4> kMagic{'N', 'W', 'A', 'D'};
constexpr std::uint32_t kMaxHeaderBytes = 64u << 20;

std::size_t get_size(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number_unsigned()) {
    fail(ErrorKind::format, std::string("layer field '") + key + "' missing or not an unsigned integer");
  }
  return j[key].get<std::size_t>();
}

}  // namespace

Json layer_spec_to_json(const LayerSpec& s) {
  Json j;
  j["kind"] = std::string(to_string(s.kind));
  j["name"] = s.name;
  switch (s.kind) {
    case LayerKind::conv2d:
      j["out_channels"] = s.out_channels;
      j["in_channels"] = s.in_channels;
      j["kernel_h"] = s.kernel_h;
      j["kernel_w"] = s.kernel_w;
      j["stride"] = s.stride;
      j["padding"] = s.padding;
      break;
    case LayerKind::maxpool2d:
      j["window"] = s.window;
      j["stride"] = s.stride;
      break;
    case LayerKind::dense:
    case LayerKind::softmax_output:
      j["out_features"] = s.out_features;
      j["in_features"] = s.in_features;
      break;
    case LayerKind::dropout:
      j["rate"] = s.rate;
      break;
    case LayerKind::relu:
    case LayerKind::flatten:
      break;
  }
  return j;
}

LayerSpec layer_spec_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.contains("name")) {
    fail(ErrorKind::format, "layer entry needs 'kind' and 'name'");
  }
  LayerSpec s;
  s.kind = layer_kind_from_string(j["kind"].get<std::string>());
  s.name = j["name"].get<std::string>();
  switch (s.kind) {
    case LayerKind::conv2d:
      s.out_channels = get_size(j, "out_channels");
      s.in_channels = get_size(j, "in_channels");
      s.kernel_h = get_size(j, "kernel_h");
      s.kernel_w = get_size(j, "kernel_w");
      s.stride = get_size(j, "stride");
      s.padding = get_size(j, "padding");
      break;
    case LayerKind::maxpool2d:
      s.window = get_size(j, "window");
      s.stride = get_size(j, "stride");
      break;
    case LayerKind::dense:
    case LayerKind::softmax_output:
      s.out_features = get_size(j, "out_features");
      s.in_features = get_size(j, "in_features");
      break;
    case LayerKind::dropout:
      if (!j.contains("rate") || !j["rate"].is_number()) fail(ErrorKind::format, "dropout layer needs 'rate'");
      s.rate = j["rate"].get<double>();
      break;
    case LayerKind::relu:
    case LayerKind::flatten:
      break;
  }
  return s;
}

Json network_spec_to_json(const NetworkSpec& spec) {
  Json j;
  j["input"] = spec.input;
  j["layers"] = Json::array();
  for (const auto& l : spec.layers) j["layers"].push_back(layer_spec_to_json(l));
  return j;
}

NetworkSpec network_spec_from_json(const Json& j) {
  if (!j.contains("input") || !j.contains("layers") || !j["layers"].is_array()) {
    fail(ErrorKind::format, "network spec needs 'input' and 'layers'");
  }
  NetworkSpec spec;
  spec.input = j["input"].get<Shape>();
  for (const auto& l : j["layers"]) spec.layers.push_back(layer_spec_from_json(l));
  return spec;
}

void write_model(std::ostream& out, const Network& net, const Json& metadata) {
  Json header = network_spec_to_json(net.spec());
  Json shapes = Json::array();
  for (std::size_t i = 0; i < net.size(); ++i) {
    const LayerSpec& s = net.layer(i);
    if (!s.parameterized()) continue;
    shapes.push_back({{"name", s.name}, {"weight", s.weight_shape()}, {"bias", s.bias_shape()}});
  }
  header["shapes"] = std::move(shapes);
  header["mode"] = net.mode() == Mode::train ? "train" : "eval";
  header["metadata"] = metadata.is_null() ? Json::object() : metadata;
  const std::string text = header.dump();

  out.write(kMagic.data(), kMagic.size());
  io::put_u32(out, kModelFormatVersion);
  io::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (!net.layer(i).parameterized()) continue;
    write_tensor(out, net.params(i).weight);
    write_tensor(out, net.params(i).bias);
  }
  if (!out) fail(ErrorKind::io, "failed to write model");
}

ModelFile read_model(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4) fail(ErrorKind::format, "truncated stream while reading model magic");
  if (magic != kMagic) fail(ErrorKind::format, "bad model magic (expected NWAD)");
  const std::uint32_t version = io::get_u32(in, "model version");
  if (version != kModelFormatVersion) {
    fail(ErrorKind::format, "unsupported model format version " + std::to_string(version));
  }
  const std::uint32_t length = io::get_u32(in, "model header length");
  if (length == 0 || length > kMaxHeaderBytes) {
    fail(ErrorKind::format, "implausible model header length " + std::to_string(length));
  }
  std::string text(length, '\0');
  in.read(text.data(), length);
  if (static_cast<std::uint32_t>(in.gcount()) != length) {
    fail(ErrorKind::format, "model header truncated: expected " + std::to_string(length) + " bytes");
  }
  Json header;
  try {
    header = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("model header is not valid JSON: ") + e.what());
  }

  ModelFile file;
  NetworkSpec spec;
  try {
    spec = network_spec_from_json(header);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("malformed model header: ") + e.what());
  }
  Network net;
  try {
    net = Network(spec);
  } catch (const Error& e) {
    fail(ErrorKind::format, std::string("model header describes an invalid network: ") + e.what());
  }
  const Json& shapes = header.contains("shapes") ? header["shapes"] : Json::array();
  std::vector<LayerParams<float>> params(net.size());
  std::size_t slot = 0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const LayerSpec& s = net.layer(i);
    if (!s.parameterized()) continue;
    if (slot >= shapes.size() || shapes[slot].value("name", "") != s.name ||
        shapes[slot].value("weight", Shape{}) != s.weight_shape() ||
        shapes[slot].value("bias", Shape{}) != s.bias_shape()) {
      fail(ErrorKind::format, "header shape list disagrees with layer '" + s.name + "'");
    }
    ++slot;
    params[i].weight = read_tensor(in);
    params[i].bias = read_tensor(in);
    if (params[i].weight.shape() != s.weight_shape() || params[i].bias.shape() != s.bias_shape()) {
      fail(ErrorKind::format, "parameter blob shape mismatch at layer '" + s.name + "': got " +
                                  shape_string(params[i].weight.shape()) + ", header says " +
                                  shape_string(s.weight_shape()));
    }
  }
  if (slot != shapes.size()) fail(ErrorKind::format, "header lists more parameter shapes than layers");
  net.set_params(std::move(params));
  net.set_mode(header.value("mode", "eval") == "train" ? Mode::train : Mode::eval);
  file.net = std::move(net);
  file.metadata = header.contains("metadata") ? header["metadata"] : Json::object();
  return file;
}

void save_model(const std::filesystem::path& path, const Network& net, const Json& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot open for writing: " + path.string());
  write_model(out, net, metadata);
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open model file: " + path.string());
  return read_model(in);
}

}  // namespace nwadapt
