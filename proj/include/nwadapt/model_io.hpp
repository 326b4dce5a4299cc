#pragma once

#include <filesystem>
#include <iosfwd>

#include "nwadapt/layers.hpp"
#include "nwadapt/util.hpp"

namespace nwadapt {

// NWAD model file, integers little-endian:
//   "NWAD" | u32 version (=1) | u32 header length | JSON header |
//   one TNSR record per weight and bias, parameterized layers in spec order.
// The header carries the layer list, input shape, every parameter shape, the
// mode, and free-form metadata (training provenance, timestamps).
inline constexpr std::uint32_t kModelFormatVersion = 1;

struct ModelFile {
  Network net;
  Json metadata = Json::object();
};

Json layer_spec_to_json(const LayerSpec& spec);
LayerSpec layer_spec_from_json(const Json& j);
Json network_spec_to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const Json& j);

void write_model(std::ostream& out, const Network& net, const Json& metadata = Json::object());
// Throws ErrorKind::format for a corrupt container (magic, version, header
// length, JSON) and for any parameter blob whose shape disagrees with the
// header.
ModelFile read_model(std::istream& in);

void save_model(const std::filesystem::path& path, const Network& net, const Json& metadata = Json::object());
ModelFile load_model(const std::filesystem::path& path);

}  // namespace nwadapt
