#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"

namespace nwadapt {

using Json = nlohmann::ordered_json;

// 64-bit FNV-1a; used for profile, parameter and artifact fingerprints.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

// Value rounded to `digits` significant decimal digits.
double round_significant(double value, int digits = 9);

// Reads the whole file; ErrorKind::io when it cannot be opened.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace nwadapt
