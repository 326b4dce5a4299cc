#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "nwadapt/tensor.hpp"

namespace nwadapt {

// TNSR record, all integers little-endian:
//   "TNSR" | u32 version (=1) | u32 rank | rank x u32 extent | f32 data...
// No padding; data is row-major.
inline constexpr std::uint32_t kTensorFormatVersion = 1;

void write_tensor(std::ostream& out, const Tensor& tensor);
// Throws ErrorKind::format on bad magic, unsupported version, bad rank or a
// truncated payload.
Tensor read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor load_tensor(const std::filesystem::path& path);

namespace io {

void put_u32(std::ostream& out, std::uint32_t v);
void put_f32(std::ostream& out, float v);
std::uint32_t get_u32(std::istream& in, const char* what);
float get_f32(std::istream& in, const char* what);

}  // namespace io

}  // namespace nwadapt
