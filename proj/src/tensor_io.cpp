#include "nwadapt/tensor_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace nwadapt {

namespace {

constexpr std::array<char, 4> kMagic{'T', 'N', 'S', 'R'};
constexpr std::size_t kMaxElements = std::size_t{1} << 34;

}  // namespace

namespace io {

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> bytes{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                  static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes.data(), bytes.size());
}

void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(std::istream& in, const char* what) {
  std::array<unsigned char, 4> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != 4) fail(ErrorKind::format, std::string("truncated stream while reading ") + what);
  return std::uint32_t{bytes[0]} | (std::uint32_t{bytes[1]} << 8) | (std::uint32_t{bytes[2]} << 16) |
         (std::uint32_t{bytes[3]} << 24);
}

float get_f32(std::istream& in, const char* what) { return std::bit_cast<float>(get_u32(in, what)); }

}  // namespace io

void write_tensor(std::ostream& out, const Tensor& tensor) {
  out.write(kMagic.data(), kMagic.size());
  io::put_u32(out, kTensorFormatVersion);
  io::put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
  for (std::size_t e : tensor.shape()) io::put_u32(out, static_cast<std::uint32_t>(e));
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(tensor.raw()),
              static_cast<std::streamsize>(tensor.size() * sizeof(float)));
  } else {
    for (float v : tensor.data()) io::put_f32(out, v);
  }
  if (!out) fail(ErrorKind::io, "failed to write tensor record");
}

Tensor read_tensor(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4) fail(ErrorKind::format, "truncated stream while reading tensor magic");
  if (magic != kMagic) fail(ErrorKind::format, "bad tensor magic (expected TNSR)");
  const std::uint32_t version = io::get_u32(in, "tensor version");
  if (version != kTensorFormatVersion) {
    fail(ErrorKind::format, "unsupported tensor format version " + std::to_string(version));
  }
  const std::uint32_t rank = io::get_u32(in, "tensor rank");
  if (rank == 0 || rank > kMaxRank) fail(ErrorKind::format, "invalid tensor rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& e : shape) {
    e = io::get_u32(in, "tensor extent");
    if (e == 0) fail(ErrorKind::format, "zero tensor extent");
  }
  std::size_t count = 1;
  for (auto e : shape) {
    if (count > kMaxElements / e) fail(ErrorKind::format, "tensor extents exceed the element limit");
    count *= e;
  }
  // Grows with the bytes actually present.
  std::vector<float> data;
  constexpr std::size_t kChunk = std::size_t{1} << 16;
  while (data.size() < count) {
    const std::size_t start = data.size(), n = std::min(kChunk, count - start);
    data.resize(start + n);
    in.read(reinterpret_cast<char*>(data.data() + start), static_cast<std::streamsize>(n * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != n * sizeof(float)) {
      fail(ErrorKind::format, "truncated tensor payload: expected " + std::to_string(count) + " values");
    }
  }
  if constexpr (std::endian::native != std::endian::little) {
    for (auto& v : data) {
      std::uint32_t u = std::bit_cast<std::uint32_t>(v);
      u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
      v = std::bit_cast<float>(u);
    }
  }
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot open for writing: " + path.string());
  write_tensor(out, tensor);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open tensor file: " + path.string());
  return read_tensor(in);
}

}  // namespace nwadapt
