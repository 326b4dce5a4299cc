#include <fstream>
#include <sstream>

#include "doctest.h"
#include "expect.hpp"
#include "nets.hpp"
#include "nwadapt/model_io.hpp"
#include "nwadapt/tensor_io.hpp"
#include "oracles.hpp"

using namespace nwadapt;

namespace {

std::string tensor_bytes(const Tensor& t) {
  std::ostringstream out;
  write_tensor(out, t);
  return out.str();
}

std::string model_bytes(const Network& net, const Json& meta = Json::object()) {
  std::ostringstream out;
  write_model(out, net, meta);
  return out.str();
}

Tensor parse_tensor(const std::string& bytes) {
  std::istringstream in(bytes);
  return read_tensor(in);
}

ModelFile parse_model(const std::string& bytes) {
  std::istringstream in(bytes);
  return read_model(in);
}

void put_u32_at(std::string& bytes, std::size_t pos, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes[pos + i] = static_cast<char>((v >> (8 * i)) & 0xff);
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("tensor record layout") {
    Tensor t({2, 1}, {1.0f, -2.0f});
    const std::string b = tensor_bytes(t);
    REQUIRE(b.size() == 4 + 4 + 4 + 2 * 4 + 2 * 4);
    CHECK(b.substr(0, 4) == "TNSR");
    CHECK(b[4] == 1);
    CHECK(b[8] == 2);
    CHECK(b[12] == 2);
    CHECK(b[16] == 1);
    // 1.0f little-endian is 00 00 80 3f.
    CHECK(static_cast<unsigned char>(b[23]) == 0x3f);
  }

  TEST_CASE("tensor round trip is byte identical") {
    Rng rng(3);
    for (const Shape& s : {Shape{5}, Shape{2, 3}, Shape{2, 3, 4}, Shape{1, 2, 3, 4}}) {
      const Tensor t = rand_normal<float>(s, 0.0, 1.0, rng);
      const std::string b = tensor_bytes(t);
      const Tensor back = parse_tensor(b);
      CHECK(back == t);
      CHECK(tensor_bytes(back) == b);
    }
    oracle::TempDir dir("tnsr");
    const Tensor t = rand_normal<float>({3, 3}, 0.0, 1.0, rng);
    save_tensor(dir.str("a.tnsr"), t);
    CHECK(load_tensor(dir.str("a.tnsr")) == t);
  }

  TEST_CASE("tensor corruption yields format errors") {
    const std::string good = tensor_bytes(Tensor({2, 2}, {1, 2, 3, 4}));
    std::string bad_magic = good;
    bad_magic[0] = 'X';
    CHECK(error_kind([&] { parse_tensor(bad_magic); }) == ErrorKind::format);
    std::string bad_version = good;
    put_u32_at(bad_version, 4, 9);
    CHECK(error_kind([&] { parse_tensor(bad_version); }) == ErrorKind::format);
    std::string bad_rank = good;
    put_u32_at(bad_rank, 8, 7);
    CHECK(error_kind([&] { parse_tensor(bad_rank); }) == ErrorKind::format);
    std::string long_extent = good;
    put_u32_at(long_extent, 12, 1000);
    CHECK(error_kind([&] { parse_tensor(long_extent); }) == ErrorKind::format);
    std::string huge_extent = good;
    put_u32_at(huge_extent, 12, 0xfffffff0u);
    put_u32_at(huge_extent, 16, 0xfffffff0u);
    CHECK(error_kind([&] { parse_tensor(huge_extent); }) == ErrorKind::format);
    std::string big_extent = good;
    put_u32_at(big_extent, 12, 1u << 30);
    CHECK(error_kind([&] { parse_tensor(big_extent); }) == ErrorKind::format);
    CHECK(error_kind([&] { parse_tensor(good.substr(0, good.size() - 1)); }) == ErrorKind::format);
    CHECK(error_kind([&] { parse_tensor(good.substr(0, 2)); }) == ErrorKind::format);
    CHECK(error_kind([] { load_tensor("/nonexistent/file.tnsr"); }) == ErrorKind::io);
  }

  TEST_CASE("model round trip is byte identical") {
    Rng rng(9);
    for (int trial = 0; trial < 5; ++trial) {
      Network net = testnets::random_network(testnets::random_chain_spec(rng), rng);
      const Json meta{{"created", 0}, {"note", "x"}};
      const std::string b = model_bytes(net, meta);
      CHECK(b.substr(0, 4) == "NWAD");
      const ModelFile mf = parse_model(b);
      CHECK(mf.net == net);
      CHECK(mf.metadata == meta);
      CHECK(model_bytes(mf.net, mf.metadata) == b);
    }
    Network vgg(make_vgg16_spec(10, 32));
    CHECK(parse_model(model_bytes(vgg)).net.spec() == vgg.spec());
  }

  TEST_CASE("model corruption yields format errors") {
    Rng rng(1);
    const Network net = testnets::random_network(testnets::random_chain_spec(rng), rng);
    const std::string good = model_bytes(net);
    std::string bad_magic = good;
    bad_magic[1] = 'Z';
    CHECK(error_kind([&] { parse_model(bad_magic); }) == ErrorKind::format);
    std::string bad_version = good;
    put_u32_at(bad_version, 4, 2);
    CHECK(error_kind([&] { parse_model(bad_version); }) == ErrorKind::format);
    std::string huge_header = good;
    put_u32_at(huge_header, 8, 0xffffffffu);
    CHECK(error_kind([&] { parse_model(huge_header); }) == ErrorKind::format);
    std::string long_header = good;
    put_u32_at(long_header, 8, static_cast<std::uint32_t>(good.size()));
    CHECK(error_kind([&] { parse_model(long_header); }) == ErrorKind::format);
    std::string short_header = good;
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= std::uint32_t{static_cast<unsigned char>(good[8 + i])} << (8 * i);
    put_u32_at(short_header, 8, len - 3);
    CHECK(error_kind([&] { parse_model(short_header); }) == ErrorKind::format);
    CHECK(error_kind([&] { parse_model(good.substr(0, good.size() - 5)); }) == ErrorKind::format);
  }

  TEST_CASE("blob shape mismatch is a format error") {
    Rng rng(2);
    const Network net = testnets::random_network(testnets::random_chain_spec(rng), rng);
    std::string b = model_bytes(net);
    // The first blob is the c1 weight; bump its leading extent.
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= std::uint32_t{static_cast<unsigned char>(b[8 + i])} << (8 * i);
    const std::size_t blob = 12 + len;
    REQUIRE(b.substr(blob, 4) == "TNSR");
    put_u32_at(b, blob + 12, 1);
    CHECK(error_kind([&] { parse_model(b); }) == ErrorKind::format);
  }

  TEST_CASE("model files on disk") {
    Rng rng(4);
    const Network net = testnets::random_network(testnets::random_chain_spec(rng), rng);
    oracle::TempDir dir("nwad");
    save_model(dir.path / "m.nwad", net);
    CHECK(load_model(dir.path / "m.nwad").net == net);
    CHECK(error_kind([&] { load_model(dir.path / "missing.nwad"); }) == ErrorKind::io);
  }
}
