#include "doctest.h"
#include "expect.hpp"
#include "nwadapt/error.hpp"
#include "nwadapt/tensor.hpp"

using namespace nwadapt;

TEST_SUITE("tensor") {
  TEST_CASE("shapes are validated") {
    CHECK(error_kind([] { Tensor t(Shape{}); }) == ErrorKind::invalid_shape);
    CHECK(error_kind([] { Tensor t(Shape{1, 2, 3, 4, 5}); }) == ErrorKind::invalid_shape);
    CHECK(error_kind([] { Tensor t(Shape{2, 0}); }) == ErrorKind::invalid_shape);
    CHECK(error_kind([] { Tensor t(Shape{2, 2}, std::vector<float>(3)); }) == ErrorKind::invalid_shape);
    Tensor t({2, 3, 4, 5});
    CHECK(t.size() == 120);
    CHECK(t.rank() == 4);
    for (float v : t.values()) CHECK(v == 0.0f);
  }

  TEST_CASE("offset and coordinate are inverse") {
    Tensor t({2, 3, 4});
    for (std::size_t flat = 0; flat < t.size(); ++flat) {
      const Shape c = t.coordinate(flat);
      CHECK(t.offset(c) == flat);
    }
    Tensor u({2, 3, 4, 5});
    u.at(1, 2, 3, 4) = 7.0f;
    CHECK(u[u.size() - 1] == 7.0f);
  }

  TEST_CASE("elementwise arithmetic") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 2}, {4, 3, 2, -1});
    CHECK(add(a, b).values() == std::vector<float>{5, 5, 5, 3});
    CHECK(sub(a, b).values() == std::vector<float>{-3, -1, 1, 5});
    CHECK(mul(a, b).values() == std::vector<float>{4, 6, 6, -4});
    CHECK(scale(a, 0.5f).values() == std::vector<float>{0.5f, 1, 1.5f, 2});
    CHECK(max_with_zero(b).values() == std::vector<float>{4, 3, 2, 0});
    Tensor c({4});
    CHECK(error_kind([&] { add(a, c); }) == ErrorKind::shape_mismatch);
  }

  TEST_CASE("reshape keeps data and checks size") {
    Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor r = a.reshaped({3, 2});
    CHECK(r.shape() == Shape{3, 2});
    CHECK(r.values() == a.values());
    CHECK(error_kind([&] { (void)a.reshaped({4, 2}); }) == ErrorKind::shape_mismatch);
  }

  TEST_CASE("rand_normal is seeded and rejects negative stddev") {
    Rng r1(5), r2(5);
    CHECK(rand_normal<float>({3, 3}, 0.0, 1.0, r1) == rand_normal<float>({3, 3}, 0.0, 1.0, r2));
    CHECK(error_kind([&] { rand_normal<float>({2}, 0.0, -1.0, r1); }) == ErrorKind::invalid_argument);
  }

  TEST_CASE("cast and finiteness") {
    TensorD d({2}, {1.5, -2.25});
    CHECK(d.cast<float>().values() == std::vector<float>{1.5f, -2.25f});
    Tensor bad({2}, {1.0f, std::numeric_limits<float>::infinity()});
    CHECK_FALSE(all_finite(bad));
    CHECK(all_finite(d.cast<float>()));
  }
}
