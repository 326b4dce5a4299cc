#include <cmath>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "nwadapt/parallel.hpp"
#include "nwadapt/rng.hpp"

using namespace nwadapt;

TEST_SUITE("rng") {
  TEST_CASE("same seed, same stream") {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
      const auto x = a.next_u64();
      CHECK(x == b.next_u64());
      differs |= x != c.next_u64();
    }
    CHECK(differs);
  }

  TEST_CASE("derived streams are keyed") {
    auto first = [](Rng r) { return r.next_u64(); };
    CHECK(first(Rng::derived(1, {2, 3})) == first(Rng::derived(1, {2, 3})));
    CHECK(first(Rng::derived(1, {2, 3})) != first(Rng::derived(1, {3, 2})));
    CHECK(first(Rng::derived(1, {2})) != first(Rng::derived(2, {2})));
  }

  TEST_CASE("bounded and uniform draws stay in range") {
    Rng r(7);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
      const auto v = r.below(6);
      CHECK(v < 6);
      seen.insert(v);
      const double u = r.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
      const double w = r.uniform(-2.0, 3.0);
      CHECK(w >= -2.0);
      CHECK(w < 3.0);
    }
    CHECK(seen.size() == 6);
  }

  TEST_CASE("normal draws have unit moments") {
    Rng r(11);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = r.normal();
      sum += x;
      sq += x * x;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(sq / n - mean * mean - 1.0) < 0.02);
  }

  TEST_CASE("parallel_for visits every index once") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
    CHECK(worker_count() >= 1);
  }

  TEST_CASE("parallel_for propagates exceptions") {
    CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                      if (i == 3) throw std::runtime_error("boom");
                    }),
                    std::runtime_error);
  }
}
