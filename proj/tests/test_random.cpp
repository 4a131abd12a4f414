#include <doctest.h>

#include <cmath>
#include <vector>

#include "nelson/random.hpp"

using nelson::RandomStream;

TEST_CASE("same key reproduces the same stream") {
  RandomStream a(42, 7), b(42, 7);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("different indices and seeds give different streams") {
  RandomStream a(42, 0), b(42, 1), c(43, 0);
  int equal_ab = 0, equal_ac = 0;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal(), y = b.normal(), z = c.normal();
    equal_ab += x == y;
    equal_ac += x == z;
  }
  CHECK(equal_ab == 0);
  CHECK(equal_ac == 0);
}

TEST_CASE("normal draws have unit variance and uniform draws lie in [0, 1)") {
  RandomStream s(1, 0);
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(sq / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  for (int i = 0; i < 10000; ++i) {
    const double u = s.uniform();
    CHECK((u >= 0.0 && u < 1.0));
  }
}

TEST_CASE("stream remembers its key") {
  RandomStream s(99, 3);
  CHECK(s.seed() == 99);
  CHECK(s.index() == 3);
}
