#include "doctest.h"
#include "kdvchart/poly.hpp"

#include <random>

using namespace kdvchart;

namespace {

Poly random_poly(std::mt19937& rng, int vars, int terms) {
  std::uniform_int_distribution<int> var(0, vars - 1), exp(0, 2), coeff(-3, 3);
  Poly p;
  for (int t = 0; t < terms; ++t) {
    Poly m(coeff(rng));
    for (int v = 0; v < vars; ++v) m *= Poly::variable(static_cast<VarId>(1000 + var(rng)), exp(rng));
    p += m;
  }
  return p;
}

}  // namespace

TEST_CASE("polynomial arithmetic basics") {
  Poly x = Poly::variable(1000), y = Poly::variable(1001);
  Poly sq = (x + y) * (x + y);
  CHECK(sq == x * x + Poly(2) * x * y + y * y);
  CHECK((sq - x * x - y * y).size() == 1);
  CHECK(sq.derivative(1000) == Poly(2) * x + Poly(2) * y);
  CHECK((x - x).is_zero());
  CHECK((x + y).pow(3).exact_div(x + y) == sq);
}

TEST_CASE("gcd recovers planted common factors") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    Poly g = random_poly(rng, 3, 2), a = random_poly(rng, 3, 2), b = random_poly(rng, 3, 2);
    if (g.is_zero() || a.is_zero() || b.is_zero()) continue;
    Poly r = gcd(g * a, g * b);
    // r must be divisible by g and must divide both products.
    Poly q;
    CHECK((g * a).try_divide(r, q));
    CHECK((g * b).try_divide(r, q));
    CHECK(r.try_divide(g.monic(), q));
  }
}

TEST_CASE("gcd of coprime inputs is one") {
  Poly x = Poly::variable(1000), y = Poly::variable(1001);
  CHECK(gcd(x + Poly(1), y + Poly(1)) == Poly(1));
  CHECK(gcd(x * x, x * y) == x);
}
