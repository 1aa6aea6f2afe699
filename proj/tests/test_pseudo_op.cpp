#include "doctest.h"
#include "kdvchart/pseudo_op.hpp"

using namespace kdvchart;

namespace {

JetExpr u(int k = 0) { return JetExpr::jet("u", k); }

PseudoOp kdv_operator() {
  return PseudoOp::d(2) + PseudoOp::scalar(4) * PseudoOp::mul(u()) +
         PseudoOp::scalar(2) * PseudoOp::mul(u(1)) * PseudoOp::dinv();
}

}  // namespace

TEST_CASE("normal form") {
  CHECK((PseudoOp::d() * PseudoOp::dinv()).is_identity());
  CHECK((PseudoOp::dinv() * PseudoOp::d()).is_identity());
  CHECK((PseudoOp::mul(u()) * PseudoOp::mul(u().inverse())).is_identity());
  CHECK((PseudoOp::d() - PseudoOp::d()).is_zero());
  PseudoOp a = PseudoOp::mul(u()) * PseudoOp::d() * PseudoOp::dinv() * PseudoOp::mul(u());
  CHECK(a == PseudoOp::mul(u() * u()));
}

TEST_CASE("recursion operator maps the KdV hierarchy") {
  PseudoOp phi = kdv_operator();
  JetExpr k1 = op_apply(phi, u(1));
  CHECK(k1 == u(3) + JetExpr(6) * u() * u(1));
  // Brute-force second member computed by expanding by hand.
  JetExpr k2 = op_apply(phi, k1);
  CHECK(k2 == u(5) + JetExpr(10) * u() * u(3) + JetExpr(20) * u(1) * u(2) + JetExpr(30) * u() * u() * u(1));
  auto h = hierarchy_generate(phi, u(1), 2);
  CHECK(h[1] == k2);
}

TEST_CASE("order overflow names the term") {
  PseudoOp big = PseudoOp::d(kMaxJetOrder + 1);
  CHECK_THROWS_AS(op_apply(big, u()), OperatorOrderOverflow);
}

TEST_CASE("first-order inversion") {
  JetExpr w = JetExpr::jet("w");
  auto inv = invert_first_order(JetExpr(), JetExpr(2) * w);
  REQUIRE(inv);
  PseudoOp op = PseudoOp::mul(JetExpr(2) * w) * PseudoOp::d();
  CHECK((inv->first * op).is_identity());
  // D + w_x/w is gauge-equivalent to D through mu = w.
  auto g = invert_first_order(JetExpr::jet("w", 1) / w, JetExpr(1));
  REQUIRE(g);
  PseudoOp dop = PseudoOp::d() + PseudoOp::mul(JetExpr::jet("w", 1) / w);
  JetExpr f = JetExpr::jet("w", 2) * w;
  CHECK(op_apply(g->first, op_apply(dop, f)) == f);
}
