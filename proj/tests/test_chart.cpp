#include "doctest.h"
#include "kdvchart/dsl.hpp"

using namespace kdvchart;

namespace {

const ChartDocument& chart() {
  static const ChartDocument doc = load_chart(KDVCHART_SOURCE_DIR "/charts/kdv-chart.txt");
  return doc;
}

const ChartRegistry& reg() { return chart().registry; }

JetExpr ex(const char* s) { return parse_expr(s); }

}  // namespace

TEST_CASE("every operator reproduces its equation from its seed") {
  for (const auto& eq : reg().equations()) {
    CAPTURE(eq.name);
    auto rep = verify_equation(eq);
    CHECK_MESSAGE(rep.ok(), rep.residual);
  }
  CHECK(op_apply(reg().equation("new-eq").recursion, ex("w_x")) == ex("w_xxx - 3*w_x*w_xx/w"));
  CHECK(op_apply(reg().equation("mkdv").recursion, ex("v_x")) == ex("v_xxx - 6*v^2*v_x"));
}

TEST_CASE("symbolic link verification") {
  for (const char* name : {"a", "b", "c", "d"}) {
    CAPTURE(name);
    auto rep = verify_link_symbolic(reg(), reg().link(name));
    for (const auto& s : rep.steps) {
      CAPTURE(s.label);
      CAPTURE(s.residual);
      CHECK(s.holds);
    }
    CHECK(rep.ok());
  }
  CHECK(verify_link_symbolic(reg(), reg().link("e")).verdict == Verdict::Deferred);
}

TEST_CASE("composition") {
  auto bc = compose_links(reg(), reg().link("b"), reg().link("c"));
  CHECK(same_relation(bc.relation, ex("v - 1/2*phi_xx/phi_x")));
  CHECK(verify_link_symbolic(reg(), bc).ok());
  auto cd = compose_links(reg(), reg().link("c"), reg().link("d"));
  CHECK(same_relation(cd.relation, ex("w^2 - s")));
  auto left = compose_links(reg(), compose_links(reg(), reg().link("a"), reg().link("b")), reg().link("c"));
  auto right = compose_links(reg(), reg().link("a"), bc);
  CHECK(same_relation(left.relation, right.relation));
  CHECK_THROWS_AS(compose_links(reg(), reg().link("d"), reg().link("e")), KindMismatch);
}

TEST_CASE("invariances") {
  auto m = verify_invariance(reg(), reg().equation("kdv-sing"), reg().link("M"));
  for (const auto& s : m.steps) {
    CAPTURE(s.label);
    CAPTURE(s.residual);
    CHECK(s.holds);
  }
  CHECK(m.ok());
  auto derived = derive_invariance(reg(), reg().link("c"), reg().link("M"));
  CHECK(derived.power == 2);
  CHECK(derived.rule->value == reg().link("I").rule->value);
  auto i = verify_invariance(reg(), reg().equation("new-eq"), reg().link("I"));
  CAPTURE(i.residual);
  CAPTURE(i.message);
  CHECK(i.ok());
  CHECK(verify_invariance(reg(), reg().equation("new-eq"), reg().link("scale")).ok());
}

TEST_CASE("recursion operator by conjugation") {
  PseudoOp psi = derive_recursion(reg(), "kdv-sing", "new-eq", reg().link("c"));
  const PseudoOp& literal = reg().equation("new-eq").recursion;
  for (const auto& p : symbolic_compare(psi, literal, probe_family("w", 5, 0))) {
    CAPTURE(p.probe);
    CAPTURE(p.residual);
    CHECK(p.verdict == ZeroVerdict::Zero);
  }
  PseudoOp ch = derive_recursion(reg(), "mkdv", "new-eq", reg().link("b"));
  CHECK(equivalent(op_apply(ch, ex("w_x")), ex("w_xxx - 3*w_x*w_xx/w")));
  for (const auto& p : symbolic_compare(ch, literal, probe_family("w", 5, 0))) {
    CAPTURE(p.probe);
    CAPTURE(p.residual);
    CHECK(p.verdict == ZeroVerdict::Zero);
  }
}

TEST_CASE("chart export") {
  std::string json = export_chart(reg(), ChartFormat::Json);
  CHECK(json.find("\"AB3\"") != std::string::npos);
  CHECK(export_chart(ChartRegistry{}, ChartFormat::Json).find("\"nodes\": []") != std::string::npos);
}

TEST_CASE("Schwarzian expansion") {
  JetExpr schwarz = ex("phi_xxx/phi_x - 3/2*phi_xx^2/phi_x^2");
  JetExpr quoted = ex("phi_xxxx - 3*phi_xx*phi_xxx/phi_x + 3/2*phi_xx^3/phi_x^2");
  // the quoted expansion is the derivative of phi_x times the Schwarzian
  CHECK(total_derivative(ex("phi_x") * schwarz) == quoted);
  CHECK(total_derivative(schwarz) != quoted);
  auto back = integrate_exact(quoted);
  REQUIRE(is_exact(back));
  CHECK(std::get<JetExpr>(back) == ex("phi_x") * schwarz);
  // restriction to phi_x = w^2 gives twice the curvature term
  SubstitutionSet rules;
  rules.add({"phi", 1, ex("w^2")});
  CHECK(substitute(schwarz, rules) == ex("2*w_xx/w - 4*w_x^2/w^2"));
}
