#include "doctest.h"
#include "kdvchart/dsl.hpp"

#include <fstream>
#include <sstream>

using namespace kdvchart;

namespace {

std::string chart_source() {
  std::ifstream in(KDVCHART_SOURCE_DIR "/charts/kdv-chart.txt");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ParseError parse_failure(const std::string& chart) {
  try {
    parse_chart(chart);
  } catch (const ParseError& e) {
    return e;
  }
  FAIL("chart parsed: " << chart);
  return ParseError(0, 0, "");
}

}  // namespace

TEST_CASE("expressions print and parse back to themselves") {
  for (unsigned seed = 0; seed < 100; ++seed) {
    JetExpr a = random_polynomial("u", seed, 3, 4);
    JetExpr b = random_polynomial("v", seed + 1000, 2, 2) + JetExpr(1);
    JetExpr e = a / b + make_dinv(random_polynomial("u", seed + 2000, 2, 2));
    CAPTURE(e.str());
    CHECK(parse_expr(e.str()) == e);
  }
  CHECK(parse_expr("x/u*v") == parse_expr("(x*v)/u"));
  CHECK(parse_expr("u{5}") == JetExpr::jet("u", 5));
  CHECK(parse_expr("u_xxxxx") == JetExpr::jet("u", 5));
  CHECK(parse_expr("D(u^2)") == parse_expr("2*u*u_x"));
}

TEST_CASE("operators print and parse back to themselves") {
  ChartDocument doc = parse_chart(chart_source());
  for (const auto& eq : doc.registry.equations()) {
    CAPTURE(eq.name);
    CHECK(parse_operator(eq.recursion.str()) == eq.recursion);
  }
  for (const auto& [name, op] : doc.op_defines) {
    CAPTURE(name);
    CHECK(parse_operator(op.str()) == op);
  }
}

TEST_CASE("chart round trip") {
  ChartDocument doc = parse_chart(chart_source());
  CHECK(doc.registry.equations().size() == 6);
  std::string printed = print_chart(doc);
  ChartDocument again = parse_chart(printed);
  CHECK(same_document(doc, again));
  CHECK(print_chart(again) == printed);
  // comments and blank lines do not matter
  CHECK(same_document(parse_chart("# note\n\n" + chart_source() + "\n# end\n"), doc));
}

TEST_CASE("parse diagnostics carry positions and expectations") {
  try {
    parse_expr("u + (v");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
    CHECK(e.col() == 7);
    CHECK(e.expected() == std::vector<std::string>{"')'"});
  }
  try {
    parse_expr("u +* v");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.col() == 4);
    CHECK(!e.expected().empty());
  }
  CHECK_THROWS_AS(parse_operator("D*foo"), ParseError);
  CHECK_THROWS_AS(parse_operator("Dinv^-1"), ParseError);

  auto missing = parse_failure("equation kdv u_t = u_xxx\n");
  CHECK(missing.line() == 1);
  auto dup = parse_failure("equation kdv: u_t = u_xxx\nequation kdv: u_t = u_x\n");
  CHECK(dup.line() == 2);
  auto unknown = parse_failure("equation kdv: u_t = u_xxx\n\nbogus thing\n");
  CHECK(unknown.line() == 3);
  CHECK(unknown.col() == 1);
  auto cont = parse_failure("equation kdv: u_t = u_xxx\n  operator D^2 + [u\n");
  CHECK(cont.line() == 2);
  CHECK(cont.expected() == std::vector<std::string>{"']'"});
  CHECK(parse_failure("chart-version 2\n").line() == 1);
}
