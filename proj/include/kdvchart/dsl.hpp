#pragma once

#include "kdvchart/chart.hpp"

#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kdvchart {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int col, const std::string& message, std::vector<std::string> expected = {});
  int line() const { return line_; }
  int col() const { return col_; }
  const std::vector<std::string>& expected() const { return expected_; }
  const std::string& detail() const { return detail_; }

 private:
  int line_;
  int col_;
  std::string detail_;
  std::vector<std::string> expected_;
};

/// Names visible while parsing an expression.
struct ParseScope {
  std::map<std::string, JetExpr> defines;
  std::map<std::string, PseudoOp> op_defines;
  std::set<std::string> params;
};

JetExpr parse_expr(std::string_view text, const ParseScope& scope = {});
PseudoOp parse_operator(std::string_view text, const ParseScope& scope = {});

struct ChartDocument {
  int version = 1;
  std::vector<std::pair<std::string, JetExpr>> defines;
  std::vector<std::pair<std::string, PseudoOp>> op_defines;
  ChartRegistry registry;

  const PseudoOp* find_operator(const std::string& name) const;
};

ChartDocument parse_chart(std::string_view source);
ChartDocument load_chart(const std::string& path);
std::string print_chart(const ChartDocument& doc);

/// Field-by-field comparison of two documents (source positions ignored).
bool same_document(const ChartDocument& a, const ChartDocument& b);

}  // namespace kdvchart
