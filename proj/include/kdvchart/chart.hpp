#pragma once

#include "kdvchart/calculus.hpp"
#include "kdvchart/pseudo_op.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace kdvchart {

struct SourcePos {
  int line = 0;
  int col = 0;
};

/// Node of the chart: multiplier * field_t = rhs, with a recursion operator
/// and the seed from which the hierarchy is generated.
struct EquationDef {
  std::string name;
  std::string field;
  JetExpr rhs;
  JetExpr multiplier{1};
  PseudoOp recursion;
  JetExpr seed;
  int seed_power = 1;  // multiplier^-1 * rhs = recursion^seed_power (seed)
  SourcePos pos;

  JetExpr flow() const { return rhs / multiplier; }
  bool has_operator() const { return !recursion.is_zero(); }
};

enum class LinkKind { Differential, Reciprocal, Invariance };
std::string to_string(LinkKind k);

/// A relation between two fields, or a transformation of one field into
/// itself. For differential links `rule` solves one field's jet in terms of
/// the other. For invariances the transformed field is named `hat_field`,
/// the relation is hat^power - image, and rule maps hat^power to image.
struct BacklundLink {
  std::string name;
  LinkKind kind = LinkKind::Differential;
  std::string from;  // equation names; equal for invariances
  std::string to;
  std::string from_field;
  std::string to_field;
  JetExpr relation;
  std::optional<SubstitutionRule> rule;
  // invariance data
  int power = 1;
  std::vector<std::string> params;
  std::string loop;
  bool cited = false;
  std::vector<std::string> assumptions;
  // Derived invariances of a solved field are parametric: the field is
  // R(parameter) and its image is rule->value, both in parameter_field.
  std::string parameter_field;
  JetExpr parameter_value;
  SourcePos pos;

  /// The field the rule solves for and the field it is expressed in.
  std::string solved_field() const { return rule ? rule->field : std::string(); }
  std::string free_field() const;
  std::string hat_field() const { return from_field + "hat"; }
};

/// Named equations, links and invariances, in definition order.
class ChartRegistry {
 public:
  void add_equation(EquationDef eq);
  void add_link(BacklundLink link);

  const std::vector<EquationDef>& equations() const { return equations_; }
  const std::vector<BacklundLink>& links() const { return links_; }
  bool empty() const { return equations_.empty() && links_.empty(); }

  const EquationDef& equation(const std::string& name) const;
  const EquationDef* find_equation(const std::string& name) const;
  const EquationDef* equation_for_field(const std::string& field) const;
  const BacklundLink& link(const std::string& name) const;
  const BacklundLink* find_link(const std::string& name) const;

 private:
  std::vector<EquationDef> equations_;
  std::vector<BacklundLink> links_;
};

class UnknownName : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

enum class Verdict { Verified, Failed, Deferred };
std::string to_string(Verdict v);

/// One named identity established (or not) on the way to a verdict.
struct ReportStep {
  std::string label;
  std::string lhs;
  std::string rhs;
  std::string residual;
  bool holds = false;
};

struct VerificationReport {
  std::string subject;
  std::string method;  // symbolic-reduction | numeric-transport | ...
  Verdict verdict = Verdict::Failed;
  std::string residual;  // symbolic residual, or empty for numeric checks
  std::vector<double> norms;
  std::vector<std::string> assumptions;
  std::vector<ReportStep> steps;
  std::string message;

  bool ok() const { return verdict == Verdict::Verified; }
};

/// Registry self-consistency: multiplier^-1 * rhs = recursion^power (seed).
VerificationReport verify_equation(const EquationDef& eq);

/// Proof by substitution: pushes each flow through the link and reduces the
/// discrepancy to zero.
VerificationReport verify_link_symbolic(const ChartRegistry& reg, const BacklundLink& link);

class KindMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Joins two differential links through their shared field.
BacklundLink compose_links(const ChartRegistry& reg, const BacklundLink& l1, const BacklundLink& l2);

/// True when two relations agree up to a nonzero constant factor.
bool same_relation(const JetExpr& a, const JetExpr& b);

/// Pulls an invariance of the link's other endpoint back across the link.
BacklundLink derive_invariance(const ChartRegistry& reg, const BacklundLink& link, const BacklundLink& inv);

VerificationReport verify_invariance(const ChartRegistry& reg, const EquationDef& eq, const BacklundLink& inv);

/// Recursion operator of `to`, obtained by conjugating the one of `from`
/// through the link.
PseudoOp derive_recursion(const ChartRegistry& reg, const std::string& from, const std::string& to,
                          const BacklundLink& via);

/// Rules that rewrite every jet of the link's solved field in terms of the free field.
SubstitutionSet restriction_rules(const BacklundLink& link);

/// Hierarchy member n of an equation: recursion^(n - 1 + seed_power) (seed).
std::vector<JetExpr> hierarchy(const EquationDef& eq, int n);

enum class ChartFormat { Json, Dot };
/// Graph document. hierarchy_level > 1 relabels nodes with the order of the
/// n-th member.
std::string export_chart(const ChartRegistry& reg, ChartFormat format, int hierarchy_level = 1);

/// Substitutes z_k -> Z * P_k where Z^m = y and P_k are the logarithmic
/// derivative polynomials of y; succeeds when the result is homogeneous of a
/// degree divisible by m. Used to eliminate a field known only through a power.
std::optional<JetExpr> eliminate_through_power(const JetExpr& e, const std::string& z, int m, const JetExpr& y);

}  // namespace kdvchart
