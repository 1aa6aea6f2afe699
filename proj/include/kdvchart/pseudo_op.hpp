#pragma once

#include "kdvchart/calculus.hpp"
#include "kdvchart/jet_expr.hpp"

#include <optional>
#include <string>
#include <vector>

namespace kdvchart {

/// One factor of an operator word: multiplication by an expression, the total
/// derivative D, or the antiderivative D^-1 from -infinity.
struct OpFactor {
  enum class Kind { Mul, D, Dinv };
  Kind kind = Kind::D;
  JetExpr coeff;  // Mul only

  static OpFactor mul(JetExpr e) { return {Kind::Mul, std::move(e)}; }
  static OpFactor d() { return {Kind::D, {}}; }
  static OpFactor dinv() { return {Kind::Dinv, {}}; }

  friend bool operator==(const OpFactor& a, const OpFactor& b) {
    return a.kind == b.kind && (a.kind != Kind::Mul || a.coeff == b.coeff);
  }
};

/// Weighted composition of factors. factors.front() acts last.
struct OpTerm {
  Rational weight{1};
  std::vector<OpFactor> factors;
};

/// Formal sum of compositions of {Mul, D, D^-1}. Always kept in normal form:
/// adjacent Mul factors merged, D D^-1 and D^-1 D cancelled (decaying fields),
/// constant multipliers folded into the weight, equal words combined.
class PseudoOp {
 public:
  PseudoOp() = default;  // the zero operator

  static PseudoOp identity();
  static PseudoOp d(int power = 1);
  static PseudoOp dinv(int power = 1);
  static PseudoOp mul(const JetExpr& e);
  static PseudoOp scalar(const Rational& c);
  static PseudoOp from_terms(std::vector<OpTerm> terms);

  const std::vector<OpTerm>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  bool is_identity() const;

  PseudoOp operator-() const;
  friend PseudoOp operator+(const PseudoOp& a, const PseudoOp& b);
  friend PseudoOp operator-(const PseudoOp& a, const PseudoOp& b) { return a + (-b); }
  /// Composition: (a * b)(f) = a(b(f)).
  friend PseudoOp operator*(const PseudoOp& a, const PseudoOp& b);
  friend PseudoOp operator*(const Rational& c, const PseudoOp& a);
  PseudoOp pow(int n) const;

  /// Factor-by-factor syntactic equality of normal forms.
  friend bool operator==(const PseudoOp& a, const PseudoOp& b);

  std::vector<std::string> fields() const;
  std::string str() const;

 private:
  void normalize();
  std::vector<OpTerm> terms_;
};

/// Thrown by op_apply when the jet-order ceiling is hit; names the term.
class OperatorOrderOverflow : public JetOrderOverflow {
 public:
  OperatorOrderOverflow(const JetOrderOverflow& base, std::string term);
  const std::string& term() const { return term_; }
  const char* what() const noexcept override { return message_.c_str(); }

 private:
  std::string term_;
  std::string message_;
};

/// Applies the operator, factors right to left. D^-1 integrates exactly when it
/// can and introduces a nonlocal atom otherwise.
JetExpr op_apply(const PseudoOp& op, const JetExpr& e);
PseudoOp op_compose(const PseudoOp& a, const PseudoOp& b);

PseudoOp substitute(const PseudoOp& op, const SubstitutionSet& rules);
PseudoOp rename_fields(const PseudoOp& op, const std::map<std::string, std::string>& renames);

/// Frechet derivative of a relation with respect to one field, as an operator
/// on the direction, together with how to invert it.
struct LinearBTOperator {
  std::string field;
  PseudoOp op;
  std::optional<PseudoOp> inverse;
  std::string certificate;  // human-readable inversion rule, empty if none
};

class NonInvertibleOperator : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linearizes `relation` in `field`; coefficients are then rewritten through
/// `restriction` (which may be empty) before an inverse is sought.
LinearBTOperator linearize(const JetExpr& relation, const std::string& field, const SubstitutionSet& restriction = {});

/// Inverse certificate search for an operator of the form sum_k Mul(c_k) D^k
/// with k <= 1.
std::optional<std::pair<PseudoOp, std::string>> invert_first_order(const JetExpr& c0, const JetExpr& c1);

/// Pi^{-1} pair for a relation B(from, to) = 0: Pi = -B_to^{-1} B_from.
struct TransformationOperator {
  LinearBTOperator b_from;
  LinearBTOperator b_to;
  PseudoOp pi;
  PseudoOp pi_inverse;
};

TransformationOperator transformation_operator(const JetExpr& relation, const std::string& from, const std::string& to,
                                               const SubstitutionSet& restriction);

/// Psi = Pi Phi Pi^{-1} with every `from` jet rewritten through `restriction`.
PseudoOp conjugate_recursion_operator(const PseudoOp& phi, const JetExpr& relation, const std::string& from,
                                      const std::string& to, const SubstitutionSet& restriction);

/// [op^1 seed, ..., op^n seed].
std::vector<JetExpr> hierarchy_generate(const PseudoOp& op, const JetExpr& seed, int n);

/// Per-probe outcome of symbolic operator comparison.
struct SymbolicProbe {
  std::string probe;
  ZeroVerdict verdict;
  std::string residual;
};

/// Standard probe family for a field: f_x, f*f_x, f_xx/f, followed by
/// `random_count` seeded random polynomial probes.
std::vector<JetExpr> probe_family(const std::string& field, int random_count, unsigned seed);

/// Random polynomial in the jets of `field` (orders 0..max_order) with small
/// rational coefficients; used by probes and property tests.
JetExpr random_polynomial(const std::string& field, unsigned seed, int max_order = 2, int terms = 3);

std::vector<SymbolicProbe> symbolic_compare(const PseudoOp& a, const PseudoOp& b, const std::vector<JetExpr>& probes);

}  // namespace kdvchart
