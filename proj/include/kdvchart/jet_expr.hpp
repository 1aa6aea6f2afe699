#pragma once

#include "kdvchart/poly.hpp"

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kdvchart {

/// Highest x-derivative order a jet variable may carry.
inline constexpr int kMaxJetOrder = 12;

class JetExpr;

/// Thrown when an operation would create a jet variable above kMaxJetOrder.
class JetOrderOverflow : public std::runtime_error {
 public:
  JetOrderOverflow(const std::string& field, int order);
  const std::string& field() const { return field_; }
  int order() const { return order_; }

 private:
  std::string field_;
  int order_;
};

class DivisionByZero : public std::domain_error {
 public:
  DivisionByZero() : std::domain_error("division by the zero expression") {}
};

enum class AtomKind { Jet, Param, Nonlocal };

/// Interned symbol: a jet variable u^(k), a constant parameter, or a nonlocal
/// antiderivative D^-1(body) taken from -infinity.
struct AtomInfo {
  AtomKind kind;
  std::string name;  // field name for jets, parameter name for params
  int order = 0;     // derivative order for jets
  std::shared_ptr<const JetExpr> body;  // nonlocal atoms only
  int depth = 0;     // nonlocal nesting depth, 0 for local atoms
  std::string sort_key;  // interning-order-independent ordering key
};

/// Process-wide interning table. Lookups are lock-free; insertions serialize.
namespace atoms {
VarId jet(const std::string& field, int order);
VarId param(const std::string& name);
/// Returns the atom for D^-1(body); `body` must already be canonical.
VarId nonlocal(const JetExpr& body);
const AtomInfo& info(VarId id);
std::size_t count();
}  // namespace atoms

/// Rational function over interned atoms with exact rational coefficients,
/// always held in canonical form: numerator and denominator coprime, and the
/// denominator scaled so that its leading term (by stable key order) is monic.
class JetExpr {
 public:
  JetExpr() : den_(1) {}
  JetExpr(const Rational& c) : num_(c), den_(1) {}  // NOLINT(google-explicit-constructor)
  JetExpr(long c) : JetExpr(Rational(c)) {}  // NOLINT(google-explicit-constructor)

  static JetExpr jet(const std::string& field, int order = 0);
  static JetExpr param(const std::string& name);
  static JetExpr atom(VarId id);
  /// Raw D^-1(body) atom without exactness reduction (see make_dinv).
  static JetExpr nonlocal(const JetExpr& body);
  static JetExpr fraction(Poly num, Poly den);

  const Poly& num() const { return num_; }
  const Poly& den() const { return den_; }

  bool is_zero() const { return num_.is_zero(); }
  bool is_constant() const { return num_.is_constant() && den_.is_constant(); }
  Rational constant_value() const;
  bool is_polynomial() const { return den_.is_constant(); }

  JetExpr operator-() const;
  JetExpr& operator+=(const JetExpr& o);
  JetExpr& operator-=(const JetExpr& o);
  JetExpr& operator*=(const JetExpr& o);
  JetExpr& operator/=(const JetExpr& o);
  friend JetExpr operator+(JetExpr a, const JetExpr& b) { return a += b; }
  friend JetExpr operator-(JetExpr a, const JetExpr& b) { return a -= b; }
  friend JetExpr operator*(JetExpr a, const JetExpr& b) { return a *= b; }
  friend JetExpr operator/(JetExpr a, const JetExpr& b) { return a /= b; }
  JetExpr pow(int n) const;
  JetExpr inverse() const;

  /// Syntactic equality of canonical forms.
  friend bool operator==(const JetExpr& a, const JetExpr& b) { return a.num_ == b.num_ && a.den_ == b.den_; }
  friend bool operator!=(const JetExpr& a, const JetExpr& b) { return !(a == b); }

  /// Every atom id appearing at the top level (not inside nonlocal bodies).
  std::vector<VarId> atoms() const;
  /// Atoms including those nested inside nonlocal bodies.
  std::vector<VarId> atoms_deep() const;
  std::vector<std::string> fields() const;
  bool has_nonlocal() const;
  int nonlocal_depth() const;
  /// Highest derivative order of `field` (including inside bodies), -1 if absent.
  int max_order(const std::string& field) const;

  std::string str() const;
  std::size_t hash() const { return num_.hash() * 31 + den_.hash(); }

 private:
  Poly num_;
  Poly den_;
};

/// Returns the canonical form; every JetExpr is already canonical, so this is
/// the identity and exists for API symmetry.
inline JetExpr normalize(const JetExpr& e) { return e; }

/// Renders a polynomial with atoms printed in DSL syntax.
std::string to_string(const Poly& p);
inline std::string to_string(const JetExpr& e) { return e.str(); }

/// Compares monomials by the stable sort keys of their atoms.
bool stable_less(const Monomial& a, const Monomial& b);

}  // namespace kdvchart
