#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace kdvchart {

using Rational = mpq_class;
using Integer = mpz_class;

using VarId = std::uint32_t;

/// Power product of variables, stored as (variable, exponent) pairs sorted by
/// variable id with strictly positive exponents.
class Monomial {
 public:
  using Factor = std::pair<VarId, int>;

  Monomial() = default;
  explicit Monomial(VarId v, int exp = 1);
  explicit Monomial(std::vector<Factor> factors);

  const std::vector<Factor>& factors() const { return factors_; }
  bool is_one() const { return factors_.empty(); }
  int degree(VarId v) const;
  int total_degree() const;
  bool contains(VarId v) const { return degree(v) > 0; }

  Monomial operator*(const Monomial& other) const;
  /// Caller guarantees divisibility.
  Monomial operator/(const Monomial& other) const;
  bool divides(const Monomial& other) const;
  Monomial without(VarId v) const;

  friend Monomial gcd(const Monomial& a, const Monomial& b);

  friend bool operator==(const Monomial& a, const Monomial& b) { return a.factors_ == b.factors_; }
  friend bool operator!=(const Monomial& a, const Monomial& b) { return !(a == b); }
  /// Lexicographic order, smaller variable ids are more significant.
  friend bool operator<(const Monomial& a, const Monomial& b);

  std::size_t hash() const;

 private:
  std::vector<Factor> factors_;
};

/// Sparse multivariate polynomial with exact rational coefficients. Terms are
/// kept sorted by descending monomial order and never carry zero coefficients.
class Poly {
 public:
  struct Term {
    Monomial mono;
    Rational coeff;
  };

  Poly() = default;
  Poly(const Rational& c);  // NOLINT(google-explicit-constructor)
  Poly(long c) : Poly(Rational(c)) {}  // NOLINT(google-explicit-constructor)
  static Poly variable(VarId v, int exp = 1);
  static Poly monomial(Monomial m, Rational c);
  static Poly from_terms(std::vector<Term> terms);

  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const;
  bool is_monomial() const { return terms_.size() == 1; }
  Rational constant_value() const;
  std::size_t size() const { return terms_.size(); }

  const Term& leading() const { return terms_.front(); }
  const Rational& leading_coeff() const { return terms_.front().coeff; }

  std::vector<VarId> variables() const;
  bool contains(VarId v) const;
  int degree(VarId v) const;
  /// Smallest exponent of each variable over all terms.
  Monomial monomial_content() const;

  Poly operator-() const;
  Poly& operator+=(const Poly& o);
  Poly& operator-=(const Poly& o);
  Poly& operator*=(const Poly& o);
  Poly& operator*=(const Rational& c);
  friend Poly operator+(Poly a, const Poly& b) { return a += b; }
  friend Poly operator-(Poly a, const Poly& b) { return a -= b; }
  friend Poly operator*(const Poly& a, const Poly& b);
  friend Poly operator*(Poly a, const Rational& c) { return a *= c; }
  Poly pow(unsigned n) const;
  Poly mul_monomial(const Monomial& m) const;
  /// Divides every term by m; caller guarantees divisibility.
  Poly div_monomial(const Monomial& m) const;

  /// Exact quotient if `d` divides this polynomial, nothing otherwise.
  bool try_divide(const Poly& d, Poly& quotient) const;
  /// Throws if `d` does not divide exactly.
  Poly exact_div(const Poly& d) const;

  Poly derivative(VarId v) const;

  /// Coefficients of this polynomial seen as univariate in `v`.
  std::map<int, Poly> collect(VarId v) const;
  static Poly from_collected(VarId v, const std::map<int, Poly>& parts);

  /// Divides by the leading coefficient so that the leading term is monic.
  Poly monic() const;

  friend bool operator==(const Poly& a, const Poly& b);
  friend bool operator!=(const Poly& a, const Poly& b) { return !(a == b); }

  std::size_t hash() const;

 private:
  void canonicalize();
  std::vector<Term> terms_;
};

/// Greatest common divisor over Q, normalized to be monic. gcd(0, 0) = 0.
Poly gcd(const Poly& a, const Poly& b);

/// Content of `p` seen as a univariate polynomial in `v`.
Poly content(const Poly& p, VarId v);

}  // namespace kdvchart
