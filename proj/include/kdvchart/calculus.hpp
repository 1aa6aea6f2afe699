#pragma once

#include "kdvchart/jet_expr.hpp"

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace kdvchart {

/// Total x-derivative. D(u^(k)) = u^(k+1), D(D^-1(f)) = f, D(param) = 0.
JetExpr total_derivative(const JetExpr& e);
JetExpr total_derivative(const JetExpr& e, int times);

/// Partial derivative with respect to a single atom (other atoms held fixed).
JetExpr partial(const JetExpr& e, VarId atom);

/// Gateaux derivative d/de e[field + e*direction] at e = 0. Nonlocal atoms are
/// differentiated under the integral sign.
JetExpr frechet_derivative(const JetExpr& e, const std::string& field, const std::string& direction);
/// Same, with an arbitrary expression as the direction.
JetExpr frechet_derivative(const JetExpr& e, const std::string& field, const JetExpr& direction);

/// D^-1(e) from -infinity: an exact antiderivative when one exists (zero
/// integration constant), otherwise a nonlocal atom. Rational scalars are
/// pulled out of the atom.
JetExpr make_dinv(const JetExpr& e);

class UnresolvableJet : public std::runtime_error {
 public:
  UnresolvableJet(const std::string& field, int order, int seed_order);
};

/// One substitution rule: the jet `field^(order)` is replaced by `value`, and
/// every higher jet of `field` by the corresponding x-derivative of `value`.
struct SubstitutionRule {
  std::string field;
  int order = 0;
  JetExpr value;
};

/// A set of prolonged substitution rules with a lazily filled cache of
/// derivatives. Copies share nothing; the cache is guarded for concurrent use.
class SubstitutionSet {
 public:
  SubstitutionSet() = default;
  SubstitutionSet(std::initializer_list<SubstitutionRule> rules);
  explicit SubstitutionSet(std::vector<SubstitutionRule> rules);
  SubstitutionSet(const SubstitutionSet& o);
  SubstitutionSet& operator=(const SubstitutionSet& o);

  void add(SubstitutionRule rule);
  const std::vector<SubstitutionRule>& rules() const { return rules_; }
  bool covers(const std::string& field) const;
  const SubstitutionRule* rule_for(const std::string& field) const;

  /// Image of the jet field^(order); throws UnresolvableJet below the seed order.
  JetExpr image(const std::string& field, int order) const;

 private:
  std::vector<SubstitutionRule> rules_;
  mutable std::map<std::pair<std::string, int>, JetExpr> cache_;
  mutable std::mutex mutex_;
};

/// Replaces jets per `rules` everywhere, including inside nonlocal bodies.
JetExpr substitute(const JetExpr& e, const SubstitutionSet& rules);

/// Generic atom replacement. `image` returns the replacement for an atom or
/// nothing to keep it. Nonlocal bodies are rewritten recursively and
/// re-integrated through make_dinv when they change.
JetExpr substitute_atoms(const JetExpr& e, const std::function<std::optional<JetExpr>(VarId)>& image);

/// Renames fields (jets and nonlocal bodies alike).
JetExpr rename_fields(const JetExpr& e, const std::map<std::string, std::string>& renames);

/// Returned when an expression is not a total derivative inside the class of
/// rational differential functions. `witness` is the variational derivative
/// with respect to each field (nonzero for a genuine obstruction; may be zero
/// when the obstruction is logarithmic).
struct NotExact {
  std::string reason;
  std::map<std::string, JetExpr> witness;
};

using IntegrationResult = std::variant<JetExpr, NotExact>;

/// Finds g with D(g) = e and g vanishing with its integrand at -infinity.
IntegrationResult integrate_exact(const JetExpr& e);
inline bool is_exact(const IntegrationResult& r) { return std::holds_alternative<JetExpr>(r); }

/// Euler-Lagrange operator sum_k (-D)^k de/du_k. `e` must be local.
JetExpr euler_operator(const JetExpr& e, const std::string& field);

enum class ZeroVerdict { Zero, NonZero, Undecided };

struct ZeroTest {
  ZeroVerdict verdict;
  JetExpr residual;  // reduced form; zero iff verdict is Zero
  int relations_used = 0;
};

/// Semantic zero test. Beyond canonical-form comparison it eliminates
/// constant-coefficient linear relations among nonlocal atoms whose integrands
/// differ by an exact derivative, so that equal expressions written through
/// different antiderivatives compare equal.
ZeroTest test_zero(const JetExpr& e);
inline bool equivalent(const JetExpr& a, const JetExpr& b) { return test_zero(a - b).verdict == ZeroVerdict::Zero; }

/// Exact nullspace of a rational matrix given as rows.
std::vector<std::vector<Rational>> rational_nullspace(const std::vector<std::vector<Rational>>& rows, std::size_t cols);

}  // namespace kdvchart
