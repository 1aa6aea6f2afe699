#include "kdvchart/pseudo_op.hpp"

#include <algorithm>
#include <map>
#include <random>

namespace kdvchart {

// ------------------------------------------------------------- PseudoOp

PseudoOp PseudoOp::identity() { return scalar(1); }

PseudoOp PseudoOp::scalar(const Rational& c) {
  PseudoOp op;
  if (c != 0) op.terms_.push_back({c, {}});
  return op;
}

PseudoOp PseudoOp::d(int power) {
  if (power < 0) return dinv(-power);
  PseudoOp op;
  op.terms_.push_back({1, std::vector<OpFactor>(static_cast<std::size_t>(power), OpFactor::d())});
  return op;
}

PseudoOp PseudoOp::dinv(int power) {
  if (power < 0) return d(-power);
  PseudoOp op;
  op.terms_.push_back({1, std::vector<OpFactor>(static_cast<std::size_t>(power), OpFactor::dinv())});
  return op;
}

PseudoOp PseudoOp::mul(const JetExpr& e) {
  PseudoOp op;
  op.terms_.push_back({1, {OpFactor::mul(e)}});
  op.normalize();
  return op;
}

PseudoOp PseudoOp::from_terms(std::vector<OpTerm> terms) {
  PseudoOp op;
  op.terms_ = std::move(terms);
  op.normalize();
  return op;
}

bool PseudoOp::is_identity() const {
  return terms_.size() == 1 && terms_[0].factors.empty() && terms_[0].weight == 1;
}

void PseudoOp::normalize() {
  std::vector<OpTerm> cleaned;
  for (auto& term : terms_) {
    Rational weight = term.weight;
    std::vector<OpFactor> out;
    bool zero = weight == 0;
    for (auto& f : term.factors) {
      if (zero) break;
      switch (f.kind) {
        case OpFactor::Kind::Mul: {
          JetExpr c = f.coeff;
          if (!out.empty() && out.back().kind == OpFactor::Kind::Mul) {
            c = out.back().coeff * c;
            out.pop_back();
          }
          if (c.is_zero()) {
            zero = true;
          } else if (c.is_constant()) {
            weight *= c.constant_value();
          } else {
            out.push_back(OpFactor::mul(std::move(c)));
          }
          break;
        }
        case OpFactor::Kind::D:
          if (!out.empty() && out.back().kind == OpFactor::Kind::Dinv)
            out.pop_back();  // D^-1 D = 1 on decaying fields
          else
            out.push_back(OpFactor::d());
          break;
        case OpFactor::Kind::Dinv:
          if (!out.empty() && out.back().kind == OpFactor::Kind::D)
            out.pop_back();
          else
            out.push_back(OpFactor::dinv());
          break;
      }
    }
    if (zero || weight == 0) continue;
    bool merged = false;
    for (auto& existing : cleaned) {
      if (existing.factors == out) {
        existing.weight += weight;
        merged = true;
        break;
      }
    }
    if (!merged) cleaned.push_back({weight, std::move(out)});
  }
  std::erase_if(cleaned, [](const OpTerm& t) { return t.weight == 0; });
  terms_ = std::move(cleaned);
}

PseudoOp PseudoOp::operator-() const {
  PseudoOp r = *this;
  for (auto& t : r.terms_) t.weight = -t.weight;
  return r;
}

PseudoOp operator+(const PseudoOp& a, const PseudoOp& b) {
  std::vector<OpTerm> terms = a.terms_;
  terms.insert(terms.end(), b.terms_.begin(), b.terms_.end());
  return PseudoOp::from_terms(std::move(terms));
}

PseudoOp operator*(const PseudoOp& a, const PseudoOp& b) {
  std::vector<OpTerm> terms;
  for (const auto& s : a.terms_) {
    for (const auto& t : b.terms_) {
      OpTerm c{s.weight * t.weight, s.factors};
      c.factors.insert(c.factors.end(), t.factors.begin(), t.factors.end());
      terms.push_back(std::move(c));
    }
  }
  return PseudoOp::from_terms(std::move(terms));
}

PseudoOp operator*(const Rational& c, const PseudoOp& a) { return PseudoOp::scalar(c) * a; }

PseudoOp PseudoOp::pow(int n) const {
  if (n < 0) throw std::invalid_argument("negative operator power");
  PseudoOp r = identity();
  for (int i = 0; i < n; ++i) r = r * *this;
  return r;
}

bool operator==(const PseudoOp& a, const PseudoOp& b) {
  if (a.terms_.size() != b.terms_.size()) return false;
  for (const auto& t : a.terms_) {
    bool found = std::any_of(b.terms_.begin(), b.terms_.end(),
                             [&](const OpTerm& u) { return u.weight == t.weight && u.factors == t.factors; });
    if (!found) return false;
  }
  return true;
}

std::vector<std::string> PseudoOp::fields() const {
  std::vector<std::string> out;
  for (const auto& t : terms_)
    for (const auto& f : t.factors)
      if (f.kind == OpFactor::Kind::Mul) {
        auto fs = f.coeff.fields();
        out.insert(out.end(), fs.begin(), fs.end());
      }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

std::string factor_word(const std::vector<OpFactor>& fs, std::size_t from = 0) {
  std::string out;
  for (std::size_t i = from; i < fs.size();) {
    if (!out.empty()) out += "*";
    const auto& f = fs[i];
    if (f.kind == OpFactor::Kind::Mul) {
      out += "[" + f.coeff.str() + "]";
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < fs.size() && fs[j].kind == f.kind) ++j;
    out += f.kind == OpFactor::Kind::D ? "D" : "Dinv";
    if (j - i > 1) out += "^" + std::to_string(j - i);
    i = j;
  }
  return out;
}

}  // namespace

std::string PseudoOp::str() const {
  if (terms_.empty()) return "0";
  std::string out;
  bool first = true;
  for (const auto& t : terms_) {
    Rational w = t.weight;
    bool neg = w < 0;
    if (neg) w = -w;
    if (first)
      out += neg ? "-" : "";
    else
      out += neg ? " - " : " + ";
    first = false;
    std::string word = factor_word(t.factors);
    if (word.empty())
      out += w.get_str();
    else if (w == 1)
      out += word;
    else
      out += w.get_str() + "*" + word;
  }
  return out;
}

// ------------------------------------------------------------ application

OperatorOrderOverflow::OperatorOrderOverflow(const JetOrderOverflow& base, std::string term)
    : JetOrderOverflow(base), term_(std::move(term)) {
  message_ = std::string(base.what()) + " while applying term " + term_;
}

JetExpr op_apply(const PseudoOp& op, const JetExpr& e) {
  std::map<std::string, JetExpr> suffix_cache;
  JetExpr total;
  for (const auto& term : op.terms()) {
    try {
      JetExpr cur = e;
      std::size_t start = term.factors.size();
      // Reuse the longest already-evaluated suffix.
      for (std::size_t i = 0; i < term.factors.size(); ++i) {
        auto it = suffix_cache.find(factor_word(term.factors, i));
        if (it != suffix_cache.end()) {
          cur = it->second;
          start = i;
          break;
        }
      }
      for (std::size_t i = start; i-- > 0;) {
        const auto& f = term.factors[i];
        switch (f.kind) {
          case OpFactor::Kind::Mul:
            cur = f.coeff * cur;
            break;
          case OpFactor::Kind::D:
            cur = total_derivative(cur);
            break;
          case OpFactor::Kind::Dinv:
            cur = make_dinv(cur);
            break;
        }
        suffix_cache.emplace(factor_word(term.factors, i), cur);
      }
      total += JetExpr(term.weight) * cur;
    } catch (const OperatorOrderOverflow&) {
      throw;
    } catch (const JetOrderOverflow& ex) {
      throw OperatorOrderOverflow(ex, factor_word(term.factors));
    }
  }
  return total;
}

PseudoOp op_compose(const PseudoOp& a, const PseudoOp& b) { return a * b; }

namespace {

PseudoOp map_coefficients(const PseudoOp& op, const std::function<JetExpr(const JetExpr&)>& fn) {
  std::vector<OpTerm> terms = op.terms();
  for (auto& t : terms)
    for (auto& f : t.factors)
      if (f.kind == OpFactor::Kind::Mul) f.coeff = fn(f.coeff);
  return PseudoOp::from_terms(std::move(terms));
}

}  // namespace

PseudoOp substitute(const PseudoOp& op, const SubstitutionSet& rules) {
  return map_coefficients(op, [&](const JetExpr& e) { return substitute(e, rules); });
}

PseudoOp rename_fields(const PseudoOp& op, const std::map<std::string, std::string>& renames) {
  return map_coefficients(op, [&](const JetExpr& e) { return rename_fields(e, renames); });
}

// ------------------------------------------------------------- linearize

std::optional<std::pair<PseudoOp, std::string>> invert_first_order(const JetExpr& c0, const JetExpr& c1) {
  if (c1.is_zero()) {
    if (c0.is_zero()) return std::nullopt;
    return std::make_pair(PseudoOp::mul(c0.inverse()), "Mul(" + c0.str() + ")^-1 = Mul(" + c0.inverse().str() + ")");
  }
  if (c0.is_zero()) {
    return std::make_pair(PseudoOp::dinv() * PseudoOp::mul(c1.inverse()),
                          "(Mul(" + c1.str() + ") D)^-1 = Dinv Mul(" + c1.inverse().str() + ")");
  }
  // c1 (D + r) with r = c0 / c1; (D + r)^-1 = mu^-1 Dinv mu when D(mu)/mu = r.
  JetExpr r = c0 / c1;
  for (const Poly& cand : {r.den(), r.num()}) {
    if (cand.is_constant()) continue;
    JetExpr p = JetExpr::fraction(cand, Poly(1));
    JetExpr dp = total_derivative(p);
    if (dp.is_zero()) continue;
    JetExpr ratio = r * p / dp;
    if (!ratio.is_constant()) continue;
    Rational k = ratio.constant_value();
    if (k.get_den() != 1) continue;
    int power = static_cast<int>(k.get_num().get_si());
    JetExpr mu = p.pow(power);
    PseudoOp inv = PseudoOp::mul(mu.inverse()) * PseudoOp::dinv() * PseudoOp::mul(mu) * PseudoOp::mul(c1.inverse());
    return std::make_pair(inv, "gauge: (D + " + r.str() + ")^-1 = Mul(" + mu.inverse().str() + ") Dinv Mul(" +
                                   mu.str() + ")");
  }
  return std::nullopt;
}

LinearBTOperator linearize(const JetExpr& relation, const std::string& field, const SubstitutionSet& restriction) {
  const std::string dir = "q__lin";
  JetExpr lin = frechet_derivative(relation, field, dir);
  if (lin.has_nonlocal()) throw std::invalid_argument("linearize expects a local relation");
  int top = lin.max_order(dir);
  LinearBTOperator out;
  out.field = field;
  std::vector<JetExpr> coeffs;
  for (int k = 0; k <= top; ++k) {
    JetExpr c = partial(lin, atoms::jet(dir, k));
    if (c.max_order(dir) >= 0) throw std::invalid_argument("relation linearization is not linear");
    if (!restriction.rules().empty()) c = substitute(c, restriction);
    coeffs.push_back(c);
    out.op = out.op + PseudoOp::mul(c) * PseudoOp::d(k);
  }
  if (coeffs.size() <= 2) {
    JetExpr c0 = coeffs.empty() ? JetExpr() : coeffs[0];
    JetExpr c1 = coeffs.size() > 1 ? coeffs[1] : JetExpr();
    if (auto inv = invert_first_order(c0, c1)) {
      out.inverse = inv->first;
      out.certificate = inv->second;
    }
  }
  return out;
}

TransformationOperator transformation_operator(const JetExpr& relation, const std::string& from, const std::string& to,
                                               const SubstitutionSet& restriction) {
  TransformationOperator t;
  t.b_from = linearize(relation, from, restriction);
  t.b_to = linearize(relation, to, restriction);
  if (!t.b_to.inverse)
    throw NonInvertibleOperator("non-invertible Frechet operator B_" + to + " = " + t.b_to.op.str());
  if (!t.b_from.inverse)
    throw NonInvertibleOperator("non-invertible Frechet operator B_" + from + " = " + t.b_from.op.str());
  t.pi = -(*t.b_to.inverse * t.b_from.op);
  t.pi_inverse = -(*t.b_from.inverse * t.b_to.op);
  return t;
}

PseudoOp conjugate_recursion_operator(const PseudoOp& phi, const JetExpr& relation, const std::string& from,
                                      const std::string& to, const SubstitutionSet& restriction) {
  if (from == to) return phi;
  auto t = transformation_operator(relation, from, to, restriction);
  PseudoOp restricted = substitute(phi, restriction);
  for (const auto& f : restricted.fields())
    if (f == from) throw UnresolvableJet(from, 0, 0);
  return t.pi * restricted * t.pi_inverse;
}

std::vector<JetExpr> hierarchy_generate(const PseudoOp& op, const JetExpr& seed, int n) {
  if (n < 1) throw std::invalid_argument("hierarchy order must be at least 1");
  std::vector<JetExpr> out;
  JetExpr cur = seed;
  for (int k = 0; k < n; ++k) {
    cur = op_apply(op, cur);
    out.push_back(cur);
  }
  return out;
}

// ------------------------------------------------------------------ probes

JetExpr random_polynomial(const std::string& field, unsigned seed, int max_order, int terms) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> order(0, max_order);
  std::uniform_int_distribution<int> factors(1, 3);
  static const Rational coeffs[] = {Rational(1), Rational(-1), Rational(2), Rational(1, 2), Rational(-3, 2), Rational(3)};
  std::uniform_int_distribution<int> pick(0, 5);
  JetExpr out;
  for (int attempt = 0; out.is_zero() && attempt < 16; ++attempt) {
    for (int t = 0; t < terms; ++t) {
      JetExpr m(coeffs[pick(rng)]);
      int nf = factors(rng);
      for (int i = 0; i < nf; ++i) m *= JetExpr::jet(field, order(rng));
      out += m;
    }
  }
  return out;
}

std::vector<JetExpr> probe_family(const std::string& field, int random_count, unsigned seed) {
  JetExpr f = JetExpr::jet(field, 0);
  JetExpr fx = JetExpr::jet(field, 1);
  JetExpr fxx = JetExpr::jet(field, 2);
  std::vector<JetExpr> out{fx, f * fx, fxx / f};
  for (int i = 0; i < random_count; ++i) out.push_back(random_polynomial(field, seed * 7919U + static_cast<unsigned>(i)));
  return out;
}

std::vector<SymbolicProbe> symbolic_compare(const PseudoOp& a, const PseudoOp& b, const std::vector<JetExpr>& probes) {
  std::vector<SymbolicProbe> out;
  for (const auto& p : probes) {
    JetExpr diff = op_apply(a, p) - op_apply(b, p);
    ZeroTest z = test_zero(diff);
    out.push_back({p.str(), z.verdict, z.residual.str()});
  }
  return out;
}

}  // namespace kdvchart
