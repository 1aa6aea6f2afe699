#include "kdvchart/poly.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace kdvchart {

// ---------------------------------------------------------------- Monomial

Monomial::Monomial(VarId v, int exp) {
  if (exp > 0) factors_.emplace_back(v, exp);
}

Monomial::Monomial(std::vector<Factor> factors) : factors_(std::move(factors)) {
  std::sort(factors_.begin(), factors_.end());
  std::vector<Factor> merged;
  for (const auto& f : factors_) {
    if (!merged.empty() && merged.back().first == f.first)
      merged.back().second += f.second;
    else
      merged.push_back(f);
  }
  std::erase_if(merged, [](const Factor& f) { return f.second == 0; });
  factors_ = std::move(merged);
}

int Monomial::degree(VarId v) const {
  for (const auto& [var, e] : factors_)
    if (var == v) return e;
  return 0;
}

int Monomial::total_degree() const {
  int d = 0;
  for (const auto& f : factors_) d += f.second;
  return d;
}

Monomial Monomial::operator*(const Monomial& other) const {
  Monomial r;
  auto& out = r.factors_;
  out.reserve(factors_.size() + other.factors_.size());
  auto i = factors_.begin();
  auto j = other.factors_.begin();
  while (i != factors_.end() || j != other.factors_.end()) {
    if (j == other.factors_.end() || (i != factors_.end() && i->first < j->first)) {
      out.push_back(*i++);
    } else if (i == factors_.end() || j->first < i->first) {
      out.push_back(*j++);
    } else {
      out.emplace_back(i->first, i->second + j->second);
      ++i;
      ++j;
    }
  }
  return r;
}

Monomial Monomial::operator/(const Monomial& other) const {
  Monomial r;
  auto j = other.factors_.begin();
  for (const auto& [v, e] : factors_) {
    while (j != other.factors_.end() && j->first < v) ++j;
    int d = e;
    if (j != other.factors_.end() && j->first == v) d -= j->second;
    if (d < 0) throw std::logic_error("Monomial division is not exact");
    if (d > 0) r.factors_.emplace_back(v, d);
  }
  return r;
}

bool Monomial::divides(const Monomial& other) const {
  auto j = other.factors_.begin();
  for (const auto& [v, e] : factors_) {
    while (j != other.factors_.end() && j->first < v) ++j;
    if (j == other.factors_.end() || j->first != v || j->second < e) return false;
  }
  return true;
}

Monomial Monomial::without(VarId v) const {
  Monomial r = *this;
  std::erase_if(r.factors_, [v](const Factor& f) { return f.first == v; });
  return r;
}

Monomial gcd(const Monomial& a, const Monomial& b) {
  Monomial r;
  auto j = b.factors_.begin();
  for (const auto& [v, e] : a.factors_) {
    while (j != b.factors_.end() && j->first < v) ++j;
    if (j != b.factors_.end() && j->first == v) r.factors_.emplace_back(v, std::min(e, j->second));
  }
  return r;
}

bool operator<(const Monomial& a, const Monomial& b) {
  auto i = a.factors_.begin();
  auto j = b.factors_.begin();
  while (i != a.factors_.end() && j != b.factors_.end()) {
    if (i->first != j->first) {
      // The monomial holding the smaller variable has a positive exponent
      // where the other has zero.
      return i->first > j->first;
    }
    if (i->second != j->second) return i->second < j->second;
    ++i;
    ++j;
  }
  return i == a.factors_.end() && j != b.factors_.end();
}

std::size_t Monomial::hash() const {
  std::size_t h = 0x9e3779b97f4a7c15ULL;
  for (const auto& [v, e] : factors_) {
    h ^= std::hash<std::uint64_t>{}((std::uint64_t(v) << 20) ^ std::uint64_t(e)) + 0x9e3779b9 + (h << 6) + (h >> 2);
  }
  return h;
}

// -------------------------------------------------------------------- Poly

Poly::Poly(const Rational& c) {
  if (c != 0) terms_.push_back({Monomial{}, c});
}

Poly Poly::variable(VarId v, int exp) { return monomial(Monomial(v, exp), Rational(1)); }

Poly Poly::monomial(Monomial m, Rational c) {
  Poly p;
  if (c != 0) p.terms_.push_back({std::move(m), std::move(c)});
  return p;
}

Poly Poly::from_terms(std::vector<Term> terms) {
  Poly p;
  p.terms_ = std::move(terms);
  p.canonicalize();
  return p;
}

void Poly::canonicalize() {
  std::sort(terms_.begin(), terms_.end(), [](const Term& a, const Term& b) { return b.mono < a.mono; });
  std::vector<Term> out;
  out.reserve(terms_.size());
  for (auto& t : terms_) {
    if (!out.empty() && out.back().mono == t.mono)
      out.back().coeff += t.coeff;
    else
      out.push_back(std::move(t));
  }
  std::erase_if(out, [](const Term& t) { return t.coeff == 0; });
  terms_ = std::move(out);
}

bool Poly::is_constant() const { return terms_.empty() || (terms_.size() == 1 && terms_[0].mono.is_one()); }

Rational Poly::constant_value() const {
  if (terms_.empty()) return 0;
  if (!is_constant()) throw std::logic_error("polynomial is not constant");
  return terms_[0].coeff;
}

std::vector<VarId> Poly::variables() const {
  std::vector<VarId> vs;
  for (const auto& t : terms_)
    for (const auto& f : t.mono.factors()) vs.push_back(f.first);
  std::sort(vs.begin(), vs.end());
  vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
  return vs;
}

bool Poly::contains(VarId v) const {
  return std::any_of(terms_.begin(), terms_.end(), [v](const Term& t) { return t.mono.contains(v); });
}

int Poly::degree(VarId v) const {
  int d = 0;
  for (const auto& t : terms_) d = std::max(d, t.mono.degree(v));
  return d;
}

Monomial Poly::monomial_content() const {
  if (terms_.empty()) return {};
  Monomial g = terms_.front().mono;
  for (const auto& t : terms_) {
    if (g.is_one()) break;
    g = gcd(g, t.mono);
  }
  return g;
}

Poly Poly::operator-() const {
  Poly r = *this;
  for (auto& t : r.terms_) t.coeff = -t.coeff;
  return r;
}

namespace {

// Merge two descending-sorted term lists, scaling the second by `sign`.
std::vector<Poly::Term> merge_terms(const std::vector<Poly::Term>& a, const std::vector<Poly::Term>& b, int sign) {
  std::vector<Poly::Term> out;
  out.reserve(a.size() + b.size());
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() || j != b.end()) {
    if (j == b.end() || (i != a.end() && j->mono < i->mono)) {
      out.push_back(*i++);
    } else if (i == a.end() || i->mono < j->mono) {
      out.push_back({j->mono, sign > 0 ? j->coeff : Rational(-j->coeff)});
      ++j;
    } else {
      Rational c = sign > 0 ? Rational(i->coeff + j->coeff) : Rational(i->coeff - j->coeff);
      if (c != 0) out.push_back({i->mono, std::move(c)});
      ++i;
      ++j;
    }
  }
  return out;
}

}  // namespace

Poly& Poly::operator+=(const Poly& o) {
  terms_ = merge_terms(terms_, o.terms_, +1);
  return *this;
}

Poly& Poly::operator-=(const Poly& o) {
  terms_ = merge_terms(terms_, o.terms_, -1);
  return *this;
}

Poly operator*(const Poly& a, const Poly& b) {
  if (a.is_zero() || b.is_zero()) return {};
  if (a.terms_.size() < b.terms_.size()) return b * a;
  if (b.is_monomial()) {
    Poly r = a.mul_monomial(b.terms_[0].mono);
    return r *= b.terms_[0].coeff;
  }
  std::vector<Poly::Term> terms;
  terms.reserve(a.terms_.size() * b.terms_.size());
  for (const auto& s : a.terms_)
    for (const auto& t : b.terms_) terms.push_back({s.mono * t.mono, s.coeff * t.coeff});
  return Poly::from_terms(std::move(terms));
}

Poly& Poly::operator*=(const Poly& o) {
  *this = *this * o;
  return *this;
}

Poly& Poly::operator*=(const Rational& c) {
  if (c == 0) {
    terms_.clear();
  } else {
    for (auto& t : terms_) t.coeff *= c;
  }
  return *this;
}

Poly Poly::pow(unsigned n) const {
  Poly result(1);
  Poly base = *this;
  while (n) {
    if (n & 1U) result *= base;
    n >>= 1U;
    if (n) base = base * base;
  }
  return result;
}

Poly Poly::mul_monomial(const Monomial& m) const {
  Poly r;
  r.terms_.reserve(terms_.size());
  for (const auto& t : terms_) r.terms_.push_back({t.mono * m, t.coeff});
  return r;  // order is preserved by multiplication with a fixed monomial
}

Poly Poly::div_monomial(const Monomial& m) const {
  Poly r;
  r.terms_.reserve(terms_.size());
  for (const auto& t : terms_) r.terms_.push_back({t.mono / m, t.coeff});
  return r;
}

bool Poly::try_divide(const Poly& d, Poly& quotient) const {
  if (d.is_zero()) throw std::domain_error("polynomial division by zero");
  quotient = Poly();
  if (is_zero()) return true;
  if (d.is_monomial()) {
    const auto& dm = d.terms_[0].mono;
    for (const auto& t : terms_)
      if (!dm.divides(t.mono)) return false;
    quotient = div_monomial(dm);
    quotient *= Rational(1 / d.terms_[0].coeff);
    return true;
  }
  const auto& lt = d.leading();
  // Quick rejection: every variable degree must be large enough.
  for (const auto& [v, e] : lt.mono.factors())
    if (degree(v) < e) return false;
  std::vector<Term> q;
  Poly r = *this;
  while (!r.is_zero()) {
    const auto& rt = r.leading();
    if (!lt.mono.divides(rt.mono)) return false;
    Term t{rt.mono / lt.mono, rt.coeff / lt.coeff};
    Poly sub = d.mul_monomial(t.mono);
    sub *= t.coeff;
    r -= sub;
    q.push_back(std::move(t));
  }
  quotient = from_terms(std::move(q));
  return true;
}

Poly Poly::exact_div(const Poly& d) const {
  Poly q;
  if (!try_divide(d, q)) throw std::logic_error("polynomial division is not exact");
  return q;
}

Poly Poly::derivative(VarId v) const {
  std::vector<Term> out;
  for (const auto& t : terms_) {
    int e = t.mono.degree(v);
    if (e == 0) continue;
    std::vector<Monomial::Factor> fs = t.mono.factors();
    for (auto& f : fs)
      if (f.first == v) f.second -= 1;
    out.push_back({Monomial(std::move(fs)), t.coeff * e});
  }
  return from_terms(std::move(out));
}

std::map<int, Poly> Poly::collect(VarId v) const {
  std::map<int, std::vector<Term>> parts;
  for (const auto& t : terms_) parts[t.mono.degree(v)].push_back({t.mono.without(v), t.coeff});
  std::map<int, Poly> out;
  for (auto& [e, ts] : parts) out.emplace(e, from_terms(std::move(ts)));
  return out;
}

Poly Poly::from_collected(VarId v, const std::map<int, Poly>& parts) {
  Poly r;
  for (const auto& [e, c] : parts) r += c.mul_monomial(Monomial(v, e));
  return r;
}

Poly Poly::monic() const {
  if (is_zero()) return {};
  Poly r = *this;
  r *= Rational(1 / leading_coeff());
  return r;
}

bool operator==(const Poly& a, const Poly& b) {
  if (a.terms_.size() != b.terms_.size()) return false;
  for (std::size_t i = 0; i < a.terms_.size(); ++i)
    if (a.terms_[i].mono != b.terms_[i].mono || a.terms_[i].coeff != b.terms_[i].coeff) return false;
  return true;
}

std::size_t Poly::hash() const {
  std::size_t h = terms_.size();
  for (const auto& t : terms_) {
    h ^= t.mono.hash() + 0x9e3779b9 + (h << 6) + (h >> 2);
    h ^= std::hash<std::string>{}(t.coeff.get_str()) + (h << 3);
  }
  return h;
}

// --------------------------------------------------------------------- GCD

namespace {

Poly gcd_impl(const Poly& a, const Poly& b);

Poly pseudo_remainder(const Poly& a, const Poly& b, VarId x) {
  const int db = b.degree(x);
  auto bparts = b.collect(x);
  const Poly lcb = bparts.rbegin()->second;
  Poly r = a;
  while (!r.is_zero()) {
    int dr = r.degree(x);
    if (dr < db) break;
    auto rparts = r.collect(x);
    Poly lcr = rparts.rbegin()->second;
    r = r * lcb - (b * lcr).mul_monomial(Monomial(x, dr - db));
  }
  return r;
}

Poly primitive_part(const Poly& p, VarId x) {
  Poly c = content(p, x);
  if (c.is_constant()) return p.monic();
  return p.exact_div(c).monic();
}

// Image of p with every variable other than x replaced by an integer.
Poly specialize(const Poly& p, VarId x, const std::map<VarId, long>& at) {
  std::vector<Poly::Term> out;
  out.reserve(p.size());
  for (const auto& t : p.terms()) {
    Rational c = t.coeff;
    int e = 0;
    for (const auto& [v, k] : t.mono.factors()) {
      if (v == x) {
        e = k;
        continue;
      }
      Integer pw;
      mpz_ui_pow_ui(pw.get_mpz_t(), static_cast<unsigned long>(at.at(v)), static_cast<unsigned long>(k));
      c *= pw;
    }
    out.push_back({e > 0 ? Monomial(x, e) : Monomial(), c});
  }
  return Poly::from_terms(std::move(out));
}

Poly prs_gcd(Poly a, Poly b, VarId x);

// True when a and b have no common factor of positive degree in x. An
// evaluation that keeps both leading coefficients can only raise the degree
// of the gcd, so a constant image gcd is a proof; other outcomes are
// inconclusive.
bool coprime_in(const Poly& a, const Poly& b, VarId x) {
  std::vector<VarId> vars = a.variables();
  for (VarId v : b.variables()) vars.push_back(v);
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  std::mt19937 rng(static_cast<unsigned>(a.size() * 7919 + b.size()));
  std::uniform_int_distribution<long> pick(2, 997);
  for (int attempt = 0; attempt < 3; ++attempt) {
    std::map<VarId, long> at;
    for (VarId v : vars)
      if (v != x) at[v] = pick(rng);
    Poly ia = specialize(a, x, at), ib = specialize(b, x, at);
    if (ia.degree(x) != a.degree(x) || ib.degree(x) != b.degree(x)) continue;
    return prs_gcd(ia, ib, x).degree(x) == 0;
  }
  return false;
}

// gcd of two polynomials that are both primitive with respect to x.
Poly prs_gcd(Poly a, Poly b, VarId x) {
  if (a.degree(x) < b.degree(x)) std::swap(a, b);
  while (true) {
    if (b.is_zero()) return primitive_part(a, x);
    if (b.degree(x) == 0) return Poly(1);
    Poly r = pseudo_remainder(a, b, x);
    a = std::move(b);
    if (r.is_zero()) return primitive_part(a, x);
    b = primitive_part(r, x);
  }
}

Poly gcd_impl(const Poly& a, const Poly& b) {
  if (a.is_zero()) return b.monic();
  if (b.is_zero()) return a.monic();
  if (a.is_constant() || b.is_constant()) return Poly(1);
  if (a == b) return a.monic();

  if (a.is_monomial() || b.is_monomial()) {
    return Poly::monomial(gcd(a.monomial_content(), b.monomial_content()), Rational(1));
  }

  // Factor out common monomial content first.
  Monomial ma = a.monomial_content();
  Monomial mb = b.monomial_content();
  Monomial mg = gcd(ma, mb);
  if (!ma.is_one() || !mb.is_one()) {
    Poly g = gcd_impl(a.div_monomial(ma), b.div_monomial(mb));
    return g.mul_monomial(mg).monic();
  }

  // Cheap divisibility checks.
  Poly q;
  if (b.size() <= a.size() && a.try_divide(b, q)) return b.monic();
  if (a.size() <= b.size() && b.try_divide(a, q)) return a.monic();

  auto va = a.variables();
  auto vb = b.variables();
  for (VarId v : va)
    if (!std::binary_search(vb.begin(), vb.end(), v)) return gcd_impl(content(a, v), b);
  for (VarId v : vb)
    if (!std::binary_search(va.begin(), va.end(), v)) return gcd_impl(a, content(b, v));

  // Main variable: the shared one of lowest combined degree.
  VarId x = va.front();
  int best = a.degree(x) + b.degree(x);
  for (VarId v : va) {
    int d = a.degree(v) + b.degree(v);
    if (d < best) {
      best = d;
      x = v;
    }
  }
  Poly ca = content(a, x);
  Poly cb = content(b, x);
  Poly pa = ca.is_constant() ? a : a.exact_div(ca);
  Poly pb = cb.is_constant() ? b : b.exact_div(cb);
  Poly c = gcd_impl(ca, cb);
  Poly g = coprime_in(pa, pb, x) ? Poly(1) : prs_gcd(pa, pb, x);
  return (c * g).monic();
}

}  // namespace

Poly content(const Poly& p, VarId v) {
  if (p.is_zero()) return {};
  auto parts = p.collect(v);
  Poly g;
  for (const auto& [e, c] : parts) {
    g = gcd_impl(g, c);
    if (g.is_constant()) return Poly(1);
  }
  return g;
}

Poly gcd(const Poly& a, const Poly& b) {
  if (a.is_zero() && b.is_zero()) return {};
  return gcd_impl(a, b);
}

}  // namespace kdvchart
