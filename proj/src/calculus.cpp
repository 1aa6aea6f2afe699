#include "kdvchart/calculus.hpp"

#include <algorithm>
#include <unordered_map>

namespace kdvchart {

namespace {

// Evaluates a polynomial after replacing atoms by expressions. Atoms without
// an image stay as they are. A single common denominator is formed so that
// only one normalization is performed.
JetExpr evaluate_poly(const Poly& p, const std::map<VarId, JetExpr>& images) {
  if (images.empty()) return JetExpr::fraction(p, Poly(1));
  std::map<VarId, int> maxexp;
  for (const auto& t : p.terms())
    for (const auto& [v, e] : t.mono.factors())
      if (images.count(v)) maxexp[v] = std::max(maxexp[v], e);
  if (maxexp.empty()) return JetExpr::fraction(p, Poly(1));

  std::map<std::pair<VarId, int>, Poly> num_pow;
  std::map<std::pair<VarId, int>, Poly> den_pow;
  auto npow = [&](VarId v, int k) -> const Poly& {
    auto key = std::make_pair(v, k);
    auto it = num_pow.find(key);
    if (it != num_pow.end()) return it->second;
    return num_pow.emplace(key, images.at(v).num().pow(static_cast<unsigned>(k))).first->second;
  };
  auto dpow = [&](VarId v, int k) -> const Poly& {
    auto key = std::make_pair(v, k);
    auto it = den_pow.find(key);
    if (it != den_pow.end()) return it->second;
    return den_pow.emplace(key, images.at(v).den().pow(static_cast<unsigned>(k))).first->second;
  };

  Poly common(1);
  for (const auto& [v, m] : maxexp) common *= dpow(v, m);

  Poly total;
  for (const auto& t : p.terms()) {
    std::vector<Monomial::Factor> kept;
    Poly term(t.coeff);
    for (const auto& [v, e] : t.mono.factors()) {
      if (images.count(v)) continue;
      kept.emplace_back(v, e);
    }
    term = term.mul_monomial(Monomial(std::move(kept)));
    for (const auto& [v, m] : maxexp) {
      int e = t.mono.degree(v);
      if (e > 0) term *= npow(v, e);
      if (m - e > 0) term *= dpow(v, m - e);
    }
    total += term;
  }
  return JetExpr::fraction(std::move(total), std::move(common));
}

JetExpr evaluate(const JetExpr& e, const std::map<VarId, JetExpr>& images) {
  if (images.empty()) return e;
  JetExpr n = evaluate_poly(e.num(), images);
  if (e.den().is_constant()) return n * JetExpr(Rational(1 / e.den().constant_value()));
  JetExpr d = evaluate_poly(e.den(), images);
  return n / d;
}

// D applied to a polynomial: jet and parameter atoms stay polynomial, nonlocal
// atoms contribute their (rational) integrands.
JetExpr derive_poly(const Poly& p) {
  Poly local;
  JetExpr nonlocal_part;
  for (VarId v : p.variables()) {
    const auto& inf = atoms::info(v);
    if (inf.kind == AtomKind::Param) continue;
    Poly dp = p.derivative(v);
    if (inf.kind == AtomKind::Jet) {
      local += dp * Poly::variable(atoms::jet(inf.name, inf.order + 1));
    } else {
      nonlocal_part += JetExpr::fraction(dp, Poly(1)) * *inf.body;
    }
  }
  return JetExpr::fraction(std::move(local), Poly(1)) + nonlocal_part;
}

}  // namespace

// ------------------------------------------------------------ derivatives

JetExpr total_derivative(const JetExpr& e) {
  if (e.is_constant()) return {};
  JetExpr dn = derive_poly(e.num());
  if (e.den().is_constant()) return dn * JetExpr(Rational(1 / e.den().constant_value()));
  JetExpr dd = derive_poly(e.den());
  if (dn.is_polynomial() && dd.is_polynomial()) {
    Poly n = dn.num() * e.den() - e.num() * dd.num();
    return JetExpr::fraction(std::move(n), e.den() * e.den());
  }
  JetExpr n = JetExpr::fraction(e.num(), Poly(1));
  JetExpr d = JetExpr::fraction(e.den(), Poly(1));
  return (dn * d - n * dd) / (d * d);
}

JetExpr total_derivative(const JetExpr& e, int times) {
  JetExpr r = e;
  for (int i = 0; i < times; ++i) r = total_derivative(r);
  return r;
}

JetExpr partial(const JetExpr& e, VarId atom) {
  Poly dn = e.num().derivative(atom);
  if (e.den().is_constant()) return JetExpr::fraction(dn, e.den());
  Poly dd = e.den().derivative(atom);
  if (dd.is_zero()) return JetExpr::fraction(dn, e.den());
  return JetExpr::fraction(dn * e.den() - e.num() * dd, e.den() * e.den());
}

namespace {

JetExpr frechet_impl(const JetExpr& e, const std::string& field, const JetExpr& direction,
                     std::map<int, JetExpr>& dir_cache, std::map<VarId, JetExpr>& atom_cache) {
  auto variation = [&](VarId v) -> JetExpr {
    if (auto it = atom_cache.find(v); it != atom_cache.end()) return it->second;
    const auto& inf = atoms::info(v);
    JetExpr out;
    if (inf.kind == AtomKind::Jet && inf.name == field) {
      int have = dir_cache.rbegin()->first;
      for (int k = have + 1; k <= inf.order; ++k) dir_cache.emplace(k, total_derivative(dir_cache.at(k - 1)));
      out = dir_cache.at(inf.order);
    } else if (inf.kind == AtomKind::Nonlocal) {
      out = make_dinv(frechet_impl(*inf.body, field, direction, dir_cache, atom_cache));
    }
    atom_cache.emplace(v, out);
    return out;
  };

  JetExpr result;
  for (VarId v : e.atoms()) {
    JetExpr dv = variation(v);
    if (dv.is_zero()) continue;
    result += partial(e, v) * dv;
  }
  return result;
}

}  // namespace

JetExpr frechet_derivative(const JetExpr& e, const std::string& field, const JetExpr& direction) {
  std::map<int, JetExpr> dir_cache{{0, direction}};
  std::map<VarId, JetExpr> atom_cache;
  return frechet_impl(e, field, direction, dir_cache, atom_cache);
}

JetExpr frechet_derivative(const JetExpr& e, const std::string& field, const std::string& direction) {
  if (e.max_order(direction) >= 0)
    throw std::invalid_argument("direction field '" + direction + "' already occurs in the expression");
  return frechet_derivative(e, field, JetExpr::jet(direction));
}

// ----------------------------------------------------------- substitution

UnresolvableJet::UnresolvableJet(const std::string& field, int order, int seed_order)
    : std::runtime_error("unresolvable jet variable: " + field + " of order " + std::to_string(order) +
                         " (rules start at order " + std::to_string(seed_order) + ")") {}

SubstitutionSet::SubstitutionSet(std::initializer_list<SubstitutionRule> rules) : rules_(rules) {}
SubstitutionSet::SubstitutionSet(std::vector<SubstitutionRule> rules) : rules_(std::move(rules)) {}
SubstitutionSet::SubstitutionSet(const SubstitutionSet& o) : rules_(o.rules_) {}
SubstitutionSet& SubstitutionSet::operator=(const SubstitutionSet& o) {
  if (this != &o) {
    std::lock_guard lock(mutex_);
    rules_ = o.rules_;
    cache_.clear();
  }
  return *this;
}

void SubstitutionSet::add(SubstitutionRule rule) {
  std::lock_guard lock(mutex_);
  rules_.push_back(std::move(rule));
  cache_.clear();
}

bool SubstitutionSet::covers(const std::string& field) const { return rule_for(field) != nullptr; }

const SubstitutionRule* SubstitutionSet::rule_for(const std::string& field) const {
  for (const auto& r : rules_)
    if (r.field == field) return &r;
  return nullptr;
}

JetExpr SubstitutionSet::image(const std::string& field, int order) const {
  const SubstitutionRule* r = rule_for(field);
  if (r == nullptr) return JetExpr::jet(field, order);
  if (order < r->order) throw UnresolvableJet(field, order, r->order);
  if (order == r->order) return r->value;
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find({field, order}); it != cache_.end()) return it->second;
  }
  JetExpr d = total_derivative(image(field, order - 1));
  std::lock_guard lock(mutex_);
  cache_.emplace(std::make_pair(field, order), d);
  return d;
}

namespace {

JetExpr substitute_atoms_memo(const JetExpr& e, const std::function<std::optional<JetExpr>(VarId)>& image,
                              std::map<VarId, std::optional<JetExpr>>& memo) {
  std::map<VarId, JetExpr> images;
  for (VarId v : e.atoms()) {
    auto it = memo.find(v);
    if (it == memo.end()) {
      std::optional<JetExpr> img = image(v);
      if (!img) {
        const auto& inf = atoms::info(v);
        if (inf.kind == AtomKind::Nonlocal) {
          JetExpr body = substitute_atoms_memo(*inf.body, image, memo);
          if (body != *inf.body) img = make_dinv(body);
        }
      }
      it = memo.emplace(v, std::move(img)).first;
    }
    if (it->second) images.emplace(v, *it->second);
  }
  return evaluate(e, images);
}

}  // namespace

JetExpr substitute_atoms(const JetExpr& e, const std::function<std::optional<JetExpr>(VarId)>& image) {
  std::map<VarId, std::optional<JetExpr>> memo;
  return substitute_atoms_memo(e, image, memo);
}

JetExpr substitute(const JetExpr& e, const SubstitutionSet& rules) {
  return substitute_atoms(e, [&](VarId v) -> std::optional<JetExpr> {
    const auto& inf = atoms::info(v);
    if (inf.kind != AtomKind::Jet || !rules.covers(inf.name)) return std::nullopt;
    return rules.image(inf.name, inf.order);
  });
}

JetExpr rename_fields(const JetExpr& e, const std::map<std::string, std::string>& renames) {
  return substitute_atoms(e, [&](VarId v) -> std::optional<JetExpr> {
    const auto& inf = atoms::info(v);
    if (inf.kind != AtomKind::Jet) return std::nullopt;
    auto it = renames.find(inf.name);
    if (it == renames.end()) return std::nullopt;
    return JetExpr::jet(it->second, inf.order);
  });
}

// ------------------------------------------------------------ integration

JetExpr euler_operator(const JetExpr& e, const std::string& field) {
  if (e.has_nonlocal()) throw std::invalid_argument("euler_operator needs a local expression");
  int top = e.max_order(field);
  JetExpr result;
  for (int k = 0; k <= top; ++k) {
    JetExpr p = partial(e, atoms::jet(field, k));
    if (p.is_zero()) continue;
    p = total_derivative(p, k);
    if (k % 2 == 1) p = -p;
    result += p;
  }
  return result;
}

namespace {

NotExact not_exact(const JetExpr& e, std::string reason) {
  NotExact n{std::move(reason), {}};
  if (!e.has_nonlocal()) {
    try {
      for (const auto& f : e.fields()) n.witness.emplace(f, euler_operator(e, f));
    } catch (const JetOrderOverflow&) {
      // witness unavailable for expressions at the order ceiling
    }
  }
  return n;
}

// Antiderivative of `a` with respect to the single atom x, treating all other
// atoms as constants. Handles denominators whose x-dependent part is a power
// of x; logarithmic terms are reported as failure.
std::optional<JetExpr> antiderivative_in(const JetExpr& a, VarId x) {
  Poly den = a.den();
  Rational scale = 1;
  Poly rest = den;
  int m = 0;
  if (den.contains(x)) {
    Poly c = content(den, x);
    Poly pp = den.exact_div(c);
    if (!pp.is_monomial()) return std::nullopt;
    const auto& t = pp.terms().front();
    if (t.mono.factors().size() != 1) return std::nullopt;
    m = t.mono.degree(x);
    scale = t.coeff;
    rest = c;
  }
  JetExpr result;
  for (const auto& [k, coeff] : a.num().collect(x)) {
    int power = k - m + 1;
    if (power == 0) return std::nullopt;
    JetExpr term = JetExpr::fraction(coeff, Poly(1)) * JetExpr::atom(x).pow(power);
    result += term * JetExpr(Rational(1, power));
  }
  return result / JetExpr::fraction(rest * scale, Poly(1));
}

IntegrationResult integrate_local(JetExpr f) {
  JetExpr g;
  const JetExpr original = f;
  for (int iter = 0; iter < 400; ++iter) {
    if (f.is_zero()) return g;
    VarId top = 0;
    int best = -1;
    std::string best_name;
    for (VarId v : f.atoms()) {
      const auto& inf = atoms::info(v);
      if (inf.kind != AtomKind::Jet) continue;
      if (inf.order > best || (inf.order == best && inf.name < best_name)) {
        best = inf.order;
        best_name = inf.name;
        top = v;
      }
    }
    if (best <= 0) return not_exact(original, "remainder has no derivative to integrate");
    if (f.den().contains(top) || f.num().degree(top) > 1)
      return not_exact(original, "not linear in the highest derivative");
    auto parts = f.num().collect(top);
    JetExpr a = JetExpr::fraction(parts[1], f.den());
    for (VarId v : a.atoms()) {
      const auto& inf = atoms::info(v);
      if (inf.kind == AtomKind::Jet && inf.order >= best) return not_exact(original, "mixed highest derivatives");
    }
    VarId lower = atoms::jet(best_name, best - 1);
    auto g0 = antiderivative_in(a, lower);
    if (!g0) return not_exact(original, "antiderivative leaves the rational class");
    g += *g0;
    f -= total_derivative(*g0);
  }
  return not_exact(original, "integration did not terminate");
}

}  // namespace

IntegrationResult integrate_exact(const JetExpr& e) {
  if (e.is_zero()) return JetExpr();
  if (!e.has_nonlocal()) return integrate_local(e);

  std::vector<VarId> nl;
  for (VarId v : e.atoms())
    if (atoms::info(v).kind == AtomKind::Nonlocal) nl.push_back(v);
  for (VarId v : nl)
    if (e.den().contains(v)) return NotExact{"nonlocal atom in denominator", {}};

  // Split the numerator as c0 + sum_j c_j A_j; anything nonlinear in atoms fails.
  std::vector<Poly::Term> c0;
  std::map<VarId, std::vector<Poly::Term>> cj;
  for (const auto& t : e.num().terms()) {
    VarId hit = 0;
    int deg = 0;
    for (const auto& [v, p] : t.mono.factors()) {
      if (std::find(nl.begin(), nl.end(), v) != nl.end()) {
        deg += p;
        hit = v;
      }
    }
    if (deg == 0) {
      c0.push_back(t);
    } else if (deg == 1) {
      cj[hit].push_back({t.mono.without(hit), t.coeff});
    } else {
      return NotExact{"nonlinear in nonlocal atoms", {}};
    }
  }
  JetExpr g;
  JetExpr rest = JetExpr::fraction(Poly::from_terms(std::move(c0)), e.den());
  for (auto& [atom, terms] : cj) {
    JetExpr c = JetExpr::fraction(Poly::from_terms(std::move(terms)), e.den());
    auto C = integrate_exact(c);
    if (!is_exact(C)) return NotExact{"coefficient of a nonlocal atom is not exact", {}};
    const JetExpr& cap = std::get<JetExpr>(C);
    g += cap * JetExpr::atom(atom);
    rest -= cap * *atoms::info(atom).body;
  }
  auto r = integrate_exact(rest);
  if (!is_exact(r)) return r;
  return g + std::get<JetExpr>(r);
}

namespace {

// D^-1(c A) = C A - D^-1(C body(A)) whenever c = D(C). Lowers nesting depth
// by moving exact coefficients of atoms out of the integral.
std::optional<JetExpr> dinv_by_parts(const JetExpr& e) {
  std::vector<VarId> nl;
  for (VarId v : e.atoms())
    if (atoms::info(v).kind == AtomKind::Nonlocal) nl.push_back(v);
  if (nl.empty()) return std::nullopt;
  for (VarId v : nl)
    if (e.den().contains(v)) return std::nullopt;
  std::vector<Poly::Term> kept;
  std::map<VarId, std::vector<Poly::Term>> cj;
  for (const auto& t : e.num().terms()) {
    VarId hit = 0;
    int deg = 0;
    for (const auto& [v, p] : t.mono.factors())
      if (std::find(nl.begin(), nl.end(), v) != nl.end()) {
        deg += p;
        hit = v;
      }
    if (deg == 1)
      cj[hit].push_back({t.mono.without(hit), t.coeff});
    else
      kept.push_back(t);
  }
  JetExpr outside;
  bool moved = false;
  for (auto& [atom, terms] : cj) {
    JetExpr c = JetExpr::fraction(Poly::from_terms(terms), e.den());
    auto C = integrate_exact(c);
    if (!is_exact(C)) {
      for (auto& t : terms) kept.push_back({t.mono * Monomial(atom), t.coeff});
      continue;
    }
    const JetExpr& cap = std::get<JetExpr>(C);
    outside += cap * JetExpr::atom(atom) - make_dinv(cap * *atoms::info(atom).body);
    moved = true;
  }
  if (!moved) return std::nullopt;
  return outside + make_dinv(JetExpr::fraction(Poly::from_terms(std::move(kept)), e.den()));
}

}  // namespace

JetExpr make_dinv(const JetExpr& e) {
  if (e.is_zero()) return {};
  auto r = integrate_exact(e);
  if (is_exact(r)) return std::get<JetExpr>(r);
  if (auto parts = dinv_by_parts(e)) return *parts;
  // Pull the rational scale out so that D^-1(c f) and D^-1(f) share one atom.
  const Poly::Term* lead = &e.num().terms().front();
  for (const auto& t : e.num().terms())
    if (stable_less(lead->mono, t.mono)) lead = &t;
  Rational s = lead->coeff;
  JetExpr body = e * JetExpr(Rational(1 / s));
  return JetExpr(s) * JetExpr::nonlocal(body);
}

// --------------------------------------------------------------- zero test

std::vector<std::vector<Rational>> rational_nullspace(const std::vector<std::vector<Rational>>& input,
                                                      std::size_t cols) {
  std::vector<std::vector<Rational>> m = input;
  std::vector<int> pivot_col;
  std::size_t row = 0;
  for (std::size_t c = 0; c < cols && row < m.size(); ++c) {
    std::size_t p = row;
    while (p < m.size() && m[p][c] == 0) ++p;
    if (p == m.size()) continue;
    std::swap(m[p], m[row]);
    Rational inv = 1 / m[row][c];
    for (auto& x : m[row]) x *= inv;
    for (std::size_t r = 0; r < m.size(); ++r) {
      if (r == row || m[r][c] == 0) continue;
      Rational f = m[r][c];
      for (std::size_t k = 0; k < cols; ++k) m[r][k] -= f * m[row][k];
    }
    pivot_col.push_back(static_cast<int>(c));
    ++row;
  }
  std::vector<std::vector<Rational>> basis;
  for (std::size_t free = 0; free < cols; ++free) {
    if (std::find(pivot_col.begin(), pivot_col.end(), static_cast<int>(free)) != pivot_col.end()) continue;
    std::vector<Rational> v(cols, Rational(0));
    v[free] = 1;
    for (std::size_t r = 0; r < pivot_col.size(); ++r) v[static_cast<std::size_t>(pivot_col[r])] = -m[r][free];
    basis.push_back(std::move(v));
  }
  return basis;
}

namespace {

// Finds constant vectors lambda with sum_i lambda_i E_f(bodies_i) = 0 for
// every field f.
std::vector<std::vector<Rational>> exact_combinations(const std::vector<JetExpr>& bodies) {
  std::vector<std::string> fields;
  for (const auto& b : bodies) {
    auto fs = b.fields();
    fields.insert(fields.end(), fs.begin(), fs.end());
  }
  std::sort(fields.begin(), fields.end());
  fields.erase(std::unique(fields.begin(), fields.end()), fields.end());

  std::vector<std::vector<Rational>> rows;
  for (const auto& f : fields) {
    std::vector<JetExpr> ev;
    for (const auto& b : bodies) ev.push_back(euler_operator(b, f));
    Poly common(1);
    for (const auto& x : ev) {
      Poly g = gcd(common, x.den());
      common = common * x.den().exact_div(g);
    }
    std::map<Monomial, std::vector<Rational>> by_mono;
    for (std::size_t i = 0; i < ev.size(); ++i) {
      Poly n = ev[i].num() * common.exact_div(ev[i].den());
      for (const auto& t : n.terms()) {
        auto& row = by_mono[t.mono];
        if (row.empty()) row.assign(bodies.size(), Rational(0));
        row[i] += t.coeff;
      }
    }
    for (auto& [mono, row] : by_mono) rows.push_back(std::move(row));
  }
  if (rows.empty()) rows.emplace_back(bodies.size(), Rational(0));
  return rational_nullspace(rows, bodies.size());
}

}  // namespace

ZeroTest test_zero(const JetExpr& e) {
  JetExpr cur = e;
  int used = 0;
  bool skipped = false;
  for (int iter = 0; iter < 64; ++iter) {
    if (cur.is_zero()) return {ZeroVerdict::Zero, cur, used};
    std::vector<VarId> depth1;
    for (VarId v : cur.atoms_deep()) {
      const auto& inf = atoms::info(v);
      if (inf.kind == AtomKind::Nonlocal && inf.depth == 1) depth1.push_back(v);
    }
    if (depth1.empty()) break;
    std::sort(depth1.begin(), depth1.end(),
              [](VarId a, VarId b) { return atoms::info(a).sort_key < atoms::info(b).sort_key; });
    std::vector<JetExpr> bodies;
    for (VarId v : depth1) bodies.push_back(*atoms::info(v).body);

    bool progressed = false;
    for (const auto& lambda : exact_combinations(bodies)) {
      JetExpr combo;
      for (std::size_t i = 0; i < bodies.size(); ++i)
        if (lambda[i] != 0) combo += JetExpr(lambda[i]) * bodies[i];
      auto integ = integrate_exact(combo);
      if (!is_exact(integ)) {
        skipped = true;
        continue;
      }
      std::size_t k = bodies.size();
      for (std::size_t i = 0; i < bodies.size(); ++i)
        if (lambda[i] != 0) k = i;  // last in sort order
      JetExpr replacement = std::get<JetExpr>(integ);
      for (std::size_t i = 0; i < bodies.size(); ++i)
        if (i != k && lambda[i] != 0) replacement -= JetExpr(lambda[i]) * JetExpr::atom(depth1[i]);
      replacement *= JetExpr(Rational(1 / lambda[k]));
      VarId target = depth1[k];
      cur = substitute_atoms(cur, [&](VarId v) -> std::optional<JetExpr> {
        if (v == target) return replacement;
        return std::nullopt;
      });
      ++used;
      progressed = true;
      break;
    }
    if (!progressed) break;
  }
  if (cur.is_zero()) return {ZeroVerdict::Zero, cur, used};
  bool deep = false;
  for (VarId v : cur.atoms_deep())
    if (atoms::info(v).depth >= 2) deep = true;
  if (deep || skipped) return {ZeroVerdict::Undecided, cur, used};
  return {ZeroVerdict::NonZero, cur, used};
}

}  // namespace kdvchart
