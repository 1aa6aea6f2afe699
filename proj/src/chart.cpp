#include "kdvchart/chart.hpp"

#include "json.hpp"

#include <algorithm>
#include <sstream>

namespace kdvchart {

std::string to_string(LinkKind k) {
  switch (k) {
    case LinkKind::Differential:
      return "differential";
    case LinkKind::Reciprocal:
      return "reciprocal";
    case LinkKind::Invariance:
      return "pointwise-invariance";
  }
  return "?";
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Verified:
      return "verified";
    case Verdict::Failed:
      return "failed";
    case Verdict::Deferred:
      return "deferred";
  }
  return "?";
}

std::string BacklundLink::free_field() const {
  if (!rule) return {};
  return rule->field == from_field ? to_field : from_field;
}

// --------------------------------------------------------------- registry

void ChartRegistry::add_equation(EquationDef eq) {
  if (find_equation(eq.name)) throw std::invalid_argument("duplicate equation " + eq.name);
  equations_.push_back(std::move(eq));
}

void ChartRegistry::add_link(BacklundLink link) {
  if (find_link(link.name)) throw std::invalid_argument("duplicate link " + link.name);
  links_.push_back(std::move(link));
}

const EquationDef* ChartRegistry::find_equation(const std::string& name) const {
  for (const auto& e : equations_)
    if (e.name == name) return &e;
  return nullptr;
}

const EquationDef& ChartRegistry::equation(const std::string& name) const {
  if (auto* e = find_equation(name)) return *e;
  throw UnknownName("unknown equation " + name);
}

const EquationDef* ChartRegistry::equation_for_field(const std::string& field) const {
  for (const auto& e : equations_)
    if (e.field == field) return &e;
  return nullptr;
}

const BacklundLink* ChartRegistry::find_link(const std::string& name) const {
  for (const auto& l : links_)
    if (l.name == name) return &l;
  return nullptr;
}

const BacklundLink& ChartRegistry::link(const std::string& name) const {
  if (auto* l = find_link(name)) return *l;
  throw UnknownName("unknown link or invariance " + name);
}

// ----------------------------------------------------------------- helpers

namespace {

const char* kDecay = "decay";
const char* kPositivity = "positivity";
const char* kNondegenerate = "ad-bc!=0";

void add_assumption(std::vector<std::string>& list, const std::string& a) {
  if (std::find(list.begin(), list.end(), a) == list.end()) list.push_back(a);
}

bool has_denominator(const JetExpr& e) { return !e.den().is_constant(); }

ReportStep step(std::string label, const JetExpr& lhs, const JetExpr& rhs) {
  ZeroTest z = test_zero(lhs - rhs);
  return {std::move(label), lhs.str(), rhs.str(), z.residual.str(), z.verdict == ZeroVerdict::Zero};
}

JetExpr apply_power(const PseudoOp& op, JetExpr e, int n) {
  for (int i = 0; i < n; ++i) e = op_apply(op, e);
  return e;
}

JetExpr schwarzian(const JetExpr& f) {
  JetExpr r = total_derivative(f, 2) / total_derivative(f);
  return total_derivative(r) - JetExpr(Rational(1, 2)) * r * r;
}

// Replaces every jet of `field` through `image(order)`.
JetExpr replace_field(const JetExpr& e, const std::string& field, const std::function<JetExpr(int)>& image) {
  return substitute_atoms(e, [&](VarId v) -> std::optional<JetExpr> {
    const auto& inf = atoms::info(v);
    if (inf.kind == AtomKind::Jet && inf.name == field) return image(inf.order);
    return std::nullopt;
  });
}

// Some flows carry an implicit lower jet: y = D^-k (rhs). Jets below `order`
// are recovered by repeated antiderivatives under the decay assumption.
JetExpr jet_from_rule(const SubstitutionRule& r, int order) {
  if (order >= r.order) return total_derivative(r.value, order - r.order);
  JetExpr e = r.value;
  for (int k = r.order; k > order; --k) e = make_dinv(e);
  return e;
}

const EquationDef& endpoint(const ChartRegistry& reg, const BacklundLink& l, const std::string& field) {
  const std::string& name = field == l.from_field ? l.from : l.to;
  return reg.equation(name);
}

}  // namespace

SubstitutionSet restriction_rules(const BacklundLink& link) {
  if (!link.rule) throw std::invalid_argument("link " + link.name + " has no solved form");
  return SubstitutionSet{*link.rule};
}

// ------------------------------------------------------------ verification

VerificationReport verify_equation(const EquationDef& eq) {
  VerificationReport rep;
  rep.subject = eq.name;
  rep.method = "symbolic-reduction";
  if (!eq.has_operator()) {
    rep.verdict = Verdict::Deferred;
    rep.message = "no recursion operator registered";
    return rep;
  }
  add_assumption(rep.assumptions, kDecay);
  if (has_denominator(eq.flow())) add_assumption(rep.assumptions, kPositivity);
  JetExpr generated = apply_power(eq.recursion, eq.seed, eq.seed_power);
  rep.steps.push_back(step("multiplier^-1 * rhs = operator^" + std::to_string(eq.seed_power) + " (seed)", eq.flow(), generated));
  rep.residual = rep.steps.back().residual;
  rep.verdict = rep.steps.back().holds ? Verdict::Verified : Verdict::Failed;
  return rep;
}

VerificationReport verify_link_symbolic(const ChartRegistry& reg, const BacklundLink& link) {
  VerificationReport rep;
  rep.subject = link.name;
  rep.method = "symbolic-reduction";
  if (link.kind == LinkKind::Reciprocal) {
    rep.verdict = Verdict::Deferred;
    rep.message = "reciprocal link changes the independent variable; checked numerically by `transport " + link.name + "`";
    return rep;
  }
  if (link.kind == LinkKind::Invariance) return verify_invariance(reg, reg.equation(link.from), link);
  if (!link.rule) {
    rep.message = "link has no solved form";
    return rep;
  }
  const SubstitutionRule& rule = *link.rule;
  const std::string y = rule.field, z = link.free_field();
  const EquationDef& ey = endpoint(reg, link, y);
  const EquationDef& ez = endpoint(reg, link, z);
  const JetExpr ky = ey.flow(), kz = ez.flow();
  add_assumption(rep.assumptions, kDecay);
  if (has_denominator(ky) || has_denominator(kz) || has_denominator(rule.value)) add_assumption(rep.assumptions, kPositivity);
  if (link.from != ey.name && link.to != ey.name) rep.message = "endpoint mismatch";

  const SubstitutionSet rules{rule};
  const std::string jet = rule.order == 0 ? y : y + "^(" + std::to_string(rule.order) + ")";
  try {
    // Forward: time derivative of the rule's right side along z's flow.
    JetExpr rdot = frechet_derivative(rule.value, z, kz);
    JetExpr ky_sub = substitute(ky, rules);
    if (rule.order == 0) {
      rep.steps.push_back(step("d/dt " + y + " along " + ez.name + " = " + ey.name + " flow", rdot, ky_sub));
    } else {
      rep.steps.push_back(step("d/dt " + jet + " along " + ez.name + " = D^" + std::to_string(rule.order) + " of " +
                                   ey.name + " flow",
                               rdot, substitute(total_derivative(ky, rule.order), rules)));
      JetExpr integrated = rdot;
      bool exact = true;
      for (int k = 0; k < rule.order && exact; ++k) {
        auto r = integrate_exact(integrated);
        if (!is_exact(r)) {
          exact = false;
          rep.steps.push_back({"integrate_exact", integrated.str(), "", std::get<NotExact>(r).reason, false});
        } else {
          integrated = std::get<JetExpr>(r);
        }
      }
      if (exact) rep.steps.push_back(step("integrated: " + y + "_t = " + ey.name + " flow", integrated, ky_sub));
      // The unsubstituted flow is recovered from its derivative as well.
      auto back = integrate_exact(total_derivative(ky, rule.order));
      JetExpr recovered = is_exact(back) ? std::get<JetExpr>(back) : JetExpr();
      if (rule.order == 1) rep.steps.push_back(step("integrate_exact(D(" + ey.name + " flow))", recovered, ky));
    }
    // Backward: invert the linearized rule to recover z's flow.
    LinearBTOperator lin = linearize(JetExpr::jet(y, rule.order) - rule.value, z);
    if (lin.inverse) {
      JetExpr lhs = substitute(total_derivative(ky, rule.order), rules);
      JetExpr zdot = -op_apply(*lin.inverse, lhs);
      rep.steps.push_back(step(z + "_t recovered through " + lin.certificate, zdot, kz));
    } else {
      rep.message = "reverse direction skipped: linearization in " + z + " has no first-order inverse";
    }
  } catch (const std::exception& ex) {
    rep.verdict = Verdict::Failed;
    rep.message = std::string("reduction incomplete: ") + ex.what();
    return rep;
  }
  bool all = std::all_of(rep.steps.begin(), rep.steps.end(), [](const ReportStep& s) { return s.holds; });
  rep.residual = rep.steps.front().residual;
  for (const auto& s : rep.steps)
    if (!s.holds) {
      rep.residual = s.residual;
      break;
    }
  rep.verdict = all ? Verdict::Verified : Verdict::Failed;
  if (!all && rep.message.empty()) rep.message = "reduction incomplete";
  return rep;
}

// ---------------------------------------------------------------- powers

std::optional<JetExpr> eliminate_through_power(const JetExpr& e, const std::string& z, int m, const JetExpr& y) {
  const VarId scale = atoms::param("Z__power");
  JetExpr Z = JetExpr::atom(scale);
  std::vector<JetExpr> p{JetExpr(1)};
  JetExpr p1 = total_derivative(y) / (JetExpr(m) * y);
  auto pk = [&](int k) {
    while (static_cast<int>(p.size()) <= k) {
      if (p.size() == 1)
        p.push_back(p1);
      else
        p.push_back(total_derivative(p.back()) + p.back() * p1);
    }
    return p[static_cast<std::size_t>(k)];
  };
  JetExpr lifted = replace_field(e, z, [&](int k) { return Z * pk(k); });
  for (VarId v : lifted.atoms())
    if (atoms::info(v).kind == AtomKind::Nonlocal) {
      auto deep = JetExpr::atom(v).atoms_deep();
      if (std::find(deep.begin(), deep.end(), scale) != deep.end()) return std::nullopt;
    }
  auto num = lifted.num().collect(scale);
  auto den = lifted.den().collect(scale);
  if (num.size() != 1 || den.size() != 1) return std::nullopt;
  int d = num.begin()->first - den.begin()->first;
  if (d % m != 0) return std::nullopt;
  JetExpr rest = JetExpr::fraction(num.begin()->second, den.begin()->second);
  return rest * y.pow(d / m);
}

// ------------------------------------------------------------- composition

bool same_relation(const JetExpr& a, const JetExpr& b) {
  if (a.is_zero() || b.is_zero()) return a.is_zero() && b.is_zero();
  JetExpr q = a / b;
  return q.is_constant();
}

namespace {

// y^(k) = c z^m: returns (c, m) when the rule is a pure power of the free field.
std::optional<std::pair<JetExpr, int>> power_form(const SubstitutionRule& r, const std::string& z) {
  JetExpr zj = JetExpr::jet(z);
  const Poly& num = r.value.num();
  if (!r.value.den().is_constant() || !num.is_monomial()) return std::nullopt;
  const auto& f = num.leading().mono.factors();
  if (f.size() != 1 || f[0].first != atoms::jet(z, 0)) return std::nullopt;
  return std::make_pair(JetExpr(num.leading_coeff() / r.value.den().constant_value()), f[0].second);
}

BacklundLink make_composed(const ChartRegistry& reg, const BacklundLink& l1, const BacklundLink& l2,
                           const std::string& shared) {
  BacklundLink out;
  out.name = l1.name + "o" + l2.name;
  out.kind = LinkKind::Differential;
  out.from_field = l1.from_field == shared ? l1.to_field : l1.from_field;
  out.to_field = l2.from_field == shared ? l2.to_field : l2.from_field;
  const EquationDef* a = reg.equation_for_field(out.from_field);
  const EquationDef* b = reg.equation_for_field(out.to_field);
  out.from = a ? a->name : out.from_field;
  out.to = b ? b->name : out.to_field;
  return out;
}

}  // namespace

BacklundLink compose_links(const ChartRegistry& reg, const BacklundLink& l1, const BacklundLink& l2) {
  if (l1.kind != LinkKind::Differential || l2.kind != LinkKind::Differential)
    throw KindMismatch("kind mismatch: only differential links compose symbolically (" + l1.name + ", " + l2.name + ")");
  if (!l1.rule || !l2.rule) throw std::invalid_argument("composition needs solved forms");
  std::string shared;
  for (const auto& f : {l1.from_field, l1.to_field})
    if (f == l2.from_field || f == l2.to_field) shared = f;
  if (shared.empty()) throw std::invalid_argument("links " + l1.name + " and " + l2.name + " share no field");
  const SubstitutionRule &r1 = *l1.rule, &r2 = *l2.rule;
  const std::string z1 = l1.free_field(), z2 = l2.free_field();
  BacklundLink out = make_composed(reg, l1, l2, shared);
  SubstitutionRule rule;
  if (z1 == shared && r2.field == shared) {
    rule = {r1.field, r1.order, substitute(r1.value, SubstitutionSet{r2})};
  } else if (z2 == shared && r1.field == shared) {
    rule = {r2.field, r2.order, substitute(r2.value, SubstitutionSet{r1})};
  } else if (z1 == shared && z2 == shared) {
    // Both solved in the shared field: eliminate it through one of the rules.
    std::optional<JetExpr> value;
    if (auto pf = power_form(r2, shared)) {
      JetExpr y = JetExpr::jet(r2.field, r2.order) / pf->first;
      value = eliminate_through_power(r1.value, shared, pf->second, y);
      if (value) rule = {r1.field, r1.order, *value};
    }
    if (!value) {
      if (auto pf = power_form(r1, shared)) {
        JetExpr y = JetExpr::jet(r1.field, r1.order) / pf->first;
        value = eliminate_through_power(r2.value, shared, pf->second, y);
        if (value) rule = {r2.field, r2.order, *value};
      }
    }
    if (!value) throw NonInvertibleOperator("cannot eliminate " + shared + " between " + l1.name + " and " + l2.name);
  } else {
    // Both rules solve the shared field: only the relation survives.
    if (r1.order != r2.order) throw NonInvertibleOperator("rules solve different jets of " + shared);
    out.relation = r1.value - r2.value;
    return out;
  }
  out.rule = rule;
  out.relation = JetExpr::jet(rule.field, rule.order) - rule.value;
  return out;
}

// ------------------------------------------------------------- invariances

BacklundLink derive_invariance(const ChartRegistry& reg, const BacklundLink& link, const BacklundLink& inv) {
  if (inv.kind != LinkKind::Invariance || inv.cited || !inv.rule)
    throw std::invalid_argument(inv.name + " is not an explicit invariance");
  if (!link.rule) throw NonInvertibleOperator("not invertible: link " + link.name + " has no solved form");
  const SubstitutionRule& r = *link.rule;
  const std::string y = r.field, z = link.free_field();
  BacklundLink out;
  out.kind = LinkKind::Invariance;
  out.params = inv.params;
  out.assumptions = inv.assumptions;
  add_assumption(out.assumptions, kDecay);
  if (inv.from_field == y) {
    // Pull y's transformation back to z through y^(k) = c z^m.
    auto pf = power_form(r, z);
    if (!pf) throw NonInvertibleOperator("not invertible: " + link.name + " is not a pure power of " + z);
    if (inv.power != 1) throw NonInvertibleOperator("not invertible: transformed field is given through a power");
    const EquationDef& ez = endpoint(reg, link, z);
    JetExpr image = replace_field(inv.rule->value, y, [&](int k) { return jet_from_rule(r, k); });
    JetExpr value = total_derivative(image, r.order) / pf->first;
    out.name = inv.name + "@" + ez.name;
    out.from = out.to = ez.name;
    out.from_field = out.to_field = z;
    out.power = pf->second;
    if (out.power % 2 == 0) add_assumption(out.assumptions, kPositivity);
    out.rule = SubstitutionRule{out.hat_field(), 0, value};
    out.relation = JetExpr::jet(out.hat_field()).pow(out.power) - value;
    return out;
  }
  if (inv.from_field == z) {
    // Transformation of the free field: the solved field changes parametrically.
    if (inv.power != 1) throw NonInvertibleOperator("not invertible: transformed field is given through a power");
    const EquationDef& ey = endpoint(reg, link, y);
    if (r.order != 0) throw NonInvertibleOperator("parametric images need a rule for the field itself");
    JetExpr zimage = inv.rule->value;
    JetExpr value = replace_field(r.value, z, [&](int k) { return total_derivative(zimage, k); });
    out.name = inv.name + "@" + ey.name;
    out.from = out.to = ey.name;
    out.from_field = out.to_field = y;
    out.parameter_field = z;
    out.parameter_value = r.value;
    out.rule = SubstitutionRule{out.hat_field(), 0, value};
    out.relation = JetExpr::jet(out.hat_field()) - value;
    return out;
  }
  throw std::invalid_argument("invariance " + inv.name + " does not act on a field of link " + link.name);
}

namespace {

bool is_moebius(const JetExpr& image, const std::string& field) {
  VarId f = atoms::jet(field, 0);
  for (VarId v : image.atoms()) {
    const auto& inf = atoms::info(v);
    if (inf.kind != AtomKind::Param && v != f) return false;
  }
  return image.num().degree(f) <= 1 && image.den().degree(f) <= 1;
}

}  // namespace

VerificationReport verify_invariance(const ChartRegistry& reg, const EquationDef& eq, const BacklundLink& inv) {
  VerificationReport rep;
  rep.subject = inv.name + " on " + eq.name;
  rep.method = "symbolic-reduction";
  rep.assumptions = inv.assumptions;
  if (inv.cited || !inv.rule) {
    rep.verdict = Verdict::Deferred;
    rep.message = "cited reference without a formula";
    return rep;
  }
  add_assumption(rep.assumptions, kDecay);
  const std::string y = eq.field;
  const JetExpr ky = eq.flow();
  const JetExpr image = inv.rule->value;
  try {
    if (!inv.parameter_field.empty()) {
      // Both u = R(z) and uhat = R(zhat) must follow y's flow when z follows its own.
      const EquationDef* ez = reg.equation_for_field(inv.parameter_field);
      if (!ez) throw UnknownName("no equation for " + inv.parameter_field);
      const JetExpr kz = ez->flow();
      const std::string& z = inv.parameter_field;
      rep.steps.push_back(step("original: d/dt " + y + " = " + eq.name + " flow", frechet_derivative(inv.parameter_value, z, kz),
                               substitute(ky, SubstitutionSet{{y, 0, inv.parameter_value}})));
      rep.steps.push_back(step("image: d/dt " + inv.hat_field() + " = " + eq.name + " flow", frechet_derivative(image, z, kz),
                               substitute(ky, SubstitutionSet{{y, 0, image}})));
    } else if (inv.power == 1) {
      if (is_moebius(image, y)) {
        add_assumption(rep.assumptions, kNondegenerate);
        JetExpr f = JetExpr::jet(y);
        rep.steps.push_back(step("Schwarzian invariance", schwarzian(image), schwarzian(f)));
      }
      if (has_denominator(ky)) add_assumption(rep.assumptions, kPositivity);
      rep.steps.push_back(step("d/dt " + inv.hat_field() + " = " + eq.name + " flow of " + inv.hat_field(),
                               frechet_derivative(image, y, ky), substitute(ky, SubstitutionSet{{y, 0, image}})));
    } else {
      // Relation level: W = y^m follows the lifted flow m y^(m-1) K(y).
      const int m = inv.power;
      add_assumption(rep.assumptions, kPositivity);
      JetExpr W = JetExpr::jet(y + "pow");
      auto lifted = eliminate_through_power(JetExpr(m) * JetExpr::jet(y).pow(m - 1) * ky, y, m, W);
      if (!lifted) throw std::runtime_error("flow of " + y + "^" + std::to_string(m) + " is not closed");
      JetExpr lhs = frechet_derivative(image, y, ky);
      JetExpr rhs = replace_field(*lifted, y + "pow", [&](int k) { return total_derivative(image, k); });
      rep.steps.push_back(step("d/dt (" + inv.hat_field() + "^" + std::to_string(m) + ") = lifted " + eq.name + " flow",
                               lhs, rhs));
    }
  } catch (const std::exception& ex) {
    rep.verdict = Verdict::Failed;
    rep.message = std::string("reduction incomplete: ") + ex.what();
    return rep;
  }
  bool all = std::all_of(rep.steps.begin(), rep.steps.end(), [](const ReportStep& s) { return s.holds; });
  rep.residual = "0";
  for (const auto& s : rep.steps)
    if (!s.holds) {
      rep.residual = s.residual;
      break;
    }
  rep.verdict = all ? Verdict::Verified : Verdict::Failed;
  if (!all) rep.message = "reduction incomplete";
  return rep;
}

// -------------------------------------------------------------- operators

PseudoOp derive_recursion(const ChartRegistry& reg, const std::string& from, const std::string& to,
                          const BacklundLink& via) {
  const EquationDef& ef = reg.equation(from);
  const EquationDef& et = reg.equation(to);
  if (!ef.has_operator()) throw std::invalid_argument(from + " has no recursion operator");
  if (via.kind != LinkKind::Differential) throw KindMismatch("kind mismatch: " + via.name + " is not a differential link");
  bool joins = (via.from_field == ef.field && via.to_field == et.field) || (via.to_field == ef.field && via.from_field == et.field);
  if (!joins) throw std::invalid_argument("link " + via.name + " does not join " + from + " and " + to);
  if (!via.rule || via.rule->field != ef.field)
    throw std::invalid_argument("unresolvable restriction: link " + via.name + " does not solve for " + ef.field);
  return conjugate_recursion_operator(ef.recursion, via.relation, ef.field, et.field, restriction_rules(via));
}

std::vector<JetExpr> hierarchy(const EquationDef& eq, int n) {
  if (n < 1) throw std::invalid_argument("hierarchy order must be at least 1");
  if (!eq.has_operator()) throw std::invalid_argument(eq.name + " has no recursion operator");
  std::vector<JetExpr> out{apply_power(eq.recursion, eq.seed, eq.seed_power)};
  if (n > 1) {
    auto rest = hierarchy_generate(eq.recursion, out.front(), n - 1);
    out.insert(out.end(), rest.begin(), rest.end());
  }
  return out;
}

// ----------------------------------------------------------------- export

namespace {

std::string equation_text(const EquationDef& eq) {
  std::string lhs = eq.field + "_t";
  if (eq.multiplier != JetExpr(1)) lhs = "(" + eq.multiplier.str() + ")*" + lhs;
  return lhs + " = " + eq.rhs.str();
}

std::string dot_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string export_chart(const ChartRegistry& reg, ChartFormat format, int hierarchy_level) {
  if (hierarchy_level < 1) throw std::invalid_argument("hierarchy level must be at least 1");
  const int order = 2 * hierarchy_level + 1;
  if (format == ChartFormat::Json) {
    nlohmann::ordered_json doc;
    doc["hierarchy_level"] = hierarchy_level;
    doc["nodes"] = nlohmann::ordered_json::array();
    doc["edges"] = nlohmann::ordered_json::array();
    doc["loops"] = nlohmann::ordered_json::array();
    for (const auto& eq : reg.equations())
      doc["nodes"].push_back({{"id", eq.name}, {"field", eq.field}, {"equation", equation_text(eq)}, {"order", order}});
    for (const auto& l : reg.links()) {
      if (l.kind == LinkKind::Invariance) {
        if (l.loop.empty()) continue;
        nlohmann::ordered_json j{{"label", l.loop}, {"name", l.name}, {"equation", l.from}, {"cited", l.cited}};
        if (!l.cited) j["formula"] = l.relation.str() + " = 0";
        doc["loops"].push_back(j);
        continue;
      }
      nlohmann::ordered_json j{{"id", l.name}, {"from", l.from}, {"to", l.to}, {"kind", to_string(l.kind)}};
      if (l.kind == LinkKind::Differential)
        j["relation"] = l.relation.str() + " = 0";
      else
        j["relation"] = "xbar = Dinv(" + l.from_field + "), " + l.to_field + "(xbar) = " + l.from_field + "(x)";
      doc["edges"].push_back(j);
    }
    return doc.dump(2) + "\n";
  }
  std::ostringstream out;
  out << "graph backlund_chart {\n  node [shape=box];\n";
  for (const auto& eq : reg.equations()) {
    std::string label = dot_quote(eq.name);
    label.insert(label.size() - 1, "\\norder " + std::to_string(order));
    out << "  " << dot_quote(eq.name) << " [label=" << label << "];\n";
  }
  for (const auto& l : reg.links()) {
    if (l.kind == LinkKind::Invariance) {
      if (!l.loop.empty()) out << "  " << dot_quote(l.from) << " -- " << dot_quote(l.from) << " [label=" << dot_quote(l.loop) << "];\n";
      continue;
    }
    out << "  " << dot_quote(l.from) << " -- " << dot_quote(l.to) << " [label=" << dot_quote("(" + l.name + ")");
    if (l.kind == LinkKind::Reciprocal) out << ", style=dashed";
    out << "];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace kdvchart
