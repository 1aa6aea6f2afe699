#include "kdvchart/numeric.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace kdvchart {

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

template <typename Scalar>
using FieldArray = typename BasicSpectralGrid<Scalar>::Array;

// Samples and base order per field name.
template <typename Scalar>
using FieldMap = std::map<std::string, std::pair<FieldArray<Scalar>, int>>;

FieldMap<double> field_map(const Binding& b) {
  FieldMap<double> out;
  for (const auto& [name, fb] : b) out.emplace(name, std::make_pair(fb.samples, fb.base_order));
  return out;
}

template <typename Scalar>
Scalar to_scalar(const Rational& q) {
  return static_cast<Scalar>(q.get_num().get_d()) / static_cast<Scalar>(q.get_den().get_d());
}

// Field shifted by eps * dir, with jets formed as base jet + eps * dir jet so
// that derivatives of the shift are not taken on the rounded sum.
template <typename Scalar>
struct Shift {
  std::string field;
  const FieldArray<Scalar>* dir = nullptr;
  Scalar eps = 0;
};

template <typename Scalar>
class Evaluator {
 public:
  using Grid = BasicSpectralGrid<Scalar>;
  using Array = FieldArray<Scalar>;

  Evaluator(const FieldMap<Scalar>& b, const Grid& g, const EvalOptions& o, Shift<Scalar> shift = {})
      : binding_(b), grid_(g), opt_(o), shift_(std::move(shift)) {}

  Array expr(const JetExpr& e) {
    Array num = poly(e.num());
    if (e.den().is_constant()) return num / to_scalar<Scalar>(e.den().constant_value());
    Array den = poly(e.den());
    Eigen::Index at = 0;
    double smallest = static_cast<double>(den.abs().minCoeff(&at));
    if (smallest <= opt_.denominator_tol)
      throw NumericError("denominator-near-zero", "|" + to_string(e.den()) + "| = " + fmt(smallest) + " at x = " +
                                                      fmt(static_cast<double>(grid_.x()(at))));
    return num / den;
  }

 private:
  Array poly(const Poly& p) {
    Array out = Array::Zero(grid_.size());
    for (const auto& t : p.terms()) {
      Array term = Array::Constant(grid_.size(), to_scalar<Scalar>(t.coeff));
      for (const auto& [v, k] : t.mono.factors()) term *= atom(v).pow(k);
      out += term;
    }
    return out;
  }

  const Array& atom(VarId v) {
    if (auto it = cache_.find(v); it != cache_.end()) return it->second;
    const auto& inf = atoms::info(v);
    Array value;
    switch (inf.kind) {
      case AtomKind::Jet:
      case AtomKind::Param: {
        auto it = binding_.find(inf.name);
        if (it == binding_.end()) throw NumericError("unbound-field", "no samples bound for " + inf.name);
        const auto& [samples, base_order] = it->second;
        int order = inf.kind == AtomKind::Jet ? inf.order : 0;
        if (order >= base_order) {
          value = grid_.derivative(samples, order - base_order);
          if (shift_.dir && inf.name == shift_.field && base_order == 0)
            value += shift_.eps * grid_.derivative(*shift_.dir, order);
        } else {
          value = samples;
          for (int k = order; k < base_order; ++k) value = grid_.step_antiderivative(value);
        }
        break;
      }
      case AtomKind::Nonlocal: {
        Array body = expr(*inf.body);
        double left = static_cast<double>(body(0));
        if (opt_.check_decay &&
            std::abs(left) > opt_.decay_tol * std::max(1.0, static_cast<double>(body.abs().maxCoeff())))
          throw NumericError("not-decayed", "integrand " + inf.body->str() + " is " + fmt(left) + " at the left edge");
        value = grid_.step_antiderivative(body);
        break;
      }
    }
    return cache_.emplace(v, std::move(value)).first->second;
  }

  const FieldMap<Scalar>& binding_;
  const Grid& grid_;
  const EvalOptions& opt_;
  Shift<Scalar> shift_;
  std::map<VarId, Array> cache_;
};

// One word applied right to left; `coeff(i)` supplies the samples of Mul factor i.
template <typename Scalar, typename Coeff>
FieldArray<Scalar> apply_word(const OpTerm& term, Coeff&& coeff, FieldArray<Scalar> cur,
                              const BasicSpectralGrid<Scalar>& grid, const EvalOptions& opt) {
  for (std::size_t i = term.factors.size(); i-- > 0;) {
    switch (term.factors[i].kind) {
      case OpFactor::Kind::Mul:
        cur *= coeff(i);
        break;
      case OpFactor::Kind::D:
        cur = grid.step_derivative(cur);
        break;
      case OpFactor::Kind::Dinv: {
        double left = static_cast<double>(cur(0));
        if (opt.check_decay &&
            std::abs(left) > opt.decay_tol * std::max(1.0, static_cast<double>(cur.abs().maxCoeff())))
          throw NumericError("not-decayed", "operand of Dinv is " + fmt(left) + " at the left edge");
        cur = grid.step_antiderivative(cur);
        break;
      }
    }
  }
  return to_scalar<Scalar>(term.weight) * cur;
}

template <typename Scalar>
FieldArray<Scalar> apply_with(const PseudoOp& op, const FieldMap<Scalar>& binding, const FieldArray<Scalar>& f,
                              const BasicSpectralGrid<Scalar>& grid, const EvalOptions& opt) {
  Evaluator<Scalar> ev(binding, grid, opt);
  std::map<std::string, FieldArray<Scalar>> coeffs;
  FieldArray<Scalar> out = FieldArray<Scalar>::Zero(grid.size());
  for (const auto& term : op.terms()) {
    auto coeff = [&](std::size_t i) -> const FieldArray<Scalar>& {
      const JetExpr& c = term.factors[i].coeff;
      std::string key = c.str();
      auto it = coeffs.find(key);
      if (it == coeffs.end()) it = coeffs.emplace(key, ev.expr(c)).first;
      return it->second;
    };
    out += apply_word<Scalar>(term, coeff, f, grid, opt);
  }
  return out;
}

}  // namespace

GridField eval_expr(const JetExpr& e, const Binding& binding, const SpectralGrid& grid, const EvalOptions& opt) {
  FieldMap<double> b = field_map(binding);
  return Evaluator<double>(b, grid, opt).expr(e);
}

GridField apply_operator(const PseudoOp& op, const Binding& binding, const GridField& f, const SpectralGrid& grid,
                         const EvalOptions& opt) {
  return apply_with<double>(op, field_map(binding), f, grid, opt);
}

// -------------------------------------------------------------- evolution

Trajectory evolve(const JetExpr& flow, const std::string& field, const GridField& initial, double t_end, double dt,
                  const SpectralGrid& grid, const EvolveOptions& opt) {
  if (initial.size() != grid.size()) throw std::invalid_argument("initial data does not match the grid");
  if (!(dt > 0) || t_end < 0) throw std::invalid_argument("need dt > 0 and t_end >= 0");
  const double bound = opt.cfl * std::pow(grid.dx(), 3);
  if (dt > bound) throw NumericError("cfl", "dt = " + fmt(dt) + " exceeds " + fmt(bound) + " = c (L/N)^3");

  // Split off a constant-coefficient leading linear term when there is one.
  const int top = flow.max_order(field);
  double lin = 0;
  JetExpr nonlinear = flow;
  if (top >= 1) {
    JetExpr a = partial(flow, atoms::jet(field, top));
    if (a.is_constant()) {
      lin = a.constant_value().get_d();
      nonlinear = flow - a * JetExpr::jet(field, top);
    }
  }
  const bool integrating = lin != 0;
  using Spectrum = SpectralGrid::Spectrum;
  const Eigen::Index n = grid.size();
  Spectrum half(n), full(n);
  if (integrating) {
    for (Eigen::Index j = 0; j < n; ++j) {
      std::complex<double> sym = lin * std::pow(std::complex<double>(0, grid.wavenumbers()(j)), top);
      if (j == n / 2 && top % 2 != 0) sym = 0;
      half(j) = std::exp(sym * (dt / 2));
      full(j) = half(j) * half(j);
    }
  }

  auto rhs = [&](const GridField& u) {
    Binding b{{field, {u, 0}}};
    return eval_expr(integrating ? nonlinear : flow, b, grid, opt.eval);
  };

  Trajectory traj;
  traj.scheme = integrating ? "integrating-factor RK4" : "RK4";
  const double norm0 = grid.l2_norm(initial);
  auto record = [&](double t, const GridField& u) {
    traj.times.push_back(t);
    traj.snapshots.push_back(u);
    traj.l2_drift.push_back(norm0 > 0 ? std::abs(grid.l2_norm(u) - norm0) / norm0 : 0.0);
  };
  auto guard = [&](double t, const GridField& u) {
    if (!u.allFinite() || u.abs().maxCoeff() > opt.blowup) throw NumericError("blow-up", "max norm exceeded at t = " + fmt(t));
    if (opt.require_positive && u.minCoeff() <= 0) throw NumericError("positivity", "field lost positivity at t = " + fmt(t));
  };

  GridField u = initial;
  guard(0, u);
  record(0, u);
  const long steps = std::lround(t_end / dt);
  for (long s = 1; s <= steps; ++s) {
    if (integrating) {
      Spectrum v = grid.forward(u);
      Spectrum k1 = grid.forward(rhs(u));
      Spectrum k2 = grid.forward(rhs(grid.inverse(half.cwiseProduct(v + (dt / 2) * k1))));
      Spectrum k3 = grid.forward(rhs(grid.inverse(half.cwiseProduct(v) + (dt / 2) * k2)));
      Spectrum k4 = grid.forward(rhs(grid.inverse(full.cwiseProduct(v) + dt * half.cwiseProduct(k3))));
      Spectrum next = full.cwiseProduct(v) +
                      (dt / 6) * (full.cwiseProduct(k1) + 2.0 * half.cwiseProduct(k2 + k3) + k4);
      u = grid.inverse(next);
    } else {
      GridField k1 = rhs(u);
      GridField k2 = rhs(u + (dt / 2) * k1);
      GridField k3 = rhs(u + (dt / 2) * k2);
      GridField k4 = rhs(u + dt * k3);
      u += (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    const double t = static_cast<double>(s) * dt;
    guard(t, u);
    if (s % opt.snapshot_every == 0 || s == steps) record(t, u);
  }
  return traj;
}

std::vector<double> flow_residuals(const Trajectory& traj, const JetExpr& flow, const std::string& field,
                                   const SpectralGrid& grid) {
  std::vector<double> out;
  const auto& ts = traj.times;
  for (std::size_t i = 2; i + 2 < ts.size(); ++i) {
    const double h = (ts[i + 2] - ts[i - 2]) / 4;
    GridField ut = (-traj.snapshots[i + 2] + 8 * traj.snapshots[i + 1] - 8 * traj.snapshots[i - 1] +
                    traj.snapshots[i - 2]) /
                   (12 * h);
    Binding b{{field, {traj.snapshots[i], 0}}};
    out.push_back((ut - eval_expr(flow, b, grid, {false, 1e-10, 1e-8})).abs().maxCoeff());
  }
  return out;
}

VerificationReport bt_time_preservation(const BacklundLink& link, const Trajectory& from, const Trajectory& to,
                                        const SpectralGrid& grid, double tol) {
  VerificationReport rep;
  rep.subject = link.name;
  rep.method = "numeric-transport";
  rep.assumptions = {"decay"};
  if (from.times.size() != to.times.size()) throw std::invalid_argument("trajectories are sampled differently");
  const double scale = std::max({from.snapshots.front().abs().maxCoeff(), to.snapshots.front().abs().maxCoeff(), 1e-300});
  for (std::size_t i = 0; i < from.times.size(); ++i) {
    if (std::abs(from.times[i] - to.times[i]) > 1e-12) throw std::invalid_argument("trajectory times differ");
    Binding b{{link.from_field, {from.snapshots[i], 0}}, {link.to_field, {to.snapshots[i], 0}}};
    rep.norms.push_back(eval_expr(link.relation, b, grid, {false, 1e-10, 1e-8}).abs().maxCoeff() / scale);
  }
  double worst = *std::max_element(rep.norms.begin(), rep.norms.end());
  rep.verdict = worst <= tol ? Verdict::Verified : Verdict::Failed;
  rep.message = "max relative relation norm " + fmt(worst) + " (tolerance " + fmt(tol) + ")";
  return rep;
}

// ---------------------------------------------------------------- reciprocal

namespace {

// Monotone piecewise cubic (Fritsch-Carlson) through increasing nodes.
double pchip(const std::vector<double>& xs, const std::vector<double>& ys, const std::vector<double>& slopes, double t) {
  auto it = std::upper_bound(xs.begin(), xs.end(), t);
  std::size_t i = it == xs.begin() ? 0 : static_cast<std::size_t>(it - xs.begin()) - 1;
  i = std::min(i, xs.size() - 2);
  const double h = xs[i + 1] - xs[i];
  const double s = (t - xs[i]) / h;
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
  return h00 * ys[i] + h10 * h * slopes[i] + h01 * ys[i + 1] + h11 * h * slopes[i + 1];
}

std::vector<double> pchip_slopes(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  std::vector<double> delta(n - 1), m(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) delta[i] = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
  m[0] = delta[0];
  m[n - 1] = delta[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0) continue;
    const double w1 = 2 * (xs[i + 1] - xs[i]) + (xs[i] - xs[i - 1]);
    const double w2 = (xs[i + 1] - xs[i]) + 2 * (xs[i] - xs[i - 1]);
    m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
  }
  return m;
}

}  // namespace

ReciprocalResult reciprocal_transform(const GridField& s, const SpectralGrid& grid) {
  Eigen::Index at = 0;
  const double smin = s.minCoeff(&at);
  if (smin <= 1e-6)
    throw NumericError("non-monotone", "s = " + fmt(smin) + " at x = " + fmt(grid.x()(at)) + " is not positive");
  const Eigen::Index n = grid.size();
  const double mean = s.mean();
  const double lbar = mean * grid.length();
  GridField periodic = grid.antiderivative(s) - mean * (grid.x() - grid.x_left());
  GridField xbar = mean * (grid.x() - grid.x_left()) + periodic;

  auto xbar_at = [&](const GridField& x) {
    return (mean * (x - grid.x_left()) + grid.interpolate(periodic, x) - periodic(0)).eval();
  };

  // Initial guess by monotone cubic interpolation of the inverse map.
  std::vector<double> xs(static_cast<std::size_t>(n) + 1), ys(xs.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    xs[static_cast<std::size_t>(i)] = xbar(i);
    ys[static_cast<std::size_t>(i)] = grid.x()(i);
  }
  xs.back() = lbar;
  ys.back() = grid.x_left() + grid.length();
  auto slopes = pchip_slopes(xs, ys);
  SpectralGrid bar(lbar, n, 0.0);
  GridField target = bar.x();
  GridField xstar(n);
  for (Eigen::Index j = 0; j < n; ++j) xstar(j) = pchip(xs, ys, slopes, target(j));
  // Newton polish against the trigonometric interpolant.
  for (int it = 0; it < 6; ++it) {
    GridField err = xbar_at(xstar) - target;
    xstar -= err / grid.interpolate(s, xstar);
    if (err.abs().maxCoeff() < 1e-14 * std::max(1.0, lbar)) break;
  }
  ReciprocalResult out{grid.interpolate(s, xstar), bar, xbar, 0.0};
  // Round trip: rho evaluated back at the images of the original nodes.
  GridField back = bar.interpolate(out.rho, xbar);
  out.roundtrip_error = (back - s).abs().maxCoeff();
  return out;
}

// ---------------------------------------------------------------- hereditary

namespace {

// Difference quotients amplify edge round-off well past any useful decay
// tolerance, so decay is checked on the inputs instead.
const EvalOptions kDifferenced{false, 1e-10, 1e-8};

// Extended precision keeps the eps_machine / step round-off of the quotients
// below what the operator's derivatives amplify into the defect.
using Wide = long double;
using WideGrid = BasicSpectralGrid<Wide>;
using WideField = FieldArray<Wide>;

// Central difference of op(base + eps dir) applied to arg. The difference is
// telescoped over the Mul factors of each word so that it is taken on the
// coefficients, before any derivative acts on it.
WideField directional(const PseudoOp& op, const std::string& field, const WideField& base, const WideField& dir,
                      const WideField& arg, const WideGrid& grid, const HereditaryOptions& opt) {
  FieldMap<Wide> b{{field, {base, 0}}};
  auto central = [&](Wide eps) {
    Evaluator<Wide> plus(b, grid, kDifferenced, {field, &dir, eps}), minus(b, grid, kDifferenced, {field, &dir, -eps});
    WideField out = WideField::Zero(grid.size());
    for (const auto& term : op.terms()) {
      std::vector<WideField> hi, lo;
      for (const auto& fac : term.factors) {
        hi.push_back(fac.kind == OpFactor::Kind::Mul ? plus.expr(fac.coeff) : WideField());
        lo.push_back(fac.kind == OpFactor::Kind::Mul ? minus.expr(fac.coeff) : WideField());
      }
      for (std::size_t k = 0; k < term.factors.size(); ++k) {
        if (term.factors[k].kind != OpFactor::Kind::Mul) continue;
        WideField quotient = (hi[k] - lo[k]) / (2 * eps);
        auto coeff = [&](std::size_t i) -> const WideField& { return i < k ? hi[i] : i > k ? lo[i] : quotient; };
        out += apply_word<Wide>(term, coeff, arg, grid, kDifferenced);
      }
    }
    return out;
  };
  const Wide step = opt.step;
  WideField coarse = central(step);
  WideField fine = central(step / 2);
  WideField extrap = (4 * fine - coarse) / 3;
  const Wide scale = std::max(extrap.abs().maxCoeff(), Wide(1e-300));
  if ((extrap - fine).abs().maxCoeff() > Wide(opt.richardson_tol) * scale)
    throw NumericError("step-size", "Richardson extrapolation disagrees beyond tolerance");
  return extrap;
}

}  // namespace

double hereditary_check(const PseudoOp& op, const std::string& field, const GridField& base, const GridField& f,
                        const GridField& g, const SpectralGrid& grid, const HereditaryOptions& opt) {
  for (const GridField* v : {&f, &g})
    if (std::abs((*v)(0)) > 1e-10 * std::max(1.0, v->abs().maxCoeff()))
      throw NumericError("not-decayed", "direction is " + fmt((*v)(0)) + " at the left edge");
  WideGrid wide(grid.length(), grid.size(), grid.x_left());
  const WideField wbase = base.cast<Wide>(), wf = f.cast<Wide>(), wg = g.cast<Wide>();
  FieldMap<Wide> b{{field, {wbase, 0}}};
  auto h = [&](const WideField& a, const WideField& c) {
    WideField phia = apply_with<Wide>(op, b, a, wide, kDifferenced);
    return (directional(op, field, wbase, phia, c, wide, opt) -
            apply_with<Wide>(op, b, directional(op, field, wbase, a, c, wide, opt), wide, kDifferenced))
        .eval();
  };
  WideField defect = h(wf, wg) - h(wg, wf);
  return static_cast<double>(wide.l2_norm(defect) / (wide.l2_norm(wf) * wide.l2_norm(wg)));
}

GridField random_bumps(const SpectralGrid& grid, unsigned seed, int count) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> amp(0.0, 1.0);
  std::uniform_real_distribution<double> centre(-grid.length() / 8, grid.length() / 8), width(1.0, 2.0);
  GridField out = GridField::Zero(grid.size());
  for (int i = 0; i < count; ++i) {
    const double a = amp(rng), c = grid.center() + centre(rng), w = width(rng);
    out += a * (-((grid.x() - c) / w).square()).exp();
  }
  return out;
}

std::vector<double> numeric_compare(const PseudoOp& a, const PseudoOp& b, const std::string& field,
                                    const GridField& base, const SpectralGrid& grid, int probes, unsigned seed) {
  Binding bind{{field, {base, 0}}};
  std::vector<double> out;
  for (int i = 0; i < probes; ++i) {
    GridField f = random_bumps(grid, seed * 1009U + static_cast<unsigned>(i));
    GridField fa = apply_operator(a, bind, f, grid), fb = apply_operator(b, bind, f, grid);
    out.push_back((fa - fb).abs().maxCoeff() / std::max(fa.abs().maxCoeff(), 1e-300));
  }
  return out;
}

}  // namespace kdvchart
