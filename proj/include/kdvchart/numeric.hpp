#pragma once

#include "kdvchart/chart.hpp"
#include "kdvchart/pseudo_op.hpp"

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace kdvchart {

class NumericError : public std::runtime_error {
 public:
  NumericError(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

/// Periodic grid x_j = x_left + j L / N with spectral calculus. Fields that
/// tend to different constants at the two edges are handled by splitting off
/// a smooth tanh step centred in the domain.
template <typename Scalar>
class BasicSpectralGrid {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using Complex = std::complex<Scalar>;
  using Spectrum = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicSpectralGrid(Scalar length, Eigen::Index n) : BasicSpectralGrid(length, n, -length / 2) {}

  BasicSpectralGrid(Scalar length, Eigen::Index n, Scalar x_left) : length_(length), n_(n), x_left_(x_left) {
    if (n < 64 || (n & (n - 1)) != 0) throw std::invalid_argument("grid size must be a power of two >= 64");
    if (!(length > 0)) throw std::invalid_argument("grid length must be positive");
    x_ = Array::LinSpaced(n, 0, Scalar(n - 1)) * dx() + x_left;
    k_.resize(n);
    const Scalar base = Scalar(2 * M_PI) / length;
    for (Eigen::Index j = 0; j < n; ++j) k_(j) = base * Scalar(j < n / 2 ? j : j - n);
  }

  Scalar length() const { return length_; }
  Eigen::Index size() const { return n_; }
  Scalar x_left() const { return x_left_; }
  Scalar dx() const { return length_ / Scalar(n_); }
  Scalar center() const { return x_left_ + length_ / 2; }
  const Array& x() const { return x_; }
  const Array& wavenumbers() const { return k_; }

  Spectrum forward(const Array& f) const {
    Vector in = f.matrix();
    Spectrum out;
    fft_.fwd(out, in);
    return out;
  }

  Array inverse(const Spectrum& s) const {
    Vector out;
    fft_.inv(out, s);
    return out.array();
  }

  /// Periodic spectral derivative; the Nyquist mode is dropped for odd orders.
  Array derivative(const Array& f, int order = 1) const {
    if (order == 0) return f;
    Spectrum s = forward(f);
    const Complex i(0, 1);
    for (Eigen::Index j = 0; j < n_; ++j) s(j) *= std::pow(i * k_(j), order);
    if (order % 2 != 0) s(n_ / 2) = 0;
    return inverse(s);
  }

  /// Antiderivative of a periodic field, zero at the left edge.
  Array antiderivative(const Array& f) const {
    Spectrum s = forward(f);
    const Scalar mean = s(0).real() / Scalar(n_);
    s(0) = 0;
    s(n_ / 2) = 0;
    const Complex i(0, 1);
    for (Eigen::Index j = 1; j < n_; ++j)
      if (j != n_ / 2) s(j) /= i * k_(j);
    Array p = inverse(s);
    return mean * (x_ - x_left_) + (p - p(0));
  }

  /// Smooth step H = (1 + tanh(x - c)) / 2 and its derivatives.
  Array step(int order) const {
    Array t = (x_ - center()).tanh();
    // d^k tanh = T_k(tanh) with T_0(t) = t and T_{k+1} = T_k'(t) (1 - t^2).
    std::vector<Scalar> poly{0, 1};
    for (int k = 0; k < order; ++k) {
      std::vector<Scalar> d(poly.size() > 1 ? poly.size() - 1 : 1, Scalar(0));
      for (std::size_t p = 1; p < poly.size(); ++p) d[p - 1] = Scalar(p) * poly[p];
      std::vector<Scalar> next(d.size() + 2, Scalar(0));
      for (std::size_t p = 0; p < d.size(); ++p) {
        next[p] += d[p];
        next[p + 2] -= d[p];
      }
      poly = std::move(next);
    }
    Array out = Array::Zero(n_);
    for (std::size_t p = poly.size(); p-- > 0;) out = out * t + poly[p];
    if (order == 0) out += Scalar(1);
    return out / Scalar(2);
  }

  /// Edge-to-edge jump used by the step-aware calculus.
  Scalar jump(const Array& f) const { return f(n_ - 1) - f(0); }

  /// Derivative of a field whose edge limits differ.
  Array step_derivative(const Array& f, int order = 1) const {
    if (order == 0) return f;
    const Scalar j = jump(f);
    return j * step(order) + derivative(f - j * step(0), order);
  }

  /// Antiderivative from the left edge of a field whose edge limits differ.
  Array step_antiderivative(const Array& f) const {
    const Scalar j = jump(f);
    // integral of H from x_left: (x - x_left + log cosh(x - c) - log cosh(x_left - c)) / 2
    auto logcosh = [](Scalar y) {
      Scalar a = std::abs(y);
      return a + std::log1p(std::exp(-2 * a)) - Scalar(M_LN2);
    };
    Array h(n_);
    const Scalar base = logcosh(x_left_ - center());
    for (Eigen::Index q = 0; q < n_; ++q) h(q) = (x_(q) - x_left_ + logcosh(x_(q) - center()) - base) / 2;
    return j * h + antiderivative(f - j * step(0));
  }

  /// Trigonometric interpolant of a periodic field at arbitrary points.
  Array interpolate(const Array& f, const Array& at) const {
    Spectrum s = forward(f);
    Array out(at.size());
    for (Eigen::Index q = 0; q < at.size(); ++q) {
      Complex acc = 0;
      const Scalar y = at(q) - x_left_;
      for (Eigen::Index j = 0; j < n_; ++j) {
        if (j == n_ / 2) {
          acc += s(j) * Scalar(std::cos(k_(j) * y));
          continue;
        }
        acc += s(j) * std::exp(Complex(0, k_(j) * y));
      }
      out(q) = acc.real() / Scalar(n_);
    }
    return out;
  }

  Scalar l2_norm(const Array& f) const { return std::sqrt(f.square().sum() * dx()); }

 private:
  Scalar length_;
  Eigen::Index n_;
  Scalar x_left_;
  Array x_;
  Array k_;
  mutable Eigen::FFT<Scalar> fft_;
};

using SpectralGrid = BasicSpectralGrid<double>;
using GridField = Eigen::ArrayXd;

/// Samples bound to a field name. `base_order` says which derivative the
/// samples represent (a potential is bound through its derivative).
struct FieldBinding {
  GridField samples;
  int base_order = 0;
};

using Binding = std::map<std::string, FieldBinding>;

struct EvalOptions {
  bool check_decay = true;
  double decay_tol = 1e-10;
  double denominator_tol = 1e-8;
};

/// Pointwise value of a symbolic expression; jets by spectral derivatives,
/// D^-1 atoms by antiderivatives pinned at the left edge.
GridField eval_expr(const JetExpr& e, const Binding& binding, const SpectralGrid& grid, const EvalOptions& opt = {});

/// Applies an operator to sampled data factor by factor.
GridField apply_operator(const PseudoOp& op, const Binding& binding, const GridField& f, const SpectralGrid& grid,
                         const EvalOptions& opt = {});

struct EvolveOptions {
  double cfl = 1.0;             // dt <= cfl (L/N)^3
  double blowup = 1e8;
  bool require_positive = false;
  int snapshot_every = 1;       // steps between stored snapshots
  EvalOptions eval{false, 1e-10, 1e-8};
};

struct Trajectory {
  std::vector<double> times;
  std::vector<GridField> snapshots;
  std::vector<double> l2_drift;  // relative change of the L2 norm
  std::string scheme;
};

/// Method of lines for field_t = flow. Uses an integrating factor for a
/// constant-coefficient third derivative and classical RK4 otherwise.
Trajectory evolve(const JetExpr& flow, const std::string& field, const GridField& initial, double t_end, double dt,
                  const SpectralGrid& grid, const EvolveOptions& opt = {});

/// Max-norm of field_t - flow at the interior snapshots, with the time
/// derivative by fourth-order central differences.
std::vector<double> flow_residuals(const Trajectory& traj, const JetExpr& flow, const std::string& field,
                                   const SpectralGrid& grid);

/// Relation norm along two trajectories sampled at the same times.
VerificationReport bt_time_preservation(const BacklundLink& link, const Trajectory& from, const Trajectory& to,
                                        const SpectralGrid& grid, double tol = 1e-5);

struct ReciprocalResult {
  GridField rho;
  SpectralGrid grid;      // uniform grid in the new variable, starting at 0
  GridField xbar;         // new variable at the original nodes
  double roundtrip_error;
};

ReciprocalResult reciprocal_transform(const GridField& s, const SpectralGrid& grid);

struct HereditaryOptions {
  double step = 1e-5;
  double richardson_tol = 1e-3;
};

/// ||h(f,g) - h(g,f)|| / (||f|| ||g||) with
/// h(f,g) = Phi'[Phi f] g - Phi Phi'[f] g.
double hereditary_check(const PseudoOp& op, const std::string& field, const GridField& base, const GridField& f,
                        const GridField& g, const SpectralGrid& grid, const HereditaryOptions& opt = {});

/// Seeded sum of Gaussian bumps; decays at the edges.
GridField random_bumps(const SpectralGrid& grid, unsigned seed, int count = 3);

/// Relative max-norm difference of two operators on seeded random data.
std::vector<double> numeric_compare(const PseudoOp& a, const PseudoOp& b, const std::string& field,
                                    const GridField& base, const SpectralGrid& grid, int probes, unsigned seed);

}  // namespace kdvchart
