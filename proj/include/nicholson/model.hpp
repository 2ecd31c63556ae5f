#ifndef NICHOLSON_MODEL_HPP
#define NICHOLSON_MODEL_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "nicholson/errors.hpp"
#include "nicholson/torus.hpp"

namespace nicholson {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Scalings of the two-patch quasi-periodic family: mortality of patch 2 and
/// the two migration intensities.
struct ParamSet {
  double mu = 1.0;
  double alpha12 = 1.0;
  double alpha21 = 1.0;

  void validate() const {
    if (!(mu > 0.0)) throw InvalidArgument("mu must be positive");
    if (!(alpha12 >= 0.0)) throw InvalidArgument("alpha12 must be nonnegative");
    if (!(alpha21 >= 0.0)) throw InvalidArgument("alpha21 must be nonnegative");
  }

  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

/// 2pi-periodic shape functions available to the built-in family.
enum class Shape { Sin, Cos, Zero };

inline double eval_shape(Shape s, double x) {
  switch (s) {
    case Shape::Sin: return std::sin(x);
    case Shape::Cos: return std::cos(x);
    case Shape::Zero: return 0.0;
  }
  return 0.0;
}

/// Range of a shape over one period: [lo, hi].
inline std::pair<double, double> shape_range(Shape s) {
  return s == Shape::Zero ? std::pair{0.0, 0.0} : std::pair{-1.0, 1.0};
}

inline std::string_view to_string(Shape s) {
  switch (s) {
    case Shape::Sin: return "sin";
    case Shape::Cos: return "cos";
    case Shape::Zero: return "zero";
  }
  return "?";
}

inline std::optional<Shape> parse_shape(std::string_view s) {
  if (s == "sin") return Shape::Sin;
  if (s == "cos") return Shape::Cos;
  if (s == "zero") return Shape::Zero;
  return std::nullopt;
}

/// Birth nonlinearity g(c, v): Nicholson v e^{-cv} or the rational
/// v / (1 + c v^alpha) with alpha >= 1. Both have slope 1 at v = 0.
class Nonlinearity {
 public:
  enum class Kind { NicholsonExp, RationalAlpha };

  static Nonlinearity nicholson() { return Nonlinearity(Kind::NicholsonExp, 1.0); }
  static Nonlinearity rational(double alpha) {
    if (!(alpha >= 1.0)) throw InvalidArgument("rational nonlinearity needs alpha >= 1");
    return Nonlinearity(Kind::RationalAlpha, alpha);
  }

  Kind kind() const noexcept { return kind_; }
  double alpha() const noexcept { return alpha_; }

  double operator()(double c, double v) const {
    if (kind_ == Kind::NicholsonExp) return v * std::exp(-c * v);
    return v / (1.0 + c * std::pow(v, alpha_));
  }

  double slope_at_zero() const noexcept { return 1.0; }

  std::string describe() const {
    if (kind_ == Kind::NicholsonExp) return "nicholson";
    char buf[64];
    std::snprintf(buf, sizeof buf, "rational:%.17g", alpha_);
    return buf;
  }

  friend bool operator==(const Nonlinearity&, const Nonlinearity&) = default;

 private:
  Nonlinearity(Kind k, double alpha) : kind_(k), alpha_(alpha) {}
  Kind kind_;
  double alpha_;
};

/// Coefficients frozen at one instant.
struct CoeffValues {
  Vector d;     // loss rates
  Matrix a;     // migration rates, a(i, j) from patch j into patch i
  Vector beta;  // birth rates
  Vector c;     // crowding coefficients

  CoeffValues() = default;
  explicit CoeffValues(int m) : d(Vector::Zero(m)), a(Matrix::Zero(m, m)), beta(Vector::Zero(m)), c(Vector::Zero(m)) {}

  int dim() const noexcept { return static_cast<int>(d.size()); }
};

/// The two-patch quasi-periodic family. beta_scale multiplies the birth rates
/// and is 1 for the reference model.
struct PaperFamily {
  ParamSet params;
  Shape p = Shape::Sin;
  Shape q = Shape::Cos;
  std::array<double, 2> beta_scale{1.0, 1.0};

  /// Coefficients for given values of p(theta1 + t) and q(theta2 + sqrt2 t).
  void at_shapes(double pv, double qv, CoeffValues& out) const {
    const double c2 = 0.5 + 0.2 * pv + 0.01 * qv;
    const double a12 = params.alpha12 * (0.1 + 0.03 * pv + 0.01 * qv);
    const double a21 = params.alpha21 * (1.0 + 0.03 * pv + 0.01 * qv);
    const double m1 = 1.2;
    const double m2 = params.mu * (1.9 + 0.02 * pv);
    out.d.resize(2);
    out.a.resize(2, 2);
    out.beta.resize(2);
    out.c.resize(2);
    out.c << 1.0, c2;
    out.a << 0.0, a12, a21, 0.0;
    out.d << m1 + a21, m2 + a12;
    out.beta << beta_scale[0] * (5.0 + 0.03 * pv + 0.01 * qv), beta_scale[1] * (1.0 + 0.03 * pv + 0.01 * qv);
  }
};

struct ConstantFamily {
  CoeffValues values;
};

/// Any other torus-driven family. No closed-form extrema are known for it.
struct CustomFamily {
  std::string name;
  std::function<void(const TorusPoint&, double, CoeffValues&)> eval;
};

using CoefficientFamily = std::variant<PaperFamily, ConstantFamily, CustomFamily>;

/// A patch-structured delay population model over the torus base flow.
class SystemSpec {
 public:
  static SystemSpec paper(ParamSet params, Shape p = Shape::Sin, Shape q = Shape::Cos,
                          Nonlinearity g = Nonlinearity::nicholson(), std::vector<double> delays = {1.0, 2.0}) {
    params.validate();
    PaperFamily fam;
    fam.params = params;
    fam.p = p;
    fam.q = q;
    return SystemSpec(2, std::move(delays), g, fam);
  }

  static SystemSpec constant(CoeffValues values, std::vector<double> delays,
                             Nonlinearity g = Nonlinearity::nicholson()) {
    const int m = values.dim();
    if (values.a.rows() != m || values.a.cols() != m || values.beta.size() != m || values.c.size() != m)
      throw InvalidArgument("coefficient sizes disagree with the patch count");
    return SystemSpec(m, std::move(delays), g, ConstantFamily{std::move(values)});
  }

  static SystemSpec custom(int m, std::vector<double> delays, Nonlinearity g, CustomFamily fam) {
    if (!fam.eval) throw InvalidArgument("custom family needs an evaluator");
    return SystemSpec(m, std::move(delays), g, std::move(fam));
  }

  int dim() const noexcept { return m_; }
  const std::vector<double>& delays() const noexcept { return delays_; }
  double max_delay() const { return *std::max_element(delays_.begin(), delays_.end()); }
  double min_delay() const { return *std::min_element(delays_.begin(), delays_.end()); }
  const Nonlinearity& nonlinearity() const noexcept { return g_; }
  const CoefficientFamily& family() const noexcept { return family_; }

  const PaperFamily* paper_family() const noexcept { return std::get_if<PaperFamily>(&family_); }
  PaperFamily* paper_family() noexcept { return std::get_if<PaperFamily>(&family_); }

  /// Whether extrema over the whole torus are available without sampling.
  bool has_closed_form_bounds() const noexcept { return !std::holds_alternative<CustomFamily>(family_); }

  /// Copy with replaced parameters (two-patch family only).
  SystemSpec with_params(const ParamSet& params) const {
    params.validate();
    SystemSpec out = *this;
    PaperFamily* fam = out.paper_family();
    if (fam == nullptr) throw InvalidArgument("parameters only apply to the two-patch family");
    fam->params = params;
    return out;
  }

 private:
  SystemSpec(int m, std::vector<double> delays, Nonlinearity g, CoefficientFamily fam)
      : m_(m), delays_(std::move(delays)), g_(g), family_(std::move(fam)) {
    if (m_ < 1) throw InvalidArgument("patch count must be at least 1");
    if (static_cast<int>(delays_.size()) != m_) throw InvalidArgument("need one delay per patch");
    for (double r : delays_)
      if (!(r > 0.0) || !std::isfinite(r)) throw InvalidArgument("delays must be positive and finite");
    if (std::holds_alternative<PaperFamily>(family_) && m_ != 2)
      throw InvalidArgument("the built-in quasi-periodic family has exactly two patches");
  }

  int m_;
  std::vector<double> delays_;
  Nonlinearity g_;
  CoefficientFamily family_;
};

/// Coefficients at the base point theta.t, written into `out` (no allocation
/// once `out` has the right size).
inline void eval_coefficients(const SystemSpec& spec, const TorusPoint& theta, double t, CoeffValues& out) {
  std::visit(
      [&](const auto& fam) {
        using F = std::decay_t<decltype(fam)>;
        if constexpr (std::is_same_v<F, PaperFamily>) {
          fam.at_shapes(eval_shape(fam.p, theta.theta1() + t),
                        eval_shape(fam.q, theta.theta2() + std::numbers::sqrt2 * t), out);
        } else if constexpr (std::is_same_v<F, ConstantFamily>) {
          out = fam.values;
        } else {
          fam.eval(theta, t, out);
        }
      },
      spec.family());
}

inline CoeffValues eval_coefficients(const SystemSpec& spec, const TorusPoint& theta, double t) {
  CoeffValues out(spec.dim());
  eval_coefficients(spec, theta, t, out);
  return out;
}

/// f_i = -d_i y_i + sum_j a_ij y_j + beta_i g(c_i, y_i(t - r_i)).
template <class Now, class Delayed, class Out>
void rhs_into(const Nonlinearity& g, const CoeffValues& k, const Now& y_now, const Delayed& y_delayed, Out& out) {
  const Eigen::Index m = k.d.size();
  for (Eigen::Index i = 0; i < m; ++i) {
    double s = -k.d[i] * y_now[i];
    for (Eigen::Index j = 0; j < m; ++j) s += k.a(i, j) * y_now[j];
    s += k.beta[i] * g(k.c[i], y_delayed[i]);
    out[i] = s;
  }
}

inline Vector rhs(const SystemSpec& spec, const CoeffValues& coeffs, const Vector& y_now, const Vector& y_delayed) {
  Vector out(spec.dim());
  rhs_into(spec.nonlinearity(), coeffs, y_now, y_delayed, out);
  return out;
}

// ---------------------------------------------------------------------------
// Extrema of the coefficients and the structural hypotheses.

enum class BoundsMode { Auto, ClosedForm, Sampling };

/// Where the coefficients are inspected: along the orbit of `theta` on
/// [0, t_end] with step dt (sampling), or over the whole torus (closed form).
struct CheckGrid {
  TorusPoint theta{};
  double t_end = 200.0 * kTwoPi;
  double dt = 0.01;
  BoundsMode mode = BoundsMode::Auto;
};

/// Location of a coefficient sample. In closed-form mode `t` is NaN and
/// (p, q) is the corner of the shape-range box.
struct SampleSite {
  double t = std::numeric_limits<double>::quiet_NaN();
  double p = std::numeric_limits<double>::quiet_NaN();
  double q = std::numeric_limits<double>::quiet_NaN();

  bool is_corner() const noexcept { return std::isnan(t); }

  std::string describe() const {
    char buf[96];
    if (is_corner())
      std::snprintf(buf, sizeof buf, "corner p=%g q=%g", p, q);
    else
      std::snprintf(buf, sizeof buf, "t=%.6g", t);
    return buf;
  }
};

struct Witness {
  SampleSite site;
  int patch = 0;  // 1-based
  double value = 0.0;

  std::string describe() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, " patch %d value %.10g", patch, value);
    return site.describe() + buf;
  }
};

namespace detail {

inline bool resolve_closed_form(const SystemSpec& spec, BoundsMode mode) {
  switch (mode) {
    case BoundsMode::ClosedForm:
      if (!spec.has_closed_form_bounds()) throw InvalidArgument("family has no closed-form bounds");
      return true;
    case BoundsMode::Sampling: return false;
    case BoundsMode::Auto: return spec.has_closed_form_bounds();
  }
  return false;
}

}  // namespace detail

/// Calls visit(coeffs, site) for every inspected coefficient sample.
///
/// The built-in family is affine in (p, q) and p, q are evaluated at
/// independent angles, so over the orbit closure (the whole torus) every
/// affine or linear-fractional expression in the coefficients attains its
/// extrema on the corners of the range box of (p, q).
template <class Visit>
bool for_each_sample(const SystemSpec& spec, const CheckGrid& grid, Visit&& visit) {
  const bool closed = detail::resolve_closed_form(spec, grid.mode);
  CoeffValues k(spec.dim());
  if (closed) {
    if (const auto* fam = spec.paper_family()) {
      const auto [plo, phi] = shape_range(fam->p);
      const auto [qlo, qhi] = shape_range(fam->q);
      for (double pv : {plo, phi})
        for (double qv : {qlo, qhi}) {
          fam->at_shapes(pv, qv, k);
          visit(static_cast<const CoeffValues&>(k), SampleSite{std::numeric_limits<double>::quiet_NaN(), pv, qv});
        }
    } else {
      eval_coefficients(spec, grid.theta, 0.0, k);
      visit(static_cast<const CoeffValues&>(k), SampleSite{});
    }
    return true;
  }
  if (!(grid.dt > 0.0) || !(grid.t_end >= 0.0)) throw InvalidArgument("sampling grid needs dt > 0 and t_end >= 0");
  const long n = static_cast<long>(std::floor(grid.t_end / grid.dt + 1e-9));
  for (long k_ = 0; k_ <= n; ++k_) {
    const double t = static_cast<double>(k_) * grid.dt;
    eval_coefficients(spec, grid.theta, t, k);
    visit(static_cast<const CoeffValues&>(k), SampleSite{t, std::numeric_limits<double>::quiet_NaN(),
                                                         std::numeric_limits<double>::quiet_NaN()});
  }
  return false;
}

/// Extrema of the coefficients. phi_bar = 1 / c_plus is the upper corner of
/// the positively invariant box.
struct CoeffBounds {
  Vector c_minus, c_plus;
  Vector beta_minus, beta_plus;
  Vector d_minus;
  Matrix a_plus;
  Vector phi_bar;
  bool approximate = false;
};

inline CoeffBounds compute_bounds(const SystemSpec& spec, const CheckGrid& grid = {}) {
  const int m = spec.dim();
  constexpr double inf = std::numeric_limits<double>::infinity();
  CoeffBounds b;
  b.c_minus = Vector::Constant(m, inf);
  b.c_plus = Vector::Constant(m, -inf);
  b.beta_minus = Vector::Constant(m, inf);
  b.beta_plus = Vector::Constant(m, -inf);
  b.d_minus = Vector::Constant(m, inf);
  b.a_plus = Matrix::Constant(m, m, -inf);
  const bool exact = for_each_sample(spec, grid, [&](const CoeffValues& k, const SampleSite&) {
    b.c_minus = b.c_minus.cwiseMin(k.c);
    b.c_plus = b.c_plus.cwiseMax(k.c);
    b.beta_minus = b.beta_minus.cwiseMin(k.beta);
    b.beta_plus = b.beta_plus.cwiseMax(k.beta);
    b.d_minus = b.d_minus.cwiseMin(k.d);
    b.a_plus = b.a_plus.cwiseMax(k.a);
  });
  b.approximate = !exact;
  b.phi_bar = b.c_plus.cwiseInverse();
  return b;
}

struct HypothesisResult {
  std::string id;  // "a1" .. "a6"
  bool holds = true;
  std::string detail;
  std::optional<Witness> witness;  // worst sample
};

struct AssumptionReport {
  std::vector<HypothesisResult> items;
  bool exact = false;  // closed-form over the whole torus
  double d0 = 0.0;     // inf of the loss rates
  double c0 = 0.0;     // inf of the crowding coefficients

  bool all_hold() const {
    return std::all_of(items.begin(), items.end(), [](const auto& h) { return h.holds; });
  }
  const HypothesisResult* first_failure() const {
    for (const auto& h : items)
      if (!h.holds) return &h;
    return nullptr;
  }
};

namespace detail {

struct MinTracker {
  double value = std::numeric_limits<double>::infinity();
  Witness witness;
  void offer(double v, int patch, const SampleSite& s) {
    if (v < value) {
      value = v;
      witness = Witness{s, patch, v};
    }
  }
};

}  // namespace detail

/// Checks the structural hypotheses (a1)-(a6) on the coefficients.
inline AssumptionReport check_assumptions(const SystemSpec& spec, const CheckGrid& grid = {}) {
  const int m = spec.dim();
  detail::MinTracker d_min, beta_min, c_min, a_min, net_min;
  bool diag_zero = true;
  std::optional<Witness> diag_witness;
  const bool exact = for_each_sample(spec, grid, [&](const CoeffValues& k, const SampleSite& s) {
    for (int i = 0; i < m; ++i) {
      d_min.offer(k.d[i], i + 1, s);
      beta_min.offer(k.beta[i], i + 1, s);
      c_min.offer(k.c[i], i + 1, s);
      double outflow = 0.0;
      for (int j = 0; j < m; ++j) {
        outflow += k.a(j, i);
        if (i != j) a_min.offer(k.a(i, j), i + 1, s);
      }
      net_min.offer(k.d[i] - outflow, i + 1, s);
      if (k.a(i, i) != 0.0 && diag_zero) {
        diag_zero = false;
        diag_witness = Witness{s, i + 1, k.a(i, i)};
      }
    }
  });

  AssumptionReport rep;
  rep.exact = exact;
  rep.d0 = d_min.value;
  rep.c0 = c_min.value;
  const char* how = exact ? "over the torus" : "on the sampled orbit";
  auto detail_of = [&](const char* what, double v) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s = %.10g %s", what, v, how);
    return std::string(buf);
  };

  rep.items.push_back({"a1", true,
                       std::holds_alternative<CustomFamily>(spec.family())
                           ? "assumed for user-supplied torus evaluator"
                           : "holds by construction (torus-parameterized coefficients)",
                       std::nullopt});
  rep.items.push_back({"a2", d_min.value > 0.0, detail_of("min d_i", d_min.value), d_min.witness});
  {
    HypothesisResult h{"a3", true, "", std::nullopt};
    if (!diag_zero) {
      h.holds = false;
      h.detail = "nonzero diagonal migration rate";
      h.witness = diag_witness;
    } else if (m > 1 && a_min.value < 0.0) {
      h.holds = false;
      h.detail = detail_of("min a_ij", a_min.value);
      h.witness = a_min.witness;
    } else {
      h.detail = m > 1 ? detail_of("min a_ij", a_min.value) : "single patch, no migration";
      if (m > 1) h.witness = a_min.witness;
    }
    rep.items.push_back(std::move(h));
  }
  rep.items.push_back({"a4", beta_min.value > 0.0, detail_of("min beta_i", beta_min.value), beta_min.witness});
  rep.items.push_back({"a5", c_min.value > 0.0, detail_of("min c_i", c_min.value), c_min.witness});
  rep.items.push_back(
      {"a6", net_min.value > 0.0, detail_of("min d_i - sum_j a_ji", net_min.value), net_min.witness});
  return rep;
}

/// Outcome of the invariant-zone inequality
///   0 < beta_i / (d_i - sum_{j != i} a_ij c_i+/c_j+) <= exp(c_i-/c_i+)
/// for one patch.
struct ZonePatch {
  enum class Status { Holds, ExceedsUpper, NonpositiveRatio, NonpositiveDenominator };
  int patch = 0;  // 1-based
  Status status = Status::Holds;
  double upper = 0.0;        // exp(c_i-/c_i+)
  double max_ratio = 0.0;    // sup of the middle expression
  double min_ratio = 0.0;    // inf of the middle expression
  double margin = 0.0;       // upper - max_ratio
  double min_denominator = 0.0;
  Witness witness;           // where the ratio is largest (or the denominator smallest)
};

inline std::string_view to_string(ZonePatch::Status s) {
  switch (s) {
    case ZonePatch::Status::Holds: return "holds";
    case ZonePatch::Status::ExceedsUpper: return "exceeds upper bound";
    case ZonePatch::Status::NonpositiveRatio: return "nonpositive ratio";
    case ZonePatch::Status::NonpositiveDenominator: return "nonpositive denominator";
  }
  return "?";
}

struct ZoneReport {
  std::vector<ZonePatch> patches;
  bool exact = false;

  bool holds() const {
    return std::all_of(patches.begin(), patches.end(),
                       [](const ZonePatch& p) { return p.status == ZonePatch::Status::Holds; });
  }
  double margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& p : patches) m = std::min(m, p.margin);
    return m;
  }
};

inline ZoneReport check_invariant_zone(const SystemSpec& spec, const CoeffBounds& bounds, const CheckGrid& grid = {}) {
  const int m = spec.dim();
  constexpr double inf = std::numeric_limits<double>::infinity();
  ZoneReport rep;
  rep.patches.resize(m);
  for (int i = 0; i < m; ++i) {
    auto& p = rep.patches[i];
    p.patch = i + 1;
    p.upper = std::exp(bounds.c_minus[i] / bounds.c_plus[i]);
    p.max_ratio = -inf;
    p.min_ratio = inf;
    p.min_denominator = inf;
  }
  std::vector<Witness> den_witness(m), min_ratio_witness(m);
  rep.exact = for_each_sample(spec, grid, [&](const CoeffValues& k, const SampleSite& s) {
    for (int i = 0; i < m; ++i) {
      double den = k.d[i];
      for (int j = 0; j < m; ++j)
        if (j != i) den -= k.a(i, j) * bounds.c_plus[i] / bounds.c_plus[j];
      auto& p = rep.patches[i];
      if (den < p.min_denominator) {
        p.min_denominator = den;
        den_witness[i] = Witness{s, i + 1, den};
      }
      if (den <= 0.0) continue;
      const double ratio = k.beta[i] / den;
      if (ratio > p.max_ratio) {
        p.max_ratio = ratio;
        p.witness = Witness{s, i + 1, ratio};
      }
      if (ratio < p.min_ratio) {
        p.min_ratio = ratio;
        min_ratio_witness[i] = Witness{s, i + 1, ratio};
      }
    }
  });
  for (int i = 0; i < m; ++i) {
    auto& p = rep.patches[i];
    p.margin = p.upper - p.max_ratio;
    if (p.min_denominator <= 0.0) {
      p.status = ZonePatch::Status::NonpositiveDenominator;
      p.witness = den_witness[i];
      p.margin = -inf;
    } else if (!(p.min_ratio > 0.0)) {
      p.status = ZonePatch::Status::NonpositiveRatio;
      p.witness = min_ratio_witness[i];
    } else if (p.max_ratio > p.upper) {
      p.status = ZonePatch::Status::ExceedsUpper;
    }
  }
  return rep;
}

}  // namespace nicholson

#endif  // NICHOLSON_MODEL_HPP
