#ifndef NICHOLSON_DDE_HPP
#define NICHOLSON_DDE_HPP

// Fixed-step Runge-Kutta integration of systems with constant discrete delays
//
//   y_i'(t) = f_i(t, y(t), y_i(t - r_i)),
//
// with cubic Hermite dense output. The step never exceeds the smallest delay,
// so delayed arguments of a step always fall on already computed history and
// the implicit stage equations involve the current step only.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "nicholson/errors.hpp"
#include "nicholson/model.hpp"
#include "nicholson/torus.hpp"

namespace nicholson {

enum class Method { GaussLegendre2, ExplicitRK23 };

inline std::string_view to_string(Method m) {
  return m == Method::GaussLegendre2 ? "gl2" : "rk23";
}

/// Butcher tableau with at most three stages.
struct ButcherTableau {
  int stages = 0;
  std::array<double, 3> c{};
  std::array<std::array<double, 3>, 3> a{};
  std::array<double, 3> b{};
  bool implicit = false;
};

/// Two-stage Gauss-Legendre collocation: order 4, A-stable.
inline const ButcherTableau& gauss_legendre2() {
  static const ButcherTableau tab = [] {
    const double s3 = std::numbers::sqrt3;
    ButcherTableau t;
    t.stages = 2;
    t.c = {0.5 - s3 / 6.0, 0.5 + s3 / 6.0, 0.0};
    t.a[0] = {0.25, 0.25 - s3 / 6.0, 0.0};
    t.a[1] = {0.25 + s3 / 6.0, 0.25, 0.0};
    t.b = {0.5, 0.5, 0.0};
    t.implicit = true;
    return t;
  }();
  return tab;
}

/// Third-order Bogacki-Shampine formula (the propagating half of the (2,3)
/// pair), used here with a fixed step.
inline const ButcherTableau& bogacki_shampine3() {
  static const ButcherTableau tab = [] {
    ButcherTableau t;
    t.stages = 3;
    t.c = {0.0, 0.5, 0.75};
    t.a[1] = {0.5, 0.0, 0.0};
    t.a[2] = {0.0, 0.75, 0.0};
    t.b = {2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0};
    return t;
  }();
  return tab;
}

inline const ButcherTableau& tableau(Method m) {
  return m == Method::GaussLegendre2 ? gauss_legendre2() : bogacki_shampine3();
}

/// R(z) = 1 + z b^T (I - zA)^{-1} 1, the amplification factor of one step on
/// y' = lambda y with z = h lambda.
inline std::complex<double> stability_function(const ButcherTableau& tab, std::complex<double> z) {
  const int s = tab.stages;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(s, s);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) m(i, j) -= z * tab.a[i][j];
  const Eigen::VectorXcd k = m.partialPivLu().solve(Eigen::VectorXcd::Ones(s));
  std::complex<double> acc = 0.0;
  for (int i = 0; i < s; ++i) acc += tab.b[i] * k[i];
  return 1.0 + z * acc;
}

struct SolverConfig {
  double h = 0.01;
  double stage_tol = 1e-12;
  int max_stage_iters = 50;
  Method method = Method::GaussLegendre2;

  void validate(double min_delay) const {
    if (!(h > 0.0)) throw InvalidArgument("step size must be positive");
    if (h > min_delay) throw InvalidArgument("step size must not exceed the smallest delay");
    if (!(stage_tol > 0.0)) throw InvalidArgument("stage tolerance must be positive");
    if (max_stage_iters < 1) throw InvalidArgument("need at least one stage iteration");
  }
};

/// A delay vector field. `at(t)` freezes the explicit time dependence and
/// returns a callable g(y_now, y_delayed, out) where y_delayed[i] = y_i(t - r_i).
template <class F>
concept DelayField = requires(const F& f, double t, const Vector& y, Vector& out) {
  { f.dim() } -> std::convertible_to<int>;
  { f.delays() } -> std::convertible_to<const std::vector<double>&>;
  f.at(t)(y, y, out);
};

/// The population model at a fixed base point.
class NicholsonField {
 public:
  NicholsonField(SystemSpec spec, TorusPoint theta) : spec_(std::move(spec)), theta_(theta) {}

  int dim() const noexcept { return spec_.dim(); }
  const std::vector<double>& delays() const noexcept { return spec_.delays(); }
  const SystemSpec& spec() const noexcept { return spec_; }
  const TorusPoint& theta() const noexcept { return theta_; }

  auto at(double t) const {
    return [k = eval_coefficients(spec_, theta_, t), g = spec_.nonlinearity()](const Vector& y, const Vector& yd,
                                                                             Vector& out) {
      rhs_into(g, k, y, yd, out);
    };
  }

 private:
  SystemSpec spec_;
  TorusPoint theta_;
};

/// Field given by a plain function f(t, y, yd, out); handy for test problems.
class FunctionField {
 public:
  using Fn = std::function<void(double, const Vector&, const Vector&, Vector&)>;

  FunctionField(std::vector<double> delays, Fn fn) : delays_(std::move(delays)), fn_(std::move(fn)) {}

  int dim() const noexcept { return static_cast<int>(delays_.size()); }
  const std::vector<double>& delays() const noexcept { return delays_; }

  auto at(double t) const {
    return [this, t](const Vector& y, const Vector& yd, Vector& out) { fn_(t, y, yd, out); };
  }

 private:
  std::vector<double> delays_;
  Fn fn_;
};

class Trajectory;

/// Initial map on [-r, 0], evaluated at s <= 0 relative to the start time.
class History {
 public:
  static History constant(Vector v) { return History(Constant{std::move(v)}, 0); }
  static History constant(int dim, double value) { return constant(Vector::Constant(dim, value)); }

  /// fn(i, s) gives component i at s <= 0.
  static History function(int dim, std::function<double(int, double)> fn) {
    return History(Function{std::move(fn)}, dim);
  }

  /// The segment of `prior` ending at time `at`: s -> prior(at + s).
  static History continuation(std::shared_ptr<const Trajectory> prior, double at);

  int dim() const;
  double component(int i, double s) const;
  Vector operator()(double s) const {
    Vector v(dim());
    for (int i = 0; i < v.size(); ++i) v[i] = component(i, s);
    return v;
  }

  void rescale(double factor) { scale_ *= factor; }

 private:
  struct Constant {
    Vector value;
  };
  struct Function {
    std::function<double(int, double)> fn;
  };
  struct Continuation {
    std::shared_ptr<const Trajectory> prior;
    double at;
  };

  History(std::variant<Constant, Function, Continuation> v, int dim) : repr_(std::move(v)), dim_(dim) {}

  std::variant<Constant, Function, Continuation> repr_;
  int dim_;
  double scale_ = 1.0;
};

/// Dense numerical solution on a uniform grid t0 + k h. Nodes carry the state
/// and its derivative; between nodes the solution is the cubic Hermite
/// interpolant, before t0 it is the initial map.
class Trajectory {
 public:
  Trajectory(int dim, double h, std::vector<double> delays, History history, double t0 = 0.0)
      : dim_(dim), h_(h), t0_(t0), delays_(std::move(delays)), history_(std::move(history)) {
    if (static_cast<int>(delays_.size()) != dim_) throw InvalidArgument("need one delay per component");
    if (history_.dim() != dim_) throw InvalidArgument("history dimension mismatch");
    max_delay_ = *std::max_element(delays_.begin(), delays_.end());
  }

  int dim() const noexcept { return dim_; }
  double h() const noexcept { return h_; }
  double t0() const noexcept { return t0_; }
  double max_delay() const noexcept { return max_delay_; }
  const std::vector<double>& delays() const noexcept { return delays_; }
  const History& history() const noexcept { return history_; }
  std::size_t size() const noexcept { return states_.size() / static_cast<std::size_t>(dim_); }
  bool empty() const noexcept { return states_.empty(); }

  double node_time(std::size_t k) const noexcept { return t0_ + static_cast<double>(k) * h_; }
  double last_time() const noexcept { return node_time(size() - 1); }

  Eigen::Map<const Vector> state(std::size_t k) const { return {states_.data() + k * dim_, dim_}; }
  Eigen::Map<const Vector> derivative(std::size_t k) const { return {derivs_.data() + k * dim_, dim_}; }
  Eigen::Map<const Vector> back() const { return state(size() - 1); }

  void push_back(const Vector& y, const Vector& dy) {
    states_.insert(states_.end(), y.data(), y.data() + dim_);
    derivs_.insert(derivs_.end(), dy.data(), dy.data() + dim_);
  }

  /// Multiplies the whole solution, history included, by `factor`.
  void rescale(double factor) {
    for (double& v : states_) v *= factor;
    for (double& v : derivs_) v *= factor;
    history_.rescale(factor);
  }

  double eval_component(int i, double t) const {
    if (t < t0_) {
      if (t < t0_ - max_delay_ * (1.0 + 1e-12) - 1e-12) throw OutOfRange(t);
      return history_.component(i, t - t0_);
    }
    if (empty()) throw OutOfRange(t);
    const double x = (t - t0_) / h_;
    const auto n = static_cast<double>(size() - 1);
    if (x > n + 1e-9) throw OutOfRange(t);
    const double kr = std::round(x);
    if (kr <= n && node_time(static_cast<std::size_t>(kr)) == t) return states_[static_cast<std::size_t>(kr) * dim_ + i];
    if (n == 0.0) return states_[i];
    double kf = std::floor(x);
    if (kf >= n) kf = n - 1.0;
    const auto k = static_cast<std::size_t>(kf);
    const double s = (t - node_time(k)) / h_;
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    const double h10 = s3 - 2.0 * s2 + s;
    const double h01 = -2.0 * s3 + 3.0 * s2;
    const double h11 = s3 - s2;
    const std::size_t a = k * dim_ + i;
    const std::size_t b = a + dim_;
    return h00 * states_[a] + h10 * h_ * derivs_[a] + h01 * states_[b] + h11 * h_ * derivs_[b];
  }

  Vector eval(double t) const {
    Vector v(dim_);
    for (int i = 0; i < dim_; ++i) v[i] = eval_component(i, t);
    return v;
  }

  /// Sup-norm of the segment ending at node k: component i over
  /// [t_k - r_i, t_k], taken over stored nodes (and the initial map sampled
  /// at the same spacing where the window reaches before t0).
  double segment_norm(std::size_t k) const {
    double norm = 0.0;
    const double tk = node_time(k);
    for (int i = 0; i < dim_; ++i) {
      const double lo = tk - delays_[i];
      const auto steps = static_cast<long>(std::floor(delays_[i] / h_ + 1e-9));
      const long first = static_cast<long>(k) - steps;
      for (long j = std::max(first, 0L); j <= static_cast<long>(k); ++j)
        norm = std::max(norm, std::fabs(states_[static_cast<std::size_t>(j) * dim_ + i]));
      for (long j = first; j < 0; ++j) norm = std::max(norm, std::fabs(history_.component(i, static_cast<double>(j) * h_)));
      if (first < 0 || lo < t0_) norm = std::max(norm, std::fabs(history_.component(i, std::max(lo - t0_, -delays_[i]))));
    }
    return norm;
  }

 private:
  int dim_;
  double h_;
  double t0_;
  double max_delay_ = 0.0;
  std::vector<double> delays_;
  History history_;
  std::vector<double> states_;
  std::vector<double> derivs_;
};

inline History History::continuation(std::shared_ptr<const Trajectory> prior, double at) {
  const int dim = prior->dim();
  return History(Continuation{std::move(prior), at}, dim);
}

inline int History::dim() const {
  if (const auto* c = std::get_if<Constant>(&repr_)) return static_cast<int>(c->value.size());
  return dim_;
}

inline double History::component(int i, double s) const {
  return std::visit(
      [&](const auto& r) -> double {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, Constant>)
          return scale_ * r.value[i];
        else if constexpr (std::is_same_v<R, Function>)
          return scale_ * r.fn(i, s);
        else
          return scale_ * r.prior->eval_component(i, r.at + s);
      },
      repr_);
}

/// Stage derivatives of one Gauss-Legendre step.
struct StageSolution {
  Vector k1;
  Vector k2;
  double residual = 0.0;  // sup-norm of K - F(K) at the returned K
  int iterations = 0;
  bool newton = false;  // fixed-point iteration failed and Newton finished the job
};

namespace detail {

inline double sup_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

template <class Frozen>
struct StageSystem {
  const std::array<Frozen, 2>& g;
  const std::array<Vector, 2>& delayed;
  const Vector& y;
  double h;
  const ButcherTableau& tab;
  mutable Vector ys;
  mutable Vector out;

  // F(K)_s = g_s(y + h sum_j a_sj K_j, delayed_s)
  void operator()(const Vector& k, Vector& fk) const {
    const auto m = y.size();
    for (int s = 0; s < 2; ++s) {
      ys = y + h * (tab.a[s][0] * k.head(m) + tab.a[s][1] * k.tail(m));
      g[s](ys, delayed[s], out);
      fk.segment(s * m, m) = out;
    }
  }
};

}  // namespace detail

/// Solves the Gauss-Legendre stage equations for the step leaving the last
/// node of `traj`. Damped fixed-point iteration (relaxation 1, then 0.5 once
/// the residual stops decreasing) with a finite-difference Newton fallback.
///
/// Convergence means |K - F(K)| <= stage_tol * max(|K|, |y_n|) in the sup
/// norm; Newton also stops once its correction is below that bound.
template <DelayField F>
StageSolution solve_stages(const F& field, const Trajectory& traj, const SolverConfig& cfg, long step_index = 0,
                           const Vector* guess = nullptr) {
  const ButcherTableau& tab = gauss_legendre2();
  const int m = field.dim();
  const std::size_t n = traj.size() - 1;
  const double tn = traj.node_time(n);
  const double h = cfg.h;
  const Vector y = traj.state(n);
  const auto& delays = field.delays();

  using Frozen = decltype(field.at(0.0));
  std::array<Frozen, 2> g{field.at(tn + tab.c[0] * h), field.at(tn + tab.c[1] * h)};
  std::array<Vector, 2> delayed{Vector(m), Vector(m)};
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < m; ++i) delayed[s][i] = traj.eval_component(i, tn + tab.c[s] * h - delays[i]);

  detail::StageSystem<Frozen> sys{g, delayed, y, h, tab, Vector(m), Vector(m)};

  Vector k0(2 * m);
  if (guess != nullptr) {
    k0 = *guess;
  } else {
    const Vector dy = traj.derivative(n);
    k0 << dy, dy;
  }
  const double y_norm = detail::sup_norm(y);
  auto bound = [&](const Vector& k) { return cfg.stage_tol * std::max(detail::sup_norm(k), y_norm); };

  StageSolution sol;
  Vector k = k0;
  Vector fk(2 * m);
  Vector r(2 * m);
  double omega = 1.0;
  double prev = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < cfg.max_stage_iters; ++it) {
    sys(k, fk);
    r = fk - k;
    const double res = detail::sup_norm(r);
    if (!std::isfinite(res)) break;
    if (res <= bound(k)) {
      sol.k1 = k.head(m);
      sol.k2 = k.tail(m);
      sol.residual = res;
      sol.iterations = it + 1;
      return sol;
    }
    if (res >= prev) {
      if (omega < 1.0) break;
      omega = 0.5;
    }
    prev = res;
    k += omega * r;
  }

  // Newton on G(K) = K - F(K) with a forward-difference Jacobian.
  sol.newton = true;
  k = k0;
  Eigen::MatrixXd jac(2 * m, 2 * m);
  Vector kp(2 * m);
  Vector fp(2 * m);
  double res = std::numeric_limits<double>::infinity();
  for (int nt = 0; nt < cfg.max_stage_iters; ++nt) {
    sys(k, fk);
    r = k - fk;
    res = detail::sup_norm(r);
    if (!std::isfinite(res)) break;
    if (res <= bound(k)) {
      sol.k1 = k.head(m);
      sol.k2 = k.tail(m);
      sol.residual = res;
      sol.iterations = it + nt + 1;
      return sol;
    }
    for (int j = 0; j < 2 * m; ++j) {
      const double eps = 1e-7 * std::max(1.0, std::fabs(k[j]));
      kp = k;
      kp[j] += eps;
      sys(kp, fp);
      jac.col(j) = -(fp - fk) / eps;
      jac(j, j) += 1.0;
    }
    const Vector delta = jac.partialPivLu().solve(-r);
    k += delta;
    if (!k.allFinite()) break;
    if (detail::sup_norm(delta) <= bound(k)) {
      sys(k, fk);
      sol.k1 = k.head(m);
      sol.k2 = k.tail(m);
      sol.residual = detail::sup_norm(k - fk);
      sol.iterations = it + nt + 1;
      return sol;
    }
  }
  throw StageSolveDiverged(step_index, res);
}

/// Incremental integrator; owns the trajectory it extends one step at a time.
template <DelayField F>
class Stepper {
 public:
  Stepper(F field, History history, SolverConfig cfg, double t0 = 0.0)
      : field_(std::move(field)),
        cfg_(cfg),
        tab_(tableau(cfg.method)),
        traj_(field_.dim(), cfg.h, field_.delays(), std::move(history), t0) {
    const auto& r = field_.delays();
    cfg_.validate(*std::min_element(r.begin(), r.end()));
    const int m = field_.dim();
    y_.resize(m);
    dy_.resize(m);
    yd_.resize(m);
    for (auto& k : k_) k.resize(m);
    for (int i = 0; i < m; ++i) y_[i] = traj_.history().component(i, 0.0);
    derivative_at(t0, y_, dy_);
    if (!y_.allFinite() || !dy_.allFinite()) throw NonfiniteState(0);
    traj_.push_back(y_, dy_);
  }

  const Trajectory& trajectory() const noexcept { return traj_; }
  Trajectory& trajectory() noexcept { return traj_; }
  Trajectory release() && { return std::move(traj_); }
  const F& field() const noexcept { return field_; }
  long steps() const noexcept { return static_cast<long>(traj_.size()) - 1; }
  double time() const noexcept { return traj_.last_time(); }

  /// Number of uniform steps needed to reach t_end from t0.
  long steps_to(double t_end) const {
    const double x = (t_end - traj_.t0()) / cfg_.h;
    return static_cast<long>(std::ceil(x - 1e-9));
  }

  void advance_to(double t_end) {
    const long target = steps_to(t_end);
    while (steps() < target) step();
  }

  void step() {
    const long idx = steps() + 1;
    const double tn = traj_.last_time();
    const double h = cfg_.h;
    const int m = field_.dim();
    y_ = traj_.back();
    if (tab_.implicit) {
      const Vector* guess = nullptr;
      if (have_prev_) {
        // linear extrapolation of the previous stage derivatives
        guess_.resize(2 * m);
        guess_.head(m) = 2.0 * k_[0] - prev_k_[0];
        guess_.tail(m) = 2.0 * k_[1] - prev_k_[1];
        guess = &guess_;
      }
      const StageSolution sol = solve_stages(field_, traj_, cfg_, idx, guess);
      // before the second step there is nothing to extrapolate from
      prev_k_[0] = have_prev_ ? k_[0] : sol.k1;
      prev_k_[1] = have_prev_ ? k_[1] : sol.k2;
      k_[0] = sol.k1;
      k_[1] = sol.k2;
      have_prev_ = true;
      y_ += h * (tab_.b[0] * k_[0] + tab_.b[1] * k_[1]);
    } else {
      k_[0] = traj_.derivative(traj_.size() - 1);
      Vector ys(m);
      for (int s = 1; s < tab_.stages; ++s) {
        ys = y_;
        for (int j = 0; j < s; ++j)
          if (tab_.a[s][j] != 0.0) ys += h * tab_.a[s][j] * k_[j];
        const double ts = tn + tab_.c[s] * h;
        fill_delayed(ts);
        field_.at(ts)(ys, yd_, k_[s]);
      }
      for (int s = 0; s < tab_.stages; ++s) y_ += h * tab_.b[s] * k_[s];
    }
    const double t_next = traj_.node_time(traj_.size());
    derivative_at(t_next, y_, dy_);
    if (!y_.allFinite() || !dy_.allFinite()) throw NonfiniteState(idx);
    traj_.push_back(y_, dy_);
  }

 private:
  void fill_delayed(double t) {
    const auto& r = field_.delays();
    for (int i = 0; i < field_.dim(); ++i) yd_[i] = traj_.eval_component(i, t - r[i]);
  }

  void derivative_at(double t, const Vector& y, Vector& out) {
    fill_delayed(t);
    field_.at(t)(y, yd_, out);
  }

  F field_;
  SolverConfig cfg_;
  const ButcherTableau& tab_;
  Trajectory traj_;
  Vector y_, dy_, yd_, guess_;
  std::array<Vector, 3> k_;
  std::array<Vector, 2> prev_k_;
  bool have_prev_ = false;
};

/// Integrates `field` on [0, t_end] from `history` with the configured method.
template <DelayField F>
Trajectory integrate(F field, History history, double t_end, const SolverConfig& cfg) {
  if (!(t_end >= 0.0)) throw InvalidArgument("t_end must be nonnegative");
  Stepper<F> stepper(std::move(field), std::move(history), cfg);
  stepper.advance_to(t_end);
  return std::move(stepper).release();
}

/// Integrates the population model at base point theta.
inline Trajectory integrate(const SystemSpec& spec, const TorusPoint& theta, History history, double t_end,
                            const SolverConfig& cfg) {
  return integrate(NicholsonField(spec, theta), std::move(history), t_end, cfg);
}

template <DelayField F>
Trajectory integrate_explicit_rk23(F field, History history, double t_end, SolverConfig cfg) {
  cfg.method = Method::ExplicitRK23;
  return integrate(std::move(field), std::move(history), t_end, cfg);
}

inline Trajectory integrate_explicit_rk23(const SystemSpec& spec, const TorusPoint& theta, History history,
                                          double t_end, SolverConfig cfg) {
  cfg.method = Method::ExplicitRK23;
  return integrate(spec, theta, std::move(history), t_end, cfg);
}

/// Writes `t,y1,...,ym` rows for every node with t <= t_end, times shifted by
/// `time_offset`; 17 significant digits.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj, double t_end, double time_offset = 0.0) {
  os << 't';
  for (int i = 1; i <= traj.dim(); ++i) os << ",y" << i;
  os << '\n';
  if (!(t_end > traj.t0())) return;
  char buf[32];
  const double slack = 1e-9 * traj.h();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double t = traj.node_time(k);
    if (t > t_end + slack) break;
    std::snprintf(buf, sizeof buf, "%.17g", t + time_offset);
    os << buf;
    const auto y = traj.state(k);
    for (int i = 0; i < traj.dim(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", y[i]);
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace nicholson

#endif  // NICHOLSON_DDE_HPP
