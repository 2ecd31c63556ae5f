#ifndef NICHOLSON_ATTRACTOR_HPP
#define NICHOLSON_ATTRACTOR_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "nicholson/dde.hpp"
#include "nicholson/model.hpp"
#include "nicholson/torus.hpp"

namespace nicholson {

struct PullbackConfig {
  double tol = 1e-6;
  double lag = 10.0;     // compare y(T) with y(T - lag)
  double t_step = 10.0;  // horizon increment
  double t_max = 2000.0;
  /// Initial map; the constant map 1 when empty.
  std::optional<History> initial;

  void validate() const {
    if (!(tol > 0.0)) throw InvalidArgument("pullback tolerance must be positive");
    if (!(lag > 0.0)) throw InvalidArgument("pullback lag must be positive");
    if (!(t_step > 0.0)) throw InvalidArgument("pullback horizon step must be positive");
    if (!(t_max >= lag)) throw InvalidArgument("pullback horizon cap must be at least the lag");
  }
};

struct PullbackResult {
  Vector value;           // y(T, theta.(-T), phi)
  double t_final = 0.0;   // T
  double gap = 0.0;       // |y(T) - y(T - lag)|, sup norm on R^m
  double segment_gap = 0.0;  // same comparison over the whole final segments
  bool trivial = false;   // converged to the null solution
};

/// Final segment and value of y(T, theta.(-T), phi).
class PullbackSample {
 public:
  PullbackSample(const SystemSpec& spec, const TorusPoint& theta, const History& initial, double horizon,
                 const SolverConfig& solver)
      : horizon_(horizon) {
    if (horizon > 0.0)
      traj_ = std::make_shared<Trajectory>(integrate(spec, advance_base(theta, -horizon), initial, horizon, solver));
    else
      initial_ = initial;
  }

  double component(int i, double s) const {
    return traj_ ? traj_->eval_component(i, horizon_ + s) : initial_->component(i, s);
  }
  Vector value(int m) const {
    Vector v(m);
    for (int i = 0; i < m; ++i) v[i] = component(i, 0.0);
    return v;
  }

 private:
  double horizon_;
  std::shared_ptr<const Trajectory> traj_;
  std::optional<History> initial_;
};

/// Approximates b(theta)(0) = lim_{T->inf} y(T, theta.(-T), phi) by fresh
/// integrations at T = lag, lag + t_step, ... until y(T) and y(T - lag) are
/// within tol.
inline PullbackResult pullback_point(const SystemSpec& spec, const TorusPoint& theta, const PullbackConfig& cfg = {},
                                     const SolverConfig& solver = {}) {
  cfg.validate();
  const int m = spec.dim();
  const History initial = cfg.initial ? *cfg.initial : History::constant(m, 1.0);
  const bool chained = std::fabs(cfg.lag - cfg.t_step) <= 1e-12 * cfg.lag;

  std::optional<PullbackSample> previous;  // sample at T - lag when chained
  double last_gap = std::numeric_limits<double>::infinity();
  Vector last_value;
  const long max_iter = static_cast<long>(std::floor((cfg.t_max - cfg.lag) / cfg.t_step + 1e-9));
  for (long it = 0; it <= max_iter; ++it) {
    const double horizon = cfg.lag + static_cast<double>(it) * cfg.t_step;
    PullbackSample current(spec, theta, initial, horizon, solver);
    PullbackSample before = (chained && previous) ? *previous
                                                  : PullbackSample(spec, theta, initial, horizon - cfg.lag, solver);
    const Vector v = current.value(m);
    const Vector w = before.value(m);
    if (!v.allFinite()) throw NonfiniteState(static_cast<long>(horizon / solver.h));
    last_gap = (v - w).cwiseAbs().maxCoeff();
    last_value = v;
    if (last_gap < cfg.tol) {
      PullbackResult res;
      res.value = v;
      res.t_final = horizon;
      res.gap = last_gap;
      const auto& r = spec.delays();
      for (int i = 0; i < m; ++i) {
        const auto steps = static_cast<long>(std::floor(r[i] / solver.h + 1e-9));
        for (long j = 0; j <= steps; ++j) {
          const double s = -static_cast<double>(j) * solver.h;
          res.segment_gap = std::max(res.segment_gap, std::fabs(current.component(i, s) - before.component(i, s)));
        }
      }
      res.trivial = v.cwiseAbs().maxCoeff() < 10.0 * cfg.tol;
      return res;
    }
    previous.emplace(std::move(current));
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "last gap %.3g", last_gap);
  throw NoConvergence(cfg.t_max, buf);
}

/// Runs fn(0..count-1) on up to `jobs` threads. Exceptions are stored per item.
inline std::vector<std::exception_ptr> run_parallel(std::size_t count, unsigned jobs,
                                                    const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (jobs == 1) {
    worker();
    return errors;
  }
  std::vector<std::jthread> pool;
  pool.reserve(jobs);
  for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  return errors;
}

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Pullback values over the uniform grid theta_i = 2 pi i / n (i = 0..n-1)
/// in each angle. Node (i, j) is stored at index i * n + j.
struct AttractorMesh {
  int n = 0;
  int dim = 0;
  std::vector<TorusPoint> grid;
  std::vector<Vector> values;
  std::vector<double> horizons;
  std::vector<std::string> failures;  // empty string where the node converged
  std::optional<ParamSet> params;
  Vector phi_bar;
  double tol = 0.0;
  std::vector<std::string> invariant_violations;

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * n + j; }
  const Vector& value(int i, int j) const { return values[index(i, j)]; }
  bool partial() const {
    return std::any_of(failures.begin(), failures.end(), [](const std::string& s) { return !s.empty(); });
  }
  bool invariants_hold() const { return invariant_violations.empty(); }
};

inline double grid_angle(int i, int n) { return kTwoPi * static_cast<double>(i) / static_cast<double>(n); }

inline AttractorMesh compute_mesh(const SystemSpec& spec, int n, const PullbackConfig& cfg = {},
                                  const SolverConfig& solver = {}, unsigned jobs = 1) {
  if (n < 1) throw InvalidArgument("mesh resolution must be at least 1");
  cfg.validate();
  AttractorMesh mesh;
  mesh.n = n;
  mesh.dim = spec.dim();
  mesh.tol = cfg.tol;
  if (const auto* fam = spec.paper_family()) mesh.params = fam->params;
  mesh.phi_bar = compute_bounds(spec).phi_bar;
  const std::size_t count = static_cast<std::size_t>(n) * n;
  mesh.grid.reserve(count);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) mesh.grid.emplace_back(grid_angle(i, n), grid_angle(j, n));
  mesh.values.assign(count, Vector::Constant(spec.dim(), std::numeric_limits<double>::quiet_NaN()));
  mesh.horizons.assign(count, std::numeric_limits<double>::quiet_NaN());
  mesh.failures.assign(count, std::string{});

  const auto errors = run_parallel(count, jobs, [&](std::size_t k) {
    const PullbackResult r = pullback_point(spec, mesh.grid[k], cfg, solver);
    mesh.values[k] = r.value;
    mesh.horizons[k] = r.t_final;
  });
  for (std::size_t k = 0; k < count; ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const std::exception& e) {
      mesh.failures[k] = e.what();
    }
  }

  const double slack = 10.0 * cfg.tol;
  for (std::size_t k = 0; k < count; ++k) {
    if (!mesh.failures[k].empty()) continue;
    for (int c = 0; c < mesh.dim; ++c) {
      const double v = mesh.values[k][c];
      if (!(v > 0.0) || v > mesh.phi_bar[c] + slack) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "node (%zu,%zu) component %d value %.10g outside (0, %.10g]", k / n, k % n,
                      c + 1, v, mesh.phi_bar[c] + slack);
        mesh.invariant_violations.emplace_back(buf);
      }
    }
  }
  return mesh;
}

// ---------------------------------------------------------------------------
// Parameter studies.

enum class StudyAxis { BothMigrations, Alpha12Only, Mortality };

inline std::string_view to_string(StudyAxis a) {
  switch (a) {
    case StudyAxis::BothMigrations: return "both";
    case StudyAxis::Alpha12Only: return "alpha12";
    case StudyAxis::Mortality: return "mortality";
  }
  return "?";
}

inline std::optional<StudyAxis> parse_axis(std::string_view s) {
  if (s == "both" || s == "both-migrations") return StudyAxis::BothMigrations;
  if (s == "alpha12") return StudyAxis::Alpha12Only;
  if (s == "mortality" || s == "mu") return StudyAxis::Mortality;
  return std::nullopt;
}

inline ParamSet apply_axis(ParamSet p, StudyAxis axis, double value) {
  switch (axis) {
    case StudyAxis::BothMigrations: p.alpha12 = p.alpha21 = value; break;
    case StudyAxis::Alpha12Only: p.alpha12 = value; break;
    case StudyAxis::Mortality: p.mu = value; break;
  }
  return p;
}

/// Componentwise order between two meshes.
enum class Order { Equal, Increasing, Decreasing, Mixed };

inline std::string_view to_string(Order o) {
  switch (o) {
    case Order::Equal: return "equal";
    case Order::Increasing: return "increasing";
    case Order::Decreasing: return "decreasing";
    case Order::Mixed: return "mixed";
  }
  return "?";
}

/// Sign of next - prev at every node for component c, up to `slack`.
inline Order compare_meshes(const AttractorMesh& prev, const AttractorMesh& next, int c, double slack) {
  if (prev.n != next.n) throw InvalidArgument("meshes of different resolution");
  bool up = false, down = false;
  for (std::size_t k = 0; k < prev.values.size(); ++k) {
    const double d = next.values[k][c] - prev.values[k][c];
    if (std::isnan(d)) return Order::Mixed;
    if (d > slack) up = true;
    if (d < -slack) down = true;
  }
  if (up && down) return Order::Mixed;
  if (up) return Order::Increasing;
  if (down) return Order::Decreasing;
  return Order::Equal;
}

/// Combines consecutive pair orders; Equal pairs do not break a trend.
inline Order combine_orders(const std::vector<Order>& pairs) {
  Order acc = Order::Equal;
  for (Order o : pairs) {
    if (o == Order::Mixed) return Order::Mixed;
    if (o == Order::Equal) continue;
    if (acc == Order::Equal)
      acc = o;
    else if (acc != o)
      return Order::Mixed;
  }
  return acc;
}

struct StudyEntry {
  double value = 0.0;
  ParamSet params;
  AssumptionReport assumptions;
  ZoneReport zone;
  AttractorMesh mesh;
};

struct StudyReport {
  StudyAxis axis = StudyAxis::BothMigrations;
  std::vector<StudyEntry> entries;
  /// pair_orders[k][c]: entries[k] -> entries[k+1], component c.
  std::vector<std::vector<Order>> pair_orders;
  std::vector<Order> overall;  // per component
  double slack = 0.0;

  bool uniformly_ordered() const {
    return std::none_of(overall.begin(), overall.end(), [](Order o) { return o == Order::Mixed; });
  }
};

inline StudyReport parameter_study(const SystemSpec& base, StudyAxis axis, const std::vector<double>& values, int n,
                                   const PullbackConfig& cfg = {}, const SolverConfig& solver = {},
                                   unsigned jobs = 1) {
  const PaperFamily* fam = base.paper_family();
  if (fam == nullptr) throw InvalidArgument("parameter studies need the two-patch family");
  if (values.empty()) throw InvalidArgument("parameter study needs at least one value");
  StudyReport rep;
  rep.axis = axis;
  rep.slack = cfg.tol;
  for (double v : values) {
    StudyEntry e;
    e.value = v;
    e.params = apply_axis(fam->params, axis, v);
    const SystemSpec spec = base.with_params(e.params);
    e.assumptions = check_assumptions(spec);
    e.zone = check_invariant_zone(spec, compute_bounds(spec));
    e.mesh = compute_mesh(spec, n, cfg, solver, jobs);
    rep.entries.push_back(std::move(e));
  }
  const int m = base.dim();
  for (std::size_t k = 0; k + 1 < rep.entries.size(); ++k) {
    std::vector<Order> row(m);
    for (int c = 0; c < m; ++c) row[c] = compare_meshes(rep.entries[k].mesh, rep.entries[k + 1].mesh, c, rep.slack);
    rep.pair_orders.push_back(std::move(row));
  }
  rep.overall.resize(m, Order::Equal);
  for (int c = 0; c < m; ++c) {
    std::vector<Order> col;
    for (const auto& row : rep.pair_orders) col.push_back(row[c]);
    rep.overall[c] = combine_orders(col);
  }
  return rep;
}

}  // namespace nicholson

#endif  // NICHOLSON_ATTRACTOR_HPP
