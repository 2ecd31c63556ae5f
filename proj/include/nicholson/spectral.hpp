#ifndef NICHOLSON_SPECTRAL_HPP
#define NICHOLSON_SPECTRAL_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "nicholson/dde.hpp"
#include "nicholson/model.hpp"

namespace nicholson {

/// Linearization along the null solution, restricted to a set of patches:
///   z_i' = -d_i z_i + sum_{l in I} a_il z_l + beta_i g'(0) z_i(t - r_i),  i in I.
class LinearizedSystem {
 public:
  LinearizedSystem(SystemSpec spec, std::vector<int> indices) : spec_(std::move(spec)), indices_(std::move(indices)) {
    if (indices_.empty()) throw InvalidArgument("linearized block needs at least one patch");
    for (int i : indices_)
      if (i < 0 || i >= spec_.dim()) throw InvalidArgument("patch index out of range");
    for (int i : indices_) delays_.push_back(spec_.delays()[i]);
  }

  const SystemSpec& spec() const noexcept { return spec_; }
  const std::vector<int>& indices() const noexcept { return indices_; }
  const std::vector<double>& delays() const noexcept { return delays_; }
  int dim() const noexcept { return static_cast<int>(indices_.size()); }

  /// Coefficient of the delayed term for local component i at base point theta.t.
  double delayed_coefficient(const CoeffValues& k, int local) const {
    return k.beta[indices_[local]] * spec_.nonlinearity().slope_at_zero();
  }

  /// Same system restricted to `local` (indices into this system's patches).
  LinearizedSystem restrict(const std::vector<int>& global_indices) const { return {spec_, global_indices}; }

 private:
  SystemSpec spec_;
  std::vector<int> indices_;
  std::vector<double> delays_;
};

inline LinearizedSystem linearize_at_zero(const SystemSpec& spec) {
  std::vector<int> all(spec.dim());
  std::iota(all.begin(), all.end(), 0);
  return {spec, std::move(all)};
}

/// A linearized block as a delay vector field at a fixed base point.
class LinearField {
 public:
  LinearField(LinearizedSystem sys, TorusPoint theta) : sys_(std::move(sys)), theta_(theta) {}

  int dim() const noexcept { return sys_.dim(); }
  const std::vector<double>& delays() const noexcept { return sys_.delays(); }

  auto at(double t) const {
    const int n = sys_.dim();
    const CoeffValues k = eval_coefficients(sys_.spec(), theta_, t);
    Matrix lin(n, n);
    Vector del(n);
    const auto& idx = sys_.indices();
    for (int i = 0; i < n; ++i) {
      for (int l = 0; l < n; ++l) lin(i, l) = k.a(idx[i], idx[l]);
      lin(i, i) -= k.d[idx[i]];
      del[i] = sys_.delayed_coefficient(k, i);
    }
    return [lin = std::move(lin), del = std::move(del)](const Vector& z, const Vector& zd, Vector& out) {
      out.noalias() = lin * z;
      out += del.cwiseProduct(zd);
    };
  }

 private:
  LinearizedSystem sys_;
  TorusPoint theta_;
};

// ---------------------------------------------------------------------------
// Block structure of the migration bound matrix.

/// Irreducible blocks of a nonnegative matrix with the digraph j -> i iff
/// a(i, j) > 0, ordered so that the permuted matrix is block lower triangular.
struct BlockDecomposition {
  Matrix a_plus;
  std::vector<int> permutation;           // permutation[k] = original index of the k-th row
  std::vector<std::vector<int>> blocks;   // original indices, ascending, in block order
  std::vector<int> persistence_blocks;    // 0-based block numbers of the index set I

  int block_count() const noexcept { return static_cast<int>(blocks.size()); }

  Matrix permuted() const {
    const auto m = static_cast<int>(permutation.size());
    Matrix p(m, m);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) p(r, c) = a_plus(permutation[r], permutation[c]);
    return p;
  }
};

namespace detail {

// Tarjan's algorithm; components come out in reverse topological order of
// the condensation.
class Tarjan {
 public:
  explicit Tarjan(const Matrix& a) : a_(a), n_(static_cast<int>(a.rows())), index_(n_, -1), low_(n_, 0), on_stack_(n_, false) {
    for (int v = 0; v < n_; ++v)
      if (index_[v] < 0) visit(v);
  }

  std::vector<std::vector<int>> components;
  std::vector<int> component_of;

 private:
  void visit(int v) {
    index_[v] = low_[v] = counter_++;
    stack_.push_back(v);
    on_stack_[v] = true;
    for (int w = 0; w < n_; ++w) {
      if (w == v || !(a_(w, v) > 0.0)) continue;  // edge v -> w
      if (index_[w] < 0) {
        visit(w);
        low_[v] = std::min(low_[v], low_[w]);
      } else if (on_stack_[w]) {
        low_[v] = std::min(low_[v], index_[w]);
      }
    }
    if (low_[v] == index_[v]) {
      std::vector<int> comp;
      int w;
      do {
        w = stack_.back();
        stack_.pop_back();
        on_stack_[w] = false;
        comp.push_back(w);
      } while (w != v);
      std::sort(comp.begin(), comp.end());
      components.push_back(std::move(comp));
    }
  }

  const Matrix& a_;
  int n_;
  int counter_ = 0;
  std::vector<int> index_, low_;
  std::vector<bool> on_stack_;
  std::vector<int> stack_;
};

}  // namespace detail

inline BlockDecomposition block_decompose(const Matrix& a_plus) {
  if (a_plus.rows() != a_plus.cols()) throw InvalidArgument("migration bound matrix must be square");
  const int m = static_cast<int>(a_plus.rows());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (a_plus(i, j) < 0.0) throw InvalidArgument("migration bound matrix must be nonnegative");

  detail::Tarjan scc(a_plus);
  const int k = static_cast<int>(scc.components.size());
  std::vector<int> comp_of(m);
  for (int c = 0; c < k; ++c)
    for (int v : scc.components[c]) comp_of[v] = c;

  // Condensation edges C -> D; Kahn's algorithm taking the component with the
  // smallest patch index first gives a deterministic topological order.
  std::vector<std::vector<bool>> edge(k, std::vector<bool>(k, false));
  std::vector<int> indegree(k, 0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i != j && a_plus(i, j) > 0.0 && comp_of[i] != comp_of[j] && !edge[comp_of[j]][comp_of[i]]) {
        edge[comp_of[j]][comp_of[i]] = true;
        ++indegree[comp_of[i]];
      }
  auto key = [&](int c) { return scc.components[c].front(); };
  auto later = [&](int x, int y) { return key(x) > key(y); };
  std::priority_queue<int, std::vector<int>, decltype(later)> ready(later);
  for (int c = 0; c < k; ++c)
    if (indegree[c] == 0) ready.push(c);

  BlockDecomposition out;
  out.a_plus = a_plus;
  std::vector<int> sources(k, 0);
  for (int c = 0; c < k; ++c) sources[c] = indegree[c] == 0;
  while (!ready.empty()) {
    const int c = ready.top();
    ready.pop();
    if (sources[c]) out.persistence_blocks.push_back(static_cast<int>(out.blocks.size()));
    out.blocks.push_back(scc.components[c]);
    for (int v : scc.components[c]) out.permutation.push_back(v);
    for (int d = 0; d < k; ++d)
      if (edge[c][d] && --indegree[d] == 0) ready.push(d);
  }
  // a single irreducible block is its own index set
  if (k == 1) out.persistence_blocks = {0};
  return out;
}

// ---------------------------------------------------------------------------
// Lyapunov exponents of the linearized blocks.

struct LyapunovOptions {
  double horizon = 2000.0;
  double renorm_threshold = 1e6;
  int checkpoints = 20;
  double convergence_gap = 1e-3;
};

struct LyapunovResult {
  double lambda = 0.0;
  double horizon = 0.0;
  /// (t, running estimate) at each checkpoint; the last entry is (T, lambda).
  std::vector<std::pair<double, double>> history;
  bool converged = false;
  int renormalizations = 0;

  /// Running estimate at the checkpoint closest to t.
  double estimate_at(double t) const {
    double best = std::numeric_limits<double>::quiet_NaN();
    double dist = std::numeric_limits<double>::infinity();
    for (const auto& [tc, e] : history)
      if (std::fabs(tc - t) < dist) {
        dist = std::fabs(tc - t);
        best = e;
      }
    return best;
  }
};

/// Growth rate of the block solution started from the constant map 1.
///
/// The segment sup-norm is monitored every step; when it leaves
/// [1/threshold, threshold] the whole solution (initial map included) is
/// divided by it and the logarithm is accumulated. Converged when the
/// estimates at T/2 and T differ by less than the convergence gap.
inline LyapunovResult lyapunov_exponent(const LinearizedSystem& block, const TorusPoint& theta,
                                        const LyapunovOptions& opts = {}, const SolverConfig& cfg = {}) {
  if (!(opts.horizon > 0.0)) throw InvalidArgument("horizon must be positive");
  if (!(opts.renorm_threshold > 1.0)) throw InvalidArgument("renormalization threshold must exceed 1");
  if (opts.checkpoints < 2) throw InvalidArgument("need at least two checkpoints");

  Stepper<LinearField> stepper(LinearField(block, theta), History::constant(block.dim(), 1.0), cfg);
  const long total = stepper.steps_to(opts.horizon);
  LyapunovResult res;
  res.horizon = stepper.trajectory().node_time(static_cast<std::size_t>(total));

  double log_acc = 0.0;
  double norm = 1.0;
  int next_checkpoint = 1;
  for (long n = 1; n <= total; ++n) {
    stepper.step();
    Trajectory& traj = stepper.trajectory();
    norm = traj.segment_norm(traj.size() - 1);
    if (!std::isfinite(norm)) throw NonfiniteState(n);
    if (norm > opts.renorm_threshold || norm < 1.0 / opts.renorm_threshold) {
      if (norm == 0.0) throw NonfiniteState(n);
      traj.rescale(1.0 / norm);
      log_acc += std::log(norm);
      norm = 1.0;
      ++res.renormalizations;
    }
    const long mark = total * next_checkpoint / opts.checkpoints;
    if (n == mark) {
      const double t = traj.node_time(static_cast<std::size_t>(n));
      res.history.emplace_back(t, (log_acc + std::log(norm)) / t);
      ++next_checkpoint;
    }
  }
  res.lambda = res.history.back().second;
  const double half = res.estimate_at(0.5 * res.horizon);
  res.converged = std::fabs(res.lambda - half) < opts.convergence_gap;
  return res;
}

// ---------------------------------------------------------------------------
// Persistence verdict.

enum class Verdict { Persistent, NotPersistent, Inconclusive };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Persistent: return "uniformly persistent at 0";
    case Verdict::NotPersistent: return "not persistent";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct BlockExponent {
  int block = 0;             // 0-based block number
  std::vector<int> indices;  // 0-based patches
  LyapunovResult result;
};

struct PersistenceOptions {
  LyapunovOptions lyapunov{};
  /// |lambda| below this is reported as near-critical.
  double decision_band = 1e-3;
  CheckGrid bounds_grid{};
};

struct PersistenceReport {
  BlockDecomposition decomposition;
  bool bounds_approximate = false;
  std::vector<BlockExponent> exponents;  // one per block of the index set I
  Verdict verdict = Verdict::Inconclusive;
  std::string reason;
};

/// Uniform persistence at 0 holds iff every block exponent of the index set I
/// is positive.
inline PersistenceReport persistence_verdict(const SystemSpec& spec, const TorusPoint& theta,
                                             const PersistenceOptions& opts = {}, const SolverConfig& cfg = {}) {
  PersistenceReport rep;
  CheckGrid grid = opts.bounds_grid;
  grid.theta = theta;
  const CoeffBounds bounds = compute_bounds(spec, grid);
  rep.bounds_approximate = bounds.approximate;
  Matrix a_plus = bounds.a_plus;
  for (int i = 0; i < a_plus.rows(); ++i) a_plus(i, i) = 0.0;
  rep.decomposition = block_decompose(a_plus);
  const LinearizedSystem full = linearize_at_zero(spec);

  bool any_negative = false;
  bool any_unsure = false;
  for (int b : rep.decomposition.persistence_blocks) {
    BlockExponent be;
    be.block = b;
    be.indices = rep.decomposition.blocks[b];
    be.result = lyapunov_exponent(full.restrict(be.indices), theta, opts.lyapunov, cfg);
    const double lam = be.result.lambda;
    if (!be.result.converged || std::fabs(lam) < opts.decision_band)
      any_unsure = true;
    else if (lam < 0.0)
      any_negative = true;
    rep.exponents.push_back(std::move(be));
  }
  if (any_negative) {
    rep.verdict = Verdict::NotPersistent;
    rep.reason = "a block of the index set has a negative exponent";
  } else if (any_unsure) {
    rep.verdict = Verdict::Inconclusive;
    rep.reason = "an exponent is near-critical or did not converge";
  } else {
    rep.verdict = Verdict::Persistent;
    rep.reason = "all exponents of the index set are positive";
  }
  return rep;
}

inline std::string format_indices(const std::vector<int>& idx, char sep = ';') {
  std::string s;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (k) s += sep;
    s += std::to_string(idx[k] + 1);
  }
  return s;
}

/// CSV rows `block,indices,lambda,converged` (1-based numbering).
inline void write_persistence_csv(std::ostream& os, const PersistenceReport& rep) {
  os << "block,indices,lambda,converged\n";
  char buf[32];
  for (const auto& be : rep.exponents) {
    std::snprintf(buf, sizeof buf, "%.17g", be.result.lambda);
    os << be.block + 1 << ',' << format_indices(be.indices) << ',' << buf << ','
       << (be.result.converged ? "true" : "false") << '\n';
  }
}

inline void write_persistence_report(std::ostream& os, const PersistenceReport& rep) {
  const auto& dec = rep.decomposition;
  os << "blocks: " << dec.block_count() << (rep.bounds_approximate ? " (sampled bounds)" : "") << '\n';
  for (int b = 0; b < dec.block_count(); ++b) os << "  block " << b + 1 << ": patches " << format_indices(dec.blocks[b], ',') << '\n';
  os << "index set I:";
  for (int b : dec.persistence_blocks) os << ' ' << b + 1;
  os << '\n';
  char buf[128];
  for (const auto& be : rep.exponents) {
    std::snprintf(buf, sizeof buf, "  lambda_%d = %.6f (T=%g, %s, %d renormalizations)\n", be.block + 1,
                  be.result.lambda, be.result.horizon, be.result.converged ? "converged" : "not converged",
                  be.result.renormalizations);
    os << buf;
  }
  os << "verdict: " << to_string(rep.verdict) << " (" << rep.reason << ")\n";
}

}  // namespace nicholson

#endif  // NICHOLSON_SPECTRAL_HPP
