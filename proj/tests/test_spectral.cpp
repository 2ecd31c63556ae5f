#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "nicholson/spectral.hpp"
#include "oracles.hpp"

using namespace nicholson;

namespace {

SystemSpec scalar(double d, double beta, double c = 1.0, double r = 1.0) {
  CoeffValues k(1);
  k.d << d;
  k.beta << beta;
  k.c << c;
  return SystemSpec::constant(k, {r});
}

LyapunovOptions horizon(double t) {
  LyapunovOptions o;
  o.horizon = t;
  return o;
}

Matrix from_rows(int m, std::initializer_list<double> v) {
  Matrix a(m, m);
  auto it = v.begin();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a(i, j) = *it++;
  return a;
}

}  // namespace

// --- linearization -----------------------------------------------------------------

TEST(Linearize, DelayedCoefficientIsBirthRate) {
  const SystemSpec spec = SystemSpec::paper(ParamSet{});
  const LinearizedSystem lin = linearize_at_zero(spec);
  const CoeffValues k = eval_coefficients(spec, TorusPoint(), 0.0);
  EXPECT_EQ(lin.dim(), 2);
  EXPECT_DOUBLE_EQ(lin.delayed_coefficient(k, 0), 5.01);
  EXPECT_DOUBLE_EQ(lin.delayed_coefficient(k, 1), 1.01);
}

TEST(Linearize, SlopeAtZeroMatchesDifferenceQuotient) {
  for (const Nonlinearity& g : {Nonlinearity::nicholson(), Nonlinearity::rational(1.0), Nonlinearity::rational(3.0)}) {
    const double eps = 1e-7;
    EXPECT_NEAR(g(0.8, eps) / eps, g.slope_at_zero(), 1e-6);
  }
}

TEST(Linearize, ZeroStateIsFixed) {
  const LinearField f(linearize_at_zero(SystemSpec::paper(ParamSet{})), TorusPoint(1.0, 1.0));
  Vector out(2);
  f.at(3.0)(Vector::Zero(2), Vector::Zero(2), out);
  EXPECT_EQ(out.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Linearize, RestrictionKeepsDelays) {
  const LinearizedSystem lin = linearize_at_zero(SystemSpec::paper(ParamSet{})).restrict({1});
  EXPECT_EQ(lin.dim(), 1);
  EXPECT_EQ(lin.delays()[0], 2.0);
  EXPECT_THROW(linearize_at_zero(SystemSpec::paper(ParamSet{})).restrict({2}), InvalidArgument);
}

// --- block decomposition ---------------------------------------------------------------

TEST(Blocks, TwoPatchCycleIsIrreducible) {
  const BlockDecomposition d = block_decompose(from_rows(2, {0, 0.143, 1.04, 0}));
  EXPECT_EQ(d.block_count(), 1);
  EXPECT_EQ(d.persistence_blocks, std::vector<int>{0});
  EXPECT_EQ(d.blocks[0], (std::vector<int>{0, 1}));
}

TEST(Blocks, ZeroMatrixSplitsIntoSingletons) {
  const BlockDecomposition d = block_decompose(Matrix::Zero(3, 3));
  EXPECT_EQ(d.block_count(), 3);
  EXPECT_EQ(d.persistence_blocks, (std::vector<int>{0, 1, 2}));
}

TEST(Blocks, OneWayMigration) {
  // patch 1 feeds patch 2 only: a(2,1) > 0
  const BlockDecomposition d = block_decompose(from_rows(2, {0, 0, 1, 0}));
  ASSERT_EQ(d.block_count(), 2);
  EXPECT_EQ(d.blocks[0], std::vector<int>{0});
  EXPECT_EQ(d.blocks[1], std::vector<int>{1});
  EXPECT_EQ(d.persistence_blocks, std::vector<int>{0});
}

TEST(Blocks, SinglePatch) {
  const BlockDecomposition d = block_decompose(Matrix::Zero(1, 1));
  EXPECT_EQ(d.block_count(), 1);
  EXPECT_EQ(d.persistence_blocks, std::vector<int>{0});
}

TEST(Blocks, RejectsNegativeEntries) { EXPECT_THROW(block_decompose(from_rows(2, {0, -1, 0, 0})), InvalidArgument); }

TEST(Blocks, MatchesClosureOracleOnRandomMatrices) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(1, 6);
  std::bernoulli_distribution sparse(0.3);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = size(rng);
    Matrix a = Matrix::Zero(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        if (i != j && sparse(rng)) a(i, j) = 1.0;
    const BlockDecomposition d = block_decompose(a);
    const std::vector<int> comp = oracle::scc_by_closure(a);

    // same partition
    std::vector<int> block_of(m, -1);
    for (int b = 0; b < d.block_count(); ++b)
      for (int v : d.blocks[b]) block_of[v] = b;
    for (int u = 0; u < m; ++u)
      for (int v = 0; v < m; ++v) ASSERT_EQ(block_of[u] == block_of[v], comp[u] == comp[v]) << "trial " << trial;

    // permutation soundness: a bijection giving a block lower triangular matrix
    std::set<int> seen(d.permutation.begin(), d.permutation.end());
    ASSERT_EQ(static_cast<int>(seen.size()), m);
    const Matrix p = d.permuted();
    std::vector<int> block_at(m);
    for (int r = 0; r < m; ++r) block_at[r] = block_of[d.permutation[r]];
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c)
        if (p(r, c) > 0.0) ASSERT_GE(block_at[r], block_at[c]) << "trial " << trial;

    // the index set is exactly the blocks nobody feeds into
    std::vector<bool> fed(d.block_count(), false);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        if (a(i, j) > 0.0 && block_of[i] != block_of[j]) fed[block_of[i]] = true;
    std::vector<int> expected;
    for (int b = 0; b < d.block_count(); ++b)
      if (!fed[b]) expected.push_back(b);
    ASSERT_EQ(d.persistence_blocks, expected) << "trial " << trial;
  }
}

// --- Lyapunov exponents ------------------------------------------------------------------

TEST(Lyapunov, PureDecay) {
  const LyapunovResult r = lyapunov_exponent(linearize_at_zero(scalar(1.0, 0.0)), TorusPoint(), horizon(2000.0));
  EXPECT_NEAR(r.lambda, -1.0, 1e-3);
  EXPECT_TRUE(r.converged);
  EXPECT_GT(r.renormalizations, 0);
  EXPECT_EQ(r.history.size(), 20u);
}

TEST(Lyapunov, ConstantCoefficientsMatchCharacteristicRoot) {
  struct Case {
    double d, beta, r;
  };
  for (const Case& c : {Case{1.0, 0.5, 1.0}, Case{2.0, 0.5, 2.0}, Case{1.0, 3.0, 1.0}, Case{0.5, 0.2, 0.7}}) {
    const LyapunovResult res =
        lyapunov_exponent(linearize_at_zero(scalar(c.d, c.beta, 1.0, c.r)), TorusPoint(), horizon(2000.0));
    EXPECT_NEAR(res.lambda, oracle::characteristic_root(c.d, c.beta, c.r), 1e-3) << c.d << ' ' << c.beta << ' ' << c.r;
  }
}

TEST(Lyapunov, RenormalizationThresholdDoesNotMatter) {
  const SystemSpec spec = SystemSpec::paper(ParamSet{});
  LyapunovOptions a = horizon(300.0), b = horizon(300.0);
  a.renorm_threshold = 1e3;
  b.renorm_threshold = 1e6;
  const LyapunovResult ra = lyapunov_exponent(linearize_at_zero(spec), TorusPoint(), a);
  const LyapunovResult rb = lyapunov_exponent(linearize_at_zero(spec), TorusPoint(), b);
  EXPECT_GT(ra.renormalizations, rb.renormalizations);
  EXPECT_NEAR(ra.lambda, rb.lambda, 1e-4);
}

TEST(Lyapunov, RejectsBadOptions) {
  LyapunovOptions o;
  o.renorm_threshold = 1.0;
  EXPECT_THROW(lyapunov_exponent(linearize_at_zero(scalar(1, 1)), TorusPoint(), o), InvalidArgument);
  o = horizon(-1.0);
  EXPECT_THROW(lyapunov_exponent(linearize_at_zero(scalar(1, 1)), TorusPoint(), o), InvalidArgument);
}

TEST(Lyapunov, ReferenceModelExponent) {
  const LyapunovResult r = lyapunov_exponent(linearize_at_zero(SystemSpec::paper(ParamSet{})), TorusPoint(), horizon(2000.0));
  EXPECT_NEAR(r.lambda, 0.597, 0.02);
  EXPECT_TRUE(r.converged);
}

// --- persistence -----------------------------------------------------------------------------

TEST(Persistence, ReferenceModelPersists) {
  PersistenceOptions o;
  o.lyapunov.horizon = 1000.0;
  const PersistenceReport rep = persistence_verdict(SystemSpec::paper(ParamSet{}), TorusPoint(), o);
  EXPECT_EQ(rep.verdict, Verdict::Persistent);
  ASSERT_EQ(rep.exponents.size(), 1u);
  EXPECT_EQ(rep.exponents[0].indices, (std::vector<int>{0, 1}));
}

TEST(Persistence, NoBirthsMeansNoPersistence) {
  SystemSpec spec = SystemSpec::paper(ParamSet{});
  spec.paper_family()->beta_scale = {0.0, 0.0};
  PersistenceOptions o;
  // fast decay: the O(1/T) offset needs T > ~4400 to pass the T/2 vs T check
  o.lyapunov.horizon = 6000.0;
  const PersistenceReport rep = persistence_verdict(spec, TorusPoint(), o);
  EXPECT_EQ(rep.verdict, Verdict::NotPersistent);
  EXPECT_LT(rep.exponents[0].result.lambda, 0.0);
}

TEST(Persistence, DecoupledPatchWithNegativeRate) {
  CoeffValues k(2);
  k.d << 1.0, 2.0;
  k.beta << 3.0, 0.5;
  k.c << 1.0, 1.0;
  const SystemSpec spec = SystemSpec::constant(k, {1.0, 2.0});
  PersistenceOptions o;
  const PersistenceReport rep = persistence_verdict(spec, TorusPoint(), o);
  ASSERT_EQ(rep.exponents.size(), 2u);
  EXPECT_GT(rep.exponents[0].result.lambda, 0.0);
  EXPECT_NEAR(rep.exponents[1].result.lambda, oracle::characteristic_root(2.0, 0.5, 2.0), 1e-3);
  EXPECT_EQ(rep.verdict, Verdict::NotPersistent);
}

TEST(Persistence, NearCriticalIsInconclusive) {
  // d = beta: the characteristic root is exactly 0
  PersistenceOptions o;
  o.lyapunov.horizon = 2000.0;
  const PersistenceReport rep = persistence_verdict(scalar(1.0, 1.0), TorusPoint(), o);
  EXPECT_EQ(rep.verdict, Verdict::Inconclusive);
}

TEST(Persistence, NegativeExponentMeansExtinction) {
  const SystemSpec spec = scalar(1.0, 0.5);
  PersistenceOptions o;
  ASSERT_EQ(persistence_verdict(spec, TorusPoint(), o).verdict, Verdict::NotPersistent);
  const Trajectory tr = integrate(spec, TorusPoint(), History::constant(1, 0.1), 200.0, SolverConfig{});
  EXPECT_LT(tr.back()[0], 1e-6);
}

TEST(Persistence, CsvColumns) {
  PersistenceOptions o;
  o.lyapunov.horizon = 100.0;
  const PersistenceReport rep = persistence_verdict(SystemSpec::paper(ParamSet{}), TorusPoint(), o);
  std::ostringstream os;
  write_persistence_csv(os, rep);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "block,indices,lambda,converged");
  EXPECT_NE(os.str().find("\n1,1;2,"), std::string::npos);
}
