// Checks the reference two-patch model, estimates the exponent that decides
// persistence, and computes one point of the pullback attractor.

#include <cstdio>

#include "nicholson/nicholson.hpp"

int main() {
  using namespace nicholson;
  const SystemSpec spec = SystemSpec::paper(ParamSet{1.0, 1.0, 1.0});
  const TorusPoint theta(0.0, 0.0);

  const CoeffBounds bounds = compute_bounds(spec);
  const AssumptionReport hyp = check_assumptions(spec);
  const ZoneReport zone = check_invariant_zone(spec, bounds);
  std::printf("hypotheses %s, invariant zone %s (margin %.4f)\n", hyp.all_hold() ? "hold" : "fail",
              zone.holds() ? "holds" : "fails", zone.margin());

  PersistenceOptions popt;
  popt.lyapunov.horizon = 500.0;
  const PersistenceReport rep = persistence_verdict(spec, theta, popt);
  for (const auto& be : rep.exponents)
    std::printf("block {%s}: lambda = %.4f\n", format_indices(be.indices, ',').c_str(), be.result.lambda);
  std::printf("verdict: %s\n", std::string(to_string(rep.verdict)).c_str());

  const PullbackResult b = pullback_point(spec, theta);
  std::printf("b(theta)(0) = (%.6f, %.6f), T = %g\n", b.value[0], b.value[1], b.t_final);
}
