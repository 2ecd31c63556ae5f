#ifndef NICHOLSON_TORUS_HPP
#define NICHOLSON_TORUS_HPP

#include <cmath>
#include <numbers>

namespace nicholson {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Reduces an angle into [0, 2pi).
inline double wrap_angle(double x) {
  double r = std::fmod(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // fmod of a tiny negative number can round up to exactly 2pi
  if (r >= kTwoPi) r = 0.0;
  return r;
}

/// Point of the two-torus driving the coefficients. Components are kept
/// reduced into [0, 2pi).
class TorusPoint {
 public:
  TorusPoint() = default;
  TorusPoint(double theta1, double theta2) : theta1_(wrap_angle(theta1)), theta2_(wrap_angle(theta2)) {}

  double theta1() const noexcept { return theta1_; }
  double theta2() const noexcept { return theta2_; }

  friend bool operator==(const TorusPoint&, const TorusPoint&) = default;

 private:
  double theta1_ = 0.0;
  double theta2_ = 0.0;
};

/// Kronecker flow with frequencies (1, sqrt 2). t may be negative.
inline TorusPoint advance_base(const TorusPoint& theta, double t) {
  return {theta.theta1() + t, theta.theta2() + std::numbers::sqrt2 * t};
}

/// Distance on the torus, componentwise shortest arc, sup over both angles.
inline double torus_distance(const TorusPoint& a, const TorusPoint& b) {
  auto arc = [](double x, double y) {
    double d = std::fabs(x - y);
    return std::fmin(d, kTwoPi - d);
  };
  return std::fmax(arc(a.theta1(), b.theta1()), arc(a.theta2(), b.theta2()));
}

}  // namespace nicholson

#endif  // NICHOLSON_TORUS_HPP
