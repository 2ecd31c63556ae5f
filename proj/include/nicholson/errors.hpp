#ifndef NICHOLSON_ERRORS_HPP
#define NICHOLSON_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace nicholson {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class OutOfRange : public Error {
 public:
  explicit OutOfRange(double t)
      : Error("trajectory evaluated outside its domain at t=" + std::to_string(t)), t_(t) {}
  double t() const noexcept { return t_; }

 private:
  double t_;
};

class StageSolveDiverged : public Error {
 public:
  StageSolveDiverged(long step, double residual)
      : Error("implicit stage solve failed at step " + std::to_string(step) +
              " (residual " + std::to_string(residual) + ")"),
        step_(step),
        residual_(residual) {}
  long step() const noexcept { return step_; }
  double residual() const noexcept { return residual_; }

 private:
  long step_;
  double residual_;
};

class NonfiniteState : public Error {
 public:
  explicit NonfiniteState(long step)
      : Error("non-finite state at step " + std::to_string(step)), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

class NoConvergence : public Error {
 public:
  NoConvergence(double t_max, std::string detail)
      : Error("pullback iteration did not converge before T=" + std::to_string(t_max) +
              (detail.empty() ? std::string{} : ": " + detail)),
        t_max_(t_max) {}
  double t_max() const noexcept { return t_max_; }

 private:
  double t_max_;
};

}  // namespace nicholson

#endif  // NICHOLSON_ERRORS_HPP
