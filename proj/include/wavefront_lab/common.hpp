#pragma once

#include <Eigen/Dense>

#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>

namespace wfl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;

enum class ErrorKind {
  EvaluationDomain,
  StepSize,
  Tolerance,
  NumericalConsistency,
  IllConditionedExcess,
  CleanIntersection,
  DegenerateRecurrence,
  Composition,
  Caustic,
  Confinement,
  Scale,
  InsufficientScales,
  Resolution,
  Config,
  Io,
  Unsupported,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Standard symplectic matrix [[0, I], [-I, 0]] on R^{2d}.
inline Mat symplectic_form(int d) {
  Mat omega = Mat::Zero(2 * d, 2 * d);
  omega.topRightCorner(d, d) = Mat::Identity(d, d);
  omega.bottomLeftCorner(d, d) = -Mat::Identity(d, d);
  return omega;
}

inline double symplectic_defect(const Mat& jacobian) {
  const Mat omega = symplectic_form(static_cast<int>(jacobian.rows() / 2));
  return (jacobian.transpose() * omega * jacobian - omega).norm();
}

// Angle between two nonzero vectors, robust near 0 and pi.
inline double angle_between(const Vec& a, const Vec& b) {
  const double na = a.norm();
  const double nb = b.norm();
  const double s = (a / na - b / nb).norm();
  const double c = (a / na + b / nb).norm();
  return 2.0 * std::atan2(s, c);
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; jobs <= 1 runs inline.
// The first exception thrown by any task is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace wfl
