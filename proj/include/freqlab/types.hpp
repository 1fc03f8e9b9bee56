#pragma once

#include <initializer_list>

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace freqlab {

/// Points and gradients live in R^N with N <= 3; the fixed maximum keeps
/// them off the heap.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

inline constexpr int kMaxDim = 3;
inline constexpr char kToolVersion[] = "freq-lab 1.0.0";

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration, expression or file.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Arguments outside the admissible parameter range.
class DomainError : public Error {
public:
  using Error::Error;
};

class QuadratureError : public Error {
public:
  QuadratureError(const std::string& what, double achieved)
      : Error(what), achieved_tolerance(achieved) {}
  double achieved_tolerance;
};

class IntegrationError : public Error {
public:
  IntegrationError(const std::string& what, double last_good)
      : Error(what), last_good_radius(last_good) {}
  double last_good_radius;
};

class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, int iters, double dist)
      : Error(what), iterations(iters), last_distance(dist) {}
  int iterations;
  double last_distance;
};

inline Vec make_vec(int n, double fill = 0.0) { return Vec::Constant(n, fill); }

inline Vec make_vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double c : v) out[i++] = c;
  return out;
}

inline double sgn(double s) { return (s > 0.0) - (s < 0.0); }

} // namespace freqlab
