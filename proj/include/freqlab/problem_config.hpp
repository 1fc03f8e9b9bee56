#pragma once

#include "freqlab/problem.hpp"

#include <boost/property_tree/ptree.hpp>

#include <optional>
#include <string>
#include <vector>

namespace freqlab::core {

/// Declarative, serializable form of a ProblemSpec (the [domain],
/// [coefficients], [potential] and [nonlinearity] sections of a config file).
///
///   [domain]        dimension = 2, radius = 1
///   [coefficients]  kind = identity | diagonal | rotation_perturbed | expression
///                   diagonal = 4, 1          (kind = diagonal)
///                   eps = 0.1                (kind = rotation_perturbed)
///                   a11 = 1 + x1^2/4 ...     (kind = expression, upper triangle)
///   [potential]     V = 0
///   [nonlinearity]  kind = none | homogeneous | sum_of_powers | tabulated
///                   q, eps0, kappa1, kappa2
///                   terms = 1.5:2, 1:1 + x1^2   (sum_of_powers, q_k:c_k pairs)
///                   f = abs(s)^(-0.5)*s         (tabulated)
///                   superlinear = s^3           (optional, routed into V)
struct ProblemConfig {
  int dimension = 2;
  double radius = 1.0;

  std::string coefficient_kind = "identity";
  std::vector<double> diagonal;
  double rotation_eps = 0.0;
  std::vector<std::string> entries;

  std::string potential = "0";

  std::string nonlinearity_kind = "homogeneous";
  double q = 1.5;
  double eps0 = 1.0;
  double kappa1 = 1.0;
  std::optional<double> kappa2;
  std::string terms;
  std::string f;
  std::string superlinear;

  bool operator==(const ProblemConfig&) const = default;

  ProblemSpec build() const;

  void write(boost::property_tree::ptree& tree) const;
  static ProblemConfig read(const boost::property_tree::ptree& tree);
};

std::string format_number(double v);
std::vector<double> parse_number_list(const std::string& s);

} // namespace freqlab::core
