#pragma once

#include "freqlab/problem.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace freqlab::core {

struct Witness {
  Vec x;
  double s = 0.0;
  double value = 0.0;   ///< the offending quantity at (x, s)
};

struct ClauseVerdict {
  std::string clause;   ///< e.g. "A3.i.upper"
  bool pass = true;
  double margin = 0.0;  ///< worst-case margin; negative means violated
  std::size_t samples = 0;
  std::optional<Witness> witness;
  std::string note;
};

struct AssumptionReport {
  std::vector<ClauseVerdict> clauses;

  bool pass() const;
  const ClauseVerdict* find(const std::string& clause) const;
  /// First failing clause, if any.
  const ClauseVerdict* first_failure() const;
};

/// Tensor sampling of x in the ball and s in (-eps0, eps0) \ {0}.
struct SampleControls {
  int x_samples = 64;
  int s_samples = 256;
  std::uint64_t seed = 20240101;
  /// Relative slack for equality-type bounds (e.g. f s = q F for f_q).
  double slack = 8.0 * 2.220446049250313e-16;
  int directions = 16;
};

std::vector<Vec> sample_ball(int dim, double radius, const SampleControls& c);
std::vector<double> sample_s(double eps0, const SampleControls& c);

AssumptionReport check_A1(const ProblemSpec& spec, const SampleControls& c = {});
AssumptionReport check_A2(const ProblemSpec& spec, const SampleControls& c = {});
AssumptionReport check_A3(const NonlinearitySpec& nl, int dim, double radius, const SampleControls& c = {});

/// A1, A2, A3 plus the boundedness of h(x,s)/s when a superlinear part is
/// present (it is then treated as part of the potential).
AssumptionReport check_assumptions(const ProblemSpec& spec, const SampleControls& c = {});

} // namespace freqlab::core
