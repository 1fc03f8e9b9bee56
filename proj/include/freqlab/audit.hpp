#pragma once

#include "freqlab/frequency.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace freqlab::audit {

inline constexpr char kCertificateSchema[] = "freq-lab/certificate/1";

enum class Classification { genuine_nonvanishing, contradiction_certified, residual_veto, inconclusive };
std::string to_string(Classification c);

enum class StepStatus { pass, fail, skipped, inconclusive };
std::string to_string(StepStatus s);

struct StepVerdict {
  std::string name;
  StepStatus status = StepStatus::skipped;
  double margin = 0.0;                ///< worst relative margin; >= 0 means the inequality held
  std::optional<double> fail_radius;  ///< first radius where it did not
  std::string note;
};

struct AuditControls {
  double tol_d = 1e-10;           ///< d(r) <= tol_d d(delta1) counts as vanishing
  double residual_factor = 10.0;  ///< gate: sup|rho| <= factor * truncation estimate + residual_floor
  double residual_floor = 1e-9;
  double residual_abs = 1e-8;     ///< gate for fields that carry no truncation estimate
  double monotone_rel = 1e-9;     ///< slack in discrete monotonicity and bound checks
  /// Claim a vanishing radius instead of detecting it. The chain is then
  /// marked non-binding, and the gate rejects fields that are not zero on B_{r0}.
  std::optional<double> forced_r0;
  /// Diagnostic: evaluate the certificate steps even when the gate fails.
  bool evaluate_after_veto = false;
  freq::FrequencyOptions frequency;

  void validate() const;
};

struct CertificateChain {
  std::string route = "model";  ///< "model" or "general"
  Classification classification = Classification::inconclusive;
  bool binding = true;
  bool whole_grid_zero = false;
  double delta1 = 0.0;
  double r0 = 0.0;
  std::optional<double> r0_strict;  ///< largest radius with d exactly 0
  std::optional<double> r1, r2, r3;
  /// Model route: C1..C4. General route: C0, C1, C3, C4, C5 where C0 and the
  /// rates built on it come from fitted constants.
  std::map<std::string, double> constants;
  std::map<std::string, double> fitted;  ///< empirical, not values from the proofs
  double residual_sup = 0.0;
  double residual_threshold = 0.0;
  std::vector<StepVerdict> steps;
  std::string failing_step;
  std::string input_hash;
  std::string note;

  const StepVerdict* step(const std::string& name) const;
  nlohmann::ordered_json to_json() const;
};

struct Vanishing {
  double r0 = 0.0;
  std::optional<double> r0_strict;
  bool whole_grid_zero = false;
};

/// Largest audited radius with d(r) <= tol_d * d(delta1), or 0 if the first
/// radius already exceeds the threshold.
Vanishing vanishing_radius(const freq::FrequencyProfile& p, double tol_d);

struct LowerBound {
  double r1 = 0.0, C1 = 0.0, C2 = 0.0;
  StepVerdict verdict;
};

/// C1 = C_{N,q}/r0^{N-1}, C2 = (2-q)/2 r0^{N-2}, r1 = min(r0 + (2-q)/(2 C1), delta1);
/// checks D >= C2 d at every audited radius in (r0, r1).
LowerBound lower_bound_certificate(const freq::FrequencyProfile& p, int dim, double q, double r0, double delta1,
                                   double rel_slack = 1e-12);

struct FrequencyBound {
  double r2 = 0.0, r3 = 0.0, C3 = 0.0, C4 = 0.0;
  StepVerdict verdict;
};

/// r2 = largest audited radius in (r0, r1) with H above the floor; r3 = where
/// the run of positive H below r2 ends (at least r0). C3 = C_{N,q}/(r0 C2),
/// C4 = N(r2) e^{C3 r2}; checks that N e^{C3 r} is non-decreasing on (r3, r2]
/// and N <= C4 there.
FrequencyBound frequency_bound_certificate(const freq::FrequencyProfile& p, int dim, double q, double r0, double r1,
                                           double C2, double rel_slack = 1e-9);

/// Slope bound log(H/r^{N-1})' <= 2 C4/r0 on (r3, r2], checked on grid
/// increments, and H(r3) at the floor. The bound integrated back from r2 to
/// r3 + dr gives H(r3) >= H(r2) ((r3+dr)/r2)^{N-1} e^{-2 C4 (r2 - r3 - dr)/r0};
/// a positive value against H(r3) ~ 0 certifies the contradiction.
StepVerdict logH_contradiction(const freq::FrequencyProfile& p, int dim, double r0, double r3, double r2, double C4,
                               double rel_slack = 1e-9);

/// Full pipeline: residual gate, vanishing radius, the three certificate steps.
CertificateChain audit(const core::ProblemSpec& spec, const field::SolutionField& u, const AuditControls& c = {});

} // namespace freqlab::audit
