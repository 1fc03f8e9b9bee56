#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace freqlab::num {

/// First derivative of samples on a uniform grid, fourth order.
///
/// `smooth_after[i] == false` declares the data non-smooth between nodes i and
/// i+1 (a kink or jump); stencils never straddle such a break and fall back to
/// one-sided formulas inside each smooth run. Runs shorter than five nodes get
/// the highest order that fits.
std::vector<double> derivative(const std::vector<double>& f, double h, const std::vector<bool>& smooth_after = {});

/// Derivative at node i only, given the smooth run [lo, hi] containing i.
double derivative_at(const std::vector<double>& f, double h, std::size_t i, std::size_t lo, std::size_t hi);

/// Second derivative, fourth order in the interior of each smooth run
/// (six-point one-sided stencils near run ends).
std::vector<double> second_derivative(const std::vector<double>& f, double h, const std::vector<bool>& smooth_after = {});

/// Finite-difference weights (Fornberg) for derivatives 0..order at x0 on the
/// given nodes; result[k][j] weights node j for the k-th derivative.
std::vector<std::vector<double>> fd_weights(const std::vector<double>& nodes, double x0, int order);

/// Composite Simpson over uniformly spaced samples; the 3/8 rule absorbs the
/// last three intervals when the interval count is odd.
double simpson(const std::vector<double>& f, double h);

/// Simpson over the first n+1 samples (n intervals).
double simpson_prefix(const std::vector<double>& f, double h, std::size_t n);

/// Gauss-Legendre (10 points) on [a,b].
double gauss(const std::function<double(double)>& g, double a, double b);

/// Gauss-Legendre on [a,b] with the interval split at the given interior points.
double gauss_split(const std::function<double(double)>& g, double a, double b, const std::vector<double>& cuts);

/// max_i |res_i| / max_i scale_i, the relative residual used throughout.
double relative_residual(const std::vector<double>& res, const std::vector<double>& scale);

/// Least-squares slope of log(err) against log(h).
double observed_order(const std::vector<double>& h, const std::vector<double>& err);

} // namespace freqlab::num
