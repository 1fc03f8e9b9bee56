#include "freqlab/numerics.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace freqlab::num {

namespace {

double stencil(const std::vector<double>& f, double h, std::size_t start, std::size_t i, std::size_t m);

} // namespace

double derivative_at(const std::vector<double>& f, double h, std::size_t i, std::size_t lo, std::size_t hi) {
  const std::size_t n = hi - lo + 1;
  if (n >= 5) {
    if (i >= lo + 2 && i + 2 <= hi) return (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
    const std::size_t start = std::clamp(i < 2 ? lo : i - 2, lo, hi - 4);
    return stencil(f, h, start, i, 5);
  }
  if (n == 4) return stencil(f, h, lo, i, 4);
  if (n == 3) return stencil(f, h, lo, i, 3);
  if (n == 2) return (f[hi] - f[lo]) / h;
  return 0.0;
}

std::vector<double> derivative(const std::vector<double>& f, double h, const std::vector<bool>& smooth_after) {
  const std::size_t n = f.size();
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  std::size_t lo = 0;
  while (lo < n) {
    std::size_t hi = lo;
    while (hi + 1 < n && (smooth_after.empty() || smooth_after[hi])) ++hi;
    for (std::size_t i = lo; i <= hi; ++i) out[i] = derivative_at(f, h, i, lo, hi);
    lo = hi + 1;
  }
  return out;
}

std::vector<std::vector<double>> fd_weights(const std::vector<double>& x, double x0, int order) {
  const std::size_t n = x.size();
  std::vector<std::vector<double>> c(order + 1, std::vector<double>(n, 0.0));
  double c1 = 1.0;
  double c4 = x[0] - x0;
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const int mn = std::min<int>(static_cast<int>(i), order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - x0;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

std::vector<double> second_derivative(const std::vector<double>& f, double h, const std::vector<bool>& smooth_after) {
  const std::size_t n = f.size();
  std::vector<double> out(n, 0.0);
  std::size_t lo = 0;
  while (lo < n) {
    std::size_t hi = lo;
    while (hi + 1 < n && (smooth_after.empty() || smooth_after[hi])) ++hi;
    const std::size_t len = hi - lo + 1;
    for (std::size_t i = lo; i <= hi; ++i) {
      if (len >= 5 && i >= lo + 2 && i + 2 <= hi) {
        out[i] = (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / (12.0 * h * h);
        continue;
      }
      if (len < 3) continue;
      const std::size_t m = std::min<std::size_t>(len, 6);
      const std::size_t start = std::clamp(i < m / 2 ? lo : i - m / 2, lo, hi + 1 - m);
      std::vector<double> nodes(m);
      for (std::size_t k = 0; k < m; ++k) nodes[k] = static_cast<double>(k);
      const auto w = fd_weights(nodes, static_cast<double>(i - start), 2);
      double acc = 0.0;
      for (std::size_t k = 0; k < m; ++k) acc += w[2][k] * f[start + k];
      out[i] = acc / (h * h);
    }
    lo = hi + 1;
  }
  return out;
}

namespace {

double stencil(const std::vector<double>& f, double h, std::size_t start, std::size_t i, std::size_t m) {
  std::vector<double> nodes(m);
  for (std::size_t k = 0; k < m; ++k) nodes[k] = static_cast<double>(k);
  const auto w = fd_weights(nodes, static_cast<double>(i - start), 1);
  double acc = 0.0;
  for (std::size_t k = 0; k < m; ++k) acc += w[1][k] * f[start + k];
  return acc / h;
}

} // namespace

double simpson_prefix(const std::vector<double>& f, double h, std::size_t n) {
  if (n == 0) return 0.0;
  if (n >= f.size()) throw std::out_of_range("simpson_prefix: not enough samples");
  if (n == 1) {
    if (f.size() < 4) return 0.5 * h * (f[0] + f[1]);
    // cubic through f0..f3 integrated over the first interval
    return h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]);
  }
  auto simpson_even = [&](std::size_t a, std::size_t b) {
    double acc = f[a] + f[b];
    for (std::size_t i = a + 1; i < b; ++i) acc += ((i - a) % 2 ? 4.0 : 2.0) * f[i];
    return acc * h / 3.0;
  };
  if (n % 2 == 0) return simpson_even(0, n);
  const double tail = 3.0 * h / 8.0 * (f[n - 3] + 3.0 * f[n - 2] + 3.0 * f[n - 1] + f[n]);
  return (n > 3 ? simpson_even(0, n - 3) : 0.0) + tail;
}

double simpson(const std::vector<double>& f, double h) {
  return f.empty() ? 0.0 : simpson_prefix(f, h, f.size() - 1);
}

double gauss(const std::function<double(double)>& g, double a, double b) {
  if (a == b) return 0.0;
  return boost::math::quadrature::gauss<double, 10>::integrate(g, a, b);
}

double gauss_split(const std::function<double(double)>& g, double a, double b, const std::vector<double>& cuts) {
  double acc = 0.0;
  double left = a;
  std::vector<double> c = cuts;
  std::sort(c.begin(), c.end());
  for (double x : c) {
    if (x <= left || x >= b) continue;
    acc += gauss(g, left, x);
    left = x;
  }
  return acc + gauss(g, left, b);
}

double relative_residual(const std::vector<double>& res, const std::vector<double>& scale) {
  double r = 0.0, s = 0.0;
  for (double v : res) r = std::max(r, std::abs(v));
  for (double v : scale) s = std::max(s, std::abs(v));
  if (s == 0.0) return r == 0.0 ? 0.0 : INFINITY;
  return r / s;
}

double observed_order(const std::vector<double>& h, const std::vector<double>& err) {
  const std::size_t n = std::min(h.size(), err.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace freqlab::num
