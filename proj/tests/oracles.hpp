#pragma once

// Test-only reference implementations. Gradients are checked against central
// differences computed from nothing but repeated forward evaluations, so the
// backward pass is validated by an independent construction.

#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

// Central difference (f(x + h e_i) - f(x - h e_i)) / (2 h) for every i.
inline std::vector<double> central_diff(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double hi = f(x);
    x[i] = orig - h;
    const double lo = f(x);
    x[i] = orig;
    g[i] = (hi - lo) / (2.0 * h);
  }
  return g;
}

// Largest elementwise deviation, scaled by the largest magnitude present in
// either vector (floored to dodge division by zero on all-zero pairs).
inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double scale = 1e-12;
  for (double v : a) scale = std::max(scale, std::fabs(v));
  for (double v : b) scale = std::max(scale, std::fabs(v));
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::fabs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace oracles
