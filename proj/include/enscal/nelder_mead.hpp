#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace enscal {

struct NelderMeadOptions {
  int max_iterations = 500;
  double tolerance = 1e-8;  // stop when f(worst) - f(best) drops below this
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
};

struct NelderMeadResult {
  std::vector<double> x;
  double fx = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Derivative-free downhill simplex minimization. Fully deterministic: vertex
/// ordering breaks objective ties by vertex index.
template <class F>
NelderMeadResult nelder_mead_minimize(F&& f, std::span<const double> x0,
                                      std::span<const double> steps,
                                      const NelderMeadOptions& opts = {}) {
  const std::size_t n = x0.size();
  if (n == 0) throw std::invalid_argument("nelder_mead_minimize: empty parameter vector");
  if (steps.size() != n) throw std::invalid_argument("nelder_mead_minimize: step size mismatch");

  std::vector<std::vector<double>> x(n + 1, std::vector<double>(x0.begin(), x0.end()));
  for (std::size_t i = 0; i < n; ++i) x[i + 1][i] += steps[i];
  std::vector<double> fx(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fx[i] = f(std::span<const double>(x[i]));

  std::vector<std::size_t> order(n + 1);
  std::iota(order.begin(), order.end(), 0);
  const auto sort_order = [&] {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (fx[a] != fx[b]) return fx[a] < fx[b];
      return a < b;
    });
  };

  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  NelderMeadResult res;
  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    sort_order();
    const std::size_t best = order[0];
    const std::size_t worst = order[n];
    if (fx[worst] - fx[best] < opts.tolerance) {
      res.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) centroid[j] += x[order[i]][j];
    }
    for (std::size_t j = 0; j < n; ++j) centroid[j] /= static_cast<double>(n);

    for (std::size_t j = 0; j < n; ++j) {
      xr[j] = centroid[j] + opts.reflection * (centroid[j] - x[worst][j]);
    }
    const double fr = f(std::span<const double>(xr));

    if (fr < fx[best]) {
      for (std::size_t j = 0; j < n; ++j) {
        xe[j] = centroid[j] + opts.expansion * (xr[j] - centroid[j]);
      }
      const double fe = f(std::span<const double>(xe));
      if (fe < fr) {
        x[worst] = xe;
        fx[worst] = fe;
      } else {
        x[worst] = xr;
        fx[worst] = fr;
      }
      continue;
    }
    if (fr < fx[order[n - 1]]) {
      x[worst] = xr;
      fx[worst] = fr;
      continue;
    }
    if (fr < fx[worst]) {
      for (std::size_t j = 0; j < n; ++j) xc[j] = centroid[j] + opts.contraction * (xr[j] - centroid[j]);
    } else {
      for (std::size_t j = 0; j < n; ++j) xc[j] = centroid[j] + opts.contraction * (x[worst][j] - centroid[j]);
    }
    const double fc = f(std::span<const double>(xc));
    if (fc < std::min(fr, fx[worst])) {
      x[worst] = xc;
      fx[worst] = fc;
      continue;
    }
    for (std::size_t i = 1; i <= n; ++i) {
      auto& xi = x[order[i]];
      for (std::size_t j = 0; j < n; ++j) {
        xi[j] = x[order[0]][j] + opts.shrink * (xi[j] - x[order[0]][j]);
      }
      fx[order[i]] = f(std::span<const double>(xi));
    }
  }

  sort_order();
  res.x = x[order[0]];
  res.fx = fx[order[0]];
  return res;
}

}  // namespace enscal
