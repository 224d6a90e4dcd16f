#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace enscal {

inline constexpr double kInvSqrtPi = 0.5641895835477562869;   // 1/sqrt(pi)
inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;  // 1/sqrt(2*pi)

/// Standard normal density.
inline double norm_pdf(double z) {
  return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

/// Standard normal CDF, accurate in both tails.
inline double norm_cdf(double z) {
  return 0.5 * std::erfc(-z * M_SQRT1_2);
}

/// Standard normal quantile function (Wichura's AS241, double precision).
inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("norm_quantile: p must lie in (0,1)");
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
              6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
            1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
          1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
              3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
            5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
          4.2313330701600911252e+1) * r + 1.0);
    return q * num / den;
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
              3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
            4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
            2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
            5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -val : val;
}

/// Type-1 (inverse CDF) empirical quantile: the ceil(tau*n)-th order statistic.
/// `sorted` must be ascending. A small downward nudge keeps levels like i/13
/// evaluated at n = 13 from spilling over to the next order statistic through
/// floating-point excess.
inline double quantile_type1(std::span<const double> sorted, double tau) {
  if (sorted.empty()) {
    throw std::invalid_argument("quantile_type1: empty sample");
  }
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("quantile_type1: tau must lie in (0,1)");
  }
  const double n = static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(tau * n - 1e-9));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean: empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

/// Sample variance with divisor n-1. Returns 0 for n = 1.
inline double sample_variance(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("sample_variance: empty sample");
  if (xs.size() == 1) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) {
    const double d = x - m;
    s += d * d;
  }
  return s / static_cast<double>(xs.size() - 1);
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed and a salt. Used to
/// give parallel workers reproducible, order-independent randomness.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) {
  std::uint64_t state = master ^ (salt * 0x632BE59BD9B4E019ull + 0x9E3779B97F4A7C15ull);
  splitmix64(state);
  return splitmix64(state);
}

/// FNV-1a over a string, for salting seeds with row identities.
inline std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace enscal
