#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "enscal/math.hpp"

namespace enscal {

/// Gaussian predictive distribution N(mean, variance).
struct GaussianPredictive {
  double mean = 0.0;
  double variance = 1.0;

  double sigma() const { return std::sqrt(variance); }
  double cdf(double y) const { return norm_cdf((y - mean) / sigma()); }
  double pdf(double y) const { return norm_pdf((y - mean) / sigma()) / sigma(); }
  double quantile(double tau) const { return mean + sigma() * norm_quantile(tau); }
  double median() const { return mean; }
};

/// Empirical predictive distribution given by an ensemble; members are kept
/// sorted. Quantiles follow the type-1 (inverse CDF) rule.
class EmpiricalPredictive {
 public:
  explicit EmpiricalPredictive(std::span<const double> members)
      : members_(members.begin(), members.end()) {
    if (members_.empty()) throw std::invalid_argument("empirical predictive needs >= 1 member");
    for (double m : members_) {
      if (!std::isfinite(m)) throw std::invalid_argument("non-finite ensemble member");
    }
    std::sort(members_.begin(), members_.end());
  }

  const std::vector<double>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }

  double cdf(double y) const {
    const auto it = std::upper_bound(members_.begin(), members_.end(), y);
    return static_cast<double>(it - members_.begin()) / static_cast<double>(members_.size());
  }
  double quantile(double tau) const { return quantile_type1(members_, tau); }
  double median() const { return quantile(0.5); }

 private:
  std::vector<double> members_;
};

/// Closed-form CRPS of a normal predictive distribution:
///   sigma * ( z*(2*Phi(z)-1) + 2*phi(z) - 1/sqrt(pi) ),  z = (x-mean)/sigma.
inline double crps_gaussian(double mean, double variance, double obs) {
  if (!(variance > 0.0) || !std::isfinite(mean) || !std::isfinite(variance) ||
      !std::isfinite(obs)) {
    throw std::invalid_argument("crps_gaussian: needs finite inputs and variance > 0");
  }
  const double sigma = std::sqrt(variance);
  const double z = (obs - mean) / sigma;
  return sigma * (z * (2.0 * norm_cdf(z) - 1.0) + 2.0 * norm_pdf(z) - kInvSqrtPi);
}

inline double crps_gaussian(const GaussianPredictive& pred, double obs) {
  return crps_gaussian(pred.mean, pred.variance, obs);
}

/// CRPS of an empirical (ensemble) predictive distribution,
///   (1/M) sum |f_i - x|  -  (1/(2 M^2)) sum_ij |f_i - f_j|,
/// computed in O(M log M) from the sorted members.
inline double crps_empirical(const EmpiricalPredictive& pred, double obs) {
  if (!std::isfinite(obs)) throw std::invalid_argument("crps_empirical: non-finite observation");
  const auto& f = pred.members();
  const auto m = static_cast<double>(f.size());
  double abs_err = 0.0;
  double pair_term = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    abs_err += std::fabs(f[i] - obs);
    pair_term += (2.0 * static_cast<double>(i) - m + 1.0) * f[i];
  }
  return abs_err / m - pair_term / (m * m);
}

/// Negative log predictive density of a normal distribution (diagnostic score;
/// parameter estimation elsewhere uses the CRPS).
inline double log_score_gaussian(const GaussianPredictive& pred, double obs) {
  if (!(pred.variance > 0.0)) throw std::invalid_argument("log_score_gaussian: variance must be > 0");
  const double d = obs - pred.mean;
  return 0.5 * std::log(2.0 * M_PI * pred.variance) + d * d / (2.0 * pred.variance);
}

/// Brier score (F(y) - 1{obs <= y})^2 for the event that the observation does
/// not exceed the threshold.
template <class Predictive>
double brier_score(const Predictive& pred, double obs, double threshold) {
  const double p = pred.cdf(threshold);
  const double event = (obs <= threshold) ? 1.0 : 0.0;
  const double d = p - event;
  return d * d;
}

/// Quantile (pinball) score rho_tau(x - q_tau(F)).
template <class Predictive>
double quantile_score(const Predictive& pred, double obs, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("quantile_score: tau must lie in (0,1)");
  const double q = pred.quantile(tau);
  const double d = obs - q;
  return d >= 0.0 ? tau * d : (tau - 1.0) * d;
}

/// Skill relative to a reference, 1 - score/score_ref. Intended for mean
/// scores over a case set. Undefined skill (score_ref = 0 with score > 0)
/// is reported as NaN.
inline double skill_score(double score, double score_ref) {
  if (score_ref == 0.0) {
    return score == 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
  }
  return 1.0 - score / score_ref;
}

struct PointErrors {
  double mae = 0.0;
  double rmse = 0.0;
};

inline PointErrors point_errors(std::span<const double> point_forecasts,
                                std::span<const double> observations) {
  if (point_forecasts.size() != observations.size()) {
    throw std::invalid_argument("point_errors: length mismatch");
  }
  if (point_forecasts.empty()) throw std::invalid_argument("point_errors: empty input");
  double ae = 0.0;
  double se = 0.0;
  for (std::size_t i = 0; i < point_forecasts.size(); ++i) {
    const double d = point_forecasts[i] - observations[i];
    ae += std::fabs(d);
    se += d * d;
  }
  const auto n = static_cast<double>(point_forecasts.size());
  return PointErrors{ae / n, std::sqrt(se / n)};
}

/// Empirical percentiles of a station's observation sample at the given
/// levels, using the module-wide type-1 quantile rule.
inline std::vector<double> climatology_thresholds(std::span<const double> obs_series,
                                                  std::span<const double> levels) {
  if (obs_series.empty()) throw std::invalid_argument("climatology_thresholds: empty series");
  std::vector<double> sorted(obs_series.begin(), obs_series.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(levels.size());
  for (double lev : levels) out.push_back(quantile_type1(sorted, lev));
  return out;
}

/// Score evaluation settings: Brier thresholds are climatological percentile
/// levels, quantile scores are evaluated at the tau levels.
struct ScoreConfig {
  std::vector<double> bs_threshold_levels = {0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35,
                                             0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70,
                                             0.75, 0.80, 0.85, 0.90, 0.95};
  std::vector<double> qs_levels = {0.02, 0.05, 0.10, 0.20, 0.50, 0.80, 0.90, 0.95, 0.98};

  void validate() const {
    for (const auto* levels : {&bs_threshold_levels, &qs_levels}) {
      if (levels->empty()) throw std::invalid_argument("score levels must be nonempty");
      double prev = 0.0;
      for (double l : *levels) {
        if (!(l > 0.0 && l < 1.0)) throw std::invalid_argument("score level outside (0,1)");
        if (l <= prev) throw std::invalid_argument("score levels must be strictly ascending");
        prev = l;
      }
    }
  }
};

}  // namespace enscal
