#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "enscal/math.hpp"
#include "enscal/time.hpp"

namespace enscal {

/// Time-ordered daily score series.
struct ScoreSeries {
  std::string label;
  std::vector<Date> dates;
  std::vector<double> values;

  void validate() const {
    if (dates.size() != values.size()) {
      throw std::invalid_argument("score series: dates/values length mismatch");
    }
    for (std::size_t i = 1; i < dates.size(); ++i) {
      if (!(dates[i - 1] < dates[i])) {
        throw std::invalid_argument("score series: dates must be strictly increasing");
      }
    }
  }
};

enum class DmFlag { Ok, DegenerateZeroVariance };

struct DmResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int n = 0;
  DmFlag flag = DmFlag::Ok;
};

/// Diebold-Mariano test of equal predictive performance on two aligned score
/// series. The long-run variance of the loss differential uses sample
/// autocovariances up to `max_lag`; if the truncated estimate is nonpositive
/// it falls back to lag 0 alone. Two-sided p-value from the standard normal.
inline DmResult dm_test(const ScoreSeries& series_a, const ScoreSeries& series_b, int max_lag) {
  series_a.validate();
  series_b.validate();
  if (series_a.dates != series_b.dates) {
    throw std::invalid_argument("dm_test: series are not date-aligned");
  }
  if (max_lag < 0) throw std::invalid_argument("dm_test: max_lag must be >= 0");
  const auto n = static_cast<int>(series_a.values.size());
  if (n < 10) throw std::invalid_argument("dm_test: need at least 10 aligned scores");

  std::vector<double> d(n);
  bool all_zero = true;
  for (int t = 0; t < n; ++t) {
    d[t] = series_a.values[t] - series_b.values[t];
    if (d[t] != 0.0) all_zero = false;
  }
  DmResult res;
  res.n = n;
  if (all_zero) {
    res.flag = DmFlag::DegenerateZeroVariance;
    return res;
  }

  const double dbar = mean(d);
  std::vector<double> gamma(std::min(max_lag, n - 1) + 1, 0.0);
  for (std::size_t lag = 0; lag < gamma.size(); ++lag) {
    double s = 0.0;
    for (int t = static_cast<int>(lag); t < n; ++t) {
      s += (d[t] - dbar) * (d[t - lag] - dbar);
    }
    gamma[lag] = s / n;
  }
  double lrv = gamma[0];
  for (std::size_t lag = 1; lag < gamma.size(); ++lag) lrv += 2.0 * gamma[lag];
  if (lrv <= 0.0) lrv = gamma[0];

  if (lrv <= 0.0) {
    // constant nonzero differential: unambiguous, but no variance to scale by
    res.flag = DmFlag::DegenerateZeroVariance;
    res.statistic = dbar > 0.0 ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
    res.p_value = 0.0;
    return res;
  }
  res.statistic = std::sqrt(static_cast<double>(n)) * dbar / std::sqrt(lrv);
  res.p_value = std::erfc(std::fabs(res.statistic) * M_SQRT1_2);  // 2*(1 - Phi(|t|))
  return res;
}

/// Default truncation lag for daily-initialized forecasts at a given lead:
/// overlapping validity windows induce serial correlation up to lead-1 days.
inline int default_dm_max_lag(int lead_days) { return std::max(0, lead_days - 1); }

struct BootstrapCi {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  int replicates = 0;
  double mean_block_length = 1.0;
};

/// One stationary-bootstrap resample: block lengths geometric with mean
/// 1/`p_new_block`, uniform start indices, circular wrap.
inline void stationary_bootstrap_indices(std::size_t n, double p_new_block, std::mt19937_64& rng,
                                         std::vector<std::uint32_t>& out) {
  std::uniform_int_distribution<std::uint32_t> start(0, static_cast<std::uint32_t>(n - 1));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  out.resize(n);
  std::uint32_t idx = start(rng);
  out[0] = idx;
  for (std::size_t t = 1; t < n; ++t) {
    if (unit(rng) < p_new_block) {
      idx = start(rng);
    } else {
      idx = idx + 1 == n ? 0 : idx + 1;
    }
    out[t] = idx;
  }
}

/// Percentile confidence interval for a statistic of a time series under the
/// stationary (geometric block length) bootstrap. Replicate seeds derive from
/// the master seed and the replicate index, so parallel and serial evaluation
/// orders agree bit for bit.
template <class Statistic>
BootstrapCi stationary_bootstrap_ci(std::span<const double> values, Statistic&& statistic,
                                    int replicates, double mean_block_length, double level,
                                    std::uint64_t seed) {
  const std::size_t n = values.size();
  if (n < 5) throw std::invalid_argument("stationary_bootstrap_ci: need at least 5 values");
  if (replicates < 100) throw std::invalid_argument("stationary_bootstrap_ci: need >= 100 replicates");
  if (!(mean_block_length >= 1.0)) {
    throw std::invalid_argument("stationary_bootstrap_ci: mean block length must be >= 1");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("stationary_bootstrap_ci: level must lie in (0,1)");
  }
  const double p_new_block = 1.0 / mean_block_length;

  std::vector<double> stats(replicates);
  std::vector<std::uint32_t> idx;
  std::vector<double> resampled(n);
  for (int r = 0; r < replicates; ++r) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    stationary_bootstrap_indices(n, p_new_block, rng, idx);
    for (std::size_t t = 0; t < n; ++t) resampled[t] = values[idx[t]];
    stats[r] = statistic(std::span<const double>(resampled));
  }
  std::sort(stats.begin(), stats.end());

  BootstrapCi ci;
  ci.point = statistic(values);
  ci.level = level;
  ci.replicates = replicates;
  ci.mean_block_length = mean_block_length;
  ci.lower = quantile_type1(stats, (1.0 - level) / 2.0);
  ci.upper = quantile_type1(stats, (1.0 + level) / 2.0);
  return ci;
}

inline BootstrapCi stationary_bootstrap_mean_ci(const ScoreSeries& series, int replicates,
                                                double mean_block_length, double level,
                                                std::uint64_t seed) {
  series.validate();
  return stationary_bootstrap_ci(
      series.values, [](std::span<const double> v) { return mean(v); }, replicates,
      mean_block_length, level, seed);
}

/// Default mean block length: n^(1/3), rounded up.
inline double default_mean_block_length(std::size_t n) {
  return std::ceil(std::cbrt(static_cast<double>(n)));
}

/// Pairwise station-level DM comparison across configurations: entry (i,j) is
/// the fraction of stations whose score series differ significantly at
/// `level`. Stations with fewer than `min_pairs` aligned scores are dropped.
inline std::vector<std::vector<double>> significance_matrix(
    const std::map<std::string, std::map<std::string, ScoreSeries>>& score_series_by_config,
    double level, int max_lag, int min_pairs = 20) {
  const auto n_cfg = score_series_by_config.size();
  std::vector<const std::map<std::string, ScoreSeries>*> configs;
  configs.reserve(n_cfg);
  for (const auto& [label, by_station] : score_series_by_config) {
    configs.push_back(&by_station);
    if (by_station.size() != configs.front()->size()) {
      throw std::invalid_argument("significance_matrix: configurations disagree on station set");
    }
    for (const auto& [sid, series] : by_station) {
      if (!configs.front()->contains(sid)) {
        throw std::invalid_argument("significance_matrix: configurations disagree on station set");
      }
      (void)series;
    }
  }

  std::vector<std::vector<double>> m(n_cfg, std::vector<double>(n_cfg, 0.0));
  for (std::size_t i = 0; i < n_cfg; ++i) {
    for (std::size_t j = i + 1; j < n_cfg; ++j) {
      int tested = 0;
      int rejected = 0;
      for (const auto& [sid, series_i] : *configs[i]) {
        const auto& series_j = configs[j]->at(sid);
        // align on common dates
        ScoreSeries a, b;
        std::size_t pi = 0, pj = 0;
        while (pi < series_i.dates.size() && pj < series_j.dates.size()) {
          if (series_i.dates[pi] < series_j.dates[pj]) {
            ++pi;
          } else if (series_j.dates[pj] < series_i.dates[pi]) {
            ++pj;
          } else {
            a.dates.push_back(series_i.dates[pi]);
            a.values.push_back(series_i.values[pi]);
            b.dates.push_back(series_j.dates[pj]);
            b.values.push_back(series_j.values[pj]);
            ++pi;
            ++pj;
          }
        }
        if (static_cast<int>(a.values.size()) < std::max(min_pairs, 10)) continue;
        ++tested;
        const DmResult r = dm_test(a, b, max_lag);
        if (r.p_value < level) ++rejected;
      }
      const double frac = tested > 0 ? static_cast<double>(rejected) / tested : 0.0;
      m[i][j] = frac;
      m[j][i] = frac;
    }
  }
  return m;
}

}  // namespace enscal
