#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "enscal/data.hpp"
#include "enscal/nelder_mead.hpp"
#include "enscal/scoring.hpp"

namespace enscal {

/// Predictive model variants. Mean is affine in the per-member forecasts
/// (NonExchangeable) or in the group means (all others); variance is affine
/// in the pooled ensemble variance, or in the per-group variances for
/// DualSplitVariance.
enum class EmosVariant {
  NonExchangeable,
  Grouped,
  Dual,
  DualSplitVariance,
};

inline std::string to_string(EmosVariant v) {
  switch (v) {
    case EmosVariant::NonExchangeable: return "non_exchangeable";
    case EmosVariant::Grouped: return "grouped";
    case EmosVariant::Dual: return "dual";
    case EmosVariant::DualSplitVariance: return "dual_split_variance";
  }
  throw std::logic_error("unknown EmosVariant");
}

inline EmosVariant emos_variant_from_string(std::string_view s) {
  if (s == "non_exchangeable") return EmosVariant::NonExchangeable;
  if (s == "grouped") return EmosVariant::Grouped;
  if (s == "dual") return EmosVariant::Dual;
  if (s == "dual_split_variance") return EmosVariant::DualSplitVariance;
  throw std::invalid_argument("unknown EMOS variant: '" + std::string(s) + "'");
}

/// Variance floor folded into the intercept of the predictive variance during
/// estimation, so fitted predictives can never collapse to zero width.
inline constexpr double kVarianceFloor = 1e-4;

/// Per-case ensemble statistics. Group means in group order; pooled variance
/// is the sample variance (divisor M-1) of all members about the pooled mean;
/// group variances use divisor M_k-1 and are 0 for singleton groups.
struct EnsembleSummary {
  std::vector<double> group_means;
  std::vector<double> group_variances;
  std::vector<int> group_sizes;
  double pooled_variance = 0.0;
  int total_members = 0;
};

inline EnsembleSummary summarize(const GroupedEnsembleForecast& forecast) {
  EnsembleSummary s;
  double pooled_sum = 0.0;
  for (const auto& g : forecast.groups) {
    if (g.members.empty()) throw std::invalid_argument("summarize: empty member group");
    s.group_means.push_back(mean(g.members));
    s.group_variances.push_back(sample_variance(g.members));
    s.group_sizes.push_back(static_cast<int>(g.members.size()));
    s.total_members += static_cast<int>(g.members.size());
    for (double m : g.members) pooled_sum += m;
  }
  if (s.total_members < 2) {
    throw std::invalid_argument("summarize: pooled ensemble variance needs >= 2 members");
  }
  const double pooled_mean = pooled_sum / s.total_members;
  double ss = 0.0;
  for (const auto& g : forecast.groups) {
    for (double m : g.members) {
      const double d = m - pooled_mean;
      ss += d * d;
    }
  }
  s.pooled_variance = ss / (s.total_members - 1);
  return s;
}

/// Member-level summary (every member its own singleton group), the form the
/// NonExchangeable variant consumes. The pooled variance is unchanged.
inline EnsembleSummary summarize_members(const GroupedEnsembleForecast& forecast) {
  EnsembleSummary grouped = summarize(forecast);
  EnsembleSummary s;
  s.pooled_variance = grouped.pooled_variance;
  s.total_members = grouped.total_members;
  for (const auto& g : forecast.groups) {
    for (double m : g.members) {
      s.group_means.push_back(m);
      s.group_variances.push_back(0.0);
      s.group_sizes.push_back(1);
    }
  }
  return s;
}

/// Fitted EMOS coefficients. `b` holds one weight per group (per member for
/// NonExchangeable); `d` has one entry, or one per group for
/// DualSplitVariance.
struct EmosParameters {
  EmosVariant variant = EmosVariant::Dual;
  double a = 0.0;
  std::vector<double> b;
  double c = 1.0;
  std::vector<double> d = {1.0};
  bool converged = true;
  std::string trained_on;

  friend bool operator==(const EmosParameters&, const EmosParameters&) = default;
};

namespace detail {

inline void check_variant_groups(EmosVariant variant, std::size_t n_groups) {
  switch (variant) {
    case EmosVariant::NonExchangeable:
    case EmosVariant::Grouped:
      if (n_groups < 1) throw std::invalid_argument("EMOS: needs >= 1 group");
      break;
    case EmosVariant::Dual:
    case EmosVariant::DualSplitVariance:
      // Two exchangeable groups; a pure configuration has one present group
      // and the absent group's coefficient is implicitly zero.
      if (n_groups < 1 || n_groups > 2) {
        throw std::invalid_argument("dual-resolution EMOS: needs 1 or 2 present groups");
      }
      break;
  }
}

}  // namespace detail

inline GaussianPredictive predictive(const EmosParameters& params, const EnsembleSummary& summary) {
  detail::check_variant_groups(params.variant, summary.group_means.size());
  if (params.b.size() != summary.group_means.size()) {
    throw std::invalid_argument("EMOS predictive: coefficient/group count mismatch");
  }
  double mu = params.a;
  for (std::size_t k = 0; k < params.b.size(); ++k) mu += params.b[k] * summary.group_means[k];
  double var;
  if (params.variant == EmosVariant::DualSplitVariance) {
    if (params.d.size() != summary.group_variances.size()) {
      throw std::invalid_argument("EMOS predictive: variance coefficient/group count mismatch");
    }
    var = params.c;
    for (std::size_t k = 0; k < params.d.size(); ++k) {
      var += params.d[k] * summary.group_variances[k];
    }
  } else {
    if (params.d.size() != 1) {
      throw std::invalid_argument("EMOS predictive: expected a single spread coefficient");
    }
    var = params.c + params.d[0] * summary.pooled_variance;
  }
  if (!(var > 0.0)) {
    throw std::domain_error("EMOS predictive: nonpositive variance (invalid parameters)");
  }
  return GaussianPredictive{mu, var};
}

struct SummarizedCase {
  EnsembleSummary summary;
  double observation = 0.0;
};

inline EnsembleSummary summarize_for_variant(const GroupedEnsembleForecast& fc, EmosVariant variant) {
  return variant == EmosVariant::NonExchangeable ? summarize_members(fc) : summarize(fc);
}

inline std::vector<SummarizedCase> summarize_window(const TrainingWindow& window, EmosVariant variant) {
  std::vector<SummarizedCase> cases;
  cases.reserve(window.cases.size());
  for (const auto& c : window.cases) {
    cases.push_back(SummarizedCase{summarize_for_variant(*c.forecast, variant), c.observation});
  }
  return cases;
}

inline double mean_crps_objective(const EmosParameters& params,
                                  std::span<const SummarizedCase> cases) {
  if (cases.empty()) throw std::invalid_argument("mean_crps_objective: no cases");
  double sum = 0.0;
  for (const auto& c : cases) {
    sum += crps_gaussian(predictive(params, c.summary), c.observation);
  }
  return sum / static_cast<double>(cases.size());
}

inline double mean_crps_objective(const EmosParameters& params, const TrainingWindow& window) {
  const auto cases = summarize_window(window, params.variant);
  return mean_crps_objective(params, cases);
}

struct FitOptions {
  NelderMeadOptions simplex;
  bool nonnegative_b = false;
};

namespace detail {

/// Flattened training cases for the optimizer hot loop.
struct FitData {
  std::size_t n_cases = 0;
  std::size_t n_groups = 0;
  std::vector<double> means;       // n_cases x n_groups, row-major
  std::vector<double> group_vars;  // n_cases x n_groups, row-major
  std::vector<double> pooled_var;  // n_cases
  std::vector<double> obs;         // n_cases
};

template <class CaseRange>
FitData flatten_cases(const CaseRange& cases) {
  const auto deref = [](const auto& c) -> const SummarizedCase& {
    if constexpr (std::is_pointer_v<std::remove_cvref_t<decltype(c)>>) {
      return *c;
    } else {
      return c;
    }
  };
  FitData d;
  d.n_cases = cases.size();
  d.n_groups = deref(cases.front()).summary.group_means.size();
  d.means.reserve(d.n_cases * d.n_groups);
  d.group_vars.reserve(d.n_cases * d.n_groups);
  d.pooled_var.reserve(d.n_cases);
  d.obs.reserve(d.n_cases);
  for (const auto& entry : cases) {
    const SummarizedCase& c = deref(entry);
    if (c.summary.group_means.size() != d.n_groups) {
      throw std::invalid_argument("fit: cases disagree on the number of groups");
    }
    d.means.insert(d.means.end(), c.summary.group_means.begin(), c.summary.group_means.end());
    d.group_vars.insert(d.group_vars.end(), c.summary.group_variances.begin(),
                        c.summary.group_variances.end());
    d.pooled_var.push_back(c.summary.pooled_variance);
    d.obs.push_back(c.observation);
  }
  return d;
}

inline double crps_gaussian_fast(double mu, double var, double x) {
  const double sigma = std::sqrt(var);
  const double z = (x - mu) / sigma;
  return sigma * (z * (2.0 * norm_cdf(z) - 1.0) + 2.0 * norm_pdf(z) - kInvSqrtPi);
}

// Parameter packing. Positivity of the predictive variance is built into the
// parameterization: c = floor + gamma^2, d_k = delta_k^2 (b_k = beta_k^2 when
// the nonnegative-weights convention is requested). The intercept is searched
// in coordinates centered on the window's mean group forecasts; at
// temperature scale the plain intercept is nearly collinear with the mean
// weights and stalls the simplex.
struct Packing {
  EmosVariant variant;
  std::size_t n_groups;
  bool nonnegative_b;
  std::vector<double> center;  // per-group mean of the group means

  std::size_t n_d() const { return variant == EmosVariant::DualSplitVariance ? n_groups : 1; }
  std::size_t dim() const { return 1 + n_groups + 1 + n_d(); }

  std::vector<double> pack(const EmosParameters& p) const {
    std::vector<double> t;
    t.reserve(dim());
    double a_centered = p.a;
    for (std::size_t k = 0; k < n_groups; ++k) a_centered += p.b[k] * center[k];
    t.push_back(a_centered);
    for (double b : p.b) t.push_back(nonnegative_b ? std::sqrt(std::max(b, 0.0)) : b);
    t.push_back(std::sqrt(std::max(p.c - kVarianceFloor, 0.0)));
    for (double d : p.d) t.push_back(std::sqrt(std::max(d, 0.0)));
    return t;
  }

  EmosParameters unpack(std::span<const double> t) const {
    EmosParameters p;
    p.variant = variant;
    p.b.resize(n_groups);
    for (std::size_t k = 0; k < n_groups; ++k) {
      p.b[k] = nonnegative_b ? t[1 + k] * t[1 + k] : t[1 + k];
    }
    p.a = t[0];
    for (std::size_t k = 0; k < n_groups; ++k) p.a -= p.b[k] * center[k];
    const double gamma = t[1 + n_groups];
    p.c = kVarianceFloor + gamma * gamma;
    p.d.resize(n_d());
    for (std::size_t k = 0; k < p.d.size(); ++k) {
      const double delta = t[2 + n_groups + k];
      p.d[k] = delta * delta;
    }
    return p;
  }
};

}  // namespace detail

namespace detail {

/// Simplex minimization of the mean CRPS over flattened cases.
inline EmosParameters fit_flat(const FitData& data, std::span<const int> first_group_sizes,
                               EmosVariant variant, const std::optional<EmosParameters>& init,
                               const FitOptions& options) {
  check_variant_groups(variant, data.n_groups);

  std::vector<double> center(data.n_groups, 0.0);
  for (std::size_t i = 0; i < data.n_cases; ++i) {
    for (std::size_t k = 0; k < data.n_groups; ++k) center[k] += data.means[i * data.n_groups + k];
  }
  for (auto& c : center) c /= static_cast<double>(data.n_cases);

  const Packing packing{variant, data.n_groups, options.nonnegative_b, center};
  std::vector<double> theta0;
  if (init) {
    if (init->variant != variant || init->b.size() != data.n_groups) {
      throw std::invalid_argument("fit: warm start incompatible with variant/groups");
    }
    theta0 = packing.pack(*init);
  } else {
    EmosParameters cold;
    cold.variant = variant;
    cold.a = 0.0;
    int total = 0;
    for (std::size_t k = 0; k < data.n_groups; ++k) total += first_group_sizes[k];
    for (std::size_t k = 0; k < data.n_groups; ++k) {
      cold.b.push_back(static_cast<double>(first_group_sizes[k]) / total);
    }
    cold.c = kVarianceFloor + 1.0;
    cold.d.assign(packing.n_d(), 1.0);
    theta0 = packing.pack(cold);
  }

  const std::size_t ng = data.n_groups;
  const bool split = variant == EmosVariant::DualSplitVariance;
  const auto objective = [&](std::span<const double> t) {
    const double a_centered = t[0];
    const double gamma = t[1 + ng];
    const double c = kVarianceFloor + gamma * gamma;
    double sum = 0.0;
    for (std::size_t i = 0; i < data.n_cases; ++i) {
      const double* m = &data.means[i * ng];
      double mu = a_centered;
      for (std::size_t k = 0; k < ng; ++k) {
        const double b = options.nonnegative_b ? t[1 + k] * t[1 + k] : t[1 + k];
        mu += b * (m[k] - center[k]);
      }
      double var = c;
      if (split) {
        const double* gv = &data.group_vars[i * ng];
        for (std::size_t k = 0; k < ng; ++k) {
          const double delta = t[2 + ng + k];
          var += delta * delta * gv[k];
        }
      } else {
        const double delta = t[1 + ng + 1];
        var += delta * delta * data.pooled_var[i];
      }
      sum += detail::crps_gaussian_fast(mu, var, data.obs[i]);
    }
    return sum / static_cast<double>(data.n_cases);
  };

  std::vector<double> steps(packing.dim());
  steps[0] = 1.0;                                            // intercept, K
  for (std::size_t k = 0; k < ng; ++k) steps[1 + k] = 0.1;   // mean weights
  for (std::size_t k = 1 + ng; k < packing.dim(); ++k) steps[k] = 0.5;  // sqrt-variance terms

  const auto result = nelder_mead_minimize(objective, theta0, steps, options.simplex);
  EmosParameters fitted = packing.unpack(result.x);
  fitted.converged = result.converged;
  return fitted;
}

}  // namespace detail

/// Minimizes the mean Gaussian CRPS over the training cases by downhill
/// simplex search. Cold start: a = 0, b_k = M_k/M (equal pooled weight),
/// c = d = 1; pass `init` to warm-start from a previous window's fit.
inline EmosParameters fit(std::span<const SummarizedCase> cases, EmosVariant variant,
                          const std::optional<EmosParameters>& init = std::nullopt,
                          const FitOptions& options = {}) {
  if (cases.empty()) throw std::invalid_argument("fit: empty training window");
  const auto data = detail::flatten_cases(cases);
  return detail::fit_flat(data, cases.front().summary.group_sizes, variant, init, options);
}

inline EmosParameters fit(std::span<const SummarizedCase* const> cases, EmosVariant variant,
                          const std::optional<EmosParameters>& init = std::nullopt,
                          const FitOptions& options = {}) {
  if (cases.empty()) throw std::invalid_argument("fit: empty training window");
  const auto data = detail::flatten_cases(cases);
  return detail::fit_flat(data, cases.front()->summary.group_sizes, variant, init, options);
}

inline EmosParameters fit(const TrainingWindow& window, EmosVariant variant,
                          const std::optional<EmosParameters>& init = std::nullopt,
                          const FitOptions& options = {}) {
  const auto cases = summarize_window(window, variant);
  EmosParameters p = fit(cases, variant, init, options);
  p.trained_on = "target=" + format_date(window.target_init_date) +
                 " lead=" + std::to_string(window.lead_days) +
                 " n=" + std::to_string(window.length_days) +
                 " cases=" + std::to_string(window.cases.size());
  return p;
}

}  // namespace enscal
