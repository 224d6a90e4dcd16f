#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "enscal/data.hpp"
#include "enscal/emos.hpp"
#include "enscal/math.hpp"

namespace enscal {

/// One synthetic exchangeable member group. `bias_k` and `error_sd` shape the
/// ensemble-mean error; `spread_sd` the within-ensemble dispersion. Setting
/// spread_sd well below error_sd produces the underdispersion that
/// calibration is supposed to repair.
struct SynthGroupSpec {
  std::string label;
  int n_members = 0;
  double bias_k = 0.0;
  double error_sd = 1.0;
  double spread_sd = 1.0;
  double cost_per_member = 1.0;
};

/// EMOS coefficients under which the synthetic observation conditionals are
/// exact (used with exact_emos_mode).
struct GroundTruthParams {
  double a = 0.0;
  std::vector<double> b;
  double c = 1.0;
  double d = 1.0;
};

struct SynthConfig {
  int n_stations = 20;
  int n_days = 92;  // number of daily initializations
  std::vector<int> lead_times = {1};
  double ar1_coefficient = 0.7;
  double climate_sd = 3.0;
  double climate_mean_k = 285.0;
  double station_bias_spread_k = 0.5;
  double lead_error_growth = 0.15;  // error/spread inflation per extra lead day
  double spread_jitter_min = 0.75;  // per-case multiplicative spread scale
  double spread_jitter_max = 1.25;
  std::vector<SynthGroupSpec> groups;
  std::uint64_t seed = 1;
  Date start_date = make_date(2016, 6, 1);
  std::string cycle = "00:00:00";
  bool exact_emos_mode = false;
  GroundTruthParams truth;

  void validate() const {
    if (n_stations < 1 || n_days < 1) throw std::invalid_argument("synth: need stations and days");
    if (groups.empty()) throw std::invalid_argument("synth: need at least one group");
    if (lead_times.empty()) throw std::invalid_argument("synth: need at least one lead time");
    int total = 0;
    for (const auto& g : groups) {
      if (g.label.empty()) throw std::invalid_argument("synth: empty group label");
      if (g.n_members < 0) throw std::invalid_argument("synth: negative group size");
      if (!(g.error_sd > 0.0) || !(g.spread_sd > 0.0)) {
        throw std::invalid_argument("synth: error_sd and spread_sd must be > 0");
      }
      total += g.n_members;
    }
    if (total < 1) throw std::invalid_argument("synth: need at least one member in total");
    if (!(ar1_coefficient > -1.0 && ar1_coefficient < 1.0)) {
      throw std::invalid_argument("synth: AR(1) coefficient must lie in (-1,1)");
    }
    if (!(spread_jitter_min > 0.0 && spread_jitter_max >= spread_jitter_min)) {
      throw std::invalid_argument("synth: invalid spread jitter range");
    }
    for (int l : lead_times) {
      if (l < kMinLeadDays || l > kMaxLeadDays) throw std::invalid_argument("synth: lead out of range");
    }
    if (exact_emos_mode) {
      if (lead_times.size() != 1) {
        throw std::invalid_argument("synth: exact_emos_mode supports a single lead time");
      }
      if (truth.b.size() != groups.size()) {
        throw std::invalid_argument("synth: truth.b must have one weight per group");
      }
      if (!(truth.c > 0.0) || truth.d < 0.0) {
        throw std::invalid_argument("synth: truth variance coefficients invalid");
      }
    }
  }
};

struct SynthResult {
  Dataset dataset;
  GroundTruthParams truth;
};

/// Generates a station-matched synthetic dataset: AR(1) climate plus station
/// effects for the truth, per-group biased and jittered ensembles for the
/// forecasts. In exact_emos_mode observations are drawn from
/// N(a + sum b_k fbar_k, c + d S^2) instead, making `truth` the population
/// CRPS minimizer. Deterministic given the seed.
inline SynthResult generate(const SynthConfig& config_in) {
  SynthConfig config = config_in;
  config.validate();

  // canonical label order keeps the in-memory dataset identical to one
  // round-tripped through the CSV schemas
  {
    std::vector<std::size_t> order(config.groups.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
      return config.groups[i].label < config.groups[j].label;
    });
    std::vector<SynthGroupSpec> groups;
    std::vector<double> b;
    for (std::size_t i : order) {
      groups.push_back(config.groups[i]);
      if (config.exact_emos_mode) b.push_back(config.truth.b[i]);
    }
    for (std::size_t i = 1; i < groups.size(); ++i) {
      if (groups[i].label == groups[i - 1].label) {
        throw std::invalid_argument("synth: duplicate group label " + groups[i].label);
      }
    }
    config.groups = std::move(groups);
    if (config.exact_emos_mode) config.truth.b = std::move(b);
  }

  const int max_lead = *std::max_element(config.lead_times.begin(), config.lead_times.end());
  const int n_dates = config.n_days + max_lead;

  std::mt19937_64 rng(derive_seed(config.seed, 0));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SynthResult out;
  out.truth.a = config.truth.a;
  out.truth.b = config.truth.b;
  out.truth.c = config.truth.c;
  out.truth.d = config.truth.d;
  Dataset& ds = out.dataset;

  const int id_width = std::max(4, static_cast<int>(std::to_string(config.n_stations).size()));
  std::vector<double> station_effect(config.n_stations);
  for (int s = 0; s < config.n_stations; ++s) {
    StationMeta meta;
    std::string num = std::to_string(s + 1);
    meta.station_id = "S" + std::string(id_width - num.size(), '0') + num;
    meta.latitude = -60.0 + 120.0 * (s + 0.5) / config.n_stations;
    meta.longitude = -170.0 + 340.0 * ((s * 7) % config.n_stations + 0.5) / config.n_stations;
    meta.station_elevation_m = 1500.0 * unit(rng);
    if (config.exact_emos_mode) {
      meta.model_elevation_m = meta.station_elevation_m;  // no orographic mismatch
    } else {
      meta.model_elevation_m = meta.station_elevation_m + 400.0 * (unit(rng) - 0.5);
    }
    station_effect[s] = config.station_bias_spread_k * gauss(rng);
    ds.stations.push_back(std::move(meta));
  }

  // station-level truth, AR(1) about the climate mean
  std::vector<std::vector<double>> truth_series(config.n_stations, std::vector<double>(n_dates));
  for (int s = 0; s < config.n_stations; ++s) {
    double x = config.climate_sd * gauss(rng);
    const double innov_sd =
        config.climate_sd * std::sqrt(1.0 - config.ar1_coefficient * config.ar1_coefficient);
    for (int t = 0; t < n_dates; ++t) {
      if (t > 0) x = config.ar1_coefficient * x + innov_sd * gauss(rng);
      truth_series[s][t] = config.climate_mean_k + station_effect[s] + x;
    }
  }

  std::vector<std::vector<double>> obs_value = truth_series;

  for (int s = 0; s < config.n_stations; ++s) {
    const auto& meta = ds.stations[s];
    const double model_shift =
        kLapseRateKPerM * (meta.station_elevation_m - meta.model_elevation_m);
    for (int t = 0; t < config.n_days; ++t) {
      for (int lead : config.lead_times) {
        GroupedEnsembleForecast fc;
        fc.station_id = meta.station_id;
        fc.init_time = DateTime{config.start_date + t, config.cycle};
        fc.lead_days = lead;
        const double growth = 1.0 + config.lead_error_growth * (lead - 1);
        for (const auto& gspec : config.groups) {
          if (gspec.n_members == 0) continue;
          const double center = truth_series[s][t + lead] + gspec.bias_k +
                                gspec.error_sd * growth * gauss(rng);
          const double jitter = config.spread_jitter_min +
                                (config.spread_jitter_max - config.spread_jitter_min) * unit(rng);
          const double spread = gspec.spread_sd * growth * jitter;
          MemberGroup g;
          g.label = gspec.label;
          for (int m = 0; m < gspec.n_members; ++m) {
            g.member_idx.push_back(m + 1);
            // emitted at model reference level; the orographic correction
            // recovers the station-level value
            g.members.push_back(center + spread * gauss(rng) + model_shift);
          }
          fc.groups.push_back(std::move(g));
        }
        if (config.exact_emos_mode) {
          // summary of station-level members (model_shift is zero here by
          // construction, but stay explicit)
          GroupedEnsembleForecast station_level = fc;
          for (auto& g : station_level.groups) {
            for (auto& m : g.members) m -= model_shift;
          }
          const EnsembleSummary summary = summarize(station_level);
          double mu = out.truth.a;
          for (std::size_t k = 0; k < summary.group_means.size(); ++k) {
            mu += out.truth.b[k] * summary.group_means[k];
          }
          const double sd = std::sqrt(out.truth.c + out.truth.d * summary.pooled_variance);
          obs_value[s][t + lead] = mu + sd * gauss(rng);
        }
        ds.forecasts.push_back(std::move(fc));
      }
    }
  }

  for (int s = 0; s < config.n_stations; ++s) {
    for (int t = 0; t < n_dates; ++t) {
      Observation o;
      o.station_id = ds.stations[s].station_id;
      o.valid_time = DateTime{config.start_date + t, config.cycle};
      o.value_k = obs_value[s][t];
      ds.observations.push_back(std::move(o));
    }
  }

  ds.build_index();
  return out;
}

/// Two-group starting configuration with the default contrasts: relative to
/// the high-resolution group, the low-resolution group carries 0.1 K^2 less
/// ensemble variance and about 0.05 K more ensemble-mean error.
inline SynthConfig default_dual_resolution_config() {
  SynthConfig cfg;
  cfg.groups = {
      {"TCo399", 200, 0.0, 1.05, std::sqrt(0.9), 1.0},
      {"TCo639", 50, 0.0, 1.0, 1.0, 4.0},
  };
  return cfg;
}

/// Enumerates the cost-equivalent (M_low, M_high) mixtures under a budget
/// expressed in units of the configured per-member costs: for every
/// affordable high-resolution count, the largest affordable low-resolution
/// complement (capped by group availability). Pure configurations included.
inline std::vector<std::pair<int, int>> cost_equivalent_sweep(const SynthConfig& config,
                                                              double total_budget) {
  if (config.groups.size() != 2) {
    throw std::invalid_argument("cost_equivalent_sweep: needs exactly two groups");
  }
  const auto& g0 = config.groups[0];
  const auto& g1 = config.groups[1];
  if (!(g0.cost_per_member > 0.0) || !(g1.cost_per_member > 0.0)) {
    throw std::invalid_argument("cost_equivalent_sweep: member costs must be > 0");
  }
  const bool first_is_low = g0.cost_per_member <= g1.cost_per_member;
  const auto& low = first_is_low ? g0 : g1;
  const auto& high = first_is_low ? g1 : g0;
  if (total_budget < std::min(low.cost_per_member, high.cost_per_member)) {
    throw std::invalid_argument("cost_equivalent_sweep: budget smaller than one cheapest member");
  }

  std::vector<std::pair<int, int>> mixtures;
  const int max_high = std::min(high.n_members,
                                static_cast<int>(std::floor(total_budget / high.cost_per_member)));
  for (int m_high = max_high; m_high >= 0; --m_high) {
    const double rest = total_budget - m_high * high.cost_per_member;
    const int m_low =
        std::min(low.n_members, static_cast<int>(std::floor(rest / low.cost_per_member)));
    if (m_low + m_high == 0) continue;
    mixtures.emplace_back(m_low, m_high);
  }
  return mixtures;
}

}  // namespace enscal
