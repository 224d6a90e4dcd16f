#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "enscal/clustering.hpp"
#include "enscal/csv.hpp"
#include "enscal/data.hpp"
#include "enscal/emos.hpp"
#include "enscal/inference.hpp"
#include "enscal/ini.hpp"
#include "enscal/params_io.hpp"
#include "enscal/scoring.hpp"
#include "enscal/synthetic.hpp"

namespace enscal {

/// One dual-resolution configuration: the first `m_low` low-resolution and
/// `m_high` high-resolution members (in member-index order) of each forecast.
struct MixtureSpec {
  int m_low = 0;
  int m_high = 0;

  std::string label() const { return std::to_string(m_low) + "-" + std::to_string(m_high); }

  static MixtureSpec parse(std::string_view s) {
    const auto dash = s.find('-');
    if (dash == std::string_view::npos) {
      throw std::invalid_argument("mixture must be '<low>-<high>': '" + std::string(s) + "'");
    }
    MixtureSpec m;
    m.m_low = static_cast<int>(IniFile::parse_int(std::string(s.substr(0, dash)), "scenario", "mixtures"));
    m.m_high = static_cast<int>(IniFile::parse_int(std::string(s.substr(dash + 1)), "scenario", "mixtures"));
    if (m.m_low < 0 || m.m_high < 0 || m.m_low + m.m_high == 0) {
      throw std::invalid_argument("mixture needs nonnegative counts and >= 1 member: '" +
                                  std::string(s) + "'");
    }
    return m;
  }
};

struct ExperimentConfig {
  // data
  std::string stations_path;
  std::string observations_path;
  std::string forecasts_path;
  bool apply_orographic = true;

  // scenario
  std::string low_group;
  std::string high_group;
  std::vector<MixtureSpec> mixtures;
  std::string reference;  // mixture label; empty = pure high resolution
  double budget = 0.0;    // optional cost-consistency check
  double cost_low = 1.0;
  double cost_high = 1.0;

  // training
  TrainingMode mode = TrainingMode::SemiLocal;
  EmosVariant variant = EmosVariant::Dual;
  int n_days = 30;
  int k_clusters = 200;
  bool recluster_each_window = false;
  bool cluster_per_config = false;
  bool nonnegative_b = false;
  bool random_member_subset = false;  // sensitivity check: seeded subsets
  std::uint64_t seed = 1;

  ScoreConfig scores;

  // verification
  Date verify_start;
  Date verify_end;
  std::vector<int> lead_times = {1};
  bool station_equal_weight = false;

  // inference
  int bootstrap_replicates = 2000;
  double bootstrap_level = 0.95;
  double mean_block_length = 0.0;  // 0 = ceil(n^(1/3))
  int dm_max_lag = -1;             // -1 = lead_days - 1
  int min_pairs_per_station = 20;
  double significance_level = 0.05;
  bool emit_significance = true;

  std::string output_dir = "out";

  void validate() const {
    if (low_group.empty() || high_group.empty() || low_group == high_group) {
      throw std::invalid_argument("config: scenario needs distinct low_group and high_group");
    }
    if (mixtures.empty()) throw std::invalid_argument("config: scenario needs >= 1 mixture");
    std::set<std::string> labels;
    for (const auto& m : mixtures) {
      if (!labels.insert(m.label()).second) {
        throw std::invalid_argument("config: duplicate mixture " + m.label());
      }
    }
    if (budget > 0.0) {
      for (const auto& m : mixtures) {
        const double cost = m.m_low * cost_low + m.m_high * cost_high;
        if (cost > budget + 1e-9) {
          throw std::invalid_argument("config: mixture " + m.label() + " exceeds budget");
        }
      }
    }
    if (n_days < 1) throw std::invalid_argument("config: training n_days must be >= 1");
    if (k_clusters < 1) throw std::invalid_argument("config: k_clusters must be >= 1");
    if (lead_times.empty()) throw std::invalid_argument("config: need >= 1 lead time");
    for (std::size_t i = 0; i < lead_times.size(); ++i) {
      if (lead_times[i] < kMinLeadDays || lead_times[i] > kMaxLeadDays) {
        throw std::invalid_argument("config: lead time out of range");
      }
      if (i > 0 && lead_times[i] <= lead_times[i - 1]) {
        throw std::invalid_argument("config: lead times must be strictly ascending");
      }
    }
    if (!(verify_start <= verify_end)) {
      throw std::invalid_argument("config: verification start must not exceed end");
    }
    if (bootstrap_replicates < 100) throw std::invalid_argument("config: bootstrap replicates >= 100");
    if (!(bootstrap_level > 0.0 && bootstrap_level < 1.0)) {
      throw std::invalid_argument("config: bootstrap level in (0,1)");
    }
    if (!(significance_level > 0.0 && significance_level < 1.0)) {
      throw std::invalid_argument("config: significance level in (0,1)");
    }
    scores.validate();
  }

  std::string reference_label() const {
    if (!reference.empty()) return reference;
    for (const auto& m : mixtures) {
      if (m.m_low == 0) return m.label();
    }
    return mixtures.front().label();
  }

  static ExperimentConfig from_ini(const IniFile& ini) {
    ExperimentConfig c;
    c.stations_path = ini.require_string("data", "stations");
    c.observations_path = ini.require_string("data", "observations");
    c.forecasts_path = ini.require_string("data", "forecasts");
    c.apply_orographic = ini.get_bool("data", "orographic_correction", true);

    c.low_group = ini.require_string("scenario", "low_group");
    c.high_group = ini.require_string("scenario", "high_group");
    for (const auto& item : ini.get_list("scenario", "mixtures")) {
      c.mixtures.push_back(MixtureSpec::parse(item));
    }
    c.reference = ini.get_string("scenario", "reference", "");
    c.budget = ini.get_double("scenario", "budget", 0.0);
    c.cost_low = ini.get_double("scenario", "cost_low", 1.0);
    c.cost_high = ini.get_double("scenario", "cost_high", 1.0);

    c.mode = training_mode_from_string(ini.get_string("training", "mode", "semi_local"));
    c.variant = emos_variant_from_string(ini.get_string("training", "variant", "dual"));
    c.n_days = static_cast<int>(ini.get_int("training", "n_days", 30));
    c.k_clusters = static_cast<int>(ini.get_int("training", "k_clusters", 200));
    c.recluster_each_window = ini.get_bool("training", "recluster_each_window", false);
    c.cluster_per_config = ini.get_bool("training", "cluster_per_config", false);
    c.nonnegative_b = ini.get_bool("training", "nonnegative_b", false);
    c.random_member_subset = ini.get_bool("scenario", "random_member_subset", false);
    c.seed = static_cast<std::uint64_t>(ini.get_int("training", "seed", 1));

    if (ini.has("scores", "bs_levels")) {
      c.scores.bs_threshold_levels.clear();
      for (const auto& s : ini.get_list("scores", "bs_levels")) {
        c.scores.bs_threshold_levels.push_back(IniFile::parse_double(s, "scores", "bs_levels"));
      }
    }
    if (ini.has("scores", "qs_levels")) {
      c.scores.qs_levels.clear();
      for (const auto& s : ini.get_list("scores", "qs_levels")) {
        c.scores.qs_levels.push_back(IniFile::parse_double(s, "scores", "qs_levels"));
      }
    }

    c.verify_start = parse_date(ini.require_string("verification", "start"));
    c.verify_end = parse_date(ini.require_string("verification", "end"));
    c.lead_times.clear();
    for (const auto& s : ini.get_list("verification", "lead_times")) {
      c.lead_times.push_back(static_cast<int>(IniFile::parse_int(s, "verification", "lead_times")));
    }
    if (c.lead_times.empty()) c.lead_times = {1};
    c.station_equal_weight = ini.get_bool("verification", "station_equal_weight", false);

    c.bootstrap_replicates = static_cast<int>(ini.get_int("inference", "bootstrap_replicates", 2000));
    c.bootstrap_level = ini.get_double("inference", "bootstrap_level", 0.95);
    c.mean_block_length = ini.get_double("inference", "mean_block_length", 0.0);
    c.dm_max_lag = static_cast<int>(ini.get_int("inference", "dm_max_lag", -1));
    c.min_pairs_per_station = static_cast<int>(ini.get_int("inference", "min_pairs_per_station", 20));
    c.significance_level = ini.get_double("inference", "significance_level", 0.05);
    c.emit_significance = ini.get_bool("inference", "emit_significance", true);

    c.output_dir = ini.get_string("output", "dir", "out");
    c.validate();
    return c;
  }
};

/// Parses the [synth] and [synth.group.<label>] sections of a config file.
inline SynthConfig synth_config_from_ini(const IniFile& ini) {
  SynthConfig c;
  c.n_stations = static_cast<int>(ini.get_int("synth", "stations", c.n_stations));
  c.n_days = static_cast<int>(ini.get_int("synth", "days", c.n_days));
  c.lead_times.clear();
  for (const auto& s : ini.get_list("synth", "lead_times")) {
    c.lead_times.push_back(static_cast<int>(IniFile::parse_int(s, "synth", "lead_times")));
  }
  if (c.lead_times.empty()) c.lead_times = {1};
  c.ar1_coefficient = ini.get_double("synth", "ar1", c.ar1_coefficient);
  c.climate_sd = ini.get_double("synth", "climate_sd", c.climate_sd);
  c.climate_mean_k = ini.get_double("synth", "climate_mean", c.climate_mean_k);
  c.station_bias_spread_k = ini.get_double("synth", "station_bias_spread", c.station_bias_spread_k);
  c.lead_error_growth = ini.get_double("synth", "lead_error_growth", c.lead_error_growth);
  c.spread_jitter_min = ini.get_double("synth", "spread_jitter_min", c.spread_jitter_min);
  c.spread_jitter_max = ini.get_double("synth", "spread_jitter_max", c.spread_jitter_max);
  c.seed = static_cast<std::uint64_t>(ini.get_int("synth", "seed", 1));
  if (ini.has("synth", "start_date")) c.start_date = parse_date(ini.require_string("synth", "start_date"));
  c.cycle = ini.get_string("synth", "cycle", c.cycle);
  c.exact_emos_mode = ini.get_bool("synth", "exact_emos", false);
  if (c.exact_emos_mode) {
    c.truth.a = ini.get_double("synth", "truth_a", 0.0);
    c.truth.b.clear();
    for (const auto& s : ini.get_list("synth", "truth_b")) {
      c.truth.b.push_back(IniFile::parse_double(s, "synth", "truth_b"));
    }
    c.truth.c = ini.get_double("synth", "truth_c", 1.0);
    c.truth.d = ini.get_double("synth", "truth_d", 1.0);
  }
  for (const auto& section : ini.sections_with_prefix("synth.group.")) {
    SynthGroupSpec g;
    g.label = section.substr(std::string("synth.group.").size());
    g.n_members = static_cast<int>(ini.get_int(section, "members", 0));
    g.bias_k = ini.get_double(section, "bias", 0.0);
    g.error_sd = ini.get_double(section, "error_sd", 1.0);
    g.spread_sd = ini.get_double(section, "spread_sd", 1.0);
    g.cost_per_member = ini.get_double(section, "cost", 1.0);
    c.groups.push_back(std::move(g));
  }
  return c;
}

/// One verification result row. `level` tags Brier thresholds / quantile
/// levels; reference-relative columns compare against the same model of the
/// reference configuration.
struct ScoreTableRow {
  std::string configuration;
  std::string model;  // "raw" | "emos"
  int lead_days = 0;
  std::string metric;
  double level = std::numeric_limits<double>::quiet_NaN();
  double mean = std::numeric_limits<double>::quiet_NaN();
  double ci_lower = std::numeric_limits<double>::quiet_NaN();
  double ci_upper = std::numeric_limits<double>::quiet_NaN();
  double skill_vs_ref = std::numeric_limits<double>::quiet_NaN();
  double skill_ci_lower = std::numeric_limits<double>::quiet_NaN();
  double skill_ci_upper = std::numeric_limits<double>::quiet_NaN();
  double diff_vs_ref = std::numeric_limits<double>::quiet_NaN();
  double diff_ci_lower = std::numeric_limits<double>::quiet_NaN();
  double diff_ci_upper = std::numeric_limits<double>::quiet_NaN();
  double dm_p_value = std::numeric_limits<double>::quiet_NaN();
};

struct ScoreTable {
  std::string reference;
  std::vector<ScoreTableRow> rows;

  const ScoreTableRow* find(const std::string& configuration, const std::string& model,
                            int lead_days, const std::string& metric,
                            double level = std::numeric_limits<double>::quiet_NaN()) const {
    for (const auto& r : rows) {
      if (r.configuration == configuration && r.model == model && r.lead_days == lead_days &&
          r.metric == metric &&
          (std::isnan(level) ? std::isnan(r.level) : std::fabs(r.level - level) < 1e-12)) {
        return &r;
      }
    }
    return nullptr;
  }
};

struct SignificanceMatrix {
  int lead_days = 0;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> proportions;
};

struct ExperimentResult {
  ScoreTable table;
  std::vector<FitRecord> fits;
  long dropped_missing_obs = 0;  // forecast cases lacking a verifying observation
  std::vector<SignificanceMatrix> significance;  // per lead, emos CRPS
  std::map<std::string, ClusterAssignment> clusters;  // keyed by mixture label or "shared"
};

enum class RunStage { Calibrate, Full };

namespace detail {

inline void run_parallel(std::vector<std::function<void()>>& tasks, int jobs) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || tasks.size() <= 1) {
    for (auto& t : tasks) t();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) break;
        try {
          tasks[i]();
        } catch (...) {
          errors[w] = std::current_exception();
          break;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Subsample of a stored forecast for one mixture; groups with a zero count
/// are absent. By default the first members in member-index order are taken
/// (members are exchangeable); a nonzero `subset_seed` draws a seeded random
/// subset instead, kept in member-index order.
inline GroupedEnsembleForecast subsample_forecast(const GroupedEnsembleForecast& fc,
                                                  const std::string& low_group, int m_low,
                                                  const std::string& high_group, int m_high,
                                                  std::uint64_t subset_seed = 0) {
  GroupedEnsembleForecast out;
  out.station_id = fc.station_id;
  out.init_time = fc.init_time;
  out.lead_days = fc.lead_days;
  for (const auto& g : fc.groups) {
    int want = 0;
    if (g.label == low_group) {
      want = m_low;
    } else if (g.label == high_group) {
      want = m_high;
    } else {
      throw std::invalid_argument("forecast group '" + g.label + "' not named in scenario");
    }
    if (want == 0) continue;
    if (static_cast<int>(g.members.size()) < want) {
      throw std::invalid_argument("mixture needs " + std::to_string(want) + " members of '" +
                                  g.label + "' but forecast has " +
                                  std::to_string(g.members.size()));
    }
    MemberGroup sub;
    sub.label = g.label;
    if (subset_seed == 0 || want == static_cast<int>(g.members.size())) {
      sub.member_idx.assign(g.member_idx.begin(), g.member_idx.begin() + want);
      sub.members.assign(g.members.begin(), g.members.begin() + want);
    } else {
      std::vector<std::size_t> perm(g.members.size());
      for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
      std::mt19937_64 rng(derive_seed(subset_seed, hash_string(g.label)));
      std::shuffle(perm.begin(), perm.end(), rng);
      perm.resize(want);
      std::sort(perm.begin(), perm.end());
      for (const std::size_t i : perm) {
        sub.member_idx.push_back(g.member_idx[i]);
        sub.members.push_back(g.members[i]);
      }
    }
    out.groups.push_back(std::move(sub));
  }
  if (out.groups.empty()) {
    throw std::invalid_argument("mixture selects no members present in the forecast");
  }
  return out;
}

/// Per-forecast salt for the random-subset mode, stable across the passes
/// that must agree on the chosen members.
inline std::uint64_t forecast_subset_seed(const ExperimentConfig& cfg,
                                          const GroupedEnsembleForecast& fc) {
  if (!cfg.random_member_subset) return 0;
  const std::uint64_t salt =
      hash_string(fc.station_id) ^
      (static_cast<std::uint64_t>(static_cast<std::uint32_t>(fc.init_time.date.serial)) << 8) ^
      static_cast<std::uint64_t>(fc.lead_days);
  return derive_seed(cfg.seed ^ 0x5B5E711C0DE5ull, salt);
}

struct CaseRec {
  int station = -1;
  Date init;
  SummarizedCase summarized;                      // subsampled summary + verifying obs
  bool has_obs = false;
  const GroupedEnsembleForecast* forecast = nullptr;  // full stored forecast
};

/// All usable cases of one (mixture, lead): init dates spanning the first
/// training day through the end of verification, day-major and
/// station-ordered.
struct MixLeadCases {
  Date base;  // first init date covered
  int n_day_slots = 0;
  int missing_obs = 0;  // cases lacking a verifying observation
  std::vector<CaseRec> cases;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> day_spans;  // offset,count per slot

  std::span<const CaseRec> on_day(Date d) const {
    const int slot = d - base;
    if (slot < 0 || slot >= n_day_slots) return {};
    const auto [off, cnt] = day_spans[slot];
    return std::span<const CaseRec>(cases).subspan(off, cnt);
  }
};

struct DayAccum {
  long n = 0;
  long n_bs = 0;
  double crps = 0.0;
  double ae = 0.0;
  double se = 0.0;
  double logs = 0.0;
  std::vector<double> bs;
  std::vector<double> qs;
};

struct ComboAccum {
  std::vector<DayAccum> days;                    // one per verification day
  std::vector<std::vector<double>> station_crps;  // [station][day], NaN = missing
};

/// Per-day aggregate of one metric: sum of case scores and case count.
struct DailySeries {
  std::vector<double> sum;
  std::vector<double> weight;
};

inline double series_mean(const DailySeries& s, bool station_equal) {
  double num = 0.0, den = 0.0;
  if (station_equal) {
    for (std::size_t i = 0; i < s.sum.size(); ++i) {
      if (s.weight[i] > 0.0) {
        num += s.sum[i] / s.weight[i];
        den += 1.0;
      }
    }
  } else {
    for (std::size_t i = 0; i < s.sum.size(); ++i) {
      num += s.sum[i];
      den += s.weight[i];
    }
  }
  return den > 0.0 ? num / den : std::numeric_limits<double>::quiet_NaN();
}

inline double series_mean_resampled(const DailySeries& s, std::span<const std::uint32_t> idx,
                                    bool station_equal) {
  double num = 0.0, den = 0.0;
  for (const std::uint32_t i : idx) {
    if (station_equal) {
      if (s.weight[i] > 0.0) {
        num += s.sum[i] / s.weight[i];
        den += 1.0;
      }
    } else {
      num += s.sum[i];
      den += s.weight[i];
    }
  }
  return den > 0.0 ? num / den : std::numeric_limits<double>::quiet_NaN();
}

struct CiBounds {
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
};

template <class Stat>
CiBounds bootstrap_day_ci(std::size_t n_days, int replicates, double mean_block_length,
                          double level, std::uint64_t seed, Stat&& stat) {
  if (n_days < 5) return {};
  const double p_new_block = 1.0 / mean_block_length;
  std::vector<double> stats;
  stats.reserve(replicates);
  std::vector<std::uint32_t> idx;
  for (int r = 0; r < replicates; ++r) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    stationary_bootstrap_indices(n_days, p_new_block, rng, idx);
    const double v = stat(std::span<const std::uint32_t>(idx));
    if (std::isfinite(v)) stats.push_back(v);
  }
  if (stats.size() < static_cast<std::size_t>(replicates) / 2) return {};
  std::sort(stats.begin(), stats.end());
  return CiBounds{quantile_type1(stats, (1.0 - level) / 2.0),
                  quantile_type1(stats, (1.0 + level) / 2.0)};
}

}  // namespace detail

/// Station feature vectors for one experiment: climatology quantiles from the
/// observations over [target-n, target-1], error quantiles from the given
/// mixture's pooled ensemble mean at the shortest configured lead.
inline std::vector<StationFeatures> experiment_station_features(const Dataset& ds,
                                                                const ExperimentConfig& cfg,
                                                                const MixtureSpec& mixture,
                                                                Date target) {
  const int lead = cfg.lead_times.front();
  std::vector<StationFeatures> features;
  features.reserve(ds.stations.size());
  std::vector<double> climatology;
  std::vector<double> errors;
  for (std::size_t s = 0; s < ds.stations.size(); ++s) {
    climatology.clear();
    errors.clear();
    for (int back = cfg.n_days; back >= 1; --back) {
      const Date day = target - back;
      if (const auto obs = ds.observation_at(s, day)) climatology.push_back(*obs);
      const auto* idxs = ds.forecasts_on(day, lead);
      if (idxs == nullptr) continue;
      for (const std::size_t fi : *idxs) {
        const auto& fc = ds.forecasts[fi];
        if (fc.station_id != ds.stations[s].station_id) continue;
        const auto obs = ds.observation_at(s, day + lead);
        if (!obs) continue;
        const auto sub = detail::subsample_forecast(fc, cfg.low_group, mixture.m_low,
                                                    cfg.high_group, mixture.m_high,
                                                    detail::forecast_subset_seed(cfg, fc));
        double pooled = 0.0;
        int total = 0;
        for (const auto& g : sub.groups) {
          for (const double v : g.members) pooled += v;
          total += static_cast<int>(g.members.size());
        }
        errors.push_back(pooled / total - *obs);
      }
    }
    features.push_back(station_features(ds.stations[s].station_id, climatology, errors));
  }
  return features;
}

inline ClusterAssignment experiment_clustering(const Dataset& ds, const ExperimentConfig& cfg,
                                               const MixtureSpec& mixture, Date target) {
  return kmeans_cluster(experiment_station_features(ds, cfg, mixture, target), cfg.k_clusters,
                        cfg.seed);
}

/// Per-station contrasts between two equal-sized sub-ensembles at one lead:
/// mean forecast difference, mean ensemble variance difference, and the
/// difference in RMSE of the ensemble mean, each high-minus-low.
struct StationDiagnosticsRow {
  std::string station_id;
  double mean_diff = 0.0;
  double variance_diff = 0.0;
  double rmse_diff = 0.0;
  int n_cases = 0;
};

inline std::vector<StationDiagnosticsRow> station_diagnostics(const Dataset& ds,
                                                              const std::string& high_group,
                                                              const std::string& low_group,
                                                              int equal_size, int lead_days) {
  if (equal_size < 2) throw std::invalid_argument("station_diagnostics: equal_size must be >= 2");
  struct Accum {
    double mean_diff = 0.0;
    double var_diff = 0.0;
    double se_high = 0.0;
    double se_low = 0.0;
    int n = 0;
  };
  std::map<std::string, Accum> by_station;
  for (const auto& fc : ds.forecasts) {
    if (fc.lead_days != lead_days) continue;
    const MemberGroup* high = fc.find_group(high_group);
    const MemberGroup* low = fc.find_group(low_group);
    if (high == nullptr || low == nullptr) {
      throw std::invalid_argument("station_diagnostics: forecast lacks group '" +
                                  (high == nullptr ? high_group : low_group) + "'");
    }
    if (static_cast<int>(high->members.size()) < equal_size ||
        static_cast<int>(low->members.size()) < equal_size) {
      throw std::invalid_argument("station_diagnostics: fewer than " +
                                  std::to_string(equal_size) + " members in a group");
    }
    const auto obs = ds.observation_at(fc.station_id, fc.init_time.date + fc.lead_days);
    if (!obs) continue;
    const std::span<const double> h(high->members.data(), static_cast<std::size_t>(equal_size));
    const std::span<const double> l(low->members.data(), static_cast<std::size_t>(equal_size));
    const double mh = mean(h);
    const double ml = mean(l);
    auto& acc = by_station[fc.station_id];
    acc.mean_diff += mh - ml;
    acc.var_diff += sample_variance(h) - sample_variance(l);
    acc.se_high += (mh - *obs) * (mh - *obs);
    acc.se_low += (ml - *obs) * (ml - *obs);
    ++acc.n;
  }
  std::vector<StationDiagnosticsRow> rows;
  for (const auto& [sid, acc] : by_station) {
    if (acc.n == 0) continue;
    StationDiagnosticsRow r;
    r.station_id = sid;
    r.n_cases = acc.n;
    r.mean_diff = acc.mean_diff / acc.n;
    r.variance_diff = acc.var_diff / acc.n;
    r.rmse_diff = std::sqrt(acc.se_high / acc.n) - std::sqrt(acc.se_low / acc.n);
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Runs the calibrate/verify grid: for every verification day, configuration,
/// and lead time, fits EMOS on the rolling scope window and scores the
/// held-out day, raw and post-processed. `preloaded_fits` (from a parameter
/// file) replaces fitting. Deterministic for fixed config, data, and seed,
/// independent of `jobs`.
inline ExperimentResult run_experiment(const Dataset& ds, const ExperimentConfig& cfg, int jobs,
                                       RunStage stage = RunStage::Full,
                                       const std::vector<FitRecord>* preloaded_fits = nullptr) {
  cfg.validate();
  const Date data_start = ds.first_init_date();
  if (cfg.verify_start - data_start < cfg.n_days) {
    throw std::invalid_argument("verification starts before " + std::to_string(cfg.n_days) +
                                " training days are available");
  }

  const int n_days_verify = cfg.verify_end - cfg.verify_start + 1;
  std::vector<Date> verify_days(n_days_verify);
  for (int i = 0; i < n_days_verify; ++i) verify_days[i] = cfg.verify_start + i;

  const auto n_mix = cfg.mixtures.size();
  const auto n_leads = cfg.lead_times.size();
  const auto n_stations = ds.stations.size();
  const std::string ref_label = cfg.reference_label();
  std::size_t ref_idx = n_mix;
  for (std::size_t m = 0; m < n_mix; ++m) {
    if (cfg.mixtures[m].label() == ref_label) ref_idx = m;
  }
  if (ref_idx == n_mix) throw std::invalid_argument("reference mixture not in scenario: " + ref_label);

  // ---- per-(mixture,lead) case tables ------------------------------------
  std::vector<detail::MixLeadCases> tables(n_mix * n_leads);
  {
    std::vector<std::function<void()>> tasks;
    for (std::size_t m = 0; m < n_mix; ++m) {
      for (std::size_t l = 0; l < n_leads; ++l) {
        tasks.push_back([&, m, l] {
          const int lead = cfg.lead_times[l];
          auto& table = tables[m * n_leads + l];
          table.base = cfg.verify_start - cfg.n_days;
          table.n_day_slots = cfg.n_days + n_days_verify;
          table.day_spans.assign(table.n_day_slots, {0, 0});
          for (int slot = 0; slot < table.n_day_slots; ++slot) {
            const Date day = table.base + slot;
            const auto offset = static_cast<std::uint32_t>(table.cases.size());
            const auto* idxs = ds.forecasts_on(day, lead);
            if (idxs != nullptr) {
              for (const std::size_t fi : *idxs) {
                const auto& fc = ds.forecasts[fi];
                detail::CaseRec rec;
                rec.station = static_cast<int>(*ds.station_index(fc.station_id));
                rec.init = day;
                rec.forecast = &fc;
                const auto sub = detail::subsample_forecast(
                    fc, cfg.low_group, cfg.mixtures[m].m_low, cfg.high_group,
                    cfg.mixtures[m].m_high, detail::forecast_subset_seed(cfg, fc));
                rec.summarized.summary = summarize_for_variant(sub, cfg.variant);
                const auto obs = ds.observation_at(fc.station_id, day + lead);
                rec.has_obs = obs.has_value();
                if (!rec.has_obs) ++table.missing_obs;
                rec.summarized.observation = obs.value_or(0.0);
                table.cases.push_back(std::move(rec));
              }
            }
            table.day_spans[slot] = {offset,
                                     static_cast<std::uint32_t>(table.cases.size()) - offset};
          }
        });
      }
    }
    detail::run_parallel(tasks, jobs);
  }

  // ---- clustering ---------------------------------------------------------
  ExperimentResult result;
  for (const auto& t : tables) result.dropped_missing_obs += t.missing_obs;
  result.table.reference = ref_label;
  // assignment per mixture label (all point at the shared one by default),
  // then per target day when re-clustering is on
  std::map<std::string, std::map<Date, ClusterAssignment>> assignments;
  if (cfg.mode == TrainingMode::SemiLocal) {
    const auto cluster_for = [&](std::size_t m, Date target) {
      return experiment_clustering(ds, cfg, cfg.mixtures[m], target);
    };

    std::vector<std::string> cluster_keys;
    if (cfg.cluster_per_config) {
      for (const auto& m : cfg.mixtures) cluster_keys.push_back(m.label());
    } else {
      cluster_keys.push_back(ref_label);
    }
    for (const auto& key : cluster_keys) {
      std::size_t m = 0;
      for (std::size_t i = 0; i < n_mix; ++i) {
        if (cfg.mixtures[i].label() == key) m = i;
      }
      if (cfg.recluster_each_window) {
        for (const Date d : verify_days) assignments[key][d] = cluster_for(m, d);
      } else {
        assignments[key][cfg.verify_start] = cluster_for(m, cfg.verify_start);
      }
      result.clusters[cfg.cluster_per_config ? key : "shared"] =
          assignments[key].begin()->second;
    }
  }
  const auto assignment_for = [&](std::size_t m, Date target) -> const ClusterAssignment* {
    if (cfg.mode != TrainingMode::SemiLocal) return nullptr;
    const std::string key = cfg.cluster_per_config ? cfg.mixtures[m].label() : ref_label;
    const auto& by_day = assignments.at(key);
    if (cfg.recluster_each_window) return &by_day.at(target);
    return &by_day.begin()->second;
  };

  // ---- climatological thresholds per (lead, station) ----------------------
  const auto n_bs = cfg.scores.bs_threshold_levels.size();
  const auto n_qs = cfg.scores.qs_levels.size();
  std::vector<std::vector<std::vector<double>>> thresholds(
      n_leads, std::vector<std::vector<double>>(n_stations));
  for (std::size_t l = 0; l < n_leads; ++l) {
    for (std::size_t s = 0; s < n_stations; ++s) {
      std::vector<double> obs_series;
      for (const Date d : verify_days) {
        if (const auto obs = ds.observation_at(s, d + cfg.lead_times[l])) {
          obs_series.push_back(*obs);
        }
      }
      if (!obs_series.empty()) {
        thresholds[l][s] = climatology_thresholds(obs_series, cfg.scores.bs_threshold_levels);
      }
    }
  }

  // ---- fit + score grid ----------------------------------------------------
  const auto combo = [&](std::size_t m, int model, std::size_t l) {
    return (m * 2 + static_cast<std::size_t>(model)) * n_leads + l;
  };
  std::vector<detail::ComboAccum> accums(n_mix * 2 * n_leads);
  for (auto& a : accums) {
    a.days.resize(n_days_verify);
    for (auto& d : a.days) {
      d.bs.assign(n_bs, 0.0);
      d.qs.assign(n_qs, 0.0);
    }
  }
  for (std::size_t m = 0; m < n_mix; ++m) {
    for (std::size_t l = 0; l < n_leads; ++l) {
      accums[combo(m, 1, l)].station_crps.assign(
          n_stations,
          std::vector<double>(n_days_verify, std::numeric_limits<double>::quiet_NaN()));
    }
  }
  std::vector<std::vector<FitRecord>> fit_slots(n_mix * n_leads);

  std::map<std::pair<std::string, std::string>, const EmosParameters*> preload_index;
  if (preloaded_fits != nullptr) {
    for (const auto& r : *preloaded_fits) {
      preload_index[{r.configuration,
                     r.scope_id + "|" + std::to_string(r.lead_days) + "|" +
                         format_date(r.target_date)}] = &r.params;
    }
  }

  const auto score_case = [&](const detail::CaseRec& rec, std::size_t m, std::size_t l,
                              const auto& predictive_dist, detail::DayAccum& day,
                              double* crps_out) {
    const double obs = rec.summarized.observation;
    const double crps = [&] {
      if constexpr (std::is_same_v<std::decay_t<decltype(predictive_dist)>, GaussianPredictive>) {
        return crps_gaussian(predictive_dist, obs);
      } else {
        return crps_empirical(predictive_dist, obs);
      }
    }();
    day.n += 1;
    day.crps += crps;
    const double point = predictive_dist.median();
    day.ae += std::fabs(point - obs);
    day.se += (point - obs) * (point - obs);
    if constexpr (std::is_same_v<std::decay_t<decltype(predictive_dist)>, GaussianPredictive>) {
      day.logs += log_score_gaussian(predictive_dist, obs);
    }
    const auto& th = thresholds[l][rec.station];
    if (!th.empty()) {
      day.n_bs += 1;
      for (std::size_t j = 0; j < n_bs; ++j) {
        day.bs[j] += brier_score(predictive_dist, obs, th[j]);
      }
    }
    for (std::size_t j = 0; j < n_qs; ++j) {
      day.qs[j] += quantile_score(predictive_dist, obs, cfg.scores.qs_levels[j]);
    }
    if (crps_out != nullptr) *crps_out = crps;
    (void)m;
  };

  std::vector<std::function<void()>> grid_tasks;
  for (std::size_t m = 0; m < n_mix; ++m) {
    for (std::size_t l = 0; l < n_leads; ++l) {
      // post-processed: fit chains per scope, then score the held-out day
      grid_tasks.push_back([&, m, l] {
        const int lead = cfg.lead_times[l];
        const auto& table = tables[m * n_leads + l];
        auto& accum = accums[combo(m, 1, l)];
        auto& fits = fit_slots[m * n_leads + l];
        const std::string mix_label = cfg.mixtures[m].label();

        std::vector<TrainingScope> scopes;
        switch (cfg.mode) {
          case TrainingMode::Local:
            for (const auto& st : ds.stations) {
              scopes.push_back({TrainingMode::Local, st.station_id});
            }
            break;
          case TrainingMode::Regional:
            scopes.push_back({TrainingMode::Regional, "global"});
            break;
          case TrainingMode::SemiLocal:
            for (int c = 0; c < cfg.k_clusters; ++c) {
              scopes.push_back({TrainingMode::SemiLocal, std::to_string(c)});
            }
            break;
        }

        FitOptions fit_options;
        fit_options.nonnegative_b = cfg.nonnegative_b;
        std::vector<const SummarizedCase*> window;
        std::vector<char> mask(n_stations, 0);
        for (const auto& scope : scopes) {
          std::optional<EmosParameters> warm;
          bool mask_ready = false;
          for (int di = 0; di < n_days_verify; ++di) {
            const Date target = verify_days[di];
            if (!mask_ready || cfg.recluster_each_window) {
              const ClusterAssignment* assignment = assignment_for(m, target);
              const int scope_cluster =
                  cfg.mode == TrainingMode::SemiLocal ? std::stoi(scope.scope_id) : -1;
              for (std::size_t s = 0; s < n_stations; ++s) {
                switch (cfg.mode) {
                  case TrainingMode::Local:
                    mask[s] = ds.stations[s].station_id == scope.scope_id;
                    break;
                  case TrainingMode::Regional:
                    mask[s] = 1;
                    break;
                  case TrainingMode::SemiLocal:
                    mask[s] = assignment->cluster_of(ds.stations[s].station_id) == scope_cluster;
                    break;
                }
              }
              mask_ready = true;
            }
            const auto in_scope = [&](int station) { return mask[station] != 0; };

            window.clear();
            for (int back = cfg.n_days; back >= 1; --back) {
              for (const auto& rec : table.on_day(target - back)) {
                if (rec.has_obs && in_scope(rec.station)) window.push_back(&rec.summarized);
              }
            }
            if (window.empty()) {
              throw std::runtime_error("empty training window: configuration " + mix_label +
                                       ", scope " + scope.scope_id + ", lead " +
                                       std::to_string(lead) + ", target " + format_date(target));
            }

            EmosParameters params;
            if (preloaded_fits != nullptr) {
              const auto it = preload_index.find(
                  {mix_label,
                   scope.scope_id + "|" + std::to_string(lead) + "|" + format_date(target)});
              if (it == preload_index.end()) {
                throw std::runtime_error("missing preloaded parameters: configuration " +
                                         mix_label + ", scope " + scope.scope_id + ", lead " +
                                         std::to_string(lead) + ", target " + format_date(target));
              }
              params = *it->second;
            } else {
              params = fit(std::span<const SummarizedCase* const>(window), cfg.variant,
                           cfg.recluster_each_window ? std::nullopt : warm, fit_options);
              params.trained_on = "scope=" + scope.scope_id + " target=" + format_date(target) +
                                  " lead=" + std::to_string(lead) +
                                  " cases=" + std::to_string(window.size());
              warm = params;
            }
            FitRecord record;
            record.configuration = mix_label;
            record.scope_id = scope.scope_id;
            record.lead_days = lead;
            record.target_date = target;
            record.params = params;
            fits.push_back(std::move(record));

            if (stage == RunStage::Calibrate) continue;
            for (const auto& rec : table.on_day(target)) {
              if (!rec.has_obs || !in_scope(rec.station)) continue;
              const GaussianPredictive pred = predictive(params, rec.summarized.summary);
              double crps = 0.0;
              score_case(rec, m, l, pred, accum.days[di], &crps);
              accum.station_crps[rec.station][di] = crps;
            }
          }
        }
      });

      // raw ensemble of the same mixture
      if (stage == RunStage::Full) {
        grid_tasks.push_back([&, m, l] {
          const auto& table = tables[m * n_leads + l];
          auto& accum = accums[combo(m, 0, l)];
          for (int di = 0; di < n_days_verify; ++di) {
            for (const auto& rec : table.on_day(verify_days[di])) {
              if (!rec.has_obs) continue;
              const auto sub = detail::subsample_forecast(
                  *rec.forecast, cfg.low_group, cfg.mixtures[m].m_low, cfg.high_group,
                  cfg.mixtures[m].m_high, detail::forecast_subset_seed(cfg, *rec.forecast));
              std::vector<double> pooled;
              pooled.reserve(sub.total_members());
              for (const auto& g : sub.groups) {
                pooled.insert(pooled.end(), g.members.begin(), g.members.end());
              }
              const EmpiricalPredictive pred{pooled};
              score_case(rec, m, l, pred, accum.days[di], nullptr);
            }
          }
        });
      }
    }
  }
  detail::run_parallel(grid_tasks, jobs);

  for (auto& slot : fit_slots) {
    result.fits.insert(result.fits.end(), slot.begin(), slot.end());
  }
  if (stage == RunStage::Calibrate) return result;

  // ---- aggregation, intervals, tests --------------------------------------
  struct MetricSeries {
    std::string name;
    double level = std::numeric_limits<double>::quiet_NaN();
    bool rmse_like = false;  // statistic is sqrt(weighted mean)
    detail::DailySeries series;
  };
  const auto metric_list = [&](std::size_t m, int model, std::size_t l) {
    const auto& acc = accums[combo(m, model, l)];
    std::vector<MetricSeries> list;
    const auto push = [&](const std::string& name, double level, bool rmse_like, auto take) {
      MetricSeries ms;
      ms.name = name;
      ms.level = level;
      ms.rmse_like = rmse_like;
      ms.series.sum.resize(acc.days.size());
      ms.series.weight.resize(acc.days.size());
      for (std::size_t i = 0; i < acc.days.size(); ++i) {
        ms.series.sum[i] = take(acc.days[i]);
        ms.series.weight[i] =
            name == "bs" ? static_cast<double>(acc.days[i].n_bs) : static_cast<double>(acc.days[i].n);
      }
      list.push_back(std::move(ms));
    };
    const double nan = std::numeric_limits<double>::quiet_NaN();
    push("crps", nan, false, [](const detail::DayAccum& d) { return d.crps; });
    push("rmse", nan, true, [](const detail::DayAccum& d) { return d.se; });
    push("mae", nan, false, [](const detail::DayAccum& d) { return d.ae; });
    if (model == 1) push("logscore", nan, false, [](const detail::DayAccum& d) { return d.logs; });
    for (std::size_t j = 0; j < n_bs; ++j) {
      push("bs", cfg.scores.bs_threshold_levels[j], false,
           [j](const detail::DayAccum& d) { return d.bs[j]; });
    }
    for (std::size_t j = 0; j < n_qs; ++j) {
      push("qs", cfg.scores.qs_levels[j], false,
           [j](const detail::DayAccum& d) { return d.qs[j]; });
    }
    return list;
  };

  const double block_len = cfg.mean_block_length > 0.0
                               ? cfg.mean_block_length
                               : default_mean_block_length(verify_days.size());
  const bool eq = cfg.station_equal_weight;
  const auto stat_of = [&](const MetricSeries& ms) {
    return [&ms, eq](std::span<const std::uint32_t> idx) {
      const double v = detail::series_mean_resampled(ms.series, idx, eq);
      return ms.rmse_like ? std::sqrt(v) : v;
    };
  };
  const auto point_of = [&](const MetricSeries& ms) {
    const double v = detail::series_mean(ms.series, eq);
    return ms.rmse_like ? std::sqrt(v) : v;
  };

  std::vector<std::vector<ScoreTableRow>> row_slots(n_mix * 2 * n_leads);
  std::vector<std::function<void()>> stat_tasks;
  for (std::size_t m = 0; m < n_mix; ++m) {
    for (int model = 0; model < 2; ++model) {
      for (std::size_t l = 0; l < n_leads; ++l) {
        stat_tasks.push_back([&, m, model, l] {
        auto& slot = row_slots[combo(m, model, l)];
        const auto metrics = metric_list(m, model, l);
        const auto ref_metrics = metric_list(ref_idx, model, l);
        const int lead = cfg.lead_times[l];
        const int max_lag = cfg.dm_max_lag >= 0 ? cfg.dm_max_lag : default_dm_max_lag(lead);
        if (metrics.size() != ref_metrics.size()) throw std::logic_error("metric tables misaligned");
        for (std::size_t mi = 0; mi < metrics.size(); ++mi) {
          const auto& ms = metrics[mi];
          const auto& ref_ms = ref_metrics[mi];
          if (ms.name != ref_ms.name ||
              (!std::isnan(ms.level) && std::fabs(ms.level - ref_ms.level) > 1e-12)) {
            throw std::logic_error("metric tables misaligned");
          }
          ScoreTableRow row;
          row.configuration = cfg.mixtures[m].label();
          row.model = model == 0 ? "raw" : "emos";
          row.lead_days = lead;
          row.metric = ms.name;
          row.level = ms.level;
          row.mean = point_of(ms);

          const std::uint64_t row_seed = derive_seed(
              cfg.seed, hash_string(row.configuration + "|" + row.model + "|" + row.metric + "|" +
                                    format_double(std::isnan(ms.level) ? -1.0 : ms.level) + "|" +
                                    std::to_string(lead)));
          const auto own = stat_of(ms);
          const auto ref = stat_of(ref_ms);
          const auto ci =
              detail::bootstrap_day_ci(verify_days.size(), cfg.bootstrap_replicates, block_len,
                                       cfg.bootstrap_level, row_seed, own);
          row.ci_lower = ci.lower;
          row.ci_upper = ci.upper;

          const double ref_mean = point_of(ref_ms);
          row.diff_vs_ref = row.mean - ref_mean;
          row.skill_vs_ref = skill_score(row.mean, ref_mean);
          const auto diff_ci = detail::bootstrap_day_ci(
              verify_days.size(), cfg.bootstrap_replicates, block_len, cfg.bootstrap_level,
              derive_seed(row_seed, 2),
              [&](std::span<const std::uint32_t> idx) { return own(idx) - ref(idx); });
          row.diff_ci_lower = diff_ci.lower;
          row.diff_ci_upper = diff_ci.upper;
          const auto skill_ci = detail::bootstrap_day_ci(
              verify_days.size(), cfg.bootstrap_replicates, block_len, cfg.bootstrap_level,
              derive_seed(row_seed, 3), [&](std::span<const std::uint32_t> idx) {
                const double r = ref(idx);
                return r == 0.0 ? std::numeric_limits<double>::quiet_NaN() : 1.0 - own(idx) / r;
              });
          row.skill_ci_lower = skill_ci.lower;
          row.skill_ci_upper = skill_ci.upper;

          // DM test on the daily mean loss series against the reference
          ScoreSeries a, b;
          for (std::size_t i = 0; i < verify_days.size(); ++i) {
            if (ms.series.weight[i] > 0.0 && ref_ms.series.weight[i] > 0.0) {
              a.dates.push_back(verify_days[i]);
              a.values.push_back(ms.series.sum[i] / ms.series.weight[i]);
              b.dates.push_back(verify_days[i]);
              b.values.push_back(ref_ms.series.sum[i] / ref_ms.series.weight[i]);
            }
          }
          if (a.values.size() >= 10) {
            row.dm_p_value = dm_test(a, b, max_lag).p_value;
          }
          slot.push_back(std::move(row));
        }
        });
      }
    }
  }
  detail::run_parallel(stat_tasks, jobs);
  for (std::size_t m = 0; m < n_mix; ++m) {
    for (int model = 0; model < 2; ++model) {
      for (std::size_t l = 0; l < n_leads; ++l) {
        auto& slot = row_slots[combo(m, model, l)];
        result.table.rows.insert(result.table.rows.end(), slot.begin(), slot.end());
      }
    }
  }

  // ---- stationwise significance matrices (post-processed CRPS) ------------
  if (cfg.emit_significance) {
    for (std::size_t l = 0; l < n_leads; ++l) {
      std::map<std::string, std::map<std::string, ScoreSeries>> by_config;
      for (std::size_t m = 0; m < n_mix; ++m) {
        auto& per_station = by_config[cfg.mixtures[m].label()];
        const auto& acc = accums[combo(m, 1, l)];
        for (std::size_t s = 0; s < n_stations; ++s) {
          ScoreSeries series;
          series.label = cfg.mixtures[m].label();
          for (int di = 0; di < n_days_verify; ++di) {
            const double v = acc.station_crps[s][di];
            if (!std::isnan(v)) {
              series.dates.push_back(verify_days[di]);
              series.values.push_back(v);
            }
          }
          per_station.emplace(ds.stations[s].station_id, std::move(series));
        }
      }
      SignificanceMatrix sm;
      sm.lead_days = cfg.lead_times[l];
      for (const auto& [label, _] : by_config) sm.labels.push_back(label);
      const int max_lag =
          cfg.dm_max_lag >= 0 ? cfg.dm_max_lag : default_dm_max_lag(cfg.lead_times[l]);
      sm.proportions = significance_matrix(by_config, cfg.significance_level, max_lag,
                                           cfg.min_pairs_per_station);
      result.significance.push_back(std::move(sm));
    }
  }

  return result;
}

// ---- report emission -------------------------------------------------------

/// Row of the headline `scores.csv` (one line per configuration, model, and
/// lead with the CRPS, RMSE, and the 2/50/98 percentile quantile scores).
struct ScoresCsvRow {
  std::string configuration;
  std::string model;
  int lead_days = 0;
  double crps = std::numeric_limits<double>::quiet_NaN();
  double rmse = std::numeric_limits<double>::quiet_NaN();
  double qs2 = std::numeric_limits<double>::quiet_NaN();
  double qs50 = std::numeric_limits<double>::quiet_NaN();
  double qs98 = std::numeric_limits<double>::quiet_NaN();
};

inline bool scores_rows_equal(const ScoresCsvRow& a, const ScoresCsvRow& b) {
  const auto feq = [](double x, double y) {
    return (std::isnan(x) && std::isnan(y)) || x == y;
  };
  return a.configuration == b.configuration && a.model == b.model && a.lead_days == b.lead_days &&
         feq(a.crps, b.crps) && feq(a.rmse, b.rmse) && feq(a.qs2, b.qs2) && feq(a.qs50, b.qs50) &&
         feq(a.qs98, b.qs98);
}

inline std::vector<ScoresCsvRow> scores_csv_rows(const ScoreTable& table) {
  std::vector<ScoresCsvRow> rows;
  std::map<std::pair<std::string, std::pair<std::string, int>>, std::size_t> index;
  for (const auto& r : table.rows) {
    const auto key = std::make_pair(r.configuration, std::make_pair(r.model, r.lead_days));
    if (!index.contains(key)) {
      index[key] = rows.size();
      ScoresCsvRow row;
      row.configuration = r.configuration;
      row.model = r.model;
      row.lead_days = r.lead_days;
      rows.push_back(std::move(row));
    }
    auto& row = rows[index[key]];
    if (r.metric == "crps") row.crps = r.mean;
    if (r.metric == "rmse") row.rmse = r.mean;
    if (r.metric == "qs" && std::fabs(r.level - 0.02) < 1e-12) row.qs2 = r.mean;
    if (r.metric == "qs" && std::fabs(r.level - 0.50) < 1e-12) row.qs50 = r.mean;
    if (r.metric == "qs" && std::fabs(r.level - 0.98) < 1e-12) row.qs98 = r.mean;
  }
  return rows;
}

inline void write_scores_csv(const ScoreTable& table, const std::string& path) {
  CsvWriter w(path);
  w.raw_line("configuration,model,lead_days,crps,rmse,qs2,qs50,qs98");
  for (const auto& r : scores_csv_rows(table)) {
    w.row({r.configuration, r.model, std::to_string(r.lead_days), format_double(r.crps),
           format_double(r.rmse), format_double(r.qs2), format_double(r.qs50),
           format_double(r.qs98)});
  }
  w.close();
}

inline std::vector<ScoresCsvRow> parse_scores_csv(const std::string& path) {
  CsvReader r(path);
  r.expect_header({"configuration", "model", "lead_days", "crps", "rmse", "qs2", "qs50", "qs98"});
  std::vector<ScoresCsvRow> rows;
  std::vector<std::string_view> f;
  while (r.next(f)) {
    r.require_fields(f, 8);
    ScoresCsvRow row;
    row.configuration = std::string(f[0]);
    row.model = std::string(f[1]);
    row.lead_days = static_cast<int>(r.to_long(f[2], "lead_days"));
    row.crps = r.to_double(f[3], "crps");
    row.rmse = r.to_double(f[4], "rmse");
    row.qs2 = r.to_double(f[5], "qs2");
    row.qs50 = r.to_double(f[6], "qs50");
    row.qs98 = r.to_double(f[7], "qs98");
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Writes the plot-ready report files into `outdir`.
inline void emit_reports(const ExperimentResult& result, const std::string& outdir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(outdir, ec);
  if (ec) throw std::runtime_error("cannot create output directory: " + outdir);
  const auto path = [&](const std::string& name) { return (fs::path(outdir) / name).string(); };

  write_scores_csv(result.table, path("scores.csv"));

  {
    CsvWriter w(path("crps_vs_lead.csv"));
    w.raw_line("configuration,model,lead_days,mean_crps,ci_lower,ci_upper");
    for (const auto& r : result.table.rows) {
      if (r.metric != "crps") continue;
      w.row({r.configuration, r.model, std::to_string(r.lead_days), format_double(r.mean),
             format_double(r.ci_lower), format_double(r.ci_upper)});
    }
    w.close();
  }
  {
    CsvWriter w(path("crps_diff_vs_lead.csv"));
    w.raw_line("configuration,model,lead_days,crps_diff,ci_lower,ci_upper,dm_p_value");
    for (const auto& r : result.table.rows) {
      if (r.metric != "crps") continue;
      w.row({r.configuration, r.model, std::to_string(r.lead_days), format_double(r.diff_vs_ref),
             format_double(r.diff_ci_lower), format_double(r.diff_ci_upper),
             format_double(r.dm_p_value)});
    }
    w.close();
  }
  {
    CsvWriter w(path("bss.csv"));
    w.raw_line("configuration,model,lead_days,threshold_level,bss,ci_lower,ci_upper");
    for (const auto& r : result.table.rows) {
      if (r.metric != "bs") continue;
      w.row({r.configuration, r.model, std::to_string(r.lead_days), format_double(r.level),
             format_double(r.skill_vs_ref), format_double(r.skill_ci_lower),
             format_double(r.skill_ci_upper)});
    }
    w.close();
  }
  {
    CsvWriter w(path("qss.csv"));
    w.raw_line("configuration,model,lead_days,tau,qss,ci_lower,ci_upper");
    for (const auto& r : result.table.rows) {
      if (r.metric != "qs") continue;
      w.row({r.configuration, r.model, std::to_string(r.lead_days), format_double(r.level),
             format_double(r.skill_vs_ref), format_double(r.skill_ci_lower),
             format_double(r.skill_ci_upper)});
    }
    w.close();
  }
  {
    CsvWriter w(path("rmse_diff.csv"));
    w.raw_line("configuration,model,lead_days,rmse_diff,ci_lower,ci_upper");
    for (const auto& r : result.table.rows) {
      if (r.metric != "rmse") continue;
      w.row({r.configuration, r.model, std::to_string(r.lead_days), format_double(r.diff_vs_ref),
             format_double(r.diff_ci_lower), format_double(r.diff_ci_upper)});
    }
    w.close();
  }
  for (const auto& sm : result.significance) {
    CsvWriter w(path("significance_matrix_lead" + std::to_string(sm.lead_days) + ".csv"));
    std::string header = "configuration";
    for (const auto& l : sm.labels) header += "," + l;
    w.raw_line(header);
    for (std::size_t i = 0; i < sm.labels.size(); ++i) {
      std::string line = sm.labels[i];
      for (std::size_t j = 0; j < sm.labels.size(); ++j) {
        line += "," + format_double(sm.proportions[i][j]);
      }
      w.raw_line(line);
    }
    w.close();
  }
}

inline void write_diagnostics_csv(const std::vector<StationDiagnosticsRow>& rows,
                                  const std::string& path) {
  CsvWriter w(path);
  w.raw_line("station_id,mean_diff_k,variance_diff_k2,rmse_diff_k,n_cases");
  for (const auto& r : rows) {
    w.row({r.station_id, format_double(r.mean_diff), format_double(r.variance_diff),
           format_double(r.rmse_diff), std::to_string(r.n_cases)});
  }
  w.close();
}

}  // namespace enscal
