#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "enscal/csv.hpp"
#include "enscal/data.hpp"
#include "enscal/math.hpp"

namespace enscal {

inline constexpr int kFeatureDim = 24;
inline constexpr int kFeatureQuantiles = 12;

/// Station signature for semi-local training: 12 equidistant quantiles of the
/// station climatology followed by 12 equidistant quantiles of the empirical
/// distribution of ensemble-mean forecast errors (mean - observation), both
/// over the training period. Quantile levels are i/13, i = 1..12.
struct StationFeatures {
  std::string station_id;
  std::array<double, kFeatureDim> values{};
};

inline StationFeatures station_features(const std::string& station_id,
                                        std::span<const double> obs_history,
                                        std::span<const double> ensemble_mean_errors) {
  if (obs_history.empty() || ensemble_mean_errors.empty()) {
    throw std::invalid_argument("station_features: empty input series for station " + station_id);
  }
  StationFeatures f;
  f.station_id = station_id;
  std::vector<double> sorted(obs_history.begin(), obs_history.end());
  std::sort(sorted.begin(), sorted.end());
  for (int i = 1; i <= kFeatureQuantiles; ++i) {
    f.values[i - 1] = quantile_type1(sorted, i / 13.0);
  }
  sorted.assign(ensemble_mean_errors.begin(), ensemble_mean_errors.end());
  std::sort(sorted.begin(), sorted.end());
  for (int i = 1; i <= kFeatureQuantiles; ++i) {
    f.values[kFeatureQuantiles + i - 1] = quantile_type1(sorted, i / 13.0);
  }
  return f;
}

struct ClusterAssignment {
  int k = 0;
  std::vector<std::pair<std::string, int>> assignment;  // sorted by station_id
  std::vector<std::array<double, kFeatureDim>> centroids;  // feature units
  double objective = 0.0;  // within-cluster squared distance, standardized space

  int cluster_of(const std::string& station_id) const {
    const auto it = lookup_.find(station_id);
    if (it == lookup_.end()) {
      throw std::invalid_argument("station not in cluster assignment: " + station_id);
    }
    return it->second;
  }

  void rebuild_lookup() {
    lookup_.clear();
    for (const auto& [sid, c] : assignment) lookup_.emplace(sid, c);
  }

 private:
  std::unordered_map<std::string, int> lookup_;
};

namespace detail {

struct LloydResult {
  std::vector<int> assignment;
  std::vector<std::array<double, kFeatureDim>> centroids;
  double objective = 0.0;
  std::vector<double> objective_trace;  // after each assign+update iteration
};

inline double dist2(const std::array<double, kFeatureDim>& a,
                    const std::array<double, kFeatureDim>& b) {
  double s = 0.0;
  for (int j = 0; j < kFeatureDim; ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

/// Lloyd iterations on standardized points. Empty clusters are repaired by
/// moving the farthest point of the largest cluster; the objective trace is
/// nonincreasing whenever no repair fires.
inline LloydResult lloyd(const std::vector<std::array<double, kFeatureDim>>& pts,
                         std::vector<std::array<double, kFeatureDim>> centroids,
                         int max_iterations = 100) {
  const std::size_t n = pts.size();
  const auto k = static_cast<int>(centroids.size());
  LloydResult res;
  res.assignment.assign(n, -1);
  std::vector<int> counts(k, 0);

  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = dist2(pts[i], centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (res.assignment[i] != best) {
        res.assignment[i] = best;
        changed = true;
      }
      ++counts[best];
    }

    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      const int donor = static_cast<int>(std::max_element(counts.begin(), counts.end()) -
                                         counts.begin());
      std::size_t farthest = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (res.assignment[i] != donor) continue;
        const double d = dist2(pts[i], centroids[donor]);
        if (d > far_d) {
          far_d = d;
          farthest = i;
        }
      }
      res.assignment[farthest] = c;
      --counts[donor];
      ++counts[c];
      changed = true;
    }

    for (auto& c : centroids) c.fill(0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = centroids[res.assignment[i]];
      for (int j = 0; j < kFeatureDim; ++j) c[j] += pts[i][j];
    }
    for (int c = 0; c < k; ++c) {
      for (int j = 0; j < kFeatureDim; ++j) centroids[c][j] /= counts[c];
    }

    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) obj += dist2(pts[i], centroids[res.assignment[i]]);
    res.objective_trace.push_back(obj);
    if (!changed) break;
  }

  res.centroids = std::move(centroids);
  res.objective = res.objective_trace.empty() ? 0.0 : res.objective_trace.back();
  return res;
}

}  // namespace detail

/// k-means on standardized feature vectors: farthest-point seeding from a
/// seeded generator, 10 restarts, best objective kept. Deterministic given
/// the seed; ties break toward the lowest index.
inline ClusterAssignment kmeans_cluster(const std::vector<StationFeatures>& features, int k,
                                        std::uint64_t seed, int restarts = 10,
                                        int max_iterations = 100) {
  const std::size_t n = features.size();
  if (k < 1) throw std::invalid_argument("kmeans_cluster: k must be >= 1");
  if (n < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("kmeans_cluster: fewer stations (" + std::to_string(n) +
                                ") than clusters (" + std::to_string(k) + ")");
  }

  // standardize each dimension to zero mean, unit variance; constant
  // dimensions carry no information and are zeroed
  std::array<double, kFeatureDim> mu{};
  std::array<double, kFeatureDim> sd{};
  for (const auto& f : features) {
    for (int j = 0; j < kFeatureDim; ++j) mu[j] += f.values[j];
  }
  for (int j = 0; j < kFeatureDim; ++j) mu[j] /= static_cast<double>(n);
  for (const auto& f : features) {
    for (int j = 0; j < kFeatureDim; ++j) {
      const double d = f.values[j] - mu[j];
      sd[j] += d * d;
    }
  }
  for (int j = 0; j < kFeatureDim; ++j) {
    sd[j] = n > 1 ? std::sqrt(sd[j] / static_cast<double>(n - 1)) : 0.0;
  }
  std::vector<std::array<double, kFeatureDim>> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < kFeatureDim; ++j) {
      pts[i][j] = sd[j] > 0.0 ? (features[i].values[j] - mu[j]) / sd[j] : 0.0;
    }
  }

  detail::LloydResult best;
  bool have_best = false;
  for (int r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::array<double, kFeatureDim>> seeds;
    seeds.push_back(pts[pick(rng)]);
    std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
    while (static_cast<int>(seeds.size()) < k) {
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        min_d[i] = std::min(min_d[i], detail::dist2(pts[i], seeds.back()));
        if (min_d[i] > far_d) {
          far_d = min_d[i];
          far = i;
        }
      }
      seeds.push_back(pts[far]);
    }
    auto result = detail::lloyd(pts, std::move(seeds), max_iterations);
    if (!have_best || result.objective < best.objective) {
      best = std::move(result);
      have_best = true;
    }
  }

  ClusterAssignment out;
  out.k = k;
  out.objective = best.objective;
  out.assignment.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.assignment.emplace_back(features[i].station_id, best.assignment[i]);
  }
  std::sort(out.assignment.begin(), out.assignment.end());
  out.centroids.resize(k);
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < kFeatureDim; ++j) {
      out.centroids[c][j] = sd[j] > 0.0 ? best.centroids[c][j] * sd[j] + mu[j] : mu[j];
    }
  }
  out.rebuild_lookup();
  return out;
}

enum class TrainingMode { Local, Regional, SemiLocal };

inline std::string to_string(TrainingMode m) {
  switch (m) {
    case TrainingMode::Local: return "local";
    case TrainingMode::Regional: return "regional";
    case TrainingMode::SemiLocal: return "semi_local";
  }
  throw std::logic_error("unknown TrainingMode");
}

inline TrainingMode training_mode_from_string(std::string_view s) {
  if (s == "local") return TrainingMode::Local;
  if (s == "regional") return TrainingMode::Regional;
  if (s == "semi_local") return TrainingMode::SemiLocal;
  throw std::invalid_argument("unknown training mode: '" + std::string(s) + "'");
}

/// Identifies one parameter-estimation unit: a station (local), the whole
/// domain (regional), or one k-means cluster (semi-local).
struct TrainingScope {
  TrainingMode mode = TrainingMode::Regional;
  std::string scope_id = "global";  // station_id / "global" / cluster index
};

/// Rolling window restricted to the scope's stations. Cases keep the same
/// canonical (day, station) order as the unrestricted window, so a cluster
/// containing every station yields the regional window exactly.
inline TrainingWindow assemble_scope_window(const Dataset& ds, const TrainingScope& scope,
                                            const ClusterAssignment* assignment,
                                            Date target_init_date, int lead_days, int n_days) {
  switch (scope.mode) {
    case TrainingMode::Local:
      return build_training_window(ds, target_init_date, lead_days, n_days,
                                   [&](const std::string& sid) { return sid == scope.scope_id; });
    case TrainingMode::Regional:
      return build_training_window(ds, target_init_date, lead_days, n_days);
    case TrainingMode::SemiLocal: {
      if (assignment == nullptr) {
        throw std::invalid_argument("semi-local scope requires a cluster assignment");
      }
      const int cluster = std::stoi(scope.scope_id);
      return build_training_window(ds, target_init_date, lead_days, n_days,
                                   [&](const std::string& sid) {
                                     return assignment->cluster_of(sid) == cluster;
                                   });
    }
  }
  throw std::logic_error("unknown TrainingMode");
}

inline void write_assignment_csv(const ClusterAssignment& a, const std::string& path) {
  CsvWriter w(path);
  w.raw_line("station_id,cluster_idx");
  for (const auto& [sid, c] : a.assignment) w.row({sid, std::to_string(c)});
  w.close();
}

inline void write_centroids_csv(const ClusterAssignment& a, const std::string& path) {
  CsvWriter w(path);
  std::string header;
  for (int j = 1; j <= kFeatureDim; ++j) {
    if (j > 1) header += ',';
    header += "f" + std::to_string(j);
  }
  w.raw_line(header);
  for (const auto& c : a.centroids) {
    std::string line;
    for (int j = 0; j < kFeatureDim; ++j) {
      if (j > 0) line += ',';
      line += format_double(c[j]);
    }
    w.raw_line(line);
  }
  w.close();
}

inline ClusterAssignment read_assignment_csv(const std::string& path) {
  CsvReader r(path);
  r.expect_header({"station_id", "cluster_idx"});
  ClusterAssignment a;
  std::vector<std::string_view> f;
  int max_cluster = -1;
  while (r.next(f)) {
    r.require_fields(f, 2);
    const int c = static_cast<int>(r.to_long(f[1], "cluster_idx"));
    if (c < 0) r.fail("negative cluster index");
    a.assignment.emplace_back(std::string(f[0]), c);
    max_cluster = std::max(max_cluster, c);
  }
  std::sort(a.assignment.begin(), a.assignment.end());
  a.k = max_cluster + 1;
  a.rebuild_lookup();
  return a;
}

}  // namespace enscal
