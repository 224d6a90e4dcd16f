#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "enscal/csv.hpp"
#include "enscal/time.hpp"

namespace enscal {

inline constexpr int kMinLeadDays = 1;
inline constexpr int kMaxLeadDays = 15;

/// Lapse-rate adjustment for the elevation mismatch between a station and the
/// model surface: dT = -0.0065 K/m * dz with dz = station - model elevation,
/// so stations below the model surface are warmed.
inline constexpr double kLapseRateKPerM = 0.0065;

inline double orographic_correction(double raw_member_k, double station_elevation_m,
                                    double model_elevation_m) {
  return raw_member_k - kLapseRateKPerM * (station_elevation_m - model_elevation_m);
}

struct StationMeta {
  std::string station_id;
  double latitude = 0.0;
  double longitude = 0.0;
  double station_elevation_m = 0.0;
  double model_elevation_m = 0.0;

  friend bool operator==(const StationMeta&, const StationMeta&) = default;
};

struct Observation {
  std::string station_id;
  DateTime valid_time;
  double value_k = 0.0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// One exchangeable group of ensemble members, ordered by member index.
struct MemberGroup {
  std::string label;
  std::vector<int> member_idx;
  std::vector<double> members;

  friend bool operator==(const MemberGroup&, const MemberGroup&) = default;
};

struct GroupedEnsembleForecast {
  std::string station_id;
  DateTime init_time;
  int lead_days = 0;
  std::vector<MemberGroup> groups;  // sorted by label

  int total_members() const {
    int n = 0;
    for (const auto& g : groups) n += static_cast<int>(g.members.size());
    return n;
  }
  const MemberGroup* find_group(std::string_view label) const {
    for (const auto& g : groups) {
      if (g.label == label) return &g;
    }
    return nullptr;
  }

  friend bool operator==(const GroupedEnsembleForecast&, const GroupedEnsembleForecast&) = default;
};

struct TrainingCase {
  const GroupedEnsembleForecast* forecast = nullptr;
  double observation = 0.0;
};

/// Forecast/observation pairs from the n calendar days strictly preceding the
/// target initialization date, at one lead time.
struct TrainingWindow {
  Date target_init_date;
  int lead_days = 0;
  int length_days = 0;
  std::vector<TrainingCase> cases;
  int dropped_missing_obs = 0;
};

/// Station-matched forecasts and observations. Immutable after ingest (apart
/// from the one-shot orographic correction); concurrent reads are safe.
class Dataset {
 public:
  std::vector<StationMeta> stations;
  std::vector<Observation> observations;
  std::vector<GroupedEnsembleForecast> forecasts;

  void build_index() {
    station_index_.clear();
    for (std::size_t i = 0; i < stations.size(); ++i) {
      station_index_.emplace(stations[i].station_id, i);
    }
    obs_index_.clear();
    for (std::size_t i = 0; i < observations.size(); ++i) {
      const auto& o = observations[i];
      obs_index_.emplace(obs_key(station_index_.at(o.station_id), o.valid_time.date), i);
    }
    day_lead_index_.clear();
    for (std::size_t i = 0; i < forecasts.size(); ++i) {
      const auto& f = forecasts[i];
      day_lead_index_[fc_key(f.init_time.date, f.lead_days)].push_back(i);
    }
    // forecasts are stored sorted by (station, init, lead), so each per-day
    // bucket is already station-ordered; keep that canonical order.
  }

  const StationMeta* find_station(const std::string& id) const {
    const auto it = station_index_.find(id);
    return it == station_index_.end() ? nullptr : &stations[it->second];
  }

  std::optional<std::size_t> station_index(const std::string& id) const {
    const auto it = station_index_.find(id);
    if (it == station_index_.end()) return std::nullopt;
    return it->second;
  }

  /// Observation value at (station, date), matching at daily granularity.
  std::optional<double> observation_at(std::size_t station_idx, Date valid_date) const {
    const auto it = obs_index_.find(obs_key(station_idx, valid_date));
    if (it == obs_index_.end()) return std::nullopt;
    return observations[it->second].value_k;
  }

  std::optional<double> observation_at(const std::string& station_id, Date valid_date) const {
    const auto idx = station_index(station_id);
    if (!idx) return std::nullopt;
    return observation_at(*idx, valid_date);
  }

  /// Indices of forecasts initialized on `init` at `lead_days`, ordered by
  /// station id.
  const std::vector<std::size_t>* forecasts_on(Date init, int lead_days) const {
    const auto it = day_lead_index_.find(fc_key(init, lead_days));
    return it == day_lead_index_.end() ? nullptr : &it->second;
  }

  Date first_init_date() const {
    if (forecasts.empty()) throw std::runtime_error("dataset has no forecasts");
    Date d = forecasts.front().init_time.date;
    for (const auto& f : forecasts) d = std::min(d, f.init_time.date);
    return d;
  }

  Date last_init_date() const {
    if (forecasts.empty()) throw std::runtime_error("dataset has no forecasts");
    Date d = forecasts.front().init_time.date;
    for (const auto& f : forecasts) d = std::max(d, f.init_time.date);
    return d;
  }

 private:
  static std::uint64_t obs_key(std::size_t station_idx, Date d) {
    return (static_cast<std::uint64_t>(station_idx) << 32) ^
           static_cast<std::uint32_t>(d.serial);
  }
  static std::uint64_t fc_key(Date d, int lead) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(d.serial)) << 8) ^
           static_cast<std::uint32_t>(lead);
  }

  std::unordered_map<std::string, std::size_t> station_index_;
  std::unordered_map<std::uint64_t, std::size_t> obs_index_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> day_lead_index_;
};

namespace detail {

struct ForecastRow {
  std::uint32_t station;
  std::int32_t init_serial;
  std::int32_t lead;
  std::uint32_t group;
  int member_idx;
  double value;
  long line;
  std::string init_clock;
};

}  // namespace detail

/// Loads the three CSV files, cross-references them, and rejects malformed
/// rows, duplicates, and references to unknown stations. Error messages carry
/// file and line number.
inline Dataset load_dataset(const std::string& observations_path,
                            const std::string& forecasts_path,
                            const std::string& stations_path) {
  Dataset ds;

  std::unordered_map<std::string, std::size_t> station_ids;
  {
    CsvReader r(stations_path);
    r.expect_header({"station_id", "lat", "lon", "station_elev_m", "model_elev_m"});
    std::vector<std::string_view> f;
    while (r.next(f)) {
      r.require_fields(f, 5);
      StationMeta s;
      s.station_id = std::string(f[0]);
      if (s.station_id.empty()) r.fail("empty station_id");
      s.latitude = r.to_finite(f[1], "lat");
      s.longitude = r.to_finite(f[2], "lon");
      s.station_elevation_m = r.to_finite(f[3], "station_elev_m");
      s.model_elevation_m = r.to_finite(f[4], "model_elev_m");
      if (s.latitude < -90.0 || s.latitude > 90.0) r.fail("latitude out of [-90,90]");
      if (s.longitude < -180.0 || s.longitude >= 180.0) r.fail("longitude out of [-180,180)");
      if (!station_ids.emplace(s.station_id, ds.stations.size()).second) {
        r.fail("duplicate station_id '" + s.station_id + "'");
      }
      ds.stations.push_back(std::move(s));
    }
  }
  std::sort(ds.stations.begin(), ds.stations.end(),
            [](const StationMeta& a, const StationMeta& b) { return a.station_id < b.station_id; });
  station_ids.clear();
  for (std::size_t i = 0; i < ds.stations.size(); ++i) {
    station_ids.emplace(ds.stations[i].station_id, i);
  }

  {
    CsvReader r(observations_path);
    r.expect_header({"station_id", "valid_time", "value_k"});
    std::vector<std::string_view> f;
    struct ObsRow {
      std::uint32_t station;
      std::int32_t serial;
      long line;
      Observation obs;
    };
    std::vector<ObsRow> rows;
    while (r.next(f)) {
      r.require_fields(f, 3);
      const auto sid = std::string(f[0]);
      const auto it = station_ids.find(sid);
      if (it == station_ids.end()) r.fail("unknown station_id '" + sid + "'");
      ObsRow row;
      row.station = static_cast<std::uint32_t>(it->second);
      try {
        row.obs.valid_time = parse_datetime(f[1]);
      } catch (const std::exception& e) {
        r.fail(e.what());
      }
      row.serial = row.obs.valid_time.date.serial;
      row.obs.station_id = sid;
      row.obs.value_k = r.to_finite(f[2], "value_k");
      row.line = r.line();
      rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const ObsRow& a, const ObsRow& b) {
      if (a.station != b.station) return a.station < b.station;
      if (a.serial != b.serial) return a.serial < b.serial;
      return a.line < b.line;
    });
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].station == rows[i - 1].station && rows[i].serial == rows[i - 1].serial) {
        throw CsvError(observations_path, rows[i].line,
                       "duplicate observation for station '" + rows[i].obs.station_id +
                           "' on " + format_date(rows[i].obs.valid_time.date) +
                           " (observations are matched at daily granularity)");
      }
    }
    ds.observations.reserve(rows.size());
    for (auto& row : rows) ds.observations.push_back(std::move(row.obs));
  }

  {
    CsvReader r(forecasts_path);
    r.expect_header({"station_id", "init_time", "lead_days", "group", "member_idx", "value_k"});
    std::vector<std::string_view> f;
    std::vector<detail::ForecastRow> rows;
    std::vector<std::string> group_labels;
    std::unordered_map<std::string, std::uint32_t> group_ids;
    std::vector<std::string> init_clocks;  // interned by (station,init) later
    while (r.next(f)) {
      r.require_fields(f, 6);
      detail::ForecastRow row;
      const auto sid = std::string(f[0]);
      const auto it = station_ids.find(sid);
      if (it == station_ids.end()) r.fail("unknown station_id '" + sid + "'");
      row.station = static_cast<std::uint32_t>(it->second);
      DateTime init;
      try {
        init = parse_datetime(f[1]);
      } catch (const std::exception& e) {
        r.fail(e.what());
      }
      row.init_serial = init.date.serial;
      row.init_clock = std::move(init.clock);
      const long lead = r.to_long(f[2], "lead_days");
      if (lead < kMinLeadDays || lead > kMaxLeadDays) {
        r.fail("lead_days out of [" + std::to_string(kMinLeadDays) + "," +
               std::to_string(kMaxLeadDays) + "]: " + std::to_string(lead));
      }
      row.lead = static_cast<std::int32_t>(lead);
      const auto glabel = std::string(f[3]);
      if (glabel.empty()) r.fail("empty group label");
      auto [git, inserted] = group_ids.emplace(glabel, static_cast<std::uint32_t>(group_labels.size()));
      if (inserted) group_labels.push_back(glabel);
      row.group = git->second;
      row.member_idx = static_cast<int>(r.to_long(f[4], "member_idx"));
      row.value = r.to_finite(f[5], "value_k");
      row.line = r.line();
      rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [&](const detail::ForecastRow& a, const detail::ForecastRow& b) {
      if (a.station != b.station) return a.station < b.station;
      if (a.init_serial != b.init_serial) return a.init_serial < b.init_serial;
      if (a.lead != b.lead) return a.lead < b.lead;
      if (group_labels[a.group] != group_labels[b.group]) return group_labels[a.group] < group_labels[b.group];
      if (a.member_idx != b.member_idx) return a.member_idx < b.member_idx;
      return a.line < b.line;
    });
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
      const auto& a = rows[i];
      const auto& b = rows[i + 1];
      if (a.station == b.station && a.init_serial == b.init_serial && a.lead == b.lead &&
          a.group == b.group && a.member_idx == b.member_idx) {
        throw CsvError(forecasts_path, b.line,
                       "duplicate forecast member (station '" + ds.stations[a.station].station_id +
                           "', init " + format_date(Date{a.init_serial}) + ", lead " +
                           std::to_string(a.lead) + ", group '" + group_labels[a.group] +
                           "', member " + std::to_string(a.member_idx) + ")");
      }
      if (a.station == b.station && a.init_serial == b.init_serial && a.init_clock != b.init_clock) {
        throw CsvError(forecasts_path, b.line, "inconsistent init_time clock for one init date");
      }
    }
    for (std::size_t i = 0; i < rows.size();) {
      auto& row = rows[i];
      GroupedEnsembleForecast fc;
      fc.station_id = ds.stations[row.station].station_id;
      fc.init_time = DateTime{Date{row.init_serial}, row.init_clock};
      fc.lead_days = row.lead;
      std::size_t j = i;
      while (j < rows.size() && rows[j].station == row.station &&
             rows[j].init_serial == row.init_serial && rows[j].lead == row.lead) {
        MemberGroup g;
        g.label = group_labels[rows[j].group];
        while (j < rows.size() && rows[j].station == row.station &&
               rows[j].init_serial == row.init_serial && rows[j].lead == row.lead &&
               group_labels[rows[j].group] == g.label) {
          g.member_idx.push_back(rows[j].member_idx);
          g.members.push_back(rows[j].value);
          ++j;
        }
        fc.groups.push_back(std::move(g));
      }
      ds.forecasts.push_back(std::move(fc));
      i = j;
    }
  }

  ds.build_index();
  return ds;
}

inline void write_stations_csv(const Dataset& ds, const std::string& path) {
  CsvWriter w(path);
  w.raw_line("station_id,lat,lon,station_elev_m,model_elev_m");
  for (const auto& s : ds.stations) {
    w.row({s.station_id, format_double(s.latitude), format_double(s.longitude),
           format_double(s.station_elevation_m), format_double(s.model_elevation_m)});
  }
  w.close();
}

inline void write_observations_csv(const Dataset& ds, const std::string& path) {
  CsvWriter w(path);
  w.raw_line("station_id,valid_time,value_k");
  for (const auto& o : ds.observations) {
    w.row({o.station_id, format_datetime(o.valid_time), format_double(o.value_k)});
  }
  w.close();
}

inline void write_forecasts_csv(const Dataset& ds, const std::string& path) {
  CsvWriter w(path);
  w.raw_line("station_id,init_time,lead_days,group,member_idx,value_k");
  for (const auto& f : ds.forecasts) {
    const std::string init = format_datetime(f.init_time);
    const std::string lead = std::to_string(f.lead_days);
    for (const auto& g : f.groups) {
      for (std::size_t i = 0; i < g.members.size(); ++i) {
        w.row({f.station_id, init, lead, g.label, std::to_string(g.member_idx[i]),
               format_double(g.members[i])});
      }
    }
  }
  w.close();
}

/// Applies the lapse-rate correction to every member of every group, in place.
/// A member-wise constant shift per station: ensemble variances are unchanged.
inline void apply_orographic_correction(Dataset& ds) {
  for (auto& f : ds.forecasts) {
    const StationMeta* s = ds.find_station(f.station_id);
    if (s == nullptr) throw std::runtime_error("forecast references unknown station " + f.station_id);
    const double shift = kLapseRateKPerM * (s->station_elevation_m - s->model_elevation_m);
    for (auto& g : f.groups) {
      for (auto& m : g.members) m -= shift;
    }
  }
}

/// Assembles the rolling training window: all cases with init date in
/// [target-n, target-1] at `lead_days` whose verifying observation exists.
/// `station_filter` (optional) restricts to a subset of stations. Cases are
/// ordered day-major, station-ordered within a day.
inline TrainingWindow build_training_window(
    const Dataset& ds, Date target_init_date, int lead_days, int n_days,
    const std::function<bool(const std::string&)>& station_filter = {}) {
  if (n_days < 1) throw std::invalid_argument("training window length must be >= 1");
  TrainingWindow w;
  w.target_init_date = target_init_date;
  w.lead_days = lead_days;
  w.length_days = n_days;
  for (int back = n_days; back >= 1; --back) {
    const Date day = target_init_date - back;
    const auto* idxs = ds.forecasts_on(day, lead_days);
    if (idxs == nullptr) continue;
    for (const std::size_t fi : *idxs) {
      const auto& fc = ds.forecasts[fi];
      if (station_filter && !station_filter(fc.station_id)) continue;
      const auto obs = ds.observation_at(fc.station_id, day + lead_days);
      if (!obs) {
        ++w.dropped_missing_obs;
        continue;
      }
      w.cases.push_back(TrainingCase{&fc, *obs});
    }
  }
  if (w.cases.empty()) {
    throw std::runtime_error("empty training window (target " + format_date(target_init_date) +
                             ", lead " + std::to_string(lead_days) + ", n " +
                             std::to_string(n_days) + ")");
  }
  return w;
}

}  // namespace enscal
