#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "enscal/emos.hpp"
#include "enscal/time.hpp"

namespace enscal {

/// One fitted parameter set, keyed by configuration, training scope, lead
/// time, and target day.
struct FitRecord {
  std::string configuration;
  std::string scope_id;
  int lead_days = 0;
  Date target_date;
  EmosParameters params;

  friend bool operator==(const FitRecord&, const FitRecord&) = default;
};

inline void write_parameters_jsonl(const std::vector<FitRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  for (const auto& r : records) {
    nlohmann::json j;
    j["configuration"] = r.configuration;
    j["scope_id"] = r.scope_id;
    j["lead_days"] = r.lead_days;
    j["target_date"] = format_date(r.target_date);
    j["variant"] = to_string(r.params.variant);
    j["a"] = r.params.a;
    j["b"] = r.params.b;
    j["c"] = r.params.c;
    j["d"] = r.params.d;
    j["converged"] = r.params.converged;
    j["trained_on"] = r.params.trained_on;
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::vector<FitRecord> read_parameters_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<FitRecord> records;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    FitRecord r;
    r.configuration = j.at("configuration").get<std::string>();
    r.scope_id = j.at("scope_id").get<std::string>();
    r.lead_days = j.at("lead_days").get<int>();
    r.target_date = parse_date(j.at("target_date").get<std::string>());
    r.params.variant = emos_variant_from_string(j.at("variant").get<std::string>());
    r.params.a = j.at("a").get<double>();
    r.params.b = j.at("b").get<std::vector<double>>();
    r.params.c = j.at("c").get<double>();
    r.params.d = j.at("d").get<std::vector<double>>();
    r.params.converged = j.at("converged").get<bool>();
    r.params.trained_on = j.at("trained_on").get<std::string>();
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace enscal
