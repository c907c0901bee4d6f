#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "label.hpp"
#include "particles.hpp"
#include "stats.hpp"

namespace wfdual {

inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Comma-separated table. The first line is a `# config_hash: <hex>` comment,
/// the second the header row.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& config_hash,
            std::initializer_list<std::string> header, const std::string& check = {})
      : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << "# config_hash: " << config_hash << "\n";
    if (!check.empty()) out_ << "# check: " << check << "\n";
    bool first = true;
    for (const auto& h : header) {
      out_ << (first ? "" : ",") << h;
      first = false;
    }
    out_ << "\n";
  }

  template <typename... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << "\n";
  }

 private:
  static std::string cell(double v) { return csv_number(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <typename Int>
    requires std::is_integral_v<Int>
  static std::string cell(Int v) {
    return std::to_string(v);
  }

  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path, nlohmann::json j, const std::string& config_hash) {
  j["config_hash"] = config_hash;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

inline nlohmann::json to_json(const MonteCarloEstimate& e) {
  return {{"mean", e.mean}, {"stderr", e.std_error}, {"reps", e.reps}, {"aborted", e.aborted}};
}

inline void write_trajectory_csv(CsvWriter& w, const std::vector<TrajectoryPoint>& traj) {
  for (const auto& p : traj) w.row(p.t, p.population, p.n_branch, p.n_branch_neg, p.K);
}

inline nlohmann::json terminal_json(const RunSummary& run) {
  nlohmann::json particles = nlohmann::json::array();
  for (const auto& [label, x] : run.terminal) particles.push_back({{"label", label.to_string()}, {"position", x}});
  return {{"particles", particles},   {"population", run.population}, {"n_branch", run.n_branch},
          {"n_branch_neg", run.n_branch_neg}, {"K", run.K},           {"occupation", run.occupation},
          {"t", run.end_time},        {"aborted", run.aborted}};
}

}  // namespace wfdual
