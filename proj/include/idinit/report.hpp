#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "idinit/matrix.hpp"

namespace idinit {

// Per-run record: config echo, named step traces, summary scalars. File
// contents depend only on the run itself (seeded), never on wall-clock, so
// re-running a seed reproduces the files bit for bit; wall-clock naming
// belongs to the output directory, not the payload.
class ExperimentReport {
 public:
  ExperimentReport() = default;
  ExperimentReport(std::string name, std::uint64_t seed) : name_(std::move(name)), seed_(seed) {
    config_["seed"] = seed;
  }

  const std::string& name() const { return name_; }
  std::uint64_t seed() const { return seed_; }

  nlohmann::json& config() { return config_; }
  const nlohmann::json& config() const { return config_; }

  void add_point(const std::string& trace, std::int64_t step, double value) {
    auto& t = traces_[trace];
    if (!t.empty() && step < t.back().first)
      throw ShapeError("trace '" + trace + "': step indices must be non-decreasing");
    t.emplace_back(step, value);
  }

  const std::vector<std::pair<std::int64_t, double>>& trace(const std::string& name) const {
    return traces_.at(name);
  }
  bool has_trace(const std::string& name) const { return traces_.count(name) > 0; }

  void set_summary(const std::string& key, double value) { summary_[key] = value; }
  double summary(const std::string& key) const { return summary_.at(key); }
  bool has_summary(const std::string& key) const { return summary_.count(key) > 0; }
  const std::map<std::string, double>& summaries() const { return summary_; }

  void set_diverged(bool d) { diverged_ = d; }
  bool diverged() const { return diverged_; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["experiment"] = name_;
    j["seed"] = seed_;
    j["config"] = config_;
    j["diverged"] = diverged_;
    j["summary"] = summary_;
    nlohmann::json traces = nlohmann::json::object();
    for (const auto& [tname, points] : traces_) {
      nlohmann::json steps = nlohmann::json::array();
      nlohmann::json values = nlohmann::json::array();
      for (const auto& [s, v] : points) {
        steps.push_back(s);
        values.push_back(v);
      }
      traces[tname] = {{"step", steps}, {"value", values}};
    }
    j["traces"] = traces;
    return j;
  }

  // Writes <name>.json and/or one CSV per trace into dir. Returns the list
  // of files written.
  std::vector<std::string> write_files(const std::string& dir, const std::string& format) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<std::string> written;
    const bool want_json = format == "json" || format == "both";
    const bool want_csv = format == "csv" || format == "both";
    if (want_json) {
      const std::string path = (fs::path(dir) / (name_ + ".json")).string();
      std::ofstream os(path);
      if (!os) throw FormatError("cannot open for write: " + path);
      os << to_json().dump(2) << '\n';
      written.push_back(path);
    }
    if (want_csv) {
      char buf[64];
      for (const auto& [tname, points] : traces_) {
        const std::string path = (fs::path(dir) / (name_ + "-" + tname + ".csv")).string();
        std::ofstream os(path);
        if (!os) throw FormatError("cannot open for write: " + path);
        os << "step," << tname << '\n';
        for (const auto& [s, v] : points) {
          std::snprintf(buf, sizeof buf, "%.17g", v);
          os << s << ',' << buf << '\n';
        }
        written.push_back(path);
      }
      if (!summary_.empty()) {
        const std::string path = (fs::path(dir) / (name_ + "-summary.csv")).string();
        std::ofstream os(path);
        if (!os) throw FormatError("cannot open for write: " + path);
        os << "key,value\n";
        for (const auto& [k, v] : summary_) {
          std::snprintf(buf, sizeof buf, "%.17g", v);
          os << k << ',' << buf << '\n';
        }
        written.push_back(path);
      }
    }
    return written;
  }

 private:
  std::string name_;
  std::uint64_t seed_ = 0;
  nlohmann::json config_ = nlohmann::json::object();
  std::map<std::string, std::vector<std::pair<std::int64_t, double>>> traces_;
  std::map<std::string, double> summary_;
  bool diverged_ = false;
};

}  // namespace idinit
