#pragma once

// Report and path serialization. Files are written to a temporary sibling and
// renamed into place; numbers use %.17g so reruns compare byte for byte.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "levyq/config.hpp"
#include "levyq/density.hpp"
#include "levyq/harness.hpp"
#include "levyq/path.hpp"

namespace levyq {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Writes `content` to `path` via a temporary file and rename.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot move report into place at '" + path.string() + "': " + ec.message());
  }
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline nlohmann::json json_number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace detail

inline const char* kReportHeader = "check,checkpoint,estimate,std_error,target,z,ess,n,seed,passed,bound";

inline std::string report_csv(const std::vector<CheckResult>& results) {
  std::ostringstream out;
  out << kReportHeader << '\n';
  for (const auto& r : results) {
    for (const auto& row : r.rows) {
      out << detail::csv_field(row.check) << ',' << detail::csv_field(row.checkpoint) << ','
          << format_double(row.estimate) << ',' << format_double(row.std_error) << ',' << format_double(row.target)
          << ',' << format_double(row.z) << ',' << format_double(row.ess) << ',' << row.n << ',' << row.seed << ','
          << (row.passed ? "true" : "false") << ',' << format_double(row.bound) << '\n';
    }
  }
  return out.str();
}

inline nlohmann::json report_json(const std::vector<CheckResult>& results, const RunSettings& s) {
  nlohmann::json checks = nlohmann::json::array();
  bool all = true;
  for (const auto& r : results) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
      rows.push_back({{"checkpoint", row.checkpoint},
                      {"estimate", detail::json_number(row.estimate)},
                      {"std_error", detail::json_number(row.std_error)},
                      {"target", detail::json_number(row.target)},
                      {"z", detail::json_number(row.z)},
                      {"ess", detail::json_number(row.ess)},
                      {"n", row.n},
                      {"bound", detail::json_number(row.bound)},
                      {"passed", row.passed}});
    }
    checks.push_back({{"name", r.name}, {"type", r.type}, {"passed", r.passed()}, {"warnings", r.warnings}, {"rows", rows}});
    all = all && r.passed();
  }
  return {{"schema_version", kSchemaVersion},
          {"seed", s.seed},
          {"n", s.n},
          {"eps", s.eps},
          {"passed", all},
          {"checks", checks}};
}

/// Writes `<stem>.csv` and `<stem>.json`; a stem ending in .csv or .json is stripped first.
inline void write_report(const std::vector<CheckResult>& results, const std::filesystem::path& stem,
                         const RunSettings& s = {}) {
  std::filesystem::path base = stem;
  if (base.extension() == ".csv" || base.extension() == ".json") base.replace_extension();
  write_atomic(base.string() + ".csv", report_csv(results));
  write_atomic(base.string() + ".json", report_json(results, s).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Paths

/// First line "# {json header}", then "time,size" rows.
inline std::string path_csv(const JumpPath& p, const LevyDensity& levy) {
  nlohmann::json header{{"horizon", p.horizon()},
                        {"eps", p.truncation()},
                        {"seed", p.seed()},
                        {"levy", to_string(levy.family())},
                        {"g0", levy.g0()},
                        {"b", levy.rate()},
                        {"jumps", p.size()}};
  std::ostringstream out;
  out << "# " << header.dump() << '\n' << "time,size\n";
  for (const auto& j : p.jumps()) out << format_double(j.time) << ',' << format_double(j.size) << '\n';
  return out.str();
}

inline JumpPath read_path_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open path file '" + file.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
    throw std::runtime_error("'" + file.string() + "': missing '# {...}' header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line.substr(2));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("'" + file.string() + "': bad header: " + e.what());
  }
  if (!std::getline(in, line) || line != "time,size")
    throw std::runtime_error("'" + file.string() + "': expected 'time,size' column line");
  std::vector<Jump> jumps;
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("'" + file.string() + "' line " + std::to_string(lineno) + ": expected time,size");
    try {
      jumps.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    } catch (const std::exception&) {
      throw std::runtime_error("'" + file.string() + "' line " + std::to_string(lineno) + ": not a number");
    }
  }
  return JumpPath(header.at("horizon").get<double>(), header.at("eps").get<double>(),
                  header.at("seed").get<std::uint64_t>(), std::move(jumps));
}

inline nlohmann::json log_density_json(const LogDensity& d) {
  return {{"log_value", detail::json_number(d.log_value)},
          {"compensator", detail::json_number(d.compensator)},
          {"jump_sum", detail::json_number(d.jump_sum)},
          {"truncation_bound", detail::json_number(d.truncation_bound)}};
}

}  // namespace levyq
