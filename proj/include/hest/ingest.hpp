#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hest/errors.hpp"
#include "hest/gnss.hpp"

namespace hest {

/// Ground-truth position fix (WGS-84 geodetic).
struct TruthFix {
  std::int64_t t_ms = 0;
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  double alt_m = 0.0;  ///< ellipsoidal height
};

struct LoadStats {
  std::size_t rows_total = 0;
  std::size_t rows_dropped = 0;  ///< rows with non-finite or unparseable fields
};

namespace csv {

inline constexpr const char* kEpochHeader =
    "utc_ms,sat_id,pr_m,prr_mps,sat_x_m,sat_y_m,sat_z_m,"
    "sat_vx_mps,sat_vy_mps,sat_vz_mps,sigma_pr_m,sigma_prr_mps";
inline constexpr const char* kTruthHeader = "utc_ms,lat_deg,lon_deg,alt_m";

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t begin = 0;
  while (true) {
    const std::size_t comma = line.find(',', begin);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(begin));
      break;
    }
    out.push_back(line.substr(begin, comma - begin));
    begin = comma + 1;
  }
  return out;
}

inline bool parse_double(std::string_view field, double& out) {
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc{} && res.ptr == last && std::isfinite(out);
}

inline bool parse_int64(std::string_view field, std::int64_t& out) {
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc{} && res.ptr == last;
}

/// 17 significant digits: lossless double round trip.
inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline void check_header(std::string_view got, std::string_view expected, const std::string& path) {
  if (got == expected) return;
  const auto want = split_fields(expected);
  const auto have = split_fields(got);
  std::set<std::string_view> have_set(have.begin(), have.end());
  std::string missing;
  for (const auto& col : want)
    if (!have_set.count(col)) missing += std::string(col) + " ";
  throw IngestError("schema mismatch in " + path +
                    (missing.empty() ? ": column order differs from the documented schema"
                                     : ": missing columns: " + missing));
}

}  // namespace csv

namespace detail {

/// Write-then-rename so concurrent readers and parallel writers never see a
/// partial file.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IngestError("cannot open file for writing: " + tmp);
    out << content;
    if (!out) throw IngestError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

/// Loads epoch measurements, grouping rows by utc_ms into time-ordered Epochs.
/// Sampling intervals come from consecutive timestamps; the first epoch gets
/// Ts = 0. Rows with unparseable or non-finite fields are dropped and counted.
inline std::vector<gnss::Epoch> load_epochs(const std::string& path, LoadStats* stats = nullptr) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw IngestError("empty file: " + path);
  csv::check_header(lines[0], csv::kEpochHeader, path);

  struct Row {
    std::int64_t t_ms;
    gnss::SatelliteObservation obs;
    std::size_t file_order;
  };
  std::vector<Row> rows;
  LoadStats local;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    ++local.rows_total;
    const auto f = csv::split_fields(lines[i]);
    if (f.size() != 12) {
      ++local.rows_dropped;
      continue;
    }
    Row row;
    row.file_order = i;
    row.obs.sat_id = std::string(f[1]);
    double prr = 0.0, sx = 0, sy = 0, sz = 0, svx = 0, svy = 0, svz = 0;
    bool ok = csv::parse_int64(f[0], row.t_ms) && csv::parse_double(f[2], row.obs.pr) &&
              csv::parse_double(f[4], sx) && csv::parse_double(f[5], sy) &&
              csv::parse_double(f[6], sz) && csv::parse_double(f[7], svx) &&
              csv::parse_double(f[8], svy) && csv::parse_double(f[9], svz) &&
              csv::parse_double(f[10], row.obs.sigma_pr);
    if (ok && !f[3].empty()) {
      ok = csv::parse_double(f[3], prr);
      if (ok) row.obs.prr = prr;
    }
    if (ok && !f[11].empty()) ok = csv::parse_double(f[11], row.obs.sigma_prr);
    if (!ok || row.obs.sat_id.empty()) {
      ++local.rows_dropped;
      continue;
    }
    row.obs.sat_pos = {sx, sy, sz};
    row.obs.sat_vel = {svx, svy, svz};
    rows.push_back(std::move(row));
  }
  if (stats) *stats = local;
  if (rows.empty()) throw IngestError("no valid data rows in " + path);

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.t_ms < b.t_ms; });

  std::vector<gnss::Epoch> epochs;
  for (auto& row : rows) {
    if (epochs.empty() || epochs.back().t_ms != row.t_ms) {
      gnss::Epoch e;
      e.t_ms = row.t_ms;
      e.Ts = epochs.empty() ? 0.0
                            : static_cast<double>(row.t_ms - epochs.back().t_ms) / 1000.0;
      epochs.push_back(std::move(e));
    }
    for (const auto& existing : epochs.back().sats)
      if (existing.sat_id == row.obs.sat_id)
        throw IngestError("duplicate row for (utc_ms=" + std::to_string(row.t_ms) +
                          ", sat_id=" + row.obs.sat_id + ") in " + path);
    epochs.back().sats.push_back(std::move(row.obs));
  }
  return epochs;
}

inline std::vector<TruthFix> load_truth(const std::string& path, LoadStats* stats = nullptr) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw IngestError("empty file: " + path);
  csv::check_header(lines[0], csv::kTruthHeader, path);

  std::vector<TruthFix> fixes;
  LoadStats local;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    ++local.rows_total;
    const auto f = csv::split_fields(lines[i]);
    TruthFix fix;
    if (f.size() != 4 || !csv::parse_int64(f[0], fix.t_ms) ||
        !csv::parse_double(f[1], fix.lat_deg) || !csv::parse_double(f[2], fix.lon_deg) ||
        !csv::parse_double(f[3], fix.alt_m)) {
      ++local.rows_dropped;
      continue;
    }
    if (fix.lat_deg < -90.0 || fix.lat_deg > 90.0 || fix.lon_deg < -180.0 || fix.lon_deg > 180.0)
      throw IngestError("coordinates out of range at line " + std::to_string(i + 1) + " in " +
                        path);
    fixes.push_back(fix);
  }
  if (stats) *stats = local;
  if (fixes.empty()) throw IngestError("no valid data rows in " + path);
  std::sort(fixes.begin(), fixes.end(),
            [](const TruthFix& a, const TruthFix& b) { return a.t_ms < b.t_ms; });
  return fixes;
}

inline void write_epochs_csv(const std::string& path, std::span<const gnss::Epoch> epochs) {
  std::ostringstream out;
  out << csv::kEpochHeader << "\n";
  for (const auto& e : epochs) {
    for (const auto& s : e.sats) {
      out << e.t_ms << ',' << s.sat_id << ',' << csv::format_real(s.pr) << ',';
      if (s.prr) out << csv::format_real(*s.prr);
      out << ',' << csv::format_real(s.sat_pos.x()) << ',' << csv::format_real(s.sat_pos.y())
          << ',' << csv::format_real(s.sat_pos.z()) << ',' << csv::format_real(s.sat_vel.x())
          << ',' << csv::format_real(s.sat_vel.y()) << ',' << csv::format_real(s.sat_vel.z())
          << ',' << csv::format_real(s.sigma_pr) << ',' << csv::format_real(s.sigma_prr) << "\n";
    }
  }
  detail::write_file_atomic(path, out.str());
}

inline void write_truth_csv(const std::string& path, std::span<const TruthFix> truth) {
  std::ostringstream out;
  out << csv::kTruthHeader << "\n";
  for (const auto& t : truth)
    out << t.t_ms << ',' << csv::format_real(t.lat_deg) << ',' << csv::format_real(t.lon_deg)
        << ',' << csv::format_real(t.alt_m) << "\n";
  detail::write_file_atomic(path, out.str());
}

}  // namespace hest
