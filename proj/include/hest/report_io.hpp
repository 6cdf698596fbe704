#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hest/pipeline.hpp"

namespace hest {

namespace report {

inline nlohmann::json config_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["estimator"] = to_string(cfg.estimator);
  j["horizon"] = cfg.horizon;
  j["p0_diag"] = cfg.p0_diag;
  j["process_noise"] = {{"S_p", cfg.process_noise.S_p},
                        {"S_f", cfg.process_noise.S_f},
                        {"S_g", cfg.process_noise.S_g}};
  if (cfg.synthetic) {
    j["input"] = {{"kind", "synthetic"},
                  {"seed", cfg.scenario.seed},
                  {"n_epochs", cfg.scenario.n_epochs},
                  {"n_sats", cfg.scenario.n_sats},
                  {"Ts", cfg.scenario.Ts},
                  {"sigma_pr", cfg.scenario.sigma_pr},
                  {"sigma_prr", cfg.scenario.sigma_prr},
                  {"trajectory", to_string(cfg.scenario.trajectory)},
                  {"clock_drift", cfg.scenario.clock_drift},
                  {"orbiting_sats", cfg.scenario.orbiting_sats}};
  } else {
    j["input"] = {{"kind", "files"}, {"epochs", cfg.epochs_path}, {"truth", cfg.truth_path}};
  }
  return j;
}

inline nlohmann::json report_json(const RunConfig& cfg, const RunResult& result) {
  nlohmann::json j;
  j["estimator"] = to_string(cfg.estimator);
  j["horizon"] = cfg.horizon;
  j["n_epochs"] = result.n_epochs;
  if (result.report) {
    const RunSummary& s = result.report->summary;
    j["summary"] = {{"horizontal_mean_m", s.horizontal_mean_m},
                    {"vertical_rmse_m", s.vertical_rmse_m},
                    {"matched_epochs", s.n_epochs},
                    {"unmatched_epochs", s.n_unmatched}};
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : result.report->per_epoch) {
      rows.push_back({{"t", row.t_ms},
                      {"ecef", {row.est_ecef.x(), row.est_ecef.y(), row.est_ecef.z()}},
                      {"lat_deg", row.est_geodetic.lat_deg},
                      {"lon_deg", row.est_geodetic.lon_deg},
                      {"alt_m", row.est_geodetic.alt_m},
                      {"north_err_m", row.ned_error.x()},
                      {"east_err_m", row.ned_error.y()},
                      {"down_err_m", row.ned_error.z()},
                      {"horiz_err_m", row.horizontal_error_m}});
    }
    j["per_epoch"] = std::move(rows);
  } else {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t k = 0; k < result.trace.t_ms.size(); ++k) {
      const Geodetic g = ecef_to_geodetic(gnss::position(result.trace.filtered[k]));
      rows.push_back({{"t", result.trace.t_ms[k]},
                      {"lat_deg", g.lat_deg},
                      {"lon_deg", g.lon_deg},
                      {"alt_m", g.alt_m}});
    }
    j["per_epoch"] = std::move(rows);
  }
  return j;
}

/// Per-epoch CSV: t,lat,lon,alt,north_err,east_err,down_err,horiz_err
/// Error cells stay empty when the run was not scored.
inline std::string per_epoch_csv(const RunResult& result) {
  std::ostringstream out;
  out << "t,lat,lon,alt,north_err,east_err,down_err,horiz_err\n";
  if (result.report) {
    for (const auto& row : result.report->per_epoch) {
      out << row.t_ms << ',' << csv::format_real(row.est_geodetic.lat_deg) << ','
          << csv::format_real(row.est_geodetic.lon_deg) << ','
          << csv::format_real(row.est_geodetic.alt_m) << ','
          << csv::format_real(row.ned_error.x()) << ',' << csv::format_real(row.ned_error.y())
          << ',' << csv::format_real(row.ned_error.z()) << ','
          << csv::format_real(row.horizontal_error_m) << "\n";
    }
  } else {
    for (std::size_t k = 0; k < result.trace.t_ms.size(); ++k) {
      const Geodetic g = ecef_to_geodetic(gnss::position(result.trace.filtered[k]));
      out << result.trace.t_ms[k] << ',' << csv::format_real(g.lat_deg) << ','
          << csv::format_real(g.lon_deg) << ',' << csv::format_real(g.alt_m) << ",,,,\n";
    }
  }
  return out.str();
}

}  // namespace report

/// Writes report.json, report_epochs.csv and config.json into cfg.out_dir.
inline void write_run_outputs(const RunConfig& cfg, const RunResult& result) {
  if (cfg.out_dir.empty()) return;
  std::filesystem::create_directories(cfg.out_dir);
  const auto path = [&](const char* name) {
    return (std::filesystem::path(cfg.out_dir) / name).string();
  };
  detail::write_file_atomic(path("report.json"), report::report_json(cfg, result).dump(2) + "\n");
  detail::write_file_atomic(path("report_epochs.csv"), report::per_epoch_csv(result));
  detail::write_file_atomic(path("config.json"), report::config_json(cfg).dump(2) + "\n");
}

struct SweepRow {
  int horizon = 0;
  bool ok = false;
  std::string error;
  double horizontal_mean_m = 0.0;
  double vertical_rmse_m = 0.0;
};

/// Thread cap for sweep rows: HORIZON_EST_THREADS, else hardware concurrency.
inline int sweep_thread_cap() {
  if (const char* env = std::getenv("HORIZON_EST_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 2;
}

/// One estimator run per horizon over shared inputs. Rows execute in parallel
/// (each writes its own output directory atomically); failures are recorded
/// per row and the sweep continues.
inline std::vector<SweepRow> run_sweep(const RunConfig& base, const std::vector<int>& horizons) {
  if (horizons.empty()) throw ContractViolation("sweep: empty horizon list");
  if (base.estimator != EstimatorKind::kMhe && base.estimator != EstimatorKind::kFgo)
    throw ContractViolation("sweep: estimator must be mhe or fgo");

  std::vector<SweepRow> rows(horizons.size());
  std::atomic<std::size_t> next{0};
  const int n_threads =
      std::min<int>(sweep_thread_cap(), static_cast<int>(horizons.size()));

  auto worker = [&]() {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= horizons.size()) return;
      SweepRow& row = rows[idx];
      row.horizon = horizons[idx];
      try {
        RunConfig cfg = base;
        cfg.horizon = horizons[idx];
        if (!base.out_dir.empty())
          cfg.out_dir = (std::filesystem::path(base.out_dir) /
                         ("N_" + std::to_string(horizons[idx])))
                            .string();
        const RunResult result = run_estimator(cfg);
        write_run_outputs(cfg, result);
        if (result.report) {
          row.horizontal_mean_m = result.report->summary.horizontal_mean_m;
          row.vertical_rmse_m = result.report->summary.vertical_rmse_m;
        }
        row.ok = true;
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
    }
  };

  std::vector<std::thread> pool;
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return rows;
}

/// sweep.csv (horizon,horizontal_mean_m,vertical_rmse_m,status) and sweep.json,
/// rows in horizon-list order.
inline void write_sweep_outputs(const std::string& out_dir, const std::vector<SweepRow>& rows) {
  if (out_dir.empty()) return;
  std::filesystem::create_directories(out_dir);
  std::ostringstream csv_out;
  csv_out << "horizon,horizontal_mean_m,vertical_rmse_m,status\n";
  nlohmann::json j = nlohmann::json::array();
  for (const auto& row : rows) {
    csv_out << row.horizon << ',';
    if (row.ok)
      csv_out << csv::format_real(row.horizontal_mean_m) << ','
              << csv::format_real(row.vertical_rmse_m) << ",ok\n";
    else
      csv_out << ",,error\n";
    nlohmann::json obj = {{"horizon", row.horizon}, {"ok", row.ok}};
    if (row.ok) {
      obj["horizontal_mean_m"] = row.horizontal_mean_m;
      obj["vertical_rmse_m"] = row.vertical_rmse_m;
    } else {
      obj["error"] = row.error;
    }
    j.push_back(std::move(obj));
  }
  detail::write_file_atomic((std::filesystem::path(out_dir) / "sweep.csv").string(),
                            csv_out.str());
  detail::write_file_atomic((std::filesystem::path(out_dir) / "sweep.json").string(),
                            j.dump(2) + "\n");
}

}  // namespace hest
