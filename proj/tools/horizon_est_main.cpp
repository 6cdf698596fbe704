// horizon-est: run moving-horizon / Kalman / least-squares GNSS estimators over
// CSV datasets or synthetic scenarios, verify the estimator identities on
// seeded random systems, and sweep horizon sizes.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hest/ingest.hpp"
#include "hest/pipeline.hpp"
#include "hest/report_io.hpp"
#include "hest/simulate.hpp"
#include "hest/verify.hpp"

namespace {

struct CliOptions {
  std::string estimator = "mhe";
  int horizon = 10;
  bool synthetic = false;
  std::string epochs_path;
  std::string truth_path;
  std::uint64_t seed = 1;
  int n_epochs = 100;
  int n_sats = 8;
  double Ts = 1.0;
  double sigma_pr = 3.0;
  double sigma_prr = 0.3;
  std::string trajectory = "constant_velocity";
  double clock_drift = 0.1;
  bool orbiting_sats = false;
  double sp = 1.0;
  double sf = 1.0;
  double sg = 0.1;
  double p0 = 0.05;
  std::string out_dir;
  std::vector<int> horizons;
  std::string suite = "all";
  int trials = 0;
};

hest::TrajectoryKind parse_trajectory(const std::string& name) {
  if (name == "static") return hest::TrajectoryKind::kStatic;
  if (name == "constant_velocity") return hest::TrajectoryKind::kConstantVelocity;
  if (name == "waypoint_turns") return hest::TrajectoryKind::kWaypointTurns;
  throw hest::ContractViolation("unknown trajectory: " + name);
}

hest::RunConfig make_run_config(const CliOptions& opt) {
  hest::RunConfig cfg;
  cfg.estimator = hest::parse_estimator(opt.estimator);
  cfg.horizon = opt.horizon;
  cfg.synthetic = opt.synthetic;
  cfg.epochs_path = opt.epochs_path;
  cfg.truth_path = opt.truth_path;
  cfg.scenario.seed = opt.seed;
  cfg.scenario.n_epochs = opt.n_epochs;
  cfg.scenario.n_sats = opt.n_sats;
  cfg.scenario.Ts = opt.Ts;
  cfg.scenario.sigma_pr = opt.sigma_pr;
  cfg.scenario.sigma_prr = opt.sigma_prr;
  cfg.scenario.trajectory = parse_trajectory(opt.trajectory);
  cfg.scenario.clock_drift = opt.clock_drift;
  cfg.scenario.orbiting_sats = opt.orbiting_sats;
  cfg.process_noise = {opt.sp, opt.sf, opt.sg};
  cfg.p0_diag = opt.p0;
  cfg.out_dir = opt.out_dir;
  return cfg;
}

void add_scenario_options(CLI::App* cmd, CliOptions& opt) {
  cmd->add_option("--seed", opt.seed, "scenario RNG seed");
  cmd->add_option("--n-epochs", opt.n_epochs, "number of synthetic epochs");
  cmd->add_option("--n-sats", opt.n_sats, "number of satellites");
  cmd->add_option("--ts", opt.Ts, "sampling interval [s]");
  cmd->add_option("--sigma-pr", opt.sigma_pr, "pseudorange noise 1-sigma [m]");
  cmd->add_option("--sigma-prr", opt.sigma_prr, "rate noise 1-sigma [m/s]");
  cmd->add_option("--trajectory", opt.trajectory,
                  "truth trajectory: static|constant_velocity|waypoint_turns");
  cmd->add_option("--clock-drift", opt.clock_drift, "receiver clock drift [m/s]");
  cmd->add_flag("--orbiting-sats", opt.orbiting_sats, "move satellites on circular orbits");
}

void add_estimator_options(CLI::App* cmd, CliOptions& opt) {
  cmd->add_option("--estimator", opt.estimator, "wls|ekf|mhe|fgo");
  cmd->add_option("--horizon", opt.horizon, "horizon size N (mhe/fgo)");
  cmd->add_option("--epochs", opt.epochs_path, "epoch measurement CSV");
  cmd->add_option("--truth", opt.truth_path, "ground truth CSV");
  cmd->add_flag("--synthetic", opt.synthetic, "generate a synthetic scenario instead of files");
  cmd->add_option("--sp", opt.sp, "position-velocity PSD [m^2/s^3]");
  cmd->add_option("--sf", opt.sf, "clock bias PSD [m^2/s]");
  cmd->add_option("--sg", opt.sg, "clock drift PSD [m^2/s^3]");
  cmd->add_option("--p0", opt.p0, "initial covariance diagonal");
  add_scenario_options(cmd, opt);
}

int print_suite(const hest::SuiteResult& res) {
  std::printf("%-12s trials=%-4d max_residual=%.3e tolerance=%.1e %s\n", res.suite.c_str(),
              res.trials, res.max_residual, res.tolerance, res.pass ? "PASS" : "FAIL");
  for (const auto& note : res.notes) std::printf("  note: %s\n", note.c_str());
  return res.pass ? 0 : 1;
}

int run_verify(const CliOptions& opt) {
  const bool all = opt.suite == "all";
  int failures = 0;
  const auto want = [&](const char* name) { return all || opt.suite == name; };

  if (want("lemma2"))
    failures += print_suite(hest::verify_lemma2(opt.seed, opt.trials > 0 ? opt.trials : 50));
  if (want("lemma3"))
    failures += print_suite(hest::verify_lemma3(opt.seed, opt.trials > 0 ? opt.trials : 50));
  if (want("corollary21"))
    failures +=
        print_suite(hest::verify_corollary21(opt.seed, opt.trials > 0 ? opt.trials : 50));
  if (want("bls"))
    failures += print_suite(hest::verify_bls(opt.seed, opt.trials > 0 ? opt.trials : 5));
  if (want("optimality"))
    failures += print_suite(hest::verify_optimality(opt.seed, opt.trials > 0 ? opt.trials : 20));
  if (want("theorem1")) {
    const std::vector<int> horizons{0, 1, 2, 5, 10};
    failures += print_suite(
        hest::verify_theorem1(opt.seed, opt.trials > 0 ? opt.trials : 10, horizons));

    // GNSS analogue: per-epoch filter difference traces, optionally dumped as
    // plot-ready CSVs (one file per horizon)
    hest::ScenarioConfig sc;
    sc.seed = opt.seed;
    sc.n_epochs = opt.n_epochs;
    sc.n_sats = opt.n_sats;
    sc.sigma_pr = opt.sigma_pr;
    sc.sigma_prr = opt.sigma_prr;
    const auto gnss_res = hest::theorem1_gnss_comparison(sc, horizons);
    const bool gnss_pass = gnss_res.max_position_diff_m < 1e-6;
    std::printf("%-12s epochs=%-4d max_position_diff=%.3e m tolerance=1e-06 %s\n",
                "theorem1-gnss", sc.n_epochs, gnss_res.max_position_diff_m,
                gnss_pass ? "PASS" : "FAIL");
    failures += gnss_pass ? 0 : 1;
    if (!opt.out_dir.empty()) {
      std::filesystem::create_directories(opt.out_dir);
      for (std::size_t i = 0; i < gnss_res.horizons.size(); ++i) {
        std::ostringstream csv_out;
        csv_out << "epoch,position_diff_m\n";
        for (std::size_t k = 0; k < gnss_res.position_diff_m[i].size(); ++k)
          csv_out << k << ',' << hest::csv::format_real(gnss_res.position_diff_m[i][k]) << "\n";
        hest::detail::write_file_atomic(
            (std::filesystem::path(opt.out_dir) /
             ("theorem1_diff_N" + std::to_string(gnss_res.horizons[i]) + ".csv"))
                .string(),
            csv_out.str());
      }
    }
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moving-horizon / Kalman / least-squares GNSS state estimation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key-value config file (INI; command-line flags win)");

  CliOptions opt;

  CLI::App* run_cmd = app.add_subcommand("run", "run one estimator over a dataset");
  add_estimator_options(run_cmd, opt);
  run_cmd->add_option("--out", opt.out_dir, "output directory for report files");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run one estimator across horizon sizes");
  add_estimator_options(sweep_cmd, opt);
  sweep_cmd->add_option("--horizons", opt.horizons, "comma-separated horizon sizes")
      ->delimiter(',');
  sweep_cmd->add_option("--out", opt.out_dir, "output directory");

  CLI::App* verify_cmd =
      app.add_subcommand("verify", "verify estimator identities on seeded random systems");
  verify_cmd->add_option("--suite", opt.suite,
                         "theorem1|lemma2|lemma3|corollary21|bls|optimality|all");
  verify_cmd->add_option("--seed", opt.seed, "RNG seed");
  verify_cmd->add_option("--trials", opt.trials, "trial count (0 = suite default)")
      ->check(CLI::NonNegativeNumber);
  verify_cmd->add_option("--out", opt.out_dir, "directory for difference-trace CSVs");
  verify_cmd->add_option("--n-epochs", opt.n_epochs, "epochs for the GNSS equivalence run");
  verify_cmd->add_option("--n-sats", opt.n_sats, "satellites for the GNSS equivalence run");
  verify_cmd->add_option("--sigma-pr", opt.sigma_pr, "pseudorange noise [m]");
  verify_cmd->add_option("--sigma-prr", opt.sigma_prr, "rate noise [m/s]");

  CLI::App* sim_cmd = app.add_subcommand("simulate", "emit a synthetic scenario as CSV files");
  add_scenario_options(sim_cmd, opt);
  sim_cmd->add_option("--out", opt.out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(run_cmd)) {
      hest::RunConfig cfg = make_run_config(opt);
      if ((cfg.estimator == hest::EstimatorKind::kWls ||
           cfg.estimator == hest::EstimatorKind::kEkf) &&
          run_cmd->count("--horizon") > 0)
        std::fprintf(stderr, "warning: --horizon is ignored for %s\n",
                     hest::to_string(cfg.estimator).c_str());
      const hest::RunResult result = hest::run_estimator(cfg);
      hest::write_run_outputs(cfg, result);
      if (result.report) {
        std::printf("%s horizon=%d epochs=%d horizontal_mean=%.3f m vertical_rmse=%.3f m\n",
                    hest::to_string(cfg.estimator).c_str(), cfg.horizon, result.n_epochs,
                    result.report->summary.horizontal_mean_m,
                    result.report->summary.vertical_rmse_m);
      } else {
        std::printf("%s horizon=%d epochs=%d (no truth: unscored)\n",
                    hest::to_string(cfg.estimator).c_str(), cfg.horizon, result.n_epochs);
      }
      return 0;
    }

    if (app.got_subcommand(sweep_cmd)) {
      hest::RunConfig cfg = make_run_config(opt);
      const auto rows = hest::run_sweep(cfg, opt.horizons);
      hest::write_sweep_outputs(cfg.out_dir, rows);
      bool any_error = false;
      for (const auto& row : rows) {
        if (row.ok)
          std::printf("N=%-3d horizontal_mean=%.6f m vertical_rmse=%.6f m\n", row.horizon,
                      row.horizontal_mean_m, row.vertical_rmse_m);
        else {
          std::printf("N=%-3d error: %s\n", row.horizon, row.error.c_str());
          any_error = true;
        }
      }
      return any_error ? 1 : 0;
    }

    if (app.got_subcommand(verify_cmd)) return run_verify(opt);

    if (app.got_subcommand(sim_cmd)) {
      hest::ScenarioConfig sc = make_run_config(opt).scenario;
      const hest::Scenario scenario = hest::generate_scenario(sc);
      std::filesystem::create_directories(opt.out_dir);
      const auto epochs_path = (std::filesystem::path(opt.out_dir) / "epochs.csv").string();
      const auto truth_path = (std::filesystem::path(opt.out_dir) / "truth.csv").string();
      hest::write_epochs_csv(epochs_path, scenario.epochs);
      hest::write_truth_csv(truth_path, hest::truth_fixes(scenario));
      std::printf("wrote %s and %s (%d epochs, %d sats)\n", epochs_path.c_str(),
                  truth_path.c_str(), sc.n_epochs, sc.n_sats);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
