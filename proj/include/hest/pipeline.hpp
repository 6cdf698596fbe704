#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hest/ekf.hpp"
#include "hest/errors.hpp"
#include "hest/gnss.hpp"
#include "hest/ingest.hpp"
#include "hest/metrics.hpp"
#include "hest/mhe.hpp"
#include "hest/simulate.hpp"
#include "hest/wls.hpp"

namespace hest {

enum class EstimatorKind { kWls, kEkf, kMhe, kFgo };

inline std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::kWls: return "wls";
    case EstimatorKind::kEkf: return "ekf";
    case EstimatorKind::kMhe: return "mhe";
    case EstimatorKind::kFgo: return "fgo";
  }
  return "unknown";
}

inline EstimatorKind parse_estimator(const std::string& name) {
  if (name == "wls") return EstimatorKind::kWls;
  if (name == "ekf") return EstimatorKind::kEkf;
  if (name == "mhe") return EstimatorKind::kMhe;
  if (name == "fgo") return EstimatorKind::kFgo;
  throw ContractViolation("unknown estimator: " + name + " (expected wls|ekf|mhe|fgo)");
}

struct RunConfig {
  EstimatorKind estimator = EstimatorKind::kMhe;
  int horizon = 10;
  bool synthetic = false;
  ScenarioConfig scenario;   ///< used when synthetic
  std::string epochs_path;   ///< used otherwise
  std::string truth_path;    ///< optional; empty means unscored run
  gnss::ProcessNoiseConfig process_noise;
  double p0_diag = 0.05;
  std::string out_dir;       ///< empty: no files written
};

/// Per-epoch estimator outputs over a dataset.
struct EstimateTrace {
  std::vector<std::int64_t> t_ms;
  std::vector<gnss::NavState> filtered;   ///< state at epoch k given data through k
  std::vector<gnss::NavState> predicted;  ///< one-step prediction made at epoch k
};

/// Runs one estimator over a fixed sequence of epochs. The initial state comes
/// from a WLS fix on the first epoch; the initial covariance is p0_diag * I.
inline EstimateTrace run_gnss_estimator(EstimatorKind kind, int horizon,
                                        const std::vector<gnss::Epoch>& epochs,
                                        const gnss::ProcessNoiseConfig& pn, double p0_diag) {
  if (epochs.empty()) throw ContractViolation("run_gnss_estimator: no epochs");
  if (!(p0_diag > 0.0)) throw ContractViolation("run_gnss_estimator: p0_diag must be positive");

  const int n = static_cast<int>(epochs.size());
  EstimateTrace trace;
  trace.t_ms.resize(n);
  trace.filtered.resize(n);
  trace.predicted.resize(n);
  for (int k = 0; k < n; ++k) trace.t_ms[k] = epochs[k].t_ms;

  const gnss::WlsSolution init = gnss::wls_solve(epochs[0]);
  const Eigen::VectorXd x0 = init.state;
  const Eigen::MatrixXd p0 =
      p0_diag * Eigen::MatrixXd::Identity(gnss::kStateDim, gnss::kStateDim);

  if (kind == EstimatorKind::kWls) {
    gnss::WlsSolution sol = init;
    trace.filtered[0] = sol.state;
    trace.predicted[0] = sol.state;
    for (int k = 1; k < n; ++k) {
      sol = gnss::wls_solve(epochs[k], sol.state);  // warm start; still a snapshot solve
      trace.filtered[k] = sol.state;
      trace.predicted[k] = sol.state;
    }
    return trace;
  }

  const gnss::GnssSystem sys = gnss::build_gnss_model(epochs, pn);
  if (kind == EstimatorKind::kEkf) {
    EkfState s = ekf_init(x0, p0);
    for (int k = 0; k < n; ++k) {
      s = ekf_step(s, gnss::stacked_measurements(epochs[k]), sys.model, sys.noise.Q(k),
                   sys.noise.R(k));
      trace.filtered[k] = s.x_filt;
      trace.predicted[k] = s.x_pred;
    }
    return trace;
  }

  const MheVariant variant = (kind == EstimatorKind::kFgo) ? MheVariant::kNoArrivalCost
                                                           : MheVariant::kWithArrivalCost;
  EstimatorState s = mhe_init(variant, horizon, x0, p0);
  for (int k = 0; k < n; ++k) {
    s = mhe_step(s, gnss::stacked_measurements(epochs[k]), sys.model, sys.noise);
    trace.filtered[k] = s.x_filt;
    trace.predicted[k] = s.x_pred;
  }
  return trace;
}

struct RunResult {
  EstimateTrace trace;
  std::optional<RunReport> report;  ///< present when truth was available
  int n_epochs = 0;
};

inline std::pair<std::vector<gnss::Epoch>, std::optional<std::vector<TruthFix>>> resolve_input(
    const RunConfig& cfg) {
  if (cfg.synthetic) {
    Scenario sc = generate_scenario(cfg.scenario);
    return {std::move(sc.epochs), truth_fixes(sc)};
  }
  if (cfg.epochs_path.empty())
    throw ContractViolation("run: either --synthetic or --epochs PATH is required");
  std::vector<gnss::Epoch> epochs = load_epochs(cfg.epochs_path);
  std::optional<std::vector<TruthFix>> truth;
  if (!cfg.truth_path.empty()) truth = load_truth(cfg.truth_path);
  return {std::move(epochs), std::move(truth)};
}

/// Resolves the configured input, runs the estimator and, when truth is
/// available, scores the run.
inline RunResult run_estimator(const RunConfig& cfg) {
  auto [epochs, truth] = resolve_input(cfg);
  RunResult out;
  out.n_epochs = static_cast<int>(epochs.size());
  out.trace = run_gnss_estimator(cfg.estimator, cfg.horizon, epochs, cfg.process_noise,
                                 cfg.p0_diag);
  if (truth) {
    std::vector<EpochEstimate> estimates(out.trace.t_ms.size());
    for (std::size_t k = 0; k < estimates.size(); ++k)
      estimates[k] = EpochEstimate{out.trace.t_ms[k], gnss::position(out.trace.filtered[k])};
    out.report = score_run(estimates, *truth);
    out.report->summary.estimator_name = to_string(cfg.estimator);
    out.report->summary.horizon =
        (cfg.estimator == EstimatorKind::kMhe || cfg.estimator == EstimatorKind::kFgo)
            ? cfg.horizon
            : 0;
  }
  return out;
}

}  // namespace hest
