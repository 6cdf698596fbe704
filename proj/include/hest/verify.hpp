#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hest/ekf.hpp"
#include "hest/mhe.hpp"
#include "hest/model.hpp"
#include "hest/pipeline.hpp"
#include "hest/rng.hpp"

namespace hest {

/// Outcome of one verification suite run.
struct SuiteResult {
  std::string suite;
  int trials = 0;
  double max_residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::vector<std::string> notes;

  void finish() { pass = max_residual < tolerance && trials > 0; }
};

namespace verify_detail {

inline Eigen::MatrixXd random_matrix(Xoshiro256pp& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
  return m;
}

inline Eigen::VectorXd random_vector(Xoshiro256pp& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(-1.0, 1.0);
  return v;
}

/// Random SPD matrix with eigenvalues roughly in [floor, floor + O(1)].
inline Eigen::MatrixXd random_spd(Xoshiro256pp& rng, Eigen::Index n, double floor = 0.2) {
  const Eigen::MatrixXd w = random_matrix(rng, n, n);
  return w * w.transpose() / static_cast<double>(n) +
         floor * Eigen::MatrixXd::Identity(n, n);
}

/// Random square matrix scaled to spectral radius <= `spectral`.
inline Eigen::MatrixXd random_transition(Xoshiro256pp& rng, Eigen::Index n, double spectral) {
  Eigen::MatrixXd m = random_matrix(rng, n, n);
  const double top = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
  if (top > 1e-12) m *= spectral / top;
  return m;
}

inline Eigen::VectorXd gaussian_vector(Xoshiro256pp& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.gaussian();
  return v;
}

/// Affine time-variant system with per-epoch measurement dimensions.
/// f_j(x) = A_j x + c_j, h_j(x) = C_j x + d_j.
struct LtvData {
  Eigen::Index n = 0;
  int steps = 0;
  std::vector<Eigen::MatrixXd> A, C, Q, R;
  std::vector<Eigen::VectorXd> c, d;
  Eigen::MatrixXd P0;
  Eigen::VectorXd x0;
};

inline std::shared_ptr<const LtvData> make_random_ltv(Xoshiro256pp& rng, Eigen::Index n,
                                                      int steps, bool vary_meas_dim,
                                                      Eigen::Index fixed_meas_dim = 0) {
  auto data = std::make_shared<LtvData>();
  data->n = n;
  data->steps = steps;
  for (int j = 0; j < steps; ++j) {
    const Eigen::Index m = fixed_meas_dim > 0
                               ? fixed_meas_dim
                               : (vary_meas_dim ? 1 + static_cast<Eigen::Index>(
                                                          rng.next_u64() % (n + 1))
                                                : n);
    data->A.push_back(random_transition(rng, n, 0.95));
    data->c.push_back(0.3 * random_vector(rng, n));
    data->C.push_back(random_matrix(rng, m, n));
    data->d.push_back(0.3 * random_vector(rng, m));
    data->Q.push_back(0.4 * random_spd(rng, n));
    data->R.push_back(0.4 * random_spd(rng, m));
  }
  data->P0 = random_spd(rng, n);
  data->x0 = random_vector(rng, n);
  return data;
}

inline NltvModel ltv_model(std::shared_ptr<const LtvData> data) {
  NltvModel model;
  model.state_dim = data->n;
  model.f = [data](int k, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return data->A.at(k) * x + data->c.at(k);
  };
  model.df_dx = [data](int k, const Eigen::VectorXd&) -> Eigen::MatrixXd { return data->A.at(k); };
  model.h = [data](int k, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return data->C.at(k) * x + data->d.at(k);
  };
  model.dh_dx = [data](int k, const Eigen::VectorXd&) -> Eigen::MatrixXd { return data->C.at(k); };
  model.meas_dim = [data](int k) -> Eigen::Index { return data->C.at(k).rows(); };
  return model;
}

inline NoiseSchedule ltv_noise(std::shared_ptr<const LtvData> data) {
  NoiseSchedule noise;
  noise.Q = [data](int j) -> Eigen::MatrixXd { return data->Q.at(j); };
  noise.R = [data](int j) -> Eigen::MatrixXd { return data->R.at(j); };
  return noise;
}

/// Smooth bounded nonlinear system for equivalence runs:
///   f_j(x) = A_j x + alpha tanh(x) + c_j
///   h_j(x) = C_j x + beta sin(C_j x) + d_j
struct NltvTanhData {
  std::shared_ptr<const LtvData> base;
  double alpha = 0.2;
  double beta = 0.2;
};

inline NltvModel tanh_model(const NltvTanhData& cfg) {
  auto data = cfg.base;
  const double alpha = cfg.alpha;
  const double beta = cfg.beta;
  NltvModel model;
  model.state_dim = data->n;
  model.f = [data, alpha](int k, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return data->A.at(k) * x + alpha * x.array().tanh().matrix() + data->c.at(k);
  };
  model.df_dx = [data, alpha](int k, const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    const Eigen::ArrayXd th = x.array().tanh();
    return data->A.at(k) +
           (alpha * (1.0 - th * th)).matrix().asDiagonal().toDenseMatrix();
  };
  model.h = [data, beta](int k, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const Eigen::VectorXd cx = data->C.at(k) * x;
    return cx + beta * cx.array().sin().matrix() + data->d.at(k);
  };
  model.dh_dx = [data, beta](int k, const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    const Eigen::VectorXd cx = data->C.at(k) * x;
    return (Eigen::VectorXd::Ones(cx.size()) + beta * cx.array().cos().matrix())
               .asDiagonal()
               .toDenseMatrix() *
           data->C.at(k);
  };
  model.meas_dim = [data](int k) -> Eigen::Index { return data->C.at(k).rows(); };
  return model;
}

/// Simulates `steps` epochs of a model under its noise schedule.
inline std::vector<Eigen::VectorXd> simulate_measurements(const NltvModel& model,
                                                          const NoiseSchedule& noise,
                                                          const Eigen::VectorXd& x0, int steps,
                                                          Xoshiro256pp& rng) {
  std::vector<Eigen::VectorXd> ys;
  Eigen::VectorXd x = x0;
  for (int j = 0; j < steps; ++j) {
    const Eigen::MatrixXd r = noise.R(j);
    const Eigen::MatrixXd q = noise.Q(j);
    const Eigen::VectorXd v =
        Eigen::LLT<Eigen::MatrixXd>(r).matrixL() * gaussian_vector(rng, r.rows());
    ys.push_back(model.h(j, x) + v);
    const Eigen::VectorXd w =
        Eigen::LLT<Eigen::MatrixXd>(q).matrixL() * gaussian_vector(rng, q.rows());
    x = model.f(j, x) + w;
  }
  return ys;
}

/// Chains the Riccati recursion from P0: returns P_0..P_k.
inline std::vector<Eigen::MatrixXd> riccati_chain(const LtvData& sys, int k) {
  std::vector<Eigen::MatrixXd> p{sys.P0};
  for (int j = 0; j < k; ++j)
    p.push_back(riccati_update(p.back(), sys.A.at(j), sys.C.at(j), sys.Q.at(j), sys.R.at(j)));
  return p;
}

/// Builds a window over epochs [start, start + span - 1] of an affine system.
/// Linearization points are irrelevant for affine models and set to zero.
inline HorizonWindow make_ltv_window(const LtvData& sys, int start, int span,
                                     const Eigen::MatrixXd& prior_cov,
                                     const Eigen::VectorXd& prior_state,
                                     std::span<const Eigen::VectorXd> y) {
  HorizonWindow win;
  win.start = start;
  win.prior_state = prior_state;
  win.prior_cov = prior_cov;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(sys.n);
  for (int r = 0; r < span; ++r) {
    const int j = start + r;
    win.y.push_back(y.empty() ? Eigen::VectorXd::Zero(sys.C.at(j).rows()) : y[j]);
    win.R.push_back(sys.R.at(j));
    win.Q.push_back(sys.Q.at(j));
    win.lin_pred.push_back(zero);
    win.lin_filt.push_back(zero);
  }
  return win;
}

/// Batch least squares over the full state trajectory x_0..x_k, solved as one
/// sparse-normal-equation system by LU (an algebraic route independent of the
/// horizon solve). Returns the smoothed final state and its propagation.
struct BatchSolution {
  Eigen::VectorXd x_last;
  Eigen::VectorXd x_pred;
};

inline BatchSolution batch_least_squares(const LtvData& sys, std::span<const Eigen::VectorXd> y,
                                         int k, bool include_prior,
                                         const Eigen::VectorXd& xbar0,
                                         const Eigen::MatrixXd& P0) {
  const Eigen::Index n = sys.n;
  const Eigen::Index dim = static_cast<Eigen::Index>(k + 1) * n;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);

  if (include_prior) {
    const Eigen::MatrixXd p0inv = spd_inverse(P0, "batch prior");
    m.topLeftCorner(n, n) += p0inv;
    rhs.head(n) += p0inv * xbar0;
  }
  for (int j = 0; j < k; ++j) {
    const Eigen::MatrixXd qinv = spd_inverse(sys.Q.at(j), "batch Q");
    const Eigen::MatrixXd& a = sys.A.at(j);
    const Eigen::Index row = static_cast<Eigen::Index>(j) * n;
    m.block(row, row, n, n) += a.transpose() * qinv * a;
    m.block(row, row + n, n, n) -= a.transpose() * qinv;
    m.block(row + n, row, n, n) -= qinv * a;
    m.block(row + n, row + n, n, n) += qinv;
    rhs.segment(row, n) -= a.transpose() * (qinv * sys.c.at(j));
    rhs.segment(row + n, n) += qinv * sys.c.at(j);
  }
  for (int j = 0; j <= k; ++j) {
    const Eigen::MatrixXd rinv = spd_inverse(sys.R.at(j), "batch R");
    const Eigen::MatrixXd& c = sys.C.at(j);
    const Eigen::Index row = static_cast<Eigen::Index>(j) * n;
    m.block(row, row, n, n) += c.transpose() * rinv * c;
    rhs.segment(row, n) += c.transpose() * (rinv * (y[j] - sys.d.at(j)));
  }

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  const Eigen::VectorXd x = lu.solve(rhs);
  if (!x.allFinite()) throw NumericError("batch_least_squares: singular system");
  BatchSolution sol;
  sol.x_last = x.tail(n);
  sol.x_pred = sys.A.at(k) * sol.x_last + sys.c.at(k);
  return sol;
}

}  // namespace verify_detail

/// Riccati identity: the matrix obtained through the assembled horizon equals
/// the chained recursion, on seeded random affine systems with varying
/// measurement dimensions.
inline SuiteResult verify_lemma2(std::uint64_t seed, int trials) {
  using namespace verify_detail;
  SuiteResult res;
  res.suite = "lemma2";
  res.tolerance = 1e-9;
  Xoshiro256pp rng(seed);
  for (int trial = 0; trial < trials; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.next_u64() % 5);
    const int big_n = static_cast<int>(rng.next_u64() % 7);          // horizon 0..6
    const int k = big_n + 2 + static_cast<int>(rng.next_u64() % 29); // up to ~30 epochs
    auto sys = make_random_ltv(rng, n, k, /*vary_meas_dim=*/true);
    const auto p = riccati_chain(*sys, k);

    const int start = k - big_n - 1;
    HorizonWindow win = make_ltv_window(*sys, start, big_n + 1, p.at(start),
                                        random_vector(rng, n), {});
    const HorizonSystem hs = assemble_horizon(win, ltv_model(sys));
    const Eigen::MatrixXd via_horizon = riccati_via_horizon(win, hs);
    const double resid = (via_horizon - p.at(k)).norm() / p.at(k).norm();
    res.max_residual = std::max(res.max_residual, resid);
    ++res.trials;
  }
  res.finish();
  return res;
}

/// Prediction-gain decomposition: the block form built from the sub-horizon
/// gain and the newest Kalman gain equals the direct computation.
inline SuiteResult verify_lemma3(std::uint64_t seed, int trials) {
  using namespace verify_detail;
  SuiteResult res;
  res.suite = "lemma3";
  res.tolerance = 1e-9;
  Xoshiro256pp rng(seed);
  for (int trial = 0; trial < trials; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.next_u64() % 4);
    const int big_n = 1 + static_cast<int>(rng.next_u64() % 4);  // horizon 1..4
    const int start = static_cast<int>(rng.next_u64() % 8);
    const int k = start + big_n;
    auto sys = make_random_ltv(rng, n, k + 1, /*vary_meas_dim=*/true);
    const auto p = riccati_chain(*sys, start);

    HorizonWindow win = make_ltv_window(*sys, start, big_n + 1, p.at(start),
                                        random_vector(rng, n), {});
    const HorizonSystem hs = assemble_horizon(win, ltv_model(sys));
    const Eigen::MatrixXd g = hs.G();
    const Eigen::MatrixXd direct =
        hs.Atilde * solve_normal_equations(g * hs.D + hs.Qtilde, g, nullptr, "lemma3 direct");
    const Eigen::MatrixXd decomposed = lemma3_gain_decomposition(win, hs);
    const double resid = (decomposed - direct).norm() / direct.norm();
    res.max_residual = std::max(res.max_residual, resid);
    ++res.trials;
  }
  res.finish();
  return res;
}

/// Filtered-covariance identity linking the Riccati matrix at the newest epoch
/// to the previous horizon's blocks.
inline SuiteResult verify_corollary21(std::uint64_t seed, int trials) {
  using namespace verify_detail;
  SuiteResult res;
  res.suite = "corollary21";
  res.tolerance = 1e-9;
  Xoshiro256pp rng(seed);
  for (int trial = 0; trial < trials; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.next_u64() % 4);
    const int big_n = static_cast<int>(rng.next_u64() % 5);  // horizon 0..4
    const int k = big_n + 2 + static_cast<int>(rng.next_u64() % 10);
    auto sys = make_random_ltv(rng, n, k + 1, /*vary_meas_dim=*/true);
    const auto p = riccati_chain(*sys, k);

    const int start = k - big_n - 1;
    HorizonWindow win = make_ltv_window(*sys, start, big_n + 1, p.at(start),
                                        random_vector(rng, n), {});
    const HorizonSystem hs = assemble_horizon(win, ltv_model(sys));
    const double resid =
        corollary21_identity_check(p.at(k), win, hs, sys->C.at(k), sys->R.at(k));
    res.max_residual = std::max(res.max_residual, resid);
    ++res.trials;
  }
  res.finish();
  return res;
}

/// Horizon-independence of the recursive estimator: on nonlinear systems
/// linearized with the filter-updated schedule, the window solution tracks the
/// extended Kalman filter for every horizon size. `trials` counts systems; the
/// first is a canonical scalar system, the rest are random bounded nonlinear
/// systems of dimension 2..4.
inline SuiteResult verify_theorem1(std::uint64_t seed, int trials,
                                   std::span<const int> horizons, int steps = 200) {
  using namespace verify_detail;
  SuiteResult res;
  res.suite = "theorem1";
  res.tolerance = 1e-8;
  Xoshiro256pp rng(seed);

  for (int trial = 0; trial < trials; ++trial) {
    NltvModel model;
    NoiseSchedule noise;
    Eigen::VectorXd x0;
    Eigen::MatrixXd p0;
    if (trial == 0) {
      // canonical scalar system: quadratic dynamics, cubic measurement
      model.state_dim = 1;
      model.f = [](int, const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Constant(1, 0.9 * x[0] + 0.1 * x[0] * x[0]);
      };
      model.df_dx = [](int, const Eigen::VectorXd& x) {
        return Eigen::MatrixXd::Constant(1, 1, 0.9 + 0.2 * x[0]);
      };
      model.h = [](int, const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Constant(1, x[0] + 0.05 * x[0] * x[0] * x[0]);
      };
      model.dh_dx = [](int, const Eigen::VectorXd& x) {
        return Eigen::MatrixXd::Constant(1, 1, 1.0 + 0.15 * x[0] * x[0]);
      };
      model.meas_dim = [](int) -> Eigen::Index { return 1; };
      noise.Q = [](int) { return Eigen::MatrixXd::Constant(1, 1, 0.004); };
      noise.R = [](int) { return Eigen::MatrixXd::Constant(1, 1, 0.01); };
      x0 = Eigen::VectorXd::Constant(1, 0.2);
      p0 = Eigen::MatrixXd::Constant(1, 1, 0.1);
    } else {
      const Eigen::Index n = 2 + static_cast<Eigen::Index>(trial % 3);
      auto base = make_random_ltv(rng, n, steps, /*vary_meas_dim=*/true);
      model = tanh_model(NltvTanhData{base});
      noise = ltv_noise(base);
      x0 = base->x0;
      p0 = base->P0;
    }

    const auto ys = simulate_measurements(model, noise, x0, steps, rng);

    std::vector<Eigen::VectorXd> ekf_pred(steps);
    EkfState ekf = ekf_init(x0, p0);
    for (int j = 0; j < steps; ++j) {
      ekf = ekf_step(ekf, ys[j], model, noise.Q(j), noise.R(j));
      ekf_pred[j] = ekf.x_pred;
    }

    for (const int big_n : horizons) {
      EstimatorState mhe = mhe_init(MheVariant::kWithArrivalCost, big_n, x0, p0);
      for (int j = 0; j < steps; ++j) {
        mhe = mhe_step(mhe, ys[j], model, noise);
        const double resid = (mhe.x_pred - ekf_pred[j]).norm() /
                             std::max(1.0, ekf_pred[j].norm());
        res.max_residual = std::max(res.max_residual, resid);
      }
    }
    ++res.trials;
  }
  res.finish();
  return res;
}

/// Full-history unification: with the horizon covering all epochs, the window
/// solution matches a one-shot batch least squares of the whole trajectory,
/// and the arrival-cost-free variant matches the prior-free batch solve.
inline SuiteResult verify_bls(std::uint64_t seed, int trials, int k_max = 50) {
  using namespace verify_detail;
  SuiteResult res;
  res.suite = "bls";
  res.tolerance = 1e-9;
  Xoshiro256pp rng(seed);
  for (int trial = 0; trial < trials; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.next_u64() % 3);
    auto sys = make_random_ltv(rng, n, k_max + 1, /*vary_meas_dim=*/false);  // full-rank epochs
    const NltvModel model = ltv_model(sys);
    const NoiseSchedule noise = ltv_noise(sys);
    const auto ys = simulate_measurements(model, noise, sys->x0, k_max + 1, rng);
    const Eigen::VectorXd xbar0 = sys->x0 + 0.3 * random_vector(rng, n);

    EstimatorState mhe = mhe_init(MheVariant::kWithArrivalCost, k_max, xbar0, sys->P0);
    EstimatorState fgo = mhe_init(MheVariant::kNoArrivalCost, k_max, xbar0, sys->P0);
    for (int k = 0; k <= k_max; ++k) {
      mhe = mhe_step(mhe, ys[k], model, noise);
      fgo = mhe_step(fgo, ys[k], model, noise);
      const BatchSolution with_prior =
          batch_least_squares(*sys, ys, k, /*include_prior=*/true, xbar0, sys->P0);
      const BatchSolution no_prior =
          batch_least_squares(*sys, ys, k, /*include_prior=*/false, xbar0, sys->P0);
      const double r1 =
          (mhe.x_pred - with_prior.x_pred).norm() / std::max(1.0, with_prior.x_pred.norm());
      const double r2 =
          (fgo.x_pred - no_prior.x_pred).norm() / std::max(1.0, no_prior.x_pred.norm());
      const double r3 =
          (mhe.x_filt - with_prior.x_last).norm() / std::max(1.0, with_prior.x_last.norm());
      res.max_residual = std::max({res.max_residual, r1, r2, r3});
    }
    ++res.trials;
  }
  res.finish();
  return res;
}

/// Optimality of the horizon solve: vanishing gradient at the solution and no
/// lower cost among random perturbations. `trials` windows, ~1000 perturbations
/// spread across them.
inline SuiteResult verify_optimality(std::uint64_t seed, int trials) {
  using namespace verify_detail;
  SuiteResult res;
  res.suite = "optimality";
  res.tolerance = 1.0;  // residual is a pass ratio: any violation scores 2
  Xoshiro256pp rng(seed);
  const int perturbations_per_trial = std::max(1, 1000 / std::max(1, trials));
  for (int trial = 0; trial < trials; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.next_u64() % 4);
    const int big_n = static_cast<int>(rng.next_u64() % 6);
    const int start = static_cast<int>(rng.next_u64() % 5);
    const int k = start + big_n;
    auto sys = make_random_ltv(rng, n, k + 1, /*vary_meas_dim=*/true);
    const NltvModel model = ltv_model(sys);
    const NoiseSchedule noise = ltv_noise(sys);
    const auto ys = simulate_measurements(model, noise, sys->x0, k + 1, rng);
    const auto p = riccati_chain(*sys, start);
    HorizonWindow win = make_ltv_window(*sys, start, big_n + 1, p.at(start), sys->x0, ys);

    const HorizonSystem hs = assemble_horizon(win, model);
    const Eigen::VectorXd omega = solve_noise_estimates(hs);
    const double grad_norm = mhe_cost_gradient(hs, omega).norm();
    const double bound = 1e-8 * (1.0 + hs.B.norm());
    if (grad_norm >= bound) {
      res.max_residual = 2.0;
      res.notes.push_back("gradient norm " + std::to_string(grad_norm) + " exceeds bound");
    }
    const double best = mhe_cost_from_noise(hs, omega);
    for (int i = 0; i < perturbations_per_trial; ++i) {
      const Eigen::VectorXd delta =
          1e-3 * (1.0 + omega.norm()) * gaussian_vector(rng, omega.size());
      if (mhe_cost_from_noise(hs, omega + delta) <= best) {
        res.max_residual = 2.0;
        res.notes.push_back("perturbation produced a non-larger cost");
      }
    }
    ++res.trials;
  }
  res.finish();
  return res;
}

/// Filter-equivalence comparison on a synthetic GNSS scenario: per-epoch
/// position differences between the extended Kalman filter and the window
/// estimator for each horizon size.
struct Theorem1GnssResult {
  std::vector<int> horizons;
  std::vector<std::vector<double>> position_diff_m;  ///< [horizon index][epoch]
  double max_position_diff_m = 0.0;
  double max_prediction_diff_m = 0.0;
  double elapsed_s = 0.0;
};

inline Theorem1GnssResult theorem1_gnss_comparison(const ScenarioConfig& cfg,
                                                   std::span<const int> horizons,
                                                   const gnss::ProcessNoiseConfig& pn = {},
                                                   double p0_diag = 0.05) {
  const auto t_begin = std::chrono::steady_clock::now();
  const Scenario sc = generate_scenario(cfg);

  Theorem1GnssResult out;
  out.horizons.assign(horizons.begin(), horizons.end());
  const EstimateTrace ekf =
      run_gnss_estimator(EstimatorKind::kEkf, 0, sc.epochs, pn, p0_diag);
  for (const int n : horizons) {
    const EstimateTrace mhe =
        run_gnss_estimator(EstimatorKind::kMhe, n, sc.epochs, pn, p0_diag);
    std::vector<double> diffs(sc.epochs.size());
    for (std::size_t k = 0; k < sc.epochs.size(); ++k) {
      diffs[k] = (gnss::position(mhe.filtered[k]) - gnss::position(ekf.filtered[k])).norm();
      out.max_position_diff_m = std::max(out.max_position_diff_m, diffs[k]);
      const double pred_diff =
          (gnss::position(mhe.predicted[k]) - gnss::position(ekf.predicted[k])).norm();
      out.max_prediction_diff_m = std::max(out.max_prediction_diff_m, pred_diff);
    }
    out.position_diff_m.push_back(std::move(diffs));
  }
  out.elapsed_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
  return out;
}

}  // namespace hest
