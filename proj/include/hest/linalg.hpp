#pragma once

#include <Eigen/Dense>
#include <string>

#include "hest/errors.hpp"

namespace hest {

/// Diagnostics from one normal-equation solve.
struct SolveInfo {
  bool jitter_retry = false;        ///< factorization needed a diagonal jitter
  bool condition_warning = false;   ///< 1-norm condition estimate exceeded the threshold
  double condition_estimate = 0.0;  ///< cheap 1-norm condition estimate
};

/// Condition-estimate threshold above which solves record a warning (never an error).
inline constexpr double kConditionWarnThreshold = 1e12;

namespace detail {

inline void require_symmetric(const Eigen::MatrixXd& m, const std::string& name) {
  if (m.rows() != m.cols()) throw ContractViolation(name + " is not square");
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw NumericError(name + " is not symmetric");
}

}  // namespace detail

/// (M + M^T) / 2. Exact bitwise symmetry of the result.
inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

/// True iff m is symmetric positive definite (Cholesky succeeds).
inline bool is_spd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + m.cwiseAbs().maxCoeff()))
    return false;
  return Eigen::LLT<Eigen::MatrixXd>(m).info() == Eigen::Success;
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
/// Throws NumericError naming `name` when the factorization fails.
inline Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const std::string& name) {
  detail::require_symmetric(m, name);
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw NumericError(name + " is not positive definite");
  return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

namespace detail {

/// Hager's 1-norm estimate of ||M^-1||_1 from a factorization's solve.
template <typename Factorization>
double inverse_norm1_estimate(const Factorization& fact, Eigen::Index n) {
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  double estimate = 0.0;
  for (int iter = 0; iter < 5; ++iter) {
    Eigen::VectorXd y = fact.solve(x);
    if (!y.allFinite()) return std::numeric_limits<double>::infinity();
    estimate = y.lpNorm<1>();
    Eigen::VectorXd xi(n);
    for (Eigen::Index i = 0; i < n; ++i) xi[i] = (y[i] >= 0.0) ? 1.0 : -1.0;
    // symmetric system: the transpose solve is the same solve
    Eigen::VectorXd z = fact.solve(xi);
    if (!z.allFinite()) return std::numeric_limits<double>::infinity();
    Eigen::Index j;
    const double zmax = z.cwiseAbs().maxCoeff(&j);
    if (zmax <= z.dot(x)) break;
    x.setZero();
    x[j] = 1.0;
  }
  return estimate;
}

}  // namespace detail

/// Solves the symmetric positive (semi)definite system M x = rhs with a robust
/// Cholesky factorization. On factorization failure retries once with a
/// diagonal jitter of 1e-12 * trace / dim, recording the retry; a condition
/// estimate above kConditionWarnThreshold records a warning, never an error.
inline Eigen::MatrixXd solve_normal_equations(const Eigen::MatrixXd& m,
                                              const Eigen::MatrixXd& rhs,
                                              SolveInfo* info = nullptr,
                                              const std::string& context = "normal equations") {
  if (m.rows() != m.cols() || rhs.rows() != m.rows())
    throw ContractViolation(context + ": dimension mismatch");
  Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
  bool retried = false;
  if (ldlt.info() != Eigen::Success) {
    const double jitter = 1e-12 * m.trace() / static_cast<double>(m.rows());
    Eigen::MatrixXd jittered = m;
    jittered.diagonal().array() += jitter;
    ldlt.compute(jittered);
    retried = true;
    if (ldlt.info() != Eigen::Success)
      throw NumericError(context + ": factorization failed even with jitter");
  }
  Eigen::MatrixXd x = ldlt.solve(rhs);
  if (!x.allFinite()) throw NumericError(context + ": singular system (non-finite solution)");
  if (info) {
    info->jitter_retry = retried;
    const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
    info->condition_estimate = norm1 * detail::inverse_norm1_estimate(ldlt, m.rows());
    info->condition_warning = !(info->condition_estimate < kConditionWarnThreshold);
  }
  return x;
}

}  // namespace hest
