#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hest/errors.hpp"
#include "hest/gnss.hpp"
#include "hest/metrics.hpp"
#include "hest/rng.hpp"

namespace hest {

enum class TrajectoryKind { kStatic, kConstantVelocity, kWaypointTurns };

inline std::string to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::kStatic: return "static";
    case TrajectoryKind::kConstantVelocity: return "constant_velocity";
    case TrajectoryKind::kWaypointTurns: return "waypoint_turns";
  }
  return "unknown";
}

struct ScenarioConfig {
  int n_epochs = 100;
  double Ts = 1.0;       ///< sampling interval [s]
  int n_sats = 8;
  double sigma_pr = 3.0;   ///< pseudorange noise 1-sigma [m]
  double sigma_prr = 0.3;  ///< rate noise 1-sigma [m/s]
  TrajectoryKind trajectory = TrajectoryKind::kConstantVelocity;
  std::uint64_t seed = 1;
  double clock_drift = 0.1;  ///< receiver clock drift [m/s]
  bool orbiting_sats = false;  ///< move satellites on circular orbits instead of keeping them static
};

struct Scenario {
  std::vector<gnss::NavState> truth;
  std::vector<gnss::Epoch> epochs;
};

namespace detail {

// reference site near Palo Alto; the seed governs noise and constellation jitter
inline const Geodetic kSiteGeodetic{37.4275, -122.1697, 30.0};
inline constexpr double kSatShellRadius = 2.656e7;  // m, geocentric
inline constexpr double kEarthMu = 3.986004418e14;  // m^3/s^2
inline constexpr double kInitialClockBias = 250.0;  // m

inline double gdop(const std::vector<Eigen::Vector3d>& sat_pos, const Eigen::Vector3d& user) {
  const int n = static_cast<int>(sat_pos.size());
  Eigen::MatrixXd g(n, 4);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d los = (user - sat_pos[i]).normalized();
    g.row(i) << los.x(), los.y(), los.z(), 1.0;
  }
  const Eigen::Matrix4d m = g.transpose() * g;
  Eigen::FullPivLU<Eigen::Matrix4d> lu(m);
  if (!lu.isInvertible()) return std::numeric_limits<double>::infinity();
  return std::sqrt(lu.inverse().trace());
}

/// Satellite position on the orbital shell along a line of sight from the site.
inline Eigen::Vector3d sat_on_shell(const Eigen::Vector3d& site, const Eigen::Vector3d& los_unit) {
  const double pu = site.dot(los_unit);
  const double disc = pu * pu + kSatShellRadius * kSatShellRadius - site.squaredNorm();
  return site + (-pu + std::sqrt(disc)) * los_unit;
}

inline std::vector<Eigen::Vector3d> place_constellation(Xoshiro256pp& rng, int n_sats,
                                                        const Eigen::Vector3d& site,
                                                        const Eigen::Matrix3d& ned_to_ecef) {
  static constexpr double kElevationsDeg[] = {15.0, 35.0, 55.0, 75.0};
  std::vector<Eigen::Vector3d> sats(n_sats);
  for (int i = 0; i < n_sats; ++i) {
    // one high satellite pins the vertical; the rest spread in azimuth rings
    const double el_deg = (i == 0) ? 82.0 + rng.uniform(-3.0, 3.0)
                                   : kElevationsDeg[(i - 1) % 4] + rng.uniform(-4.0, 4.0);
    const double az_deg = 360.0 * i / n_sats + rng.uniform(-10.0, 10.0);
    const double el = deg2rad(el_deg);
    const double az = deg2rad(az_deg);
    const Eigen::Vector3d ned(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                              -std::sin(el));
    sats[i] = sat_on_shell(site, ned_to_ecef * ned);
  }
  return sats;
}

}  // namespace detail

/// Deterministic synthetic GNSS scenario: a ground-truth trajectory, a
/// constellation on the orbital shell with a dilution-of-precision check, and
/// epochs whose measurements follow the pseudorange/rate model with additive
/// Gaussian noise of the configured sigmas. The same seed reproduces the same
/// geometry regardless of the noise levels (the noise stream is always drawn).
inline Scenario generate_scenario(const ScenarioConfig& cfg) {
  if (cfg.n_sats < 4) throw ContractViolation("generate_scenario: need at least 4 satellites");
  if (cfg.n_epochs < 2) throw ContractViolation("generate_scenario: need at least 2 epochs");
  if (cfg.sigma_pr < 0.0 || cfg.sigma_prr < 0.0)
    throw ContractViolation("generate_scenario: noise sigmas must be >= 0");
  if (!(cfg.Ts > 0.0)) throw ContractViolation("generate_scenario: Ts must be positive");

  Xoshiro256pp rng(cfg.seed);
  const Eigen::Vector3d site = geodetic_to_ecef(detail::kSiteGeodetic);
  const Eigen::Matrix3d ned_to_ecef = ned_rotation(detail::kSiteGeodetic).transpose();

  Scenario sc;
  sc.truth.resize(cfg.n_epochs);

  // ground-truth trajectory (no randomness: the seed only affects geometry jitter and noise)
  Eigen::Vector3d pos = site;
  Eigen::Vector3d vel = Eigen::Vector3d::Zero();
  double heading = 0.0;  // rad, from north
  double clock_bias = detail::kInitialClockBias;
  for (int k = 0; k < cfg.n_epochs; ++k) {
    switch (cfg.trajectory) {
      case TrajectoryKind::kStatic:
        vel.setZero();
        break;
      case TrajectoryKind::kConstantVelocity:
        vel = ned_to_ecef * Eigen::Vector3d(12.0, 5.0, 0.0);
        break;
      case TrajectoryKind::kWaypointTurns:
        if (k > 0 && k % 60 == 0) heading += M_PI / 2.0;
        vel = ned_to_ecef * Eigen::Vector3d(12.0 * std::cos(heading), 12.0 * std::sin(heading), 0.0);
        break;
    }
    gnss::NavState x = gnss::NavState::Zero();
    gnss::set_position(x, pos);
    gnss::set_velocity(x, vel);
    x[gnss::kIdxClkBias] = clock_bias;
    x[gnss::kIdxClkDrift] = cfg.clock_drift;
    sc.truth[k] = x;
    pos += vel * cfg.Ts;
    clock_bias += cfg.clock_drift * cfg.Ts;
  }

  // constellation with observability check at both ends of the trajectory
  std::vector<Eigen::Vector3d> sat_pos;
  bool placed = false;
  for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
    sat_pos = detail::place_constellation(rng, cfg.n_sats, site, ned_to_ecef);
    const double g0 = detail::gdop(sat_pos, gnss::position(sc.truth.front()));
    const double g1 = detail::gdop(sat_pos, gnss::position(sc.truth.back()));
    placed = std::max(g0, g1) < 10.0;
  }
  if (!placed)
    throw NumericError("generate_scenario: unobservable geometry after 100 placement attempts");

  std::vector<Eigen::Vector3d> sat_vel(cfg.n_sats, Eigen::Vector3d::Zero());
  std::vector<Eigen::Vector3d> orbit_axis(cfg.n_sats, Eigen::Vector3d::UnitZ());
  if (cfg.orbiting_sats) {
    for (int i = 0; i < cfg.n_sats; ++i) {
      const Eigen::Vector3d radial = sat_pos[i].normalized();
      Eigen::Vector3d tangent = Eigen::Vector3d::UnitZ().cross(radial);
      if (tangent.norm() < 1e-6) tangent = Eigen::Vector3d::UnitX().cross(radial);
      tangent.normalize();
      sat_vel[i] = std::sqrt(detail::kEarthMu / detail::kSatShellRadius) * tangent;
      orbit_axis[i] = radial.cross(tangent).normalized();
    }
  }

  const std::int64_t t0_ms = 1700000000000LL;
  const double rate = cfg.orbiting_sats
                          ? std::sqrt(detail::kEarthMu / detail::kSatShellRadius) /
                                detail::kSatShellRadius
                          : 0.0;  // rad/s
  sc.epochs.resize(cfg.n_epochs);
  for (int k = 0; k < cfg.n_epochs; ++k) {
    gnss::Epoch& epoch = sc.epochs[k];
    epoch.t_ms = t0_ms + static_cast<std::int64_t>(std::llround(k * cfg.Ts * 1000.0));
    epoch.Ts = (k == 0) ? 0.0 : cfg.Ts;
    epoch.sats.resize(cfg.n_sats);
    for (int i = 0; i < cfg.n_sats; ++i) {
      gnss::SatelliteObservation& obs = epoch.sats[i];
      obs.sat_id = "S" + std::to_string(i + 1);
      if (cfg.orbiting_sats) {
        const Eigen::AngleAxisd rot(rate * k * cfg.Ts, orbit_axis[i]);
        obs.sat_pos = rot * sat_pos[i];
        obs.sat_vel = rot * sat_vel[i];
      } else {
        obs.sat_pos = sat_pos[i];
        obs.sat_vel = sat_vel[i];
      }
      // recorded sigmas stay positive so noiseless epochs remain usable weights
      obs.sigma_pr = std::max(cfg.sigma_pr, 1e-3);
      obs.sigma_prr = std::max(cfg.sigma_prr, 1e-4);
      obs.pr = gnss::predict_pseudorange(sc.truth[k], obs) + cfg.sigma_pr * rng.gaussian();
      obs.prr = gnss::predict_rate(sc.truth[k], obs) + cfg.sigma_prr * rng.gaussian();
    }
  }
  return sc;
}

/// Ground truth as geodetic fixes, ready for scoring or CSV emission.
inline std::vector<TruthFix> truth_fixes(const Scenario& sc) {
  std::vector<TruthFix> fixes(sc.truth.size());
  for (std::size_t k = 0; k < sc.truth.size(); ++k) {
    const Geodetic g = ecef_to_geodetic(gnss::position(sc.truth[k]));
    fixes[k] = TruthFix{sc.epochs[k].t_ms, g.lat_deg, g.lon_deg, g.alt_m};
  }
  return fixes;
}

}  // namespace hest
