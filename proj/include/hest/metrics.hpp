#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hest/errors.hpp"
#include "hest/ingest.hpp"

namespace hest {

// WGS-84 ellipsoid
inline constexpr double kWgs84A = 6378137.0;
inline constexpr double kWgs84F = 1.0 / 298.257223563;
inline constexpr double kWgs84B = kWgs84A * (1.0 - kWgs84F);
inline constexpr double kWgs84E2 = kWgs84F * (2.0 - kWgs84F);

struct Geodetic {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  double alt_m = 0.0;  ///< ellipsoidal
};

inline double deg2rad(double d) { return d * M_PI / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / M_PI; }

inline Eigen::Vector3d geodetic_to_ecef(const Geodetic& g) {
  const double lat = deg2rad(g.lat_deg);
  const double lon = deg2rad(g.lon_deg);
  const double slat = std::sin(lat);
  const double clat = std::cos(lat);
  const double n = kWgs84A / std::sqrt(1.0 - kWgs84E2 * slat * slat);
  return {(n + g.alt_m) * clat * std::cos(lon), (n + g.alt_m) * clat * std::sin(lon),
          (n * (1.0 - kWgs84E2) + g.alt_m) * slat};
}

/// Iterative geodetic latitude solution, converged below 1e-12 rad.
inline Geodetic ecef_to_geodetic(const Eigen::Vector3d& p) {
  if (p.norm() <= 1e5)
    throw ContractViolation("ecef_to_geodetic: point too close to the geocenter");
  const double pxy = std::hypot(p.x(), p.y());
  Geodetic g;
  if (pxy < 1e-9) {
    // polar axis; longitude conventionally 0
    g.lat_deg = (p.z() >= 0.0) ? 90.0 : -90.0;
    g.lon_deg = 0.0;
    g.alt_m = std::abs(p.z()) - kWgs84B;
    return g;
  }
  g.lon_deg = rad2deg(std::atan2(p.y(), p.x()));
  double lat = std::atan2(p.z(), pxy * (1.0 - kWgs84E2));
  double alt = 0.0;
  for (int iter = 0; iter < 50; ++iter) {
    const double slat = std::sin(lat);
    const double n = kWgs84A / std::sqrt(1.0 - kWgs84E2 * slat * slat);
    alt = pxy / std::cos(lat) - n;
    const double next = std::atan2(p.z(), pxy * (1.0 - kWgs84E2 * n / (n + alt)));
    const double delta = std::abs(next - lat);
    lat = next;
    if (delta < 1e-12) break;
  }
  g.lat_deg = rad2deg(lat);
  g.alt_m = alt;
  return g;
}

/// Rows of the returned matrix are the local north, east and down axes in ECEF.
inline Eigen::Matrix3d ned_rotation(const Geodetic& ref) {
  const double lat = deg2rad(ref.lat_deg);
  const double lon = deg2rad(ref.lon_deg);
  const double sl = std::sin(lat), cl = std::cos(lat);
  const double so = std::sin(lon), co = std::cos(lon);
  Eigen::Matrix3d r;
  r << -sl * co, -sl * so, cl,  // north
      -so, co, 0.0,             // east
      -cl * co, -cl * so, -sl;  // down
  return r;
}

inline Eigen::Vector3d ecef_to_ned(const Eigen::Vector3d& p, const Geodetic& ref) {
  return ned_rotation(ref) * (p - geodetic_to_ecef(ref));
}

/// Inverse geodesic distance on the WGS-84 ellipsoid (Vincenty's iteration).
/// Near-antipodal pairs where the fixed-point iteration stalls fall back to a
/// bounded bisection on the auxiliary-sphere longitude; such results are
/// flagged approximate.
inline double vincenty_distance(double lat1_deg, double lon1_deg, double lat2_deg,
                                double lon2_deg, bool* approximate = nullptr) {
  if (approximate) *approximate = false;
  if (lat1_deg < -90.0 || lat1_deg > 90.0 || lat2_deg < -90.0 || lat2_deg > 90.0)
    throw ContractViolation("vincenty_distance: latitude out of range");

  // mirror symmetry in longitude: work with |dL| in [0, pi]
  double dl = std::fmod(lon2_deg - lon1_deg, 360.0);
  if (dl > 180.0) dl -= 360.0;
  if (dl < -180.0) dl += 360.0;
  const double big_l = std::abs(deg2rad(dl));

  const double u1 = std::atan((1.0 - kWgs84F) * std::tan(deg2rad(lat1_deg)));
  const double u2 = std::atan((1.0 - kWgs84F) * std::tan(deg2rad(lat2_deg)));
  const double su1 = std::sin(u1), cu1 = std::cos(u1);
  const double su2 = std::sin(u2), cu2 = std::cos(u2);

  struct Angles {
    double sin_sigma = 0, cos_sigma = 1, sigma = 0, cos_sq_alpha = 1, cos_2sm = 0;
  };
  auto update = [&](double lam, Angles& an) -> double {
    const double sl = std::sin(lam), cl = std::cos(lam);
    an.sin_sigma = std::hypot(cu2 * sl, cu1 * su2 - su1 * cu2 * cl);
    an.cos_sigma = su1 * su2 + cu1 * cu2 * cl;
    an.sigma = std::atan2(an.sin_sigma, an.cos_sigma);
    const double sin_alpha = an.sin_sigma != 0.0 ? cu1 * cu2 * sl / an.sin_sigma : 0.0;
    an.cos_sq_alpha = 1.0 - sin_alpha * sin_alpha;
    an.cos_2sm =
        an.cos_sq_alpha != 0.0 ? an.cos_sigma - 2.0 * su1 * su2 / an.cos_sq_alpha : 0.0;
    const double c = kWgs84F / 16.0 * an.cos_sq_alpha *
                     (4.0 + kWgs84F * (4.0 - 3.0 * an.cos_sq_alpha));
    return big_l + (1.0 - c) * kWgs84F * sin_alpha *
                       (an.sigma + c * an.sin_sigma *
                                       (an.cos_2sm + c * an.cos_sigma *
                                                         (-1.0 + 2.0 * an.cos_2sm * an.cos_2sm)));
  };

  Angles an;
  double lam = big_l;
  bool converged = false;
  for (int iter = 0; iter < 200; ++iter) {
    const double next = update(lam, an);
    if (an.sin_sigma == 0.0 && an.cos_sigma > 0.0) return 0.0;  // coincident points
    if (std::abs(next - lam) < 1e-12) {
      lam = next;
      converged = true;
      break;
    }
    lam = next;
  }
  if (!converged) {
    // bounded bisection on g(lam) = update(lam) - lam over [big_l, pi]
    if (approximate) *approximate = true;
    Angles tmp;
    double lo = big_l, hi = M_PI;
    double glo = update(lo, tmp) - lo;
    double ghi = update(hi, tmp) - hi;
    if (glo * ghi <= 0.0) {
      for (int iter = 0; iter < 80; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double gmid = update(mid, tmp) - mid;
        if (glo * gmid <= 0.0) {
          hi = mid;
          ghi = gmid;
        } else {
          lo = mid;
          glo = gmid;
        }
      }
      lam = 0.5 * (lo + hi);
    } else {
      lam = M_PI;  // no bracket: evaluate at the boundary
    }
    update(lam, an);
  }

  const double usq = an.cos_sq_alpha * (kWgs84A * kWgs84A - kWgs84B * kWgs84B) /
                     (kWgs84B * kWgs84B);
  const double aa =
      1.0 + usq / 16384.0 * (4096.0 + usq * (-768.0 + usq * (320.0 - 175.0 * usq)));
  const double bb = usq / 1024.0 * (256.0 + usq * (-128.0 + usq * (74.0 - 47.0 * usq)));
  const double dsigma =
      bb * an.sin_sigma *
      (an.cos_2sm +
       bb / 4.0 *
           (an.cos_sigma * (-1.0 + 2.0 * an.cos_2sm * an.cos_2sm) -
            bb / 6.0 * an.cos_2sm * (-3.0 + 4.0 * an.sin_sigma * an.sin_sigma) *
                (-3.0 + 4.0 * an.cos_2sm * an.cos_2sm)));
  return kWgs84B * aa * (an.sigma - dsigma);
}

/// One timestamped position estimate entering the scoring.
struct EpochEstimate {
  std::int64_t t_ms = 0;
  Eigen::Vector3d ecef = Eigen::Vector3d::Zero();
};

struct PerEpochScore {
  std::int64_t t_ms = 0;
  Eigen::Vector3d est_ecef = Eigen::Vector3d::Zero();
  Geodetic est_geodetic;
  Eigen::Vector3d ned_error = Eigen::Vector3d::Zero();  ///< north, east, down [m]
  double horizontal_error_m = 0.0;
  double vertical_error_m = 0.0;
};

struct RunSummary {
  std::string estimator_name;
  int horizon = 0;
  int n_epochs = 0;     ///< matched estimate/truth pairs
  int n_unmatched = 0;  ///< estimates without truth within the pairing window
  double horizontal_mean_m = 0.0;
  double vertical_rmse_m = 0.0;
};

struct RunReport {
  std::vector<PerEpochScore> per_epoch;
  RunSummary summary;
};

inline constexpr double kPairingToleranceMs = 500.0;

/// Pairs estimates to truth by nearest timestamp within the pairing window,
/// then scores horizontal errors with the geodesic distance and vertical
/// errors as ellipsoidal height differences.
inline RunReport score_run(std::span<const EpochEstimate> estimates,
                           std::span<const TruthFix> truth,
                           double pairing_tolerance_ms = kPairingToleranceMs) {
  RunReport report;
  if (truth.empty()) throw NumericError("score_run: empty truth sequence");
  double horiz_sum = 0.0;
  double vert_sq_sum = 0.0;
  std::size_t cursor = 0;
  for (const auto& est : estimates) {
    while (cursor + 1 < truth.size() &&
           std::llabs(truth[cursor + 1].t_ms - est.t_ms) <= std::llabs(truth[cursor].t_ms - est.t_ms))
      ++cursor;
    const TruthFix& fix = truth[cursor];
    if (std::llabs(fix.t_ms - est.t_ms) > pairing_tolerance_ms) {
      ++report.summary.n_unmatched;
      continue;
    }
    PerEpochScore row;
    row.t_ms = est.t_ms;
    row.est_ecef = est.ecef;
    row.est_geodetic = ecef_to_geodetic(est.ecef);
    const Geodetic truth_geo{fix.lat_deg, fix.lon_deg, fix.alt_m};
    row.ned_error = ecef_to_ned(est.ecef, truth_geo);
    row.horizontal_error_m = vincenty_distance(row.est_geodetic.lat_deg, row.est_geodetic.lon_deg,
                                               fix.lat_deg, fix.lon_deg);
    row.vertical_error_m = row.est_geodetic.alt_m - fix.alt_m;
    horiz_sum += row.horizontal_error_m;
    vert_sq_sum += row.vertical_error_m * row.vertical_error_m;
    report.per_epoch.push_back(std::move(row));
  }
  const int n = static_cast<int>(report.per_epoch.size());
  if (n == 0) throw NumericError("score_run: no estimate matched truth within the pairing window");
  report.summary.n_epochs = n;
  report.summary.horizontal_mean_m = horiz_sum / n;
  report.summary.vertical_rmse_m = std::sqrt(vert_sq_sum / n);
  return report;
}

}  // namespace hest
