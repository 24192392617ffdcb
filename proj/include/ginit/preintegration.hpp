#pragma once

#include <span>
#include <vector>

#include "ginit/types.hpp"

namespace ginit {

/// Relative motion increments accumulated from raw IMU samples between two
/// consecutive GNSS epochs, with the propagated 9x9 covariance ordered
/// [delta_phi; delta_v; delta_p] and the gyro-bias Jacobians required to
/// re-linearize the increments without re-integration.
struct PreintegratedImu {
  Mat3 delta_R = Mat3::Identity();
  Vec3 delta_v = Vec3::Zero();
  Vec3 delta_p = Vec3::Zero();
  double delta_t = 0.0;
  Mat9 cov = Mat9::Zero();

  Vec3 gyro_bias_ref = Vec3::Zero();  // linearization point of delta_* in the bias
  Mat3 dR_dbg = Mat3::Zero();
  Mat3 dv_dbg = Mat3::Zero();
  Mat3 dp_dbg = Mat3::Zero();

  /// First-order bias-corrected increments at a bias estimate.
  Mat3 delta_R_at(const Vec3& gyro_bias) const;
  Vec3 delta_v_at(const Vec3& gyro_bias) const;
  Vec3 delta_p_at(const Vec3& gyro_bias) const;
};

/// Folds an ordered sample stream into motion increments, propagating the noise
/// covariance Sigma <- A Sigma A^T + B Sigma_eta B^T from Sigma = 0. The sample
/// interval comes from consecutive timestamps; the trailing sample reuses the
/// previous interval. Throws EmptyStream (fewer than two samples) or
/// NonMonotonicTimestamps.
PreintegratedImu integrate(std::span<const ImuSample> samples,
                           const ImuNoiseModel& noise,
                           const Vec3& gyro_bias = Vec3::Zero(),
                           const Vec3& accel_bias = Vec3::Zero());

/// Composes two consecutive preintegrations (increments only; used by the
/// split/compose consistency checks).
PreintegratedImu compose(const PreintegratedImu& first, const PreintegratedImu& second);

/// Gravity estimate g* = (v_j - v_i)/dt - R_i * delta_v / dt.
Vec3 gravity_from_increment(const PreintegratedImu& pre, const Mat3& R_i,
                            const Vec3& v_i, const Vec3& v_j);

}  // namespace ginit
