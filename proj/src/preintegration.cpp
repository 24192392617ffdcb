#include "ginit/preintegration.hpp"

#include "ginit/errors.hpp"
#include "ginit/manifold.hpp"

namespace ginit {

Mat3 PreintegratedImu::delta_R_at(const Vec3& gyro_bias) const {
  return delta_R * exp_so3(dR_dbg * (gyro_bias - gyro_bias_ref));
}

Vec3 PreintegratedImu::delta_v_at(const Vec3& gyro_bias) const {
  return delta_v + dv_dbg * (gyro_bias - gyro_bias_ref);
}

Vec3 PreintegratedImu::delta_p_at(const Vec3& gyro_bias) const {
  return delta_p + dp_dbg * (gyro_bias - gyro_bias_ref);
}

PreintegratedImu integrate(std::span<const ImuSample> samples,
                           const ImuNoiseModel& noise,
                           const Vec3& gyro_bias,
                           const Vec3& accel_bias) {
  if (samples.size() < 2) {
    throw EmptyStream("integrate: need at least two samples to define an interval");
  }
  for (std::size_t k = 1; k < samples.size(); ++k) {
    if (!(samples[k].timestamp > samples[k - 1].timestamp)) {
      throw NonMonotonicTimestamps("integrate: timestamps must be strictly increasing");
    }
  }

  Eigen::Matrix<double, 6, 6> sigma_eta = Eigen::Matrix<double, 6, 6>::Zero();
  sigma_eta.topLeftCorner<3, 3>() = noise.gyro_cov;
  sigma_eta.bottomRightCorner<3, 3>() = noise.accel_cov;

  PreintegratedImu out;
  out.gyro_bias_ref = gyro_bias;

  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double dt = (k + 1 < samples.size())
                          ? samples[k + 1].timestamp - samples[k].timestamp
                          : samples[k].timestamp - samples[k - 1].timestamp;
    const Vec3 w = samples[k].gyro - gyro_bias;
    const Vec3 a = samples[k].accel - accel_bias;
    const Mat3 step_R = exp_so3(w * dt);
    const Mat3 Jr = right_jacobian_so3(w * dt);
    const Mat3 a_hat = hat(a);

    // noise propagation, evaluated at the pre-update increments
    Mat9 A = Mat9::Identity();
    A.block<3, 3>(0, 0) = step_R.transpose();
    A.block<3, 3>(3, 0) = -out.delta_R * a_hat * dt;
    A.block<3, 3>(6, 0) = -0.5 * out.delta_R * a_hat * dt * dt;
    A.block<3, 3>(6, 3) = Mat3::Identity() * dt;

    Mat96 B = Mat96::Zero();
    B.block<3, 3>(0, 0) = Jr * dt;
    B.block<3, 3>(3, 3) = out.delta_R * dt;
    B.block<3, 3>(6, 3) = 0.5 * out.delta_R * dt * dt;

    out.cov = A * out.cov * A.transpose() + B * sigma_eta * B.transpose();

    // bias Jacobians (gyro only; the accelerometer bias is a fixed input)
    out.dp_dbg += out.dv_dbg * dt - 0.5 * out.delta_R * a_hat * out.dR_dbg * dt * dt;
    out.dv_dbg += -out.delta_R * a_hat * out.dR_dbg * dt;
    out.dR_dbg = step_R.transpose() * out.dR_dbg - Jr * dt;

    // increments
    out.delta_p += out.delta_v * dt + 0.5 * out.delta_R * a * dt * dt;
    out.delta_v += out.delta_R * a * dt;
    out.delta_R = out.delta_R * step_R;
    out.delta_t += dt;
  }

  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

PreintegratedImu compose(const PreintegratedImu& first, const PreintegratedImu& second) {
  PreintegratedImu out;
  out.gyro_bias_ref = first.gyro_bias_ref;
  out.delta_t = first.delta_t + second.delta_t;
  out.delta_p = first.delta_p + first.delta_v * second.delta_t +
                first.delta_R * second.delta_p;
  out.delta_v = first.delta_v + first.delta_R * second.delta_v;
  out.delta_R = first.delta_R * second.delta_R;
  return out;
}

Vec3 gravity_from_increment(const PreintegratedImu& pre, const Mat3& R_i,
                            const Vec3& v_i, const Vec3& v_j) {
  return (v_j - v_i) / pre.delta_t - R_i * pre.delta_v / pre.delta_t;
}

}  // namespace ginit
