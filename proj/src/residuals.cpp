#include "ginit/residuals.hpp"

#include "ginit/errors.hpp"
#include "ginit/manifold.hpp"

namespace ginit {

MatX inverse_psd(const MatX& m, double floor) {
  Eigen::SelfAdjointEigenSolver<MatX> eig(0.5 * (m + m.transpose()));
  VecX inv_vals = eig.eigenvalues();
  for (int k = 0; k < inv_vals.size(); ++k) {
    inv_vals[k] = 1.0 / std::max(inv_vals[k], floor);
  }
  return eig.eigenvectors() * inv_vals.asDiagonal() * eig.eigenvectors().transpose();
}

ResidualBlock r_angular_velocity(const KeyframeState& state_k, int k,
                                 const Vec3& bias, const Vec3& gyro_meas,
                                 const Mat3& gyro_cov) {
  ResidualBlock block;
  block.value = state_k.omega - (gyro_meas - bias);
  block.weight = inverse_psd(gyro_cov);
  block.jacobians[{VarType::Omega, k}] = Mat3::Identity();
  block.jacobians[{VarType::GyroBias, 0}] = Mat3::Identity();
  return block;
}

ResidualBlock r_preint_rotation(const KeyframeState& state_i, int i,
                                const KeyframeState& state_j, int j,
                                const PreintegratedImu& pre, const Vec3& bias) {
  const Vec3 db = bias - pre.gyro_bias_ref;
  const Mat3 delta_R = pre.delta_R_at(bias);
  const Vec3 r = log_so3(delta_R.transpose() * state_i.rotation.transpose() *
                         state_j.rotation);
  const Mat3 jr_inv = right_jacobian_inv_so3(r);

  ResidualBlock block;
  block.value = r;
  block.weight = inverse_psd(pre.cov.topLeftCorner<3, 3>());
  block.jacobians[{VarType::Rotation, j}] = jr_inv;
  block.jacobians[{VarType::Rotation, i}] =
      -jr_inv * state_j.rotation.transpose() * state_i.rotation;
  // bias enters through deltaR(b) = deltaR * Exp(dR_dbg db)
  const Mat3 m = pre.delta_R.transpose() * state_i.rotation.transpose() *
                 state_j.rotation;
  block.jacobians[{VarType::GyroBias, 0}] =
      -jr_inv * m.transpose() * right_jacobian_so3(-pre.dR_dbg * db) * pre.dR_dbg;
  return block;
}

ResidualBlock r_preint_velocity(const KeyframeState& state_i, int i,
                                const KeyframeState& state_j, int j,
                                const PreintegratedImu& pre, const Vec3& bias,
                                const Vec3& gravity_dir, double gravity_mag) {
  const double dt = pre.delta_t;
  const Vec3 gravity = gravity_mag * gravity_dir;
  const Mat3 Rit = state_i.rotation.transpose();
  const Vec3 u = state_j.velocity - state_i.velocity - gravity * dt;

  ResidualBlock block;
  block.value = Rit * u - pre.delta_v_at(bias);
  block.weight = inverse_psd(pre.cov.block<3, 3>(3, 3));
  block.jacobians[{VarType::Rotation, i}] = hat(Rit * u);
  block.jacobians[{VarType::Velocity, i}] = -Rit;
  block.jacobians[{VarType::Velocity, j}] = Rit;
  block.jacobians[{VarType::GravityDir, 0}] =
      -gravity_mag * dt * Rit * s2_tangent_basis(gravity_dir);
  block.jacobians[{VarType::GyroBias, 0}] = -pre.dv_dbg;
  return block;
}

ResidualBlock r_preint_position(const KeyframeState& state_i, int i,
                                const KeyframeState& state_j, int j,
                                const PreintegratedImu& pre, const Vec3& bias,
                                const Vec3& gravity_dir, double gravity_mag) {
  const double dt = pre.delta_t;
  const Vec3 gravity = gravity_mag * gravity_dir;
  const Mat3 Rit = state_i.rotation.transpose();
  const Vec3 u = state_j.position - state_i.position - state_i.velocity * dt -
                 0.5 * gravity * dt * dt;

  ResidualBlock block;
  block.value = Rit * u - pre.delta_p_at(bias);
  block.weight = inverse_psd(pre.cov.block<3, 3>(6, 6));
  block.jacobians[{VarType::Rotation, i}] = hat(Rit * u);
  block.jacobians[{VarType::Position, i}] = -Rit;
  block.jacobians[{VarType::Position, j}] = Rit;
  block.jacobians[{VarType::Velocity, i}] = -Rit * dt;
  block.jacobians[{VarType::GravityDir, 0}] =
      -0.5 * gravity_mag * dt * dt * Rit * s2_tangent_basis(gravity_dir);
  block.jacobians[{VarType::GyroBias, 0}] = -pre.dp_dbg;
  return block;
}

ResidualBlock r_gps_global(const KeyframeState& state_k, int k,
                           const GnssMeasurement& meas, const Pose& extrinsic) {
  ResidualBlock block;
  block.value = extrinsic.apply(state_k.position) - meas.position;
  block.weight = inverse_psd(meas.cov);
  block.jacobians[{VarType::Position, k}] = extrinsic.rotation;
  // right perturbation T <- T * Exp([dt; dw])
  Eigen::Matrix<double, 3, 6> j_ext;
  j_ext.leftCols<3>() = extrinsic.rotation;
  j_ext.rightCols<3>() = -extrinsic.rotation * hat(state_k.position);
  block.jacobians[{VarType::Extrinsic, 0}] = j_ext;
  return block;
}

ResidualBlock r_gps_relative(const KeyframeState& state_j, int j,
                             const KeyframeState& state_k, int k,
                             const GnssMeasurement& meas_j,
                             const GnssMeasurement& meas_k) {
  if (j == k) {
    throw IndexOutOfRange("r_gps_relative: pair must use distinct keyframes");
  }
  ResidualBlock block;
  block.value = (state_j.position - state_k.position) -
                (meas_j.position - meas_k.position);
  block.weight = inverse_psd(MatX(meas_j.cov + meas_k.cov));
  block.jacobians[{VarType::Position, j}] = Mat3::Identity();
  block.jacobians[{VarType::Position, k}] = -Mat3::Identity();
  return block;
}

ResidualBlock r_gravity(const KeyframeState& state_i, int i,
                        const KeyframeState& state_j, int j,
                        const PreintegratedImu& pre, const Vec3& bias,
                        const Vec3& gravity_dir, double gravity_mag) {
  const double dt = pre.delta_t;
  const Vec3 delta_v = pre.delta_v_at(bias);

  ResidualBlock block;
  block.value = (state_j.velocity - state_i.velocity) / dt -
                state_i.rotation * delta_v / dt - gravity_mag * gravity_dir;
  block.weight = dt * dt * inverse_psd(pre.cov.block<3, 3>(3, 3));
  block.jacobians[{VarType::Velocity, i}] = -Mat3::Identity() / dt;
  block.jacobians[{VarType::Velocity, j}] = Mat3::Identity() / dt;
  block.jacobians[{VarType::Rotation, i}] = state_i.rotation * hat(delta_v) / dt;
  block.jacobians[{VarType::GravityDir, 0}] =
      -gravity_mag * s2_tangent_basis(gravity_dir);
  block.jacobians[{VarType::GyroBias, 0}] = -state_i.rotation * pre.dv_dbg / dt;
  return block;
}

std::vector<std::pair<int, int>> consecutive_pairs(int num_keyframes) {
  std::vector<std::pair<int, int>> pairs;
  for (int k = 0; k + 1 < num_keyframes; ++k) pairs.emplace_back(k, k + 1);
  return pairs;
}

std::vector<ResidualBlock> assemble_cost(
    const InitState& state, const AssemblyInput& input, Phase phase,
    std::span<const std::pair<int, int>> pair_set) {
  const int n = state.size();
  if (static_cast<int>(input.preintegrations.size()) != n - 1 ||
      static_cast<int>(input.gnss.size()) != n ||
      static_cast<int>(input.gyro_measurements.size()) != n) {
    throw IndexOutOfRange("assemble_cost: input list lengths do not match state");
  }

  std::vector<ResidualBlock> blocks;
  blocks.reserve(5 * n + pair_set.size());
  for (int k = 0; k + 1 < n; ++k) {
    const auto& pre = input.preintegrations[k];
    blocks.push_back(r_preint_rotation(state.keyframes[k], k,
                                       state.keyframes[k + 1], k + 1, pre,
                                       state.gyro_bias));
    blocks.push_back(r_preint_velocity(state.keyframes[k], k,
                                       state.keyframes[k + 1], k + 1, pre,
                                       state.gyro_bias, state.gravity_dir,
                                       state.gravity_mag));
    blocks.push_back(r_preint_position(state.keyframes[k], k,
                                       state.keyframes[k + 1], k + 1, pre,
                                       state.gyro_bias, state.gravity_dir,
                                       state.gravity_mag));
    blocks.push_back(r_gravity(state.keyframes[k], k, state.keyframes[k + 1],
                               k + 1, pre, state.gyro_bias, state.gravity_dir,
                               state.gravity_mag));
  }
  for (int k = 0; k < n; ++k) {
    blocks.push_back(r_angular_velocity(state.keyframes[k], k, state.gyro_bias,
                                        input.gyro_measurements[k],
                                        input.gyro_cov));
  }
  if (phase == Phase::Relative) {
    for (const auto& [a, b] : pair_set) {
      if (a < 0 || a >= n || b < 0 || b >= n) {
        throw IndexOutOfRange("assemble_cost: pair index outside keyframe range");
      }
      blocks.push_back(r_gps_relative(state.keyframes[b], b, state.keyframes[a],
                                      a, input.gnss[b], input.gnss[a]));
    }
  } else {
    for (int k = 0; k < n; ++k) {
      blocks.push_back(
          r_gps_global(state.keyframes[k], k, input.gnss[k], input.extrinsic));
    }
  }
  return blocks;
}

double total_cost(std::span<const ResidualBlock> blocks) {
  double cost = 0.0;
  for (const auto& b : blocks) cost += b.squared_norm();
  return cost;
}

}  // namespace ginit
