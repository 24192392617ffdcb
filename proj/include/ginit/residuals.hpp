#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ginit/preintegration.hpp"
#include "ginit/types.hpp"

namespace ginit {

// Residual terms of the initialization cost. Each function returns the residual
// value, its inverse-covariance weight and analytic Jacobian blocks with respect
// to the tangent space of every variable it touches (right perturbation for
// rotations and poses, tangent-basis perturbation for the gravity direction).
// Keyframe indices identify the variables in the jacobian map.

/// Symmetric PSD inverse with an eigenvalue floor, so zero-noise synthetic
/// covariances still produce usable weights.
MatX inverse_psd(const MatX& m, double floor = 1e-18);

/// r = omega_k - (gyro_meas - bias)
ResidualBlock r_angular_velocity(const KeyframeState& state_k, int k,
                                 const Vec3& bias, const Vec3& gyro_meas,
                                 const Mat3& gyro_cov);

/// r = Log(deltaR(b)^T R_i^T R_j), weighted by the rotation block of the
/// preintegrated covariance.
ResidualBlock r_preint_rotation(const KeyframeState& state_i, int i,
                                const KeyframeState& state_j, int j,
                                const PreintegratedImu& pre, const Vec3& bias);

/// r = R_i^T (v_j - v_i - g dt) - delta_v(b)
ResidualBlock r_preint_velocity(const KeyframeState& state_i, int i,
                                const KeyframeState& state_j, int j,
                                const PreintegratedImu& pre, const Vec3& bias,
                                const Vec3& gravity_dir, double gravity_mag);

/// r = R_i^T (p_j - p_i - v_i dt - 1/2 g dt^2) - delta_p(b)
ResidualBlock r_preint_position(const KeyframeState& state_i, int i,
                                const KeyframeState& state_j, int j,
                                const PreintegratedImu& pre, const Vec3& bias,
                                const Vec3& gravity_dir, double gravity_mag);

/// r = T * p_k - gnss position; reduces to p_k - p_hat at identity extrinsic.
ResidualBlock r_gps_global(const KeyframeState& state_k, int k,
                           const GnssMeasurement& meas, const Pose& extrinsic);

/// r = (p_j - p_k) - (p_hat_j - p_hat_k), weighted by (cov_j + cov_k)^-1.
ResidualBlock r_gps_relative(const KeyframeState& state_j, int j,
                             const KeyframeState& state_k, int k,
                             const GnssMeasurement& meas_j,
                             const GnssMeasurement& meas_k);

/// r = ((v_j - v_i)/dt - R_i delta_v(b)/dt) - |g| g_dir, weighted by
/// (Sigma_delta_v / dt^2)^-1.
ResidualBlock r_gravity(const KeyframeState& state_i, int i,
                        const KeyframeState& state_j, int j,
                        const PreintegratedImu& pre, const Vec3& bias,
                        const Vec3& gravity_dir, double gravity_mag);

enum class Phase { Relative, Global };

/// Everything assemble_cost needs besides the state itself.
struct AssemblyInput {
  std::vector<PreintegratedImu> preintegrations;  // one per consecutive keyframe pair
  std::vector<GnssMeasurement> gnss;              // one per keyframe
  std::vector<Vec3> gyro_measurements;            // raw gyro at each keyframe
  Mat3 gyro_cov = Mat3::Identity();
  Pose extrinsic;  // world-from-body alignment, used by the global residuals
};

/// Emits the residual blocks of the stage cost: per consecutive pair the
/// preintegration rotation/velocity/position and gravity terms, per keyframe the
/// angular-velocity term, then either the relative GNSS terms over pair_set
/// (Relative phase) or one global GNSS term per keyframe (Global phase).
/// Throws IndexOutOfRange on inconsistent list lengths or invalid pairs.
std::vector<ResidualBlock> assemble_cost(
    const InitState& state, const AssemblyInput& input, Phase phase,
    std::span<const std::pair<int, int>> pair_set);

/// Consecutive-index pair set {(k, k+1)}.
std::vector<std::pair<int, int>> consecutive_pairs(int num_keyframes);

/// Total cost of a block list (sum of squared Mahalanobis norms).
double total_cost(std::span<const ResidualBlock> blocks);

}  // namespace ginit
