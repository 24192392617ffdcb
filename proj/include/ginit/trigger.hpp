#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ginit/residuals.hpp"
#include "ginit/solver.hpp"
#include "ginit/types.hpp"

namespace ginit {

/// One trigger evaluation: singular values of the extrinsic Hessian, the ratio
/// rho = s_max / s_min and its relative change against the previous epoch.
struct TriggerRecord {
  int epoch = 0;  // number of GNSS measurements consumed (1-based)
  Vec6 singular_values = Vec6::Zero();
  double sv_ratio = 0.0;
  double sv_ratio_rel_change = 0.0;  // +inf at the first record
  bool below_threshold = false;
};

struct TriggerTrace {
  double threshold = 1e-2;
  int min_epochs = 3;  // guard against firing before this many records
  std::vector<TriggerRecord> records;
  std::optional<int> activation_index;  // k*, epoch number of first satisfaction
};

/// Gauss-Newton Hessian of the GNSS-only alignment residuals with respect to the
/// six tangent parameters of the world-from-body transform. Per consecutive pair
/// it stacks one relative displacement term and the two absolute anchors, each
/// weighted by the inverse of its measurement covariance. Throws
/// InsufficientMeasurements with fewer than two epochs.
Mat6 extrinsic_hessian(std::span<const GnssMeasurement> gnss,
                       const InitState& state, const Pose& extrinsic);

/// Appends the singular values of H and the ratio statistics; sets the
/// activation index at the first record at or past min_epochs whose relative
/// ratio change falls below the threshold.
TriggerTrace update_trigger(TriggerTrace trace, const Mat6& hessian);

struct PipelineConfig {
  ImuNoiseModel imu_noise = ImuNoiseModel::isotropic(1e-3, 1e-2);
  Vec3 accel_bias = Vec3::Zero();
  double gravity_mag = kDefaultGravityMagnitude;
  double trigger_threshold = 1e-2;
  int min_epochs = 3;
  int max_keyframes = 0;  // 0 = use every GNSS epoch
  // seed the extrinsic at activation by rigid alignment of the stage-1
  // trajectory against the GNSS fixes; false starts from identity instead
  bool seed_extrinsic_by_alignment = true;
  SolveOptions epoch_options{.max_iterations = 10,
                             .cost_rel_tol = 1e-8,
                             .gradient_tol = 1e-6};
  SolveOptions final_options{.max_iterations = 30};
};

struct PipelineResult {
  InitState state;
  Pose extrinsic;  // world-from-body
  TriggerTrace trace;
  SolveReport stage1_report;  // last relative-phase solve
  SolveReport stage2_report;  // final solve
  bool triggered = false;     // false marks a NeverTriggered stage-1 result
  int activation_index = -1;  // epoch at which global residuals entered
  std::vector<double> keyframe_times;

  /// Keyframe positions mapped through the estimated extrinsic.
  std::vector<Vec3> world_positions() const;
};

/// Two-stage initialization: solves the relative-residual cost incrementally as
/// GNSS epochs arrive, monitors the trigger, and switches to the global cost
/// with the extrinsic in the parameter set once the criterion fires.
PipelineResult run_two_stage(std::span<const ImuSample> imu,
                             std::span<const GnssMeasurement> gnss,
                             const PipelineConfig& config);

/// Same pipeline with the switch forced at a given epoch count (0 = global from
/// the start); the trigger trace is still recorded for inspection.
PipelineResult run_fixed_activation(std::span<const ImuSample> imu,
                                    std::span<const GnssMeasurement> gnss,
                                    const PipelineConfig& config,
                                    int activation_index);

/// Rigid world-from-body alignment of two point sets (Kabsch). Degenerate sets
/// (fewer than three points or collinear spread) fall back to translation-only.
Pose align_rigid(std::span<const Vec3> body, std::span<const Vec3> world);

}  // namespace ginit
