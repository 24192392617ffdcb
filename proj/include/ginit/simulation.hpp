#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ginit/types.hpp"

namespace ginit {

/// Analytic trajectory families. Positions and ZYX Euler angles are closed-form
/// functions of time, so velocities, accelerations and body rates are exact.
struct TrajectoryModel {
  enum class Kind { ConstantRateArc, FigureEight, StraightLine, Piecewise };

  Kind kind = Kind::FigureEight;
  double duration = 20.0;  // s
  Vec3 start_position = Vec3::Zero();
  double initial_yaw = 0.0;  // rad

  // straight segments (StraightLine, Piecewise warmup) and arc tangential speed
  double speed = 1.0;  // m/s

  // ConstantRateArc
  double yaw_rate = 0.5;  // rad/s

  // FigureEight / Piecewise excitation
  double excitation_freq = 0.9;  // rad/s
  double amp_x = 4.0, amp_y = 2.0, amp_z = 0.5;          // m
  double amp_yaw = 0.6, amp_pitch = 0.25, amp_roll = 0.3;  // rad

  // Piecewise: straight warmup, then smoothly ramped excitation
  double warmup = 6.0;      // s
  double ramp_width = 2.0;  // s

  static TrajectoryModel straight_line(double speed = 1.0, double duration = 20.0);
  static TrajectoryModel constant_rate_arc(double yaw_rate = 0.5,
                                           double speed = 1.0,
                                           double duration = 20.0);
  static TrajectoryModel figure_eight(double duration = 20.0);
  // Piecewise presets: at rest through the warmup, then ramped excitation
  static TrajectoryModel urban(double duration = 24.0);
  static TrajectoryModel hover_figure_eight(double duration = 16.0,
                                            double hover = 4.0);
};

/// Exact trajectory state at time t.
struct TruthState {
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 accel_world = Vec3::Zero();
  Vec3 omega_body = Vec3::Zero();
};

TruthState evaluate_trajectory(const TrajectoryModel& model, double t);

struct SensorConfig {
  double imu_rate = 200.0;  // Hz
  double gnss_rate = 5.0;   // Hz
  double gyro_noise_sigma = 0.0;   // rad/s per axis, per sample
  double accel_noise_sigma = 0.0;  // m/s^2 per axis, per sample
  double gnss_noise_sigma = 0.0;   // m per axis
  Vec3 gyro_bias_true = Vec3::Zero();
  std::uint64_t rng_seed = 0;
  double gravity_mag = kDefaultGravityMagnitude;
};

struct TruthSample {
  double timestamp = 0.0;
  KeyframeState state;
};

struct SimulatedStreams {
  std::vector<TruthSample> truth;  // at GNSS epochs
  std::vector<ImuSample> imu;
  std::vector<GnssMeasurement> gnss;
};

/// Samples the analytic trajectory into sensor streams. IMU follows the body
/// measurement model a_meas = R^T (a_w - g_w) + bias + noise with gravity
/// g_w = -|g| e_z; GNSS is truth position plus isotropic Gaussian noise.
/// Deterministic for a fixed seed.
SimulatedStreams generate(const TrajectoryModel& model, const SensorConfig& config);

/// RMSE of per-index Euclidean position errors; no alignment is applied.
/// Throws LengthMismatch.
double ate_rmse(std::span<const Vec3> estimated, std::span<const Vec3> truth);

}  // namespace ginit
