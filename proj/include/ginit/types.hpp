#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

namespace ginit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using VecX = Eigen::VectorXd;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using MatX = Eigen::MatrixXd;
using Mat32 = Eigen::Matrix<double, 3, 2>;
using Mat96 = Eigen::Matrix<double, 9, 6>;

constexpr double kDefaultGravityMagnitude = 9.81;  // m/s^2

/// Rigid transform: maps body-frame points into the world frame, x_w = R * x_b + t.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Pose inverse() const {
    return Pose{rotation.transpose(), -(rotation.transpose() * translation)};
  }
  Pose operator*(const Pose& rhs) const {
    return Pose{rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
};

/// One raw IMU reading. Timestamps are seconds from the stream epoch and must be
/// strictly increasing within a stream.
struct ImuSample {
  double timestamp = 0.0;  // s
  Vec3 gyro = Vec3::Zero();   // rad/s
  Vec3 accel = Vec3::Zero();  // m/s^2
};

/// Per-sample measurement noise covariance of the raw IMU channels.
struct ImuNoiseModel {
  Mat3 gyro_cov = Mat3::Zero();   // rad^2/s^2
  Mat3 accel_cov = Mat3::Zero();  // m^2/s^4

  static ImuNoiseModel isotropic(double gyro_sigma, double accel_sigma) {
    ImuNoiseModel m;
    m.gyro_cov = gyro_sigma * gyro_sigma * Mat3::Identity();
    m.accel_cov = accel_sigma * accel_sigma * Mat3::Identity();
    return m;
  }
};

/// GNSS position fix in the world frame.
struct GnssMeasurement {
  double timestamp = 0.0;     // s
  Vec3 position = Vec3::Zero();  // m
  Mat3 cov = Mat3::Identity();   // m^2
};

/// Per-epoch estimation block: rotation, position, angular velocity, velocity.
struct KeyframeState {
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();
  Vec3 omega = Vec3::Zero();     // body angular velocity, rad/s
  Vec3 velocity = Vec3::Zero();  // world, m/s
};

/// Full initialization state: ordered keyframes plus the shared gyroscope bias
/// and the gravity direction (unit vector, magnitude held fixed).
struct InitState {
  std::vector<KeyframeState> keyframes;
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 gravity_dir = -Vec3::UnitZ();
  double gravity_mag = kDefaultGravityMagnitude;

  Vec3 gravity() const { return gravity_mag * gravity_dir; }
  int size() const { return static_cast<int>(keyframes.size()); }
};

/// Identifies one optimization variable.
enum class VarType {
  Rotation,         // keyframe rotation, index = keyframe
  Position,         // keyframe position
  Omega,            // keyframe angular velocity
  Velocity,         // keyframe velocity
  GyroBias,         // shared, index = 0
  GravityDir,       // shared, index = 0
  Extrinsic,        // world-from-body alignment, index = 0
  Generic,          // free-form euclidean block (tests, toy problems)
};

struct VarKey {
  VarType type = VarType::Generic;
  int index = 0;

  friend bool operator<(const VarKey& a, const VarKey& b) {
    if (a.type != b.type) return a.type < b.type;
    return a.index < b.index;
  }
  friend bool operator==(const VarKey& a, const VarKey& b) {
    return a.type == b.type && a.index == b.index;
  }
};

/// One weighted residual term: value, inverse-covariance weight and the analytic
/// Jacobian blocks with respect to the tangent space of each involved variable.
struct ResidualBlock {
  VecX value;
  MatX weight;  // symmetric PSD
  std::map<VarKey, MatX> jacobians;

  double squared_norm() const { return value.dot(weight * value); }
};

}  // namespace ginit
