#pragma once

#include <functional>
#include <random>
#include <vector>

#include "ginit/manifold.hpp"
#include "ginit/preintegration.hpp"
#include "ginit/residuals.hpp"
#include "ginit/simulation.hpp"
#include "ginit/types.hpp"

namespace ginit::testing {

// deterministic random scalars/vectors for test fixtures
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * dist_(rng_);
  }
  Vec3 vec3(double scale) {
    return Vec3(uniform(-scale, scale), uniform(-scale, scale),
                uniform(-scale, scale));
  }
  Vec3 unit3() {
    Vec3 v;
    do {
      v = vec3(1.0);
    } while (v.norm() < 1e-3);
    return v.normalized();
  }
  Mat3 rotation(double angle_scale = 1.0) {
    return exp_so3(vec3(angle_scale));
  }
  KeyframeState keyframe(double pos_scale = 2.0, double vel_scale = 1.0,
                         double omega_scale = 1.0) {
    KeyframeState kf;
    kf.rotation = rotation();
    kf.position = vec3(pos_scale);
    kf.velocity = vec3(vel_scale);
    kf.omega = vec3(omega_scale);
    return kf;
  }

 private:
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> dist_{0.0, 1.0};
};

// 5-point central difference of a vector function along one tangent direction
inline VecX central_diff5(const std::function<VecX(double)>& f, double h) {
  return (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h);
}

/// Everything a residual can depend on; the audit perturbs entries by VarKey.
struct ResidualContext {
  KeyframeState si, sj;
  Vec3 bias = Vec3::Zero();
  Vec3 gravity_dir = -Vec3::UnitZ();
  Pose extrinsic;
  int i_index = 0, j_index = 1;
};

using ResidualFn = std::function<ResidualBlock(const ResidualContext&)>;

inline ResidualContext perturb(ResidualContext ctx, const VarKey& key,
                               const VecX& delta) {
  KeyframeState& kf = (key.index == ctx.i_index) ? ctx.si : ctx.sj;
  switch (key.type) {
    case VarType::Rotation:
      kf.rotation = kf.rotation * exp_so3(Vec3(delta));
      break;
    case VarType::Position:
      kf.position += Vec3(delta);
      break;
    case VarType::Omega:
      kf.omega += Vec3(delta);
      break;
    case VarType::Velocity:
      kf.velocity += Vec3(delta);
      break;
    case VarType::GyroBias:
      ctx.bias += Vec3(delta);
      break;
    case VarType::GravityDir:
      ctx.gravity_dir = s2_boxplus(ctx.gravity_dir, Vec2(delta));
      break;
    case VarType::Extrinsic:
      ctx.extrinsic = ctx.extrinsic * exp_se3(Vec6(delta));
      break;
    default:
      break;
  }
  return ctx;
}

/// Max mismatch between every analytic Jacobian block of fn(ctx) and 5-point
/// central differences, measured as min(absolute, relative) entrywise so the
/// caller can compare against max(abs_tol, rel_tol) style bounds.
inline double audit_jacobians(const ResidualFn& fn, const ResidualContext& ctx,
                              double h = 1e-4) {
  const ResidualBlock block = fn(ctx);
  double worst = 0.0;
  for (const auto& [key, jac] : block.jacobians) {
    for (int c = 0; c < jac.cols(); ++c) {
      const VecX fd = central_diff5(
          [&](double step) {
            VecX delta = VecX::Zero(jac.cols());
            delta(c) = step;
            return VecX(fn(perturb(ctx, key, delta)).value);
          },
          h);
      for (int r = 0; r < jac.rows(); ++r) {
        const double abs_err = std::abs(fd(r) - jac(r, c));
        const double rel_err = abs_err / std::max(std::abs(jac(r, c)), 1e-12);
        worst = std::max(worst, std::min(abs_err, rel_err));
      }
    }
  }
  return worst;
}

/// Synthetic problem whose truth is defined by the discrete propagation model
/// itself, so noise-free preintegration residuals vanish exactly even under
/// rotational excitation.
struct DiscreteScenario {
  std::vector<ImuSample> imu;
  std::vector<GnssMeasurement> gnss;
  InitState truth;                    // keyframe states at GNSS epochs
  std::vector<double> keyframe_times;
  Vec3 gyro_bias_true = Vec3::Zero();
};

struct DiscreteOptions {
  double imu_rate = 200.0;
  int gnss_every = 40;  // keyframe every N IMU samples
  double duration = 4.0;
  Vec3 gyro_bias_true = Vec3::Zero();
  double gyro_noise = 0.0;
  double accel_noise = 0.0;
  double gnss_noise = 0.0;
  std::uint64_t seed = 7;
  double gravity_mag = kDefaultGravityMagnitude;
};

inline DiscreteScenario make_discrete_scenario(const TrajectoryModel& model,
                                               const DiscreteOptions& opt) {
  DiscreteScenario out;
  out.gyro_bias_true = opt.gyro_bias_true;
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto noise3 = [&](double sigma) {
    return Vec3(sigma * normal(rng), sigma * normal(rng), sigma * normal(rng));
  };

  const double dt = 1.0 / opt.imu_rate;
  const Vec3 gravity_world = -opt.gravity_mag * Vec3::UnitZ();
  const int n = static_cast<int>(opt.duration * opt.imu_rate);

  // sample the analytic model, then let the discrete recursion define the truth
  const TruthState s0 = evaluate_trajectory(model, 0.0);
  Mat3 r = s0.rotation;
  Vec3 p = s0.position;
  Vec3 v = s0.velocity;

  out.truth.gravity_mag = opt.gravity_mag;
  out.truth.gravity_dir = -Vec3::UnitZ();
  out.truth.gyro_bias = opt.gyro_bias_true;

  const double sigma_eff = std::max(opt.gnss_noise, 1e-4);
  auto push_keyframe = [&](int k, const Mat3& rot, const Vec3& pos,
                           const Vec3& vel, const Vec3& omega_true) {
    KeyframeState kf;
    kf.rotation = rot;
    kf.position = pos;
    kf.velocity = vel;
    kf.omega = omega_true;
    out.truth.keyframes.push_back(kf);
    out.keyframe_times.push_back(k * dt);
    GnssMeasurement meas;
    meas.timestamp = k * dt;
    meas.position = pos + noise3(opt.gnss_noise);
    meas.cov = sigma_eff * sigma_eff * Mat3::Identity();
    out.gnss.push_back(meas);
  };

  for (int k = 0; k <= n; ++k) {
    const double t = k * dt;
    const TruthState ref = evaluate_trajectory(model, t);
    const Vec3 omega_clean = ref.omega_body;
    const Vec3 accel_clean =
        ref.rotation.transpose() * (ref.accel_world - gravity_world);

    ImuSample sample;
    sample.timestamp = t;
    sample.gyro = omega_clean + opt.gyro_bias_true + noise3(opt.gyro_noise);
    sample.accel = accel_clean + noise3(opt.accel_noise);
    out.imu.push_back(sample);

    if (k % opt.gnss_every == 0) {
      push_keyframe(k, r, p, v, omega_clean);
    }

    // discrete truth propagation mirrors the preintegration recursion on the
    // clean signals, so zero-noise residuals vanish exactly
    const Vec3 a_world = r * accel_clean + gravity_world;
    p += v * dt + 0.5 * a_world * dt * dt;
    v += a_world * dt;
    r = r * exp_so3(omega_clean * dt);
  }
  return out;
}

}  // namespace ginit::testing
