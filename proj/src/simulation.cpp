#include "ginit/simulation.hpp"

#include <cmath>

#include "ginit/errors.hpp"
#include "ginit/random.hpp"

namespace ginit {

namespace {

// scalar channel with first and second time derivatives
struct Ch {
  double v = 0.0, d1 = 0.0, d2 = 0.0;
};

Ch constant(double c) { return {c, 0.0, 0.0}; }

Ch linear(double offset, double rate, double t) {
  return {offset + rate * t, rate, 0.0};
}

Ch sinusoid(double amp, double freq, double t) {
  const double s = std::sin(freq * t), c = std::cos(freq * t);
  return {amp * s, amp * freq * c, -amp * freq * freq * s};
}

// quintic smoothstep on [0,1], C^2 at both ends
void smoothstep5(double u, double* s, double* s1, double* s2) {
  if (u <= 0.0) {
    *s = *s1 = *s2 = 0.0;
  } else if (u >= 1.0) {
    *s = 1.0;
    *s1 = *s2 = 0.0;
  } else {
    *s = ((6.0 * u - 15.0) * u + 10.0) * u * u * u;
    *s1 = ((30.0 * u - 60.0) * u + 30.0) * u * u;
    *s2 = ((120.0 * u - 180.0) * u + 60.0) * u;
  }
}

// amp * ramp(t) * sin(freq * tau), tau = t - t0, ramp rises over ramp_width
Ch ramped_sinusoid(double amp, double freq, double t, double t0,
                   double ramp_width) {
  const double tau = t - t0;
  if (tau <= 0.0) return {};
  double s, s1, s2;
  smoothstep5(tau / ramp_width, &s, &s1, &s2);
  s1 /= ramp_width;
  s2 /= ramp_width * ramp_width;
  const double sn = std::sin(freq * tau), cs = std::cos(freq * tau);
  Ch out;
  out.v = amp * s * sn;
  out.d1 = amp * (s1 * sn + s * freq * cs);
  out.d2 = amp * (s2 * sn + 2.0 * s1 * freq * cs - s * freq * freq * sn);
  return out;
}

// distance covered when the speed rises from rest along the smoothstep ramp:
// v(t) = speed * S(u), the integral of S over [0,1] is 1/2
Ch ramped_drive(double speed, double t, double t0, double ramp_width) {
  const double tau = t - t0;
  if (tau <= 0.0) return {};
  Ch out;
  if (tau >= ramp_width) {
    out.v = speed * (0.5 * ramp_width + (tau - ramp_width));
    out.d1 = speed;
    out.d2 = 0.0;
    return out;
  }
  const double u = tau / ramp_width;
  double s, s1, s2;
  smoothstep5(u, &s, &s1, &s2);
  // integral of 6u^5 - 15u^4 + 10u^3 is u^6 - 3 u^5 + 2.5 u^4
  const double integral = ((u - 3.0) * u + 2.5) * u * u * u * u;
  out.v = speed * ramp_width * integral;
  out.d1 = speed * s;
  out.d2 = speed * s1 / ramp_width;
  return out;
}

struct Channels {
  Ch x, y, z, yaw, pitch, roll;
};

Channels eval_channels(const TrajectoryModel& m, double t) {
  Channels ch;
  const Vec3 p0 = m.start_position;
  switch (m.kind) {
    case TrajectoryModel::Kind::StraightLine: {
      ch.x = linear(p0.x(), m.speed * std::cos(m.initial_yaw), t);
      ch.y = linear(p0.y(), m.speed * std::sin(m.initial_yaw), t);
      ch.z = constant(p0.z());
      ch.yaw = constant(m.initial_yaw);
      ch.pitch = constant(0.0);
      ch.roll = constant(0.0);
      break;
    }
    case TrajectoryModel::Kind::ConstantRateArc: {
      if (std::abs(m.yaw_rate) < 1e-9) {
        return eval_channels(
            [&] {
              TrajectoryModel s = m;
              s.kind = TrajectoryModel::Kind::StraightLine;
              return s;
            }(),
            t);
      }
      const double r = m.speed / m.yaw_rate;
      const double psi = m.initial_yaw + m.yaw_rate * t;
      const double psi0 = m.initial_yaw;
      const double cx = p0.x() - r * std::sin(psi0);
      const double cy = p0.y() + r * std::cos(psi0);
      ch.x = {cx + r * std::sin(psi), m.speed * std::cos(psi),
              -m.speed * m.yaw_rate * std::sin(psi)};
      ch.y = {cy - r * std::cos(psi), m.speed * std::sin(psi),
              m.speed * m.yaw_rate * std::cos(psi)};
      ch.z = constant(p0.z());
      ch.yaw = linear(m.initial_yaw, m.yaw_rate, t);
      ch.pitch = constant(0.0);
      ch.roll = constant(0.0);
      break;
    }
    case TrajectoryModel::Kind::FigureEight: {
      const double a = m.excitation_freq;
      ch.x = sinusoid(m.amp_x, a, t);
      ch.x.v += p0.x();
      // lemniscate: y tracks sin * cos = sin(2 a t) / 2
      ch.y = sinusoid(0.5 * m.amp_y, 2.0 * a, t);
      ch.y.v += p0.y();
      ch.z = sinusoid(m.amp_z, 0.5 * a, t);
      ch.z.v += p0.z();
      ch.yaw = sinusoid(m.amp_yaw, a, t);
      ch.yaw.v += m.initial_yaw;
      ch.pitch = sinusoid(m.amp_pitch, 2.0 * a, t);
      ch.roll = sinusoid(m.amp_roll, 1.5 * a, t);
      break;
    }
    case TrajectoryModel::Kind::Piecewise: {
      // at rest until warmup ends, then a smooth pull-away with ramped
      // lateral/attitude excitation
      const double a = m.excitation_freq;
      ch.x = constant(p0.x());
      ch.y = constant(p0.y());
      ch.z = constant(p0.z());
      ch.yaw = constant(m.initial_yaw);
      ch.pitch = constant(0.0);
      ch.roll = constant(0.0);

      auto add = [](Ch& base, const Ch& e, double scale = 1.0) {
        base.v += scale * e.v;
        base.d1 += scale * e.d1;
        base.d2 += scale * e.d2;
      };
      const Ch drive = ramped_drive(m.speed, t, m.warmup, m.ramp_width);
      add(ch.x, drive, std::cos(m.initial_yaw));
      add(ch.y, drive, std::sin(m.initial_yaw));
      add(ch.x, ramped_sinusoid(m.amp_x, a, t, m.warmup, m.ramp_width));
      add(ch.y, ramped_sinusoid(m.amp_y, a, t, m.warmup, m.ramp_width));
      add(ch.z, ramped_sinusoid(m.amp_z, 0.5 * a, t, m.warmup, m.ramp_width));
      add(ch.yaw, ramped_sinusoid(m.amp_yaw, a, t, m.warmup, m.ramp_width));
      add(ch.pitch,
          ramped_sinusoid(m.amp_pitch, 2.0 * a, t, m.warmup, m.ramp_width));
      add(ch.roll,
          ramped_sinusoid(m.amp_roll, 1.5 * a, t, m.warmup, m.ramp_width));
      break;
    }
  }
  return ch;
}

Mat3 euler_zyx(double yaw, double pitch, double roll) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
          Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

}  // namespace

TrajectoryModel TrajectoryModel::straight_line(double speed, double duration) {
  TrajectoryModel m;
  m.kind = Kind::StraightLine;
  m.speed = speed;
  m.duration = duration;
  return m;
}

TrajectoryModel TrajectoryModel::constant_rate_arc(double yaw_rate, double speed,
                                                   double duration) {
  TrajectoryModel m;
  m.kind = Kind::ConstantRateArc;
  m.yaw_rate = yaw_rate;
  m.speed = speed;
  m.duration = duration;
  return m;
}

TrajectoryModel TrajectoryModel::figure_eight(double duration) {
  TrajectoryModel m;
  m.kind = Kind::FigureEight;
  m.duration = duration;
  return m;
}

TrajectoryModel TrajectoryModel::urban(double duration) {
  TrajectoryModel m;
  m.kind = Kind::Piecewise;
  m.duration = duration;
  m.speed = 1.5;
  m.warmup = 4.0;
  m.ramp_width = 2.0;
  m.amp_x = 0.0;
  m.amp_y = 2.5;
  m.amp_z = 0.4;
  m.amp_yaw = 0.7;
  m.amp_pitch = 0.2;
  m.amp_roll = 0.25;
  return m;
}

TrajectoryModel TrajectoryModel::hover_figure_eight(double duration,
                                                    double hover) {
  TrajectoryModel m;
  m.kind = Kind::Piecewise;
  m.duration = duration;
  m.speed = 0.0;
  m.warmup = hover;
  m.ramp_width = 1.5;
  m.amp_x = 3.0;
  m.amp_y = 1.5;
  m.amp_z = 0.4;
  m.amp_yaw = 0.6;
  m.amp_pitch = 0.25;
  m.amp_roll = 0.3;
  return m;
}

TruthState evaluate_trajectory(const TrajectoryModel& model, double t) {
  const Channels ch = eval_channels(model, t);
  TruthState s;
  s.position = Vec3(ch.x.v, ch.y.v, ch.z.v);
  s.velocity = Vec3(ch.x.d1, ch.y.d1, ch.z.d1);
  s.accel_world = Vec3(ch.x.d2, ch.y.d2, ch.z.d2);
  s.rotation = euler_zyx(ch.yaw.v, ch.pitch.v, ch.roll.v);

  // body rates for R = Rz(yaw) Ry(pitch) Rx(roll), Rdot = R hat(omega_b)
  const double sp = std::sin(ch.pitch.v), cp = std::cos(ch.pitch.v);
  const double sr = std::sin(ch.roll.v), cr = std::cos(ch.roll.v);
  const double dyaw = ch.yaw.d1, dpitch = ch.pitch.d1, droll = ch.roll.d1;
  s.omega_body = Vec3(droll - dyaw * sp,
                      dpitch * cr + dyaw * cp * sr,
                      -dpitch * sr + dyaw * cp * cr);
  return s;
}

SimulatedStreams generate(const TrajectoryModel& model, const SensorConfig& config) {
  SimulatedStreams out;
  GaussianSampler noise(config.rng_seed);
  const Vec3 gravity_world = -config.gravity_mag * Vec3::UnitZ();

  const auto n_imu =
      static_cast<std::size_t>(std::floor(model.duration * config.imu_rate)) + 1;
  out.imu.reserve(n_imu);
  for (std::size_t k = 0; k < n_imu; ++k) {
    const double t = static_cast<double>(k) / config.imu_rate;
    const TruthState s = evaluate_trajectory(model, t);
    ImuSample sample;
    sample.timestamp = t;
    sample.gyro = s.omega_body + config.gyro_bias_true +
                  noise.vec3(config.gyro_noise_sigma);
    sample.accel = s.rotation.transpose() * (s.accel_world - gravity_world) +
                   noise.vec3(config.accel_noise_sigma);
    out.imu.push_back(sample);
  }

  const double last_imu_time = out.imu.back().timestamp;
  const auto n_gnss =
      static_cast<std::size_t>(std::floor(model.duration * config.gnss_rate)) + 1;
  // covariance floor keeps zero-noise weights finite and well conditioned
  const double sigma_eff = std::max(config.gnss_noise_sigma, 1e-4);
  out.gnss.reserve(n_gnss);
  out.truth.reserve(n_gnss);
  for (std::size_t j = 0; j < n_gnss; ++j) {
    const double t = static_cast<double>(j) / config.gnss_rate;
    if (t > last_imu_time) break;
    const TruthState s = evaluate_trajectory(model, t);
    GnssMeasurement meas;
    meas.timestamp = t;
    meas.position = s.position + noise.vec3(config.gnss_noise_sigma);
    meas.cov = sigma_eff * sigma_eff * Mat3::Identity();
    out.gnss.push_back(meas);

    TruthSample truth;
    truth.timestamp = t;
    truth.state.rotation = s.rotation;
    truth.state.position = s.position;
    truth.state.velocity = s.velocity;
    truth.state.omega = s.omega_body;
    out.truth.push_back(truth);
  }
  return out;
}

double ate_rmse(std::span<const Vec3> estimated, std::span<const Vec3> truth) {
  if (estimated.size() != truth.size()) {
    throw LengthMismatch("ate_rmse: trajectories differ in length");
  }
  if (estimated.empty()) {
    throw LengthMismatch("ate_rmse: empty trajectories");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < estimated.size(); ++k) {
    sum += (estimated[k] - truth[k]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(estimated.size()));
}

}  // namespace ginit
