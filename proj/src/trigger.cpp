#include "ginit/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ginit/errors.hpp"
#include "ginit/manifold.hpp"
#include "ginit/preintegration.hpp"

namespace ginit {

Mat6 extrinsic_hessian(std::span<const GnssMeasurement> gnss,
                       const InitState& state, const Pose& extrinsic) {
  const std::size_t n = std::min<std::size_t>(gnss.size(), state.keyframes.size());
  if (n < 2) {
    throw InsufficientMeasurements("extrinsic_hessian: need at least two epochs");
  }
  const Mat3 rot = extrinsic.rotation;
  Mat6 h = Mat6::Zero();
  for (std::size_t k = 1; k < n; ++k) {
    const Vec3 p_prev = state.keyframes[k - 1].position;
    const Vec3 p_curr = state.keyframes[k].position;

    Mat96 jac = Mat96::Zero();
    // relative displacement term: translation cancels
    jac.block<3, 3>(0, 3) = -rot * hat(p_curr - p_prev);
    // absolute anchors at both epochs
    jac.block<3, 3>(3, 0) = rot;
    jac.block<3, 3>(3, 3) = -rot * hat(p_prev);
    jac.block<3, 3>(6, 0) = rot;
    jac.block<3, 3>(6, 3) = -rot * hat(p_curr);

    Mat9 omega = Mat9::Zero();
    omega.block<3, 3>(0, 0) = inverse_psd(MatX(gnss[k - 1].cov + gnss[k].cov));
    omega.block<3, 3>(3, 3) = inverse_psd(gnss[k - 1].cov);
    omega.block<3, 3>(6, 6) = inverse_psd(gnss[k].cov);

    h += jac.transpose() * omega * jac;
  }
  return 0.5 * (h + h.transpose());
}

TriggerTrace update_trigger(TriggerTrace trace, const Mat6& hessian) {
  Eigen::SelfAdjointEigenSolver<Mat6> eig(hessian);
  Vec6 svs = eig.eigenvalues().cwiseAbs();
  std::sort(svs.data(), svs.data() + 6, std::greater<double>());

  TriggerRecord rec;
  rec.epoch = trace.records.empty() ? 1 : trace.records.back().epoch + 1;
  rec.singular_values = svs;
  const double smin = svs(5);
  rec.sv_ratio = (smin > 0.0) ? svs(0) / smin : std::numeric_limits<double>::infinity();

  if (trace.records.empty()) {
    rec.sv_ratio_rel_change = std::numeric_limits<double>::infinity();
  } else {
    const double prev = trace.records.back().sv_ratio;
    if (std::isfinite(prev) && prev > 0.0 && std::isfinite(rec.sv_ratio)) {
      rec.sv_ratio_rel_change = std::abs((rec.sv_ratio - prev) / prev);
    } else {
      rec.sv_ratio_rel_change = std::numeric_limits<double>::infinity();
    }
  }
  rec.below_threshold = rec.sv_ratio_rel_change < trace.threshold;
  if (!trace.activation_index && rec.below_threshold &&
      rec.epoch >= trace.min_epochs) {
    trace.activation_index = rec.epoch;
  }
  trace.records.push_back(rec);
  return trace;
}

std::vector<Vec3> PipelineResult::world_positions() const {
  std::vector<Vec3> out;
  out.reserve(state.keyframes.size());
  for (const auto& kf : state.keyframes) out.push_back(extrinsic.apply(kf.position));
  return out;
}

Pose align_rigid(std::span<const Vec3> body, std::span<const Vec3> world) {
  Pose out;
  const std::size_t n = std::min(body.size(), world.size());
  if (n == 0) return out;

  Vec3 mb = Vec3::Zero(), mw = Vec3::Zero();
  for (std::size_t k = 0; k < n; ++k) {
    mb += body[k];
    mw += world[k];
  }
  mb /= static_cast<double>(n);
  mw /= static_cast<double>(n);

  if (n >= 3) {
    Mat3 cross = Mat3::Zero();
    for (std::size_t k = 0; k < n; ++k) {
      cross += (world[k] - mw) * (body[k] - mb).transpose();
    }
    Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    // guard collinear spread: second singular value carries the off-axis signal
    if (svd.singularValues()(1) > 1e-9 * std::max(svd.singularValues()(0), 1e-300)) {
      Mat3 d = Mat3::Identity();
      d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
      out.rotation = svd.matrixU() * d * svd.matrixV().transpose();
    }
  }
  out.translation = mw - out.rotation * mb;
  return out;
}

namespace {

struct EpochData {
  std::vector<PreintegratedImu> preintegrations;
  std::vector<GnssMeasurement> gnss;
  std::vector<Vec3> gyro_measurements;
  std::vector<double> times;
};

// samples with t0 <= timestamp < t1, so consecutive windows do not overlap and a
// uniform stream integrates to exactly t1 - t0 under the trailing-interval rule
// Pin the 6-dof frame gauge at the first keyframe. The first velocity stays
// estimable: freezing its noisy finite-difference seed would bake a non-rigid
// error into the trajectory that no extrinsic can absorb.
void pin_frame_gauge(ParameterLayout* layout) {
  layout->set_fixed({VarType::Rotation, 0}, true);
  layout->set_fixed({VarType::Position, 0}, true);
}

std::span<const ImuSample> window(std::span<const ImuSample> imu, double t0,
                                  double t1) {
  const auto begin = std::lower_bound(
      imu.begin(), imu.end(), t0,
      [](const ImuSample& s, double t) { return s.timestamp < t; });
  const auto end = std::lower_bound(
      begin, imu.end(), t1,
      [](const ImuSample& s, double t) { return s.timestamp < t; });
  return imu.subspan(begin - imu.begin(), end - begin);
}

Vec3 gyro_at(std::span<const ImuSample> imu, double t) {
  const auto it = std::lower_bound(
      imu.begin(), imu.end(), t,
      [](const ImuSample& s, double at) { return s.timestamp < at; });
  if (it == imu.end()) return imu.back().gyro;
  if (it == imu.begin()) return it->gyro;
  const auto prev = std::prev(it);
  return (t - prev->timestamp < it->timestamp - t) ? prev->gyro : it->gyro;
}

PipelineResult run_pipeline(std::span<const ImuSample> imu,
                            std::span<const GnssMeasurement> gnss,
                            const PipelineConfig& config,
                            std::optional<int> forced_activation) {
  if (imu.size() < 2) throw EmptyStream("run_two_stage: IMU stream too short");
  if (gnss.size() < 2) {
    throw InsufficientMeasurements("run_two_stage: need at least two GNSS epochs");
  }

  const double imu_begin = imu.front().timestamp;
  const double imu_end = imu.back().timestamp;

  EpochData data;
  for (const auto& meas : gnss) {
    if (meas.timestamp < imu_begin - 1e-9 || meas.timestamp > imu_end + 1e-9) {
      continue;  // keyframes need IMU coverage
    }
    if (config.max_keyframes > 0 &&
        static_cast<int>(data.times.size()) >= config.max_keyframes) {
      break;
    }
    data.gnss.push_back(meas);
    data.times.push_back(meas.timestamp);
    data.gyro_measurements.push_back(gyro_at(imu, meas.timestamp));
  }
  if (data.times.size() < 2) {
    throw InsufficientMeasurements("run_two_stage: GNSS epochs outside IMU span");
  }

  PipelineResult result;
  result.trace.threshold = config.trigger_threshold;
  result.trace.min_epochs = config.min_epochs;
  result.keyframe_times = data.times;

  InitState state;
  state.gravity_mag = config.gravity_mag;

  // first keyframe: body frame anchored at identity orientation
  {
    KeyframeState kf0;
    kf0.position = data.gnss[0].position;
    const double dt0 = data.times[1] - data.times[0];
    kf0.velocity = (data.gnss[1].position - data.gnss[0].position) / dt0;
    kf0.omega = data.gyro_measurements[0];
    state.keyframes.push_back(kf0);
  }

  Pose extrinsic;
  bool global_active = false;
  int activation_epoch = -1;
  const auto activate = [&](int epoch_count) {
    global_active = true;
    activation_epoch = epoch_count;
    if (config.seed_extrinsic_by_alignment) {
      std::vector<Vec3> body, world;
      for (int k = 0; k < state.size(); ++k) {
        body.push_back(state.keyframes[k].position);
        world.push_back(data.gnss[k].position);
      }
      extrinsic = align_rigid(body, world);
    }
  };

  const auto make_provider = [&](int num_kf, const ParameterLayout& layout) {
    AssemblyInput input;
    input.preintegrations.assign(data.preintegrations.begin(),
                                 data.preintegrations.begin() + (num_kf - 1));
    input.gnss.assign(data.gnss.begin(), data.gnss.begin() + num_kf);
    input.gyro_measurements.assign(data.gyro_measurements.begin(),
                                   data.gyro_measurements.begin() + num_kf);
    input.gyro_cov = config.imu_noise.gyro_cov;
    const Phase phase = global_active ? Phase::Global : Phase::Relative;
    const auto pairs = consecutive_pairs(num_kf);
    return [&state, &extrinsic, input = std::move(input), phase, pairs,
            layout](const StateVec& values) mutable {
      InitState current = state;
      Pose ext = extrinsic;
      unpack_state(values, layout, &current, &ext);
      input.extrinsic = ext;
      return assemble_cost(current, input, phase, pairs);
    };
  };

  SolveReport last_relative_report;

  for (std::size_t k = 1; k < data.times.size(); ++k) {
    const int epoch_count = static_cast<int>(k) + 1;  // GNSS measurements so far

    // preintegrate the new interval at zero reference bias; residuals apply the
    // first-order bias correction through the stored Jacobians
    const auto samples = window(imu, data.times[k - 1], data.times[k]);
    data.preintegrations.push_back(
        integrate(samples, config.imu_noise, Vec3::Zero(), config.accel_bias));

    // seed the new keyframe from data
    const auto& pre = data.preintegrations.back();
    KeyframeState kf;
    kf.rotation = state.keyframes[k - 1].rotation * pre.delta_R_at(state.gyro_bias);
    kf.position = data.gnss[k].position;
    const double dt = data.times[k] - data.times[k - 1];
    kf.velocity = (data.gnss[k].position - data.gnss[k - 1].position) / dt;
    kf.omega = data.gyro_measurements[k] - state.gyro_bias;
    state.keyframes.push_back(kf);

    if (k == 1) {
      const Vec3 g_est = gravity_from_increment(pre, state.keyframes[0].rotation,
                                                state.keyframes[0].velocity,
                                                state.keyframes[1].velocity);
      state.gravity_dir = (g_est.norm() > 0.1) ? Vec3(g_est.normalized())
                                               : Vec3(-Vec3::UnitZ());
    }

    // a forced activation switches before the epoch solve, so "activation at a"
    // means a epochs were accumulated under relative residuals only
    if (forced_activation && !global_active &&
        epoch_count >= std::max(*forced_activation + 1, 2)) {
      activate(epoch_count);
    }

    const int num_kf = state.size();
    ParameterLayout layout = make_init_layout(num_kf, global_active);
    pin_frame_gauge(&layout);

    auto provider = make_provider(num_kf, layout);
    auto [solved, report] =
        solve(provider, layout, pack_state(state, layout, extrinsic),
              config.epoch_options);
    unpack_state(solved, layout, &state, &extrinsic);
    if (!global_active) last_relative_report = report;

    result.trace = update_trigger(
        result.trace,
        extrinsic_hessian(std::span(data.gnss.data(), k + 1), state,
                          global_active ? extrinsic : Pose{}));
    if (!forced_activation && !global_active &&
        result.trace.activation_index.has_value()) {
      activate(epoch_count);
    }
  }

  // final solve to convergence in the terminal phase
  {
    const int num_kf = state.size();
    ParameterLayout layout = make_init_layout(num_kf, global_active);
    pin_frame_gauge(&layout);
    auto provider = make_provider(num_kf, layout);
    auto [solved, report] =
        solve(provider, layout, pack_state(state, layout, extrinsic),
              config.final_options);
    unpack_state(solved, layout, &state, &extrinsic);
    result.stage2_report = report;
  }

  result.state = state;
  result.extrinsic = extrinsic;
  result.stage1_report = last_relative_report;
  result.triggered = global_active;
  result.activation_index = activation_epoch;
  return result;
}

}  // namespace

PipelineResult run_two_stage(std::span<const ImuSample> imu,
                             std::span<const GnssMeasurement> gnss,
                             const PipelineConfig& config) {
  return run_pipeline(imu, gnss, config, std::nullopt);
}

PipelineResult run_fixed_activation(std::span<const ImuSample> imu,
                                    std::span<const GnssMeasurement> gnss,
                                    const PipelineConfig& config,
                                    int activation_index) {
  return run_pipeline(imu, gnss, config, activation_index);
}

}  // namespace ginit
