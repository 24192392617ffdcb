#include <doctest.h>

#include <cmath>

#include "ginit/errors.hpp"
#include "ginit/manifold.hpp"
#include "ginit/simulation.hpp"
#include "ginit/trigger.hpp"
#include "support/helpers.hpp"

using namespace ginit;
using testing::Rng;

namespace {

InitState state_from_positions(const std::vector<Vec3>& positions) {
  InitState state;
  for (const auto& p : positions) {
    KeyframeState kf;
    kf.position = p;
    state.keyframes.push_back(kf);
  }
  return state;
}

std::vector<GnssMeasurement> gnss_at(const std::vector<Vec3>& positions,
                                     double sigma = 0.2) {
  std::vector<GnssMeasurement> out;
  for (std::size_t k = 0; k < positions.size(); ++k) {
    GnssMeasurement m;
    m.timestamp = 0.2 * static_cast<double>(k);
    m.position = positions[k];
    m.cov = sigma * sigma * Mat3::Identity();
    out.push_back(m);
  }
  return out;
}

}  // namespace

TEST_CASE("extrinsic hessian shape and degeneracy") {
  CHECK_THROWS_AS(
      extrinsic_hessian(std::vector<GnssMeasurement>{}, InitState{}, Pose{}),
      InsufficientMeasurements);

  Rng rng(131);
  std::vector<Vec3> rich;
  for (int k = 0; k < 12; ++k) {
    rich.push_back(Vec3(std::sin(0.7 * k), std::cos(0.4 * k), 0.2 * k));
  }
  const auto h = extrinsic_hessian(gnss_at(rich), state_from_positions(rich),
                                   Pose{rng.rotation(), rng.vec3(1.0)});
  CHECK((h - h.transpose()).norm() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Mat6> eig(h);
  CHECK(eig.eigenvalues().minCoeff() > -1e-10);
  const double ratio_rich =
      eig.eigenvalues().minCoeff() / eig.eigenvalues().maxCoeff();

  // collinear positions: rotation about the line is unconstrained
  std::vector<Vec3> line;
  for (int k = 0; k < 12; ++k) line.push_back(Vec3(0.5 * k, 0, 0));
  const auto h_line =
      extrinsic_hessian(gnss_at(line), state_from_positions(line), Pose{});
  Eigen::SelfAdjointEigenSolver<Mat6> eig_line(h_line);
  const double ratio_line = std::abs(eig_line.eigenvalues().minCoeff()) /
                            eig_line.eigenvalues().maxCoeff();
  CHECK(ratio_line < 1e-6);
  CHECK(ratio_line < 1e-3 * ratio_rich);
}

TEST_CASE("extrinsic hessian jacobians match finite differences") {
  Rng rng(137);
  std::vector<Vec3> pts;
  for (int k = 0; k < 4; ++k) pts.push_back(rng.vec3(3.0));
  const auto gnss = gnss_at(pts);
  const auto state = state_from_positions(pts);
  const Pose ext{rng.rotation(), rng.vec3(1.0)};

  // H must equal J^T Omega J of the stacked alignment residuals; differentiate
  // the residuals numerically and rebuild the quadratic form
  auto residuals = [&](const Pose& t) {
    VecX r(9 * (pts.size() - 1));
    for (std::size_t k = 1; k < pts.size(); ++k) {
      r.segment<3>(9 * (k - 1)) =
          (t.apply(pts[k]) - t.apply(pts[k - 1])) -
          (gnss[k].position - gnss[k - 1].position);
      r.segment<3>(9 * (k - 1) + 3) = t.apply(pts[k - 1]) - gnss[k - 1].position;
      r.segment<3>(9 * (k - 1) + 6) = t.apply(pts[k]) - gnss[k].position;
    }
    return r;
  };

  MatX jac(9 * (pts.size() - 1), 6);
  for (int c = 0; c < 6; ++c) {
    jac.col(c) = testing::central_diff5(
        [&](double h) {
          Vec6 d = Vec6::Zero();
          d(c) = h;
          return residuals(ext * exp_se3(d));
        },
        1e-5);
  }
  MatX omega = MatX::Zero(jac.rows(), jac.rows());
  for (std::size_t k = 1; k < pts.size(); ++k) {
    omega.block<3, 3>(9 * (k - 1), 9 * (k - 1)) =
        inverse_psd(MatX(gnss[k - 1].cov + gnss[k].cov));
    omega.block<3, 3>(9 * (k - 1) + 3, 9 * (k - 1) + 3) =
        inverse_psd(gnss[k - 1].cov);
    omega.block<3, 3>(9 * (k - 1) + 6, 9 * (k - 1) + 6) =
        inverse_psd(gnss[k].cov);
  }
  const Mat6 h_fd = (jac.transpose() * omega * jac);
  const Mat6 h = extrinsic_hessian(gnss, state, ext);
  CHECK((h - h_fd).norm() / h_fd.norm() < 1e-5);
}

TEST_CASE("trigger update rule") {
  // constant hessian: the ratio never changes, so the second record fires
  Rng rng(139);
  std::vector<Vec3> pts;
  for (int k = 0; k < 6; ++k) pts.push_back(rng.vec3(2.0));
  const auto h = extrinsic_hessian(gnss_at(pts), state_from_positions(pts), Pose{});

  TriggerTrace trace;
  trace.threshold = 1e-2;
  trace.min_epochs = 0;
  trace = update_trigger(trace, h);
  CHECK(std::isinf(trace.records[0].sv_ratio_rel_change));
  CHECK(!trace.activation_index.has_value());
  trace = update_trigger(trace, h);
  CHECK(trace.records[1].sv_ratio_rel_change == doctest::Approx(0.0));
  REQUIRE(trace.activation_index.has_value());
  CHECK(*trace.activation_index == 2);

  // rho sequence (100, 50, 49.9): delta = (inf, 0.5, 0.002) fires at 3
  TriggerTrace seq;
  seq.threshold = 1e-2;
  seq.min_epochs = 0;
  auto diag_hessian = [](double rho) {
    Mat6 m = Mat6::Identity();
    m(0, 0) = rho;
    return m;
  };
  seq = update_trigger(seq, diag_hessian(100.0));
  seq = update_trigger(seq, diag_hessian(50.0));
  seq = update_trigger(seq, diag_hessian(49.9));
  CHECK(seq.records[1].sv_ratio_rel_change == doctest::Approx(0.5));
  CHECK(seq.records[2].sv_ratio_rel_change == doctest::Approx(0.002).epsilon(1e-6));
  REQUIRE(seq.activation_index.has_value());
  CHECK(*seq.activation_index == 3);

  // min-epoch guard delays the same sequence
  TriggerTrace guarded;
  guarded.threshold = 1e-2;
  guarded.min_epochs = 3;
  guarded = update_trigger(guarded, h);
  guarded = update_trigger(guarded, h);
  CHECK(!guarded.activation_index.has_value());
  guarded = update_trigger(guarded, h);
  REQUIRE(guarded.activation_index.has_value());
  CHECK(*guarded.activation_index == 3);
}

TEST_CASE("rho is invariant to uniform covariance scaling") {
  Rng rng(149);
  std::vector<Vec3> pts;
  for (int k = 0; k < 8; ++k) {
    pts.push_back(Vec3(std::sin(0.9 * k), std::cos(0.5 * k), 0.1 * k));
  }
  const auto state = state_from_positions(pts);
  auto gnss_a = gnss_at(pts, 0.2);
  auto gnss_b = gnss_at(pts, 0.2);
  for (auto& m : gnss_b) m.cov *= 17.0;

  TriggerTrace ta, tb;
  ta = update_trigger(ta, extrinsic_hessian(gnss_a, state, Pose{}));
  tb = update_trigger(tb, extrinsic_hessian(gnss_b, state, Pose{}));
  CHECK(ta.records[0].sv_ratio ==
        doctest::Approx(tb.records[0].sv_ratio).epsilon(1e-9));
}

TEST_CASE("rigid alignment recovers a known transform") {
  Rng rng(151);
  const Pose truth{rng.rotation(), rng.vec3(3.0)};
  std::vector<Vec3> body, world;
  for (int k = 0; k < 10; ++k) {
    body.push_back(rng.vec3(2.0));
    world.push_back(truth.apply(body.back()));
  }
  const Pose est = align_rigid(body, world);
  CHECK((est.rotation - truth.rotation).norm() < 1e-9);
  CHECK((est.translation - truth.translation).norm() < 1e-9);

  // collinear input falls back to translation-only
  std::vector<Vec3> line_b, line_w;
  for (int k = 0; k < 5; ++k) {
    line_b.push_back(Vec3(1.0 * k, 0, 0));
    line_w.push_back(Vec3(1.0 * k + 2.0, 1.0, 0));
  }
  const Pose fallback = align_rigid(line_b, line_w);
  CHECK(fallback.rotation.isIdentity(1e-12));
}

TEST_CASE("two-stage pipeline on a discrete-consistent figure eight") {
  auto scenario = testing::make_discrete_scenario(
      TrajectoryModel::figure_eight(8.0),
      testing::DiscreteOptions{.duration = 8.0,
                               .gyro_noise = 1e-4,
                               .accel_noise = 1e-3,
                               .gnss_noise = 0.05,
                               .seed = 3});

  PipelineConfig config;
  config.imu_noise = ImuNoiseModel::isotropic(1e-4, 1e-3);
  const auto result = run_two_stage(scenario.imu, scenario.gnss, config);

  CHECK(result.triggered);
  CHECK(result.activation_index >= 2);
  CHECK(result.trace.records.size() == scenario.gnss.size() - 1);
  CHECK(result.state.size() == static_cast<int>(scenario.gnss.size()));

  std::vector<Vec3> truth_positions;
  for (const auto& kf : scenario.truth.keyframes) {
    truth_positions.push_back(kf.position);
  }
  const double ate = ate_rmse(result.world_positions(), truth_positions);
  CHECK(ate < 0.15);

  // deterministic rerun
  const auto repeat = run_two_stage(scenario.imu, scenario.gnss, config);
  CHECK(repeat.activation_index == result.activation_index);
  CHECK(repeat.state.keyframes.back().position ==
        result.state.keyframes.back().position);
}

TEST_CASE("pipeline never triggers on a short degenerate stream") {
  auto scenario = testing::make_discrete_scenario(
      TrajectoryModel::straight_line(1.0, 2.0),
      testing::DiscreteOptions{.duration = 2.0, .gnss_noise = 0.0, .seed = 5});

  PipelineConfig config;
  config.min_epochs = 1000;  // guard larger than the stream: cannot fire
  const auto result = run_two_stage(scenario.imu, scenario.gnss, config);
  CHECK(!result.triggered);
  CHECK(result.activation_index == -1);
  CHECK(!result.trace.activation_index.has_value());
}

TEST_CASE("forced activation index semantics") {
  auto scenario = testing::make_discrete_scenario(
      TrajectoryModel::figure_eight(4.0),
      testing::DiscreteOptions{.duration = 4.0, .gnss_noise = 0.1, .seed = 9});

  PipelineConfig config;
  const auto naive = run_fixed_activation(scenario.imu, scenario.gnss, config, 0);
  CHECK(naive.triggered);
  CHECK(naive.activation_index == 2);

  const auto late = run_fixed_activation(scenario.imu, scenario.gnss, config, 10);
  CHECK(late.triggered);
  CHECK(late.activation_index == 11);
}
