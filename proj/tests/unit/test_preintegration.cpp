#include <doctest.h>

#include <cmath>
#include <random>

#include "ginit/errors.hpp"
#include "ginit/manifold.hpp"
#include "ginit/preintegration.hpp"
#include "support/helpers.hpp"

using namespace ginit;

namespace {

std::vector<ImuSample> constant_stream(const Vec3& gyro, const Vec3& accel,
                                       double rate, double duration) {
  std::vector<ImuSample> out;
  const int n = static_cast<int>(duration * rate);
  for (int k = 0; k <= n; ++k) {
    out.push_back({static_cast<double>(k) / rate, gyro, accel});
  }
  return out;
}

}  // namespace

TEST_CASE("integrate rejects bad streams") {
  const ImuNoiseModel noise;
  CHECK_THROWS_AS(integrate({}, noise), EmptyStream);

  std::vector<ImuSample> one = {{0.0, Vec3::Zero(), Vec3::Zero()}};
  CHECK_THROWS_AS(integrate(one, noise), EmptyStream);

  std::vector<ImuSample> dup = {{0.0, Vec3::Zero(), Vec3::Zero()},
                                {0.0, Vec3::Zero(), Vec3::Zero()}};
  CHECK_THROWS_AS(integrate(dup, noise), NonMonotonicTimestamps);
}

TEST_CASE("stationary zero-noise stream") {
  const Vec3 accel(0.0, 0.0, 9.81);  // specific force of a level stationary body
  const auto samples = constant_stream(Vec3::Zero(), accel, 200.0, 1.0);
  const auto pre = integrate(samples, ImuNoiseModel{});

  CHECK(pre.delta_R.isIdentity(1e-12));
  CHECK(pre.cov.isZero(1e-18));
  CHECK(pre.delta_t == doctest::Approx((samples.size()) * 0.005).epsilon(1e-12));
  // velocity accumulates along the constant specific force
  CHECK(pre.delta_v.normalized().isApprox(accel.normalized(), 1e-12));
  CHECK(pre.delta_v.norm() == doctest::Approx(9.81 * pre.delta_t).epsilon(1e-12));
}

TEST_CASE("constant rotation matches closed form") {
  const auto samples =
      constant_stream(Vec3(0, 0, 1.0), Vec3::Zero(), 200.0, 1.0);
  // use exactly 1 s worth of samples: 200 intervals of 5 ms
  std::vector<ImuSample> window(samples.begin(), samples.begin() + 200);
  const auto pre = integrate(window, ImuNoiseModel{});
  CHECK(pre.delta_t == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((log_so3(pre.delta_R) - Vec3(0, 0, 1.0)).norm() < 1e-4);
}

TEST_CASE("closed-form constant-rate increments at 200 Hz") {
  // constant body rate and constant specific force: rotation chain is exact,
  // velocity/position follow the analytic integrals to first-order accuracy
  const Vec3 omega(0.15, -0.1, 0.25);
  const Vec3 accel(0.4, 9.6, 1.0);
  const double rate = 200.0, duration = 1.0;
  auto samples = constant_stream(omega, accel, rate, duration);
  samples.resize(static_cast<std::size_t>(rate * duration));
  const auto pre = integrate(samples, ImuNoiseModel{});

  CHECK((pre.delta_R - exp_so3(omega * duration)).norm() < 1e-9);

  // analytic: dv = int_0^T Exp(w s) a ds = T Jl(w T) a
  const Vec3 dv_closed =
      duration * right_jacobian_so3(omega * duration).transpose() * accel;
  CHECK((pre.delta_v - dv_closed).norm() / dv_closed.norm() < 1e-3);

  // analytic: dp = int_0^T int Exp a = sum expansion; compare against fine quadrature
  Vec3 dp_quad = Vec3::Zero();
  const int fine = 20000;
  for (int k = 0; k < fine; ++k) {
    const double s = (k + 0.5) * duration / fine;
    dp_quad += (duration - s) * (exp_so3(omega * s) * accel) * (duration / fine);
  }
  CHECK((pre.delta_p - dp_quad).norm() / dp_quad.norm() < 1e-3);
}

TEST_CASE("split and compose reproduces single pass") {
  testing::Rng rng(41);
  std::vector<ImuSample> samples;
  const double rate = 100.0;
  for (int k = 0; k < 120; ++k) {
    samples.push_back({k / rate, rng.vec3(0.8), rng.vec3(4.0)});
  }
  const auto whole = integrate(samples, ImuNoiseModel{});

  for (int split : {1, 17, 60, 118}) {
    std::vector<ImuSample> first(samples.begin(), samples.begin() + split + 1);
    std::vector<ImuSample> second(samples.begin() + split + 1, samples.end());
    if (first.size() < 2 || second.size() < 2) continue;
    const auto composed = compose(integrate(first, ImuNoiseModel{}),
                                  integrate(second, ImuNoiseModel{}));
    CHECK((composed.delta_R - whole.delta_R).norm() < 1e-9);
    CHECK((composed.delta_v - whole.delta_v).norm() < 1e-9);
    CHECK((composed.delta_p - whole.delta_p).norm() < 1e-9);
    CHECK(composed.delta_t == doctest::Approx(whole.delta_t).epsilon(1e-12));
  }
}

TEST_CASE("covariance is PSD with nondecreasing trace") {
  testing::Rng rng(43);
  const ImuNoiseModel noise = ImuNoiseModel::isotropic(1e-3, 1e-2);
  std::vector<ImuSample> samples;
  const double rate = 100.0;
  double prev_trace = 0.0;
  for (int k = 0; k < 200; ++k) {
    samples.push_back({k / rate, rng.vec3(0.5), rng.vec3(3.0)});
    if (k >= 1) {
      const auto pre = integrate(samples, noise);
      Eigen::SelfAdjointEigenSolver<Mat9> eig(pre.cov);
      CHECK(eig.eigenvalues().minCoeff() > -1e-18);
      CHECK(pre.cov.trace() >= prev_trace - 1e-18);
      prev_trace = pre.cov.trace();
    }
  }
}

TEST_CASE("bias jacobians against re-integration") {
  testing::Rng rng(47);
  std::vector<ImuSample> samples;
  for (int k = 0; k < 100; ++k) {
    samples.push_back({k / 100.0, rng.vec3(0.7), rng.vec3(3.0)});
  }
  const auto base = integrate(samples, ImuNoiseModel{});

  const Vec3 db = Vec3(0.8, -0.5, 1.1) * 1e-4;
  const auto shifted = integrate(samples, ImuNoiseModel{}, db);

  CHECK((base.delta_R_at(db) - shifted.delta_R).norm() < 1e-7);
  CHECK((base.delta_v_at(db) - shifted.delta_v).norm() < 1e-7);
  CHECK((base.delta_p_at(db) - shifted.delta_p).norm() < 1e-7);
}

TEST_CASE("gravity from increment") {
  PreintegratedImu pre;
  pre.delta_t = 2.0;

  // free fall: dv_ij = 0, v_j - v_i = g dt
  const Vec3 g(0, 0, -9.81);
  CHECK((gravity_from_increment(pre, Mat3::Identity(), Vec3::Zero(), g * 2.0) - g)
            .norm() < 1e-9);

  // zero everything
  CHECK(gravity_from_increment(pre, Mat3::Identity(), Vec3::Zero(), Vec3::Zero())
            .isZero(0.0));

  // stationary platform: dv = -R_i^T g dt
  testing::Rng rng(53);
  const Mat3 r_i = rng.rotation();
  pre.delta_v = -r_i.transpose() * g * pre.delta_t;
  const Vec3 est = gravity_from_increment(pre, r_i, Vec3::Zero(), Vec3::Zero());
  CHECK(std::abs(est.norm() - 9.81) < 1e-3);
  CHECK((est - g).norm() < 1e-9);
}

TEST_CASE("monte carlo covariance consistency (small sample)") {
  // the acceptance suite runs the full 10^4-sample check; this is a fast probe
  const double rate = 200.0;
  const int steps = 100;
  const double sigma_g = 1e-3, sigma_a = 1e-3;
  const ImuNoiseModel noise = ImuNoiseModel::isotropic(sigma_g, sigma_a);

  std::vector<ImuSample> clean;
  for (int k = 0; k < steps; ++k) {
    clean.push_back({k / rate, Vec3(0.2, -0.1, 0.3), Vec3(0.5, 9.7, 0.4)});
  }
  const auto nominal = integrate(clean, noise);

  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal;
  const int trials = 800;
  Mat9 sample_cov = Mat9::Zero();
  for (int t = 0; t < trials; ++t) {
    auto noisy = clean;
    for (auto& s : noisy) {
      for (int a = 0; a < 3; ++a) {
        s.gyro(a) += sigma_g * normal(rng);
        s.accel(a) += sigma_a * normal(rng);
      }
    }
    const auto pre = integrate(noisy, ImuNoiseModel{});
    Vec9 err;
    err.head<3>() = log_so3(nominal.delta_R.transpose() * pre.delta_R);
    err.segment<3>(3) = pre.delta_v - nominal.delta_v;
    err.tail<3>() = pre.delta_p - nominal.delta_p;
    sample_cov += err * err.transpose();
  }
  sample_cov /= trials;

  // sqrt(2/800) ~ 5% sampling error; allow a loose 30% here
  for (int d = 0; d < 9; ++d) {
    CHECK(sample_cov(d, d) ==
          doctest::Approx(nominal.cov(d, d)).epsilon(0.3));
  }
}
