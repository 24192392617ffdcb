#include "ginit/manifold.hpp"

#include <cmath>

#include "ginit/errors.hpp"

namespace ginit {

namespace {
// Below this angle the trigonometric coefficients switch to 2nd-order Taylor
// expansions; the truncation error stays below 1e-16.
constexpr double kSmallAngle = 1e-8;
}  // namespace

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& M, double tol) {
  if ((M + M.transpose()).norm() > tol) {
    throw NotSkewSymmetric("vee: input violates antisymmetry tolerance");
  }
  return Vec3(M(2, 1), M(0, 2), M(1, 0));
}

Mat3 exp_so3(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 W = hat(phi);
  double a, b;  // sin(t)/t and (1-cos(t))/t^2
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * W + b * (W * W);
}

Vec3 log_so3(const Mat3& R) {
  // Quaternion route: Eigen's conversion uses the largest-diagonal branch, which
  // stays well conditioned where the (R - R^T) formula degenerates (theta ~ pi).
  Eigen::Quaterniond q(R);
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 im(q.x(), q.y(), q.z());
  const double sin_half = im.norm();
  const double half = std::atan2(sin_half, q.w());
  double scale;
  if (sin_half < kSmallAngle) {
    scale = 2.0 + 2.0 * half * half / 3.0;  // 2 * half/sin(half) series
  } else {
    scale = 2.0 * half / sin_half;
  }
  return scale * im;
}

namespace {
// V(omega) = I + (1-cos)/t^2 W + (t-sin)/t^3 W^2, the SE(3) translation factor.
Mat3 se3_v(const Vec3& omega) {
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 W = hat(omega);
  double b, c;
  if (theta < kSmallAngle) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3::Identity() + b * W + c * (W * W);
}

Mat3 se3_v_inv(const Vec3& omega) {
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 W = hat(omega);
  double gamma;
  if (theta < kSmallAngle) {
    gamma = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    const double half = 0.5 * theta;
    gamma = (1.0 - half * std::cos(half) / std::sin(half)) / theta2;
  }
  return Mat3::Identity() - 0.5 * W + gamma * (W * W);
}
}  // namespace

Pose exp_se3(const Vec6& xi) {
  const Vec3 t = xi.head<3>();
  const Vec3 omega = xi.tail<3>();
  return Pose{exp_so3(omega), se3_v(omega) * t};
}

Vec6 log_se3(const Pose& T) {
  const Vec3 omega = log_so3(T.rotation);
  Vec6 xi;
  xi.head<3>() = se3_v_inv(omega) * T.translation;
  xi.tail<3>() = omega;
  return xi;
}

Mat3 right_jacobian_so3(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 W = hat(phi);
  double b, c;
  if (theta < kSmallAngle) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3::Identity() - b * W + c * (W * W);
}

Mat3 right_jacobian_inv_so3(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 W = hat(phi);
  double c;
  if (theta < kSmallAngle) {
    c = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    c = 1.0 / theta2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  return Mat3::Identity() + 0.5 * W + c * (W * W);
}

Mat3 rotation_from_reference(const Vec3& g) {
  // Geodesic rotation e3 -> g. The 1/(1+c) form degrades near the antipode of
  // its base axis, so the lower hemisphere uses the geodesic from -e3 composed
  // with a fixed 180-degree flip about e1: both charts stay well conditioned,
  // map e3 to g exactly, and the gravity-down pole resolves deterministically.
  const Vec3 gn = g.normalized();
  const double c = gn.z();
  if (c >= 0.0) {
    const Mat3 A = hat(Vec3(Vec3::UnitZ().cross(gn)));
    return Mat3::Identity() + A + A * A / (1.0 + c);
  }
  const Mat3 A = hat(Vec3((-Vec3::UnitZ()).cross(gn)));
  const Mat3 from_lower = Mat3::Identity() + A + A * A / (1.0 - c);
  Mat3 flip;
  flip << 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0;
  return from_lower * flip;
}

Mat32 s2_tangent_basis(const Vec3& g) {
  return rotation_from_reference(g).leftCols<2>();
}

Vec3 s2_boxplus(const Vec3& g, const Vec2& delta) {
  const double theta = delta.norm();
  double a;  // sin(t)/t
  if (theta < kSmallAngle) {
    a = 1.0 - theta * theta / 6.0;
  } else {
    a = std::sin(theta) / theta;
  }
  const Vec3 on_sphere(a * delta.x(), a * delta.y(), std::cos(theta));
  return (rotation_from_reference(g) * on_sphere).normalized();
}

Vec2 s2_boxminus(const Vec3& g2, const Vec3& g1) {
  if (g2.normalized().dot(g1.normalized()) < -1.0 + 1e-9) {
    throw AntipodalPoints("s2_boxminus: antipodal directions have no principal log");
  }
  const Vec3 u = rotation_from_reference(g1).transpose() * g2.normalized();
  const double sin_theta = u.head<2>().norm();
  const double theta = std::atan2(sin_theta, u.z());
  double scale;
  if (sin_theta < kSmallAngle) {
    scale = 1.0 + theta * theta / 6.0;  // theta/sin(theta) series (theta ~ 0 branch)
  } else {
    scale = theta / sin_theta;
  }
  return scale * u.head<2>();
}

bool is_rotation(const Mat3& R, double tol) {
  return (R.transpose() * R - Mat3::Identity()).norm() <= tol &&
         std::abs(R.determinant() - 1.0) <= tol;
}

}  // namespace ginit
