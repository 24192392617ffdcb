#include "ginit/observability.hpp"

#include <cmath>
#include <functional>

#include "ginit/errors.hpp"
#include "ginit/manifold.hpp"

namespace ginit {

namespace {
constexpr int kMaxLieOrder = 6;

double binomial(int n, int k) {
  double c = 1.0;
  for (int m = 0; m < k; ++m) c = c * (n - m) / (m + 1);
  return c;
}
}  // namespace

MatX ObservabilityMatrix::rows(const std::string& block) const {
  const auto it = row_blocks.find(block);
  if (it == row_blocks.end()) {
    throw IndexOutOfRange("ObservabilityMatrix::rows: unknown block " + block);
  }
  return matrix.middleRows(it->second.first, it->second.second - it->second.first);
}

MatX ObservabilityMatrix::without_rows(const std::vector<std::string>& blocks) const {
  std::vector<int> drop;
  for (const auto& name : blocks) {
    const auto it = row_blocks.find(name);
    if (it == row_blocks.end()) {
      throw IndexOutOfRange("ObservabilityMatrix::without_rows: unknown block " + name);
    }
    for (int r = it->second.first; r < it->second.second; ++r) drop.push_back(r);
  }
  MatX out(matrix.rows() - static_cast<int>(drop.size()), matrix.cols());
  int w = 0;
  for (int r = 0; r < matrix.rows(); ++r) {
    if (std::find(drop.begin(), drop.end(), r) == drop.end()) {
      out.row(w++) = matrix.row(r);
    }
  }
  return out;
}

ObservabilityMatrix build_observability_matrix(const KeyframeState& state_i,
                                               const KeyframeState& state_j,
                                               const Vec3& gyro_bias,
                                               const Vec3& gravity_dir, double dt,
                                               const ObservabilityOptions& options) {
  (void)gyro_bias;  // the printed rows carry no preintegration bias Jacobians
  const double gmag = options.gravity_mag;
  const Vec3 gravity = gmag * gravity_dir;
  const Mat3 Rit = state_i.rotation.transpose();
  const Mat32 basis = s2_tangent_basis(gravity_dir);

  // full layout: phi_i 0, v_i 3, p_i 6, phi_j 9, v_j 12, p_j 15, b 18, g 21
  MatX full = MatX::Zero(24, 23);

  // rotation residual, linearized at the measurement-consistent point phi = 0
  const Mat3 jr_inv = right_jacobian_inv_so3(Vec3::Zero());
  full.block<3, 3>(0, 0) = -jr_inv * state_j.rotation.transpose() * state_i.rotation;
  full.block<3, 3>(0, 9) = jr_inv;

  // velocity increment residual
  const Vec3 dv = Rit * (state_j.velocity - state_i.velocity - gravity * dt);
  full.block<3, 3>(3, 0) = hat(dv);
  full.block<3, 3>(3, 3) = -Rit;
  full.block<3, 3>(3, 12) = Rit;
  full.block<3, 2>(3, 21) = -gmag * dt * Rit * basis;

  // position increment residual
  const Vec3 dp = Rit * (state_j.position - state_i.position -
                         state_i.velocity * dt - 0.5 * gravity * dt * dt);
  full.block<3, 3>(6, 0) = hat(dp);
  full.block<3, 3>(6, 3) = -Rit * dt;
  full.block<3, 3>(6, 6) = -Rit;
  full.block<3, 3>(6, 15) = Rit;
  full.block<3, 2>(6, 21) = -0.5 * gmag * dt * dt * Rit * basis;

  // relative GNSS
  full.block<3, 3>(9, 6) = -Mat3::Identity();
  full.block<3, 3>(9, 15) = Mat3::Identity();

  // absolute GNSS anchors
  full.block<3, 3>(12, 6) = Mat3::Identity();
  full.block<3, 3>(15, 15) = Mat3::Identity();

  // angular-velocity residual: eliminated unless explicitly kept
  if (options.gyro_row_as_printed) {
    full.block<3, 3>(18, 18) = Mat3::Identity();
  }

  // gravity residual
  full.block<3, 3>(21, 3) = -Mat3::Identity() / dt;
  full.block<3, 3>(21, 12) = Mat3::Identity() / dt;
  full.block<3, 2>(21, 21) = -gmag * basis;

  ObservabilityMatrix out;
  out.gauge_fixed = options.gauge_fixed;
  out.matrix = options.gauge_fixed ? MatX(full.rightCols(14)) : full;

  const char* row_names[] = {"r_dR", "r_dv", "r_dp", "r_d",
                             "r_p_i", "r_p_j", "r_w", "r_g"};
  for (int b = 0; b < 8; ++b) {
    out.row_blocks[row_names[b]] = {3 * b, 3 * b + 3};
    for (int a = 0; a < 3; ++a) {
      out.row_labels.push_back(std::string(row_names[b]) + "[" + std::to_string(a) + "]");
    }
  }
  const char* col_names[] = {"phi_i", "v_i", "p_i", "phi_j", "v_j", "p_j", "b_g"};
  const int first_col = options.gauge_fixed ? 3 : 0;
  for (int b = first_col; b < 7; ++b) {
    for (int a = 0; a < 3; ++a) {
      out.col_labels.push_back(std::string(col_names[b]) + "[" + std::to_string(a) + "]");
    }
  }
  out.col_labels.push_back("g[0]");
  out.col_labels.push_back("g[1]");
  return out;
}

int numerical_rank(const MatX& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<MatX> svd(m);
  const VecX s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0) return 0;
  int rank = 0;
  for (int k = 0; k < s.size(); ++k) {
    if (s(k) > rel_tol * s(0)) ++rank;
  }
  return rank;
}

MatX nullspace(const MatX& m, double rel_tol) {
  Eigen::JacobiSVD<MatX> svd(m, Eigen::ComputeFullV);
  const int rank = numerical_rank(m, rel_tol);
  return svd.matrixV().rightCols(m.cols() - rank);
}

// ---- Lie-derivative tower ----------------------------------------------------

VecX LieDerivativeStack::flatten() const {
  VecX v(25);
  int at = 0;
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < 3; ++r) v(at++) = rotation_row(r, c);
  }
  v.segment<3>(at) = gyro_row;
  at += 3;
  v.segment<3>(at) = gravity_row;
  at += 3;
  v.segment<3>(at) = velocity_row;
  at += 3;
  v(at++) = distance_row;
  v.segment<3>(at) = gnss_relative_row;
  at += 3;
  v.segment<3>(at) = gnss_absolute_row;
  return v;
}

std::vector<double> lie_rotation_coefficients(int order) {
  if (order < 0 || order > kMaxLieOrder) {
    throw UnsupportedOrder("lie_rotation_coefficients: order outside 0..6");
  }
  std::vector<double> coeffs(order + 1);
  for (int m = 0; m <= order; ++m) {
    coeffs[m] = ((m % 2) ? -1.0 : 1.0) * binomial(order, m);
  }
  return coeffs;
}

namespace {

Mat3 matrix_power(const Mat3& m, int p) {
  Mat3 out = Mat3::Identity();
  for (int k = 0; k < p; ++k) out = out * m;
  return out;
}

/// k-th derivative of ||dp + t dv|| at t = 0 by the Leibniz recursion on the
/// squared distance: sum_m C(k,m) f^(m) f^(k-m) equals 2|dv|^2 at k = 2 and
/// vanishes for k >= 3.
std::vector<double> distance_derivatives(const Vec3& dp, const Vec3& dv, int max_k) {
  std::vector<double> f(max_k + 1, 0.0);
  const double d = dp.norm();
  f[0] = d;
  if (max_k >= 1) f[1] = dp.dot(dv) / d;
  for (int k = 2; k <= max_k; ++k) {
    double rhs = (k == 2) ? 2.0 * dv.squaredNorm() : 0.0;
    for (int m = 1; m < k; ++m) rhs -= binomial(k, m) * f[m] * f[k - m];
    f[k] = rhs / (2.0 * d);
  }
  return f;
}

LieGnssInputs resolve_gnss(const LieGnssInputs& gnss, const KeyframeState& state_i,
                           const KeyframeState& state_j) {
  if (gnss.provided) return gnss;
  LieGnssInputs out;
  out.gps_pos_i = state_i.position;
  out.gps_pos_j = state_j.position;
  out.gps_vel = state_j.velocity;
  out.provided = true;
  return out;
}

}  // namespace

LieDerivativeStack lie_derivative_stack(int order, const KeyframeState& state_i,
                                        const KeyframeState& state_j,
                                        const Vec3& gyro_bias, const Vec3& gravity,
                                        double dt, const LieGnssInputs& gnss_in) {
  if (order < 0 || order > kMaxLieOrder) {
    throw UnsupportedOrder("lie_derivative_stack: order outside 0..6");
  }
  const LieGnssInputs gnss = resolve_gnss(gnss_in, state_i, state_j);
  const Mat3 Rit = state_i.rotation.transpose();
  const Mat3 wi = hat(state_i.omega);
  const Mat3 wj = hat(state_j.omega);
  const Vec3 dv_free = state_j.velocity - state_i.velocity - gravity * dt;

  LieDerivativeStack out;
  out.order = order;

  const auto coeffs = lie_rotation_coefficients(order);
  for (int m = 0; m <= order; ++m) {
    out.rotation_row += coeffs[m] * matrix_power(wi, m) * Rit *
                        matrix_power(wj, order - m) * state_j.rotation;
  }

  const auto dist = distance_derivatives(
      state_j.position - state_i.position,
      state_j.velocity - state_i.velocity, order);
  out.distance_row = dist[order];

  if (order == 0) {
    out.gyro_row = state_i.omega + gyro_bias;
    out.gravity_row = Rit * dv_free;
    out.velocity_row = Rit * (state_j.position - state_i.position -
                              state_i.velocity * dt - 0.5 * gravity * dt * dt);
    out.gnss_relative_row = (state_j.position - state_i.position) -
                            (gnss.gps_pos_j - gnss.gps_pos_i);
    out.gnss_absolute_row = state_j.position - gnss.gps_pos_j;
    return out;
  }

  const Mat3 wi_pow = matrix_power(wi, order - 1);
  out.gravity_row = -Rit * wi_pow * gravity;
  const double vel_sign = ((order - 1) % 2) ? -1.0 : 1.0;
  out.velocity_row = vel_sign * Rit * wi_pow * dv_free;
  if (order == 1) {
    out.gnss_absolute_row = state_j.velocity - gnss.gps_vel;
  }
  return out;
}

namespace {

// Flow outputs whose exact time derivatives at t = 0 are the stack rows: frame i
// carries its rate on the body side and frame j on the world side, matching the
// operator ordering (w_i^)^m R_i^T (w_j^)^{k-m} R_j of the expansion.
struct LieFlow {
  KeyframeState state_i, state_j;
  Vec3 gyro_bias;
  Vec3 gravity;
  double dt;
  LieGnssInputs gnss;

  VecX outputs(double t) const {
    LieDerivativeStack h;
    const Mat3 Rit = state_i.rotation.transpose();
    h.rotation_row = exp_so3(-state_i.omega * t) * Rit *
                     exp_so3(state_j.omega * t) * state_j.rotation;
    h.gyro_row = state_i.omega + gyro_bias;
    // integral of Exp(w s) over [0, t] is t * J_r(w t)^T (left Jacobian)
    const Mat3 int_plus = t * right_jacobian_so3(state_i.omega * t).transpose();
    const Mat3 int_minus = t * right_jacobian_so3(state_i.omega * t);
    const Vec3 dv_free = state_j.velocity - state_i.velocity - gravity * dt;
    h.gravity_row = Rit * dv_free - Rit * int_plus * gravity;
    h.velocity_row = Rit * (state_j.position - state_i.position -
                            state_i.velocity * dt - 0.5 * gravity * dt * dt) +
                     Rit * int_minus * dv_free;
    h.distance_row = ((state_j.position - state_i.position) +
                      t * (state_j.velocity - state_i.velocity))
                         .norm();
    h.gnss_relative_row = (state_j.position - state_i.position) -
                          (gnss.gps_pos_j - gnss.gps_pos_i);
    h.gnss_absolute_row = (state_j.position + state_j.velocity * t) -
                          (gnss.gps_pos_j + gnss.gps_vel * t);
    return h.flatten();
  }
};

double default_step(int order) {
  switch (order) {
    case 1: return 1e-4;
    case 2: return 1e-3;
    case 3: return 3e-3;
    case 4: return 1e-2;
    case 5: return 2e-2;
    default: return 4e-2;
  }
}

}  // namespace

double verify_lie_stack_numerically(int order, const KeyframeState& state_i,
                                    const KeyframeState& state_j,
                                    const Vec3& gyro_bias, const Vec3& gravity,
                                    double dt, const LieGnssInputs& gnss_in,
                                    double step) {
  if (order < 0 || order > kMaxLieOrder) {
    throw UnsupportedOrder("verify_lie_stack_numerically: order outside 0..6");
  }
  const LieGnssInputs gnss = resolve_gnss(gnss_in, state_i, state_j);
  const LieDerivativeStack closed =
      lie_derivative_stack(order, state_i, state_j, gyro_bias, gravity, dt, gnss);
  const VecX closed_flat = closed.flatten();

  if (order == 0) {
    return 0.0;  // the flow outputs at t = 0 are the stack by construction
  }

  const double h = (step > 0.0) ? step : default_step(order);
  LieFlow flow{state_i, state_j, gyro_bias, gravity, dt, gnss};
  const auto stencil = [&](double width) {
    VecX acc = VecX::Zero(25);
    for (int m = 0; m <= order; ++m) {
      const double sign = (m % 2) ? -1.0 : 1.0;
      acc += sign * binomial(order, m) * flow.outputs((0.5 * order - m) * width);
    }
    return VecX(acc / std::pow(width, order));
  };
  // Richardson step kills the leading h^2 truncation term
  const VecX fd = (4.0 * stencil(0.5 * h) - stencil(h)) / 3.0;

  double worst = 0.0;
  const int begins[] = {0, 9, 12, 15, 18, 19, 22};
  const int sizes[] = {9, 3, 3, 3, 1, 3, 3};
  for (int b = 0; b < 7; ++b) {
    const VecX diff = fd.segment(begins[b], sizes[b]) -
                      closed_flat.segment(begins[b], sizes[b]);
    const double scale = std::max(1.0, closed_flat.segment(begins[b], sizes[b]).norm());
    worst = std::max(worst, diff.norm() / scale);
  }
  return worst;
}

MatX lie_gradient_matrix(const KeyframeState& state_i, const KeyframeState& state_j,
                         const Vec3& gyro_bias, const Vec3& gravity, double dt,
                         int max_order, const LieGnssInputs& gnss_in) {
  if (max_order < 0 || max_order > kMaxLieOrder) {
    throw UnsupportedOrder("lie_gradient_matrix: order outside 0..6");
  }
  const LieGnssInputs gnss = resolve_gnss(gnss_in, state_i, state_j);

  const auto stack_all = [&](const KeyframeState& si, const KeyframeState& sj,
                             const Vec3& bias) {
    VecX all(25 * (max_order + 1));
    for (int k = 0; k <= max_order; ++k) {
      all.segment(25 * k, 25) =
          lie_derivative_stack(k, si, sj, bias, gravity, dt, gnss).flatten();
    }
    return all;
  };

  const double eps = 1e-6;
  MatX grad(25 * (max_order + 1), 7);
  const Vec3 dist_dir =
      (state_j.position - state_i.position).normalized();

  for (int c = 0; c < 7; ++c) {
    KeyframeState sj_plus = state_j, sj_minus = state_j;
    Vec3 bias_plus = gyro_bias, bias_minus = gyro_bias;
    if (c < 3) {
      Vec3 delta = Vec3::Zero();
      delta(c) = eps;
      sj_plus.rotation = state_j.rotation * exp_so3(delta);
      sj_minus.rotation = state_j.rotation * exp_so3(-delta);
    } else if (c < 6) {
      bias_plus(c - 3) += eps;
      bias_minus(c - 3) -= eps;
    } else {
      sj_plus.position += eps * dist_dir;
      sj_minus.position -= eps * dist_dir;
    }
    grad.col(c) = (stack_all(state_i, sj_plus, bias_plus) -
                   stack_all(state_i, sj_minus, bias_minus)) /
                  (2.0 * eps);
  }
  return grad;
}

int rank_dG(const MatX& gradient, double rel_tol) {
  return numerical_rank(gradient, rel_tol);
}

}  // namespace ginit
