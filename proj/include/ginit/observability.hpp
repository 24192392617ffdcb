#pragma once

#include <map>
#include <string>
#include <vector>

#include "ginit/types.hpp"

namespace ginit {

// Observability analysis over a two-keyframe window {i, j}. The column layout is
// the 23-dimensional tangent [phi_i, v_i, p_i, phi_j, v_j, p_j, b_g, g(2)];
// gauge fixing removes the first nine columns.

struct ObservabilityOptions {
  bool gauge_fixed = false;
  // The angular-velocity residual constrains the (unmodeled) keyframe rate
  // together with the bias, so its row carries no constraint on this state and
  // is eliminated by default; set true to keep the printed identity block.
  bool gyro_row_as_printed = false;
  double gravity_mag = kDefaultGravityMagnitude;
};

struct ObservabilityMatrix {
  MatX matrix;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  bool gauge_fixed = false;
  std::map<std::string, std::pair<int, int>> row_blocks;  // name -> [begin, end)

  MatX rows(const std::string& block) const;
  MatX without_rows(const std::vector<std::string>& blocks) const;
};

ObservabilityMatrix build_observability_matrix(const KeyframeState& state_i,
                                               const KeyframeState& state_j,
                                               const Vec3& gyro_bias,
                                               const Vec3& gravity_dir, double dt,
                                               const ObservabilityOptions& options = {});

/// Count of singular values above rel_tol * sigma_max.
int numerical_rank(const MatX& m, double rel_tol = 1e-9);

/// Orthonormal basis of the right nullspace at the same tolerance (columns).
MatX nullspace(const MatX& m, double rel_tol = 1e-9);

// ---- Lie-derivative tower (orders 0..6, constant-rate flow) -----------------

struct LieGnssInputs {
  Vec3 gps_pos_i = Vec3::Zero();
  Vec3 gps_pos_j = Vec3::Zero();
  Vec3 gps_vel = Vec3::Zero();
  bool provided = false;
};

/// The seven stacked block rows of the order-k derivative of the output map.
struct LieDerivativeStack {
  int order = 0;
  Mat3 rotation_row = Mat3::Zero();
  Vec3 gyro_row = Vec3::Zero();       // zero for all k >= 1
  Vec3 gravity_row = Vec3::Zero();    // +-R_i^T (w_i^)^{k-1} g towers
  Vec3 velocity_row = Vec3::Zero();   // +-R_i^T (w_i^)^{k-1} (v_j - v_i - g dt)
  double distance_row = 0.0;
  Vec3 gnss_relative_row = Vec3::Zero();
  Vec3 gnss_absolute_row = Vec3::Zero();

  VecX flatten() const;  // 25 entries
};

/// Signed coefficients (-1)^m C(k,m) of the rotation-row expansion
/// sum_m c_m (w_i^)^m R_i^T (w_j^)^{k-m} R_j.
std::vector<double> lie_rotation_coefficients(int order);

/// Closed-form stack rows. Throws UnsupportedOrder for order < 0 or > 6.
LieDerivativeStack lie_derivative_stack(int order, const KeyframeState& state_i,
                                        const KeyframeState& state_j,
                                        const Vec3& gyro_bias, const Vec3& gravity,
                                        double dt,
                                        const LieGnssInputs& gnss = {});

/// Compares the closed-form rows of the given order against k-th central
/// differences of the flow outputs; returns the largest relative deviation.
double verify_lie_stack_numerically(int order, const KeyframeState& state_i,
                                    const KeyframeState& state_j,
                                    const Vec3& gyro_bias, const Vec3& gravity,
                                    double dt, const LieGnssInputs& gnss = {},
                                    double step = 0.0);

/// Gradient of the stacked derivatives (orders 0..max_order) with respect to the
/// reduced 7-parameter set {phi_j (3), b_g (3), inter-frame distance (1)},
/// computed by central differences.
MatX lie_gradient_matrix(const KeyframeState& state_i, const KeyframeState& state_j,
                         const Vec3& gyro_bias, const Vec3& gravity, double dt,
                         int max_order, const LieGnssInputs& gnss = {});

int rank_dG(const MatX& gradient, double rel_tol = 1e-9);

}  // namespace ginit
