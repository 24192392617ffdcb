#pragma once

#include "ginit/types.hpp"

namespace ginit {

// Exact, numerically safe operations on SO(3), SE(3) and the unit sphere S^2.
// All angles in radians. Rotations are 3x3 direction-cosine matrices acting on
// column vectors. Tangent perturbations are applied on the right:
//   R <- R * exp_so3(delta),  T <- T * exp_se3(delta),  g <- s2_boxplus(g, delta).

/// Skew-symmetric matrix of v, so that hat(a) * b == a x b.
Mat3 hat(const Vec3& v);

/// Inverse of hat(). Throws NotSkewSymmetric if M is not antisymmetric within tol.
Vec3 vee(const Mat3& M, double tol = 1e-9);

/// Rodrigues formula with a second-order Taylor branch below the small-angle threshold.
Mat3 exp_so3(const Vec3& phi);

/// Principal logarithm, ||result|| <= pi. Robust near 0 and pi.
Vec3 log_so3(const Mat3& R);

/// xi = [t; omega]. Rotation part exp_so3(omega), translation V(omega) * t.
Pose exp_se3(const Vec6& xi);

/// Inverse of exp_se3, returns [V^-1 t; log_so3(R)].
Vec6 log_se3(const Pose& T);

/// Right Jacobian of SO(3) and its inverse (closed forms with Taylor branches).
Mat3 right_jacobian_so3(const Vec3& phi);
Mat3 right_jacobian_inv_so3(const Vec3& phi);

/// Rotation taking the reference axis e3 = (0,0,1) to the unit vector g along the
/// minimal geodesic; the antipodal case g ~ -e3 resolves to a 180 degree rotation
/// about e1 so the result is deterministic everywhere.
Mat3 rotation_from_reference(const Vec3& g);

/// Orthonormal basis of the tangent plane at g (columns orthogonal to g). Equals the
/// first two columns of rotation_from_reference(g), which makes it exactly the
/// first-order Jacobian of s2_boxplus at delta = 0.
Mat32 s2_tangent_basis(const Vec3& g);

/// Sphere retraction g (+) delta and its inverse. boxminus throws AntipodalPoints
/// when the two directions are opposite within tolerance.
Vec3 s2_boxplus(const Vec3& g, const Vec2& delta);
Vec2 s2_boxminus(const Vec3& g2, const Vec3& g1);

/// Validation helpers.
bool is_rotation(const Mat3& R, double tol = 1e-9);

}  // namespace ginit
