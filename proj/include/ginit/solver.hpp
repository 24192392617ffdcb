#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "ginit/types.hpp"

namespace ginit {

enum class VarKind { Rotation, Euclidean, UnitSphere, PoseKind };

/// Unit direction on S^2 (distinct type so the state variant stays unambiguous).
struct UnitVec {
  Vec3 dir = -Vec3::UnitZ();
};

using VariableValue = std::variant<Mat3, VecX, UnitVec, Pose>;
using StateVec = std::vector<VariableValue>;

struct VariableDesc {
  VarKey key;
  VarKind kind = VarKind::Euclidean;
  int dim = 3;  // euclidean ambient dim; others implied by kind
  bool fixed = false;

  int tangent_dim() const {
    switch (kind) {
      case VarKind::Rotation: return 3;
      case VarKind::UnitSphere: return 2;
      case VarKind::PoseKind: return 6;
      default: return dim;
    }
  }
};

/// Ordered variable descriptors of one optimization problem. Tangent offsets are
/// assigned to non-fixed variables in declaration order.
class ParameterLayout {
 public:
  int add(VarKey key, VarKind kind, int dim = 3, bool fixed = false);

  int size() const { return static_cast<int>(vars_.size()); }
  const VariableDesc& at(int i) const { return vars_.at(i); }
  int index_of(VarKey key) const;  // -1 when absent
  bool has(VarKey key) const { return index_of(key) >= 0; }
  void set_fixed(VarKey key, bool fixed);

  /// Total tangent dimension over non-fixed variables.
  int tangent_dim() const;
  /// Offset of a variable in the tangent vector; -1 for fixed variables.
  int tangent_offset(int var_index) const;

 private:
  std::vector<VariableDesc> vars_;
};

/// Marks rotation, position and velocity of one keyframe fixed (idempotent).
ParameterLayout gauge_fix(ParameterLayout layout, int first_keyframe);

/// Applies a tangent-space step: rotations R*Exp(d), poses T*Exp(d), sphere
/// boxplus, euclidean addition. Fixed variables are left untouched.
StateVec retract(const ParameterLayout& layout, StateVec state, const VecX& delta);

struct SolveOptions {
  int max_iterations = 100;
  double cost_rel_tol = 1e-10;
  double gradient_tol = 1e-8;
  double initial_lambda = 1e-4;
  double lambda_up = 10.0;
  double lambda_down = 10.0;
  double max_lambda = 1e12;
};

enum class Termination { Gradient, CostDecrease, StepSize, MaxIterations };

struct SolveReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  Termination termination = Termination::MaxIterations;
  double final_gradient_norm = 0.0;
};

std::string to_string(Termination t);

using ResidualProvider = std::function<std::vector<ResidualBlock>(const StateVec&)>;

/// Retraction-based Levenberg-Marquardt with multiplicative damping. Throws
/// NonFiniteCost when the initial cost is not finite and SingularNormalEquations
/// when damping is exhausted without an acceptable step.
std::pair<StateVec, SolveReport> solve(const ResidualProvider& provider,
                                       const ParameterLayout& layout,
                                       StateVec initial,
                                       const SolveOptions& options = {});

// ---- InitState adapters ----------------------------------------------------

/// Layout for the initialization problem: per keyframe rotation, position,
/// angular velocity and velocity, then the shared gyro bias and gravity
/// direction, optionally the world-from-body extrinsic.
ParameterLayout make_init_layout(int num_keyframes, bool with_extrinsic);

StateVec pack_state(const InitState& state, const ParameterLayout& layout,
                    const Pose& extrinsic = {});
void unpack_state(const StateVec& values, const ParameterLayout& layout,
                  InitState* state, Pose* extrinsic = nullptr);

}  // namespace ginit
