#include "ginit/solver.hpp"

#include <cmath>
#include <map>

#include "ginit/errors.hpp"
#include "ginit/manifold.hpp"

namespace ginit {

int ParameterLayout::add(VarKey key, VarKind kind, int dim, bool fixed) {
  vars_.push_back(VariableDesc{key, kind, dim, fixed});
  return static_cast<int>(vars_.size()) - 1;
}

int ParameterLayout::index_of(VarKey key) const {
  for (int i = 0; i < size(); ++i) {
    if (vars_[i].key == key) return i;
  }
  return -1;
}

void ParameterLayout::set_fixed(VarKey key, bool fixed) {
  const int i = index_of(key);
  if (i < 0) throw IndexOutOfRange("set_fixed: unknown variable");
  vars_[i].fixed = fixed;
}

int ParameterLayout::tangent_dim() const {
  int dim = 0;
  for (const auto& v : vars_) {
    if (!v.fixed) dim += v.tangent_dim();
  }
  return dim;
}

int ParameterLayout::tangent_offset(int var_index) const {
  if (vars_.at(var_index).fixed) return -1;
  int off = 0;
  for (int i = 0; i < var_index; ++i) {
    if (!vars_[i].fixed) off += vars_[i].tangent_dim();
  }
  return off;
}

ParameterLayout gauge_fix(ParameterLayout layout, int first_keyframe) {
  for (VarType t : {VarType::Rotation, VarType::Position, VarType::Velocity}) {
    layout.set_fixed({t, first_keyframe}, true);
  }
  return layout;
}

StateVec retract(const ParameterLayout& layout, StateVec state, const VecX& delta) {
  for (int i = 0; i < layout.size(); ++i) {
    const auto& desc = layout.at(i);
    if (desc.fixed) continue;
    const int off = layout.tangent_offset(i);
    switch (desc.kind) {
      case VarKind::Rotation: {
        auto& r = std::get<Mat3>(state[i]);
        r = r * exp_so3(delta.segment<3>(off));
        break;
      }
      case VarKind::Euclidean: {
        auto& v = std::get<VecX>(state[i]);
        v += delta.segment(off, desc.dim);
        break;
      }
      case VarKind::UnitSphere: {
        auto& u = std::get<UnitVec>(state[i]);
        u.dir = s2_boxplus(u.dir, delta.segment<2>(off));
        break;
      }
      case VarKind::PoseKind: {
        auto& t = std::get<Pose>(state[i]);
        t = t * exp_se3(delta.segment<6>(off));
        break;
      }
    }
  }
  return state;
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Gradient: return "gradient";
    case Termination::CostDecrease: return "cost_decrease";
    case Termination::StepSize: return "step_size";
    default: return "max_iterations";
  }
}

namespace {

struct NormalEquations {
  MatX h;
  VecX b;  // J^T W r
};

NormalEquations assemble(const std::vector<ResidualBlock>& blocks,
                         const ParameterLayout& layout,
                         const std::map<VarKey, int>& offsets) {
  const int dim = layout.tangent_dim();
  NormalEquations eq{MatX::Zero(dim, dim), VecX::Zero(dim)};
  for (const auto& block : blocks) {
    const VecX wr = block.weight * block.value;
    for (const auto& [key_a, jac_a] : block.jacobians) {
      const auto it_a = offsets.find(key_a);
      if (it_a == offsets.end()) continue;
      const int oa = it_a->second;
      eq.b.segment(oa, jac_a.cols()) += jac_a.transpose() * wr;
      for (const auto& [key_b, jac_b] : block.jacobians) {
        const auto it_b = offsets.find(key_b);
        if (it_b == offsets.end()) continue;
        eq.h.block(oa, it_b->second, jac_a.cols(), jac_b.cols()) +=
            jac_a.transpose() * (block.weight * jac_b);
      }
    }
  }
  return eq;
}

std::map<VarKey, int> free_offsets(const ParameterLayout& layout) {
  std::map<VarKey, int> offsets;
  for (int i = 0; i < layout.size(); ++i) {
    if (!layout.at(i).fixed) offsets[layout.at(i).key] = layout.tangent_offset(i);
  }
  return offsets;
}

double cost_of(const std::vector<ResidualBlock>& blocks) {
  double c = 0.0;
  for (const auto& b : blocks) c += b.squared_norm();
  return c;
}

}  // namespace

std::pair<StateVec, SolveReport> solve(const ResidualProvider& provider,
                                       const ParameterLayout& layout,
                                       StateVec initial,
                                       const SolveOptions& options) {
  StateVec state = std::move(initial);
  std::vector<ResidualBlock> blocks = provider(state);
  double cost = cost_of(blocks);
  if (!std::isfinite(cost)) {
    throw NonFiniteCost("solve: initial cost is not finite");
  }

  SolveReport report;
  report.initial_cost = cost;
  report.final_cost = cost;

  const int dim = layout.tangent_dim();
  const std::map<VarKey, int> offsets = free_offsets(layout);
  double lambda = options.initial_lambda;

  for (int it = 0; it < options.max_iterations; ++it) {
    const NormalEquations eq = assemble(blocks, layout, offsets);
    report.final_gradient_norm = dim > 0 ? eq.b.lpNorm<Eigen::Infinity>() : 0.0;
    if (report.final_gradient_norm < options.gradient_tol) {
      report.converged = true;
      report.termination = Termination::Gradient;
      break;
    }

    bool accepted = false;
    bool stalled = false;
    while (!accepted && !stalled) {
      VecX damp = eq.h.diagonal().cwiseMax(1e-12);
      MatX h_damped = eq.h;
      h_damped.diagonal() += lambda * damp;
      Eigen::LDLT<MatX> ldlt(h_damped);
      VecX step;
      bool solvable = ldlt.info() == Eigen::Success;
      if (solvable) {
        step = ldlt.solve(-eq.b);
        solvable = step.allFinite();
      }
      if (solvable && step.lpNorm<Eigen::Infinity>() < 1e-14) {
        // damping has shrunk the step to the numerical floor
        report.converged = true;
        report.termination = Termination::StepSize;
        stalled = true;
        break;
      }
      if (solvable) {
        StateVec candidate = retract(layout, state, step);
        std::vector<ResidualBlock> cand_blocks = provider(candidate);
        const double cand_cost = cost_of(cand_blocks);
        if (std::isfinite(cand_cost) && cand_cost < cost) {
          const double decrease = cost - cand_cost;
          state = std::move(candidate);
          blocks = std::move(cand_blocks);
          cost = cand_cost;
          lambda /= options.lambda_down;
          accepted = true;
          report.final_cost = cost;
          if (decrease < options.cost_rel_tol * std::max(cost, 1.0)) {
            report.converged = true;
            report.termination = Termination::CostDecrease;
          }
        }
      }
      if (!accepted) {
        lambda = (lambda == 0.0) ? 1e-4 : lambda * options.lambda_up;
        if (lambda > options.max_lambda) {
          throw SingularNormalEquations(
              "solve: damping exhausted without an acceptable step");
        }
      }
    }
    if (stalled) break;
    ++report.iterations;
    if (report.converged) break;
  }
  report.final_cost = cost;
  return {std::move(state), report};
}

ParameterLayout make_init_layout(int num_keyframes, bool with_extrinsic) {
  ParameterLayout layout;
  for (int k = 0; k < num_keyframes; ++k) {
    layout.add({VarType::Rotation, k}, VarKind::Rotation);
    layout.add({VarType::Position, k}, VarKind::Euclidean, 3);
    layout.add({VarType::Omega, k}, VarKind::Euclidean, 3);
    layout.add({VarType::Velocity, k}, VarKind::Euclidean, 3);
  }
  layout.add({VarType::GyroBias, 0}, VarKind::Euclidean, 3);
  layout.add({VarType::GravityDir, 0}, VarKind::UnitSphere);
  if (with_extrinsic) {
    layout.add({VarType::Extrinsic, 0}, VarKind::PoseKind);
  }
  return layout;
}

StateVec pack_state(const InitState& state, const ParameterLayout& layout,
                    const Pose& extrinsic) {
  StateVec values(layout.size());
  for (int i = 0; i < layout.size(); ++i) {
    const VarKey key = layout.at(i).key;
    switch (key.type) {
      case VarType::Rotation:
        values[i] = state.keyframes.at(key.index).rotation;
        break;
      case VarType::Position:
        values[i] = VecX(state.keyframes.at(key.index).position);
        break;
      case VarType::Omega:
        values[i] = VecX(state.keyframes.at(key.index).omega);
        break;
      case VarType::Velocity:
        values[i] = VecX(state.keyframes.at(key.index).velocity);
        break;
      case VarType::GyroBias:
        values[i] = VecX(state.gyro_bias);
        break;
      case VarType::GravityDir:
        values[i] = UnitVec{state.gravity_dir};
        break;
      case VarType::Extrinsic:
        values[i] = extrinsic;
        break;
      default:
        throw IndexOutOfRange("pack_state: layout holds a non-init variable");
    }
  }
  return values;
}

void unpack_state(const StateVec& values, const ParameterLayout& layout,
                  InitState* state, Pose* extrinsic) {
  for (int i = 0; i < layout.size(); ++i) {
    const VarKey key = layout.at(i).key;
    switch (key.type) {
      case VarType::Rotation:
        state->keyframes.at(key.index).rotation = std::get<Mat3>(values[i]);
        break;
      case VarType::Position:
        state->keyframes.at(key.index).position = std::get<VecX>(values[i]);
        break;
      case VarType::Omega:
        state->keyframes.at(key.index).omega = std::get<VecX>(values[i]);
        break;
      case VarType::Velocity:
        state->keyframes.at(key.index).velocity = std::get<VecX>(values[i]);
        break;
      case VarType::GyroBias:
        state->gyro_bias = std::get<VecX>(values[i]);
        break;
      case VarType::GravityDir:
        state->gravity_dir = std::get<UnitVec>(values[i]).dir;
        break;
      case VarType::Extrinsic:
        if (extrinsic != nullptr) *extrinsic = std::get<Pose>(values[i]);
        break;
      default:
        break;
    }
  }
}

}  // namespace ginit
