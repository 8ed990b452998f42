#pragma once

#include <cmath>

#include "saa/control.hpp"
#include "saa/distributions.hpp"

namespace saa {

// Tracking target used by both PDE experiments:
// y_d(x1, x2) = (1/6) exp(2 x1) sin(2 pi x1) sin(2 pi x2).
inline ScalarField standard_target_field() {
  return [](double x1, double x2) {
    return (1.0 / 6.0) * std::exp(2.0 * x1) * std::sin(2.0 * M_PI * x1) *
           std::sin(2.0 * M_PI * x2);
  };
}

// Right-hand-side profile r0 with r(x, xi) = xi_2 r0(x).
inline ScalarField standard_rhs_profile() {
  return [](double x1, double x2) { return std::exp(2.0 * x1) * std::sin(2.0 * M_PI * x2); };
}

inline ParamDistribution example1_distribution() {
  return ParamDistribution::product({ParamDistribution::truncated_normal(0.5, 3.5, 2.0, 0.25),
                                     ParamDistribution::uniform(-1.0, 1.0)});
}

inline ParamDistribution example2_distribution(int atoms_per_axis) {
  return discrete_grid(3.0, 5.0, 0.5, 2.5, atoms_per_axis);
}

// Scalar truncated-normal diffusion, separable random load, L1 + box
// regularizer (gamma = 5.5e-4, bounds [-1, 1]), alpha = 1e-3.
inline LQProblemSpec example1_problem_spec(int n) {
  LQProblemSpec spec;
  spec.n = n;
  spec.alpha = 1e-3;
  spec.target = standard_target_field();
  spec.diffusion = DiffusionModel::Scalar;
  spec.rhs = RhsModel::Separable;
  spec.rhs_profile = standard_rhs_profile();
  spec.reg.gamma = 5.5e-4;
  spec.reg.lower = -1.0;
  spec.reg.upper = 1.0;
  spec.distribution = example1_distribution();
  return spec;
}

// Two-block uniform diffusion on the atom grid, smooth case (no
// regularizer), alpha = 1e-4; samples come from the same discrete law that
// defines the reference problem.
inline LQProblemSpec example2_problem_spec(int n, int atoms_per_axis) {
  LQProblemSpec spec;
  spec.n = n;
  spec.alpha = 1e-4;
  spec.target = standard_target_field();
  spec.diffusion = DiffusionModel::TwoBlock;
  spec.rhs = RhsModel::Zero;
  spec.distribution = example2_distribution(atoms_per_axis);
  return spec;
}

}  // namespace saa
