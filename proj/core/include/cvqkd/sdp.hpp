#pragma once

#include <vector>

#include "cvqkd/fock.hpp"

namespace cvqkd::sdp {

/// Standard-form semidefinite program over complex Hermitian matrices:
///   minimize Re Tr(C X)  s.t.  Re Tr(Γ_i X) = b_i,  X ⪰ 0.
/// Redundant (linearly dependent) constraints are allowed as long as the
/// target vector is consistent.
struct Problem {
  Mat objective;                 // C
  std::vector<Mat> constraints;  // Γ_i, Hermitian
  Eigen::VectorXd targets;       // b

  int dim() const { return int(objective.rows()); }
  int num_constraints() const { return int(constraints.size()); }
};

struct Options {
  double feas_tol = 1e-8;
  double gap_tol = 1e-7;
  int max_iterations = 200;
  double step_fraction = 0.98;
};

struct Solution {
  Mat primal;             // X at termination
  Eigen::VectorXd dual;   // y after certification shift
  double primal_value;    // Re Tr(C X)
  double dual_value;      // b·y with C − A*(y) ⪰ 0 exactly — a certified bound
  double gap;             // primal_value − dual_value
  double primal_residual; // ‖b − A(X)‖_∞
  double dual_slack_min;  // λ_min(C − A*(y)) after the shift (≥ −1e-14)
  int iterations;
};

/// Primal-dual path-following solve (NT scaling, Mehrotra-style adaptive
/// centering). The returned dual value is made rigorous by shifting the
/// multiplier of an identity constraint, when one is present, so that the
/// dual slack is exactly PSD; without an identity constraint the shift is
/// skipped and dual_slack_min reports any violation.
Solution solve(const Problem& problem, const Options& options = {});

}  // namespace cvqkd::sdp
