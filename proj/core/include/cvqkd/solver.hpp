#pragma once

#include <string>
#include <vector>

#include "cvqkd/channel.hpp"
#include "cvqkd/fock.hpp"
#include "cvqkd/keymap.hpp"

namespace cvqkd {

/// Affine description of the feasible set S: observables Γ_i on A⊗B and
/// real targets γ_i. Order: 16 moment constraints (q,p,n,d blocks, k major),
/// unit trace, then the 16 partial-trace functionals (4 diagonal, then
/// Re/Im per pair (0,1),(0,2),(0,3),(1,2),(1,3),(2,3)).
struct ConstraintSet {
  std::vector<Mat> observables;
  Eigen::VectorXd targets;
  int dim = 0;  // 4·dim_B

  int size() const { return int(observables.size()); }
};

struct SolverConfig {
  int cutoff = 12;
  int max_fw_iterations = 300;
  double fw_gap_tol = 1e-6;
  double log_floor = 1e-12;
  double sdp_feas_tol = 1e-8;
  double sdp_gap_tol = 1e-7;
  double line_search_tol = 1e-6;

  void validate() const;
};

enum class SolveStatus { Converged, IterationCapped, Infeasible };

std::string to_string(SolveStatus status);

struct KeyRateResult {
  double upper_bound_objective = 0;
  double lower_bound_objective = 0;
  double delta_EC = 0;
  double key_rate = 0;
  int fw_iterations = 0;
  double fw_gap = 0;
  SolveStatus status = SolveStatus::Converged;
  // diagnostics
  double worst_sdp_gap = 0;
  double coherent_norm_deficit = 0;  // 1 − min_k ‖truncated |α_k⟩‖²
  double initial_min_eigenvalue = 0; // t* from the feasibility solve

  /// Compact single-token digest for dataset rows.
  std::string digest() const;
  /// Multi-line human-readable diagnostic record.
  std::string report() const;
};

ConstraintSet build_constraints(const MomentSet& moments, const Eigen::Matrix4cd& gram,
                                const std::array<double, 4>& probs, const FockSpace& space);

/// Feasible start with maximal smallest eigenvalue (solved as an SDP).
/// Throws InfeasibleError when the targets are inconsistent or certify
/// max-t < −sdp_feas_tol; the returned second value is t*.
std::pair<Mat, double> initial_feasible_state(const ConstraintSet& constraints,
                                              const SolverConfig& config);

/// f(ρ) = D(G(ρ) ‖ Z[G(ρ)]) in bits and its gradient
/// K†(log₂ G(ρ))K − K†(log₂ Z[G(ρ)])K.
std::pair<double, Mat> objective_and_gradient(const Mat& rho, const PostprocessingMap& map,
                                              const SolverConfig& config);

/// Eigenvalue-only evaluation of f(ρ); used by the line search.
double objective_value(const Mat& rho, const PostprocessingMap& map, const SolverConfig& config);

struct LinearMinimizeResult {
  Mat minimizer;
  double primal_value;
  double dual_value;  // certified
  double gap;
};

/// min Tr(Cσ) over the constrained spectrahedron, with a dual certificate.
LinearMinimizeResult sdp_linear_minimize(const Mat& c, const ConstraintSet& constraints,
                                         const SolverConfig& config);

struct Step1Result {
  Mat rho;
  double objective = 0;
  double gap = 0;
  int iterations = 0;
  double worst_sdp_gap = 0;
  double initial_min_eigenvalue = 0;
  std::vector<double> objective_trace;  // f at each iterate, for descent checks
};

Step1Result step1_upper_bound(const ConstraintSet& constraints, const PostprocessingMap& map,
                              const SolverConfig& config);

/// Certified lower bound f(ρ*) − Tr(ρ*∇f) + dual(min_σ Tr(σ∇f)).
double step2_lower_bound(const Mat& rho_star, const ConstraintSet& constraints,
                         const PostprocessingMap& map, const SolverConfig& config);

/// Full pipeline: channel → constraints → step 1 → step 2 → δ_EC → rate.
/// Infeasible targets yield status = Infeasible instead of throwing.
KeyRateResult compute_key_rate(const ProtocolParams& params, const SolverConfig& config);

}  // namespace cvqkd
