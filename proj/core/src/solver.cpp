#include "cvqkd/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <tuple>

#include "cvqkd/errors.hpp"
#include "cvqkd/sdp.hpp"

namespace cvqkd {
namespace {

// |i⟩⟨j|_A ⊗ I_B
Mat basis_embed(int i, int j, int dim_b) {
  Mat out = Mat::Zero(4 * dim_b, 4 * dim_b);
  out.block(i * dim_b, j * dim_b, dim_b, dim_b) = Mat::Identity(dim_b, dim_b);
  return out;
}

Eigen::VectorXd eigenvalues_only(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double clamped_entropy_sum(const Eigen::VectorXd& vals, double floor) {
  double sum = 0;
  for (Eigen::Index i = 0; i < vals.size(); ++i)
    sum += vals(i) * std::log2(std::max(vals(i), floor));
  return sum;
}

sdp::Options sdp_options(const SolverConfig& config) {
  sdp::Options opts;
  opts.feas_tol = config.sdp_feas_tol;
  opts.gap_tol = config.sdp_gap_tol;
  return opts;
}

std::string format_compact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

void SolverConfig::validate() const {
  if (cutoff < 1) throw Error("SolverConfig: cutoff must be >= 1");
  if (max_fw_iterations < 1) throw Error("SolverConfig: need at least one iteration");
  for (double tol : {fw_gap_tol, log_floor, sdp_feas_tol, sdp_gap_tol, line_search_tol})
    if (!(tol > 0)) throw Error("SolverConfig: tolerances must be positive");
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::IterationCapped: return "IterationCapped";
    case SolveStatus::Infeasible: return "Infeasible";
  }
  return "?";
}

std::string KeyRateResult::digest() const {
  std::ostringstream os;
  os << "st=" << to_string(status) << ";it=" << fw_iterations << ";gap=" << format_compact(fw_gap)
     << ";sdp=" << format_compact(worst_sdp_gap) << ";cut=" << format_compact(coherent_norm_deficit)
     << ";dec=" << format_compact(delta_EC);
  return os.str();
}

std::string KeyRateResult::report() const {
  std::ostringstream os;
  os << "status:                " << to_string(status) << "\n"
     << "upper bound (bits):    " << upper_bound_objective << "\n"
     << "lower bound (bits):    " << lower_bound_objective << "\n"
     << "delta_EC (bits):       " << delta_EC << "\n"
     << "key rate (bits/signal):" << key_rate << "\n"
     << "FW iterations:         " << fw_iterations << "\n"
     << "FW gap:                " << fw_gap << "\n"
     << "worst SDP gap:         " << worst_sdp_gap << "\n"
     << "cutoff norm deficit:   " << coherent_norm_deficit << "\n"
     << "initial min eigenvalue:" << initial_min_eigenvalue << "\n";
  return os.str();
}

ConstraintSet build_constraints(const MomentSet& moments, const Eigen::Matrix4cd& gram,
                                const std::array<double, 4>& probs, const FockSpace& space) {
  const int dim_b = space.dim();
  const OperatorSet ops = build_operator_set(space);
  ConstraintSet set;
  set.dim = 4 * dim_b;
  std::vector<double> targets;

  const std::array<const Mat*, 4> observables = {&ops.q, &ops.p, &ops.n, &ops.d};
  const std::array<const std::array<double, 4>*, 4> values = {&moments.mean_q, &moments.mean_p,
                                                              &moments.mean_n, &moments.mean_d};
  for (int o = 0; o < 4; ++o)
    for (int k = 0; k < 4; ++k) {
      set.observables.push_back(tensor_embed(k, *observables[size_t(o)], 4, dim_b));
      targets.push_back(probs[size_t(k)] * (*values[size_t(o)])[size_t(k)]);
    }

  set.observables.push_back(Mat::Identity(set.dim, set.dim));
  targets.push_back(1.0);

  for (int i = 0; i < 4; ++i) {
    set.observables.push_back(basis_embed(i, i, dim_b));
    targets.push_back(gram(i, i).real());
  }
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      set.observables.push_back(0.5 * (basis_embed(i, j, dim_b) + basis_embed(j, i, dim_b)));
      targets.push_back(gram(i, j).real());
      set.observables.push_back(Complex(0, 0.5) *
                                (basis_embed(i, j, dim_b) - basis_embed(j, i, dim_b)));
      targets.push_back(gram(i, j).imag());
    }

  set.targets = Eigen::Map<Eigen::VectorXd>(targets.data(), Eigen::Index(targets.size()));
  return set;
}

std::pair<Mat, double> initial_feasible_state(const ConstraintSet& constraints,
                                              const SolverConfig& config) {
  config.validate();
  const int n = constraints.dim;
  const int m = constraints.size();

  // Consistency of the affine system: the targets must be orthogonal to the
  // kernel of the constraint Gram matrix.
  Eigen::MatrixXd gram(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      gram(i, j) = hermitian_inner(constraints.observables[size_t(i)],
                                   constraints.observables[size_t(j)]);
      gram(j, i) = gram(i, j);
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ges(gram);
  const double cutoff = std::max(ges.eigenvalues().maxCoeff(), 1e-300) * 1e-12;
  Eigen::VectorXd coeffs = ges.eigenvectors().transpose() * constraints.targets;
  double kernel_residual = 0;
  for (int i = 0; i < m; ++i)
    if (ges.eigenvalues()(i) <= cutoff) kernel_residual = std::max(kernel_residual, std::abs(coeffs(i)));
  if (kernel_residual > 1e-9 * (1.0 + constraints.targets.cwiseAbs().maxCoeff()))
    throw InfeasibleError("targets are affinely inconsistent (kernel residual " +
                          std::to_string(kernel_residual) + ")");

  // max t s.t. ρ ⪰ tI, A(ρ) = b  ⇔  min Tr Y s.t. Ã(Y) = b̃, Y ⪰ 0
  // with Y = ρ − tI, t = (1 − Tr Y)/n via the unit-trace constraint.
  sdp::Problem reduced;
  reduced.objective = Mat::Identity(n, n);
  std::vector<double> targets;
  for (int i = 0; i < m; ++i) {
    const Mat& g = constraints.observables[size_t(i)];
    const double tr = g.trace().real();
    Mat gt = g - (tr / n) * Mat::Identity(n, n);
    if (gt.cwiseAbs().maxCoeff() < 1e-14) continue;  // the unit-trace row becomes 0 = 0
    reduced.constraints.push_back(std::move(gt));
    targets.push_back(constraints.targets(i) - tr / n);
  }
  reduced.targets = Eigen::Map<Eigen::VectorXd>(targets.data(), Eigen::Index(targets.size()));

  sdp::Solution sol = sdp::solve(reduced, sdp_options(config));

  // Certify the dual side: C = I, so a slack violation is repaired by
  // scaling y, giving a rigorous lower bound on min Tr Y.
  double dual_value = sol.dual_value;
  if (sol.dual_slack_min < 0) dual_value = dual_value / (1.0 - sol.dual_slack_min);
  const double t_upper = (1.0 - dual_value) / n;
  if (t_upper < -config.sdp_feas_tol)
    throw InfeasibleError("no density matrix satisfies the targets (max min-eigenvalue <= " +
                          std::to_string(t_upper) + ")");

  const double t_achieved = (1.0 - sol.primal.trace().real()) / n;
  Mat rho = sol.primal + t_achieved * Mat::Identity(n, n);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return {rho, t_achieved};
}

double objective_value(const Mat& rho, const PostprocessingMap& map, const SolverConfig& config) {
  const Mat g = apply_G(map, rho);
  const int nab = map.dim_AB();
  double entropy_g = clamped_entropy_sum(eigenvalues_only(g), config.log_floor);
  double entropy_zg = 0;
  for (int z = 0; z < 4; ++z)
    entropy_zg +=
        clamped_entropy_sum(eigenvalues_only(g.block(z * nab, z * nab, nab, nab)), config.log_floor);
  return entropy_g - entropy_zg;
}

std::pair<double, Mat> objective_and_gradient(const Mat& rho, const PostprocessingMap& map,
                                              const SolverConfig& config) {
  const double trace_defect = std::abs(rho.trace().real() - 1.0);
  if (trace_defect > 1e-8)
    throw NumericalError("objective_and_gradient: state trace must be 1", trace_defect);
  const double min_eig = eigenvalues_only(rho).minCoeff();
  if (min_eig < -1e-9)
    throw NumericalError("objective_and_gradient: state is not PSD", min_eig);

  const Mat g = apply_G(map, rho);
  const Mat log_g = hermitian_log(g, config.log_floor);

  const int nab = map.dim_AB();
  // log₂ Z[G(ρ)] blockwise; the pinched operator is block diagonal.
  Mat log_zg = Mat::Zero(g.rows(), g.cols());
  for (int z = 0; z < 4; ++z)
    log_zg.block(z * nab, z * nab, nab, nab) =
        hermitian_log(g.block(z * nab, z * nab, nab, nab), config.log_floor);

  const double f = hermitian_inner(g, log_g) - hermitian_inner(g, log_zg);
  Mat grad = apply_G_adjoint(map, log_g) - apply_G_adjoint(map, log_zg);
  grad = 0.5 * (grad + grad.adjoint()).eval();
  return {f, grad};
}

LinearMinimizeResult sdp_linear_minimize(const Mat& c, const ConstraintSet& constraints,
                                         const SolverConfig& config) {
  sdp::Problem problem;
  problem.objective = c;
  problem.constraints = constraints.observables;
  problem.targets = constraints.targets;
  sdp::Solution sol = sdp::solve(problem, sdp_options(config));
  return {sol.primal, sol.primal_value, sol.dual_value, sol.gap};
}

Step1Result step1_upper_bound(const ConstraintSet& constraints, const PostprocessingMap& map,
                              const SolverConfig& config) {
  Step1Result out;
  auto [rho, t0] = initial_feasible_state(constraints, config);
  out.initial_min_eigenvalue = t0;

  auto [f, grad] = objective_and_gradient(rho, map, config);
  out.objective_trace.push_back(f);

  int iter = 0;
  double gap = std::numeric_limits<double>::infinity();
  for (; iter < config.max_fw_iterations; ++iter) {
    LinearMinimizeResult lin = sdp_linear_minimize(grad, constraints, config);
    out.worst_sdp_gap = std::max(out.worst_sdp_gap, std::abs(lin.gap));
    const Mat direction = lin.minimizer - rho;
    gap = -hermitian_inner(grad, direction);  // Tr((ρ − σ)∇f)
    if (gap < config.fw_gap_tol) break;

    // Golden-section line search for min_t f(ρ + t·direction), t ∈ [0,1].
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.0, b = 1.0;
    double t1 = b - inv_phi * (b - a), t2 = a + inv_phi * (b - a);
    auto eval = [&](double t) { return objective_value(rho + t * direction, map, config); };
    double f1 = eval(t1), f2 = eval(t2);
    double best_t = t1, best_f = f1;
    if (f2 < best_f) { best_t = t2; best_f = f2; }
    while (b - a > config.line_search_tol) {
      if (f1 <= f2) {
        b = t2; t2 = t1; f2 = f1;
        t1 = b - inv_phi * (b - a);
        f1 = eval(t1);
        if (f1 < best_f) { best_f = f1; best_t = t1; }
      } else {
        a = t1; t1 = t2; f1 = f2;
        t2 = a + inv_phi * (b - a);
        f2 = eval(t2);
        if (f2 < best_f) { best_f = f2; best_t = t2; }
      }
    }
    if (best_f > f) { best_t = 0.0; best_f = f; }  // never step uphill

    rho = (rho + best_t * direction).eval();
    rho = 0.5 * (rho + rho.adjoint()).eval();
    std::tie(f, grad) = objective_and_gradient(rho, map, config);
    out.objective_trace.push_back(f);
  }

  out.rho = std::move(rho);
  out.objective = f;
  out.gap = gap;
  out.iterations = iter;
  return out;
}

double step2_lower_bound(const Mat& rho_star, const ConstraintSet& constraints,
                         const PostprocessingMap& map, const SolverConfig& config) {
  auto [f, grad] = objective_and_gradient(rho_star, map, config);
  LinearMinimizeResult lin = sdp_linear_minimize(grad, constraints, config);
  return f - hermitian_inner(grad, rho_star) + lin.dual_value;
}

KeyRateResult compute_key_rate(const ProtocolParams& params, const SolverConfig& config) {
  params.validate();
  config.validate();
  const FockSpace space{config.cutoff};

  const MomentSet moments = simulate_moments(params);
  const Eigen::Matrix4cd gram = gram_matrix(params);
  const ConstraintSet constraints = build_constraints(moments, gram, params.probs, space);
  const PostprocessingMap map = build_postprocessing_map(build_region_operators(space));

  KeyRateResult result;
  double deficit = 0;
  for (int k = 0; k < 4; ++k)
    deficit = std::max(deficit, 1.0 - coherent_vector(space, params.alpha_k(k)).norm2());
  result.coherent_norm_deficit = deficit;

  Step1Result step1;
  try {
    step1 = step1_upper_bound(constraints, map, config);
  } catch (const InfeasibleError&) {
    result.status = SolveStatus::Infeasible;
    return result;
  }
  result.upper_bound_objective = step1.objective;
  result.fw_iterations = step1.iterations;
  result.fw_gap = step1.gap;
  result.worst_sdp_gap = step1.worst_sdp_gap;
  result.initial_min_eigenvalue = step1.initial_min_eigenvalue;
  result.lower_bound_objective = step2_lower_bound(step1.rho, constraints, map, config);

  const Eigen::Matrix4d cond = conditional_distribution(params);
  result.delta_EC = error_correction_leakage(cond, params.probs, params.reconciliation_eff);

  const double p_pass = 1.0;  // postselection fixed at 0
  result.key_rate = std::max(0.0, result.lower_bound_objective - p_pass * result.delta_EC);
  result.status = step1.gap < config.fw_gap_tol ? SolveStatus::Converged
                                                : SolveStatus::IterationCapped;
  return result;
}

}  // namespace cvqkd
