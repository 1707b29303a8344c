#include "cvqkd/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cvqkd/errors.hpp"

namespace cvqkd::sdp {
namespace {

using cvqkd::hermitian_inner;

Eigen::VectorXd apply_A(const std::vector<Mat>& constraints, const Mat& x) {
  Eigen::VectorXd out(constraints.size());
  for (size_t i = 0; i < constraints.size(); ++i) out(int(i)) = hermitian_inner(constraints[i], x);
  return out;
}

Mat apply_A_adjoint(const std::vector<Mat>& constraints, const Eigen::VectorXd& y) {
  Mat out = Mat::Zero(constraints[0].rows(), constraints[0].cols());
  for (size_t i = 0; i < constraints.size(); ++i) out += y(int(i)) * constraints[i];
  return out;
}

struct Spectral {
  Eigen::VectorXd values;
  Mat vectors;

  Mat power(double p) const {
    Eigen::VectorXd powered = values;
    for (Eigen::Index i = 0; i < powered.size(); ++i) powered(i) = std::pow(powered(i), p);
    return vectors * powered.asDiagonal() * vectors.adjoint();
  }
};

Spectral spectral(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  return {es.eigenvalues(), es.eigenvectors()};
}

// Largest α in (0, 1] with X + α D ⪰ 0 (X ≻ 0), scaled by `fraction`.
double max_step(const Mat& x, const Mat& d, double fraction) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(d, x, Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  const double lmin = ges.eigenvalues().minCoeff();
  if (!std::isfinite(lmin))
    throw NumericalError("sdp::solve: step computation failed (iterate near-singular)");
  if (lmin >= 0) return 1.0;
  return std::min(1.0, -fraction / lmin);
}

// Solve M u = rhs for symmetric PSD M that may be rank-deficient (dependent
// constraints); eigenvalues below a relative threshold are treated as zero.
Eigen::VectorXd pinv_solve(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd& vals = es.eigenvalues();
  const double cutoff = std::max(vals.cwiseAbs().maxCoeff(), 1e-300) * 1e-12;
  Eigen::VectorXd coeffs = es.eigenvectors().transpose() * rhs;
  for (Eigen::Index i = 0; i < coeffs.size(); ++i)
    coeffs(i) = std::abs(vals(i)) > cutoff ? coeffs(i) / vals(i) : 0.0;
  return es.eigenvectors() * coeffs;
}

int find_identity_constraint(const std::vector<Mat>& constraints) {
  for (size_t i = 0; i < constraints.size(); ++i) {
    const Mat& g = constraints[i];
    if ((g - Mat::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff() < 1e-13) return int(i);
  }
  return -1;
}

}  // namespace

Solution solve(const Problem& problem, const Options& options) {
  const int n = problem.dim();
  const int m = problem.num_constraints();
  if (m == 0) throw Error("sdp::solve: no constraints");
  const Mat& c = problem.objective;
  const Eigen::VectorXd& b = problem.targets;

  const double b_scale = 1.0 + b.cwiseAbs().maxCoeff();
  const double c_scale = 1.0 + c.norm();

  // Infeasible cold start on the central ray.
  Mat x = Mat::Identity(n, n) * std::max(1.0, b.cwiseAbs().maxCoeff());
  Mat s = Mat::Identity(n, n) * std::max(1.0, c.norm() / std::sqrt(double(n)));
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);

  Solution sol;
  sol.iterations = 0;

  Eigen::MatrixXd schur(m, m);
  std::vector<Mat> wgw(static_cast<size_t>(m));

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    sol.iterations = iter;
    const Eigen::VectorXd rp = b - apply_A(problem.constraints, x);
    const Mat rd = c - s - apply_A_adjoint(problem.constraints, y);
    const double mu = hermitian_inner(x, s) / n;
    const double pobj = hermitian_inner(c, x);
    const double dobj = b.dot(y);
    const double rel_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double p_res = rp.cwiseAbs().maxCoeff() / b_scale;
    const double d_res = rd.norm() / c_scale;
    if (p_res < options.feas_tol && d_res < options.feas_tol && rel_gap < options.gap_tol) break;
    if (iter == options.max_iterations - 1)
      throw NumericalError("sdp::solve: max iterations reached", std::max({p_res, d_res, rel_gap}));

    // Nesterov-Todd scaling point W with W S W = X.
    const Spectral es_s = spectral(s);
    if (es_s.values.minCoeff() <= 0)
      throw NumericalError("sdp::solve: dual iterate lost positive definiteness",
                           es_s.values.minCoeff());
    const Mat s_half = es_s.power(0.5);
    const Mat s_inv_half = es_s.power(-0.5);
    const Mat s_inv = es_s.power(-1.0);
    const Mat t = s_half * x * s_half;
    const Mat w = s_inv_half * spectral(t).power(0.5) * s_inv_half;

    for (int j = 0; j < m; ++j) wgw[size_t(j)] = w * problem.constraints[size_t(j)] * w;
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) {
        schur(i, j) = hermitian_inner(problem.constraints[size_t(i)], wgw[size_t(j)]);
        schur(j, i) = schur(i, j);
      }
    const Mat w_rd_w = w * rd * w;
    const Eigen::VectorXd a_wrdw = apply_A(problem.constraints, w_rd_w);
    const Eigen::VectorXd a_sinv = apply_A(problem.constraints, s_inv);

    // Direction for centering parameter sigma; linearization
    // ΔX + W ΔS W = σμ S⁻¹ − X.
    auto direction = [&](double sigma_mu, Mat& dx, Eigen::VectorXd& dy, Mat& ds) {
      dy = pinv_solve(schur, b - sigma_mu * a_sinv + a_wrdw);
      ds = rd - apply_A_adjoint(problem.constraints, dy);
      dx = sigma_mu * s_inv - x - w * ds * w;
      dx = 0.5 * (dx + dx.adjoint()).eval();
      ds = 0.5 * (ds + ds.adjoint()).eval();
    };

    Mat dx_aff, ds_aff;
    Eigen::VectorXd dy_aff;
    direction(0.0, dx_aff, dy_aff, ds_aff);
    const double ap_aff = max_step(x, dx_aff, options.step_fraction);
    const double ad_aff = max_step(s, ds_aff, options.step_fraction);
    const double mu_aff =
        hermitian_inner(x + ap_aff * dx_aff, s + ad_aff * ds_aff) / n;
    const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 1e-8, 1.0);

    Mat dx, ds;
    Eigen::VectorXd dy;
    direction(sigma * mu, dx, dy, ds);
    const double ap = max_step(x, dx, options.step_fraction);
    const double ad = max_step(s, ds, options.step_fraction);
    x = (x + ap * dx).eval();
    y += ad * dy;
    s = (s + ad * ds).eval();
    x = 0.5 * (x + x.adjoint()).eval();
    s = 0.5 * (s + s.adjoint()).eval();
  }

  sol.primal = x;
  sol.primal_value = hermitian_inner(c, x);
  sol.primal_residual = (b - apply_A(problem.constraints, x)).cwiseAbs().maxCoeff();

  // Certify the dual bound: force the slack C − A*(y) exactly PSD by
  // shifting the multiplier of the identity constraint (unit trace).
  Mat slack = c - apply_A_adjoint(problem.constraints, y);
  slack = 0.5 * (slack + slack.adjoint()).eval();
  double lmin = spectral(slack).values.minCoeff();
  const int id_index = find_identity_constraint(problem.constraints);
  if (lmin < 0 && id_index >= 0) {
    y(id_index) += lmin;
    lmin = 0.0;  // slack is now (C − A*(y)) = old slack − lmin I ⪰ 0 exactly
  }
  sol.dual = y;
  sol.dual_value = b.dot(y);
  sol.dual_slack_min = lmin;
  sol.gap = sol.primal_value - sol.dual_value;
  return sol;
}

}  // namespace cvqkd::sdp
