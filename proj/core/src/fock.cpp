#include "cvqkd/fock.hpp"

#include <cmath>
#include <stdexcept>

#include "cvqkd/errors.hpp"

namespace cvqkd {

OperatorSet build_operator_set(const FockSpace& space) {
  if (!space.valid()) throw Error("FockSpace cutoff must be >= 1");
  const int dim = space.dim();
  OperatorSet ops;
  ops.a = Mat::Zero(dim, dim);
  for (int m = 1; m < dim; ++m) ops.a(m - 1, m) = std::sqrt(double(m));
  const Mat adag = ops.a.adjoint();
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  ops.q = (ops.a + adag) * inv_sqrt2;
  ops.p = Complex(0, 1) * (adag - ops.a) * inv_sqrt2;
  ops.n = adag * ops.a;
  ops.d = ops.q * ops.q - ops.p * ops.p;
  return ops;
}

CoherentState coherent_vector(const FockSpace& space, Complex alpha) {
  const int dim = space.dim();
  CoherentState state;
  state.amplitude = alpha;
  state.vec = Vec(dim);
  // vec[m] = e^{−|α|²/2} α^m / √(m!), built up recursively.
  Complex term = std::exp(-0.5 * std::norm(alpha));
  state.vec(0) = term;
  for (int m = 1; m < dim; ++m) {
    term *= alpha / std::sqrt(double(m));
    state.vec(m) = term;
  }
  return state;
}

Complex coherent_overlap(Complex alpha, Complex beta) {
  return std::exp(-0.5 * (std::norm(alpha) + std::norm(beta)) + std::conj(beta) * alpha);
}

Mat hermitian_log(const Mat& m, double floor) {
  if (floor <= 0) throw Error("hermitian_log floor must be positive");
  const double herm_defect = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (herm_defect > 1e-10)
    throw NumericalError("hermitian_log: input not Hermitian", herm_defect);
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  Eigen::VectorXd logs = es.eigenvalues();
  for (Eigen::Index i = 0; i < logs.size(); ++i)
    logs(i) = std::log2(std::max(logs(i), floor));
  return es.eigenvectors() * logs.asDiagonal() * es.eigenvectors().adjoint();
}

Mat tensor_embed(int proj_index, const Mat& op, int dim_a, int dim_b) {
  if (proj_index < 0 || proj_index >= dim_a)
    throw std::out_of_range("tensor_embed: projector index out of range");
  if (op.rows() != dim_b || op.cols() != dim_b)
    throw Error("tensor_embed: operator does not match dim_b");
  Mat out = Mat::Zero(dim_a * dim_b, dim_a * dim_b);
  out.block(proj_index * dim_b, proj_index * dim_b, dim_b, dim_b) = op;
  return out;
}

double hermitian_inner(const Mat& a, const Mat& b) {
  return a.conjugate().cwiseProduct(b).sum().real();
}

Mat partial_trace_B(const Mat& rho, int dim_a, int dim_b) {
  if (rho.rows() != dim_a * dim_b || rho.cols() != dim_a * dim_b)
    throw Error("partial_trace_B: dimension mismatch");
  Mat out = Mat::Zero(dim_a, dim_a);
  for (int i = 0; i < dim_a; ++i)
    for (int j = 0; j < dim_a; ++j)
      out(i, j) = rho.block(i * dim_b, j * dim_b, dim_b, dim_b).trace();
  return out;
}

}  // namespace cvqkd
