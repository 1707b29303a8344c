#pragma once

// Independent Fock-basis channel oracle: the loss + excess-noise channel maps
// input |α⟩ to a displaced thermal state with displacement √η·α and thermal
// occupation n̄. Everything here is built from first principles (matrix
// exponential of the displacement generator, geometric thermal weights) so it
// shares no code path with channel.simulate_moments.

#include "cvqkd/fock.hpp"

namespace oracles {

inline cvqkd::Mat displacement(const cvqkd::FockSpace& space, cvqkd::Complex beta) {
  using cvqkd::Complex;
  using cvqkd::Mat;
  const auto ops = cvqkd::build_operator_set(space);
  const Mat generator = beta * ops.a.adjoint() - std::conj(beta) * ops.a;  // anti-Hermitian
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat(Complex(0, 1) * generator));
  Eigen::VectorXcd phases(es.eigenvalues().size());
  for (Eigen::Index i = 0; i < phases.size(); ++i)
    phases(i) = std::exp(Complex(0, -es.eigenvalues()(i)));
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

inline cvqkd::Mat displaced_thermal(const cvqkd::FockSpace& space, cvqkd::Complex beta,
                                    double nbar) {
  const int dim = space.dim();
  cvqkd::Mat rho = cvqkd::Mat::Zero(dim, dim);
  double weight = 1.0 / (1.0 + nbar);
  for (int m = 0; m < dim; ++m) {
    rho(m, m) = weight;
    weight *= nbar / (1.0 + nbar);
  }
  const cvqkd::Mat d = displacement(space, beta);
  return d * rho * d.adjoint();
}

}  // namespace oracles
