#pragma once

#include <random>

#include "cvqkd/fock.hpp"

namespace test_support {

inline cvqkd::Mat random_hermitian(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g;
  cvqkd::Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = cvqkd::Complex(g(rng), g(rng));
  return scale * 0.5 * (m + m.adjoint()).eval();
}

inline cvqkd::Mat random_density(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  cvqkd::Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = cvqkd::Complex(g(rng), g(rng));
  cvqkd::Mat rho = m * m.adjoint();
  return rho / rho.trace().real();
}

// U 2^λ U† — inverse of hermitian_log away from the floor.
inline cvqkd::Mat spectral_exp2(const cvqkd::Mat& m) {
  Eigen::SelfAdjointEigenSolver<cvqkd::Mat> es(m);
  Eigen::VectorXd vals = es.eigenvalues();
  for (Eigen::Index i = 0; i < vals.size(); ++i) vals(i) = std::exp2(vals(i));
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().adjoint();
}

inline double max_abs(const cvqkd::Mat& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace test_support
