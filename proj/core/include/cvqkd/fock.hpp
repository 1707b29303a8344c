#pragma once

#include <Eigen/Dense>
#include <complex>

namespace cvqkd {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

/// Single bosonic mode truncated at `cutoff` photons, so operators are
/// (cutoff+1) x (cutoff+1) dense matrices.
struct FockSpace {
  int cutoff = 12;

  int dim() const { return cutoff + 1; }
  bool valid() const { return cutoff >= 1; }
};

/// Mode operators in the truncated basis. Conventions: q = (a + a†)/√2,
/// p = i(a† − a)/√2 (vacuum quadrature variance 1/2), n = a†a, d = q² − p²
/// with all products taken at the same truncation.
struct OperatorSet {
  Mat a;
  Mat q;
  Mat p;
  Mat n;
  Mat d;
};

/// Coherent amplitude expanded over Fock states and truncated without
/// renormalization; 1 − vec.squaredNorm() measures the cutoff error.
struct CoherentState {
  Complex amplitude;
  Vec vec;

  double norm2() const { return vec.squaredNorm(); }
};

OperatorSet build_operator_set(const FockSpace& space);

CoherentState coherent_vector(const FockSpace& space, Complex alpha);

/// ⟨β|α⟩ in closed form, exp(−(|α|²+|β|²)/2 + β̄α); no truncation involved.
Complex coherent_overlap(Complex alpha, Complex beta);

/// Spectral log₂ of a Hermitian matrix with eigenvalues clamped from below
/// at `floor`. Throws NumericalError if the input is not Hermitian to 1e-10.
Mat hermitian_log(const Mat& m, double floor);

/// |k⟩⟨k|_A ⊗ O on the A⊗B product space, A index major.
Mat tensor_embed(int proj_index, const Mat& op, int dim_a, int dim_b);

/// Trace out the B factor of a (dim_a·dim_b)-dimensional operator.
Mat partial_trace_B(const Mat& rho, int dim_a, int dim_b);

/// Re Tr(a·b) for Hermitian a, b — the Frobenius pairing all constraint
/// evaluations use.
double hermitian_inner(const Mat& a, const Mat& b);

}  // namespace cvqkd
