#include "cvqkd/keymap.hpp"

#include <cmath>
#include <numbers>

#include "cvqkd/errors.hpp"

namespace cvqkd {
namespace {

constexpr double kPi = std::numbers::pi;

// ∫_{θ0}^{θ1} e^{ikθ} dθ
Complex phase_integral(int k, double theta0, double theta1) {
  if (k == 0) return theta1 - theta0;
  const Complex ik(0, k);
  return (std::exp(ik * theta1) - std::exp(ik * theta0)) / ik;
}

// PSD square root by spectral decomposition, clamping negative eigenvalues
// to zero and reporting the clamped mass.
Mat psd_sqrt(const Mat& m, double& clamped_mass) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  Eigen::VectorXd vals = es.eigenvalues();
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals(i) < 0) {
      clamped_mass += -vals(i);
      vals(i) = 0;
    }
    vals(i) = std::sqrt(vals(i));
  }
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

Mat region_operator(const FockSpace& space, int z) {
  if (z < 0 || z > 3) throw Error("region_operator: z must be in 0..3");
  const int dim = space.dim();
  const double theta0 = z * kPi / 2.0, theta1 = (z + 1) * kPi / 2.0;
  Mat r(dim, dim);
  for (int m = 0; m < dim; ++m)
    for (int n = 0; n < dim; ++n) {
      // Γ((m+n)/2+1)/√(m!n!) via lgamma to stay finite at large cutoffs.
      const double radial = std::exp(std::lgamma(0.5 * (m + n) + 1.0) -
                                     0.5 * (std::lgamma(m + 1.0) + std::lgamma(n + 1.0)));
      r(m, n) = radial / (2.0 * kPi) * phase_integral(n - m, theta0, theta1);
    }
  return r;
}

RegionOperators build_region_operators(const FockSpace& space) {
  RegionOperators regions;
  for (int z = 0; z < 4; ++z) regions.R[z] = region_operator(space, z);
  return regions;
}

PostprocessingMap build_postprocessing_map(const RegionOperators& regions) {
  PostprocessingMap map;
  map.dim_B = regions.dim();
  map.clamped_mass = 0.0;
  for (int z = 0; z < 4; ++z) {
    map.sqrt_regions[z] = psd_sqrt(regions.R[z], map.clamped_mass);
    Mat lift = Mat::Zero(map.dim_AB(), map.dim_AB());
    for (int a = 0; a < 4; ++a)
      lift.block(a * map.dim_B, a * map.dim_B, map.dim_B, map.dim_B) = map.sqrt_regions[z];
    map.lift[z] = std::move(lift);
  }
  return map;
}

Mat PostprocessingMap::kraus() const {
  Mat k = Mat::Zero(dim_RAB(), dim_AB());
  for (int z = 0; z < 4; ++z) k.block(z * dim_AB(), 0, dim_AB(), dim_AB()) = lift[z];
  return k;
}

Mat apply_G(const PostprocessingMap& map, const Mat& rho) {
  const int nab = map.dim_AB();
  if (rho.rows() != nab || rho.cols() != nab) throw Error("apply_G: state dimension mismatch");
  Mat out(map.dim_RAB(), map.dim_RAB());
  std::array<Mat, 4> left;
  for (int z = 0; z < 4; ++z) left[z] = map.lift[z] * rho;
  for (int z = 0; z < 4; ++z)
    for (int w = 0; w < 4; ++w) out.block(z * nab, w * nab, nab, nab) = left[z] * map.lift[w];
  return out;
}

Mat apply_G_adjoint(const PostprocessingMap& map, const Mat& m) {
  const int nab = map.dim_AB();
  if (m.rows() != map.dim_RAB() || m.cols() != map.dim_RAB())
    throw Error("apply_G_adjoint: dimension mismatch");
  Mat out = Mat::Zero(nab, nab);
  for (int z = 0; z < 4; ++z)
    for (int w = 0; w < 4; ++w)
      out.noalias() += map.lift[z] * m.block(z * nab, w * nab, nab, nab) * map.lift[w];
  return out;
}

Mat pinching_Z(const Mat& sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() % 4 != 0)
    throw Error("pinching_Z: expected a square operator on R⊗A⊗B with dim R = 4");
  const int block = int(sigma.rows()) / 4;
  Mat out = Mat::Zero(sigma.rows(), sigma.cols());
  for (int z = 0; z < 4; ++z)
    out.block(z * block, z * block, block, block) = sigma.block(z * block, z * block, block, block);
  return out;
}

}  // namespace cvqkd
