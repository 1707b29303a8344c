#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cvqkd/keymap.hpp"
#include "test_support.hpp"

using namespace cvqkd;
using test_support::max_abs;

namespace {

// 2D quadrature oracle for ⟨m|R_z|n⟩ = (1/π)∫_wedge e^{−|ζ|²} ζ^n ζ̄^m /√(m!n!),
// composite Simpson on a fine polar grid.
Complex region_entry_quadrature(int m, int n, int z) {
  constexpr double kPi = std::numbers::pi;
  const double theta0 = z * kPi / 2.0, theta1 = (z + 1) * kPi / 2.0;
  const double rmax = 9.0;
  const int nr = 2000, nt = 2000;  // Simpson needs even counts
  auto simpson_weight = [](int i, int count) {
    if (i == 0 || i == count) return 1.0;
    return i % 2 == 1 ? 4.0 : 2.0;
  };
  const double hr = rmax / nr, ht = (theta1 - theta0) / nt;
  Complex total = 0;
  for (int it = 0; it <= nt; ++it) {
    const double theta = theta0 + it * ht;
    Complex radial = 0;
    for (int ir = 0; ir <= nr; ++ir) {
      const double r = ir * hr;
      radial += simpson_weight(ir, nr) * std::pow(r, m + n + 1) * std::exp(-r * r);
    }
    radial *= hr / 3.0;
    total += simpson_weight(it, nt) * radial * std::exp(Complex(0, (n - m) * theta));
  }
  total *= ht / 3.0;
  return total / kPi / std::sqrt(std::tgamma(m + 1.0) * std::tgamma(n + 1.0));
}

}  // namespace

TEST_SUITE_BEGIN("keymap");

TEST_CASE("region diagonals are 1/4 and the four wedges tile to identity") {
  for (int cutoff : {5, 9, 20}) {
    const FockSpace space{cutoff};
    Mat sum = Mat::Zero(space.dim(), space.dim());
    for (int z = 0; z < 4; ++z) {
      const Mat r = region_operator(space, z);
      CHECK(max_abs(r - r.adjoint()) < 1e-12);
      for (int m = 0; m < space.dim(); ++m) CHECK(r(m, m).real() == doctest::Approx(0.25));
      Eigen::SelfAdjointEigenSolver<Mat> es(r);
      CHECK(es.eigenvalues().minCoeff() >= -1e-12);
      CHECK(es.eigenvalues().maxCoeff() <= 1.0 + 1e-10);
      sum += r;
    }
    CHECK(max_abs(sum - Mat::Identity(space.dim(), space.dim())) <= 1e-10);
  }
}

TEST_CASE("region entries match the 2D quadrature oracle") {
  const FockSpace space{3};
  for (int z : {0, 2})
    for (int m = 0; m <= 3; ++m)
      for (int n = m; n <= 3; ++n) {
        const Mat r = region_operator(space, z);
        const Complex oracle = region_entry_quadrature(m, n, z);
        CHECK(std::abs(r(m, n) - oracle) < 1e-8);
      }
  // the spec's pinned N_c = 1 value
  const Mat r0 = region_operator(FockSpace{1}, 0);
  CHECK(std::abs(r0(0, 1)) == doctest::Approx(0.19947).epsilon(1e-4));
}

TEST_CASE("postprocessing map shapes and trace preservation") {
  const FockSpace space{4};
  const PostprocessingMap map = build_postprocessing_map(build_region_operators(space));
  CHECK(map.dim_B == 5);
  const Mat kraus = map.kraus();
  CHECK(kraus.rows() == 16 * 5);
  CHECK(kraus.cols() == 4 * 5);
  // K†K = I_A ⊗ Σ R_z = I within the completeness tolerance
  CHECK(max_abs(Mat(kraus.adjoint() * kraus) - Mat::Identity(20, 20)) < 1e-10);
  CHECK(map.clamped_mass < 1e-10);

  std::mt19937_64 rng(31);
  const Mat rho = test_support::random_density(20, rng);
  const Mat g = apply_G(map, rho);
  CHECK(g.trace().real() == doctest::Approx(1.0));
  CHECK(max_abs(g - g.adjoint()) < 1e-12);
  Eigen::SelfAdjointEigenSolver<Mat> es(g);
  CHECK(es.eigenvalues().minCoeff() >= -1e-12);
  // blockwise application agrees with the dense Kraus product
  CHECK(max_abs(g - Mat(kraus * rho * kraus.adjoint())) < 1e-12);
}

TEST_CASE("uniform regions give G(ρ) = Σ_z |z⟩⟨z| ⊗ ρ/4") {
  RegionOperators uniform;
  for (int z = 0; z < 4; ++z) uniform.R[size_t(z)] = 0.25 * Mat::Identity(3, 3);
  const PostprocessingMap map = build_postprocessing_map(uniform);
  std::mt19937_64 rng(17);
  const Mat rho = test_support::random_density(12, rng);
  const Mat g = apply_G(map, rho);
  for (int z = 0; z < 4; ++z)
    for (int w = 0; w < 4; ++w) {
      const Mat block = g.block(z * 12, w * 12, 12, 12);
      CHECK(max_abs(block - (z == w ? Mat(0.25 * rho) : Mat(Mat::Zero(12, 12)))) < 1e-12);
    }
}

TEST_CASE("apply_G is linear and congruence keeps PSD") {
  const FockSpace space{3};
  const PostprocessingMap map = build_postprocessing_map(build_region_operators(space));
  std::mt19937_64 rng(23);
  const Mat r1 = test_support::random_hermitian(16, rng);
  const Mat r2 = test_support::random_hermitian(16, rng);
  const Mat lhs = apply_G(map, Mat(0.7 * r1 - 0.2 * r2));
  const Mat rhs = 0.7 * apply_G(map, r1) - 0.2 * apply_G(map, r2);
  CHECK(max_abs(lhs - rhs) < 1e-12);
}

TEST_CASE("pinching keeps diagonal blocks, kills the rest, and is idempotent") {
  std::mt19937_64 rng(41);
  const Mat sigma = test_support::random_hermitian(16, rng);
  const Mat pinched = pinching_Z(sigma);
  CHECK(pinched.trace().real() == doctest::Approx(sigma.trace().real()));
  for (int z = 0; z < 4; ++z)
    CHECK(max_abs(pinched.block(4 * z, 4 * z, 4, 4) - sigma.block(4 * z, 4 * z, 4, 4)) == 0.0);
  CHECK(max_abs(pinching_Z(pinched) - pinched) == 0.0);
  CHECK(max_abs(pinched - pinching_Z(pinched)) == 0.0);

  Mat block_diag = Mat::Zero(8, 8);
  std::mt19937_64 rng2(43);
  for (int z = 0; z < 4; ++z)
    block_diag.block(2 * z, 2 * z, 2, 2) = test_support::random_hermitian(2, rng2);
  CHECK(max_abs(pinching_Z(block_diag) - block_diag) == 0.0);
}

TEST_CASE("G adjoint pairs with G under the trace inner product") {
  const FockSpace space{3};
  const PostprocessingMap map = build_postprocessing_map(build_region_operators(space));
  std::mt19937_64 rng(57);
  const Mat rho = test_support::random_hermitian(16, rng);
  const Mat m = test_support::random_hermitian(64, rng);
  // ⟨M, G(ρ)⟩ = ⟨G†(M), ρ⟩
  CHECK(hermitian_inner(m, apply_G(map, rho)) ==
        doctest::Approx(hermitian_inner(apply_G_adjoint(map, m), rho)).epsilon(1e-10));
}

TEST_SUITE_END();
