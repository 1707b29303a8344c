#pragma once

#include <array>

#include "cvqkd/fock.hpp"

namespace cvqkd {

/// Key-map POVM on B: four wedge operators R_z with Σ_z R_z = I, wedge z
/// covering arg ζ ∈ [zπ/2, (z+1)π/2) — the same wedges as the classical
/// discretization in channel.conditional_distribution.
struct RegionOperators {
  std::array<Mat, 4> R;

  int dim() const { return int(R[0].rows()); }
};

/// ⟨m|R_z|n⟩ = Γ((m+n)/2 + 1) / (2π √(m! n!)) ∫_wedge e^{i(n−m)θ} dθ.
Mat region_operator(const FockSpace& space, int z);

RegionOperators build_region_operators(const FockSpace& space);

/// The postprocessing channel G(ρ) = KρK† with K = Σ_z |z⟩_R ⊗ I_A ⊗ √R_z,
/// taking A⊗B to R⊗A⊗B (dim R = 4, A index major throughout). √R_z is kept
/// per block; the full Kraus matrix is assembled on demand.
struct PostprocessingMap {
  std::array<Mat, 4> sqrt_regions;  // √R_z on B
  std::array<Mat, 4> lift;          // I_A ⊗ √R_z on A⊗B
  int dim_B = 0;
  double clamped_mass = 0.0;  // eigenvalue mass clamped to 0 in the square roots

  int dim_AB() const { return 4 * dim_B; }
  int dim_RAB() const { return 16 * dim_B; }
  Mat kraus() const;
};

PostprocessingMap build_postprocessing_map(const RegionOperators& regions);

/// KρK†, blockwise: G(ρ)[z,z'] = (I⊗√R_z) ρ (I⊗√R_z').
Mat apply_G(const PostprocessingMap& map, const Mat& rho);

/// K†MK for M on R⊗A⊗B; the adjoint map used by gradient formulas.
Mat apply_G_adjoint(const PostprocessingMap& map, const Mat& m);

/// Zero out the off-diagonal R-blocks of an operator on R⊗A⊗B (dim R = 4).
Mat pinching_Z(const Mat& sigma);

}  // namespace cvqkd
