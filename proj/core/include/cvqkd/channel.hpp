#pragma once

#include <array>
#include <string>

#include "cvqkd/fock.hpp"

namespace cvqkd {

/// Protocol and channel parameters for the quaternary constellation
/// |α|e^{i(2k+1)π/4}, k = 0..3, sent through a fiber of `distance_km` with
/// loss `attenuation_db_per_km` and input-referenced excess noise
/// `excess_noise` (shot-noise units, vacuum quadrature variance 1/2).
struct ProtocolParams {
  double amplitude = 0.66;
  double distance_km = 0.0;
  double attenuation_db_per_km = 0.2;
  double excess_noise = 0.0;
  double reconciliation_eff = 0.95;
  double postselection = 0.0;  // fixed at 0
  std::array<double, 4> probs = {0.25, 0.25, 0.25, 0.25};

  Complex alpha_k(int k) const;
  double transmittance() const;
  /// Thermal mean photon number at the channel output, ηξ/2.
  double thermal_photons() const;
  void validate() const;
};

double transmittance(double distance_km, double attenuation_db_per_km);

/// Heterodyne expectation values per sent state k.
struct MomentSet {
  std::array<double, 4> mean_q;
  std::array<double, 4> mean_p;
  std::array<double, 4> mean_n;
  std::array<double, 4> mean_d;
};

/// The 29 surrogate inputs, fixed order: 0-15 the scaled first/second moment
/// targets p_k⟨q̂⟩_k, p_k⟨p̂⟩_k, p_k⟨n̂⟩_k, p_k⟨d̂⟩_k (k major within each
/// block), 16-27 Re/Im of the Gram entries for pairs
/// (0,1),(0,2),(0,3),(1,2),(1,3),(2,3), 28 the excess noise.
struct FeatureVector {
  static constexpr int kSize = 29;
  std::array<double, kSize> values{};

  double& operator[](int i) { return values[size_t(i)]; }
  double operator[](int i) const { return values[size_t(i)]; }
};

/// Canonical column name of feature `i` in dataset files.
std::string feature_name(int i);

MomentSet simulate_moments(const ProtocolParams& params);

/// Σ_{ij} √(p_i p_j) ⟨α_j|α_i⟩ |i⟩⟨j|: Hermitian, PSD, unit trace for
/// normalized probs.
Eigen::Matrix4cd gram_matrix(const ProtocolParams& params);

/// P[z|x] for the quadrant key map: row x, column z; the wedge for outcome z
/// covers arg ζ ∈ [zπ/2, (z+1)π/2) and contains the phase of α_z. Entries by
/// adaptive 2D quadrature of the heterodyne Q-function in polar coordinates
/// (absolute tolerance 1e-10); throws NumericalError if that is not reached.
Eigen::Matrix4d conditional_distribution(const ProtocolParams& params);

/// δ_EC = H(Z) − β·I(X;Z), in bits.
double error_correction_leakage(const Eigen::Matrix4d& cond,
                                const std::array<double, 4>& probs, double beta);

FeatureVector assemble_features(const MomentSet& moments, const Eigen::Matrix4cd& gram,
                                double excess_noise, const std::array<double, 4>& probs);

}  // namespace cvqkd
