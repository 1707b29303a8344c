#include <doctest.h>

#include <cmath>

#include "cvqkd/channel.hpp"
#include "cvqkd/errors.hpp"
#include "oracles/displaced_thermal.hpp"
#include "test_support.hpp"

using namespace cvqkd;

namespace {

ProtocolParams make_params(double amplitude, double distance, double xi) {
  ProtocolParams p;
  p.amplitude = amplitude;
  p.distance_km = distance;
  p.excess_noise = xi;
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("channel");

TEST_CASE("transmittance closed form") {
  CHECK(transmittance(0.0, 0.2) == doctest::Approx(1.0));
  CHECK(transmittance(50.0, 0.2) == doctest::Approx(0.1));
  CHECK(transmittance(200.0, 0.2) == doctest::Approx(1e-4));
  CHECK_THROWS(transmittance(-1.0, 0.2));
}

TEST_CASE("QPSK phases null the d moments and fix q at L=0") {
  const MomentSet moments = simulate_moments(make_params(0.66, 0.0, 0.0));
  for (int k = 0; k < 4; ++k) CHECK(std::abs(moments.mean_d[size_t(k)]) < 1e-15);
  CHECK(moments.mean_q[0] == doctest::Approx(0.66));
  CHECK(moments.mean_p[0] == doctest::Approx(0.66));
  CHECK(moments.mean_q[1] == doctest::Approx(-0.66));
}

TEST_CASE("moments against the displaced-thermal Fock oracle") {
  const FockSpace oracle_space{30};
  const OperatorSet ops = build_operator_set(oracle_space);
  // Includes the spec's pinned point |α|=0.66, L=50, ξ=0.02 → mean_n=0.04456.
  for (const auto& [amp, dist, xi] : {std::tuple{0.66, 50.0, 0.02},
                                      std::tuple{0.9, 10.0, 0.05},
                                      std::tuple{1.1, 0.0, 0.01},
                                      std::tuple{0.3, 100.0, 0.04}}) {
    const ProtocolParams params = make_params(amp, dist, xi);
    const MomentSet moments = simulate_moments(params);
    const double eta = params.transmittance();
    for (int k = 0; k < 4; ++k) {
      const Mat rho = oracles::displaced_thermal(
          oracle_space, std::sqrt(eta) * params.alpha_k(k), params.thermal_photons());
      CHECK(std::abs(hermitian_inner(rho, ops.q) - moments.mean_q[size_t(k)]) < 1e-6);
      CHECK(std::abs(hermitian_inner(rho, ops.p) - moments.mean_p[size_t(k)]) < 1e-6);
      CHECK(std::abs(hermitian_inner(rho, ops.n) - moments.mean_n[size_t(k)]) < 1e-6);
      CHECK(std::abs(hermitian_inner(rho, ops.d) - moments.mean_d[size_t(k)]) < 1e-6);
    }
  }
  const MomentSet pinned = simulate_moments(make_params(0.66, 50.0, 0.02));
  CHECK(pinned.mean_n[0] == doctest::Approx(0.04456).epsilon(1e-10));
}

TEST_CASE("gram matrix limits, diagonal, and PSD") {
  ProtocolParams tiny = make_params(1e-9, 0.0, 0.0);
  const Eigen::Matrix4cd gram0 = gram_matrix(tiny);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(std::abs(gram0(i, j) - Complex(0.25, 0)) < 1e-9);

  const Eigen::Matrix4cd gram = gram_matrix(make_params(0.66, 20.0, 0.01));
  for (int i = 0; i < 4; ++i) CHECK(gram(i, i).real() == doctest::Approx(0.25));
  CHECK(std::abs(gram(0, 2)) == doctest::Approx(0.25 * std::exp(-2.0 * 0.4356)).epsilon(1e-12));
  CHECK(std::abs(std::abs(gram(0, 2)) - 0.1046) < 1e-4);

  CHECK((gram - gram.adjoint()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(gram.trace().real() == doctest::Approx(1.0));
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(gram);
  CHECK(es.eigenvalues().minCoeff() >= -1e-12);
}

TEST_CASE("conditional distribution rows, limits and symmetry") {
  const ProtocolParams params = make_params(0.66, 20.0, 0.02);
  const Eigen::Matrix4d cond = conditional_distribution(params);
  for (int x = 0; x < 4; ++x) {
    CHECK(std::abs(cond.row(x).sum() - 1.0) < 1e-9);
    for (int z = 0; z < 4; ++z) {
      CHECK(cond(x, z) >= 0.0);
      // constellation and wedges share the π/2 rotation symmetry
      CHECK(cond(x, z) == doctest::Approx(cond(0, (z - x + 4) % 4)).epsilon(1e-8));
    }
    // the aligned wedge dominates whenever η|α|² > 0
    CHECK(cond(x, x) == doctest::Approx(cond.row(x).maxCoeff()));
  }

  const Eigen::Matrix4d flat = conditional_distribution(make_params(1e-8, 0.0, 0.0));
  for (int x = 0; x < 4; ++x)
    for (int z = 0; z < 4; ++z) CHECK(flat(x, z) == doctest::Approx(0.25).epsilon(1e-7));
}

TEST_CASE("error-correction leakage formula") {
  const std::array<double, 4> uniform = {0.25, 0.25, 0.25, 0.25};
  CHECK(error_correction_leakage(Eigen::Matrix4d::Identity(), uniform, 0.95) ==
        doctest::Approx(0.1));
  CHECK(error_correction_leakage(Eigen::Matrix4d::Constant(0.25), uniform, 0.95) ==
        doctest::Approx(2.0));

  // β = 1 leaves exactly H(Z|X).
  Eigen::Matrix4d p;
  p << 0.7, 0.1, 0.1, 0.1, 0.05, 0.8, 0.05, 0.1, 0.25, 0.25, 0.25, 0.25, 0.4, 0.3, 0.2, 0.1;
  double h_zx = 0;
  for (int x = 0; x < 4; ++x)
    for (int z = 0; z < 4; ++z)
      if (p(x, z) > 0) h_zx -= 0.25 * p(x, z) * std::log2(p(x, z));
  CHECK(error_correction_leakage(p, uniform, 1.0) == doctest::Approx(h_zx));

  // δ_EC ≥ (1−β)·H(Z) ≥ 0 for row-stochastic P.
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::Matrix4d q;
    for (int x = 0; x < 4; ++x) {
      double row_sum = 0;
      for (int z = 0; z < 4; ++z) row_sum += (q(x, z) = u(rng));
      q.row(x) /= row_sum;
    }
    std::array<double, 4> pz{};
    for (int x = 0; x < 4; ++x)
      for (int z = 0; z < 4; ++z) pz[size_t(z)] += 0.25 * q(x, z);
    double h_z = 0;
    for (double v : pz) h_z -= v * std::log2(v);
    const double beta = 0.95;
    CHECK(error_correction_leakage(q, uniform, beta) >= (1 - beta) * h_z - 1e-12);
  }
}

TEST_CASE("feature vector canonical order") {
  const ProtocolParams params = make_params(0.66, 30.0, 0.017);
  const MomentSet moments = simulate_moments(params);
  const Eigen::Matrix4cd gram = gram_matrix(params);
  const FeatureVector f =
      assemble_features(moments, gram, params.excess_noise, params.probs);

  CHECK(f[28] == params.excess_noise);
  for (int k = 0; k < 4; ++k) {
    CHECK(f[k] == doctest::Approx(moments.mean_q[size_t(k)] / 4.0));
    CHECK(f[8 + k] == doctest::Approx(moments.mean_n[size_t(k)] / 4.0));
    CHECK(std::abs(f[12 + k]) < 1e-15);  // d block vanishes for QPSK
  }
  int idx = 16;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      CHECK(f[idx++] == doctest::Approx(gram(i, j).real()));
      CHECK(f[idx++] == doctest::Approx(gram(i, j).imag()));
    }
  CHECK(feature_name(0) == "pq0");
  CHECK(feature_name(15) == "pd3");
  CHECK(feature_name(16) == "re01");
  CHECK(feature_name(17) == "im01");
  CHECK(feature_name(28) == "xi");
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(make_params(0.0, 10.0, 0.01).validate(), Error);
  CHECK_THROWS_AS(make_params(0.66, -1.0, 0.01).validate(), Error);
  ProtocolParams bad_probs = make_params(0.66, 10.0, 0.01);
  bad_probs.probs = {0.5, 0.5, 0.5, 0.5};
  CHECK_THROWS_AS(bad_probs.validate(), Error);
  ProtocolParams postselect = make_params(0.66, 10.0, 0.01);
  postselect.postselection = 0.1;
  CHECK_THROWS_AS(postselect.validate(), Error);
}

TEST_SUITE_END();
