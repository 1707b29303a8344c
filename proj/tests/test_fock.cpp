#include <doctest.h>

#include <cmath>

#include "cvqkd/errors.hpp"
#include "cvqkd/fock.hpp"
#include "test_support.hpp"

using namespace cvqkd;
using test_support::max_abs;

TEST_SUITE_BEGIN("fock");

TEST_CASE("annihilation operator entries") {
  const OperatorSet ops = build_operator_set(FockSpace{1});
  CHECK(ops.a(0, 1).real() == doctest::Approx(1.0));
  CHECK(ops.a(0, 1).imag() == 0.0);
  CHECK(std::abs(ops.a(0, 0)) == 0.0);
  CHECK(std::abs(ops.a(1, 0)) == 0.0);
  CHECK(std::abs(ops.a(1, 1)) == 0.0);
}

TEST_CASE("number operator is diag(0..N_c)") {
  const OperatorSet ops = build_operator_set(FockSpace{7});
  for (int m = 0; m <= 7; ++m) CHECK(ops.n(m, m).real() == doctest::Approx(double(m)));
  Mat off = ops.n;
  off.diagonal().setZero();
  CHECK(max_abs(off) == 0.0);
}

TEST_CASE("d operator equals the a² + a†² oracle") {
  // q² − p² collapses to a² + (a†)² symbolically, truncation included.
  const OperatorSet ops = build_operator_set(FockSpace{5});
  const Mat oracle = ops.a * ops.a + ops.a.adjoint() * ops.a.adjoint();
  CHECK(max_abs(ops.d - oracle) < 1e-13);
  CHECK(ops.d(0, 2).real() == doctest::Approx(std::sqrt(2.0)));
  CHECK(ops.d(2, 0).real() == doctest::Approx(std::sqrt(2.0)));
  for (int m = 0; m <= 5; ++m) CHECK(std::abs(ops.d(m, m)) < 1e-14);
}

TEST_CASE("operators are Hermitian and obey the commutator away from the corner") {
  const FockSpace space{12};
  const OperatorSet ops = build_operator_set(space);
  for (const Mat* m : {&ops.q, &ops.p, &ops.n, &ops.d})
    CHECK(max_abs(*m - m->adjoint()) < 1e-12);
  const Mat comm = ops.q * ops.p - ops.p * ops.q - Complex(0, 1) * Mat::Identity(13, 13);
  CHECK(comm.topLeftCorner(12, 12).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("coherent vacuum and component ratios") {
  const CoherentState vac = coherent_vector(FockSpace{6}, 0.0);
  CHECK(vac.vec(0).real() == doctest::Approx(1.0));
  CHECK(vac.vec.tail(6).cwiseAbs().maxCoeff() == 0.0);

  const Complex alpha = std::polar(0.83, 1.1);
  const CoherentState state = coherent_vector(FockSpace{10}, alpha);
  CHECK(std::abs(state.vec(1) / state.vec(0)) == doctest::Approx(std::abs(alpha)));
}

TEST_CASE("coherent truncation error matches the Poisson tail bound") {
  const Complex alpha = std::polar(0.66, M_PI / 4);
  const CoherentState state = coherent_vector(FockSpace{12}, alpha);
  // Oracle: tail mass Σ_{m>N_c} e^{−|α|²} |α|^{2m}/m!.
  double tail = 0;
  double term = std::exp(-std::norm(alpha));
  for (int m = 1; m <= 60; ++m) {
    term *= std::norm(alpha) / m;
    if (m > 12) tail += term;
  }
  CHECK(state.norm2() >= 1.0 - 1e-9);
  CHECK(state.norm2() == doctest::Approx(1.0 - tail).epsilon(1e-12));
}

TEST_CASE("coherent overlap closed form vs truncated inner product") {
  const Complex a = std::polar(0.66, M_PI / 4);
  const Complex b = -a;
  CHECK(coherent_overlap(a, a).real() == doctest::Approx(1.0));
  CHECK(std::abs(coherent_overlap(a, a).imag()) < 1e-15);

  // Oracle: ⟨β|α⟩ from truncated Fock expansions at N_c = 40.
  const FockSpace big{40};
  const Complex oracle = coherent_vector(big, b).vec.dot(coherent_vector(big, a).vec);
  const Complex closed = coherent_overlap(a, b);
  CHECK(std::abs(closed - oracle) < 1e-12);
  CHECK(closed.real() == doctest::Approx(std::exp(-2.0 * 0.4356)).epsilon(1e-12));
  CHECK(std::abs(closed.real() - 0.4185) < 1e-4);
}

TEST_CASE("overlap modulus and conjugate symmetry") {
  std::mt19937_64 rng(411);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 20; ++rep) {
    const Complex a(g(rng), g(rng)), b(g(rng), g(rng));
    CHECK(std::norm(coherent_overlap(a, b)) ==
          doctest::Approx(std::exp(-std::norm(a - b))).epsilon(1e-10));
    CHECK(std::abs(coherent_overlap(a, b) - std::conj(coherent_overlap(b, a))) < 1e-14);
  }
}

TEST_CASE("hermitian_log on diagonal matrices") {
  CHECK(max_abs(hermitian_log(Mat::Identity(4, 4), 1e-12)) < 1e-14);

  Mat m = Mat::Zero(2, 2);
  m(0, 0) = 2.0;
  m(1, 1) = 4.0;
  const Mat lg = hermitian_log(m, 1e-12);
  CHECK(lg(0, 0).real() == doctest::Approx(1.0));
  CHECK(lg(1, 1).real() == doctest::Approx(2.0));

  Mat rank1 = Mat::Zero(2, 2);
  rank1(1, 1) = 1.0;
  const Mat floored = hermitian_log(rank1, 1e-12);
  CHECK(floored(0, 0).real() == doctest::Approx(std::log2(1e-12)));
  CHECK(floored(0, 0).real() == doctest::Approx(-39.863).epsilon(1e-4));
  CHECK(std::abs(floored(1, 1)) < 1e-12);
}

TEST_CASE("hermitian_log inverts through spectral exp2") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 5; ++rep) {
    Mat m = test_support::random_hermitian(6, rng);
    m = (m * m).eval();  // PSD
    m += 0.1 * Mat::Identity(6, 6);
    const Mat back = test_support::spectral_exp2(hermitian_log(m, 1e-12));
    CHECK(max_abs(back - m) < 1e-9);
  }
}

TEST_CASE("hermitian_log rejects non-Hermitian input") {
  Mat m = Mat::Zero(2, 2);
  m(0, 1) = 1.0;
  CHECK_THROWS_AS(hermitian_log(m, 1e-12), NumericalError);
}

TEST_CASE("tensor_embed places the block and keeps trace") {
  const Mat id2 = Mat::Identity(2, 2);
  const Mat embedded = tensor_embed(0, id2, 4, 2);
  CHECK(embedded.rows() == 8);
  CHECK(max_abs(embedded.topLeftCorner(2, 2) - id2) == 0.0);
  CHECK(max_abs(embedded.bottomRightCorner(6, 6)) == 0.0);

  std::mt19937_64 rng(5);
  const Mat o = test_support::random_hermitian(3, rng);
  Mat sum = Mat::Zero(12, 12);
  for (int k = 0; k < 4; ++k) {
    const Mat e = tensor_embed(k, o, 4, 3);
    CHECK(e.trace().real() == doctest::Approx(o.trace().real()));
    sum += e;
  }
  // Σ_k |k⟩⟨k| ⊗ O = I₄ ⊗ O
  for (int a = 0; a < 4; ++a)
    CHECK(max_abs(sum.block(3 * a, 3 * a, 3, 3) - o) < 1e-14);
  CHECK_THROWS(tensor_embed(4, o, 4, 3));
  CHECK_THROWS(tensor_embed(-1, o, 4, 3));
}

TEST_CASE("partial trace of product and entangled states") {
  std::mt19937_64 rng(19);
  const Mat sigma_a = test_support::random_density(4, rng);
  const Mat tau_b = test_support::random_density(5, rng);
  Mat product(20, 20);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) product.block(5 * i, 5 * j, 5, 5) = sigma_a(i, j) * tau_b;
  CHECK(max_abs(partial_trace_B(product, 4, 5) - sigma_a) < 1e-12);
  CHECK(partial_trace_B(product, 4, 5).trace().real() ==
        doctest::Approx(product.trace().real()));

  // (|0,0⟩ + |1,1⟩)/√2 inside the 4 ⊗ 5 space reduces to I₂/2 on A.
  Vec phi = Vec::Zero(20);
  phi(0 * 5 + 0) = 1.0 / std::sqrt(2.0);
  phi(1 * 5 + 1) = 1.0 / std::sqrt(2.0);
  const Mat reduced = partial_trace_B(Mat(phi * phi.adjoint()), 4, 5);
  CHECK(reduced(0, 0).real() == doctest::Approx(0.5));
  CHECK(reduced(1, 1).real() == doctest::Approx(0.5));
  CHECK(std::abs(reduced(0, 1)) < 1e-14);
  CHECK(std::abs(reduced(2, 2)) < 1e-14);

  CHECK_THROWS(partial_trace_B(product, 4, 4));
}

TEST_CASE("partial trace is linear") {
  std::mt19937_64 rng(23);
  const Mat r1 = test_support::random_hermitian(12, rng);
  const Mat r2 = test_support::random_hermitian(12, rng);
  const Mat lhs = partial_trace_B(Mat(0.3 * r1 + 1.7 * r2), 4, 3);
  const Mat rhs = 0.3 * partial_trace_B(r1, 4, 3) + 1.7 * partial_trace_B(r2, 4, 3);
  CHECK(max_abs(lhs - rhs) < 1e-12);
}

TEST_SUITE_END();
