#include "cvqkd/channel.hpp"

#include <cmath>
#include <numbers>

#include "cvqkd/errors.hpp"

namespace cvqkd {
namespace {

constexpr double kPi = std::numbers::pi;

double xlog2x(double x) { return x > 0 ? x * std::log2(x) : 0.0; }

// Recursive adaptive Simpson with a shared error budget. Leftover local error
// from exhausted depth is accumulated so callers can report what was achieved.
struct SimpsonState {
  double leaked_error = 0.0;
};

template <typename F>
double simpson_step(const F& f, double a, double fa, double b, double fb, double m, double fm,
                    double whole, double tol, int depth, SimpsonState& state) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0) {
    state.leaked_error += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1, state) +
         simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1, state);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double tol, SimpsonState& state,
                        int max_depth = 48) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_step(f, a, fa, b, fb, m, fm, whole, tol, max_depth, state);
}

// ∫ over the wedge [θ0, θ1] of the heterodyne Q-function centered at beta
// with total variance v = 1 + n̄ per complex unit.
double wedge_probability(Complex beta, double v, double theta0, double theta1, double abs_tol) {
  const double rmax = std::abs(beta) + 12.0 * std::sqrt(v) + 2.0;
  const double norm = 1.0 / (kPi * v);
  SimpsonState state;
  const double inner_tol = abs_tol / (8.0 * (theta1 - theta0));
  auto outer = [&](double theta) {
    const double c = (beta * std::exp(Complex(0, -theta))).real();
    const double b2 = std::norm(beta);
    auto radial = [&](double r) { return r * std::exp(-(r * r - 2.0 * r * c + b2) / v); };
    return adaptive_simpson(radial, 0.0, rmax, inner_tol, state);
  };
  const double value = norm * adaptive_simpson(outer, theta0, theta1, abs_tol / (2.0 * norm), state);
  if (state.leaked_error * norm > abs_tol)
    throw NumericalError("conditional_distribution: quadrature did not converge",
                         state.leaked_error * norm);
  return value;
}

}  // namespace

Complex ProtocolParams::alpha_k(int k) const {
  return std::polar(amplitude, (2.0 * k + 1.0) * kPi / 4.0);
}

double ProtocolParams::transmittance() const {
  return cvqkd::transmittance(distance_km, attenuation_db_per_km);
}

double ProtocolParams::thermal_photons() const {
  return transmittance() * excess_noise / 2.0;
}

void ProtocolParams::validate() const {
  if (!(amplitude > 0)) throw Error("ProtocolParams: amplitude must be > 0");
  if (distance_km < 0) throw Error("ProtocolParams: distance must be >= 0");
  if (excess_noise < 0) throw Error("ProtocolParams: excess noise must be >= 0");
  if (!(reconciliation_eff > 0) || reconciliation_eff > 1)
    throw Error("ProtocolParams: reconciliation efficiency must be in (0,1]");
  if (postselection != 0.0) throw Error("ProtocolParams: only postselection = 0 is supported");
  double sum = 0;
  for (double p : probs) {
    if (p < 0) throw Error("ProtocolParams: negative state probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw Error("ProtocolParams: state probabilities must sum to 1");
}

double transmittance(double distance_km, double attenuation_db_per_km) {
  if (distance_km < 0) throw Error("transmittance: distance must be >= 0");
  return std::pow(10.0, -attenuation_db_per_km * distance_km / 10.0);
}

MomentSet simulate_moments(const ProtocolParams& params) {
  params.validate();
  const double eta = params.transmittance();
  const double nbar = params.thermal_photons();
  const double sqrt2eta = std::sqrt(2.0 * eta);
  MomentSet moments;
  for (int k = 0; k < 4; ++k) {
    const Complex alpha = params.alpha_k(k);
    moments.mean_q[k] = sqrt2eta * alpha.real();
    moments.mean_p[k] = sqrt2eta * alpha.imag();
    moments.mean_n[k] = eta * std::norm(alpha) + nbar;
    moments.mean_d[k] = 2.0 * eta * (alpha.real() * alpha.real() - alpha.imag() * alpha.imag());
  }
  return moments;
}

Eigen::Matrix4cd gram_matrix(const ProtocolParams& params) {
  Eigen::Matrix4cd gram;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      gram(i, j) = std::sqrt(params.probs[i] * params.probs[j]) *
                   coherent_overlap(params.alpha_k(i), params.alpha_k(j));
  return gram;
}

Eigen::Matrix4d conditional_distribution(const ProtocolParams& params) {
  params.validate();
  const double eta = params.transmittance();
  const double v = 1.0 + params.thermal_photons();
  Eigen::Matrix4d cond;
  for (int x = 0; x < 4; ++x) {
    const Complex beta = std::sqrt(eta) * params.alpha_k(x);
    for (int z = 0; z < 4; ++z)
      cond(x, z) = wedge_probability(beta, v, z * kPi / 2.0, (z + 1) * kPi / 2.0, 1e-10);
  }
  return cond;
}

double error_correction_leakage(const Eigen::Matrix4d& cond, const std::array<double, 4>& probs,
                                double beta) {
  std::array<double, 4> pz{};
  for (int x = 0; x < 4; ++x)
    for (int z = 0; z < 4; ++z) pz[z] += probs[x] * cond(x, z);
  double h_z = 0, h_z_given_x = 0;
  for (int z = 0; z < 4; ++z) h_z -= xlog2x(pz[z]);
  for (int x = 0; x < 4; ++x)
    for (int z = 0; z < 4; ++z) h_z_given_x -= probs[x] * xlog2x(cond(x, z));
  const double mutual = h_z - h_z_given_x;
  return h_z - beta * mutual;
}

FeatureVector assemble_features(const MomentSet& moments, const Eigen::Matrix4cd& gram,
                                double excess_noise, const std::array<double, 4>& probs) {
  FeatureVector f;
  for (int k = 0; k < 4; ++k) {
    f[k] = probs[k] * moments.mean_q[k];
    f[4 + k] = probs[k] * moments.mean_p[k];
    f[8 + k] = probs[k] * moments.mean_n[k];
    f[12 + k] = probs[k] * moments.mean_d[k];
  }
  int idx = 16;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      f[idx++] = gram(i, j).real();
      f[idx++] = gram(i, j).imag();
    }
  f[28] = excess_noise;
  return f;
}

std::string feature_name(int i) {
  static const char* kOps[] = {"q", "p", "n", "d"};
  if (i < 16) return std::string("p") + kOps[i / 4] + std::to_string(i % 4);
  if (i < 28) {
    static const std::pair<int, int> kPairs[] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    const auto [a, b] = kPairs[(i - 16) / 2];
    return std::string((i - 16) % 2 == 0 ? "re" : "im") + std::to_string(a) + std::to_string(b);
  }
  return "xi";
}

}  // namespace cvqkd
