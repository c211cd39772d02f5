#pragma once

// DFTs, thresholded band selection and the steering/projection matrices
// that map delay hypotheses onto per-bin phase ramps.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "mpest/errors.hpp"
#include "mpest/fft.hpp"
#include "mpest/signal.hpp"

namespace mpest {

using cd = std::complex<double>;

/// Unnormalized forward DFT: bins[n] = sum_m x[m] exp(-j 2pi n m / N).
struct Spectrum {
  std::vector<cd> bins;

  std::size_t size() const { return bins.size(); }
  const cd& operator[](std::size_t n) const { return bins[n]; }
};

/// Positive-frequency bins whose pulse magnitude exceeds the threshold,
/// together with the received and pulse spectra restricted to them.
struct ThresholdedSupport {
  std::vector<std::size_t> indices;
  double threshold = 0.0;
  std::size_t n_fft = 0;
  Eigen::VectorXcd r_tilde;
  Eigen::VectorXcd s_diag;

  std::size_t size() const { return indices.size(); }
  bool has_received() const { return static_cast<std::size_t>(r_tilde.size()) == indices.size(); }
};

/// L x M matrix, entry (l, k) = exp(j lambda_k q_l).
using SteeringMatrix = Eigen::MatrixXcd;

inline Spectrum dft(const SampledSignal& signal, std::size_t n_fft) {
  if (n_fft < signal.size())
    throw DomainError("dft: n_fft " + std::to_string(n_fft) + " shorter than signal length " +
                      std::to_string(signal.size()));
  if (n_fft == 0 || n_fft % 2 != 0) throw DomainError("dft: n_fft must be even and positive");
  fft::cvec padded(n_fft, {0.0, 0.0});
  for (std::size_t m = 0; m < signal.size(); ++m) padded[m] = signal.samples[m];
  return Spectrum{fft::forward(padded)};
}

/// Band selection from the clean pulse spectrum. r_tilde is left empty.
inline ThresholdedSupport select_support(const Spectrum& pulse_spectrum, double threshold_frac) {
  if (!(threshold_frac > 0.0 && threshold_frac < 1.0))
    throw DomainError("select_support: threshold_frac must lie in (0, 1)");
  const std::size_t n_fft = pulse_spectrum.size();
  if (n_fft < 2 || n_fft % 2 != 0) throw DomainError("select_support: spectrum length must be even");
  const std::size_t half = n_fft / 2;

  double peak = 0.0;
  for (std::size_t n = 0; n < half; ++n) peak = std::max(peak, std::abs(pulse_spectrum[n]));

  ThresholdedSupport support;
  support.n_fft = n_fft;
  support.threshold = threshold_frac * peak;
  for (std::size_t n = 0; n < half; ++n)
    if (std::abs(pulse_spectrum[n]) > support.threshold) support.indices.push_back(n);
  if (support.indices.empty()) throw EstimationError("select_support: no usable band");

  support.s_diag.resize(static_cast<Eigen::Index>(support.size()));
  for (std::size_t l = 0; l < support.size(); ++l)
    support.s_diag[static_cast<Eigen::Index>(l)] = pulse_spectrum[support.indices[l]];
  return support;
}

inline ThresholdedSupport select_support(const Spectrum& pulse_spectrum,
                                         const Spectrum& received_spectrum,
                                         double threshold_frac) {
  if (received_spectrum.size() != pulse_spectrum.size())
    throw DomainError("select_support: pulse and received spectra differ in length");
  ThresholdedSupport support = select_support(pulse_spectrum, threshold_frac);
  support.r_tilde.resize(static_cast<Eigen::Index>(support.size()));
  for (std::size_t l = 0; l < support.size(); ++l)
    support.r_tilde[static_cast<Eigen::Index>(l)] = received_spectrum[support.indices[l]];
  return support;
}

/// lambda_k = -tau_k 2pi / (N t_s); tau in seconds.
inline std::vector<double> tau_to_lambda(const std::vector<double>& tau, std::size_t n_fft,
                                         double t_s) {
  std::vector<double> lambda(tau.size());
  const double scale = -2.0 * std::numbers::pi / (static_cast<double>(n_fft) * t_s);
  for (std::size_t k = 0; k < tau.size(); ++k) lambda[k] = tau[k] * scale;
  return lambda;
}

inline std::vector<double> lambda_to_tau(const std::vector<double>& lambda, std::size_t n_fft,
                                         double t_s) {
  std::vector<double> tau(lambda.size());
  const double scale = -(static_cast<double>(n_fft) * t_s) / (2.0 * std::numbers::pi);
  for (std::size_t k = 0; k < lambda.size(); ++k) tau[k] = lambda[k] * scale;
  return tau;
}

inline SteeringMatrix steering_matrix(const std::vector<double>& lambda,
                                      const ThresholdedSupport& support) {
  if (support.indices.empty()) throw DomainError("steering_matrix: empty support");
  const auto rows = static_cast<Eigen::Index>(support.size());
  const auto cols = static_cast<Eigen::Index>(lambda.size());
  SteeringMatrix a(rows, cols);
  for (Eigen::Index k = 0; k < cols; ++k) {
    // Reduce the phase rate first so lambda*q stays small for large q.
    const double rate = std::remainder(lambda[static_cast<std::size_t>(k)], 2.0 * std::numbers::pi);
    for (Eigen::Index l = 0; l < rows; ++l) {
      const double q = static_cast<double>(support.indices[static_cast<std::size_t>(l)]);
      a(l, k) = std::polar(1.0, rate * q);
    }
  }
  return a;
}

/// p~(lambda) = S A(lambda): row l of A scaled by S[q_l].
inline Eigen::MatrixXcd build_p(const ThresholdedSupport& support, const SteeringMatrix& a) {
  if (a.rows() != support.s_diag.size())
    throw DomainError("build_p: steering matrix has " + std::to_string(a.rows()) +
                      " rows, support has " + std::to_string(support.s_diag.size()));
  return support.s_diag.asDiagonal() * a;
}

}  // namespace mpest
