#pragma once

// Frequency-domain least-squares error functions.
//
// The full-spectrum forms (raef, caef_full) are evaluated bin by bin through
// bin_residual; the thresholded form goes through the steering/projection
// matrices. The two routes share no arithmetic, so either checks the other.

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "mpest/errors.hpp"
#include "mpest/fft.hpp"
#include "mpest/spectral.hpp"

namespace mpest {

/// Candidate (a, tau). Delays are in seconds.
struct ParamVector {
  std::vector<cd> amplitudes;
  std::vector<double> delays;

  static ParamVector real(const std::vector<double>& a, std::vector<double> tau) {
    ParamVector p;
    p.amplitudes.assign(a.begin(), a.end());
    p.delays = std::move(tau);
    return p;
  }

  std::size_t num_paths() const { return delays.size(); }

  bool is_real() const {
    for (const cd& a : amplitudes)
      if (a.imag() != 0.0) return false;
    return true;
  }

  void validate() const {
    if (delays.empty() || amplitudes.size() != delays.size())
      throw DomainError("ParamVector: need equal, nonzero amplitude and delay counts");
    for (std::size_t k = 0; k < delays.size(); ++k)
      if (!std::isfinite(delays[k]) || !std::isfinite(amplitudes[k].real()) ||
          !std::isfinite(amplitudes[k].imag()))
        throw DomainError("ParamVector: non-finite entry");
  }
};

/// Residual R[n] - S[n] sum_k a_k exp(-j tau_k 2pi n / (N t_s)) at bin n, with
/// bins in the upper half read as negative frequencies n - N.
inline cd bin_residual(const Spectrum& received, const Spectrum& pulse, const ParamVector& p,
                       double t_s, std::size_t n) {
  const std::size_t n_fft = received.size();
  const double k = static_cast<double>(fft::signed_bin(n, n_fft));
  const double period = static_cast<double>(n_fft) * t_s;
  cd model{0.0, 0.0};
  for (std::size_t path = 0; path < p.num_paths(); ++path) {
    // Delay modulo the record period keeps the phase argument small.
    const double tau = std::fmod(p.delays[path], period);
    model += p.amplitudes[path] * std::polar(1.0, -2.0 * std::numbers::pi * tau * k / period);
  }
  return received[n] - pulse[n] * model;
}

namespace detail {

inline void check_spectra(const Spectrum& received, const Spectrum& pulse) {
  if (received.size() != pulse.size())
    throw DomainError("error function: spectra differ in length");
  if (received.size() == 0 || received.size() % 2 != 0)
    throw DomainError("error function: spectrum length must be even and positive");
}

}  // namespace detail

/// Real-amplitude error function: sum over the whole two-sided spectrum.
inline double raef(const Spectrum& received, const Spectrum& pulse, const ParamVector& p,
                   double t_s) {
  detail::check_spectra(received, pulse);
  p.validate();
  if (!p.is_real()) throw DomainError("raef: amplitudes must be real");
  double sum = 0.0;
  for (std::size_t n = 0; n < received.size(); ++n)
    sum += std::norm(bin_residual(received, pulse, p, t_s, n));
  return sum;
}

/// Complex-amplitude error function over the positive-frequency half n = 0 .. N/2-1.
inline double caef_full(const Spectrum& received, const Spectrum& pulse, const ParamVector& p,
                        double t_s) {
  detail::check_spectra(received, pulse);
  p.validate();
  double sum = 0.0;
  for (std::size_t n = 0; n < received.size() / 2; ++n)
    sum += std::norm(bin_residual(received, pulse, p, t_s, n));
  return sum;
}

inline Eigen::VectorXcd to_eigen(const std::vector<cd>& v) {
  Eigen::VectorXcd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

namespace detail {

inline void check_support(const ThresholdedSupport& support) {
  if (support.indices.empty()) throw DomainError("caef_thresholded: empty support");
  if (!support.has_received())
    throw DomainError("caef_thresholded: support carries no received spectrum");
}

}  // namespace detail

/// ||r~ - p~(lambda) a||^2 over the thresholded support.
inline double caef_thresholded(const ThresholdedSupport& support, const ParamVector& p,
                               double t_s) {
  detail::check_support(support);
  p.validate();
  const auto lambda = tau_to_lambda(p.delays, support.n_fft, t_s);
  const Eigen::MatrixXcd proj = build_p(support, steering_matrix(lambda, support));
  return (support.r_tilde - proj * to_eigen(p.amplitudes)).squaredNorm();
}

/// Largest condition number ls_amplitudes accepts before declaring p~ rank deficient.
inline constexpr double kMaxCondition = 1e8;

/// Least-squares amplitudes for fixed delays. Throws ConditioningError when
/// p~(lambda) is (numerically) rank deficient, e.g. for duplicate delays.
inline Eigen::VectorXcd ls_amplitudes(const ThresholdedSupport& support,
                                      const std::vector<double>& lambda,
                                      double max_condition = kMaxCondition) {
  detail::check_support(support);
  if (lambda.empty()) throw DomainError("ls_amplitudes: no paths");
  if (lambda.size() > support.size())
    throw ConditioningError("ls_amplitudes: more paths than support bins",
                            std::numeric_limits<double>::infinity());
  const Eigen::MatrixXcd proj = build_p(support, steering_matrix(lambda, support));
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(proj, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv[0];
  const double smin = sv[sv.size() - 1];
  const double condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(condition <= max_condition))
    throw ConditioningError("ls_amplitudes: projection matrix is rank deficient (condition " +
                                std::to_string(condition) + ")",
                            condition);
  return svd.solve(support.r_tilde);
}

/// min over a of the thresholded CAEF for fixed delays. Rank-deficient
/// hypotheses get the minimum-norm solution instead of an error, so this is
/// total over the delay box.
struct ProfiledFit {
  Eigen::VectorXcd amplitudes;
  double objective = 0.0;
};

inline ProfiledFit profile_amplitudes(const ThresholdedSupport& support,
                                      const std::vector<double>& lambda) {
  detail::check_support(support);
  const Eigen::MatrixXcd proj = build_p(support, steering_matrix(lambda, support));
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod(proj);
  cod.setThreshold(1.0 / kMaxCondition);
  ProfiledFit fit;
  fit.amplitudes = cod.solve(support.r_tilde);
  fit.objective = (support.r_tilde - proj * fit.amplitudes).squaredNorm();
  return fit;
}

/// Same as profile_amplitudes but with the amplitudes constrained to be real:
/// the complex system is stacked into [Re p~; Im p~] a = [Re r~; Im r~].
inline ProfiledFit profile_real_amplitudes(const ThresholdedSupport& support,
                                           const std::vector<double>& lambda) {
  detail::check_support(support);
  const Eigen::MatrixXcd proj = build_p(support, steering_matrix(lambda, support));
  const Eigen::Index rows = proj.rows();
  Eigen::MatrixXd stacked(2 * rows, proj.cols());
  stacked << proj.real(), proj.imag();
  Eigen::VectorXd rhs(2 * rows);
  rhs << support.r_tilde.real(), support.r_tilde.imag();
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(stacked);
  cod.setThreshold(1.0 / kMaxCondition);
  const Eigen::VectorXd a = cod.solve(rhs);
  ProfiledFit fit;
  fit.amplitudes = a.cast<cd>();
  fit.objective = (rhs - stacked * a).squaredNorm();
  return fit;
}

}  // namespace mpest
