#pragma once

// Thin wrapper over Eigen's FFT module. Unnormalized forward transform,
// inverse scaled by 1/N, arbitrary lengths.

#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace mpest::fft {

using cvec = std::vector<std::complex<double>>;

inline cvec forward(const cvec& x) {
  Eigen::FFT<double> engine;
  cvec out;
  engine.fwd(out, x);
  return out;
}

inline cvec inverse(const cvec& x) {
  Eigen::FFT<double> engine;
  cvec out;
  engine.inv(out, x);
  return out;
}

// Signed frequency index of bin n for a length-N transform, in [-N/2, N/2).
inline long signed_bin(std::size_t n, std::size_t n_fft) {
  const auto k = static_cast<long>(n);
  const auto big = static_cast<long>(n_fft);
  return (2 * k < big) ? k : k - big;
}

}  // namespace mpest::fft
