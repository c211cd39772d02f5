#pragma once

// Pulse synthesis, multipath channel application and calibrated AWGN.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mpest/errors.hpp"
#include "mpest/fft.hpp"

namespace mpest {

/// Windowed linear-FM pulse parameters. Frequencies are normalized
/// (cycles/sample); the sweep runs from f1 at n=0 to f2 at n=n_sig.
struct ChirpSpec {
  std::size_t n_sig = 750;
  std::size_t n_w = 75;
  double f1 = 0.1;
  double f2 = 0.15;

  /// Chirp parameters with the default ramp length n_sig/10.
  static ChirpSpec with_length(std::size_t n_sig) {
    ChirpSpec spec;
    spec.n_sig = n_sig;
    spec.n_w = n_sig / 10;
    return spec;
  }

  /// Chirp rate a in s[n] = w[n] sin(2pi(a n^2 + b n)).
  double rate() const { return (f2 - f1) / (2.0 * static_cast<double>(n_sig)); }
  double start() const { return f1; }

  void validate() const {
    if (n_sig == 0) throw DomainError("chirp: n_sig must be positive");
    if (n_w == 0 || 2 * n_w > n_sig)
      throw DomainError("chirp: n_w must satisfy 0 < n_w <= n_sig/2");
    if (!(f1 > 0.0 && f1 < f2 && f2 < 0.5))
      throw DomainError("chirp: frequencies must satisfy 0 < f1 < f2 < 0.5");
  }
};

/// Real, uniformly sampled record.
struct SampledSignal {
  std::vector<double> samples;
  double t_s = 1.0;

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) * t_s; }

  double energy() const {
    double e = 0.0;
    for (double x : samples) e += x * x;
    return e;
  }

  double power() const { return samples.empty() ? 0.0 : energy() / static_cast<double>(size()); }

  void validate() const {
    if (samples.empty()) throw DomainError("signal: empty record");
    if (!(t_s > 0.0) || !std::isfinite(t_s)) throw DomainError("signal: t_s must be positive");
    for (double x : samples)
      if (!std::isfinite(x)) throw DomainError("signal: non-finite sample");
  }
};

/// M specular paths. Delays are in samples (units of t_s) and need not be integers.
struct MultipathChannel {
  std::vector<double> amplitudes;
  std::vector<double> delays;

  std::size_t num_paths() const { return amplitudes.size(); }

  void validate(std::size_t record_len) const {
    if (amplitudes.empty()) throw DomainError("channel: no paths");
    if (amplitudes.size() != delays.size())
      throw DomainError("channel: amplitude and delay counts differ");
    for (std::size_t k = 0; k < delays.size(); ++k) {
      if (!std::isfinite(amplitudes[k]) || !std::isfinite(delays[k]))
        throw DomainError("channel: non-finite parameter");
      if (delays[k] < 0.0 || delays[k] >= static_cast<double>(record_len))
        throw DomainError("channel: delay " + std::to_string(delays[k]) +
                          " outside [0, " + std::to_string(record_len) + ")");
    }
  }

  /// Paths reordered by ascending delay.
  MultipathChannel sorted() const {
    std::vector<std::size_t> order(num_paths());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return delays[i] < delays[j]; });
    MultipathChannel out;
    for (std::size_t k : order) {
      out.amplitudes.push_back(amplitudes[k]);
      out.delays.push_back(delays[k]);
    }
    return out;
  }
};

struct AwgnSpec {
  /// +infinity selects noiseless mode.
  double snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;

  bool noiseless() const { return std::isinf(snr_db) && snr_db > 0.0; }
};

/// Raised-cosine edge window: ramps up over the first n_w samples, flat,
/// then ramps down over the last n_w.
inline double window_value(std::size_t n, const ChirpSpec& spec) {
  if (n >= spec.n_sig) throw DomainError("window_value: index out of range");
  const double pi = std::numbers::pi;
  const double nw = static_cast<double>(spec.n_w);
  if (n < spec.n_w) return 0.5 - 0.5 * std::cos(pi * static_cast<double>(n) / nw);
  if (n < spec.n_sig - spec.n_w) return 1.0;
  const double from_end = static_cast<double>(n) - static_cast<double>(spec.n_sig);
  return 0.5 - 0.5 * std::cos(pi * from_end / nw);
}

inline SampledSignal generate_chirp(const ChirpSpec& spec, double t_s = 1.0) {
  spec.validate();
  const double a = spec.rate();
  const double b = spec.start();
  SampledSignal out;
  out.t_s = t_s;
  out.samples.resize(spec.n_sig);
  for (std::size_t n = 0; n < spec.n_sig; ++n) {
    const double x = static_cast<double>(n);
    out.samples[n] = window_value(n, spec) * std::sin(2.0 * std::numbers::pi * (a * x * x + b * x));
  }
  return out;
}

namespace detail {

inline bool all_integer(const std::vector<double>& delays) {
  return std::all_of(delays.begin(), delays.end(),
                     [](double d) { return d == std::floor(d); });
}

}  // namespace detail

/// Multipath record via exact integer shifts. Samples pushed past out_len are dropped.
inline SampledSignal apply_channel_shift(const SampledSignal& pulse, const MultipathChannel& channel,
                                         std::size_t out_len) {
  channel.validate(out_len);
  if (!detail::all_integer(channel.delays))
    throw DomainError("apply_channel_shift: delays must be integers");
  SampledSignal out;
  out.t_s = pulse.t_s;
  out.samples.assign(out_len, 0.0);
  for (std::size_t k = 0; k < channel.num_paths(); ++k) {
    const auto d = static_cast<std::size_t>(channel.delays[k]);
    for (std::size_t m = 0; m < pulse.size() && d + m < out_len; ++m)
      out.samples[d + m] += channel.amplitudes[k] * pulse.samples[m];
  }
  return out;
}

/// Multipath record via a phase ramp on the zero-padded pulse spectrum.
/// The result is the circular (period out_len) band-limited delay, which is
/// exactly the model the frequency-domain error functions assume.
inline SampledSignal apply_channel_spectral(const SampledSignal& pulse,
                                            const MultipathChannel& channel,
                                            std::size_t out_len) {
  channel.validate(out_len);
  if (pulse.size() > out_len) throw DomainError("apply_channel: pulse longer than record");
  fft::cvec padded(out_len, {0.0, 0.0});
  for (std::size_t m = 0; m < pulse.size(); ++m) padded[m] = pulse.samples[m];
  const fft::cvec spectrum = fft::forward(padded);

  const double big = static_cast<double>(out_len);
  fft::cvec shaped(out_len, {0.0, 0.0});
  for (std::size_t n = 0; n < out_len; ++n) {
    std::complex<double> h{0.0, 0.0};
    const bool nyquist = (2 * n == out_len);
    const double k = static_cast<double>(fft::signed_bin(n, out_len));
    for (std::size_t p = 0; p < channel.num_paths(); ++p) {
      const double phase = -2.0 * std::numbers::pi * channel.delays[p] * k / big;
      // The Nyquist bin must stay real for a real output.
      h += channel.amplitudes[p] * (nyquist ? std::complex<double>(std::cos(phase), 0.0)
                                            : std::polar(1.0, phase));
    }
    shaped[n] = spectrum[n] * h;
  }
  const fft::cvec time = fft::inverse(shaped);
  SampledSignal out;
  out.t_s = pulse.t_s;
  out.samples.resize(out_len);
  for (std::size_t n = 0; n < out_len; ++n) out.samples[n] = time[n].real();
  return out;
}

/// r[n] = sum_k a_k s[n - tau_k], n = 0 .. out_len-1. Integer delays use exact
/// shifts (tail truncation allowed); any fractional delay switches the whole
/// record to the spectral phase-shift path.
inline SampledSignal apply_channel(const SampledSignal& pulse, const MultipathChannel& channel,
                                   std::size_t out_len) {
  if (channel.amplitudes.empty()) throw DomainError("apply_channel: empty channel");
  pulse.validate();
  if (detail::all_integer(channel.delays)) return apply_channel_shift(pulse, channel, out_len);
  return apply_channel_spectral(pulse, channel, out_len);
}

/// Noise variance that puts the record at snr_db relative to its own mean power.
inline double noise_variance(const SampledSignal& signal, double snr_db) {
  const double p = signal.power();
  if (!(p > 0.0)) throw DomainError("add_awgn: zero-power signal, SNR undefined");
  return p / std::pow(10.0, snr_db / 10.0);
}

inline SampledSignal add_awgn(const SampledSignal& signal, const AwgnSpec& spec) {
  if (std::isnan(spec.snr_db) || (std::isinf(spec.snr_db) && spec.snr_db < 0.0))
    throw DomainError("add_awgn: snr_db must be finite or +inf");
  if (spec.noiseless()) return signal;
  const double sigma = std::sqrt(noise_variance(signal, spec.snr_db));
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  SampledSignal out = signal;
  for (double& x : out.samples) x += gauss(rng);
  return out;
}

}  // namespace mpest
