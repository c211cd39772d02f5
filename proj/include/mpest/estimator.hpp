#pragma once

// End-to-end channel estimation: spectra, band selection, GA search over the
// thresholded error function, and Monte-Carlo error metrics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mpest/error_fn.hpp"
#include "mpest/errors.hpp"
#include "mpest/ga.hpp"
#include "mpest/signal.hpp"
#include "mpest/spectral.hpp"
#include "mpest/varpro.hpp"

namespace mpest {

enum class SearchMode {
  kFullGa,      // GA over all 2M amplitudes and delays
  kHybridGaLs,  // GA over the M delays, least-squares amplitudes per candidate
};

inline std::string to_string(SearchMode mode) {
  return mode == SearchMode::kFullGa ? "full" : "hybrid";
}

inline SearchMode parse_mode(const std::string& s) {
  if (s == "full" || s == "full_ga") return SearchMode::kFullGa;
  if (s == "hybrid" || s == "hybrid_ga_ls") return SearchMode::kHybridGaLs;
  throw DomainError("unknown mode '" + s + "' (expected full or hybrid)");
}

struct EstimationTask {
  SampledSignal received;
  SampledSignal pulse;
  std::size_t num_paths = 1;
  double threshold_frac = 0.05;
  SearchMode mode = SearchMode::kFullGa;
  ga::GaConfig ga;
  unsigned delay_bits = 16;
  unsigned amplitude_bits = 12;
  double amplitude_min = -2.0;
  double amplitude_max = 2.0;
  // Independent GA runs with derived seeds; the lowest objective wins.
  std::size_t restarts = 1;
  // Hybrid mode only: Levenberg-Marquardt iterations applied to every new GA
  // individual (memetic step). Zero runs the plain GA.
  std::size_t local_iterations = 10;
  // Hybrid mode only: final Levenberg-Marquardt polish of the winning delays.
  bool polish = true;

  void validate() const {
    received.validate();
    pulse.validate();
    if (num_paths < 1) throw DomainError("task: num_paths must be >= 1");
    if (pulse.size() > received.size()) throw DomainError("task: pulse longer than received record");
    if (!(amplitude_min < amplitude_max)) throw DomainError("task: empty amplitude range");
    if (restarts < 1) throw DomainError("task: restarts must be >= 1");
    ga.validate();
  }
};

struct ChannelEstimate {
  MultipathChannel channel;  // sorted by ascending delay, delays in samples
  double objective_at_estimate = 0.0;
  // ||Im a|| / ||a|| of the unconstrained least-squares amplitudes at the
  // estimated delays (0 in full mode).
  double residual_imag_norm = 0.0;
  bool quality_warning = false;
  std::vector<ga::GenerationStats> history;
};

/// Fraction of imaginary energy above which an estimate is flagged.
inline constexpr double kImagWarningRatio = 0.05;

/// Transform length for a record: its length, rounded up to even.
inline std::size_t transform_length(std::size_t record_len) { return record_len + (record_len % 2); }

/// Spectra and band shared by every objective evaluation of a task.
struct PreparedTask {
  Spectrum received_spectrum;
  Spectrum pulse_spectrum;
  ThresholdedSupport support;
  double t_s = 1.0;
};

inline PreparedTask prepare(const EstimationTask& task) {
  const std::size_t n_fft = transform_length(task.received.size());
  PreparedTask prep;
  prep.t_s = task.received.t_s;
  prep.received_spectrum = dft(task.received, n_fft);
  prep.pulse_spectrum = dft(task.pulse, n_fft);
  prep.support = select_support(prep.pulse_spectrum, prep.received_spectrum, task.threshold_frac);
  return prep;
}

/// Seed of an independent stream derived from (master, index) via splitmix64.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// GA settings used for the hybrid search: paper operators and population,
/// but a higher mutation rate and far fewer generations, since every
/// individual is locally optimized.
inline ga::GaConfig hybrid_ga_defaults() {
  ga::GaConfig cfg;
  cfg.mutation_prob = 0.02;
  cfg.termination = ga::MaxGenerations{60};
  cfg.max_generations_cap = 60;
  return cfg;
}

struct SearchPreset {
  ga::GaConfig ga;
  std::size_t restarts = 1;
};

/// Defaults per mode: the plain GA defaults for full mode, the memetic settings above
/// with two restarts for hybrid mode.
inline SearchPreset preset_for(SearchMode mode) {
  if (mode == SearchMode::kFullGa) return {ga::GaConfig{}, 1};
  return {hybrid_ga_defaults(), 2};
}

/// run_ga repeated `restarts` times; restart 0 uses the configured seed.
template <class Objective, class LocalSearch = ga::NoLocalSearch>
ga::GaResult run_restarts(Objective& objective, const ga::GeneLayout& layout,
                          const ga::GaConfig& config, std::size_t restarts,
                          LocalSearch&& local = {}) {
  ga::GaResult best;
  for (std::size_t r = 0; r < restarts; ++r) {
    ga::GaConfig cfg = config;
    if (r > 0) cfg.seed = derive_seed(config.seed, r);
    ga::GaResult run = ga::run_ga(objective, layout, cfg, local);
    if (r == 0 || run.best_objective < best.best_objective) best = std::move(run);
  }
  return best;
}

inline ChannelEstimate estimate(const EstimationTask& task) {
  task.validate();
  const PreparedTask prep = prepare(task);
  const ThresholdedSupport& support = prep.support;
  const std::size_t m = task.num_paths;
  if (m > support.size())
    throw EstimationError("estimate: " + std::to_string(m) + " paths but only " +
                          std::to_string(support.size()) + " usable bins");

  const double t_s = prep.t_s;
  const double period = static_cast<double>(support.n_fft) * t_s;

  ga::GeneLayout layout;
  if (task.mode == SearchMode::kFullGa)
    for (std::size_t k = 0; k < m; ++k)
      layout.genes.push_back({task.amplitude_min, task.amplitude_max, task.amplitude_bits});
  for (std::size_t k = 0; k < m; ++k) layout.genes.push_back({0.0, period, task.delay_bits});

  ga::GaResult run;
  std::vector<double> amplitudes;
  std::vector<double> delays;
  ChannelEstimate out;
  const auto split = static_cast<std::ptrdiff_t>(m);

  if (task.mode == SearchMode::kFullGa) {
    auto objective = [&](std::span<const double> x) {
      ParamVector p;
      p.amplitudes.assign(x.begin(), x.begin() + split);
      p.delays.assign(x.begin() + split, x.end());
      return caef_thresholded(support, p, t_s);
    };
    run = run_restarts(objective, layout, task.ga, task.restarts);
    amplitudes.assign(run.best_params.begin(), run.best_params.begin() + split);
    delays.assign(run.best_params.begin() + split, run.best_params.end());
  } else {
    auto profiled = [&](std::span<const double> x) {
      const std::vector<double> tau(x.begin(), x.end());
      return profile_real_amplitudes(support, tau_to_lambda(tau, support.n_fft, t_s)).objective;
    };
    if (task.local_iterations > 0) {
      LmOptions opts;
      opts.max_iterations = task.local_iterations;
      auto local = [&](std::span<const double> x) {
        return refine_delays(support, {x.begin(), x.end()}, t_s, AmplitudeModel::kReal, opts).delays;
      };
      run = run_restarts(profiled, layout, task.ga, task.restarts, local);
    } else {
      run = run_restarts(profiled, layout, task.ga, task.restarts);
    }
    delays = run.best_params;
    if (task.polish) {
      LmResult polished = refine_delays(support, delays, t_s, AmplitudeModel::kReal);
      if (polished.objective <= run.best_objective) delays = std::move(polished.delays);
    }
    const auto lambda = tau_to_lambda(delays, support.n_fft, t_s);
    const Eigen::VectorXcd a = profile_real_amplitudes(support, lambda).amplitudes;
    for (Eigen::Index k = 0; k < a.size(); ++k) amplitudes.push_back(a[k].real());

    // Diagnostic: how far the unconstrained optimum drifts off the real axis.
    Eigen::VectorXcd free_a;
    try {
      free_a = ls_amplitudes(support, lambda);
    } catch (const ConditioningError&) {
      free_a = profile_amplitudes(support, lambda).amplitudes;
      out.quality_warning = true;
    }
    const double total = free_a.norm();
    out.residual_imag_norm = total > 0.0 ? free_a.imag().norm() / total : 0.0;
    if (out.residual_imag_norm > kImagWarningRatio) out.quality_warning = true;
  }

  MultipathChannel channel;
  for (std::size_t k = 0; k < m; ++k) {
    double tau = std::fmod(delays[k], period);
    if (tau < 0.0) tau += period;
    if (tau >= period) tau = 0.0;
    channel.amplitudes.push_back(amplitudes[k]);
    channel.delays.push_back(tau / t_s);
  }
  out.channel = channel.sorted();

  std::vector<double> tau_seconds(m);
  for (std::size_t k = 0; k < m; ++k) tau_seconds[k] = out.channel.delays[k] * t_s;
  out.objective_at_estimate =
      caef_thresholded(support, ParamVector::real(out.channel.amplitudes, tau_seconds), t_s);
  out.history = std::move(run.history);
  return out;
}

/// Per-parameter mean squared error. Delay errors are in squared samples.
struct ParameterMse {
  std::vector<double> amplitude;
  std::vector<double> delay;
  std::size_t runs = 0;
};

/// Squared errors of one estimate against the truth, paths paired in sorted-delay order.
struct SquaredErrors {
  std::vector<double> amplitude;
  std::vector<double> delay;
};

inline SquaredErrors squared_errors(const MultipathChannel& estimate, const MultipathChannel& truth) {
  if (estimate.num_paths() != truth.num_paths())
    throw DomainError("parameter_mse: estimate has " + std::to_string(estimate.num_paths()) +
                      " paths, truth has " + std::to_string(truth.num_paths()));
  const MultipathChannel e = estimate.sorted();
  const MultipathChannel t = truth.sorted();
  SquaredErrors out;
  for (std::size_t k = 0; k < t.num_paths(); ++k) {
    const double da = e.amplitudes[k] - t.amplitudes[k];
    const double dt = e.delays[k] - t.delays[k];
    out.amplitude.push_back(da * da);
    out.delay.push_back(dt * dt);
  }
  return out;
}

inline ParameterMse parameter_mse(const std::vector<ChannelEstimate>& estimates,
                                  const MultipathChannel& truth) {
  if (estimates.empty()) throw DomainError("parameter_mse: no estimates");
  ParameterMse mse;
  mse.runs = estimates.size();
  mse.amplitude.assign(truth.num_paths(), 0.0);
  mse.delay.assign(truth.num_paths(), 0.0);
  for (const ChannelEstimate& est : estimates) {
    const SquaredErrors se = squared_errors(est.channel, truth);
    for (std::size_t k = 0; k < truth.num_paths(); ++k) {
      mse.amplitude[k] += se.amplitude[k];
      mse.delay[k] += se.delay[k];
    }
  }
  const auto r = static_cast<double>(mse.runs);
  for (std::size_t k = 0; k < truth.num_paths(); ++k) {
    mse.amplitude[k] /= r;
    mse.delay[k] /= r;
  }
  return mse;
}

}  // namespace mpest
