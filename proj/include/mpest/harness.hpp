#pragma once

// Scenario-level operations behind the command-line tool: record synthesis,
// error-surface slices and the Monte-Carlo MSE-vs-SNR benchmark.
//
// Seeding: trial t of a run draws from trial_seed = derive_seed(master, t);
// its noise uses derive_seed(trial_seed, 0) and its GA derive_seed(trial_seed, 1).
// The same trial index therefore sees the same noise shape at every SNR.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mpest/error_fn.hpp"
#include "mpest/errors.hpp"
#include "mpest/estimator.hpp"
#include "mpest/scenario.hpp"
#include "mpest/signal.hpp"
#include "mpest/spectral.hpp"

namespace mpest::harness {

using scenario::Scenario;

inline std::uint64_t trial_seed(std::uint64_t master, std::size_t trial) {
  return derive_seed(master, trial);
}
inline std::uint64_t noise_seed(std::uint64_t master, std::size_t trial) {
  return derive_seed(trial_seed(master, trial), 0);
}
inline std::uint64_t ga_seed(std::uint64_t master, std::size_t trial) {
  return derive_seed(trial_seed(master, trial), 1);
}

struct Records {
  SampledSignal pulse;
  SampledSignal clean;
  SampledSignal received;
  std::optional<double> empirical_snr_db;  // set when noise was added
};

inline Records synthesize(const Scenario& sc, double snr_db, std::uint64_t seed) {
  Records rec;
  rec.pulse = generate_chirp(sc.chirp);
  rec.clean = apply_channel(rec.pulse, sc.channel, sc.record_len);
  rec.received = add_awgn(rec.clean, AwgnSpec{snr_db, seed});
  if (!(std::isinf(snr_db) && snr_db > 0.0)) {
    double noise = 0.0;
    for (std::size_t n = 0; n < rec.clean.size(); ++n) {
      const double d = rec.received.samples[n] - rec.clean.samples[n];
      noise += d * d;
    }
    rec.empirical_snr_db = 10.0 * std::log10(rec.clean.energy() / noise);
  }
  return rec;
}

/// Records for trial `trial` of the scenario at its configured SNR.
inline Records synthesize(const Scenario& sc, std::size_t trial = 0) {
  return synthesize(sc, sc.snr_db, noise_seed(sc.seed, trial));
}

inline EstimationTask make_task(const Scenario& sc, const Records& rec, std::uint64_t seed) {
  EstimationTask task;
  task.received = rec.received;
  task.pulse = rec.pulse;
  task.num_paths = sc.num_paths;
  task.threshold_frac = sc.threshold_frac;
  task.mode = sc.mode;
  task.ga = sc.ga;
  task.ga.seed = seed;
  task.delay_bits = sc.delay_bits;
  task.amplitude_bits = sc.amplitude_bits;
  task.amplitude_min = sc.amplitude_min;
  task.amplitude_max = sc.amplitude_max;
  task.restarts = sc.restarts;
  task.local_iterations = sc.local_iterations;
  task.polish = sc.polish;
  return task;
}

/// One estimation of trial `trial` at the configured SNR.
inline ChannelEstimate run_estimate(const Scenario& sc, std::size_t trial = 0) {
  const Records rec = synthesize(sc, trial);
  return estimate(make_task(sc, rec, ga_seed(sc.seed, trial)));
}

// --- error-surface slices ---------------------------------------------------

struct SweepParam {
  bool is_delay = true;
  std::size_t index = 0;  // zero-based path index
};

/// Parses "tau<k>" or "a<k>" (k = 1..num_paths).
inline SweepParam parse_sweep_param(const std::string& name, std::size_t num_paths) {
  SweepParam p;
  std::string digits;
  if (name.rfind("tau", 0) == 0) {
    digits = name.substr(3);
  } else if (name.rfind("a", 0) == 0) {
    p.is_delay = false;
    digits = name.substr(1);
  }
  const bool numeric = !digits.empty() && digits.size() < 9 &&
                       std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; });
  const std::size_t k = numeric ? std::stoul(digits) : 0;
  if (k < 1 || k > num_paths)
    throw DomainError("sweep: unknown parameter '" + name + "' (expected tau1..tau" +
                      std::to_string(num_paths) + " or a1..a" + std::to_string(num_paths) + ")");
  p.index = k - 1;
  return p;
}

struct SweepPoint {
  double value = 0.0;
  double objective = 0.0;
};

/// Error-surface slice: every parameter at the configured truth except the
/// swept one. Delays are in samples.
class SliceEvaluator {
 public:
  SliceEvaluator(const Scenario& sc, const Records& rec) : truth_(sc.channel), t_s_(rec.pulse.t_s) {
    const std::size_t n_fft = transform_length(rec.received.size());
    support_ = select_support(dft(rec.pulse, n_fft), dft(rec.received, n_fft), sc.threshold_frac);
  }

  const ThresholdedSupport& support() const { return support_; }
  const MultipathChannel& truth() const { return truth_; }

  double at(const SweepParam& p, double value) const {
    MultipathChannel c = truth_;
    (p.is_delay ? c.delays : c.amplitudes)[p.index] = value;
    return objective(c);
  }

  double objective(const MultipathChannel& c) const {
    std::vector<double> tau(c.delays.size());
    for (std::size_t k = 0; k < tau.size(); ++k) tau[k] = c.delays[k] * t_s_;
    return caef_thresholded(support_, ParamVector::real(c.amplitudes, tau), t_s_);
  }

  double reference_energy() const { return support_.r_tilde.squaredNorm(); }

 private:
  MultipathChannel truth_;
  double t_s_;
  ThresholdedSupport support_;
};

inline std::vector<SweepPoint> sweep(const SliceEvaluator& eval, const SweepParam& p, double from,
                                     double to, std::size_t steps) {
  if (steps < 1) throw DomainError("sweep: steps must be >= 1");
  if (!std::isfinite(from) || !std::isfinite(to)) throw DomainError("sweep: non-finite range");
  std::vector<SweepPoint> out(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    out[i].value = i + 1 == steps && steps > 1 ? to : from + (to - from) * t;
    out[i].objective = eval.at(p, out[i].value);
  }
  return out;
}

/// First point of minimal objective.
inline SweepPoint argmin(const std::vector<SweepPoint>& points) {
  if (points.empty()) throw DomainError("argmin: no points");
  return *std::min_element(points.begin(), points.end(),
                           [](const SweepPoint& x, const SweepPoint& y) { return x.objective < y.objective; });
}

// --- benchmark --------------------------------------------------------------

struct TrialRecord {
  double snr_db = 0.0;
  std::size_t trial = 0;
  MultipathChannel estimate;
  double objective = 0.0;
  bool quality_warning = false;
  SquaredErrors errors;
};

struct SnrSummary {
  double snr_db = 0.0;
  ParameterMse mse;
};

struct BenchResult {
  std::vector<TrialRecord> trials;  // sorted by (snr position, trial index)
  std::vector<SnrSummary> summary;  // one per snr_list entry, in order
};

/// Runs sc.trials estimations per SNR in sc.snr_list. Results do not depend
/// on the number of worker threads.
inline BenchResult run_bench(const Scenario& sc, std::size_t threads = 0) {
  if (sc.snr_list.empty()) throw DomainError("bench: empty snr_list");
  if (sc.trials < 1) throw DomainError("bench: trials must be >= 1");
  if (sc.num_paths != sc.channel.num_paths())
    throw DomainError("bench: estimate.num_paths must equal the channel's path count");

  const std::size_t total = sc.snr_list.size() * sc.trials;
  std::vector<TrialRecord> records(total);
  std::vector<ChannelEstimate> estimates(total);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (std::size_t job = next++; job < total; job = next++) {
      try {
        const std::size_t s = job / sc.trials;
        const std::size_t t = job % sc.trials;
        const double snr = sc.snr_list[s];
        const Records rec = synthesize(sc, snr, noise_seed(sc.seed, t));
        estimates[job] = estimate(make_task(sc, rec, ga_seed(sc.seed, t)));
        TrialRecord& r = records[job];
        r.snr_db = snr;
        r.trial = t;
        r.estimate = estimates[job].channel;
        r.objective = estimates[job].objective_at_estimate;
        r.quality_warning = estimates[job].quality_warning;
        r.errors = squared_errors(r.estimate, sc.channel);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = total;
      }
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, total);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  BenchResult out;
  out.trials = std::move(records);
  for (std::size_t s = 0; s < sc.snr_list.size(); ++s) {
    const auto first = estimates.begin() + static_cast<std::ptrdiff_t>(s * sc.trials);
    const std::vector<ChannelEstimate> batch(first, first + static_cast<std::ptrdiff_t>(sc.trials));
    out.summary.push_back({sc.snr_list[s], parameter_mse(batch, sc.channel)});
  }
  return out;
}

inline std::string amplitude_name(std::size_t k) { return "a" + std::to_string(k + 1); }
inline std::string delay_name(std::size_t k) { return "tau" + std::to_string(k + 1); }

/// Median over trials of one path's squared delay error at one SNR.
inline double median_delay_error(const BenchResult& bench, double snr_db, std::size_t path) {
  std::vector<double> v;
  for (const TrialRecord& r : bench.trials)
    if (r.snr_db == snr_db || (std::isinf(r.snr_db) && std::isinf(snr_db)))
      v.push_back(r.errors.delay.at(path));
  if (v.empty()) throw DomainError("median_delay_error: no trials at that SNR");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace mpest::harness
