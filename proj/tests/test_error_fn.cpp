#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mpest/error_fn.hpp"
#include "mpest/signal.hpp"
#include "mpest/spectral.hpp"
#include "oracles.hpp"

using namespace mpest;

namespace {

struct ThreePath {
  SampledSignal pulse = generate_chirp(ChirpSpec{});
  SampledSignal received{oracle::three_path_record(), 1.0};
  Spectrum S = dft(pulse, 1000);
  Spectrum R = dft(received, 1000);
  std::vector<double> a{1.0, -0.8, 0.4};
  std::vector<double> tau{200.0, 204.0, 220.0};

  ThresholdedSupport support(double frac) const { return select_support(S, R, frac); }
  double energy() const {
    double e = 0.0;
    for (const cd& v : R.bins) e += std::norm(v);
    return e;
  }
};

const ThreePath& fixture() {
  static const ThreePath f;
  return f;
}

std::vector<cd> to_complex(const std::vector<double>& a) { return {a.begin(), a.end()}; }

double slice_vertex(const ThresholdedSupport& sup, std::vector<double> a, const std::vector<double>& tau,
                    std::size_t k) {
  const auto at = [&](double v) {
    a[k] = v;
    return caef_thresholded(sup, ParamVector::real(a, tau), 1.0);
  };
  const double em = at(-1.0);
  const double e0 = at(0.0);
  const double ep = at(1.0);
  return (em - ep) / (2.0 * (em - 2.0 * e0 + ep));
}

}  // namespace

TEST(Raef, ZeroAtTruth) {
  const ThreePath& f = fixture();
  EXPECT_LT(raef(f.R, f.S, ParamVector::real(f.a, f.tau), 1.0), 1e-6 * f.energy());
}

TEST(Raef, ZeroModelGivesReceivedEnergy) {
  const ThreePath& f = fixture();
  EXPECT_LT(oracle::rel_diff(raef(f.R, f.S, ParamVector::real({0.0}, {321.0}), 1.0), f.energy()), 1e-12);
}

TEST(Raef, MatchesDirectSummation) {
  const ThreePath& f = fixture();
  const std::vector<double> a2{2.0, -1.6, 0.8};
  const double lib = raef(f.R, f.S, ParamVector::real(a2, f.tau), 1.0);
  const double ref = oracle::direct_error(f.R.bins, f.S.bins, to_complex(a2), f.tau, 1.0, oracle::range(0, 1000));
  EXPECT_LT(oracle::rel_diff(lib, ref), 1e-9);
}

TEST(Raef, RejectsComplexAmplitudes) {
  const ThreePath& f = fixture();
  ParamVector p;
  p.amplitudes = {cd(1.0, 0.1)};
  p.delays = {200.0};
  EXPECT_THROW(raef(f.R, f.S, p, 1.0), DomainError);
}

TEST(Raef, EqualsScaledTimeDomainErrorForIntegerDelays) {
  const ThreePath& f = fixture();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> amp(-2.0, 2.0);
  std::uniform_int_distribution<long> delay(0, 999);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> a{amp(rng), amp(rng)};
    const std::vector<long> d{delay(rng), delay(rng)};
    const std::vector<double> model = oracle::circular_multipath(f.pulse.samples, a, d, 1000);
    const double time_sse = oracle::sse(f.received.samples, model);
    const double lib = raef(f.R, f.S, ParamVector::real(a, {double(d[0]), double(d[1])}), 1.0);
    EXPECT_LT(oracle::rel_diff(lib, 1000.0 * time_sse), 1e-9) << trial;
  }
}

TEST(CaefFull, ZeroAtTruthAndComplexAllowed) {
  const ThreePath& f = fixture();
  EXPECT_LT(caef_full(f.R, f.S, ParamVector::real(f.a, f.tau), 1.0), 1e-6 * f.energy());
  ParamVector p;
  p.amplitudes = {cd(0.5, -0.5)};
  p.delays = {10.0};
  const double ref = oracle::direct_error(f.R.bins, f.S.bins, p.amplitudes, p.delays, 1.0, oracle::range(0, 500));
  EXPECT_LT(oracle::rel_diff(caef_full(f.R, f.S, p, 1.0), ref), 1e-9);
}

TEST(CaefFull, ConjugateSymmetryIdentity) {
  const ThreePath& f = fixture();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> amp(-2.0, 2.0);
  std::uniform_real_distribution<double> delay(0.0, 1000.0);
  for (int trial = 0; trial < 50; ++trial) {
    const ParamVector p = ParamVector::real({amp(rng), amp(rng), amp(rng)}, {delay(rng), delay(rng), delay(rng)});
    const cd r0 = bin_residual(f.R, f.S, p, 1.0, 0);
    const cd rn = bin_residual(f.R, f.S, p, 1.0, 500);
    for (std::size_t n : {1u, 17u, 130u, 499u})
      ASSERT_LT(std::abs(bin_residual(f.R, f.S, p, 1.0, 1000 - n) - std::conj(bin_residual(f.R, f.S, p, 1.0, n))),
                1e-9 * std::abs(f.R[130]));
    const double lhs = raef(f.R, f.S, p, 1.0);
    const double rhs = 2.0 * caef_full(f.R, f.S, p, 1.0) - std::norm(r0) + std::norm(rn);
    EXPECT_LT(oracle::rel_diff(lhs, rhs), 1e-9) << trial;
  }
}

TEST(Periodicity, ShiftByFullRecord) {
  const ThreePath& f = fixture();
  const ThresholdedSupport sup = f.support(0.1);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> amp(-2.0, 2.0);
  std::uniform_real_distribution<double> delay(0.0, 1000.0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::vector<double> a{amp(rng), amp(rng), amp(rng)};
    const std::vector<double> tau{delay(rng), delay(rng), delay(rng)};
    for (std::size_t k = 0; k < 3; ++k) {
      std::vector<double> shifted = tau;
      shifted[k] += 1000.0;
      const ParamVector p = ParamVector::real(a, tau);
      const ParamVector q = ParamVector::real(a, shifted);
      EXPECT_LT(oracle::rel_diff(caef_thresholded(sup, p, 1.0), caef_thresholded(sup, q, 1.0)), 1e-9);
      EXPECT_LT(oracle::rel_diff(caef_full(f.R, f.S, p, 1.0), caef_full(f.R, f.S, q, 1.0)), 1e-9);
      EXPECT_LT(oracle::rel_diff(raef(f.R, f.S, p, 1.0), raef(f.R, f.S, q, 1.0)), 1e-9);
    }
  }
}

TEST(CaefThresholded, ZeroAtTruth) {
  const ThreePath& f = fixture();
  for (double frac : {0.05, 0.1})
    EXPECT_LT(caef_thresholded(f.support(frac), ParamVector::real(f.a, f.tau), 1.0), 1e-6 * f.energy());
}

TEST(CaefThresholded, EqualsPartialSumOverSupport) {
  const ThreePath& f = fixture();
  const ThresholdedSupport sup = f.support(0.1);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> delay(0.0, 1000.0);
  for (int trial = 0; trial < 50; ++trial) {
    ParamVector p;
    p.amplitudes = {cd(u(rng), u(rng)), cd(u(rng), u(rng))};
    p.delays = {delay(rng), delay(rng)};
    double partial = 0.0;
    for (std::size_t q : sup.indices) partial += std::norm(bin_residual(f.R, f.S, p, 1.0, q));
    EXPECT_LT(oracle::rel_diff(caef_thresholded(sup, p, 1.0), partial), 1e-12) << trial;
  }
}

TEST(CaefThresholded, VanishingThresholdEqualsFullHalfSpectrum) {
  const ThreePath& f = fixture();
  const ThresholdedSupport sup = f.support(1e-12);
  ASSERT_EQ(sup.size(), 500u);
  const ParamVector p = ParamVector::real({0.9, -0.1}, {201.5, 17.0});
  EXPECT_LT(oracle::rel_diff(caef_thresholded(sup, p, 1.0), caef_full(f.R, f.S, p, 1.0)), 1e-9);
}

TEST(CaefThresholded, RequiresReceivedSpectrum) {
  const ThreePath& f = fixture();
  const ThresholdedSupport bare = select_support(f.S, 0.1);
  EXPECT_THROW(caef_thresholded(bare, ParamVector::real({1.0}, {200.0}), 1.0), DomainError);
  ThresholdedSupport empty;
  EXPECT_THROW(caef_thresholded(empty, ParamVector::real({1.0}, {200.0}), 1.0), DomainError);
}

TEST(CaefThresholded, Nonnegative) {
  const ThreePath& f = fixture();
  const ThresholdedSupport sup = f.support(0.1);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const ParamVector p = ParamVector::real({u(rng), u(rng)}, {100.0 * u(rng), 100.0 * u(rng)});
    EXPECT_GE(caef_thresholded(sup, p, 1.0), 0.0);
    EXPECT_GE(caef_full(f.R, f.S, p, 1.0), 0.0);
    EXPECT_GE(raef(f.R, f.S, p, 1.0), 0.0);
  }
}

TEST(CaefThresholded, SweepOfFirstDelayHasGlobalMinimumAtTruth) {
  const ThreePath& f = fixture();
  const ThresholdedSupport sup = f.support(0.1);
  std::size_t best = 0;
  double best_value = INFINITY;
  for (std::size_t t = 0; t < 1000; ++t) {
    const double e = caef_thresholded(sup, ParamVector::real(f.a, {double(t), 204.0, 220.0}), 1.0);
    if (e < best_value) {
      best_value = e;
      best = t;
    }
  }
  EXPECT_EQ(best, 200u);
}

TEST(CaefThresholded, FirstDelaySliceOscillates) {
  const ThreePath& f = fixture();
  const ThresholdedSupport sup = f.support(0.1);
  std::vector<double> e;
  for (int i = 0; i <= 400; ++i) {
    const double t = 180.0 + 0.1 * i;
    e.push_back(caef_thresholded(sup, ParamVector::real(f.a, {t, 204.0, 220.0}), 1.0));
  }
  std::size_t minima = 0;
  for (std::size_t i = 1; i + 1 < e.size(); ++i)
    if (e[i] < e[i - 1] && e[i] < e[i + 1]) ++minima;
  EXPECT_GE(minima, 3u);
  EXPECT_EQ(minima, 5u);  // regression value at 0.1-sample resolution
}

TEST(CaefThresholded, AmplitudeSlicesAreQuadraticWithVertexAtTruth) {
  const ThreePath& f = fixture();
  const ThresholdedSupport sup = f.support(0.1);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(slice_vertex(sup, f.a, f.tau, k), f.a[k], 1e-6) << k;
    // Exactly quadratic: a fourth sample lies on the parabola through three.
    std::vector<double> a = f.a;
    const auto at = [&](double v) {
      a[k] = v;
      return caef_thresholded(sup, ParamVector::real(a, f.tau), 1.0);
    };
    const double c2 = (at(1.0) - 2.0 * at(0.0) + at(-1.0)) / 2.0;
    const double c1 = (at(1.0) - at(-1.0)) / 2.0;
    EXPECT_LT(oracle::rel_diff(at(2.5), at(0.0) + 2.5 * c1 + 6.25 * c2), 1e-9);
  }
}

TEST(LsAmplitudes, SinglePathAtTruth) {
  const ThreePath& f = fixture();
  const SampledSignal r = apply_channel(f.pulse, {{-1.3}, {100.0}}, 1000);
  const ThresholdedSupport sup = select_support(f.S, dft(r, 1000), 0.1);
  const Eigen::VectorXcd a = ls_amplitudes(sup, tau_to_lambda({100.0}, 1000, 1.0));
  EXPECT_LT(std::abs(a[0] - cd(-1.3, 0.0)), 1e-6);
}

TEST(LsAmplitudes, ThreePathAtTruth) {
  const ThreePath& f = fixture();
  const ThresholdedSupport sup = f.support(0.1);
  const Eigen::VectorXcd a = ls_amplitudes(sup, tau_to_lambda(f.tau, 1000, 1.0));
  for (Eigen::Index k = 0; k < 3; ++k) {
    EXPECT_NEAR(a[k].real(), f.a[static_cast<std::size_t>(k)], 1e-6);
    EXPECT_LT(std::abs(a[k].imag()), 1e-6);
  }
}

TEST(LsAmplitudes, ResidualOrthogonalToColumns) {
  const ThreePath& f = fixture();
  const ThresholdedSupport sup = f.support(0.1);
  const std::vector<double> lambda = tau_to_lambda({190.3, 230.0, 250.7}, 1000, 1.0);
  const Eigen::VectorXcd a = ls_amplitudes(sup, lambda);
  const Eigen::MatrixXcd p = build_p(sup, steering_matrix(lambda, sup));
  const Eigen::VectorXcd res = sup.r_tilde - p * a;
  for (Eigen::Index k = 0; k < 3; ++k)
    EXPECT_LT(std::abs(p.col(k).dot(res)), 1e-8 * p.col(k).norm() * sup.r_tilde.norm());
}

TEST(LsAmplitudes, DuplicateDelaysRaiseConditioningError) {
  const ThreePath& f = fixture();
  const ThresholdedSupport sup = f.support(0.1);
  try {
    ls_amplitudes(sup, tau_to_lambda({200.0, 200.0}, 1000, 1.0));
    FAIL() << "expected ConditioningError";
  } catch (const ConditioningError& e) {
    EXPECT_GT(e.condition(), kMaxCondition);
  }
}

TEST(LsAmplitudes, OptimalAgainstRandomProbes) {
  const ThreePath& f = fixture();
  const ThresholdedSupport sup = f.support(0.1);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> delay(0.0, 1000.0);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::vector<double> tau{delay(rng), delay(rng), delay(rng)};
    const std::vector<double> lambda = tau_to_lambda(tau, 1000, 1.0);
    Eigen::VectorXcd best;
    try {
      best = ls_amplitudes(sup, lambda);
    } catch (const ConditioningError&) {
      continue;
    }
    ParamVector opt;
    opt.delays = tau;
    ParamVector probe;
    probe.delays = tau;
    for (Eigen::Index k = 0; k < 3; ++k) {
      opt.amplitudes.push_back(best[k]);
      probe.amplitudes.push_back(cd(u(rng), u(rng)));
    }
    const double e_opt = caef_thresholded(sup, opt, 1.0);
    ASSERT_LE(e_opt, caef_thresholded(sup, probe, 1.0) * (1.0 + 1e-12)) << trial;
  }
}

TEST(Profile, MatchesLsWhenWellConditioned) {
  const ThreePath& f = fixture();
  const ThresholdedSupport sup = f.support(0.1);
  const std::vector<double> lambda = tau_to_lambda({150.0, 233.3}, 1000, 1.0);
  const ProfiledFit fit = profile_amplitudes(sup, lambda);
  EXPECT_LT((fit.amplitudes - ls_amplitudes(sup, lambda)).norm(), 1e-9);
  ParamVector p;
  p.delays = {150.0, 233.3};
  p.amplitudes = {fit.amplitudes[0], fit.amplitudes[1]};
  EXPECT_LT(oracle::rel_diff(fit.objective, caef_thresholded(sup, p, 1.0)), 1e-9);
}

TEST(Profile, RealProfileIsTheRealConstrainedOptimum) {
  const ThreePath& f = fixture();
  const ThresholdedSupport sup = f.support(0.1);
  const std::vector<double> tau{199.0, 207.5, 221.0};
  const ProfiledFit fit = profile_real_amplitudes(sup, tau_to_lambda(tau, 1000, 1.0));
  std::vector<double> a;
  for (Eigen::Index k = 0; k < 3; ++k) {
    EXPECT_EQ(fit.amplitudes[k].imag(), 0.0);
    a.push_back(fit.amplitudes[k].real());
  }
  EXPECT_LT(oracle::rel_diff(fit.objective, caef_thresholded(sup, ParamVector::real(a, tau), 1.0)), 1e-9);
  // Any real perturbation does no better.
  for (std::size_t k = 0; k < 3; ++k)
    for (double d : {-1e-3, 1e-3}) {
      std::vector<double> b = a;
      b[k] += d;
      EXPECT_GE(caef_thresholded(sup, ParamVector::real(b, tau), 1.0), fit.objective);
    }
  // And it is never below the complex profile.
  EXPECT_GE(fit.objective, profile_amplitudes(sup, tau_to_lambda(tau, 1000, 1.0)).objective * (1 - 1e-12));
}

TEST(Profile, DuplicateDelaysStayFinite) {
  const ThreePath& f = fixture();
  const ThresholdedSupport sup = f.support(0.1);
  const std::vector<double> lambda = tau_to_lambda({200.0, 200.0}, 1000, 1.0);
  EXPECT_TRUE(std::isfinite(profile_amplitudes(sup, lambda).objective));
  EXPECT_TRUE(std::isfinite(profile_real_amplitudes(sup, lambda).objective));
}

TEST(ParamVectorTest, Validation) {
  EXPECT_THROW(ParamVector{}.validate(), DomainError);
  EXPECT_THROW(ParamVector::real({1.0, 2.0}, {1.0}).validate(), DomainError);
  EXPECT_THROW(ParamVector::real({NAN}, {1.0}).validate(), DomainError);
  EXPECT_TRUE(ParamVector::real({1.0}, {2.0}).is_real());
}
