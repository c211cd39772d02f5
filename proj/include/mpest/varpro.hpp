#pragma once

// Variable-projection Levenberg-Marquardt over the delays: amplitudes are
// eliminated by linear least squares at every step, so only the M delays
// are iterated.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mpest/error_fn.hpp"
#include "mpest/spectral.hpp"

namespace mpest {

enum class AmplitudeModel { kReal, kComplex };

/// Projected residual (I - P P^+) r~, stacked as [Re; Im].
inline Eigen::VectorXd projected_residual(const ThresholdedSupport& support,
                                          std::span<const double> delays, double t_s,
                                          AmplitudeModel model) {
  const std::vector<double> tau(delays.begin(), delays.end());
  const Eigen::MatrixXcd proj =
      build_p(support, steering_matrix(tau_to_lambda(tau, support.n_fft, t_s), support));
  const Eigen::Index rows = proj.rows();
  Eigen::VectorXd out(2 * rows);
  if (model == AmplitudeModel::kReal) {
    Eigen::MatrixXd stacked(2 * rows, proj.cols());
    stacked << proj.real(), proj.imag();
    Eigen::VectorXd rhs(2 * rows);
    rhs << support.r_tilde.real(), support.r_tilde.imag();
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(stacked);
    cod.setThreshold(1.0 / kMaxCondition);
    out = rhs - stacked * cod.solve(rhs);
  } else {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod(proj);
    cod.setThreshold(1.0 / kMaxCondition);
    const Eigen::VectorXcd r = support.r_tilde - proj * cod.solve(support.r_tilde);
    out << r.real(), r.imag();
  }
  return out;
}

struct LmOptions {
  std::size_t max_iterations = 50;
  double relative_tolerance = 1e-12;
  double fd_step = 1e-6;  // forward-difference step, in seconds of delay
};

struct LmResult {
  std::vector<double> delays;
  double objective = 0.0;
  std::size_t iterations = 0;
};

/// Levenberg-Marquardt on the projected residual with a forward-difference
/// Jacobian. Never increases the objective.
inline LmResult refine_delays(const ThresholdedSupport& support, std::vector<double> delays,
                              double t_s, AmplitudeModel model, const LmOptions& opts = {}) {
  const auto m = static_cast<Eigen::Index>(delays.size());
  Eigen::VectorXd r = projected_residual(support, delays, t_s, model);
  double f = r.squaredNorm();
  double mu = 1e-3;
  LmResult out;
  const double step = opts.fd_step * t_s;
  for (; out.iterations < opts.max_iterations; ++out.iterations) {
    Eigen::MatrixXd jac(r.size(), m);
    for (Eigen::Index j = 0; j < m; ++j) {
      std::vector<double> probe = delays;
      probe[static_cast<std::size_t>(j)] += step;
      jac.col(j) = (projected_residual(support, probe, t_s, model) - r) / step;
    }
    const Eigen::MatrixXd normal = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;

    bool accepted = false;
    bool converged = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      Eigen::MatrixXd damped = normal;
      damped.diagonal() += mu * normal.diagonal().cwiseMax(1e-12);
      const Eigen::VectorXd dx = -damped.ldlt().solve(grad);
      if (!dx.allFinite()) break;
      std::vector<double> trial = delays;
      for (Eigen::Index j = 0; j < m; ++j) trial[static_cast<std::size_t>(j)] += dx[j];
      Eigen::VectorXd r_trial = projected_residual(support, trial, t_s, model);
      const double f_trial = r_trial.squaredNorm();
      if (f_trial < f) {
        converged = (f - f_trial) <= opts.relative_tolerance * f;
        delays = std::move(trial);
        r = std::move(r_trial);
        f = f_trial;
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        break;
      }
      mu *= 4.0;
    }
    if (!accepted || converged) break;
  }
  out.delays = std::move(delays);
  out.objective = f;
  return out;
}

}  // namespace mpest
