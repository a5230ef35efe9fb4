#pragma once

// Exact event-driven simulation of the chain and Monte Carlo checks of the
// variance, the CLT marginal and the martingale approximation.

#include <cstdint>
#include <vector>

#include "kvsector/markov_core.hpp"

namespace kvsector {

struct Trajectory {
  std::vector<double> jump_times;  // start of each holding interval; jump_times[0] == 0
  std::vector<std::size_t> states;
  double horizon = 0.0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct EnsembleStats {
  std::size_t n_traj = 0;
  std::vector<double> values;  // N^{-1/2} int_0^N f(eta(s)) ds per trajectory
  double mean = 0.0;
  double variance = 0.0;
  Interval variance_ci;        // 95%, asymptotic normal with sample kurtosis
  double ks_statistic = 0.0;
  bool ks_degenerate = false;  // zero sample variance
};

struct SimulationOptions {
  unsigned threads = 1;
  bool stationary_start = true;
  std::size_t fixed_start = 0;
};

/// Per-trajectory stream derived from (base_seed, index).
std::uint64_t stream_seed(std::uint64_t base_seed, std::uint64_t index);

Trajectory simulate_trajectory(const GeneratorModel& model, double horizon, std::uint64_t seed,
                               const SimulationOptions& opts = {});

double additive_functional(const Trajectory& traj, const Vector& f, double horizon);

EnsembleStats variance_estimate(const GeneratorModel& model, const Vector& f, double horizon,
                                std::size_t n_traj, std::uint64_t base_seed,
                                const SimulationOptions& opts = {});

struct MartingaleHorizon {
  double horizon = 0.0;
  double mean_m = 0.0;
  double se_m = 0.0;
  double second_moment = 0.0;  // E[M(N)^2] / N
  Interval second_moment_ci;   // 95%
  double approx_error = 0.0;   // E[(int f - M(N))^2] / N
  bool mean_ok = false;        // |mean| <= 3 se
  bool covers_sigma2 = false;
  double rel_error = 0.0;      // |second_moment - sigma2| / sigma2
};

struct MartingaleReport {
  double sigma2 = 0.0;  // Poisson-equation oracle
  Vector corrector;     // u with -Q u = f
  std::vector<MartingaleHorizon> horizons;
  bool error_decreasing = false;
  double rel_tol = 0.05;
  bool pass = false;
};

MartingaleReport martingale_check(const GeneratorModel& model, const OperatorSplit& split,
                                  const Vector& f, const std::vector<double>& horizons,
                                  std::size_t n_traj, std::uint64_t base_seed,
                                  const SimulationOptions& opts = {});

/// Kolmogorov-Smirnov distance of the standardised sample to N(0,1).
double ks_statistic_normal(std::vector<double> standardized);

/// Asymptotic critical value of the one-sample KS statistic.
double ks_critical_value(std::size_t n, double alpha = 0.01);

}  // namespace kvsector
