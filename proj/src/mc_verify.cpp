#include "kvsector/mc_verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "kvsector/spectral_ops.hpp"

namespace kvsector {

namespace {

constexpr double kZ95 = 1.959963984540054;

// Exit rates and cumulative jump probabilities per state.
class JumpTable {
 public:
  explicit JumpTable(const GeneratorModel& model) {
    if (!model.is_rate_matrix())
      throw Error(Errc::NotRateMatrix, "model is a signed operator, not a rate matrix; cannot simulate");
    const Matrix& q = model.generator();
    const auto n = static_cast<std::size_t>(q.rows());
    rates_.resize(n);
    targets_.resize(n);
    cumulative_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double r = q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (i != j && r > 0.0) {
          total += r;
          targets_[i].push_back(j);
          cumulative_[i].push_back(total);
        }
      }
      rates_[i] = total;
      for (double& c : cumulative_[i]) c /= total;
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < model.pi().size(); ++i) {
      acc += model.pi()(i);
      initial_.push_back(acc);
    }
    for (double& c : initial_) c /= acc;
  }

  std::size_t size() const { return rates_.size(); }
  double rate(std::size_t s) const { return rates_[s]; }

  std::size_t next(std::size_t s, double u) const { return targets_[s][pick(cumulative_[s], u)]; }
  std::size_t initial(double u) const { return pick(initial_, u); }

 private:
  static std::size_t pick(const std::vector<double>& cum, double u) {
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    return std::min(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
  }

  std::vector<double> rates_;
  std::vector<std::vector<std::size_t>> targets_;
  std::vector<std::vector<double>> cumulative_;
  std::vector<double> initial_;
};

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

 private:
  std::mt19937_64 engine_;
};

template <class Visit>
void walk(const JumpTable& table, Stream& rng, double horizon, const SimulationOptions& opts,
          Visit&& visit) {
  std::size_t state = opts.stationary_start ? table.initial(rng.uniform()) : opts.fixed_start;
  if (state >= table.size()) throw Error(Errc::InvalidArgument, "fixed start state out of range");
  double t = 0.0;
  for (;;) {
    const double rate = table.rate(state);
    const double next_t = rate > 0.0 ? t + rng.exponential(rate) : std::numeric_limits<double>::infinity();
    if (next_t >= horizon) {
      visit(state, t, horizon);
      return;
    }
    visit(state, t, next_t);
    t = next_t;
    state = table.next(state, rng.uniform());
  }
}

struct PathSummary {
  std::size_t start = 0;
  std::vector<double> integrals;     // int_0^{N_k} f
  std::vector<std::size_t> states;   // eta(N_k)
};

std::vector<PathSummary> run_ensemble(const GeneratorModel& model, const Vector& f,
                                      const std::vector<double>& checkpoints, std::size_t n_traj,
                                      std::uint64_t base_seed, const SimulationOptions& opts) {
  if (n_traj == 0) throw Error(Errc::InvalidArgument, "trajectories must be positive");
  if (checkpoints.empty() || !(checkpoints.front() > 0.0) ||
      !std::is_sorted(checkpoints.begin(), checkpoints.end()))
    throw Error(Errc::InvalidArgument, "horizons must be positive and ascending");
  if (static_cast<std::size_t>(f.size()) != model.size())
    throw Error(Errc::DimensionMismatch, "observable length does not match the model");

  const JumpTable table(model);
  std::vector<PathSummary> out(n_traj);
  const double horizon = checkpoints.back();

  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t idx = lo; idx < hi; ++idx) {
      Stream rng(stream_seed(base_seed, idx));
      PathSummary& ps = out[idx];
      ps.integrals.assign(checkpoints.size(), 0.0);
      ps.states.assign(checkpoints.size(), 0);
      double acc = 0.0;
      std::size_t cp = 0;
      bool first = true;
      walk(table, rng, horizon, opts, [&](std::size_t s, double a, double b) {
        if (first) {
          ps.start = s;
          first = false;
        }
        const double fs = f(static_cast<Eigen::Index>(s));
        while (cp < checkpoints.size() && checkpoints[cp] <= b) {
          ps.integrals[cp] = acc + fs * (checkpoints[cp] - a);
          ps.states[cp] = s;
          ++cp;
        }
        acc += fs * (b - a);
      });
    }
  };

  unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_traj));
  if (threads <= 1) {
    work(0, n_traj);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n_traj + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t lo = std::min(n_traj, t * chunk);
      const std::size_t hi = std::min(n_traj, lo + chunk);
      pool.emplace_back(work, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double m4 = 0.0;        // fourth central moment
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  const auto n = static_cast<double>(xs.size());
  for (double x : xs) m.mean += x;
  m.mean /= n;
  double m2 = 0.0;
  for (double x : xs) {
    const double d = x - m.mean;
    m2 += d * d;
    m.m4 += d * d * d * d;
  }
  m.variance = xs.size() > 1 ? m2 / (n - 1.0) : 0.0;
  m.m4 /= n;
  return m;
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t base_seed, std::uint64_t index) {
  // splitmix64 finaliser over a combination of the two words
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(mix(base_seed) ^ (index * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
}

Trajectory simulate_trajectory(const GeneratorModel& model, double horizon, std::uint64_t seed,
                               const SimulationOptions& opts) {
  if (!(horizon > 0.0)) throw Error(Errc::InvalidArgument, "horizon must be positive");
  const JumpTable table(model);
  Stream rng(stream_seed(seed, 0));
  Trajectory traj;
  traj.horizon = horizon;
  walk(table, rng, horizon, opts, [&](std::size_t s, double a, double) {
    traj.jump_times.push_back(a);
    traj.states.push_back(s);
  });
  return traj;
}

double additive_functional(const Trajectory& traj, const Vector& f, double horizon) {
  if (!(horizon > 0.0)) throw Error(Errc::InvalidArgument, "horizon must be positive");
  if (horizon > traj.horizon) {
    std::ostringstream os;
    os << "requested horizon " << horizon << " exceeds trajectory horizon " << traj.horizon;
    throw Error(Errc::HorizonTooShort, os.str());
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const double a = traj.jump_times[k];
    if (a >= horizon) break;
    const double b = k + 1 < traj.states.size() ? std::min(traj.jump_times[k + 1], horizon) : horizon;
    acc += f(static_cast<Eigen::Index>(traj.states[k])) * (b - a);
  }
  return acc / std::sqrt(horizon);
}

double ks_statistic_normal(std::vector<double> z) {
  if (z.empty()) return 0.0;
  std::sort(z.begin(), z.end());
  const auto n = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double cdf = normal_cdf(z[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - cdf, cdf - static_cast<double>(i) / n});
  }
  return d;
}

double ks_critical_value(std::size_t n, double alpha) {
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

EnsembleStats variance_estimate(const GeneratorModel& model, const Vector& f, double horizon,
                                std::size_t n_traj, std::uint64_t base_seed,
                                const SimulationOptions& opts) {
  const auto paths = run_ensemble(model, f, {horizon}, n_traj, base_seed, opts);
  EnsembleStats st;
  st.n_traj = n_traj;
  st.values.reserve(n_traj);
  const double scale = 1.0 / std::sqrt(horizon);
  for (const auto& p : paths) st.values.push_back(p.integrals[0] * scale);

  const Moments m = moments(st.values);
  st.mean = m.mean;
  st.variance = m.variance;
  const double se = std::sqrt(std::max(m.m4 - m.variance * m.variance, 0.0) / static_cast<double>(n_traj));
  st.variance_ci = {std::max(0.0, st.variance - kZ95 * se), st.variance + kZ95 * se};
  st.ks_degenerate = !(st.variance > 0.0);
  if (!st.ks_degenerate) {
    const double sd = std::sqrt(st.variance);
    std::vector<double> z;
    z.reserve(n_traj);
    for (double v : st.values) z.push_back((v - st.mean) / sd);
    st.ks_statistic = ks_statistic_normal(std::move(z));
  }
  return st;
}

MartingaleReport martingale_check(const GeneratorModel& model, const OperatorSplit& split,
                                  const Vector& f, const std::vector<double>& horizons,
                                  std::size_t n_traj, std::uint64_t base_seed,
                                  const SimulationOptions& opts) {
  const Observable obs = make_observable(f, model);
  MartingaleReport rep;
  rep.corrector = solve_poisson(model, obs);
  rep.sigma2 = 2.0 * pi_inner(rep.corrector, split.S * rep.corrector, model);

  const auto paths = run_ensemble(model, obs.values(), horizons, n_traj, base_seed, opts);
  const Vector& u = rep.corrector;
  const auto n = static_cast<double>(n_traj);
  for (std::size_t k = 0; k < horizons.size(); ++k) {
    const double horizon = horizons[k];
    std::vector<double> mart, sq, err;
    mart.reserve(n_traj);
    sq.reserve(n_traj);
    for (const auto& p : paths) {
      const double boundary = u(static_cast<Eigen::Index>(p.states[k])) -
                              u(static_cast<Eigen::Index>(p.start));
      const double m = boundary + p.integrals[k];
      mart.push_back(m);
      sq.push_back(m * m / horizon);
      err.push_back(boundary * boundary / horizon);
    }
    MartingaleHorizon h;
    h.horizon = horizon;
    const Moments mm = moments(mart);
    h.mean_m = mm.mean;
    h.se_m = std::sqrt(mm.variance / n);
    const Moments ms = moments(sq);
    h.second_moment = ms.mean;
    const double se2 = std::sqrt(ms.variance / n);
    h.second_moment_ci = {h.second_moment - kZ95 * se2, h.second_moment + kZ95 * se2};
    h.approx_error = moments(err).mean;
    h.mean_ok = std::abs(h.mean_m) <= 3.0 * h.se_m;
    h.covers_sigma2 = h.second_moment_ci.lo <= rep.sigma2 && rep.sigma2 <= h.second_moment_ci.hi;
    h.rel_error = rep.sigma2 > 0.0 ? std::abs(h.second_moment - rep.sigma2) / rep.sigma2
                                   : std::abs(h.second_moment);
    rep.horizons.push_back(h);
  }
  rep.error_decreasing = true;
  for (std::size_t k = 1; k < rep.horizons.size(); ++k)
    if (!(rep.horizons[k].approx_error < rep.horizons[k - 1].approx_error) &&
        rep.horizons[k - 1].approx_error > 0.0)
      rep.error_decreasing = false;
  const MartingaleHorizon& last = rep.horizons.back();
  rep.pass = last.mean_ok && last.rel_error <= rep.rel_tol && rep.error_decreasing;
  return rep;
}

}  // namespace kvsector
