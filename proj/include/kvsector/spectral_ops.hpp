#pragma once

// Spectral calculus of S, resolvents of G and the lambda -> 0 diagnostics
// behind the Kipnis-Varadhan variance.

#include <optional>
#include <variant>
#include <vector>

#include "kvsector/markov_core.hpp"

namespace kvsector {

/// Eigensystem of S in the pi-metric.
struct SpectralData {
  Vector eigenvalues;               // ascending
  Matrix basis;                     // pi-orthonormal eigenvectors (columns)
  Matrix sym_vectors;               // the same vectors in the symmetric frame: Pi^{1/2} basis
  std::vector<bool> kernel_mask;    // eigenvalue <= kernel_tolerance
  double kernel_tolerance = 0.0;
  double kernel_component_tol = 1e-8;  // relative kernel-mass threshold for S^{-1/2}
  Vector sqrt_pi;

  std::size_t size() const { return static_cast<std::size_t>(eigenvalues.size()); }
  std::size_t kernel_dim() const;

  /// (x, basis_k)_pi for every k.
  Vector coefficients(const Vector& x) const;
  Vector from_coefficients(const Vector& c) const;

  /// Columns of sym_vectors outside the kernel and their eigenvalues: the
  /// orthonormal coordinates of the mean-zero subspace used by the
  /// operator-level checks.
  Matrix reduced_vectors() const;
  Vector reduced_eigenvalues() const;
};

enum class Exponent { PlusHalf, MinusHalf };

SpectralData spectral_decompose_S(const OperatorSplit& split, const GeneratorModel& model);

/// (lambda I + S)^{+-1/2} x. With lambda == 0 and the negative exponent,
/// kernel modes are dropped and x must not carry kernel mass.
Vector fractional_power_apply(const SpectralData& spec, double lambda, Exponent exponent,
                              const Vector& x);

struct HMinusOneFinite {
  double norm_squared;  // ||S^{-1/2} f||_pi^2
};
struct HMinusOneInfinite {
  double offending_component;  // pi-norm of the projection of f onto Ker(S)
};
using HMinusOneResult = std::variant<HMinusOneFinite, HMinusOneInfinite>;

HMinusOneResult h_minus_one_norm(const Observable& f, const SpectralData& spec,
                                 const GeneratorModel& model);

/// u solving (lambda I - Q) u = f, projected back onto the mean-zero subspace.
Vector resolvent_apply(const GeneratorModel& model, double lambda, const Observable& f);

/// Solution of -Q u = f with (u,1)_pi = 0.
Vector solve_poisson(const GeneratorModel& model, const Observable& f);

struct SweepConfig {
  double lambda_max = 1.0;
  double lambda_min = 1e-8;
  double ratio = 10.0;
  double tol_a = 1e-6;
  double tol_b = 1e-6;

  std::vector<double> lambdas() const;
};

struct SweepRecord {
  double lambda = 0.0;
  Vector u;
  Vector s_half_u;                   // S^{1/2} u_lambda
  double norm_a = 0.0;               // ||lambda^{1/2} u_lambda||_pi
  double rel_a = 0.0;                // lambda ||u||^2 / (u,f)_pi
  std::optional<double> cauchy_b;    // ||S^{1/2}(u_lambda - u_prev)||_pi
  std::optional<double> cond_c;      // (lambda + lambda_prev)(u_lambda, u_prev)_pi
  double twice_uf = 0.0;             // 2 (u_lambda, f)_pi
  double cond_d = 0.0;               // ||S^{-1/2} G u_lambda||_pi
};

struct LambdaSweep {
  SweepConfig config;
  std::vector<SweepRecord> records;  // lambda strictly decreasing
  bool converged_a = false;
  bool converged_b = false;
  double sup_cond_d = 0.0;

  bool converged() const { return converged_a && converged_b; }
};

LambdaSweep condition_sweep(const GeneratorModel& model, const OperatorSplit& split,
                            const SpectralData& spec, const Observable& f,
                            const SweepConfig& cfg = {});

struct VarianceResult {
  double sigma2 = 0.0;         // Richardson-extrapolated 2 (u_lambda, f)_pi
  Vector v;                    // S^{1/2} u at the smallest lambda
  double sigma2_from_v = 0.0;  // 2 ||v||_pi^2
  double oracle_sigma2 = 0.0;
  double richardson_pair[2] = {0.0, 0.0};  // 2(u,f) at the two smallest lambdas
  double tol_match = 1e-6;
  bool matches = false;        // |sigma2 - sigma2_from_v| within tolerance
};

VarianceResult sigma_squared(const LambdaSweep& sweep, const SpectralData& spec,
                             const GeneratorModel& model, const Observable& f);

/// 2 (u, S u)_pi with -Q u = f solved directly on the mean-zero subspace.
double sigma_squared_oracle(const GeneratorModel& model, const OperatorSplit& split,
                            const SpectralData& spec, const Observable& f);

}  // namespace kvsector
