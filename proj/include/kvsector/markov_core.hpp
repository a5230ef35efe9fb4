#pragma once

// Finite-state generators, their stationary measure, the pi-weighted L2
// geometry and the split G = -S + A into self-adjoint and skew parts.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "kvsector/errors.hpp"

namespace kvsector {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Relative tolerance factors. Each is multiplied by the scale named in
/// its comment before use.
struct Tolerances {
  double row = 1e-9;     // x max|Q|: row sums and pi.Q residual
  double mean = 1e-10;   // x ||f||_inf: mean-zero test for observables
  double ker = 1e-8;     // x max eigenvalue of S: kernel cutoff; x ||x||_pi for kernel mass
  double cond_a = 1e-6;  // lambda ||u||^2 / (u,f) at the smallest lambda
  double cond_b = 1e-6;  // Cauchy increment of S^{1/2} u, relative to max(1, ||S^{1/2} u||)
  double match = 1e-6;   // sigma^2 cross-checks, relative to max(1, sigma^2)
  double grade = 1e-9;   // x max(max|S|, max|A|): grading block residuals
};

/// Validated generator together with its stationary law.
///
/// A "signed" model relaxes the off-diagonal sign constraint. Such models
/// are linear-algebra test operators (e.g. the ladder family); they keep
/// zero row sums and a positive invariant vector but cannot be simulated.
class GeneratorModel {
 public:
  std::size_t size() const { return static_cast<std::size_t>(q_.rows()); }
  const Matrix& generator() const { return q_; }
  const Vector& pi() const { return pi_; }
  const Vector& sqrt_pi() const { return sqrt_pi_; }
  const std::vector<std::string>& labels() const { return labels_; }
  bool is_rate_matrix() const { return rate_matrix_; }
  const Tolerances& tolerances() const { return tol_; }

  /// Absolute row-sum / stationarity tolerance.
  double row_tolerance() const;

 private:
  friend struct GeneratorModelAccess;
  Matrix q_;
  Vector pi_;
  Vector sqrt_pi_;
  std::vector<std::string> labels_;
  bool rate_matrix_ = true;
  Tolerances tol_;
};

struct LoadOptions {
  Tolerances tol{};
  bool allow_signed = false;
  std::vector<std::string> labels{};
};

/// Mean-zero function on the state space.
class Observable {
 public:
  const Vector& values() const { return f_; }
  std::size_t size() const { return static_cast<std::size_t>(f_.size()); }

 private:
  friend Observable make_observable(const Vector&, const GeneratorModel&);
  friend Observable project_mean_zero(const Vector&, const GeneratorModel&);
  explicit Observable(Vector f) : f_(std::move(f)) {}
  Vector f_;
};

struct OperatorSplit {
  Matrix S;
  Matrix A;
  Matrix Gstar;
};

struct ErgodicityReport {
  std::size_t kernel_dim = 0;
  bool kernel_is_constants = false;
  double spectral_gap = 0.0;
  double kernel_tolerance = 0.0;
  Vector eigenvalues;
  bool pass = false;
};

GeneratorModel load_generator(const Matrix& raw, const std::optional<Vector>& pi = std::nullopt,
                              const LoadOptions& opts = {});

Vector stationary_distribution(const Matrix& q, const Tolerances& tol = {});

double pi_inner(const Vector& f, const Vector& g, const GeneratorModel& model);
double pi_norm(const Vector& f, const GeneratorModel& model);

OperatorSplit decompose(const GeneratorModel& model);

ErgodicityReport check_ergodicity(const OperatorSplit& split, const GeneratorModel& model);

/// Validates the mean-zero invariant (within tol.mean * ||f||_inf).
Observable make_observable(const Vector& f, const GeneratorModel& model);
Observable project_mean_zero(const Vector& f, const GeneratorModel& model);

/// Irreducibility of the directed rate graph (positive off-diagonal entries).
bool is_irreducible(const Matrix& q);

/// Detailed balance pi_i Q_ij == pi_j Q_ji for all pairs, relative to max|Q|.
bool satisfies_detailed_balance(const GeneratorModel& model, double rel_tol = 1e-12);

/// M -> Pi^{1/2} M Pi^{-1/2}. Pi-self-adjoint maps become symmetric.
Matrix to_symmetric_frame(const Matrix& m, const GeneratorModel& model);

}  // namespace kvsector
