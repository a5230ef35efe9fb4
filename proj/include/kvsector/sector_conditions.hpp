#pragma once

// Strong, graded and relaxed sector conditions for a finite generator.
//
// Operator-level quantities live on the mean-zero subspace, expressed in
// the orthonormal coordinates given by the non-kernel eigenvectors of S in
// the symmetric frame. In those coordinates S is diagonal, pi-skew maps are
// antisymmetric matrices and pi-norms are Euclidean norms.

#include <cstdint>
#include <map>
#include <string>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "kvsector/spectral_ops.hpp"

namespace kvsector {

/// Orthogonal decomposition of the mean-zero subspace into levels H_1..H_L
/// plus the band width r of the antisymmetric part.
class Grading {
 public:
  /// Filtration grading: groups partition the states except (at most) one
  /// reference state. Level k is the pi-orthogonal complement of
  /// span{1, 1_i : i in G_1..G_{k-1}} inside span{1, 1_i : i in G_1..G_k}.
  static Grading from_groups(const GeneratorModel& model,
                             const std::vector<std::vector<std::size_t>>& groups, int band);

  /// Explicit level bases (columns are functions on the states). Each level
  /// is orthonormalised in the pi-metric; levels must be mutually orthogonal,
  /// mean-zero and jointly span the mean-zero subspace.
  static Grading from_bases(const GeneratorModel& model, const std::vector<Matrix>& bases,
                            int band);

  std::size_t levels() const { return bases_.size(); }
  const Matrix& basis(std::size_t level) const { return bases_.at(level); }
  const std::vector<Matrix>& bases() const { return bases_; }
  int band() const { return band_; }
  /// Group form, when constructed from groups.
  const std::vector<std::vector<std::size_t>>& groups() const { return groups_; }

 private:
  std::vector<Matrix> bases_;
  std::vector<std::vector<std::size_t>> groups_;
  int band_ = 1;
};

using BlockKey = std::pair<std::size_t, std::size_t>;  // (m, n), 0-based levels

struct GradedOperator {
  std::vector<Matrix> S_blocks;           // S_{n,n}
  std::map<BlockKey, Matrix> A_blocks;    // |m - n| <= r
  std::map<BlockKey, Matrix> B_blocks;    // S_{m,m}^{-1/2} A_{m,n} S_{n,n}^{-1/2}
  double offband_residual = 0.0;          // Frobenius mass outside the allowed pattern
  double grade_tolerance = 0.0;
  int band = 1;

  std::size_t levels() const { return S_blocks.size(); }
  /// Reassembles the blocks into full pi-frame matrices (rows/cols are
  /// state functions) acting on the mean-zero subspace.
  std::pair<Matrix, Matrix> reassemble(const Grading& grading, const GeneratorModel& model) const;
};

struct PowerBounds {
  double C = 1.0;
  double kappa = 0.0;
  double beta = 0.0;
};

struct SequenceBounds {
  std::vector<double> d;
  std::vector<double> c;
};

using GradedBoundSpec = std::variant<PowerBounds, SequenceBounds>;

struct GscBlock {
  std::size_t m = 0, n = 0;  // 1-based level indices
  double norm = 0.0;
  double bound = 0.0;              // primary bound (square-root convention in sequences mode)
  double bound_linear = 0.0;       // sequences mode: bound without square root
  double margin = 0.0;             // bound - norm
  double margin_linear = 0.0;
  bool pass = false;
  bool pass_linear = false;
};

struct DenseRangeReport {
  std::vector<double> inv_c;         // 1 / c_N
  std::vector<double> partial_sums;  // sum_{n <= N} 1 / c_n
  double fitted_exponent = 0.0;      // c_n ~ n^p
  bool divergent = false;            // heuristic: p <= 1
  bool sequences_valid = false;      // positive and non-decreasing
  bool pass = false;
};

struct GscReport {
  bool sequences_mode = false;
  std::vector<GscBlock> blocks;
  bool blockwise_pass = false;
  bool blockwise_pass_linear = false;
  std::optional<DenseRangeReport> divergence;  // sequences mode
  std::string beta_regime;                     // power mode
  bool pass = false;
};

struct SscPairwiseResult {
  bool pass = true;
  double worst_ratio = 0.0;
  std::size_t violations = 0;
  std::size_t samples = 0;
};

struct SkewCertificate {
  double min_sv_minus = 0.0;  // smallest singular value of I - B
  double min_sv_plus = 0.0;   // smallest singular value of I + B
  double s_min = 0.0;         // smallest singular value of B
  double expected = 1.0;      // sqrt(1 + s_min^2)
  bool pass = false;
  std::optional<DenseRangeReport> truncation;
};

struct RscReport {
  std::vector<double> lambdas;
  std::vector<std::vector<double>> errors;  // [test vector][lambda] ||B_l x - B x||_pi
  std::vector<bool> monotone;
  double max_final_error = 0.0;
  double tol_b = 1e-6;
  SkewCertificate certificate;
  std::vector<double> k_lambda_norms;
  double k_norm = 0.0;
  double max_master_residual = 0.0;
  bool converged = false;
  bool pass = false;
};

struct KLambdaRecord {
  double lambda = 0.0;
  double k_lambda_norm = 0.0;
  double master_residual = 0.0;  // relative
  double strong_error = 0.0;     // ||K_lambda g - K g||_pi
};

struct KOperatorsReport {
  std::vector<KLambdaRecord> records;
  double k_norm = 0.0;
  double max_contraction_excess = 0.0;  // max(||K_l|| - 1, ||K|| - 1)
  double max_master_residual = 0.0;
  double final_strong_error = 0.0;
  double v_mismatch = 0.0;              // ||v_sweep - K g||_pi
  bool contraction_pass = false;
  bool master_pass = false;
  bool converged = false;
  bool v_pass = false;
  bool pass = false;
};

/// The restricted operators S, A, B and B_lambda in reduced coordinates.
class SectorFrame {
 public:
  SectorFrame(const OperatorSplit& split, const SpectralData& spec, const GeneratorModel& model);

  std::size_t dim() const { return static_cast<std::size_t>(eig_.size()); }
  const Vector& eigenvalues() const { return eig_; }
  const Matrix& a_reduced() const { return a_; }
  const Matrix& b_limit() const { return b_; }
  Matrix b_lambda(double lambda) const;

  /// Reduced coordinates of a state function; throws KernelComponent when
  /// the function has mass outside the mean-zero subspace.
  Vector to_reduced(const Vector& x) const;
  Vector from_reduced(const Vector& c) const;

 private:
  Matrix w_;        // n x m, orthonormal in the symmetric frame
  Vector eig_;
  Vector sqrt_pi_;
  Matrix a_;        // W^T A_sym W
  Matrix b_;        // Lambda^{-1/2} a Lambda^{-1/2}
  double kernel_component_tol_ = 1e-8;
};

double ssc_norm(const OperatorSplit& split, const SpectralData& spec, const GeneratorModel& model);

/// |(psi, A phi)_pi| / sqrt((psi,S psi)_pi (phi,S phi)_pi); zero when either form vanishes.
double ssc_pair_ratio(const OperatorSplit& split, const GeneratorModel& model, const Vector& psi,
                      const Vector& phi);

SscPairwiseResult ssc_pairwise_check(const OperatorSplit& split, const GeneratorModel& model,
                                     double C, std::size_t n_samples, std::uint64_t seed);

GradedOperator build_graded(const OperatorSplit& split, const GeneratorModel& model,
                            const Grading& grading);

GscReport gsc_check(const GradedOperator& g, const GradedBoundSpec& bounds);

DenseRangeReport graded_dense_range_certificate(const GradedOperator& g,
                                                const SequenceBounds& bounds);

/// Power-law exponent of c_n against n (least squares in log-log).
double fit_power_exponent(const std::vector<double>& c);

Vector b_lambda_apply(const OperatorSplit& split, const SpectralData& spec, double lambda,
                      const Vector& x);

/// S^{-1/2} A S^{-1/2} x with the hard spectral cutoff.
Vector b_limit_apply(const OperatorSplit& split, const SpectralData& spec, const Vector& x);

/// Reduced-frame matrix of B (antisymmetric).
Matrix b_limit_matrix(const OperatorSplit& split, const SpectralData& spec,
                      const GeneratorModel& model);

SkewCertificate skew_selfadjoint_certificate(
    const Matrix& b, const std::optional<std::pair<GradedOperator, SequenceBounds>>& graded = {});

RscReport rsc_convergence_check(const OperatorSplit& split, const SpectralData& spec,
                                const GeneratorModel& model, const std::vector<Vector>& test_vectors,
                                const SweepConfig& cfg);

KOperatorsReport k_operators_check(const OperatorSplit& split, const SpectralData& spec,
                                   const GeneratorModel& model, const Observable& f,
                                   const LambdaSweep& sweep);

/// Random pi-normalised mean-zero vectors for convergence checks.
std::vector<Vector> random_test_vectors(const GeneratorModel& model, std::size_t count,
                                        std::uint64_t seed);

}  // namespace kvsector
