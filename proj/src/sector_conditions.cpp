#include "kvsector/sector_conditions.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

namespace kvsector {

namespace {

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double smallest_singular_value(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

Matrix antisymmetrize(const Matrix& m) { return 0.5 * (m - m.transpose()); }

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix a_symmetric_frame(const OperatorSplit& split, const Vector& sqrt_pi) {
  return antisymmetrize(sqrt_pi.asDiagonal() * split.A * sqrt_pi.cwiseInverse().asDiagonal());
}

// Modified Gram-Schmidt in the pi-metric. Returns false when v is dependent.
bool orthonormalize_against(Vector& v, const std::vector<Vector>& basis, const Vector& pi,
                            double rel_tol) {
  const double start = std::sqrt((pi.array() * v.array().square()).sum());
  if (start == 0.0) return false;
  for (int pass = 0; pass < 2; ++pass)
    for (const Vector& b : basis) v -= (pi.array() * b.array() * v.array()).sum() * b;
  const double norm = std::sqrt((pi.array() * v.array().square()).sum());
  if (norm <= rel_tol * start) return false;
  v /= norm;
  return true;
}

Matrix to_matrix(const std::vector<Vector>& cols, Eigen::Index rows) {
  Matrix m(rows, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = cols[k];
  return m;
}

Matrix inverse_sqrt_spd(const Matrix& m, double floor, std::size_t level) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  if (es.info() != Eigen::Success)
    throw Error(Errc::EigSolverFailure, "eigen-decomposition of a level block did not converge");
  if (es.eigenvalues().minCoeff() <= floor) {
    std::ostringstream os;
    os << "S restricted to level " << level + 1 << " has eigenvalue " << es.eigenvalues().minCoeff()
       << " at or below the kernel tolerance " << floor;
    throw Error(Errc::SingularLevelS, os.str());
  }
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace

// ---------------------------------------------------------------------------
// Grading

Grading Grading::from_groups(const GeneratorModel& model,
                             const std::vector<std::vector<std::size_t>>& groups, int band) {
  const std::size_t n = model.size();
  if (band < 1) throw Error(Errc::InvalidGrading, "grading band width must be at least 1");
  if (groups.empty()) throw Error(Errc::InvalidGrading, "grading has no levels");
  std::set<std::size_t> seen;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) {
      std::ostringstream os;
      os << "grading group " << g << " is empty";
      throw Error(Errc::InvalidGrading, os.str());
    }
    for (std::size_t i : groups[g]) {
      if (i >= n) {
        std::ostringstream os;
        os << "grading group " << g << " refers to state " << i << " but the model has " << n
           << " states";
        throw Error(Errc::InvalidGrading, os.str());
      }
      if (!seen.insert(i).second) {
        std::ostringstream os;
        os << "state " << i << " appears in more than one grading group";
        throw Error(Errc::InvalidGrading, os.str());
      }
    }
  }
  if (seen.size() + 1 < n)
    throw Error(Errc::InvalidGrading, "grading groups must cover all states but at most one");

  const Vector& pi = model.pi();
  std::vector<Vector> accumulated{Vector::Ones(static_cast<Eigen::Index>(n))};
  Grading grading;
  grading.band_ = band;
  grading.groups_ = groups;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<Vector> level;
    for (std::size_t i : groups[g]) {
      Vector v = Vector::Zero(static_cast<Eigen::Index>(n));
      v(static_cast<Eigen::Index>(i)) = 1.0;
      if (orthonormalize_against(v, accumulated, pi, 1e-10)) {
        accumulated.push_back(v);
        level.push_back(v);
      }
    }
    if (level.empty()) {
      std::ostringstream os;
      os << "grading group " << g << " spans no new direction";
      throw Error(Errc::InvalidGrading, os.str());
    }
    grading.bases_.push_back(to_matrix(level, static_cast<Eigen::Index>(n)));
  }
  return grading;
}

Grading Grading::from_bases(const GeneratorModel& model, const std::vector<Matrix>& bases,
                            int band) {
  const auto n = static_cast<Eigen::Index>(model.size());
  if (band < 1) throw Error(Errc::InvalidGrading, "grading band width must be at least 1");
  if (bases.empty()) throw Error(Errc::InvalidGrading, "grading has no levels");
  const Vector& pi = model.pi();

  Grading grading;
  grading.band_ = band;
  std::vector<Vector> previous;
  Eigen::Index total = 0;
  for (std::size_t l = 0; l < bases.size(); ++l) {
    const Matrix& b = bases[l];
    if (b.rows() != n || b.cols() == 0) {
      std::ostringstream os;
      os << "grading level " << l << " basis must have " << n << " rows and at least one column";
      throw Error(Errc::InvalidGrading, os.str());
    }
    std::vector<Vector> level;
    for (Eigen::Index k = 0; k < b.cols(); ++k) {
      Vector v = b.col(k);
      const double scale = std::max(std::sqrt((pi.array() * v.array().square()).sum()), 1e-300);
      if (std::abs(pi.dot(v)) > 1e-9 * scale) {
        std::ostringstream os;
        os << "grading level " << l << " vector " << k << " is not mean-zero";
        throw Error(Errc::InvalidGrading, os.str());
      }
      for (const Vector& p : previous) {
        if (std::abs((pi.array() * p.array() * v.array()).sum()) > 1e-9 * scale) {
          std::ostringstream os;
          os << "grading level " << l << " is not orthogonal to earlier levels";
          throw Error(Errc::InvalidGrading, os.str());
        }
      }
      if (!orthonormalize_against(v, level, pi, 1e-10)) {
        std::ostringstream os;
        os << "grading level " << l << " has linearly dependent vectors";
        throw Error(Errc::InvalidGrading, os.str());
      }
      level.push_back(v);
    }
    total += static_cast<Eigen::Index>(level.size());
    previous.insert(previous.end(), level.begin(), level.end());
    grading.bases_.push_back(to_matrix(level, n));
  }
  if (total != n - 1) {
    std::ostringstream os;
    os << "grading levels span dimension " << total << " but the mean-zero subspace has dimension "
       << n - 1;
    throw Error(Errc::InvalidGrading, os.str());
  }
  return grading;
}

// ---------------------------------------------------------------------------
// Reduced frame

SectorFrame::SectorFrame(const OperatorSplit& split, const SpectralData& spec,
                         const GeneratorModel& model)
    : sqrt_pi_(model.sqrt_pi()), kernel_component_tol_(spec.kernel_component_tol) {
  if (spec.kernel_dim() != 1)
    throw Error(Errc::NotErgodic, "S must have a one-dimensional kernel (ergodicity of -S)");
  w_ = spec.reduced_vectors();
  eig_ = spec.reduced_eigenvalues();
  a_ = antisymmetrize(w_.transpose() * a_symmetric_frame(split, sqrt_pi_) * w_);
  const Vector inv_sqrt = eig_.cwiseSqrt().cwiseInverse();
  b_ = antisymmetrize(inv_sqrt.asDiagonal() * a_ * inv_sqrt.asDiagonal());
}

Matrix SectorFrame::b_lambda(double lambda) const {
  if (!(lambda > 0.0)) throw Error(Errc::InvalidArgument, "B_lambda requires lambda > 0");
  const Vector scale = (eig_.array() + lambda).sqrt().inverse();
  return antisymmetrize(scale.asDiagonal() * a_ * scale.asDiagonal());
}

Vector SectorFrame::to_reduced(const Vector& x) const {
  if (x.size() != sqrt_pi_.size())
    throw Error(Errc::DimensionMismatch, "vector length does not match the model");
  const Vector y = sqrt_pi_.cwiseProduct(x);
  Vector c = w_.transpose() * y;
  const double outside = (y - w_ * c).norm();
  if (outside > kernel_component_tol_ * y.norm()) {
    std::ostringstream os;
    os << "vector has kernel mass " << outside << " (not mean-zero)";
    throw Error(Errc::KernelComponent, os.str());
  }
  return c;
}

Vector SectorFrame::from_reduced(const Vector& c) const {
  return sqrt_pi_.cwiseInverse().cwiseProduct(w_ * c);
}

// ---------------------------------------------------------------------------
// Strong sector condition

double ssc_norm(const OperatorSplit& split, const SpectralData& spec, const GeneratorModel& model) {
  return spectral_norm(SectorFrame(split, spec, model).b_limit());
}

double ssc_pair_ratio(const OperatorSplit& split, const GeneratorModel& model, const Vector& psi,
                      const Vector& phi) {
  const double num = std::abs(pi_inner(psi, split.A * phi, model));
  const double den = pi_inner(psi, split.S * psi, model) * pi_inner(phi, split.S * phi, model);
  if (!(den > 0.0)) return 0.0;
  return num / std::sqrt(den);
}

SscPairwiseResult ssc_pairwise_check(const OperatorSplit& split, const GeneratorModel& model,
                                     double C, std::size_t n_samples, std::uint64_t seed) {
  if (!(C >= 0.0)) throw Error(Errc::InvalidArgument, "SSC constant must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const auto n = static_cast<Eigen::Index>(model.size());
  auto draw = [&] {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    return project_mean_zero(v, model).values();
  };
  SscPairwiseResult res;
  res.samples = n_samples;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Vector psi = draw();
    const Vector phi = draw();
    const double ratio = ssc_pair_ratio(split, model, psi, phi);
    res.worst_ratio = std::max(res.worst_ratio, ratio);
    if (ratio > C * (1.0 + 1e-10) + 1e-12) ++res.violations;
  }
  res.pass = res.violations == 0;
  return res;
}

// ---------------------------------------------------------------------------
// Graded sector condition

GradedOperator build_graded(const OperatorSplit& split, const GeneratorModel& model,
                            const Grading& grading) {
  const std::size_t levels = grading.levels();
  const Vector& pi = model.pi();
  GradedOperator g;
  g.band = grading.band();
  const double scale =
      std::max({split.S.cwiseAbs().maxCoeff(), split.A.cwiseAbs().maxCoeff(), 1e-300});
  g.grade_tolerance = model.tolerances().grade * scale;

  double offband2 = 0.0;
  for (std::size_t m = 0; m < levels; ++m) {
    const Matrix left = grading.basis(m).transpose() * pi.asDiagonal();
    for (std::size_t n = 0; n < levels; ++n) {
      const Matrix& right = grading.basis(n);
      const auto gap = static_cast<int>(m > n ? m - n : n - m);
      if (m == n) {
        g.S_blocks.push_back(symmetrize(left * split.S * right));
      } else {
        const double s_off = (left * split.S * right).norm();
        offband2 += s_off * s_off;
        if (s_off > g.grade_tolerance) {
          std::ostringstream os;
          os << "S has an off-diagonal block (" << m + 1 << "," << n + 1 << ") of norm " << s_off;
          throw Error(Errc::GradingNotRespected, os.str());
        }
      }
      Matrix a_block = left * split.A * right;
      if (gap > g.band) {
        const double a_off = a_block.norm();
        offband2 += a_off * a_off;
        if (a_off > g.grade_tolerance) {
          std::ostringstream os;
          os << "A has an off-band block (" << m + 1 << "," << n + 1 << ") of norm " << a_off
             << " for band width " << g.band;
          throw Error(Errc::GradingNotRespected, os.str());
        }
      } else {
        g.A_blocks.emplace(BlockKey{m, n}, std::move(a_block));
      }
    }
  }
  g.offband_residual = std::sqrt(offband2);

  double s_top = 0.0;
  for (const Matrix& s : g.S_blocks) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
    s_top = std::max(s_top, es.eigenvalues().maxCoeff());
  }
  const double floor = model.tolerances().ker * s_top;
  std::vector<Matrix> inv_sqrt;
  for (std::size_t n = 0; n < levels; ++n) inv_sqrt.push_back(inverse_sqrt_spd(g.S_blocks[n], floor, n));
  for (const auto& [key, a] : g.A_blocks)
    g.B_blocks.emplace(key, inv_sqrt[key.first] * a * inv_sqrt[key.second]);
  return g;
}

std::pair<Matrix, Matrix> GradedOperator::reassemble(const Grading& grading,
                                                     const GeneratorModel& model) const {
  const auto n = static_cast<Eigen::Index>(model.size());
  Matrix s = Matrix::Zero(n, n);
  Matrix a = Matrix::Zero(n, n);
  const auto weight = model.pi().asDiagonal();
  for (std::size_t l = 0; l < levels(); ++l)
    s += grading.basis(l) * S_blocks[l] * grading.basis(l).transpose() * weight;
  for (const auto& [key, block] : A_blocks)
    a += grading.basis(key.first) * block * grading.basis(key.second).transpose() * weight;
  return {s, a};
}

double fit_power_exponent(const std::vector<double>& c) {
  if (c.size() < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double count = static_cast<double>(c.size());
  for (std::size_t k = 0; k < c.size(); ++k) {
    const double x = std::log(static_cast<double>(k + 1));
    const double y = std::log(c[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (count * sxy - sx * sy) / (count * sxx - sx * sx);
}

namespace {

bool positive_non_decreasing(const std::vector<double>& seq) {
  for (std::size_t k = 0; k < seq.size(); ++k) {
    if (!std::isfinite(seq[k]) || !(seq[k] > 0.0)) return false;
    if (k > 0 && seq[k] < seq[k - 1]) return false;
  }
  return true;
}

void check_lengths(const GradedOperator& g, const SequenceBounds& b) {
  if (b.c.size() != g.levels() || b.d.size() != g.levels()) {
    std::ostringstream os;
    os << "bound sequences must have one entry per level (" << g.levels() << "), got d:"
       << b.d.size() << " c:" << b.c.size();
    throw Error(Errc::InvalidBounds, os.str());
  }
}

constexpr double kBlockSlack = 1e-10;

}  // namespace

DenseRangeReport graded_dense_range_certificate(const GradedOperator& g,
                                                const SequenceBounds& bounds) {
  check_lengths(g, bounds);
  DenseRangeReport rep;
  rep.sequences_valid = positive_non_decreasing(bounds.c) && positive_non_decreasing(bounds.d);
  double sum = 0.0;
  for (double c : bounds.c) {
    rep.inv_c.push_back(1.0 / c);
    sum += 1.0 / c;
    rep.partial_sums.push_back(sum);
  }
  if (rep.sequences_valid) rep.fitted_exponent = fit_power_exponent(bounds.c);
  rep.divergent = rep.sequences_valid && rep.fitted_exponent <= 1.0 + 1e-9;
  rep.pass = rep.sequences_valid && rep.divergent;
  return rep;
}

GscReport gsc_check(const GradedOperator& g, const GradedBoundSpec& bounds) {
  GscReport rep;
  rep.sequences_mode = std::holds_alternative<SequenceBounds>(bounds);
  if (rep.sequences_mode) check_lengths(g, std::get<SequenceBounds>(bounds));
  rep.blockwise_pass = true;
  rep.blockwise_pass_linear = true;
  for (const auto& [key, b] : g.B_blocks) {
    GscBlock blk;
    blk.m = key.first + 1;
    blk.n = key.second + 1;
    blk.norm = spectral_norm(b);
    const bool diag = key.first == key.second;
    if (rep.sequences_mode) {
      const auto& seq = std::get<SequenceBounds>(bounds);
      const double raw = diag ? seq.d[key.second] : seq.c[key.second];
      blk.bound = std::sqrt(std::max(raw, 0.0));
      blk.bound_linear = raw;
    } else {
      const auto& p = std::get<PowerBounds>(bounds);
      const double level = static_cast<double>(blk.n);
      blk.bound = p.C * std::pow(level, diag ? p.kappa : p.beta);
      blk.bound_linear = blk.bound;
    }
    blk.margin = blk.bound - blk.norm;
    blk.margin_linear = blk.bound_linear - blk.norm;
    blk.pass = blk.norm <= blk.bound + kBlockSlack * std::max(1.0, blk.bound);
    blk.pass_linear = blk.norm <= blk.bound_linear + kBlockSlack * std::max(1.0, blk.bound_linear);
    rep.blockwise_pass = rep.blockwise_pass && blk.pass;
    rep.blockwise_pass_linear = rep.blockwise_pass_linear && blk.pass_linear;
    rep.blocks.push_back(blk);
  }
  if (rep.sequences_mode) {
    rep.divergence = graded_dense_range_certificate(g, std::get<SequenceBounds>(bounds));
    rep.pass = rep.blockwise_pass && rep.divergence->pass;
  } else {
    const double beta = std::get<PowerBounds>(bounds).beta;
    if (beta < 1.0) {
      rep.beta_regime = "beta<1";
    } else if (beta == 1.0) {
      rep.beta_regime = "beta=1 (requires sufficiently small C)";
    } else {
      rep.beta_regime = "beta>1 (not covered)";
    }
    rep.pass = rep.blockwise_pass && beta <= 1.0;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Relaxed sector condition

Vector b_lambda_apply(const OperatorSplit& split, const SpectralData& spec, double lambda,
                      const Vector& x) {
  if (!(lambda > 0.0)) throw Error(Errc::InvalidArgument, "B_lambda requires lambda > 0");
  if (static_cast<std::size_t>(x.size()) != spec.size())
    throw Error(Errc::DimensionMismatch, "b_lambda_apply: dimension mismatch");
  Vector scale(spec.eigenvalues.size());
  for (Eigen::Index k = 0; k < scale.size(); ++k) {
    const double e = spec.kernel_mask[static_cast<std::size_t>(k)] ? 0.0 : spec.eigenvalues(k);
    scale(k) = 1.0 / std::sqrt(lambda + std::max(e, 0.0));
  }
  const Matrix& w = spec.sym_vectors;
  const Vector y = w * scale.cwiseProduct(w.transpose() * spec.sqrt_pi.cwiseProduct(x));
  const Vector z = a_symmetric_frame(split, spec.sqrt_pi) * y;
  return spec.sqrt_pi.cwiseInverse().cwiseProduct(w * scale.cwiseProduct(w.transpose() * z));
}

Vector b_limit_apply(const OperatorSplit& split, const SpectralData& spec, const Vector& x) {
  const Vector y = fractional_power_apply(spec, 0.0, Exponent::MinusHalf, x);
  Vector ay = split.A * y;
  return fractional_power_apply(spec, 0.0, Exponent::MinusHalf, ay);
}

Matrix b_limit_matrix(const OperatorSplit& split, const SpectralData& spec,
                      const GeneratorModel& model) {
  return SectorFrame(split, spec, model).b_limit();
}

SkewCertificate skew_selfadjoint_certificate(
    const Matrix& b, const std::optional<std::pair<GradedOperator, SequenceBounds>>& graded) {
  if (b.rows() != b.cols()) throw Error(Errc::NotSkew, "B must be square");
  const double skew_defect = (b + b.transpose()).norm();
  if (skew_defect > 1e-10 * std::max(1.0, b.norm())) {
    std::ostringstream os;
    os << "operator is not skew: ||B + B^T|| = " << skew_defect;
    throw Error(Errc::NotSkew, os.str());
  }
  SkewCertificate cert;
  if (b.rows() == 0) {
    cert.min_sv_minus = cert.min_sv_plus = 1.0;
  } else {
    const Matrix id = Matrix::Identity(b.rows(), b.cols());
    cert.min_sv_minus = smallest_singular_value(id - b);
    cert.min_sv_plus = smallest_singular_value(id + b);
    cert.s_min = smallest_singular_value(b);
  }
  cert.expected = std::sqrt(1.0 + cert.s_min * cert.s_min);
  cert.pass = cert.min_sv_minus >= 1.0 - 1e-10 && cert.min_sv_plus >= 1.0 - 1e-10;
  if (graded) cert.truncation = graded_dense_range_certificate(graded->first, graded->second);
  return cert;
}

RscReport rsc_convergence_check(const OperatorSplit& split, const SpectralData& spec,
                                const GeneratorModel& model, const std::vector<Vector>& test_vectors,
                                const SweepConfig& cfg) {
  const SectorFrame frame(split, spec, model);
  RscReport rep;
  rep.lambdas = cfg.lambdas();
  rep.tol_b = cfg.tol_b;

  std::vector<Vector> reduced;
  for (const Vector& x : test_vectors) reduced.push_back(frame.to_reduced(x));

  std::vector<Matrix> b_lams;
  for (double lam : rep.lambdas) b_lams.push_back(frame.b_lambda(lam));

  rep.converged = true;
  for (const Vector& c : reduced) {
    const Vector bx = frame.b_limit() * c;
    std::vector<double> errs;
    for (const Matrix& bl : b_lams) errs.push_back((bl * c - bx).norm());
    bool mono = true;
    for (std::size_t k = 1; k < errs.size(); ++k)
      if (errs[k] > errs[k - 1] * (1.0 + 1e-9) + 1e-15) mono = false;
    rep.monotone.push_back(mono);
    rep.max_final_error = std::max(rep.max_final_error, errs.back());
    rep.converged = rep.converged && errs.back() < cfg.tol_b;
    rep.errors.push_back(std::move(errs));
  }

  rep.certificate = skew_selfadjoint_certificate(frame.b_limit());

  const auto m = static_cast<Eigen::Index>(frame.dim());
  const Matrix id = Matrix::Identity(m, m);
  const Matrix k_full = m ? Matrix((id - frame.b_limit()).partialPivLu().inverse()) : Matrix();
  rep.k_norm = spectral_norm(k_full);
  bool contraction = rep.k_norm <= 1.0 + 1e-10;
  for (std::size_t l = 0; l < rep.lambdas.size(); ++l) {
    const double lam = rep.lambdas[l];
    const Matrix k_lam = m ? Matrix((id - b_lams[l]).partialPivLu().inverse()) : Matrix();
    rep.k_lambda_norms.push_back(spectral_norm(k_lam));
    contraction = contraction && rep.k_lambda_norms.back() <= 1.0 + 1e-10;
    const Vector scale = (frame.eigenvalues().array() + lam).sqrt().inverse();
    for (std::size_t t = 0; t < test_vectors.size(); ++t) {
      const Observable f = project_mean_zero(test_vectors[t], model);
      const Vector direct = resolvent_apply(model, lam, f);
      const Vector via_k =
          m ? frame.from_reduced(scale.cwiseProduct(k_lam * scale.cwiseProduct(reduced[t])))
            : Vector::Zero(direct.size());
      const double denom = pi_norm(direct, model);
      const double resid = pi_norm(direct - via_k, model);
      rep.max_master_residual =
          std::max(rep.max_master_residual, denom > 0.0 ? resid / denom : resid);
    }
  }
  rep.pass = rep.converged && rep.certificate.pass && contraction && rep.max_master_residual <= 1e-9;
  return rep;
}

KOperatorsReport k_operators_check(const OperatorSplit& split, const SpectralData& spec,
                                   const GeneratorModel& model, const Observable& f,
                                   const LambdaSweep& sweep) {
  const SectorFrame frame(split, spec, model);
  const auto m = static_cast<Eigen::Index>(frame.dim());
  const Matrix id = Matrix::Identity(m, m);
  const Vector fc = frame.to_reduced(f.values());
  const Vector g = fc.cwiseQuotient(frame.eigenvalues().cwiseSqrt());

  KOperatorsReport rep;
  Eigen::PartialPivLU<Matrix> k_lu;
  if (m) k_lu.compute(id - frame.b_limit());
  const Vector kg = m ? Vector(k_lu.solve(g)) : Vector();
  rep.k_norm = m ? spectral_norm(k_lu.inverse()) : 0.0;
  rep.max_contraction_excess = rep.k_norm - 1.0;

  for (const SweepRecord& rec : sweep.records) {
    KLambdaRecord out;
    out.lambda = rec.lambda;
    if (m) {
      const Eigen::PartialPivLU<Matrix> lu = (id - frame.b_lambda(rec.lambda)).partialPivLu();
      out.k_lambda_norm = spectral_norm(lu.inverse());
      const Vector scale = (frame.eigenvalues().array() + rec.lambda).sqrt().inverse();
      const Vector via_k = frame.from_reduced(scale.cwiseProduct(lu.solve(scale.cwiseProduct(fc))));
      const double denom = pi_norm(rec.u, model);
      const double resid = pi_norm(rec.u - via_k, model);
      out.master_residual = denom > 0.0 ? resid / denom : resid;
      out.strong_error = (lu.solve(g) - kg).norm();
    }
    rep.max_contraction_excess = std::max(rep.max_contraction_excess, out.k_lambda_norm - 1.0);
    rep.max_master_residual = std::max(rep.max_master_residual, out.master_residual);
    rep.records.push_back(out);
  }
  rep.final_strong_error = rep.records.empty() ? 0.0 : rep.records.back().strong_error;
  if (!sweep.records.empty() && m) {
    rep.v_mismatch = pi_norm(sweep.records.back().s_half_u - frame.from_reduced(kg), model);
  }
  const double tol = sweep.config.tol_b;
  rep.contraction_pass = rep.max_contraction_excess <= 1e-10;
  rep.master_pass = rep.max_master_residual <= 1e-9;
  rep.converged = rep.final_strong_error < tol;
  rep.v_pass = rep.v_mismatch <= tol;
  rep.pass = rep.contraction_pass && rep.master_pass && rep.converged && rep.v_pass;
  return rep;
}

std::vector<Vector> random_test_vectors(const GeneratorModel& model, std::size_t count,
                                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const auto n = static_cast<Eigen::Index>(model.size());
  std::vector<Vector> out;
  for (std::size_t k = 0; k < count; ++k) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    Vector x = project_mean_zero(v, model).values();
    const double norm = pi_norm(x, model);
    if (norm > 0.0) x /= norm;
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace kvsector
