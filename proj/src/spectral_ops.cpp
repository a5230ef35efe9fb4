#include "kvsector/spectral_ops.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kvsector {

std::size_t SpectralData::kernel_dim() const {
  return static_cast<std::size_t>(std::count(kernel_mask.begin(), kernel_mask.end(), true));
}

Vector SpectralData::coefficients(const Vector& x) const {
  return sym_vectors.transpose() * sqrt_pi.cwiseProduct(x);
}

Vector SpectralData::from_coefficients(const Vector& c) const { return basis * c; }

Matrix SpectralData::reduced_vectors() const {
  Matrix out(sym_vectors.rows(), static_cast<Eigen::Index>(size() - kernel_dim()));
  Eigen::Index col = 0;
  for (std::size_t k = 0; k < size(); ++k)
    if (!kernel_mask[k]) out.col(col++) = sym_vectors.col(static_cast<Eigen::Index>(k));
  return out;
}

Vector SpectralData::reduced_eigenvalues() const {
  Vector out(static_cast<Eigen::Index>(size() - kernel_dim()));
  Eigen::Index i = 0;
  for (std::size_t k = 0; k < size(); ++k)
    if (!kernel_mask[k]) out(i++) = eigenvalues(static_cast<Eigen::Index>(k));
  return out;
}

SpectralData spectral_decompose_S(const OperatorSplit& split, const GeneratorModel& model) {
  Matrix sym = to_symmetric_frame(split.S, model);
  sym = 0.5 * (sym + sym.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success)
    throw Error(Errc::EigSolverFailure, "eigen-decomposition of S did not converge");

  SpectralData spec;
  spec.eigenvalues = es.eigenvalues();
  spec.sym_vectors = es.eigenvectors();
  spec.sqrt_pi = model.sqrt_pi();
  spec.basis = spec.sqrt_pi.cwiseInverse().asDiagonal() * spec.sym_vectors;
  const double top = spec.eigenvalues.size() ? spec.eigenvalues.maxCoeff() : 0.0;
  spec.kernel_tolerance = model.tolerances().ker * std::max(top, 0.0);
  spec.kernel_component_tol = model.tolerances().ker;
  spec.kernel_mask.resize(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k)
    spec.kernel_mask[k] = spec.eigenvalues(static_cast<Eigen::Index>(k)) <= spec.kernel_tolerance;
  return spec;
}

Vector fractional_power_apply(const SpectralData& spec, double lambda, Exponent exponent,
                              const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != spec.size())
    throw Error(Errc::DimensionMismatch, "fractional_power_apply: dimension mismatch");
  if (!(lambda >= 0.0)) throw Error(Errc::InvalidArgument, "lambda must be non-negative");

  Vector c = spec.coefficients(x);
  const double xnorm = c.norm();
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double e = std::max(spec.eigenvalues(i), 0.0);
    if (exponent == Exponent::PlusHalf) {
      c(i) *= std::sqrt(lambda + (spec.kernel_mask[k] ? 0.0 : e));
    } else if (lambda == 0.0 && spec.kernel_mask[k]) {
      if (std::abs(c(i)) > spec.kernel_component_tol * xnorm) {
        std::ostringstream os;
        os << "vector has a kernel component " << c(i) << " outside Dom(S^{-1/2})";
        throw Error(Errc::KernelComponent, os.str());
      }
      c(i) = 0.0;
    } else {
      c(i) /= std::sqrt(lambda + (spec.kernel_mask[k] ? 0.0 : e));
    }
  }
  return spec.from_coefficients(c);
}

HMinusOneResult h_minus_one_norm(const Observable& f, const SpectralData& spec,
                                 const GeneratorModel& model) {
  if (f.size() != model.size())
    throw Error(Errc::DimensionMismatch, "h_minus_one_norm: dimension mismatch");
  const Vector c = spec.coefficients(f.values());
  const double tol = spec.kernel_component_tol * c.norm();
  double kernel_mass = 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    if (spec.kernel_mask[k]) {
      kernel_mass += c(i) * c(i);
    } else {
      acc += c(i) * c(i) / spec.eigenvalues(i);
    }
  }
  kernel_mass = std::sqrt(kernel_mass);
  if (kernel_mass > tol) return HMinusOneInfinite{kernel_mass};
  return HMinusOneFinite{acc};
}

namespace {

Vector solve_refined(const Matrix& m, const Vector& rhs, const char* what) {
  const double rnorm = rhs.norm();
  if (rnorm == 0.0) return Vector::Zero(rhs.size());
  Eigen::PartialPivLU<Matrix> lu(m);
  Vector x = lu.solve(rhs);
  const Vector resid = rhs - m * x;
  if (resid.norm() > 1e-11 * rnorm) x += lu.solve(resid);
  if (!x.allFinite()) {
    std::ostringstream os;
    os << what << ": matrix is singular to working precision";
    throw Error(Errc::SolveFailure, os.str());
  }
  return x;
}

void remove_mean(Vector& u, const GeneratorModel& model) { u.array() -= model.pi().dot(u); }

}  // namespace

Vector resolvent_apply(const GeneratorModel& model, double lambda, const Observable& f) {
  if (!(lambda > 0.0)) throw Error(Errc::InvalidArgument, "resolvent requires lambda > 0");
  const auto n = static_cast<Eigen::Index>(model.size());
  const Matrix m = lambda * Matrix::Identity(n, n) - model.generator();
  Vector u = solve_refined(m, f.values(), "resolvent_apply");
  remove_mean(u, model);
  return u;
}

Vector solve_poisson(const GeneratorModel& model, const Observable& f) {
  const auto n = static_cast<Eigen::Index>(model.size());
  // -Q + 1 pi^T is invertible and agrees with -Q on mean-zero vectors.
  const Matrix m = -model.generator() + Vector::Ones(n) * model.pi().transpose();
  Vector u = solve_refined(m, f.values(), "solve_poisson");
  remove_mean(u, model);
  return u;
}

std::vector<double> SweepConfig::lambdas() const {
  if (!(lambda_min > 0.0) || !(lambda_max > lambda_min))
    throw Error(Errc::InvalidArgument, "sweep requires lambda_max > lambda_min > 0");
  if (!(ratio > 1.0)) throw Error(Errc::InvalidArgument, "sweep ratio must exceed 1");
  std::vector<double> out;
  for (int k = 0;; ++k) {
    const double lam = lambda_max * std::pow(ratio, -k);
    out.push_back(lam);
    if (lam <= lambda_min * (1.0 + 1e-9)) break;
  }
  return out;
}

LambdaSweep condition_sweep(const GeneratorModel& model, const OperatorSplit& split,
                            const SpectralData& spec, const Observable& f,
                            const SweepConfig& cfg) {
  (void)split;
  LambdaSweep sweep;
  sweep.config = cfg;
  const Vector& fv = f.values();
  for (double lam : cfg.lambdas()) {
    SweepRecord rec;
    rec.lambda = lam;
    rec.u = resolvent_apply(model, lam, f);
    rec.s_half_u = fractional_power_apply(spec, 0.0, Exponent::PlusHalf, rec.u);
    const double unorm2 = pi_inner(rec.u, rec.u, model);
    rec.norm_a = std::sqrt(lam * unorm2);
    const double uf = pi_inner(rec.u, fv, model);
    rec.twice_uf = 2.0 * uf;
    rec.rel_a = lam * unorm2 == 0.0 ? 0.0 : lam * unorm2 / std::max(uf, std::numeric_limits<double>::min());
    if (!sweep.records.empty()) {
      const SweepRecord& prev = sweep.records.back();
      rec.cauchy_b = pi_norm(rec.s_half_u - prev.s_half_u, model);
      rec.cond_c = (lam + prev.lambda) * pi_inner(rec.u, prev.u, model);
    }
    const Vector gu = lam * rec.u - fv;
    rec.cond_d = pi_norm(fractional_power_apply(spec, 0.0, Exponent::MinusHalf, gu), model);
    sweep.sup_cond_d = std::max(sweep.sup_cond_d, rec.cond_d);
    sweep.records.push_back(std::move(rec));
  }

  const SweepRecord& last = sweep.records.back();
  sweep.converged_a = last.rel_a <= cfg.tol_a;
  sweep.converged_b =
      last.cauchy_b && *last.cauchy_b <= cfg.tol_b * std::max(1.0, pi_norm(last.s_half_u, model));
  return sweep;
}

VarianceResult sigma_squared(const LambdaSweep& sweep, const SpectralData& spec,
                             const GeneratorModel& model, const Observable& f) {
  if (!sweep.converged())
    throw Error(Errc::NotConverged, "lambda sweep did not satisfy conditions A and B");
  const auto& recs = sweep.records;
  const SweepRecord& r1 = recs[recs.size() - 2];
  const SweepRecord& r2 = recs.back();

  VarianceResult res;
  res.richardson_pair[0] = r1.twice_uf;
  res.richardson_pair[1] = r2.twice_uf;
  res.sigma2 = (r1.lambda * r2.twice_uf - r2.lambda * r1.twice_uf) / (r1.lambda - r2.lambda);
  res.v = r2.s_half_u;
  res.sigma2_from_v = 2.0 * pi_inner(res.v, res.v, model);

  const Vector u = solve_poisson(model, f);
  const Vector su = fractional_power_apply(spec, 0.0, Exponent::PlusHalf, u);
  res.oracle_sigma2 = 2.0 * pi_inner(su, su, model);

  res.tol_match = model.tolerances().match;
  res.matches =
      std::abs(res.sigma2 - res.sigma2_from_v) <= res.tol_match * std::max(1.0, res.sigma2);
  return res;
}

double sigma_squared_oracle(const GeneratorModel& model, const OperatorSplit& split,
                            const SpectralData& spec, const Observable& f) {
  (void)spec;
  const Vector u = solve_poisson(model, f);
  return 2.0 * pi_inner(u, split.S * u, model);
}

}  // namespace kvsector
