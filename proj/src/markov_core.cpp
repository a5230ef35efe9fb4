#include "kvsector/markov_core.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kvsector {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::NonSquare: return "NonSquare";
    case Errc::NonFinite: return "NonFinite";
    case Errc::NegativeOffDiagonal: return "NegativeOffDiagonal";
    case Errc::RowSumNonzero: return "RowSumNonzero";
    case Errc::Reducible: return "Reducible";
    case Errc::PiMismatch: return "PiMismatch";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NotMeanZero: return "NotMeanZero";
    case Errc::KernelComponent: return "KernelComponent";
    case Errc::EigSolverFailure: return "EigSolverFailure";
    case Errc::SolveFailure: return "SolveFailure";
    case Errc::NotConverged: return "NotConverged";
    case Errc::NotErgodic: return "NotErgodic";
    case Errc::GradingNotRespected: return "GradingNotRespected";
    case Errc::SingularLevelS: return "SingularLevelS";
    case Errc::InvalidGrading: return "InvalidGrading";
    case Errc::InvalidBounds: return "InvalidBounds";
    case Errc::NotSkew: return "NotSkew";
    case Errc::NotRateMatrix: return "NotRateMatrix";
    case Errc::HorizonTooShort: return "HorizonTooShort";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::MissingGrading: return "MissingGrading";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

struct GeneratorModelAccess {
  static GeneratorModel make(Matrix q, Vector pi, std::vector<std::string> labels, bool rate_matrix,
                             const Tolerances& tol) {
    GeneratorModel m;
    m.q_ = std::move(q);
    m.pi_ = std::move(pi);
    m.sqrt_pi_ = m.pi_.array().sqrt();
    m.labels_ = std::move(labels);
    m.rate_matrix_ = rate_matrix;
    m.tol_ = tol;
    return m;
  }
};

namespace {

double row_tol(const Matrix& q, const Tolerances& tol) {
  return tol.row * q.cwiseAbs().maxCoeff();
}

void check_dims(const Vector& f, const GeneratorModel& model, const char* what) {
  if (static_cast<std::size_t>(f.size()) != model.size()) {
    std::ostringstream os;
    os << what << ": vector of length " << f.size() << " does not match " << model.size()
       << " states";
    throw Error(Errc::DimensionMismatch, os.str());
  }
}

// Dimension of the numerical left null space of q.
std::size_t null_dimension(const Eigen::JacobiSVD<Matrix>& svd, double tol) {
  const auto& sv = svd.singularValues();
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) <= tol) ++count;
  }
  return count;
}

}  // namespace

double GeneratorModel::row_tolerance() const { return row_tol(q_, tol_); }

bool is_irreducible(const Matrix& q) {
  const Eigen::Index n = q.rows();
  if (n <= 1) return true;
  auto reach_all = [&](bool transpose) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<Eigen::Index> stack{0};
    seen[0] = 1;
    Eigen::Index visited = 1;
    while (!stack.empty()) {
      const Eigen::Index i = stack.back();
      stack.pop_back();
      for (Eigen::Index j = 0; j < n; ++j) {
        const double rate = transpose ? q(j, i) : q(i, j);
        if (j != i && rate > 0.0 && !seen[static_cast<std::size_t>(j)]) {
          seen[static_cast<std::size_t>(j)] = 1;
          ++visited;
          stack.push_back(j);
        }
      }
    }
    return visited == n;
  };
  return reach_all(false) && reach_all(true);
}

Vector stationary_distribution(const Matrix& q, const Tolerances& tol) {
  const Eigen::Index n = q.rows();
  if (q.cols() != n) throw Error(Errc::NonSquare, "generator is not square");
  if (n == 1) return Vector::Ones(1);

  const bool rate_like = [&] {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j && q(i, j) < 0.0) return false;
    return true;
  }();
  if (rate_like && !is_irreducible(q))
    throw Error(Errc::Reducible, "generator is reducible (more than one communicating class)");

  Eigen::JacobiSVD<Matrix> svd(q.transpose(), Eigen::ComputeFullV);
  const double scale = q.cwiseAbs().maxCoeff();
  if (!rate_like && null_dimension(svd, tol.row * scale * static_cast<double>(n)) != 1)
    throw Error(Errc::Reducible, "null space of Q^T is not one-dimensional");

  Vector pi = svd.matrixV().col(n - 1);
  pi /= pi.sum();
  if ((pi.array() <= 0.0).any())
    throw Error(Errc::Reducible, "stationary vector has non-positive entries");
  pi /= pi.sum();
  return pi;
}

GeneratorModel load_generator(const Matrix& raw, const std::optional<Vector>& pi_opt,
                              const LoadOptions& opts) {
  const Eigen::Index n = raw.rows();
  if (raw.cols() != n || n == 0) {
    std::ostringstream os;
    os << "generator must be a non-empty square matrix, got " << raw.rows() << "x" << raw.cols();
    throw Error(Errc::NonSquare, os.str());
  }
  if (!raw.allFinite()) throw Error(Errc::NonFinite, "generator has non-finite entries");

  const double tol = row_tol(raw, opts.tol);
  if (!opts.allow_signed) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j && raw(i, j) < 0.0) {
          std::ostringstream os;
          os << "generator[" << i << "][" << j << "] = " << raw(i, j) << " is a negative rate";
          throw Error(Errc::NegativeOffDiagonal, os.str());
        }
  }
  const Vector rows = raw.rowwise().sum();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(rows(i)) > tol) {
      std::ostringstream os;
      os << "generator row " << i << " sums to " << rows(i) << " (tolerance " << tol << ")";
      throw Error(Errc::RowSumNonzero, os.str());
    }
  }
  if (!opts.allow_signed && !is_irreducible(raw))
    throw Error(Errc::Reducible, "generator is reducible (more than one communicating class)");

  Vector pi;
  if (pi_opt) {
    pi = *pi_opt;
    if (pi.size() != n) throw Error(Errc::PiMismatch, "pi has the wrong length");
    if (!pi.allFinite() || (pi.array() <= 0.0).any())
      throw Error(Errc::PiMismatch, "pi must have strictly positive entries");
    if (std::abs(pi.sum() - 1.0) > 1e-9) throw Error(Errc::PiMismatch, "pi does not sum to 1");
    const double resid = (pi.transpose() * raw).cwiseAbs().maxCoeff();
    if (resid > tol) {
      std::ostringstream os;
      os << "pi.Q residual " << resid << " exceeds tolerance " << tol;
      throw Error(Errc::PiMismatch, os.str());
    }
  } else {
    pi = stationary_distribution(raw, opts.tol);
  }

  std::vector<std::string> labels = opts.labels;
  if (!labels.empty() && labels.size() != static_cast<std::size_t>(n))
    throw Error(Errc::DimensionMismatch, "labels: count does not match the number of states");
  return GeneratorModelAccess::make(raw, std::move(pi), std::move(labels), !opts.allow_signed,
                                    opts.tol);
}

double pi_inner(const Vector& f, const Vector& g, const GeneratorModel& model) {
  check_dims(f, model, "pi_inner");
  check_dims(g, model, "pi_inner");
  return (model.pi().array() * f.array() * g.array()).sum();
}

double pi_norm(const Vector& f, const GeneratorModel& model) {
  return std::sqrt(std::max(0.0, pi_inner(f, f, model)));
}

Matrix to_symmetric_frame(const Matrix& m, const GeneratorModel& model) {
  const Vector& d = model.sqrt_pi();
  return d.asDiagonal() * m * d.cwiseInverse().asDiagonal();
}

OperatorSplit decompose(const GeneratorModel& model) {
  const Matrix& q = model.generator();
  const Vector& pi = model.pi();
  OperatorSplit split;
  split.Gstar = pi.cwiseInverse().asDiagonal() * q.transpose() * pi.asDiagonal();
  split.S = -0.5 * (q + split.Gstar);
  split.A = 0.5 * (q - split.Gstar);
  return split;
}

ErgodicityReport check_ergodicity(const OperatorSplit& split, const GeneratorModel& model) {
  Matrix sym = to_symmetric_frame(split.S, model);
  sym = 0.5 * (sym + sym.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success)
    throw Error(Errc::EigSolverFailure, "eigen-decomposition of S did not converge");

  ErgodicityReport rep;
  rep.eigenvalues = es.eigenvalues();
  const double top = rep.eigenvalues.size() ? rep.eigenvalues.maxCoeff() : 0.0;
  rep.kernel_tolerance = model.tolerances().ker * std::max(top, 0.0);
  Eigen::Index first_positive = -1;
  for (Eigen::Index k = 0; k < rep.eigenvalues.size(); ++k) {
    if (rep.eigenvalues(k) <= rep.kernel_tolerance) {
      ++rep.kernel_dim;
    } else if (first_positive < 0) {
      first_positive = k;
    }
  }
  rep.spectral_gap = first_positive >= 0 ? rep.eigenvalues(first_positive) : 0.0;
  if (rep.kernel_dim == 1) {
    const double overlap = std::abs(es.eigenvectors().col(0).dot(model.sqrt_pi()));
    rep.kernel_is_constants = overlap >= 1.0 - 1e-8;
  }
  rep.pass = rep.kernel_dim == 1 && rep.kernel_is_constants;
  return rep;
}

Observable make_observable(const Vector& f, const GeneratorModel& model) {
  check_dims(f, model, "observable");
  if (!f.allFinite()) throw Error(Errc::NonFinite, "observable has non-finite entries");
  const double mean = model.pi().dot(f);
  const double tol = model.tolerances().mean * (f.size() ? f.cwiseAbs().maxCoeff() : 0.0);
  if (std::abs(mean) > tol) {
    std::ostringstream os;
    os << "observable not mean-zero: (f,1)_pi = " << mean << " (tolerance " << tol << ")";
    throw Error(Errc::NotMeanZero, os.str());
  }
  return Observable(f);
}

Observable project_mean_zero(const Vector& f, const GeneratorModel& model) {
  check_dims(f, model, "project_mean_zero");
  Vector g = f.array() - model.pi().dot(f);
  g.array() -= model.pi().dot(g);
  return Observable(std::move(g));
}

bool satisfies_detailed_balance(const GeneratorModel& model, double rel_tol) {
  const Matrix& q = model.generator();
  const Vector& pi = model.pi();
  const double tol = rel_tol * std::max(q.cwiseAbs().maxCoeff(), 1e-300);
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    for (Eigen::Index j = i + 1; j < q.cols(); ++j)
      if (std::abs(pi(i) * q(i, j) - pi(j) * q(j, i)) > tol) return false;
  return true;
}

}  // namespace kvsector
