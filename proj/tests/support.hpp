#pragma once

// Helpers shared by the unit tests: small hand-built models and oracles
// that avoid the library's own solvers.

#include <cmath>
#include <random>

#include "kvsector/builtin_models.hpp"

namespace testing_support {

using kvsector::Matrix;
using kvsector::Vector;

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

inline Matrix three_cycle_q() { return mat({{-1, 1, 0}, {0, -1, 1}, {1, 0, -1}}); }

// pi by power iteration on the uniformized jump matrix P = I + Q / c.
inline Vector power_iteration_pi(const Matrix& q, int iters = 200000) {
  const double c = 1.01 * q.diagonal().cwiseAbs().maxCoeff();
  const Matrix p = Matrix::Identity(q.rows(), q.cols()) + q / c;
  Vector x = Vector::Constant(q.rows(), 1.0 / static_cast<double>(q.rows()));
  for (int k = 0; k < iters; ++k) {
    Vector next = p.transpose() * x;
    next /= next.sum();
    if ((next - x).lpNorm<Eigen::Infinity>() < 1e-16) return next;
    x = next;
  }
  return x;
}

// -Q u = f by the uniformization series u = (1/c) sum_k P^k f, with f mean-zero.
inline Vector neumann_poisson(const Matrix& q, const Vector& pi, const Vector& f,
                              int max_terms = 2000000) {
  const double c = 1.01 * q.diagonal().cwiseAbs().maxCoeff();
  const Matrix p = Matrix::Identity(q.rows(), q.cols()) + q / c;
  Vector term = f;
  Vector acc = Vector::Zero(f.size());
  for (int k = 0; k < max_terms; ++k) {
    acc += term;
    term = p * term;
    term.array() -= pi.dot(term);
    if (term.lpNorm<Eigen::Infinity>() < 1e-17 * std::max(1.0, f.lpNorm<Eigen::Infinity>())) break;
  }
  Vector u = acc / c;
  u.array() -= pi.dot(u);
  return u;
}

inline double weighted(const Vector& f, const Vector& g, const Vector& pi) {
  return (pi.array() * f.array() * g.array()).sum();
}

inline Vector random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = nd(rng);
  return v;
}

inline Vector centered(const Vector& f, const Vector& pi) {
  Vector out = f;
  out.array() -= pi.dot(f);
  return out;
}

}  // namespace testing_support
