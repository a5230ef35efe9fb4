#include <doctest.h>

#include "support.hpp"

using namespace kvsector;
using namespace testing_support;

namespace {

Errc error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::InvalidArgument;
}

}  // namespace

TEST_CASE("load_generator computes pi for small chains") {
  const GeneratorModel two = load_generator(mat({{-1, 1}, {2, -2}}));
  CHECK(two.pi()(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(two.pi()(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  const GeneratorModel one = load_generator(mat({{0}}));
  CHECK(one.size() == 1);
  CHECK(one.pi()(0) == 1.0);

  const Vector cyc = stationary_distribution(three_cycle_q());
  for (int i = 0; i < 3; ++i) CHECK(cyc(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("load_generator rejects invalid input") {
  CHECK(error_of([] { load_generator(Matrix::Zero(2, 3)); }) == Errc::NonSquare);
  CHECK(error_of([] { load_generator(mat({{-1, 1}, {0, 0}})); }) == Errc::Reducible);
  CHECK(error_of([] { load_generator(mat({{1, -1}, {2, -2}})); }) == Errc::NegativeOffDiagonal);
  CHECK(error_of([] { load_generator(mat({{-1, 1.5}, {2, -2}})); }) == Errc::RowSumNonzero);
  CHECK(error_of([] { load_generator(mat({{-1, 1}, {2, -2}}), vec({0.5, 0.5})); }) ==
        Errc::PiMismatch);
  CHECK(error_of([] { load_generator(mat({{-1, NAN}, {2, -2}})); }) == Errc::NonFinite);
  // two disconnected 2-cycles
  const Matrix blocks = mat({{-1, 1, 0, 0}, {1, -1, 0, 0}, {0, 0, -1, 1}, {0, 0, 1, -1}});
  CHECK(error_of([&] { load_generator(blocks); }) == Errc::Reducible);
}

TEST_CASE("given pi is accepted when stationary") {
  const GeneratorModel m = load_generator(mat({{-1, 1}, {2, -2}}), vec({2.0 / 3.0, 1.0 / 3.0}));
  CHECK(m.pi()(0) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("stationary distribution agrees with power iteration on random chains") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Matrix q = random_generator(3 + 4 * seed, seed);
    const Vector pi = stationary_distribution(q);
    const Vector oracle = power_iteration_pi(q);
    CHECK((pi - oracle).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK((pi.transpose() * q).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(pi.minCoeff() > 0.0);
  }
}

TEST_CASE("pi_inner examples") {
  const GeneratorModel half = load_generator(mat({{-1, 1}, {1, -1}}));
  const GeneratorModel two = load_generator(mat({{-1, 1}, {2, -2}}));
  CHECK(pi_inner(vec({1, 1}), vec({1, 1}), two) == doctest::Approx(1.0));
  CHECK(pi_inner(vec({1, -1}), vec({1, -1}), half) == doctest::Approx(1.0));
  CHECK(pi_inner(vec({1, -2}), vec({1, -2}), two) == doctest::Approx(2.0));
  CHECK(error_of([&] { pi_inner(vec({1, 2, 3}), vec({1, 2}), two); }) == Errc::DimensionMismatch);
}

TEST_CASE("decompose on closed-form models") {
  SUBCASE("two-state chains are reversible") {
    const GeneratorModel m = load_generator(mat({{-3, 3}, {0.5, -0.5}}));
    const OperatorSplit s = decompose(m);
    CHECK(s.A.norm() < 1e-14);
    CHECK(satisfies_detailed_balance(m));
  }
  SUBCASE("symmetric Q") {
    const Matrix q = mat({{-2, 1, 1}, {1, -1.5, 0.5}, {1, 0.5, -1.5}});
    const OperatorSplit s = decompose(load_generator(q));
    CHECK((s.Gstar - q).norm() < 1e-14);
    CHECK((s.S + q).norm() < 1e-14);
    CHECK(s.A.norm() < 1e-14);
  }
  SUBCASE("3-cycle") {
    const GeneratorModel m = load_generator(three_cycle_q());
    const OperatorSplit s = decompose(m);
    Matrix p = Matrix::Zero(3, 3);
    p(0, 1) = p(1, 2) = p(2, 0) = 1.0;
    CHECK((s.S - (Matrix::Identity(3, 3) - 0.5 * (p + p.transpose()))).norm() < 1e-14);
    CHECK((s.A - 0.5 * (p - p.transpose())).norm() < 1e-14);
    CHECK_FALSE(satisfies_detailed_balance(m));
  }
}

TEST_CASE("split invariants on random generators") {
  std::mt19937_64 rng(7);
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const std::size_t n = 3 + 17 * (seed - 1);
    const GeneratorModel m = load_generator(random_generator(n, seed));
    const OperatorSplit s = decompose(m);
    CHECK((-s.S + s.A - m.generator()).cwiseAbs().maxCoeff() <= 1e-12);
    for (int k = 0; k < 100; ++k) {
      const Vector f = random_vector(n, rng);
      const Vector g = random_vector(n, rng);
      const double lhs = pi_inner(m.generator() * f, g, m);
      const double rhs = pi_inner(f, s.Gstar * g, m);
      CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
      CHECK(std::abs(pi_inner(s.A * f, g, m) + pi_inner(f, s.A * g, m)) <=
            1e-10 * std::max(1.0, std::abs(lhs)));
    }
    const Matrix sym = to_symmetric_frame(s.S, m);
    const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sym + sym.transpose()));
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * sym.norm());
  }
}

TEST_CASE("reversibility detector matches A = 0") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const GeneratorModel rev = load_generator(random_reversible_generator(5 + seed, seed));
    CHECK(satisfies_detailed_balance(rev));
    CHECK(decompose(rev).A.norm() <= 1e-12);
    const GeneratorModel non = load_generator(random_generator(5 + seed, seed));
    CHECK_FALSE(satisfies_detailed_balance(non));
    CHECK(decompose(non).A.norm() > 1e-12);
  }
}

TEST_CASE("check_ergodicity") {
  const GeneratorModel cyc = load_generator(three_cycle_q());
  const ErgodicityReport r = check_ergodicity(decompose(cyc), cyc);
  CHECK(r.pass);
  CHECK(r.kernel_dim == 1);
  CHECK(r.kernel_is_constants);
  CHECK(r.spectral_gap == doctest::Approx(1.5).epsilon(1e-12));

  const GeneratorModel sym2 = load_generator(mat({{-1, 1}, {1, -1}}));
  const ErgodicityReport r2 = check_ergodicity(decompose(sym2), sym2);
  CHECK(r2.pass);
  CHECK(r2.spectral_gap == doctest::Approx(2.0));

  // Disconnected chain, admitted as a signed operator with a chosen pi.
  LoadOptions opts;
  opts.allow_signed = true;
  const Matrix blocks = mat({{-1, 1, 0, 0}, {1, -1, 0, 0}, {0, 0, -1, 1}, {0, 0, 1, -1}});
  const GeneratorModel split_chain = load_generator(blocks, Vector::Constant(4, 0.25), opts);
  const ErgodicityReport r3 = check_ergodicity(decompose(split_chain), split_chain);
  CHECK_FALSE(r3.pass);
  CHECK(r3.kernel_dim == 2);
}

TEST_CASE("project_mean_zero and make_observable") {
  const GeneratorModel half = load_generator(mat({{-1, 1}, {1, -1}}));
  const GeneratorModel two = load_generator(mat({{-1, 1}, {2, -2}}));
  CHECK(project_mean_zero(vec({1, 1}), two).values().norm() < 1e-15);
  CHECK((project_mean_zero(vec({1, 0}), half).values() - vec({0.5, -0.5})).norm() < 1e-15);
  CHECK((project_mean_zero(vec({1, -2}), two).values() - vec({1, -2})).norm() < 1e-15);
  CHECK(error_of([&] { project_mean_zero(vec({1, 2, 3}), two); }) == Errc::DimensionMismatch);
  CHECK(error_of([&] { make_observable(vec({1, 0}), two); }) == Errc::NotMeanZero);
  CHECK_NOTHROW(make_observable(vec({1, -2}), two));
}

TEST_CASE("signed models keep zero row sums and a positive pi") {
  const ModelBundle lad = ladder(6, "unit");
  CHECK_FALSE(lad.model.is_rate_matrix());
  CHECK(lad.model.generator().rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  CHECK((lad.model.pi().transpose() * lad.model.generator()).cwiseAbs().maxCoeff() < 1e-12);
  // Signed matrices are refused without the opt-in.
  CHECK(error_of([&] { load_generator(lad.model.generator()); }) == Errc::NegativeOffDiagonal);
}
