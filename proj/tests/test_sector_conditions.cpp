#include <doctest.h>

#include "support.hpp"

using namespace kvsector;
using namespace testing_support;

namespace {

struct Fixture {
  GeneratorModel model;
  OperatorSplit split;
  SpectralData spec;

  explicit Fixture(GeneratorModel m)
      : model(std::move(m)), split(decompose(model)), spec(spectral_decompose_S(split, model)) {}
  explicit Fixture(const Matrix& q) : Fixture(load_generator(q)) {}
};

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

TEST_CASE("SSC constant") {
  const Fixture cyc(three_cycle_q());
  CHECK(std::abs(ssc_norm(cyc.split, cyc.spec, cyc.model) - 1.0 / std::sqrt(3.0)) <= 1e-12);

  const Fixture rev(random_reversible_generator(9, 2));
  CHECK(ssc_norm(rev.split, rev.spec, rev.model) <= 1e-10);

  // Doubling A doubles the constant.
  OperatorSplit doubled = cyc.split;
  doubled.A *= 2.0;
  CHECK(ssc_norm(doubled, cyc.spec, cyc.model) ==
        doctest::Approx(2.0 * ssc_norm(cyc.split, cyc.spec, cyc.model)).epsilon(1e-12));
}

TEST_CASE("SSC pairwise check") {
  const Fixture cyc(three_cycle_q());
  const double C = ssc_norm(cyc.split, cyc.spec, cyc.model);
  const SscPairwiseResult ok = ssc_pairwise_check(cyc.split, cyc.model, C, 2000, 1);
  CHECK(ok.pass);
  CHECK(ok.worst_ratio <= C);
  const SscPairwiseResult tight = ssc_pairwise_check(cyc.split, cyc.model, 0.9 * C, 2000, 1);
  CHECK_FALSE(tight.pass);
  CHECK(tight.violations > 0);

  const Fixture rev(random_reversible_generator(6, 1));
  const SscPairwiseResult zero = ssc_pairwise_check(rev.split, rev.model, 0.0, 500, 3);
  CHECK(zero.pass);
  CHECK(zero.worst_ratio <= 1e-10);

  const Vector phi = vec({1, -1, 0});
  CHECK(ssc_pair_ratio(cyc.split, cyc.model, phi, phi) <= 1e-15);
}

TEST_CASE("SSC constant is attained by random sampling on small models") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Fixture fx(random_generator(3 + seed % 3, seed));
    const double C = ssc_norm(fx.split, fx.spec, fx.model);
    const SscPairwiseResult r = ssc_pairwise_check(fx.split, fx.model, C, 10000, seed);
    CHECK(r.pass);
    CHECK(r.worst_ratio <= C);
    CHECK(r.worst_ratio >= 0.95 * C);
  }
}

TEST_CASE("trivial grading reproduces the SSC constant") {
  const Fixture fx(random_generator(7, 5));
  const std::vector<std::vector<std::size_t>> one_level{{1, 2, 3, 4, 5, 6}};
  const Grading g = Grading::from_groups(fx.model, one_level, 1);
  const GradedOperator go = build_graded(fx.split, fx.model, g);
  REQUIRE(go.levels() == 1);
  const double block = go.B_blocks.at({0, 0}).jacobiSvd().singularValues()(0);
  CHECK(block == doctest::Approx(ssc_norm(fx.split, fx.spec, fx.model)).epsilon(1e-10));
}

TEST_CASE("ladder blocks have the closed form a_n / sqrt(s_n s_{n+1})") {
  const std::vector<double> s{1.0, 2.0, 0.5, 4.0, 3.0};
  const std::vector<double> a{0.7, 1.5, 2.0, 0.3};
  const ModelBundle lad = ladder(s, a);
  const OperatorSplit split = decompose(lad.model);
  const GradedOperator go = build_graded(split, lad.model, *lad.grading);
  REQUIRE(go.levels() == 5);
  for (std::size_t n = 0; n < 5; ++n) CHECK(go.S_blocks[n](0, 0) == doctest::Approx(s[n]).epsilon(1e-12));
  for (std::size_t n = 0; n + 1 < 5; ++n) {
    const double expected = a[n] / std::sqrt(s[n] * s[n + 1]);
    CHECK(std::abs(go.B_blocks.at({n + 1, n})(0, 0)) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(go.B_blocks.at({n + 1, n})(0, 0) == doctest::Approx(-go.B_blocks.at({n, n + 1})(0, 0)));
  }
  CHECK(go.offband_residual <= go.grade_tolerance);
}

TEST_CASE("block reassembly reproduces S and A") {
  const ModelBundle lad = ladder(12, "linear");
  const OperatorSplit split = decompose(lad.model);
  const GradedOperator go = build_graded(split, lad.model, *lad.grading);
  const auto [s, a] = go.reassemble(*lad.grading, lad.model);
  CHECK((s - split.S).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((a - split.A).cwiseAbs().maxCoeff() <= 1e-10);

  // A generic grading of a generic chain with a wide band.
  const Fixture fx(random_generator(6, 8));
  const Grading g = Grading::from_groups(fx.model, {{1, 2}, {3, 4, 5}}, 1);
  const Grading one = Grading::from_groups(fx.model, {{1, 2, 3, 4, 5}}, 1);
  const GradedOperator single = build_graded(fx.split, fx.model, one);
  const auto [s1, a1] = single.reassemble(one, fx.model);
  Vector x = centered(vec({1, -2, 0.5, 3, 0, -1}), fx.model.pi());
  CHECK((s1 * x - fx.split.S * x).norm() <= 1e-10 * x.norm());
  CHECK((a1 * x - fx.split.A * x).norm() <= 1e-10 * x.norm());
  CHECK(g.levels() == 2);
}

TEST_CASE("grading that S does not respect is rejected") {
  const Fixture fx(random_generator(6, 8));
  const Grading g = Grading::from_groups(fx.model, {{1, 2}, {3, 4, 5}}, 1);
  CHECK(error_of([&] { build_graded(fx.split, fx.model, g); }) == Errc::GradingNotRespected);

  // Injected off-diagonal S coupling between ladder levels 1 and 3 (band is fine for A).
  const ModelBundle lad = ladder(4, "unit");
  OperatorSplit split = decompose(lad.model);
  const Vector h1 = lad.grading->basis(0).col(0);
  const Vector h3 = lad.grading->basis(2).col(0);
  const Matrix bump = 0.1 * (h1 * h3.transpose() + h3 * h1.transpose()) * lad.model.pi().asDiagonal();
  split.S += bump;
  CHECK(error_of([&] { build_graded(split, lad.model, *lad.grading); }) == Errc::GradingNotRespected);
}

TEST_CASE("invalid gradings") {
  const Fixture fx(random_generator(5, 1));
  CHECK(error_of([&] { Grading::from_groups(fx.model, {{1, 1}, {2, 3, 4}}, 1); }) == Errc::InvalidGrading);
  CHECK(error_of([&] { Grading::from_groups(fx.model, {{1, 2}}, 1); }) == Errc::InvalidGrading);
  CHECK(error_of([&] { Grading::from_groups(fx.model, {{1, 9}, {2, 3, 4}}, 1); }) == Errc::InvalidGrading);
  CHECK(error_of([&] { Grading::from_groups(fx.model, {{1}, {2, 3, 4}}, 0); }) == Errc::InvalidGrading);
}

TEST_CASE("explicit level bases") {
  const ModelBundle lad = ladder(5, "unit");
  const Grading from_bases = Grading::from_bases(lad.model, lad.grading->bases(), 1);
  const OperatorSplit split = decompose(lad.model);
  const GradedOperator a = build_graded(split, lad.model, *lad.grading);
  const GradedOperator b = build_graded(split, lad.model, from_bases);
  for (const auto& [key, blk] : a.B_blocks) CHECK((blk - b.B_blocks.at(key)).norm() < 1e-12);

  // A level that is not mean-zero is refused.
  std::vector<Matrix> bad = lad.grading->bases();
  bad[0].col(0).array() += 1.0;
  CHECK(error_of([&] { Grading::from_bases(lad.model, bad, 1); }) == Errc::InvalidGrading);
  // Missing a level: the levels no longer span the mean-zero space.
  std::vector<Matrix> short_set(lad.grading->bases().begin(), lad.grading->bases().end() - 1);
  CHECK(error_of([&] { Grading::from_bases(lad.model, short_set, 1); }) == Errc::InvalidGrading);
}

TEST_CASE("GSC on ladders") {
  SUBCASE("unit ladder, c_n = 1") {
    const ModelBundle lad = ladder(50, "unit");
    const GradedOperator g = build_graded(decompose(lad.model), lad.model, *lad.grading);
    const SequenceBounds seq{std::vector<double>(50, 1.0), std::vector<double>(50, 1.0)};
    const GscReport r = gsc_check(g, seq);
    CHECK(r.pass);
    CHECK(r.blockwise_pass);
    REQUIRE(r.divergence);
    CHECK(r.divergence->divergent);
    for (const GscBlock& b : r.blocks)
      if (b.m != b.n) CHECK(std::abs(b.norm - 1.0) <= 1e-10);
  }
  SUBCASE("linear ladder needs c_n = n^2 and the divergence test fails") {
    const ModelBundle lad = ladder(50, "linear");
    const GradedOperator g = build_graded(decompose(lad.model), lad.model, *lad.grading);
    std::vector<double> sq, ones(50, 1.0);
    for (int n = 1; n <= 50; ++n) sq.push_back(static_cast<double>(n) * n);
    const GscReport ok = gsc_check(g, SequenceBounds{ones, sq});
    CHECK(ok.blockwise_pass);
    CHECK_FALSE(ok.divergence->divergent);
    CHECK_FALSE(ok.pass);
    const GscReport too_small = gsc_check(g, SequenceBounds{ones, ones});
    CHECK_FALSE(too_small.blockwise_pass);
    for (const GscBlock& b : ok.blocks) {
      if (b.m == b.n + 1) CHECK(std::abs(b.norm - static_cast<double>(b.n)) <= 1e-10 * b.n);
    }
  }
  SUBCASE("power mode") {
    const Fixture rev(random_reversible_generator(5, 4));
    const Grading one = Grading::from_groups(rev.model, {{1, 2, 3, 4}}, 1);
    const GradedOperator g = build_graded(rev.split, rev.model, one);
    const GscReport r = gsc_check(g, PowerBounds{1e-12, 0.0, 1.0});
    CHECK(r.blockwise_pass);
    CHECK(r.pass);
    const GscReport steep = gsc_check(g, PowerBounds{1.0, 0.0, 2.0});
    CHECK_FALSE(steep.pass);
  }
  SUBCASE("sequence length mismatch") {
    const ModelBundle lad = ladder(4, "unit");
    const GradedOperator g = build_graded(decompose(lad.model), lad.model, *lad.grading);
    CHECK(error_of([&] { gsc_check(g, SequenceBounds{{1, 1}, {1, 1}}); }) == Errc::InvalidBounds);
  }
}

TEST_CASE("dense range certificate") {
  const ModelBundle lad = ladder(40, "unit");
  const GradedOperator g = build_graded(decompose(lad.model), lad.model, *lad.grading);
  std::vector<double> ones(40, 1.0), lin, sq;
  for (int n = 1; n <= 40; ++n) {
    lin.push_back(n);
    sq.push_back(static_cast<double>(n) * n);
  }
  const DenseRangeReport c1 = graded_dense_range_certificate(g, {ones, ones});
  CHECK(c1.divergent);
  for (std::size_t k = 0; k < 40; ++k) CHECK(c1.partial_sums[k] == doctest::Approx(k + 1.0));
  const DenseRangeReport c2 = graded_dense_range_certificate(g, {ones, sq});
  CHECK_FALSE(c2.divergent);
  CHECK(c2.partial_sums.back() < M_PI * M_PI / 6.0);
  const DenseRangeReport cn = graded_dense_range_certificate(g, {ones, lin});
  CHECK(cn.divergent);
  CHECK(cn.partial_sums.back() == doctest::Approx(std::log(40.0) + 0.5772156649).epsilon(0.02));
  std::vector<double> decreasing(40, 1.0);
  decreasing[5] = 0.5;
  CHECK_FALSE(graded_dense_range_certificate(g, {ones, decreasing}).sequences_valid);
  CHECK(fit_power_exponent(sq) == doctest::Approx(2.0));
}

TEST_CASE("B_lambda properties") {
  std::mt19937_64 rng(4);
  const Fixture fx(random_generator(25, 6));
  const Vector& pi = fx.model.pi();
  const double a_norm = to_symmetric_frame(fx.split.A, fx.model).norm();
  for (double lam : {1e-8, 1e-4, 1e-1, 1.0, 1e2, 1e4}) {
    for (int k = 0; k < 5; ++k) {
      const Vector x = centered(random_vector(25, rng), pi);
      const Vector y = centered(random_vector(25, rng), pi);
      const double lhs = pi_inner(x, b_lambda_apply(fx.split, fx.spec, lam, y), fx.model);
      const double rhs = -pi_inner(b_lambda_apply(fx.split, fx.spec, lam, x), y, fx.model);
      CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
    const Vector x = centered(random_vector(25, rng), pi);
    CHECK(pi_norm(b_lambda_apply(fx.split, fx.spec, lam, x), fx.model) <=
          a_norm / lam * pi_norm(x, fx.model) * (1 + 1e-12));
  }

  const Fixture rev(random_reversible_generator(8, 3));
  const Vector x = centered(random_vector(8, rng), rev.model.pi());
  CHECK(b_lambda_apply(rev.split, rev.spec, 0.5, x).norm() <= 1e-12);
}

TEST_CASE("B_lambda factors through B") {
  std::mt19937_64 rng(8);
  const Fixture fx(random_generator(30, 10));
  for (double lam : {1e-6, 1e-2, 1.0}) {
    for (int k = 0; k < 100; ++k) {
      const Vector x = centered(random_vector(30, rng), fx.model.pi());
      auto factor = [&](const Vector& v) {
        return fractional_power_apply(
            fx.spec, 0.0, Exponent::PlusHalf, fractional_power_apply(fx.spec, lam, Exponent::MinusHalf, v));
      };
      const Vector lhs = b_lambda_apply(fx.split, fx.spec, lam, x);
      const Vector rhs = factor(b_limit_apply(fx.split, fx.spec, factor(x)));
      CHECK(pi_norm(lhs - rhs, fx.model) <= 1e-9 * std::max(pi_norm(lhs, fx.model), 1e-300));
    }
  }
}

TEST_CASE("skew certificate") {
  const SkewCertificate zero = skew_selfadjoint_certificate(Matrix::Zero(3, 3));
  CHECK(zero.min_sv_minus == doctest::Approx(1.0));
  CHECK(zero.min_sv_plus == doctest::Approx(1.0));
  CHECK(zero.pass);

  const Fixture cyc(three_cycle_q());
  const Matrix b = b_limit_matrix(cyc.split, cyc.spec, cyc.model);
  const SkewCertificate c = skew_selfadjoint_certificate(b);
  CHECK(std::abs(c.min_sv_minus - 2.0 / std::sqrt(3.0)) <= 1e-12);
  CHECK(std::abs(c.min_sv_plus - 2.0 / std::sqrt(3.0)) <= 1e-12);

  std::mt19937_64 rng(1);
  Matrix m(6, 6);
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 6; ++j) m(i, j) = std::normal_distribution<double>()(rng);
  const Matrix skew = m - m.transpose();
  const Eigen::VectorXd s = skew.jacobiSvd().singularValues();
  const Eigen::VectorXd sm = (Matrix::Identity(6, 6) - skew).jacobiSvd().singularValues();
  for (Eigen::Index k = 0; k < 6; ++k)
    CHECK(sm(k) == doctest::Approx(std::sqrt(1.0 + s(k) * s(k))).epsilon(1e-12));
  CHECK(skew_selfadjoint_certificate(skew).pass);

  CHECK(error_of([&] { skew_selfadjoint_certificate(m); }) == Errc::NotSkew);
}

TEST_CASE("RSC convergence") {
  SUBCASE("reversible: errors vanish") {
    const Fixture rev(random_reversible_generator(10, 2));
    const auto tv = random_test_vectors(rev.model, 5, 1);
    const RscReport r = rsc_convergence_check(rev.split, rev.spec, rev.model, tv, {});
    for (const auto& errs : r.errors)
      for (double e : errs) CHECK(e <= 1e-12);
    CHECK(r.pass);
  }
  SUBCASE("3-cycle error is monotone and matches the scalar closed form") {
    const Fixture cyc(three_cycle_q());
    const Vector x = vec({1, -1, 0});
    const RscReport r = rsc_convergence_check(cyc.split, cyc.spec, cyc.model, {x}, {});
    CHECK(r.monotone[0]);
    CHECK(r.errors[0].back() < 1e-6);
    const double bx = pi_norm(x, cyc.model) / std::sqrt(3.0);
    for (std::size_t k = 0; k < r.lambdas.size(); ++k) {
      const double factor = 1.5 / (r.lambdas[k] + 1.5);
      CHECK(r.errors[0][k] == doctest::Approx((1.0 - factor) * bx).epsilon(1e-9));
    }
    CHECK(r.pass);
  }
  SUBCASE("ladder level-1 vector touches only neighbouring levels") {
    const ModelBundle lad = ladder(10, "unit");
    const OperatorSplit split = decompose(lad.model);
    const SpectralData spec = spectral_decompose_S(split, lad.model);
    const Vector h1 = lad.grading->basis(0).col(0);
    const Vector bx = b_limit_apply(split, spec, h1);
    for (std::size_t level = 2; level < 10; ++level)
      CHECK(std::abs(pi_inner(bx, lad.grading->basis(level).col(0), lad.model)) <= 1e-12);
    CHECK(std::abs(pi_inner(bx, lad.grading->basis(1).col(0), lad.model)) == doctest::Approx(1.0));
  }
  SUBCASE("kernel mass is rejected") {
    const Fixture cyc(three_cycle_q());
    CHECK(error_of([&] { rsc_convergence_check(cyc.split, cyc.spec, cyc.model, {vec({1, 1, 1})}, {}); }) ==
          Errc::KernelComponent);
  }
}

TEST_CASE("K operators") {
  SUBCASE("3-cycle") {
    const Fixture cyc(three_cycle_q());
    const Observable f = make_observable(vec({1, -1, 0}), cyc.model);
    const LambdaSweep sw = condition_sweep(cyc.model, cyc.split, cyc.spec, f);
    const KOperatorsReport k = k_operators_check(cyc.split, cyc.spec, cyc.model, f, sw);
    // K = (I - B)^{-1} with B a rotation generator of size 1/sqrt(3): ||K|| = 1/sqrt(1 + 1/3).
    CHECK(k.k_norm == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));
    CHECK(k.max_master_residual < 1e-10);
    CHECK(k.max_contraction_excess <= 1e-10);
    CHECK(k.pass);
  }
  SUBCASE("A = 0: K is the identity") {
    const Fixture rev(random_reversible_generator(7, 9));
    std::mt19937_64 rng(1);
    const Observable f = project_mean_zero(random_vector(7, rng), rev.model);
    const LambdaSweep sw = condition_sweep(rev.model, rev.split, rev.spec, f);
    const KOperatorsReport k = k_operators_check(rev.split, rev.spec, rev.model, f, sw);
    CHECK(k.k_norm == doctest::Approx(1.0).epsilon(1e-12));
    for (const KLambdaRecord& r : k.records) CHECK(r.k_lambda_norm == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(k.pass);
  }
  SUBCASE("single-state model") {
    const Fixture one(mat({{0}}));
    const Observable f = make_observable(vec({0}), one.model);
    const LambdaSweep sw = condition_sweep(one.model, one.split, one.spec, f);
    CHECK_NOTHROW(k_operators_check(one.split, one.spec, one.model, f, sw));
    CHECK_NOTHROW(rsc_convergence_check(one.split, one.spec, one.model, {vec({0})}, {}));
  }
}

TEST_CASE("sector frame requires ergodicity") {
  LoadOptions opts;
  opts.allow_signed = true;
  const Matrix blocks = mat({{-1, 1, 0, 0}, {1, -1, 0, 0}, {0, 0, -1, 1}, {0, 0, 1, -1}});
  const Fixture fx(load_generator(blocks, Vector::Constant(4, 0.25), opts));
  CHECK(error_of([&] { SectorFrame(fx.split, fx.spec, fx.model); }) == Errc::NotErgodic);
}
