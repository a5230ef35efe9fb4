#include "kvsector/builtin_models.hpp"

#include <charconv>
#include <random>
#include <sstream>

namespace kvsector {

ModelBundle two_state(double a, double b, const Tolerances& tol) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error(Errc::InvalidArgument, "2state rates must be positive");
  Matrix q(2, 2);
  q << -a, a, b, -b;
  LoadOptions opts;
  opts.tol = tol;
  GeneratorModel model = load_generator(q, std::nullopt, opts);
  Vector f(2);
  f << 1.0, -b / a;
  Observable obs = project_mean_zero(f, model);
  std::ostringstream name;
  name << "builtin:2state(" << a << "," << b << ")";
  return {name.str(), std::move(model), std::move(obs), std::nullopt};
}

ModelBundle three_cycle(const Tolerances& tol) {
  Matrix q(3, 3);
  q << -1, 1, 0, 0, -1, 1, 1, 0, -1;
  LoadOptions opts;
  opts.tol = tol;
  GeneratorModel model = load_generator(q, std::nullopt, opts);
  Observable obs = make_observable(Vector::Unit(3, 0) - Vector::Unit(3, 1), model);
  return {"builtin:3cycle", std::move(model), std::move(obs), std::nullopt};
}

ModelBundle ladder(const std::vector<double>& s, const std::vector<double>& a,
                   const Tolerances& tol) {
  const std::size_t levels = s.size();
  if (levels == 0) throw Error(Errc::InvalidArgument, "ladder needs at least one level");
  if (a.size() + 1 != levels)
    throw Error(Errc::InvalidArgument, "ladder needs one coupling a_n per adjacent level pair");
  for (double v : s)
    if (!(v > 0.0)) throw Error(Errc::InvalidArgument, "ladder diagonal s_n must be positive");

  const auto n = static_cast<Eigen::Index>(levels + 1);
  const Vector pi = Vector::Constant(n, 1.0 / static_cast<double>(n));
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t k = 1; k <= levels; ++k) groups.push_back({k});

  LoadOptions opts;
  opts.tol = tol;
  opts.allow_signed = true;
  const GeneratorModel scaffold = load_generator(Matrix::Zero(n, n), pi, opts);
  const Grading levels_only = Grading::from_groups(scaffold, groups, 1);

  const auto weight = pi.asDiagonal();
  Matrix sym = Matrix::Zero(n, n);
  Matrix skew = Matrix::Zero(n, n);
  for (std::size_t k = 0; k < levels; ++k) {
    const Vector h = levels_only.basis(k).col(0);
    sym += s[k] * h * h.transpose();
    if (k + 1 < levels) {
      const Vector h_next = levels_only.basis(k + 1).col(0);
      skew += a[k] * (h_next * h.transpose() - h * h_next.transpose());
    }
  }
  const Matrix q = -sym * weight + skew * weight;

  GeneratorModel model = load_generator(q, pi, opts);
  Grading grading = Grading::from_groups(model, groups, 1);
  Observable obs = project_mean_zero(grading.basis(0).col(0), model);
  return {"builtin:ladder", std::move(model), std::move(obs), std::move(grading)};
}

ModelBundle ladder(std::size_t levels, std::string_view profile, const Tolerances& tol) {
  std::vector<double> s(levels, 1.0);
  std::vector<double> a(levels > 0 ? levels - 1 : 0, 1.0);
  if (profile == "linear") {
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = static_cast<double>(k + 1);
  } else if (profile != "unit") {
    throw Error(Errc::InvalidArgument, "unknown ladder profile '" + std::string(profile) +
                                           "' (expected unit or linear)");
  }
  ModelBundle bundle = ladder(s, a, tol);
  std::ostringstream name;
  name << "builtin:ladder(" << levels << "," << profile << ")";
  bundle.name = name.str();
  return bundle;
}

bool is_builtin(std::string_view path) { return path.rfind("builtin:", 0) == 0; }

namespace {

struct BuiltinCall {
  std::string name;
  std::vector<std::string> args;
};

BuiltinCall parse_call(std::string_view text) {
  BuiltinCall call;
  const auto open = text.find('(');
  if (open == std::string_view::npos) {
    call.name = std::string(text);
    return call;
  }
  if (text.back() != ')')
    throw Error(Errc::ParseError, "builtin model spec '" + std::string(text) + "' is missing ')'");
  call.name = std::string(text.substr(0, open));
  std::string_view inner = text.substr(open + 1, text.size() - open - 2);
  while (!inner.empty()) {
    const auto comma = inner.find(',');
    std::string_view piece = inner.substr(0, comma);
    while (!piece.empty() && piece.front() == ' ') piece.remove_prefix(1);
    while (!piece.empty() && piece.back() == ' ') piece.remove_suffix(1);
    call.args.emplace_back(piece);
    if (comma == std::string_view::npos) break;
    inner.remove_prefix(comma + 1);
  }
  return call;
}

double to_double(const std::string& s, std::string_view what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(Errc::ParseError, std::string(what) + ": '" + s + "' is not a number");
}

}  // namespace

ModelBundle resolve_builtin(std::string_view path, const Tolerances& tol) {
  if (!is_builtin(path)) throw Error(Errc::ParseError, "not a builtin model: " + std::string(path));
  const BuiltinCall call = parse_call(path.substr(8));
  if (call.name == "2state") {
    if (call.args.empty()) return two_state(1.0, 2.0, tol);
    if (call.args.size() != 2) throw Error(Errc::ParseError, "builtin:2state takes (a,b)");
    return two_state(to_double(call.args[0], "2state a"), to_double(call.args[1], "2state b"), tol);
  }
  if (call.name == "3cycle") {
    if (!call.args.empty()) throw Error(Errc::ParseError, "builtin:3cycle takes no arguments");
    return three_cycle(tol);
  }
  if (call.name == "ladder") {
    std::size_t levels = 50;
    std::string profile = "unit";
    if (call.args.size() > 2) throw Error(Errc::ParseError, "builtin:ladder takes (N,profile)");
    if (!call.args.empty()) {
      const double v = to_double(call.args[0], "ladder N");
      if (!(v >= 1.0) || v != static_cast<double>(static_cast<std::size_t>(v)))
        throw Error(Errc::ParseError, "ladder N must be a positive integer");
      levels = static_cast<std::size_t>(v);
    }
    if (call.args.size() == 2) profile = call.args[1];
    return ladder(levels, profile, tol);
  }
  throw Error(Errc::ParseError, "unknown builtin model '" + call.name +
                                    "' (expected 2state, 3cycle or ladder)");
}

namespace {

void normalize_exit_rates(Matrix& q) {
  const auto n = q.rows();
  for (Eigen::Index i = 0; i < n; ++i) q(i, i) = 0.0;
  const double mean_exit = q.sum() / static_cast<double>(n);
  q /= mean_exit;
  for (Eigen::Index i = 0; i < n; ++i) q(i, i) = -q.row(i).sum();
}

}  // namespace

Matrix random_generator(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> rate(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto m = static_cast<Eigen::Index>(n);
  Matrix q = Matrix::Zero(m, m);
  if (n == 1) return q;
  const double p = std::min(1.0, 3.0 / static_cast<double>(n));
  for (Eigen::Index i = 0; i < m; ++i) {
    q(i, (i + 1) % m) = rate(rng) + 0.05;
    for (Eigen::Index j = 0; j < m; ++j)
      if (j != i && unit(rng) < p) q(i, j) += rate(rng);
  }
  normalize_exit_rates(q);
  return q;
}

Matrix random_reversible_generator(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> rate(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto m = static_cast<Eigen::Index>(n);
  Matrix q = Matrix::Zero(m, m);
  if (n == 1) return q;
  Vector weight(m);
  for (Eigen::Index i = 0; i < m; ++i) weight(i) = 0.2 + unit(rng);
  Matrix conductance = Matrix::Zero(m, m);
  const double p = std::min(1.0, 3.0 / static_cast<double>(n));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const bool path = j == i + 1;
      if (path || unit(rng) < p) conductance(i, j) = conductance(j, i) = rate(rng) + (path ? 0.05 : 0.0);
    }
  }
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (i != j) q(i, j) = conductance(i, j) / weight(i);
  normalize_exit_rates(q);
  return q;
}

}  // namespace kvsector
