#include "kvsector/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "kvsector/mc_verify.hpp"
#include "kvsector/model_file.hpp"

namespace kvsector {

namespace {

using ojson = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

struct CommonArgs {
  std::string model;
  std::string matrix_csv;
  std::string observable;
  std::string out_path;
  std::string format = "json";
  double lambda_min = 1e-8;
  double lambda_max = 1.0;
  double lambda_ratio = 10.0;
  std::uint64_t seed = 42;
  bool project = false;
  bool echo_model = false;
  Tolerances tol{};
};

struct SectorArgs {
  bool ssc = false;
  bool rsc = false;
  std::string gsc;
  std::size_t test_vectors = 20;
  std::size_t ssc_samples = 2000;
};

struct SimulateArgs {
  double horizon = 1e4;
  std::size_t trajectories = 10000;
  unsigned threads = 1;
  std::string values_csv;
  long long fixed_start = -1;
};

using Table = std::vector<std::vector<std::string>>;

struct Report {
  ojson json;
  Table table;
  bool pass = true;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ojson vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

ojson tolerances_json(const Tolerances& t) {
  ojson j;
  j["row"] = t.row;
  j["mean"] = t.mean;
  j["ker"] = t.ker;
  j["cond_a"] = t.cond_a;
  j["cond_b"] = t.cond_b;
  j["match"] = t.match;
  j["grade"] = t.grade;
  return j;
}

SweepConfig sweep_config(const CommonArgs& c) {
  SweepConfig cfg;
  cfg.lambda_min = c.lambda_min;
  cfg.lambda_max = c.lambda_max;
  cfg.ratio = c.lambda_ratio;
  cfg.tol_a = c.tol.cond_a;
  cfg.tol_b = c.tol.cond_b;
  cfg.lambdas();  // validates
  return cfg;
}

std::vector<double> parse_number_list(const std::string& text, char sep, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, sep)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (cell.find_first_not_of(' ', used) != std::string::npos) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw Error(Errc::ParseError, what + ": '" + cell + "' is not a number");
    }
  }
  return out;
}

ModelBundle load(const CommonArgs& c) {
  LoadRequest req;
  req.tol = c.tol;
  req.project = c.project;
  if (!c.matrix_csv.empty()) req.matrix_csv = c.matrix_csv;
  if (!c.observable.empty()) req.observable = parse_number_list(c.observable, ',', "--observable");
  std::optional<std::string> source;
  if (!c.model.empty()) source = c.model;
  return load_model(source, req);
}

ojson model_summary(const ModelBundle& b) {
  ojson j;
  j["source"] = b.name;
  j["states"] = b.model.size();
  j["rate_matrix"] = b.model.is_rate_matrix();
  j["reversible"] = satisfies_detailed_balance(b.model);
  j["pi"] = vec_json(b.model.pi());
  j["observable"] = vec_json(b.observable.values());
  j["graded"] = b.grading.has_value();
  return j;
}

ojson base_json(const std::string& command, const ModelBundle& b, const CommonArgs& c) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = command;
  j["model"] = model_summary(b);
  ojson cfg;
  cfg["tolerances"] = tolerances_json(c.tol);
  cfg["sweep"] = {{"lambda_max", c.lambda_max}, {"lambda_min", c.lambda_min}, {"ratio", c.lambda_ratio}};
  cfg["seed"] = c.seed;
  cfg["project"] = c.project;
  j["config"] = cfg;
  return j;
}

// Runs a stage; computational failures become a failed verdict with the message.
template <typename F>
bool guarded(ojson& section, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    section["error"] = std::string(to_string(e.code())) + ": " + e.what();
    return false;
  }
}

ojson sweep_json(const LambdaSweep& sweep) {
  ojson recs = ojson::array();
  for (const SweepRecord& r : sweep.records) {
    ojson o;
    o["lambda"] = r.lambda;
    o["norm_a"] = r.norm_a;
    o["rel_a"] = r.rel_a;
    o["cauchy_b"] = r.cauchy_b ? ojson(*r.cauchy_b) : ojson(nullptr);
    o["cond_c"] = r.cond_c ? ojson(*r.cond_c) : ojson(nullptr);
    o["twice_uf"] = r.twice_uf;
    o["cond_d"] = r.cond_d;
    recs.push_back(o);
  }
  ojson j;
  j["records"] = recs;
  j["converged_a"] = sweep.converged_a;
  j["converged_b"] = sweep.converged_b;
  j["sup_cond_d"] = sweep.sup_cond_d;
  j["tol_a"] = sweep.config.tol_a;
  j["tol_b"] = sweep.config.tol_b;
  return j;
}

Table sweep_table(const LambdaSweep& sweep) {
  Table t{{"lambda", "normA", "cauchyB", "condC", "twice_uf", "condD"}};
  for (const SweepRecord& r : sweep.records)
    t.push_back({num(r.lambda), num(r.norm_a), r.cauchy_b ? num(*r.cauchy_b) : "",
                 r.cond_c ? num(*r.cond_c) : "", num(r.twice_uf), num(r.cond_d)});
  return t;
}

Report cmd_analyze(const ModelBundle& b, const CommonArgs& c) {
  Report rep;
  rep.json = base_json("analyze", b, c);
  const SweepConfig cfg = sweep_config(c);
  const OperatorSplit split = decompose(b.model);
  ojson verdicts;

  const ErgodicityReport erg = check_ergodicity(split, b.model);
  rep.json["ergodicity"] = {{"kernel_dim", erg.kernel_dim},
                            {"kernel_is_constants", erg.kernel_is_constants},
                            {"spectral_gap", erg.spectral_gap},
                            {"kernel_tolerance", erg.kernel_tolerance},
                            {"pass", erg.pass}};
  verdicts["ergodic"] = erg.pass;

  const SpectralData spec = spectral_decompose_S(split, b.model);
  ojson h1;
  const HMinusOneResult h = h_minus_one_norm(b.observable, spec, b.model);
  if (const auto* fin = std::get_if<HMinusOneFinite>(&h)) {
    h1["finite"] = true;
    h1["norm_squared"] = fin->norm_squared;
  } else {
    h1["finite"] = false;
    h1["offending_component"] = std::get<HMinusOneInfinite>(h).offending_component;
  }
  h1["kernel_component_tol"] = spec.kernel_component_tol;
  verdicts["h_minus_one_finite"] = h1["finite"];
  rep.json["h_minus_one"] = h1;

  ojson sweep_section;
  std::optional<LambdaSweep> sweep;
  verdicts["sweep_converged"] = guarded(sweep_section, [&] {
    sweep = condition_sweep(b.model, split, spec, b.observable, cfg);
    sweep_section = sweep_json(*sweep);
    rep.table = sweep_table(*sweep);
    return sweep->converged();
  });
  rep.json["sweep"] = sweep_section;

  ojson var;
  verdicts["sigma2_consistent"] = guarded(var, [&] {
    if (!sweep) throw Error(Errc::NotConverged, "no sweep");
    const VarianceResult v = sigma_squared(*sweep, spec, b.model, b.observable);
    const double oracle = sigma_squared_oracle(b.model, split, spec, b.observable);
    const double diff = std::abs(v.sigma2 - oracle);
    const double rel = oracle > 0.0 ? diff / oracle : diff;
    var["sweep"] = v.sigma2;
    var["from_v"] = v.sigma2_from_v;
    var["oracle"] = oracle;
    var["richardson_pair"] = {v.richardson_pair[0], v.richardson_pair[1]};
    var["rel_error_vs_oracle"] = rel;
    var["tol_match"] = v.tol_match;
    var["v_matches"] = v.matches;
    return v.matches && rel <= c.tol.match;
  });
  rep.json["sigma2"] = var;

  rep.json["verdicts"] = verdicts;
  for (const auto& [k, v] : verdicts.items()) rep.pass = rep.pass && v.get<bool>();
  return rep;
}

// "1", "n", "n^2", "3*n^2", "[1;2;3]"
std::vector<double> parse_sequence(const std::string& text, std::size_t levels,
                                   const std::string& what) {
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']') throw Error(Errc::InvalidBounds, what + ": missing ']'");
    return parse_number_list(text.substr(1, text.size() - 2), ';', what);
  }
  double scale = 1.0, power = 0.0;
  std::string rest = text;
  const auto star = rest.find('*');
  if (star != std::string::npos) {
    scale = parse_number_list(rest.substr(0, star), ',', what).at(0);
    rest = rest.substr(star + 1);
  }
  if (!rest.empty() && rest.front() == 'n') {
    power = 1.0;
    if (rest.size() > 1) {
      if (rest[1] != '^') throw Error(Errc::InvalidBounds, what + ": expected n^p");
      power = parse_number_list(rest.substr(2), ',', what).at(0);
    }
  } else if (star == std::string::npos) {
    scale = parse_number_list(rest, ',', what).at(0);
  } else {
    throw Error(Errc::InvalidBounds, what + ": expected K*n^p");
  }
  std::vector<double> out;
  for (std::size_t k = 1; k <= levels; ++k)
    out.push_back(scale * std::pow(static_cast<double>(k), power));
  return out;
}

std::vector<std::pair<std::string, std::string>> split_pairs(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  int depth = 0;
  std::string cur;
  auto flush = [&] {
    const auto eq = cur.find('=');
    if (eq == std::string::npos) throw Error(Errc::InvalidBounds, "bounds entry '" + cur + "' lacks '='");
    out.emplace_back(cur.substr(0, eq), cur.substr(eq + 1));
    cur.clear();
  };
  for (char ch : text) {
    if (ch == '[') ++depth;
    if (ch == ']') --depth;
    if (ch == ',' && depth == 0) {
      flush();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  if (!cur.empty()) flush();
  return out;
}

GradedBoundSpec parse_bounds(const std::string& text, std::size_t levels) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw Error(Errc::InvalidBounds, "--gsc expects power:C=..,kappa=..,beta=.. or sequences:d=..,c=..");
  const std::string mode = text.substr(0, colon);
  const auto pairs = split_pairs(text.substr(colon + 1));
  if (mode == "power") {
    PowerBounds p;
    for (const auto& [k, v] : pairs) {
      const double x = parse_number_list(v, ',', "--gsc " + k).at(0);
      if (k == "C") p.C = x;
      else if (k == "kappa") p.kappa = x;
      else if (k == "beta") p.beta = x;
      else throw Error(Errc::InvalidBounds, "unknown power bound '" + k + "'");
    }
    return p;
  }
  if (mode == "sequences") {
    SequenceBounds s;
    bool has_c = false;
    for (const auto& [k, v] : pairs) {
      if (k == "d") s.d = parse_sequence(v, levels, "--gsc d");
      else if (k == "c") { s.c = parse_sequence(v, levels, "--gsc c"); has_c = true; }
      else throw Error(Errc::InvalidBounds, "unknown sequence bound '" + k + "'");
    }
    if (!has_c) throw Error(Errc::InvalidBounds, "sequences bounds need c=...");
    if (s.d.empty()) s.d = s.c;
    if (s.c.size() != levels || s.d.size() != levels)
      throw Error(Errc::InvalidBounds, "bound sequences need one entry per grading level (" +
                                           std::to_string(levels) + ")");
    return s;
  }
  throw Error(Errc::InvalidBounds, "unknown bounds mode '" + mode + "'");
}

ojson dense_range_json(const DenseRangeReport& d) {
  ojson j;
  j["sequences_valid"] = d.sequences_valid;
  j["fitted_exponent"] = d.fitted_exponent;
  j["partial_sum"] = d.partial_sums.empty() ? 0.0 : d.partial_sums.back();
  j["divergent"] = d.divergent;
  j["verdict"] = d.divergent ? "divergent" : "convergent";
  j["pass"] = d.pass;
  return j;
}

Report cmd_sector(const ModelBundle& b, const CommonArgs& c, const SectorArgs& s) {
  Report rep;
  rep.json = base_json("sector", b, c);
  const SweepConfig cfg = sweep_config(c);
  rep.json["config"]["sector"] = {{"test_vectors", s.test_vectors}, {"ssc_samples", s.ssc_samples}};
  const bool any = s.ssc || s.rsc || !s.gsc.empty();
  const bool run_ssc = s.ssc || !any;
  const bool run_rsc = s.rsc || !any;

  GradedBoundSpec bounds;
  if (!s.gsc.empty()) {
    if (!b.grading) throw Error(Errc::MissingGrading, "--gsc requires a grading in the model");
    bounds = parse_bounds(s.gsc, b.grading->levels());
  }

  const OperatorSplit split = decompose(b.model);
  const ErgodicityReport erg = check_ergodicity(split, b.model);
  if (!erg.pass)
    throw Error(Errc::NotErgodic, "sector checks need an ergodic model (kernel of S = constants)");
  const SpectralData spec = spectral_decompose_S(split, b.model);
  ojson verdicts;

  if (run_ssc) {
    ojson j;
    verdicts["ssc"] = guarded(j, [&] {
      const double C = ssc_norm(split, spec, b.model);
      const SscPairwiseResult pw = ssc_pairwise_check(split, b.model, C, s.ssc_samples, c.seed);
      j["C"] = C;
      j["reversible"] = satisfies_detailed_balance(b.model);
      j["pairwise"] = {{"samples", pw.samples},
                       {"worst_ratio", pw.worst_ratio},
                       {"violations", pw.violations},
                       {"pass", pw.pass}};
      j["pass"] = pw.pass;
      rep.table = {{"C", "worst_ratio", "samples", "violations"},
                   {num(C), num(pw.worst_ratio), std::to_string(pw.samples), std::to_string(pw.violations)}};
      return pw.pass;
    });
    rep.json["ssc"] = j;
  }

  if (!s.gsc.empty()) {
    ojson j;
    j["bounds"] = s.gsc;
    j["band_width"] = b.grading->band();
    j["levels"] = b.grading->levels();
    verdicts["gsc"] = guarded(j, [&] {
      const GradedOperator g = build_graded(split, b.model, *b.grading);
      const GscReport r = gsc_check(g, bounds);
      j["offband_residual"] = g.offband_residual;
      j["grade_tolerance"] = g.grade_tolerance;
      j["convention"] = r.sequences_mode ? "sqrt" : "power";
      ojson blocks = ojson::array();
      Table t{{"m", "n", "norm", "bound", "bound_linear", "margin", "pass"}};
      for (const GscBlock& blk : r.blocks) {
        blocks.push_back({{"m", blk.m},
                          {"n", blk.n},
                          {"norm", blk.norm},
                          {"bound", blk.bound},
                          {"bound_linear", blk.bound_linear},
                          {"margin", blk.margin},
                          {"pass", blk.pass},
                          {"pass_linear", blk.pass_linear}});
        t.push_back({std::to_string(blk.m), std::to_string(blk.n), num(blk.norm), num(blk.bound),
                     num(blk.bound_linear), num(blk.margin), blk.pass ? "1" : "0"});
      }
      j["blocks"] = blocks;
      j["blockwise_pass"] = r.blockwise_pass;
      j["blockwise_pass_linear"] = r.blockwise_pass_linear;
      if (r.divergence) j["divergence"] = dense_range_json(*r.divergence);
      if (!r.beta_regime.empty()) j["beta_regime"] = r.beta_regime;
      j["pass"] = r.pass;
      rep.table = std::move(t);
      return r.pass;
    });
    rep.json["gsc"] = j;
  }

  if (run_rsc) {
    ojson j;
    verdicts["rsc"] = guarded(j, [&] {
      const auto tv = random_test_vectors(b.model, s.test_vectors, c.seed);
      const RscReport r = rsc_convergence_check(split, spec, b.model, tv, cfg);
      const LambdaSweep sweep = condition_sweep(b.model, split, spec, b.observable, cfg);
      const KOperatorsReport k = k_operators_check(split, spec, b.model, b.observable, sweep);
      j["lambdas"] = r.lambdas;
      std::vector<double> worst(r.lambdas.size(), 0.0);
      for (const auto& errs : r.errors)
        for (std::size_t l = 0; l < errs.size(); ++l) worst[l] = std::max(worst[l], errs[l]);
      j["max_error_per_lambda"] = worst;
      j["max_final_error"] = r.max_final_error;
      j["converged"] = r.converged;
      j["certificate"] = {{"min_sv_minus", r.certificate.min_sv_minus},
                          {"min_sv_plus", r.certificate.min_sv_plus},
                          {"s_min", r.certificate.s_min},
                          {"expected", r.certificate.expected},
                          {"pass", r.certificate.pass}};
      j["k_norm"] = r.k_norm;
      j["k_lambda_norms"] = r.k_lambda_norms;
      j["max_master_residual"] = r.max_master_residual;
      j["k_operators"] = {{"final_strong_error", k.final_strong_error},
                          {"v_mismatch", k.v_mismatch},
                          {"max_contraction_excess", k.max_contraction_excess},
                          {"max_master_residual", k.max_master_residual},
                          {"pass", k.pass}};
      j["pass"] = r.pass && k.pass;
      if (s.gsc.empty() && !(run_ssc && s.ssc)) {
        Table t{{"lambda", "max_error", "k_lambda_norm"}};
        for (std::size_t l = 0; l < r.lambdas.size(); ++l)
          t.push_back({num(r.lambdas[l]), num(worst[l]), num(r.k_lambda_norms[l])});
        rep.table = std::move(t);
      }
      return r.pass && k.pass;
    });
    rep.json["rsc"] = j;
  }

  rep.json["verdicts"] = verdicts;
  for (const auto& [k, v] : verdicts.items()) rep.pass = rep.pass && v.get<bool>();
  return rep;
}

Report cmd_simulate(const ModelBundle& b, const CommonArgs& c, const SimulateArgs& s) {
  if (s.trajectories == 0) throw Error(Errc::InvalidArgument, "trajectories must be positive");
  if (!(s.horizon > 0.0) || !std::isfinite(s.horizon))
    throw Error(Errc::InvalidArgument, "horizon must be positive");
  if (s.threads == 0) throw Error(Errc::InvalidArgument, "threads must be positive");
  if (!b.model.is_rate_matrix())
    throw Error(Errc::NotRateMatrix, "simulation needs a rate matrix; this model is signed");

  SimulationOptions opts;
  opts.threads = s.threads;
  if (s.fixed_start >= 0) {
    if (static_cast<std::size_t>(s.fixed_start) >= b.model.size())
      throw Error(Errc::InvalidArgument, "--fixed-start is not a state index");
    opts.stationary_start = false;
    opts.fixed_start = static_cast<std::size_t>(s.fixed_start);
  }

  Report rep;
  rep.json = base_json("simulate", b, c);
  rep.json["config"]["simulation"] = {{"horizon", s.horizon},
                                      {"trajectories", s.trajectories},
                                      {"stationary_start", opts.stationary_start},
                                      {"fixed_start", opts.stationary_start ? ojson(nullptr)
                                                                            : ojson(opts.fixed_start)},
                                      {"ks_alpha", 0.01},
                                      {"rel_tol", 0.05}};

  const OperatorSplit split = decompose(b.model);
  const SpectralData spec = spectral_decompose_S(split, b.model);
  const Vector& f = b.observable.values();
  ojson verdicts;

  const double oracle = sigma_squared_oracle(b.model, split, spec, b.observable);
  const EnsembleStats st = variance_estimate(b.model, f, s.horizon, s.trajectories, c.seed, opts);
  const double rel = oracle > 0.0 ? std::abs(st.variance - oracle) / oracle : std::abs(st.variance);
  const double ks_crit = ks_critical_value(st.n_traj, 0.01);
  ojson var;
  var["mean"] = st.mean;
  var["variance"] = st.variance;
  var["variance_ci"] = {st.variance_ci.lo, st.variance_ci.hi};
  var["oracle_sigma2"] = oracle;
  var["rel_error"] = rel;
  var["ci_covers_oracle"] = st.variance_ci.lo <= oracle && oracle <= st.variance_ci.hi;
  var["agrees_within_5pct"] = rel <= 0.05;
  var["ks_statistic"] = st.ks_statistic;
  var["ks_critical"] = ks_crit;
  var["ks_degenerate"] = st.ks_degenerate;
  rep.json["variance"] = var;
  verdicts["variance_agrees"] = rel <= 0.05;
  verdicts["ks"] = st.ks_degenerate || st.ks_statistic <= ks_crit;

  std::vector<double> horizons;
  for (double h : {s.horizon / 100.0, s.horizon / 10.0, s.horizon})
    if (horizons.empty() || h > horizons.back()) horizons.push_back(h);
  const MartingaleReport m = martingale_check(b.model, split, f, horizons, s.trajectories, c.seed, opts);
  ojson mj;
  mj["sigma2"] = m.sigma2;
  mj["corrector"] = vec_json(m.corrector);
  ojson hs = ojson::array();
  Table t{{"horizon", "mean_M", "se_M", "second_moment", "ci_lo", "ci_hi", "approx_error"}};
  for (const MartingaleHorizon& h : m.horizons) {
    hs.push_back({{"horizon", h.horizon},
                  {"mean_m", h.mean_m},
                  {"se_m", h.se_m},
                  {"second_moment", h.second_moment},
                  {"second_moment_ci", {h.second_moment_ci.lo, h.second_moment_ci.hi}},
                  {"approx_error", h.approx_error},
                  {"mean_ok", h.mean_ok},
                  {"covers_sigma2", h.covers_sigma2},
                  {"rel_error", h.rel_error}});
    t.push_back({num(h.horizon), num(h.mean_m), num(h.se_m), num(h.second_moment),
                 num(h.second_moment_ci.lo), num(h.second_moment_ci.hi), num(h.approx_error)});
  }
  mj["horizons"] = hs;
  mj["error_decreasing"] = m.error_decreasing;
  mj["rel_tol"] = m.rel_tol;
  mj["pass"] = m.pass;
  rep.json["martingale"] = mj;
  rep.table = std::move(t);
  verdicts["martingale"] = m.pass;

  if (!s.values_csv.empty()) {
    std::ofstream vout(s.values_csv, std::ios::binary);
    if (!vout) throw Error(Errc::InvalidArgument, "cannot write '" + s.values_csv + "'");
    vout << "trajectory,value\n";
    for (std::size_t i = 0; i < st.values.size(); ++i) vout << i << ',' << num(st.values[i]) << '\n';
  }

  rep.json["verdicts"] = verdicts;
  for (const auto& [k, v] : verdicts.items()) rep.pass = rep.pass && v.get<bool>();
  return rep;
}

void emit_text(const ojson& j, std::ostream& os, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  auto scalar_list = [](const ojson& a) {
    for (const auto& e : a)
      if (e.is_structured()) return false;
    return true;
  };
  for (const auto& [key, v] : j.items()) {
    if (v.is_object()) {
      os << pad << key << ":\n";
      emit_text(v, os, indent + 1);
    } else if (v.is_array() && !scalar_list(v)) {
      os << pad << key << ":\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        os << pad << "  [" << i << "]\n";
        if (v[i].is_object()) emit_text(v[i], os, indent + 2);
        else os << pad << "    " << v[i].dump() << '\n';
      }
    } else if (v.is_string()) {
      os << pad << key << ": " << v.get<std::string>() << '\n';
    } else {
      os << pad << key << ": " << v.dump() << '\n';
    }
  }
}

void emit(const Report& rep, const std::string& format, std::ostream& os) {
  if (format == "json") {
    os << rep.json.dump(2) << '\n';
  } else if (format == "text") {
    emit_text(rep.json, os, 0);
    os << "result: " << (rep.pass ? "PASS" : "FAIL") << '\n';
  } else {
    for (const auto& row : rep.table) {
      for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << row[k];
      os << '\n';
    }
  }
}

void add_common(CLI::App* cmd, CommonArgs& c) {
  cmd->add_option("model", c.model, "Model file, or builtin:2state(a,b) | builtin:3cycle | builtin:ladder(N,profile)");
  cmd->add_option("--matrix-csv", c.matrix_csv, "Generator matrix as CSV (needs --observable)");
  cmd->add_option("--observable", c.observable, "Comma-separated observable values");
  cmd->add_option("--out", c.out_path, "Write the report to this path instead of stdout");
  cmd->add_option("--format", c.format, "json | csv | text")
      ->check(CLI::IsMember({"json", "csv", "text"}));
  cmd->add_option("--lambda-min", c.lambda_min, "Smallest lambda in the sweep");
  cmd->add_option("--lambda-max", c.lambda_max, "Largest lambda in the sweep");
  cmd->add_option("--lambda-ratio", c.lambda_ratio, "Geometric ratio between sweep points");
  cmd->add_option("--seed", c.seed, "Base seed");
  cmd->add_flag("--project", c.project, "Project the observable onto mean zero");
  cmd->add_flag("--echo-model", c.echo_model, "Include the parsed model in the report");
  cmd->add_option("--tol.row", c.tol.row, "Row-sum tolerance factor");
  cmd->add_option("--tol.mean", c.tol.mean, "Mean-zero tolerance factor");
  cmd->add_option("--tol.ker", c.tol.ker, "Kernel cutoff factor");
  cmd->add_option("--tol.a", c.tol.cond_a, "Condition A tolerance");
  cmd->add_option("--tol.b", c.tol.cond_b, "Condition B tolerance");
  cmd->add_option("--tol.match", c.tol.match, "sigma^2 agreement tolerance");
  cmd->add_option("--tol.grade", c.tol.grade, "Grading residual factor");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kipnis-Varadhan and sector-condition diagnostics for finite Markov generators",
               "kvsector"};
  app.require_subcommand(1);
  CommonArgs common;
  SectorArgs sector;
  SimulateArgs sim;

  CLI::App* analyze = app.add_subcommand("analyze", "Ergodicity, H_{-1} norm, lambda sweep and sigma^2");
  add_common(analyze, common);

  CLI::App* sec = app.add_subcommand("sector", "Strong, graded and relaxed sector conditions");
  add_common(sec, common);
  sec->add_flag("--ssc", sector.ssc, "Strong sector constant");
  sec->add_option("--gsc", sector.gsc, "Graded bounds: power:C=..,kappa=..,beta=.. | sequences:d=..,c=..");
  sec->add_flag("--rsc", sector.rsc, "Relaxed sector condition and K operators");
  sec->add_option("--test-vectors", sector.test_vectors, "Random test vectors for --rsc");
  sec->add_option("--ssc-samples", sector.ssc_samples, "Random pairs for the SSC cross-check");

  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo variance, CLT and martingale checks");
  add_common(simulate, common);
  simulate->add_option("--horizon", sim.horizon, "Time horizon N");
  simulate->add_option("--trajectories", sim.trajectories, "Number of trajectories");
  simulate->add_option("--threads", sim.threads, "Worker threads (results do not depend on it)");
  simulate->add_option("--values-csv", sim.values_csv, "Write per-trajectory values here");
  simulate->add_option("--fixed-start", sim.fixed_start, "Start every trajectory in this state");

  std::vector<std::string> argv_store{"kvsector"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitPass : kExitInputError;
  }

  try {
    const ModelBundle bundle = load(common);
    Report rep;
    if (analyze->parsed()) {
      rep = cmd_analyze(bundle, common);
    } else if (sec->parsed()) {
      rep = cmd_sector(bundle, common, sector);
    } else {
      rep = cmd_simulate(bundle, common, sim);
    }
    if (common.echo_model) rep.json["echo_model"] = model_to_json(bundle);
    rep.json["pass"] = rep.pass;

    if (common.out_path.empty()) {
      emit(rep, common.format, out);
    } else {
      std::ofstream file(common.out_path, std::ios::binary);
      if (!file) throw Error(Errc::InvalidArgument, "cannot write '" + common.out_path + "'");
      emit(rep, common.format, file);
    }
    return rep.pass ? kExitPass : kExitVerdictFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
}

}  // namespace kvsector
