#include "kvsector/model_file.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace kvsector {

namespace {

using json = nlohmann::json;

[[noreturn]] void field_error(const std::string& field, const std::string& msg) {
  throw Error(Errc::ParseError, field + ": " + msg);
}

double number_at(const json& v, const std::string& field) {
  if (!v.is_number()) field_error(field, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) field_error(field, "expected a finite number");
  return d;
}

Vector vector_at(const json& v, const std::string& field, std::size_t expected) {
  if (!v.is_array()) field_error(field, "expected an array of numbers");
  if (v.size() != expected) {
    std::ostringstream os;
    os << "expected " << expected << " entries, got " << v.size();
    field_error(field, os.str());
  }
  Vector out(static_cast<Eigen::Index>(expected));
  for (std::size_t i = 0; i < expected; ++i)
    out(static_cast<Eigen::Index>(i)) = number_at(v[i], field + "[" + std::to_string(i) + "]");
  return out;
}

std::vector<std::vector<std::size_t>> groups_at(const json& v, const std::string& field) {
  if (!v.is_array()) field_error(field, "expected a list of index groups");
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t g = 0; g < v.size(); ++g) {
    const std::string gf = field + "[" + std::to_string(g) + "]";
    if (!v[g].is_array()) field_error(gf, "expected a list of state indices");
    std::vector<std::size_t> group;
    for (std::size_t k = 0; k < v[g].size(); ++k) {
      const json& idx = v[g][k];
      if (!idx.is_number_integer() || idx.get<long long>() < 0)
        field_error(gf + "[" + std::to_string(k) + "]", "expected a non-negative integer");
      group.push_back(idx.get<std::size_t>());
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

GradingSpec grading_at(const json& v, std::size_t states) {
  GradingSpec spec;
  if (v.is_array()) {
    spec.groups = groups_at(v, "grading");
    return spec;
  }
  if (!v.is_object()) field_error("grading", "expected a list of groups or an object");
  if (v.contains("band_width")) {
    const json& b = v["band_width"];
    if (!b.is_number_integer() || b.get<long long>() < 1)
      field_error("grading.band_width", "expected a positive integer");
    spec.band = b.get<int>();
  }
  const bool has_groups = v.contains("groups");
  const bool has_levels = v.contains("levels");
  if (has_groups == has_levels) field_error("grading", "expected exactly one of groups or levels");
  if (has_groups) {
    spec.groups = groups_at(v["groups"], "grading.groups");
  } else {
    const json& levels = v["levels"];
    if (!levels.is_array()) field_error("grading.levels", "expected a list of levels");
    for (std::size_t l = 0; l < levels.size(); ++l) {
      const std::string lf = "grading.levels[" + std::to_string(l) + "]";
      if (!levels[l].is_array() || levels[l].empty())
        field_error(lf, "expected a non-empty list of basis vectors");
      Matrix basis(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(levels[l].size()));
      for (std::size_t k = 0; k < levels[l].size(); ++k)
        basis.col(static_cast<Eigen::Index>(k)) =
            vector_at(levels[l][k], lf + "[" + std::to_string(k) + "]", states);
      spec.levels.push_back(std::move(basis));
    }
  }
  return spec;
}

std::string with_line_context(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

ModelFile parse_model_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ParseError, "model file is not valid JSON (" + with_line_context(text, e.byte) +
                                      "): " + e.what());
  }
  if (!doc.is_object()) throw Error(Errc::ParseError, "model file must be a JSON object");
  if (doc.contains("schema_version")) {
    const json& sv = doc["schema_version"];
    if (!sv.is_number_integer() || sv.get<int>() != 1)
      field_error("schema_version", "unsupported version (expected 1)");
  }

  ModelFile file;
  if (!doc.contains("generator")) field_error("generator", "missing");
  const json& gen = doc["generator"];
  if (!gen.is_array() || gen.empty()) field_error("generator", "expected a non-empty array of rows");
  file.states = gen.size();
  if (doc.contains("states")) {
    const json& st = doc["states"];
    if (!st.is_number_integer() || st.get<long long>() < 1)
      field_error("states", "expected a positive integer");
    if (st.get<std::size_t>() != file.states) {
      std::ostringstream os;
      os << "declares " << st.get<std::size_t>() << " states but generator has " << file.states
         << " rows";
      field_error("states", os.str());
    }
  }
  const auto n = static_cast<Eigen::Index>(file.states);
  file.generator.resize(n, n);
  for (std::size_t i = 0; i < file.states; ++i) {
    const std::string rf = "generator[" + std::to_string(i) + "]";
    if (!gen[i].is_array() || gen[i].size() != file.states) {
      std::ostringstream os;
      os << "row has " << (gen[i].is_array() ? gen[i].size() : 0) << " entries, expected "
         << file.states;
      field_error(rf, os.str());
    }
    file.generator.row(static_cast<Eigen::Index>(i)) = vector_at(gen[i], rf, file.states).transpose();
  }

  if (!doc.contains("observable")) field_error("observable", "missing");
  file.observable = vector_at(doc["observable"], "observable", file.states);
  if (doc.contains("pi") && !doc["pi"].is_null()) file.pi = vector_at(doc["pi"], "pi", file.states);
  if (doc.contains("labels")) {
    const json& labels = doc["labels"];
    if (!labels.is_array() || labels.size() != file.states)
      field_error("labels", "expected one string per state");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!labels[i].is_string()) field_error("labels[" + std::to_string(i) + "]", "expected a string");
      file.labels.push_back(labels[i].get<std::string>());
    }
  }
  if (doc.contains("signed")) {
    if (!doc["signed"].is_boolean()) field_error("signed", "expected true or false");
    file.signed_operator = doc["signed"].get<bool>();
  }
  if (doc.contains("grading") && !doc["grading"].is_null())
    file.grading = grading_at(doc["grading"], file.states);
  return file;
}

Matrix parse_matrix_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#')
      continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw Error(Errc::ParseError, "matrix csv line " + std::to_string(lineno) + ": '" + cell +
                                          "' is not a number");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(Errc::ParseError, "matrix csv is empty");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw Error(Errc::ParseError, "matrix csv row " + std::to_string(i) + " has " +
                                        std::to_string(rows[i].size()) + " entries, expected " +
                                        std::to_string(rows[0].size()));
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ParseError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ModelBundle bundle_from_file(const ModelFile& file, const std::string& name, const LoadRequest& req) {
  LoadOptions opts;
  opts.tol = req.tol;
  opts.allow_signed = file.signed_operator;
  opts.labels = file.labels;
  GeneratorModel model = load_generator(file.generator, file.pi, opts);

  Vector f = file.observable;
  if (req.observable) {
    if (req.observable->size() != file.states)
      throw Error(Errc::DimensionMismatch, "--observable length does not match the number of states");
    f = Eigen::Map<const Vector>(req.observable->data(), static_cast<Eigen::Index>(file.states));
  }
  Observable obs = req.project ? project_mean_zero(f, model) : make_observable(f, model);

  std::optional<Grading> grading;
  if (file.grading) {
    grading = file.grading->levels.empty()
                  ? Grading::from_groups(model, file.grading->groups, file.grading->band)
                  : Grading::from_bases(model, file.grading->levels, file.grading->band);
  }
  return {name, std::move(model), std::move(obs), std::move(grading)};
}

ModelBundle load_model(const std::optional<std::string>& source, const LoadRequest& req) {
  if (req.matrix_csv) {
    if (source) throw Error(Errc::ParseError, "give either a model path or --matrix-csv, not both");
    if (!req.observable) throw Error(Errc::ParseError, "--matrix-csv requires --observable");
    ModelFile file;
    file.generator = parse_matrix_csv(read_text_file(*req.matrix_csv));
    file.states = static_cast<std::size_t>(file.generator.rows());
    file.observable = Vector::Zero(file.generator.rows());
    return bundle_from_file(file, *req.matrix_csv, req);
  }
  if (!source) throw Error(Errc::ParseError, "no model given (path, builtin:<name>, or --matrix-csv)");
  if (is_builtin(*source)) {
    ModelBundle bundle = resolve_builtin(*source, req.tol);
    if (req.observable) {
      if (req.observable->size() != bundle.model.size())
        throw Error(Errc::DimensionMismatch, "--observable length does not match the number of states");
      const Vector f = Eigen::Map<const Vector>(req.observable->data(),
                                                static_cast<Eigen::Index>(req.observable->size()));
      bundle.observable = req.project ? project_mean_zero(f, bundle.model) : make_observable(f, bundle.model);
    }
    return bundle;
  }
  return bundle_from_file(parse_model_json(read_text_file(*source)), *source, req);
}

nlohmann::ordered_json model_to_json(const ModelBundle& bundle) {
  const GeneratorModel& m = bundle.model;
  const auto n = static_cast<Eigen::Index>(m.size());
  auto vec = [](const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  nlohmann::ordered_json out;
  out["schema_version"] = 1;
  out["states"] = m.size();
  if (!m.labels().empty()) out["labels"] = m.labels();
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < n; ++i) rows.push_back(vec(m.generator().row(i).transpose()));
  out["generator"] = rows;
  out["pi"] = vec(m.pi());
  out["observable"] = vec(bundle.observable.values());
  if (!m.is_rate_matrix()) out["signed"] = true;
  if (bundle.grading) {
    nlohmann::ordered_json g;
    g["band_width"] = bundle.grading->band();
    if (!bundle.grading->groups().empty()) {
      g["groups"] = bundle.grading->groups();
    } else {
      nlohmann::ordered_json levels = nlohmann::ordered_json::array();
      for (const Matrix& b : bundle.grading->bases()) {
        nlohmann::ordered_json level = nlohmann::ordered_json::array();
        for (Eigen::Index k = 0; k < b.cols(); ++k) level.push_back(vec(b.col(k)));
        levels.push_back(level);
      }
      g["levels"] = levels;
    }
    out["grading"] = g;
  }
  return out;
}

}  // namespace kvsector
