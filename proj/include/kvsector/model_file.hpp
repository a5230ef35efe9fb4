#pragma once

// JSON model files, the generator-only CSV escape hatch and model echo.
//
// {
//   "schema_version": 1,
//   "states": 2,
//   "generator": [[-1, 1], [2, -2]],
//   "observable": [1, -2],
//   "pi": [0.6666666666666666, 0.3333333333333333],      (optional)
//   "labels": ["up", "down"],                             (optional)
//   "signed": false,                                      (optional)
//   "grading": {"band_width": 1, "groups": [[1], [2]]}    (optional)
// }
//
// "grading" may also be a bare list of groups, or carry "levels": a list of
// levels, each a list of basis vectors over the states.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kvsector/builtin_models.hpp"

namespace kvsector {

struct GradingSpec {
  int band = 1;
  std::vector<std::vector<std::size_t>> groups;
  std::vector<Matrix> levels;
};

struct ModelFile {
  std::size_t states = 0;
  Matrix generator;
  Vector observable;
  std::optional<Vector> pi;
  std::optional<GradingSpec> grading;
  std::vector<std::string> labels;
  bool signed_operator = false;
};

ModelFile parse_model_json(const std::string& text);

Matrix parse_matrix_csv(const std::string& text);

struct LoadRequest {
  Tolerances tol{};
  bool project = false;
  std::optional<std::string> matrix_csv;       // path; replaces the model file
  std::optional<std::vector<double>> observable;  // overrides the file observable
};

/// Builds a bundle from a model path, a builtin spec, or a CSV generator.
ModelBundle load_model(const std::optional<std::string>& source, const LoadRequest& req);

ModelBundle bundle_from_file(const ModelFile& file, const std::string& name, const LoadRequest& req);

nlohmann::ordered_json model_to_json(const ModelBundle& bundle);

std::string read_text_file(const std::string& path);

}  // namespace kvsector
