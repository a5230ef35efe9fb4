#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kvsector/markov_core.hpp"
#include "kvsector/sector_conditions.hpp"

namespace kvsector {

/// A generator together with the observable (and optional grading) that
/// the analyses run on.
struct ModelBundle {
  std::string name;
  GeneratorModel model;
  Observable observable;
  std::optional<Grading> grading;
};

/// Q = [[-a, a], [b, -b]] with f = (1, -b/a).
ModelBundle two_state(double a, double b, const Tolerances& tol = {});

/// Unit-rate cycle 0 -> 1 -> 2 -> 0 with f = (1, -1, 0).
ModelBundle three_cycle(const Tolerances& tol = {});

/// Ladder operator: uniform pi on levels + 1 states, one-dimensional levels
/// from the filtration grading of groups {1}, {2}, ..., S_{n,n} = s_n and
/// A_{n+1,n} = -A_{n,n+1} = a_n. The result is a signed operator (rates may
/// be negative), so it supports every linear-algebra check but not
/// simulation. The observable is the level-1 basis vector.
ModelBundle ladder(const std::vector<double>& s, const std::vector<double>& a,
                   const Tolerances& tol = {});

/// Named profiles: "unit" (s_n = 1, a_n = 1) and "linear" (s_n = 1, a_n = n).
ModelBundle ladder(std::size_t levels, std::string_view profile, const Tolerances& tol = {});

/// Recognises "builtin:..." model paths.
bool is_builtin(std::string_view path);

/// builtin:2state(a,b), builtin:3cycle, builtin:ladder(N,profile).
ModelBundle resolve_builtin(std::string_view path, const Tolerances& tol = {});

/// Random irreducible rate matrix on n states (cycle plus random edges),
/// rescaled to mean exit rate 1.
Matrix random_generator(std::size_t n, std::uint64_t seed);

/// Random rate matrix satisfying detailed balance, rescaled to mean exit rate 1.
Matrix random_reversible_generator(std::size_t n, std::uint64_t seed);

}  // namespace kvsector
