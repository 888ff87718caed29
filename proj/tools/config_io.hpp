#pragma once

#include <optional>
#include <string>

#include "switchlq/model.hpp"
#include "switchlq/sim.hpp"
#include "switchlq/stability.hpp"

namespace switchlq::cli {

/// A problem file plus its optional starting-point block.
struct LoadedConfig {
  model::ProblemSpec spec;
  std::optional<sim::InitialCondition> init;
};

/// Parses a JSON problem file. Layout:
///   n, m            integers
///   generator       m0 x m0 nested array (rows sum to zero)
///   regimes         array of m0 objects; A, Q, R required, the rest of
///                   {Abar,B,Bbar,C,Cbar,D,Dbar,Qbar,S,Sbar,Rbar} default to
///                   zero
///   inputs          optional object with b, sigma, q, qbar, r, rbar; each is
///                   {T_in, breakpoints, g, h} where g/h are arrays over
///                   regimes of dim x num_breakpoints nested arrays (omitted
///                   parts are zero)
///   initial         optional {s, regime, xi2, xi1_coef}
/// Matrices are row-major nested arrays. Throws ConfigError on malformed
/// input; dimension and definiteness checks happen later in validation.
LoadedConfig load_config(const std::string& path);

/// Parses a gains file: {"Theta1": [...], "Theta2": [...]}, arrays over
/// regimes of m x n nested arrays.
stability::Gains load_gains(const std::string& path, int n, int m, int num_regimes);

}  // namespace switchlq::cli
