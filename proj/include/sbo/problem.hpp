#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sbo/quadrature.hpp"
#include "sbo/rng.hpp"

namespace sbo {

// Feasible set for x: a coordinate box or the scaled simplex
// {x >= 0, sum x = budget}.
struct Domain {
  enum class Kind { Box, Simplex };
  Kind kind = Kind::Box;
  std::vector<double> lo, hi;  // Box
  double budget = 1.0;         // Simplex
  int simplex_dims = 0;

  static Domain box(std::vector<double> lo, std::vector<double> hi);
  static Domain simplex(int dims, double budget);

  int dim() const {
    return kind == Kind::Box ? static_cast<int>(lo.size()) : simplex_dims;
  }
  bool contains(std::span<const double> x, double tol = 1e-9) const;
  std::vector<double> project(std::vector<double> x) const;
  std::vector<double> sample(Rng& rng) const;
};

struct EvalResult {
  double y = 0.0;
  double sample_var = 0.0;  // unbiased variance of the M inner draws
};

// A benchmark problem: black-box f(x, w, z) with known w-marginal, a
// w-sampler, and (where available) an exact G oracle for scoring.
// evaluate draws M inner z-samples conditioned on w and returns their mean
// and empirical variance; it is a pure function of (x, w, M, seed).
struct Problem {
  std::string name;
  int dim_x = 1;
  int dim_w = 0;
  Domain domain;
  WDistribution wdist = WDistribution::none();
  std::function<EvalResult(std::span<const double> x,
                           std::span<const double> w, int M,
                           std::uint64_t seed)>
      evaluate;
  std::function<std::vector<double>(std::uint64_t seed)> sample_w;
  std::function<double(std::span<const double> x)> oracle_g;  // may be null
};

}  // namespace sbo
