#pragma once

#include <cstdint>
#include <vector>

#include "sbo/problem.hpp"
#include "sbo/voi.hpp"

namespace sbo {

struct SBOConfig {
  int n0 = 5;           // first-stage sample count
  int N = 40;           // main-stage iterations
  int M = 10;           // inner samples per evaluation
  int restarts = 10;    // acquisition multi-start count
  int fit_restarts = 10;
  int disc_per_dim = 50;
  int disc_max_total = 2500;
  int refit_every = 1;  // refit hyperparameters every k iterations (0: never)
  std::uint64_t seed = 0;
};

struct IterationRecord {
  int iteration = 0;  // 0 = state right after the first stage
  std::vector<double> chosen_x, chosen_w;  // raw coordinates; empty at 0
  double y = 0.0;
  double noise_var = 0.0;
  double voi = 0.0;
  std::vector<double> recommendation;  // argmax of a_n over A', raw coords
  double oracle_g = 0.0;
  bool has_oracle = false;
  bool fallback = false;
  double wall_ms = 0.0;
};

struct RunRecord {
  std::vector<IterationRecord> iterations;  // size N+1
  std::vector<double> final_recommendation;
  long long evaluations = 0;  // total inner f draws, (n0 + N) * M
  bool fit_degenerate = false;
};

struct AcquisitionResult {
  DesignPoint point;  // normalized coordinates
  double value = 0.0;
  bool fallback = false;
};

// Best local maximizer of V_n across multi-start projected gradient ascent
// over (x, w).  Discrete w is relaxed during ascent and rounded to the
// nearest support atom at the end.  Deterministic given seed.
AcquisitionResult maximize_acquisition(
    const VoiContext& ctx, const Domain& xdom, const std::vector<double>& w_lo,
    const std::vector<double>& w_hi,
    const std::vector<std::vector<double>>* w_atoms, int restarts,
    std::uint64_t seed);

// The full two-stage loop: n0 uniform first-stage samples with w ~ p(w),
// MLE hyperparameter fit, then N iterations of VOI maximization over (x, w),
// M-sample evaluation, and posterior refresh.  Internally the GP operates on
// coordinates normalized to unit scale; records carry raw coordinates.
RunRecord run_sbo(const Problem& problem, const SBOConfig& config);

// Maps a problem domain/discretization to normalized space and back.
// Exposed for the baselines and tests.
struct Normalizer {
  explicit Normalizer(const Problem& problem);

  Domain norm_domain;
  WDistribution norm_wdist;
  std::vector<double> w_lo, w_hi;  // normalized acquisition box for w
  bool w_discrete = false;

  std::vector<double> x_to_raw(std::span<const double> xn) const;
  std::vector<double> x_to_norm(std::span<const double> xr) const;
  std::vector<double> w_to_norm(std::span<const double> wr) const;
  std::vector<double> w_to_raw(std::span<const double> wn) const;

 private:
  std::vector<double> x_off_, x_scale_, w_off_, w_scale_;
};

// Discretization of the normalized domain (uniform box grid or simplex
// lattice), fixed across iterations.
Discretization default_discretization(const Domain& norm_domain, int per_dim,
                                      int max_total);

}  // namespace sbo
