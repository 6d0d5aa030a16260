#pragma once

#include <span>
#include <vector>

#include "sbo/gp.hpp"
#include "sbo/quadrature.hpp"

namespace sbo {

// The discretized decision set A' over which the inner maximum is taken.
struct Discretization {
  std::vector<std::vector<double>> points;  // L points, each length dim_x
  int size() const { return static_cast<int>(points.size()); }
};

struct VOIResult {
  double value = 0.0;
  std::vector<int> kept_indices;      // surviving lines, into A'
  std::vector<double> breakpoints;    // strictly increasing, size l-1
  std::vector<double> gradient;       // d/d(candidate), x-block then w-block
  bool degenerate = false;            // candidate duplicated existing data
};

struct HResult {
  double value = 0.0;
  std::vector<int> kept_indices;
  std::vector<double> breakpoints;
};

// h(a, b) = E[max_i a_i + b_i Z] - max_i a_i for Z ~ N(0,1), computed
// exactly via the sorted upper envelope of the lines z -> a_i + b_i z.
HResult compute_h(std::span<const double> a, std::span<const double> b);

double normal_pdf(double z);
double normal_cdf(double z);

// Precomputed per-iteration state for evaluating V_n at many candidates
// against one posterior snapshot: a_n over A', the B matrix over A' and the
// training points, and its A_n^{-1} solve.  Read-only after construction;
// safe to evaluate from several threads.
class VoiContext {
 public:
  VoiContext(const GPPosterior& post, const WDistribution& wdist,
             const Discretization& disc, double lambda_c);
  VoiContext(const GPPosterior& post, const WDistribution& wdist,
             const Discretization& disc);

  VOIResult evaluate(const DesignPoint& candidate,
                     bool want_gradient = true) const;

  const std::vector<double>& a_values() const { return a_vals_; }
  int argmax_a() const;
  double lambda_c() const { return lambda_c_; }
  const GPPosterior& posterior() const { return post_; }

  // sigma_tilde over the whole grid at one candidate (the b vector of h).
  std::vector<double> sigma_tilde_batch(const DesignPoint& candidate) const;

  std::vector<double> grid_point(int l) const;

 private:
  const GPPosterior& post_;
  const WDistribution& wdist_;
  double lambda_c_;
  int dim_x_;
  int L_;
  std::vector<std::vector<double>> grid_cols_;  // dim-major coordinates of A'
  std::vector<const double*> col_ptrs_;
  std::vector<double> a_vals_;
  Eigen::MatrixXd Bmat_;   // L x n
  Eigen::MatrixXd AinvBt_; // n x L, A_n^{-1} Bmat^T
};

// One-shot operation surface: V_n and its gradient at a single candidate.
VOIResult compute_voi(const DesignPoint& candidate, const Discretization& disc,
                      const GPPosterior& post, const WDistribution& wdist);

// Uniform grid over a box, capped at max_total points.
Discretization uniform_grid(const std::vector<double>& lo,
                            const std::vector<double>& hi, int per_dim,
                            int max_total = 2500);

}  // namespace sbo
