#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "sbo/gp.hpp"

namespace sbo {

// Marginal law of w.  Either independent Gaussian components (closed-form
// quadrature against the squared-exponential kernel) or a finite discrete
// support (summation quadrature; covers truncated Poisson and grid laws).
struct WDistribution {
  enum class Kind { IndependentGaussian, Discrete };
  Kind kind = Kind::IndependentGaussian;

  // IndependentGaussian
  std::vector<double> means;
  std::vector<double> variances;

  // Discrete
  std::vector<std::vector<double>> support;
  std::vector<double> probs;

  int dim() const {
    if (kind == Kind::IndependentGaussian) return static_cast<int>(means.size());
    return support.empty() ? 0 : static_cast<int>(support.front().size());
  }

  static WDistribution gaussian(std::vector<double> means,
                                std::vector<double> variances);
  // Renormalizes probs; throws on negative weights or zero total mass.
  static WDistribution discrete(std::vector<std::vector<double>> support,
                                std::vector<double> probs);
  static WDistribution none() { return gaussian({}, {}); }
};

class DegenerateCandidate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Closed form of int exp(-alpha (w - center)^2) dN(w; mean, variance):
//   (1 + 2 alpha variance)^{-1/2} exp(-alpha (center-mean)^2 / (1 + 2 alpha variance))
double gaussian_moment(double alpha, double center, double mean,
                       double variance);

// int exp(-sum_k alpha_w[k] (w_k - center_k)^2) p(w) dw for either variant.
double w_moment(const WDistribution& wdist, std::span<const double> alpha_w,
                std::span<const double> center);

// Gradient of w_moment with respect to the center coordinates.
std::vector<double> w_moment_grad(const WDistribution& wdist,
                                  std::span<const double> alpha_w,
                                  std::span<const double> center);

// B(x, p) = int Sigma_0(x, w, p.x, p.w) p(w) dw for an arbitrary point p
// (a training point or the current candidate).
double compute_B(std::span<const double> x, const DesignPoint& p,
                 const KernelParams& params, const WDistribution& wdist);

// Index form over the posterior's training points, i in [0, n).
double compute_B(std::span<const double> x, int i, const GPPosterior& post,
                 const WDistribution& wdist);

// a_n(x) = mu0 + [B(x,1) ... B(x,n)] A_n^{-1} (y - mu0 1).
double compute_a_n(std::span<const double> x, const GPPosterior& post,
                   const WDistribution& wdist);

// Expected observation noise at a fresh candidate (mean historical
// noise_var); the lambda_c default in the sigma-tilde denominator.
double default_candidate_noise(const GPPosterior& post);

// Signed one-step loading of a_{n+1}(x) on Z_{n+1} when sampling at
// `candidate`:
//   (B(x,n+1) - [B(x,1)..B(x,n)] A_n^{-1} gamma)
//     / sqrt(Sigma_0(c,c) + lambda_c - gamma^T A_n^{-1} gamma)
double compute_sigma_tilde(std::span<const double> x,
                           const DesignPoint& candidate,
                           const GPPosterior& post,
                           const WDistribution& wdist, double lambda_c);
double compute_sigma_tilde(std::span<const double> x,
                           const DesignPoint& candidate,
                           const GPPosterior& post,
                           const WDistribution& wdist);

// Gradient of compute_sigma_tilde with respect to the candidate coordinates
// (x-block then w-block).
std::vector<double> grad_sigma_tilde(std::span<const double> x,
                                     const DesignPoint& candidate,
                                     const GPPosterior& post,
                                     const WDistribution& wdist,
                                     double lambda_c);
std::vector<double> grad_sigma_tilde(std::span<const double> x,
                                     const DesignPoint& candidate,
                                     const GPPosterior& post,
                                     const WDistribution& wdist);

}  // namespace sbo
