#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace sbo {

// Squared-exponential kernel over joint (x, w) inputs:
//   k(p, q) = sigma0_sq * exp(-sum_k ax[k] (x_k - x'_k)^2
//                             -sum_k aw[k] (w_k - w'_k)^2)
// alpha entries are inverse squared length scales.
struct KernelParams {
  double sigma0_sq = 1.0;
  std::vector<double> alpha_x;
  std::vector<double> alpha_w;
};

struct DesignPoint {
  std::vector<double> x;
  std::vector<double> w;
};

// One averaged evaluation: y is the mean of m_samples inner draws,
// noise_var is the empirical variance of those draws divided by m_samples.
// noise_var == 0 declares the observation noiseless.
struct Observation {
  DesignPoint point;
  double y = 0.0;
  double noise_var = 0.0;
  int m_samples = 2;
};

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double kernel_eval(const KernelParams& params, const DesignPoint& p,
                   const DesignPoint& q);

// Gradient of kernel_eval(params, candidate, other) with respect to the
// candidate coordinates, x-block first then w-block.  Zero when
// candidate == other.
std::vector<double> kernel_grad_candidate(const KernelParams& params,
                                          const DesignPoint& candidate,
                                          const DesignPoint& other);

// Immutable posterior snapshot of the GP on F given a history of averaged
// observations.  Caches the Cholesky factor of
// A_n = K + diag(noise_var) + jitter*I and the solve against the centered
// responses.  Safe to share across threads once constructed.
class GPPosterior {
 public:
  GPPosterior(KernelParams params, double mu0,
              std::vector<Observation> history);

  double mean(const DesignPoint& p) const;
  double cov(const DesignPoint& p, const DesignPoint& q) const;
  double variance(const DesignPoint& p) const;  // clamped at 0

  // A_n^{-1} rhs via the cached factor.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

  // Kernel column [k(p, p_1) ... k(p, p_n)]^T.
  Eigen::VectorXd kernel_column(const DesignPoint& p) const;

  const KernelParams& params() const { return params_; }
  double mu0() const { return mu0_; }
  const std::vector<Observation>& training() const { return training_; }
  int n() const { return static_cast<int>(training_.size()); }
  const Eigen::VectorXd& alpha_vec() const { return alpha_vec_; }
  double jitter() const { return jitter_; }

  // Mean of historical noise variances; default lambda_c for a candidate.
  double mean_noise() const;

 private:
  KernelParams params_;
  double mu0_;
  std::vector<Observation> training_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_vec_;
  double jitter_ = 0.0;
};

struct FitResult {
  KernelParams params;
  double mu0 = 0.0;
  double log_likelihood = 0.0;
  bool degenerate = false;
};

// Gaussian log marginal likelihood of the history under (params, mu0).
double log_marginal_likelihood(const KernelParams& params, double mu0,
                               const std::vector<Observation>& history);

// MLE over (sigma0_sq, alpha_x, alpha_w) by multi-start projected gradient
// ascent in log-parameter space, box [-10, 10] per log-parameter; mu0 is
// profiled out in closed form.  Deterministic given seed.
FitResult fit_hyperparameters(const std::vector<Observation>& history,
                              int restarts, std::uint64_t seed);

}  // namespace sbo
