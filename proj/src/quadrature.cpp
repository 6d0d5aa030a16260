#include "sbo/quadrature.hpp"

#include <cmath>

namespace sbo {

WDistribution WDistribution::gaussian(std::vector<double> means,
                                      std::vector<double> variances) {
  if (means.size() != variances.size())
    throw ContractViolation("WDistribution: means/variances size mismatch");
  for (double v : variances)
    if (!(v > 0.0))
      throw ContractViolation("WDistribution: Gaussian variance must be > 0");
  WDistribution d;
  d.kind = Kind::IndependentGaussian;
  d.means = std::move(means);
  d.variances = std::move(variances);
  return d;
}

WDistribution WDistribution::discrete(
    std::vector<std::vector<double>> support, std::vector<double> probs) {
  if (support.size() != probs.size() || support.empty())
    throw ContractViolation("WDistribution: support/probs size mismatch");
  double total = 0.0;
  for (double p : probs) {
    if (p < 0.0)
      throw ContractViolation("WDistribution: negative probability");
    total += p;
  }
  if (!(total > 0.0))
    throw ContractViolation("WDistribution: zero total mass");
  for (double& p : probs) p /= total;
  const std::size_t d1 = support.front().size();
  for (const auto& w : support)
    if (w.size() != d1)
      throw ContractViolation("WDistribution: ragged support");
  WDistribution d;
  d.kind = Kind::Discrete;
  d.support = std::move(support);
  d.probs = std::move(probs);
  return d;
}

double gaussian_moment(double alpha, double center, double mean,
                       double variance) {
  if (alpha < 0.0)
    throw ContractViolation("gaussian_moment: alpha must be >= 0");
  if (!(variance > 0.0))
    throw ContractViolation("gaussian_moment: variance must be > 0");
  const double s = 1.0 + 2.0 * alpha * variance;
  const double d = center - mean;
  return std::exp(-alpha * d * d / s) / std::sqrt(s);
}

double w_moment(const WDistribution& wdist, std::span<const double> alpha_w,
                std::span<const double> center) {
  if (static_cast<int>(alpha_w.size()) != wdist.dim() ||
      alpha_w.size() != center.size())
    throw ContractViolation("w_moment: dimension mismatch");
  if (wdist.kind == WDistribution::Kind::IndependentGaussian) {
    double m = 1.0;
    for (std::size_t k = 0; k < alpha_w.size(); ++k)
      m *= gaussian_moment(alpha_w[k], center[k], wdist.means[k],
                           wdist.variances[k]);
    return m;
  }
  double m = 0.0;
  for (std::size_t j = 0; j < wdist.support.size(); ++j) {
    double d = 0.0;
    for (std::size_t k = 0; k < alpha_w.size(); ++k) {
      const double dk = wdist.support[j][k] - center[k];
      d += alpha_w[k] * dk * dk;
    }
    m += wdist.probs[j] * std::exp(-d);
  }
  return m;
}

std::vector<double> w_moment_grad(const WDistribution& wdist,
                                  std::span<const double> alpha_w,
                                  std::span<const double> center) {
  const std::size_t d1 = alpha_w.size();
  std::vector<double> g(d1, 0.0);
  if (wdist.kind == WDistribution::Kind::IndependentGaussian) {
    std::vector<double> m(d1);
    for (std::size_t k = 0; k < d1; ++k)
      m[k] = gaussian_moment(alpha_w[k], center[k], wdist.means[k],
                             wdist.variances[k]);
    for (std::size_t k = 0; k < d1; ++k) {
      const double s = 1.0 + 2.0 * alpha_w[k] * wdist.variances[k];
      // d/dc of the per-dimension moment
      double dm = m[k] * (-2.0 * alpha_w[k] * (center[k] - wdist.means[k]) / s);
      for (std::size_t j = 0; j < d1; ++j)
        if (j != k) dm *= m[j];
      g[k] = dm;
    }
    return g;
  }
  for (std::size_t j = 0; j < wdist.support.size(); ++j) {
    double d = 0.0;
    for (std::size_t k = 0; k < d1; ++k) {
      const double dk = wdist.support[j][k] - center[k];
      d += alpha_w[k] * dk * dk;
    }
    const double e = wdist.probs[j] * std::exp(-d);
    for (std::size_t k = 0; k < d1; ++k)
      g[k] += e * 2.0 * alpha_w[k] * (wdist.support[j][k] - center[k]);
  }
  return g;
}

namespace {

double x_part(std::span<const double> x, std::span<const double> xi,
              const KernelParams& params) {
  if (x.size() != params.alpha_x.size() || xi.size() != x.size())
    throw ContractViolation("compute_B: x dimension mismatch");
  double d = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dk = x[k] - xi[k];
    d += params.alpha_x[k] * dk * dk;
  }
  return std::exp(-d);
}

}  // namespace

double compute_B(std::span<const double> x, const DesignPoint& p,
                 const KernelParams& params, const WDistribution& wdist) {
  return params.sigma0_sq * x_part(x, p.x, params) *
         w_moment(wdist, params.alpha_w, p.w);
}

double compute_B(std::span<const double> x, int i, const GPPosterior& post,
                 const WDistribution& wdist) {
  if (i < 0 || i >= post.n())
    throw ContractViolation("compute_B: training index out of range");
  return compute_B(x, post.training()[i].point, post.params(), wdist);
}

double compute_a_n(std::span<const double> x, const GPPosterior& post,
                   const WDistribution& wdist) {
  double a = post.mu0();
  const Eigen::VectorXd& alpha = post.alpha_vec();
  for (int i = 0; i < post.n(); ++i)
    a += compute_B(x, i, post, wdist) * alpha(i);
  return a;
}

double default_candidate_noise(const GPPosterior& post) {
  return post.mean_noise();
}

namespace {

struct SigmaTildeParts {
  double num;       // B(x, n+1) - Bvec^T A^{-1} gamma
  double denom;     // sqrt(Sigma_0(c,c) + lambda_c - gamma^T A^{-1} gamma)
  Eigen::VectorXd gamma, u;  // u = A^{-1} gamma
  double b_cand;    // B(x, n+1)
};

SigmaTildeParts sigma_tilde_parts(std::span<const double> x,
                                  const DesignPoint& candidate,
                                  const GPPosterior& post,
                                  const WDistribution& wdist,
                                  double lambda_c) {
  SigmaTildeParts parts;
  const double prior_var = post.params().sigma0_sq;
  parts.b_cand = compute_B(x, candidate, post.params(), wdist);
  if (post.n() == 0) {
    parts.gamma.resize(0);
    parts.u.resize(0);
    parts.num = parts.b_cand;
    const double d2 = prior_var + lambda_c;
    if (!(d2 > 0.0))
      throw DegenerateCandidate("sigma_tilde: nonpositive predictive variance");
    parts.denom = std::sqrt(d2);
    return parts;
  }
  parts.gamma = post.kernel_column(candidate);
  parts.u = post.solve(parts.gamma);
  const double post_var = prior_var - parts.gamma.dot(parts.u);
  const double d2 = post_var + lambda_c;
  if (!(d2 > 0.0))
    throw DegenerateCandidate(
        "sigma_tilde: candidate indistinguishable from existing data "
        "(nonpositive predictive variance)");
  parts.denom = std::sqrt(d2);
  if (post_var <= 100.0 * post.jitter() && lambda_c <= 0.0) {
    // a repeat of a noiseless observation carries no new information; the
    // analytic cancellation is exact but the solve leaves jitter-scale noise
    parts.num = 0.0;
    return parts;
  }
  double bu = 0.0;
  for (int i = 0; i < post.n(); ++i)
    bu += compute_B(x, i, post, wdist) * parts.u(i);
  parts.num = parts.b_cand - bu;
  return parts;
}

}  // namespace

double compute_sigma_tilde(std::span<const double> x,
                           const DesignPoint& candidate,
                           const GPPosterior& post,
                           const WDistribution& wdist, double lambda_c) {
  const auto parts = sigma_tilde_parts(x, candidate, post, wdist, lambda_c);
  return parts.num / parts.denom;
}

double compute_sigma_tilde(std::span<const double> x,
                           const DesignPoint& candidate,
                           const GPPosterior& post,
                           const WDistribution& wdist) {
  return compute_sigma_tilde(x, candidate, post, wdist,
                             default_candidate_noise(post));
}

std::vector<double> grad_sigma_tilde(std::span<const double> x,
                                     const DesignPoint& candidate,
                                     const GPPosterior& post,
                                     const WDistribution& wdist,
                                     double lambda_c) {
  const auto parts = sigma_tilde_parts(x, candidate, post, wdist, lambda_c);
  const int dx = static_cast<int>(candidate.x.size());
  const int dw = static_cast<int>(candidate.w.size());
  const int nd = dx + dw;
  const int n = post.n();

  const double beta1 = 1.0 / parts.denom;
  const double beta2 = parts.num;

  // grad of B(x, n+1) with respect to the candidate coordinates.
  Eigen::VectorXd gB(nd);
  for (int j = 0; j < dx; ++j)
    gB(j) = 2.0 * post.params().alpha_x[j] * (x[j] - candidate.x[j]) *
            parts.b_cand;
  if (dw > 0) {
    const double xp =
        post.params().sigma0_sq * x_part(x, candidate.x, post.params());
    const auto gw = w_moment_grad(wdist, post.params().alpha_w, candidate.w);
    for (int k = 0; k < dw; ++k) gB(dx + k) = xp * gw[k];
  }

  if (n == 0) {
    // sigma_tilde = B(x, n+1) / denom with constant denom.
    std::vector<double> g(nd);
    for (int j = 0; j < nd; ++j) g[j] = beta1 * gB(j);
    return g;
  }

  // Rows of Gg are the candidate-gradients of each gamma entry.
  Eigen::MatrixXd Gg(n, nd);
  for (int i = 0; i < n; ++i) {
    const auto gi =
        kernel_grad_candidate(post.params(), candidate, post.training()[i].point);
    for (int j = 0; j < nd; ++j) Gg(i, j) = gi[j];
  }

  Eigen::VectorXd Bvec(n);
  for (int i = 0; i < n; ++i) Bvec(i) = compute_B(x, i, post, wdist);
  const Eigen::VectorXd AiB = post.solve(Bvec);

  // beta3 = grad B(x,n+1) - (grad gamma^T) A^{-1} Bvec
  const Eigen::VectorXd beta3 = gB - Gg.transpose() * AiB;
  // beta4 = 2 (grad gamma^T) A^{-1} gamma; beta5 = 0 (constant self-covariance)
  const Eigen::VectorXd beta4 = 2.0 * (Gg.transpose() * parts.u);

  std::vector<double> g(nd);
  for (int j = 0; j < nd; ++j)
    g[j] = beta1 * beta3(j) - 0.5 * beta1 * beta1 * beta1 * beta2 *
                                   (0.0 - beta4(j));
  return g;
}

std::vector<double> grad_sigma_tilde(std::span<const double> x,
                                     const DesignPoint& candidate,
                                     const GPPosterior& post,
                                     const WDistribution& wdist) {
  return grad_sigma_tilde(x, candidate, post, wdist,
                          default_candidate_noise(post));
}

}  // namespace sbo
