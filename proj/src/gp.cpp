#include "sbo/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sbo/rng.hpp"

namespace sbo {

namespace {

void check_dims(const KernelParams& params, const DesignPoint& p) {
  if (p.x.size() != params.alpha_x.size() ||
      p.w.size() != params.alpha_w.size())
    throw ContractViolation("kernel: dimension mismatch between point and "
                            "kernel parameters");
}

double weighted_sqdist(std::span<const double> a, std::span<const double> b,
                       std::span<const double> alpha) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += alpha[k] * d * d;
  }
  return s;
}

constexpr double kNoiseFloorRel = 1e-12;

// K + diag(effective noise).  The floor keeps strictly positive noise from
// underflowing to zero relative to the signal scale; declared-noiseless
// observations (noise_var == 0) are left exact.
Eigen::MatrixXd assemble_A(const KernelParams& params,
                           const std::vector<Observation>& history) {
  const int n = static_cast<int>(history.size());
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double k = kernel_eval(params, history[i].point, history[j].point);
      A(i, j) = k;
      A(j, i) = k;
    }
    double nv = history[i].noise_var;
    if (nv > 0.0) nv = std::max(nv, kNoiseFloorRel * params.sigma0_sq);
    A(i, i) += nv;
  }
  return A;
}

}  // namespace

double kernel_eval(const KernelParams& params, const DesignPoint& p,
                   const DesignPoint& q) {
  check_dims(params, p);
  check_dims(params, q);
  const double d = weighted_sqdist(p.x, q.x, params.alpha_x) +
                   weighted_sqdist(p.w, q.w, params.alpha_w);
  return params.sigma0_sq * std::exp(-d);
}

std::vector<double> kernel_grad_candidate(const KernelParams& params,
                                          const DesignPoint& candidate,
                                          const DesignPoint& other) {
  const double k = kernel_eval(params, candidate, other);
  std::vector<double> g(candidate.x.size() + candidate.w.size());
  std::size_t idx = 0;
  for (std::size_t j = 0; j < candidate.x.size(); ++j)
    g[idx++] = -2.0 * params.alpha_x[j] * (candidate.x[j] - other.x[j]) * k;
  for (std::size_t j = 0; j < candidate.w.size(); ++j)
    g[idx++] = -2.0 * params.alpha_w[j] * (candidate.w[j] - other.w[j]) * k;
  return g;
}

GPPosterior::GPPosterior(KernelParams params, double mu0,
                         std::vector<Observation> history)
    : params_(std::move(params)), mu0_(mu0), training_(std::move(history)) {
  const int n = static_cast<int>(training_.size());
  if (n == 0) {
    alpha_vec_.resize(0);
    return;
  }
  Eigen::MatrixXd A = assemble_A(params_, training_);
  double jitter = 1e-10 * params_.sigma0_sq;
  const double max_jitter = 1e-4 * params_.sigma0_sq;
  for (;;) {
    Eigen::MatrixXd Aj = A + jitter * Eigen::MatrixXd::Identity(n, n);
    chol_.compute(Aj);
    if (chol_.info() == Eigen::Success) {
      jitter_ = jitter;
      break;
    }
    jitter *= 10.0;
    if (jitter > max_jitter)
      throw FactorizationError(
          "GP posterior: A_n not positive definite after jitter escalation "
          "to 1e-4*sigma0_sq (ill-conditioned training design)");
  }
  Eigen::VectorXd r(n);
  for (int i = 0; i < n; ++i) r(i) = training_[i].y - mu0_;
  alpha_vec_ = chol_.solve(r);
}

double GPPosterior::mean(const DesignPoint& p) const {
  if (training_.empty()) return mu0_;
  return mu0_ + kernel_column(p).dot(alpha_vec_);
}

double GPPosterior::cov(const DesignPoint& p, const DesignPoint& q) const {
  const double prior = kernel_eval(params_, p, q);
  if (training_.empty()) return prior;
  return prior - kernel_column(p).dot(chol_.solve(kernel_column(q)));
}

double GPPosterior::variance(const DesignPoint& p) const {
  return std::max(0.0, cov(p, p));
}

Eigen::VectorXd GPPosterior::solve(const Eigen::VectorXd& rhs) const {
  return chol_.solve(rhs);
}

Eigen::MatrixXd GPPosterior::solve(const Eigen::MatrixXd& rhs) const {
  return chol_.solve(rhs);
}

Eigen::VectorXd GPPosterior::kernel_column(const DesignPoint& p) const {
  Eigen::VectorXd k(training_.size());
  for (std::size_t i = 0; i < training_.size(); ++i)
    k(i) = kernel_eval(params_, p, training_[i].point);
  return k;
}

double GPPosterior::mean_noise() const {
  if (training_.empty()) return 0.0;
  double s = 0.0;
  for (const auto& o : training_) s += o.noise_var;
  return s / static_cast<double>(training_.size());
}

double log_marginal_likelihood(const KernelParams& params, double mu0,
                               const std::vector<Observation>& history) {
  const int n = static_cast<int>(history.size());
  if (n == 0) return 0.0;
  Eigen::MatrixXd A = assemble_A(params, history);
  A += 1e-10 * params.sigma0_sq * Eigen::MatrixXd::Identity(n, n);
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success)
    return -std::numeric_limits<double>::infinity();
  Eigen::VectorXd r(n);
  for (int i = 0; i < n; ++i) r(i) = history[i].y - mu0;
  const Eigen::VectorXd alpha = llt.solve(r);
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += std::log(llt.matrixL()(i, i));
  return -0.5 * r.dot(alpha) - logdet -
         0.5 * n * std::log(2.0 * 3.14159265358979323846);
}

namespace {

struct LogSpace {
  // theta = (log sigma0_sq, log alpha_x..., log alpha_w...)
  int dx, dw;

  KernelParams unpack(const Eigen::VectorXd& theta) const {
    KernelParams p;
    p.sigma0_sq = std::exp(theta(0));
    p.alpha_x.resize(dx);
    p.alpha_w.resize(dw);
    for (int j = 0; j < dx; ++j) p.alpha_x[j] = std::exp(theta(1 + j));
    for (int j = 0; j < dw; ++j) p.alpha_w[j] = std::exp(theta(1 + dx + j));
    return p;
  }
};

// Profiled mu0: generalized-least-squares mean under the current kernel.
double profile_mu0(const Eigen::LLT<Eigen::MatrixXd>& llt,
                   const Eigen::VectorXd& y) {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(y.size());
  const Eigen::VectorXd Ai1 = llt.solve(ones);
  const double denom = ones.dot(Ai1);
  if (!(denom > 0.0)) return y.mean();
  return y.dot(Ai1) / denom;
}

struct LikelihoodEval {
  double value;
  Eigen::VectorXd grad;
  double mu0;
  bool ok;
};

LikelihoodEval eval_loglik(const LogSpace& space, const Eigen::VectorXd& theta,
                           const std::vector<Observation>& history) {
  const int n = static_cast<int>(history.size());
  const KernelParams params = space.unpack(theta);
  Eigen::MatrixXd A = assemble_A(params, history);
  A += 1e-10 * params.sigma0_sq * Eigen::MatrixXd::Identity(n, n);
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  LikelihoodEval out;
  out.grad = Eigen::VectorXd::Zero(theta.size());
  if (llt.info() != Eigen::Success) {
    out.value = -std::numeric_limits<double>::infinity();
    out.mu0 = 0.0;
    out.ok = false;
    return out;
  }
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = history[i].y;
  out.mu0 = profile_mu0(llt, y);
  const Eigen::VectorXd r = y.array() - out.mu0;
  const Eigen::VectorXd alpha = llt.solve(r);
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += std::log(llt.matrixL()(i, i));
  out.value = -0.5 * r.dot(alpha) - logdet -
              0.5 * n * std::log(2.0 * 3.14159265358979323846);
  out.ok = std::isfinite(out.value);
  if (!out.ok) return out;

  // dLL/dtheta_j = 0.5 tr((alpha alpha^T - A^{-1}) dA/dtheta_j).
  // mu0 is at its profile optimum, so its implicit dependence drops out.
  const Eigen::MatrixXd Ainv =
      llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd W = alpha * alpha.transpose() - Ainv;
  Eigen::MatrixXd K(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double k =
          kernel_eval(params, history[i].point, history[j].point);
      K(i, j) = k;
      K(j, i) = k;
    }
  // d/d log sigma0_sq: K itself (kernel is proportional to sigma0_sq).
  out.grad(0) = 0.5 * (W.array() * K.array()).sum();
  for (int t = 0; t < space.dx + space.dw; ++t) {
    const bool is_x = t < space.dx;
    const int j = is_x ? t : t - space.dx;
    const double a = is_x ? params.alpha_x[j] : params.alpha_w[j];
    Eigen::MatrixXd D(n, n);
    for (int i = 0; i < n; ++i)
      for (int m = 0; m <= i; ++m) {
        const double di =
            is_x ? history[i].point.x[j] - history[m].point.x[j]
                 : history[i].point.w[j] - history[m].point.w[j];
        D(i, m) = di * di;
        D(m, i) = D(i, m);
      }
    // dA/d log alpha = -alpha * (K .* D)
    out.grad(1 + t) = 0.5 * (W.array() * (K.array() * D.array())).sum() * -a;
  }
  return out;
}

}  // namespace

FitResult fit_hyperparameters(const std::vector<Observation>& history,
                              int restarts, std::uint64_t seed) {
  if (history.size() < 2)
    throw ContractViolation("fit_hyperparameters: need at least 2 points");
  const int n = static_cast<int>(history.size());
  const int dx = static_cast<int>(history[0].point.x.size());
  const int dw = static_cast<int>(history[0].point.w.size());

  double ymean = 0.0, yvar = 0.0, max_noise = 0.0;
  for (const auto& o : history) ymean += o.y;
  ymean /= n;
  for (const auto& o : history) {
    yvar += (o.y - ymean) * (o.y - ymean);
    max_noise = std::max(max_noise, o.noise_var);
  }
  yvar /= n;
  if (yvar == 0.0 && max_noise == 0.0) {
    FitResult fb;
    fb.params.sigma0_sq = 1e-6;
    fb.params.alpha_x.assign(dx, 1.0);
    fb.params.alpha_w.assign(dw, 1.0);
    fb.mu0 = ymean;
    fb.log_likelihood = log_marginal_likelihood(fb.params, fb.mu0, history);
    fb.degenerate = true;
    return fb;
  }

  const LogSpace space{dx, dw};
  const int p = 1 + dx + dw;
  const double lo = -10.0, hi = 10.0;

  // Heuristic start: signal variance from data spread, length scales from
  // the average per-dimension coordinate spread.
  Eigen::VectorXd theta0(p);
  theta0(0) = std::log(std::max(yvar, 1e-8));
  auto spread = [&](bool is_x, int j) {
    double mn = std::numeric_limits<double>::infinity(), mx = -mn;
    for (const auto& o : history) {
      const double v = is_x ? o.point.x[j] : o.point.w[j];
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    const double range = std::max(mx - mn, 1e-3);
    return 1.0 / (range * range);
  };
  for (int j = 0; j < dx; ++j) theta0(1 + j) = std::log(spread(true, j));
  for (int j = 0; j < dw; ++j) theta0(1 + dx + j) = std::log(spread(false, j));
  for (int i = 0; i < p; ++i) theta0(i) = std::clamp(theta0(i), lo, hi);

  Rng rng(Rng::derive(seed, 0x9fULL));

  FitResult best;
  best.log_likelihood = -std::numeric_limits<double>::infinity();

  for (int r = 0; r < std::max(restarts, 1); ++r) {
    Eigen::VectorXd theta = theta0;
    if (r > 0)
      for (int i = 0; i < p; ++i) theta(i) = rng.uniform(-6.0, 6.0);

    LikelihoodEval cur = eval_loglik(space, theta, history);
    if (!cur.ok) continue;
    double step = 0.1;
    for (int iter = 0; iter < 150; ++iter) {
      const double gnorm = cur.grad.norm();
      if (gnorm < 1e-8) break;
      bool improved = false;
      for (int bt = 0; bt < 20; ++bt) {
        Eigen::VectorXd cand = theta + (step / gnorm) * cur.grad;
        for (int i = 0; i < p; ++i) cand(i) = std::clamp(cand(i), lo, hi);
        LikelihoodEval next = eval_loglik(space, cand, history);
        if (next.ok && next.value > cur.value + 1e-12) {
          theta = cand;
          cur = next;
          step *= 1.5;
          improved = true;
          break;
        }
        step *= 0.5;
      }
      if (!improved) break;
    }
    if (cur.ok && cur.value > best.log_likelihood) {
      best.params = space.unpack(theta);
      best.mu0 = cur.mu0;
      best.log_likelihood = cur.value;
      best.degenerate = false;
    }
  }

  if (!std::isfinite(best.log_likelihood)) {
    best.params.sigma0_sq = std::max(yvar, 1e-6);
    best.params.alpha_x.assign(dx, 1.0);
    best.params.alpha_w.assign(dw, 1.0);
    best.mu0 = ymean;
    best.log_likelihood = log_marginal_likelihood(best.params, best.mu0,
                                                  history);
    best.degenerate = true;
  }
  return best;
}

}  // namespace sbo
