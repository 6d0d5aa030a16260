#include "sbo/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace sbo {

namespace {

constexpr std::uint64_t kStreamFirstStageX = 1;
constexpr std::uint64_t kStreamFirstStageEval = 3;
constexpr std::uint64_t kStreamFit = 4;
constexpr std::uint64_t kStreamAcq = 5;
constexpr std::uint64_t kStreamEval = 6;
constexpr std::uint64_t kStreamStripW = 7;

}  // namespace

Problem strip_w(const Problem& problem) {
  if (problem.dim_w == 0) return problem;
  Problem p;
  p.name = problem.name + "+w_as_noise";
  p.dim_x = problem.dim_x;
  p.dim_w = 0;
  p.domain = problem.domain;
  p.wdist = WDistribution::none();
  p.oracle_g = problem.oracle_g;
  p.sample_w = [](std::uint64_t) { return std::vector<double>{}; };
  const auto inner_eval = problem.evaluate;
  const auto inner_w = problem.sample_w;
  p.evaluate = [inner_eval, inner_w](std::span<const double> x,
                                     std::span<const double>, int M,
                                     std::uint64_t seed) {
    double sum = 0.0, sumsq = 0.0;
    for (int m = 0; m < M; ++m) {
      const auto w = inner_w(Rng::derive(seed, kStreamStripW, m, 0));
      const EvalResult e =
          inner_eval(x, w, 1, Rng::derive(seed, kStreamStripW, m, 1));
      sum += e.y;
      sumsq += e.y * e.y;
    }
    EvalResult out;
    out.y = sum / M;
    out.sample_var =
        M > 1 ? std::max(0.0, (sumsq - sum * sum / M) / (M - 1)) : 0.0;
    return out;
  };
  return p;
}

RunRecord run_kg(const Problem& problem, const SBOConfig& config) {
  return run_sbo(strip_w(problem), config);
}

double expected_improvement(double mu, double var, double incumbent) {
  const double s = std::sqrt(std::max(var, 0.0));
  const double d = mu - incumbent;
  if (s < 1e-300) return std::max(0.0, d);
  const double z = d / s;
  return s * normal_pdf(z) + d * normal_cdf(z);
}

namespace {

struct EiEval {
  double value;
  std::vector<double> grad;
};

EiEval ei_value_grad(const GPPosterior& post, const std::vector<double>& x,
                     double incumbent) {
  DesignPoint p;
  p.x = x;
  const int dx = static_cast<int>(x.size());
  EiEval out;
  out.grad.assign(dx, 0.0);
  if (post.n() == 0) {
    out.value = expected_improvement(post.mu0(), post.params().sigma0_sq,
                                     incumbent);
    return out;
  }
  const Eigen::VectorXd k = post.kernel_column(p);
  const Eigen::VectorXd Aik = post.solve(k);
  const double mu = post.mu0() + k.dot(post.alpha_vec());
  const double var =
      std::max(0.0, post.params().sigma0_sq - k.dot(Aik));
  out.value = expected_improvement(mu, var, incumbent);
  const double s = std::sqrt(var);
  if (s < 1e-12) return out;
  const double z = (mu - incumbent) / s;
  Eigen::MatrixXd Gk(post.n(), dx);
  for (int i = 0; i < post.n(); ++i) {
    const auto gi =
        kernel_grad_candidate(post.params(), p, post.training()[i].point);
    for (int j = 0; j < dx; ++j) Gk(i, j) = gi[j];
  }
  const Eigen::VectorXd gmu = Gk.transpose() * post.alpha_vec();
  const Eigen::VectorXd gvar = -2.0 * (Gk.transpose() * Aik);
  for (int j = 0; j < dx; ++j)
    out.grad[j] =
        normal_cdf(z) * gmu(j) + normal_pdf(z) * gvar(j) / (2.0 * s);
  return out;
}

std::vector<double> maximize_ei(const GPPosterior& post, const Domain& xdom,
                                const Discretization& disc, double incumbent,
                                int restarts, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, 0xE1ULL));
  std::vector<double> best_x;
  double best_v = -1.0;

  // grid scan plus multi-start ascent from random points
  for (const auto& gp : disc.points) {
    const double v = ei_value_grad(post, gp, incumbent).value;
    if (v > best_v) {
      best_v = v;
      best_x = gp;
    }
  }

  for (int r = 0; r < std::max(restarts, 1); ++r) {
    std::vector<double> x = r == 0 && !best_x.empty() ? best_x
                                                      : xdom.sample(rng);
    EiEval cur = ei_value_grad(post, x, incumbent);
    double eta = 0.2;
    for (int iter = 0; iter < 50 && eta > 1e-7; ++iter) {
      double gn = 0.0;
      for (double g : cur.grad) gn += g * g;
      gn = std::sqrt(gn);
      if (gn < 1e-14) break;
      bool improved = false;
      for (int bt = 0; bt < 20; ++bt) {
        std::vector<double> cand = x;
        if (xdom.kind == Domain::Kind::Simplex) {
          double mean = 0.0;
          for (double g : cur.grad) mean += g;
          mean /= cand.size();
          for (std::size_t j = 0; j < cand.size(); ++j)
            cand[j] += eta * (cur.grad[j] - mean) / gn;
        } else {
          for (std::size_t j = 0; j < cand.size(); ++j)
            cand[j] += eta * cur.grad[j] / gn;
        }
        cand = xdom.project(std::move(cand));
        EiEval next = ei_value_grad(post, cand, incumbent);
        if (next.value > cur.value + 1e-14) {
          x = std::move(cand);
          cur = std::move(next);
          eta *= 1.5;
          improved = true;
          break;
        }
        eta *= 0.5;
      }
      if (!improved) break;
    }
    if (cur.value > best_v) {
      best_v = cur.value;
      best_x = x;
    }
  }
  if (best_x.empty()) best_x = xdom.sample(rng);
  return best_x;
}

}  // namespace

RunRecord run_ei(const Problem& original, const SBOConfig& config) {
  if (config.n0 < 2 || config.N < 0 || config.M < 2 || config.restarts < 1)
    throw ContractViolation("run_ei: invalid configuration");
  const Problem problem = strip_w(original);
  const Normalizer norm(problem);
  const Discretization disc = default_discretization(
      norm.norm_domain, config.disc_per_dim, config.disc_max_total);

  RunRecord rec;
  std::vector<Observation> history;

  for (int r = 0; r < config.n0; ++r) {
    Rng xr(Rng::derive(config.seed, kStreamFirstStageX, r));
    const std::vector<double> xn = norm.norm_domain.sample(xr);
    const EvalResult e = problem.evaluate(
        norm.x_to_raw(xn), {}, config.M,
        Rng::derive(config.seed, kStreamFirstStageEval, r));
    Observation obs;
    obs.point.x = xn;
    obs.y = e.y;
    obs.noise_var = e.sample_var / config.M;
    obs.m_samples = config.M;
    history.push_back(std::move(obs));
    rec.evaluations += config.M;
  }

  FitResult fit = fit_hyperparameters(history, config.fit_restarts,
                                      Rng::derive(config.seed, kStreamFit));
  rec.fit_degenerate = fit.degenerate;

  auto posterior_mean_on = [&](const GPPosterior& post,
                               const std::vector<double>& x) {
    DesignPoint p;
    p.x = x;
    return post.mean(p);
  };

  auto record_state = [&](int iteration, const GPPosterior& post,
                          IterationRecord&& base) {
    IterationRecord it = std::move(base);
    it.iteration = iteration;
    int best = 0;
    double bv = -std::numeric_limits<double>::infinity();
    for (int l = 0; l < disc.size(); ++l) {
      const double v = posterior_mean_on(post, disc.points[l]);
      if (v > bv) {
        bv = v;
        best = l;
      }
    }
    it.recommendation = norm.x_to_raw(disc.points[best]);
    if (problem.oracle_g) {
      it.oracle_g = problem.oracle_g(it.recommendation);
      it.has_oracle = true;
    }
    rec.iterations.push_back(std::move(it));
  };

  {
    GPPosterior post(fit.params, fit.mu0, history);
    record_state(0, post, IterationRecord{});
  }

  for (int n = 1; n <= config.N; ++n) {
    const auto t0 = std::chrono::steady_clock::now();
    if (config.refit_every > 0 && n % config.refit_every == 0)
      fit = fit_hyperparameters(history, config.fit_restarts,
                                Rng::derive(config.seed, kStreamFit, n));
    GPPosterior post(fit.params, fit.mu0, history);

    double incumbent = -std::numeric_limits<double>::infinity();
    for (const auto& gp : disc.points)
      incumbent = std::max(incumbent, posterior_mean_on(post, gp));

    const std::vector<double> xn =
        maximize_ei(post, norm.norm_domain, disc, incumbent, config.restarts,
                    Rng::derive(config.seed, kStreamAcq, n));
    const double acq_value =
        ei_value_grad(post, xn, incumbent).value;

    const EvalResult e =
        problem.evaluate(norm.x_to_raw(xn), {}, config.M,
                         Rng::derive(config.seed, kStreamEval, n));
    Observation obs;
    obs.point.x = xn;
    obs.y = e.y;
    obs.noise_var = e.sample_var / config.M;
    obs.m_samples = config.M;
    history.push_back(std::move(obs));
    rec.evaluations += config.M;

    GPPosterior post2(fit.params, fit.mu0, history);
    IterationRecord it;
    it.chosen_x = norm.x_to_raw(xn);
    it.y = e.y;
    it.noise_var = e.sample_var / config.M;
    it.voi = acq_value;
    it.wall_ms = std::chrono::duration<double, std::milli>(
                     std::chrono::steady_clock::now() - t0)
                     .count();
    record_state(n, post2, std::move(it));
  }

  rec.final_recommendation = rec.iterations.back().recommendation;
  return rec;
}

}  // namespace sbo
