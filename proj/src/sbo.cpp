#include "sbo/sbo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>

namespace sbo {

namespace {

constexpr std::uint64_t kStreamFirstStageX = 1;
constexpr std::uint64_t kStreamFirstStageW = 2;
constexpr std::uint64_t kStreamFirstStageEval = 3;
constexpr std::uint64_t kStreamFit = 4;
constexpr std::uint64_t kStreamAcq = 5;
constexpr std::uint64_t kStreamEval = 6;

std::vector<std::vector<double>> simplex_lattice(int dims, int max_total) {
  // All lattice points k/R on the unit simplex, R chosen as large as fits.
  auto count = [&](int R) {
    double c = 1.0;
    for (int i = 1; i < dims; ++i) c = c * (R + i) / i;
    return c;
  };
  int R = 1;
  while (count(R + 1) <= max_total) ++R;
  std::vector<std::vector<double>> pts;
  std::vector<int> k(dims, 0);
  // enumerate compositions of R into dims nonnegative parts
  std::function<void(int, int)> rec = [&](int pos, int rem) {
    if (pos == dims - 1) {
      k[pos] = rem;
      std::vector<double> p(dims);
      for (int i = 0; i < dims; ++i) p[i] = static_cast<double>(k[i]) / R;
      pts.push_back(std::move(p));
      return;
    }
    for (int v = 0; v <= rem; ++v) {
      k[pos] = v;
      rec(pos + 1, rem - v);
    }
  };
  rec(0, R);
  return pts;
}

}  // namespace

Discretization default_discretization(const Domain& norm_domain, int per_dim,
                                      int max_total) {
  if (norm_domain.kind == Domain::Kind::Box)
    return uniform_grid(norm_domain.lo, norm_domain.hi, per_dim, max_total);
  Discretization disc;
  disc.points = simplex_lattice(norm_domain.dim(), max_total);
  return disc;
}

Normalizer::Normalizer(const Problem& problem) {
  const Domain& dom = problem.domain;
  const int n = dom.dim();
  x_off_.resize(n);
  x_scale_.resize(n);
  if (dom.kind == Domain::Kind::Box) {
    for (int i = 0; i < n; ++i) {
      x_off_[i] = dom.lo[i];
      x_scale_[i] = dom.hi[i] - dom.lo[i];
    }
    norm_domain = Domain::box(std::vector<double>(n, 0.0),
                              std::vector<double>(n, 1.0));
  } else {
    for (int i = 0; i < n; ++i) {
      x_off_[i] = 0.0;
      x_scale_[i] = dom.budget;
    }
    norm_domain = Domain::simplex(n, 1.0);
  }

  const WDistribution& wd = problem.wdist;
  const int d1 = problem.dim_w;
  w_off_.assign(d1, 0.0);
  w_scale_.assign(d1, 1.0);
  if (d1 == 0) {
    norm_wdist = WDistribution::none();
    return;
  }
  if (wd.kind == WDistribution::Kind::IndependentGaussian) {
    std::vector<double> vars(d1, 1.0);
    for (int k = 0; k < d1; ++k) {
      w_off_[k] = wd.means[k];
      w_scale_[k] = std::sqrt(wd.variances[k]);
    }
    norm_wdist = WDistribution::gaussian(std::vector<double>(d1, 0.0), vars);
    w_lo.assign(d1, -6.0);
    w_hi.assign(d1, 6.0);
    w_discrete = false;
  } else {
    for (int k = 0; k < d1; ++k) {
      double mn = wd.support.front()[k], mx = mn;
      for (const auto& a : wd.support) {
        mn = std::min(mn, a[k]);
        mx = std::max(mx, a[k]);
      }
      w_off_[k] = mn;
      w_scale_[k] = mx > mn ? mx - mn : 1.0;
    }
    auto atoms = wd.support;
    for (auto& a : atoms)
      for (int k = 0; k < d1; ++k) a[k] = (a[k] - w_off_[k]) / w_scale_[k];
    norm_wdist = WDistribution::discrete(std::move(atoms), wd.probs);
    w_lo.assign(d1, 0.0);
    w_hi.assign(d1, 1.0);
    w_discrete = true;
  }
}

std::vector<double> Normalizer::x_to_raw(std::span<const double> xn) const {
  std::vector<double> r(xn.size());
  for (std::size_t i = 0; i < xn.size(); ++i)
    r[i] = x_off_[i] + x_scale_[i] * xn[i];
  return r;
}

std::vector<double> Normalizer::x_to_norm(std::span<const double> xr) const {
  std::vector<double> r(xr.size());
  for (std::size_t i = 0; i < xr.size(); ++i)
    r[i] = (xr[i] - x_off_[i]) / x_scale_[i];
  return r;
}

std::vector<double> Normalizer::w_to_norm(std::span<const double> wr) const {
  std::vector<double> r(wr.size());
  for (std::size_t i = 0; i < wr.size(); ++i)
    r[i] = (wr[i] - w_off_[i]) / w_scale_[i];
  return r;
}

std::vector<double> Normalizer::w_to_raw(std::span<const double> wn) const {
  std::vector<double> r(wn.size());
  for (std::size_t i = 0; i < wn.size(); ++i)
    r[i] = w_off_[i] + w_scale_[i] * wn[i];
  return r;
}

namespace {

double evaluate_voi_value(const VoiContext& ctx, const DesignPoint& p) {
  try {
    return ctx.evaluate(p, /*want_gradient=*/false).value;
  } catch (const DegenerateCandidate&) {
    return 0.0;
  }
}

// Project a gradient step for the x block and clamp the w block.
DesignPoint step_point(const Domain& xdom, const std::vector<double>& w_lo,
                       const std::vector<double>& w_hi, const DesignPoint& p,
                       const std::vector<double>& grad, double eta) {
  DesignPoint q = p;
  const int dx = static_cast<int>(p.x.size());
  if (xdom.kind == Domain::Kind::Simplex) {
    // move within the affine hull, then project back to the simplex
    double mean = 0.0;
    for (int j = 0; j < dx; ++j) mean += grad[j];
    mean /= dx;
    for (int j = 0; j < dx; ++j) q.x[j] += eta * (grad[j] - mean);
  } else {
    for (int j = 0; j < dx; ++j) q.x[j] += eta * grad[j];
  }
  q.x = xdom.project(std::move(q.x));
  for (std::size_t k = 0; k < p.w.size(); ++k)
    q.w[k] = std::clamp(p.w[k] + eta * grad[dx + k], w_lo[k], w_hi[k]);
  return q;
}

int nearest_atom(const std::vector<std::vector<double>>& atoms,
                 const std::vector<double>& w) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    double d = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double dk = atoms[j][k] - w[k];
      d += dk * dk;
    }
    if (d < bd) {
      bd = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

}  // namespace

AcquisitionResult maximize_acquisition(
    const VoiContext& ctx, const Domain& xdom, const std::vector<double>& w_lo,
    const std::vector<double>& w_hi,
    const std::vector<std::vector<double>>* w_atoms, int restarts,
    std::uint64_t seed) {
  const int dw = static_cast<int>(w_lo.size());
  Rng rng(Rng::derive(seed, 0xACCULL));

  AcquisitionResult best;
  best.value = -1.0;

  for (int r = 0; r < std::max(restarts, 1); ++r) {
    DesignPoint p;
    p.x = xdom.sample(rng);
    p.w.resize(dw);
    for (int k = 0; k < dw; ++k) {
      // stratified start per restart, jittered
      const double u = (r + rng.uniform()) / std::max(restarts, 1);
      p.w[k] = w_lo[k] + (w_hi[k] - w_lo[k]) * u;
    }

    VOIResult cur;
    try {
      cur = ctx.evaluate(p);
    } catch (const DegenerateCandidate&) {
      continue;
    }
    if (cur.degenerate) continue;

    double eta = 0.2;
    for (int iter = 0; iter < 60 && eta > 1e-7; ++iter) {
      double gnorm = 0.0;
      for (double g : cur.gradient) gnorm += g * g;
      gnorm = std::sqrt(gnorm);
      if (gnorm < 1e-12) break;
      std::vector<double> dir = cur.gradient;
      for (double& g : dir) g /= gnorm;
      bool improved = false;
      for (int bt = 0; bt < 25; ++bt) {
        DesignPoint cand = step_point(xdom, w_lo, w_hi, p, dir, eta);
        VOIResult next;
        try {
          next = ctx.evaluate(cand);
        } catch (const DegenerateCandidate&) {
          eta *= 0.5;
          continue;
        }
        if (!next.degenerate && next.value > cur.value + 1e-14) {
          p = std::move(cand);
          cur = std::move(next);
          eta *= 1.5;
          improved = true;
          break;
        }
        eta *= 0.5;
      }
      if (!improved) break;
    }

    double value = cur.value;
    if (w_atoms != nullptr && dw > 0) {
      p.w = (*w_atoms)[nearest_atom(*w_atoms, p.w)];
      value = evaluate_voi_value(ctx, p);
    }
    if (value > best.value) {
      best.point = p;
      best.value = value;
      best.fallback = false;
    }
  }

  if (best.value > 1e-16) return best;

  // Degenerate surface: fall back to the candidate of maximum posterior
  // variance over the grid and a small set of w probes.
  best.fallback = true;
  std::vector<std::vector<double>> probes;
  if (dw == 0) {
    probes.push_back({});
  } else if (w_atoms != nullptr) {
    const std::size_t step = std::max<std::size_t>(1, w_atoms->size() / 16);
    for (std::size_t j = 0; j < w_atoms->size(); j += step)
      probes.push_back((*w_atoms)[j]);
  } else {
    for (double q : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
      std::vector<double> w(dw);
      for (int k = 0; k < dw; ++k)
        w[k] = std::clamp(q, w_lo[k], w_hi[k]);
      probes.push_back(std::move(w));
    }
  }
  const GPPosterior& post = ctx.posterior();
  double bv = -1.0;
  // grid x values come from the context's a-values grid; rebuild lazily
  for (const auto& w : probes) {
    DesignPoint p;
    p.w = w;
    for (int l = 0; l < static_cast<int>(ctx.a_values().size()); ++l) {
      p.x = ctx.grid_point(l);
      const double v = post.variance(p);
      if (v > bv) {
        bv = v;
        best.point = p;
      }
    }
  }
  best.value = 0.0;
  return best;
}

RunRecord run_sbo(const Problem& problem, const SBOConfig& config) {
  if (config.n0 < 2 || config.N < 0 || config.M < 2 || config.restarts < 1)
    throw ContractViolation("run_sbo: invalid configuration");
  if (!problem.evaluate)
    throw ContractViolation("run_sbo: problem has no evaluator");

  const Normalizer norm(problem);
  const int d1 = problem.dim_w;
  const Discretization disc = default_discretization(
      norm.norm_domain, config.disc_per_dim, config.disc_max_total);

  RunRecord rec;
  std::vector<Observation> history;
  history.reserve(config.n0 + config.N);

  // First stage: x uniform on A, w ~ p(w).
  for (int r = 0; r < config.n0; ++r) {
    Rng xr(Rng::derive(config.seed, kStreamFirstStageX, r));
    const std::vector<double> xn = norm.norm_domain.sample(xr);
    std::vector<double> wr;
    if (d1 > 0)
      wr = problem.sample_w(Rng::derive(config.seed, kStreamFirstStageW, r));
    const std::vector<double> xraw = norm.x_to_raw(xn);
    const EvalResult e = problem.evaluate(
        xraw, wr, config.M, Rng::derive(config.seed, kStreamFirstStageEval, r));
    Observation obs;
    obs.point.x = xn;
    obs.point.w = norm.w_to_norm(wr);
    obs.y = e.y;
    obs.noise_var = e.sample_var / config.M;
    obs.m_samples = config.M;
    history.push_back(std::move(obs));
    rec.evaluations += config.M;
  }

  FitResult fit = fit_hyperparameters(history, config.fit_restarts,
                                      Rng::derive(config.seed, kStreamFit));
  rec.fit_degenerate = fit.degenerate;

  const std::vector<std::vector<double>>* atoms =
      norm.w_discrete ? &norm.norm_wdist.support : nullptr;

  auto record_state = [&](int iteration, const GPPosterior& post,
                          const VoiContext& ctx, IterationRecord&& base) {
    IterationRecord it = std::move(base);
    it.iteration = iteration;
    it.recommendation = norm.x_to_raw(disc.points[ctx.argmax_a()]);
    if (problem.oracle_g) {
      it.oracle_g = problem.oracle_g(it.recommendation);
      it.has_oracle = true;
    }
    rec.iterations.push_back(std::move(it));
  };

  {
    GPPosterior post(fit.params, fit.mu0, history);
    VoiContext ctx(post, norm.norm_wdist, disc);
    record_state(0, post, ctx, IterationRecord{});
  }

  for (int n = 1; n <= config.N; ++n) {
    const auto t0 = std::chrono::steady_clock::now();
    if (config.refit_every > 0 && n % config.refit_every == 0)
      fit = fit_hyperparameters(history, config.fit_restarts,
                                Rng::derive(config.seed, kStreamFit, n));
    GPPosterior post(fit.params, fit.mu0, history);
    VoiContext ctx(post, norm.norm_wdist, disc);

    AcquisitionResult acq = maximize_acquisition(
        ctx, norm.norm_domain, norm.w_lo, norm.w_hi, atoms, config.restarts,
        Rng::derive(config.seed, kStreamAcq, n));

    const std::vector<double> xraw = norm.x_to_raw(acq.point.x);
    const std::vector<double> wraw = norm.w_to_raw(acq.point.w);
    const EvalResult e = problem.evaluate(
        xraw, wraw, config.M, Rng::derive(config.seed, kStreamEval, n));
    Observation obs;
    obs.point = acq.point;
    obs.y = e.y;
    obs.noise_var = e.sample_var / config.M;
    obs.m_samples = config.M;
    history.push_back(std::move(obs));
    rec.evaluations += config.M;

    GPPosterior post2(fit.params, fit.mu0, history);
    VoiContext ctx2(post2, norm.norm_wdist, disc);
    IterationRecord it;
    it.chosen_x = xraw;
    it.chosen_w = wraw;
    it.y = e.y;
    it.noise_var = e.sample_var / config.M;
    it.voi = acq.value;
    it.fallback = acq.fallback;
    it.wall_ms = std::chrono::duration<double, std::milli>(
                     std::chrono::steady_clock::now() - t0)
                     .count();
    record_state(n, post2, ctx2, std::move(it));
  }

  rec.final_recommendation = rec.iterations.back().recommendation;
  return rec;
}

}  // namespace sbo
