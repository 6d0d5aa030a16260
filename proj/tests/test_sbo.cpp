#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sbo/problems.hpp"
#include "sbo/sbo.hpp"
#include "test_util.hpp"

using namespace sbo;

namespace {

DesignPoint pt(double x, double w) { return {{x}, {w}}; }

// Posterior on F(x,w) = -(x-1/2)^2 + w (normalized coordinates) at n points.
GPPosterior analytic_fixture(int n, std::vector<Observation>* out_hist = nullptr) {
  Rng rng(71);
  std::vector<Observation> h;
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform();
    const double w = rng.normal();
    const double xr = x - 0.5;
    h.push_back({pt(x, w), -xr * xr + w, 1e-4, 10});
  }
  KernelParams p;
  p.sigma0_sq = 1.5;
  p.alpha_x = {1.5};
  p.alpha_w = {0.3};
  if (out_hist) *out_hist = h;
  return GPPosterior(p, 0.0, h);
}

}  // namespace

TEST_CASE("budget accounting: evaluations = (n0 + N) * M") {
  Problem p = analytic_problem();
  SBOConfig cfg;
  cfg.n0 = 4;
  cfg.N = 3;
  cfg.M = 7;
  cfg.restarts = 3;
  cfg.fit_restarts = 3;
  cfg.seed = 5;
  RunRecord r = run_sbo(p, cfg);
  CHECK(r.evaluations == (cfg.n0 + cfg.N) * cfg.M);
  CHECK(static_cast<int>(r.iterations.size()) == cfg.N + 1);
}

TEST_CASE("fixed seed gives bitwise-identical runs") {
  Problem p = analytic_problem();
  SBOConfig cfg;
  cfg.n0 = 4;
  cfg.N = 4;
  cfg.M = 5;
  cfg.restarts = 4;
  cfg.fit_restarts = 4;
  cfg.seed = 99;
  RunRecord a = run_sbo(p, cfg);
  RunRecord b = run_sbo(p, cfg);
  REQUIRE(a.iterations.size() == b.iterations.size());
  for (std::size_t i = 0; i < a.iterations.size(); ++i) {
    const IterationRecord& ia = a.iterations[i];
    const IterationRecord& ib = b.iterations[i];
    CHECK(ia.chosen_x == ib.chosen_x);
    CHECK(ia.chosen_w == ib.chosen_w);
    CHECK(ia.y == ib.y);
    CHECK(ia.noise_var == ib.noise_var);
    CHECK(ia.voi == ib.voi);
    CHECK(ia.recommendation == ib.recommendation);
  }
  CHECK(a.final_recommendation == b.final_recommendation);
}

TEST_CASE("N = 0 recommends the first-stage posterior argmax") {
  Problem p = analytic_problem();
  SBOConfig cfg;
  cfg.n0 = 6;
  cfg.N = 0;
  cfg.M = 5;
  cfg.seed = 3;
  RunRecord r = run_sbo(p, cfg);
  REQUIRE(r.iterations.size() == 1);
  CHECK(r.final_recommendation == r.iterations[0].recommendation);
  CHECK(p.domain.contains(r.final_recommendation, 1e-9));
  CHECK(r.evaluations == cfg.n0 * cfg.M);
}

TEST_CASE("maximize_acquisition beats a dense reference grid") {
  GPPosterior post = analytic_fixture(7);
  WDistribution wd = WDistribution::gaussian({0.0}, {1.0});
  Discretization disc = uniform_grid({0.0}, {1.0}, 50);
  VoiContext ctx(post, wd, disc, default_candidate_noise(post));
  Domain xdom = Domain::box({0.0}, {1.0});
  AcquisitionResult best = maximize_acquisition(ctx, xdom, {-6.0}, {6.0},
                                                nullptr, 30, 12345);
  CHECK_FALSE(best.fallback);
  double grid_max = 0.0;
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j) {
      const double x = i / 49.0;
      const double w = -6.0 + 12.0 * j / 49.0;
      grid_max = std::max(grid_max, ctx.evaluate(pt(x, w), false).value);
    }
  CHECK(best.value >= grid_max - 1e-8);
}

TEST_CASE("VOI surface symmetric for x-symmetric data") {
  KernelParams p;
  p.sigma0_sq = 1.0;
  p.alpha_x = {2.0};
  p.alpha_w = {0.5};
  std::vector<Observation> h{{pt(0.2, 0.3), 0.8, 0.01, 10},
                             {pt(0.8, 0.3), 0.8, 0.01, 10},
                             {pt(0.35, -0.9), -0.2, 0.01, 10},
                             {pt(0.65, -0.9), -0.2, 0.01, 10}};
  GPPosterior post(p, 0.0, h);
  WDistribution wd = WDistribution::gaussian({0.0}, {1.0});
  // symmetric discretization about x = 0.5
  Discretization disc = uniform_grid({0.0}, {1.0}, 51);
  VoiContext ctx(post, wd, disc, 0.01);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 5; ++j) {
      const double x = i / 24.0;  // in [0, 0.5)
      const double w = -2.0 + j;
      const double v1 = ctx.evaluate(pt(x, w), false).value;
      const double v2 = ctx.evaluate(pt(1.0 - x, w), false).value;
      CHECK(std::fabs(v1 - v2) <= 1e-8);
    }
}

TEST_CASE("L = 1 discretization engages the fallback") {
  GPPosterior post = analytic_fixture(5);
  WDistribution wd = WDistribution::gaussian({0.0}, {1.0});
  Discretization disc;
  disc.points.push_back({0.5});
  VoiContext ctx(post, wd, disc, 0.01);
  Domain xdom = Domain::box({0.0}, {1.0});
  AcquisitionResult r =
      maximize_acquisition(ctx, xdom, {-6.0}, {6.0}, nullptr, 5, 7);
  CHECK(r.fallback);
  CHECK(xdom.contains(r.point.x, 1e-9));
}

TEST_CASE("default_discretization: box grid and simplex lattice") {
  Discretization box = default_discretization(Domain::box({0.0}, {1.0}), 50, 2500);
  CHECK(box.size() == 50);
  Discretization simp =
      default_discretization(Domain::simplex(4, 1.0), 50, 2500);
  CHECK(simp.size() >= 100);
  CHECK(simp.size() <= 2500);
  for (const auto& x : simp.points) {
    double s = 0.0;
    for (double v : x) {
      CHECK(v >= -1e-12);
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("runs on a simplex-domain problem end to end") {
  BikeShareConfig bs;
  bs.stations = 8;
  bs.groups = 4;
  bs.docks_per_station = 10;
  bs.budget = 40.0;
  bs.total_demand = 30.0;
  bs.seed = 1;
  bs.check_conservation = true;
  Problem p = bikeshare_problem(bs);
  SBOConfig cfg;
  cfg.n0 = 4;
  cfg.N = 2;
  cfg.M = 3;
  cfg.restarts = 3;
  cfg.fit_restarts = 3;
  cfg.disc_per_dim = 10;
  cfg.disc_max_total = 300;
  cfg.seed = 21;
  RunRecord r = run_sbo(p, cfg);
  CHECK(r.evaluations == (cfg.n0 + cfg.N) * cfg.M);
  CHECK(p.domain.contains(r.final_recommendation, 1e-6));
}
