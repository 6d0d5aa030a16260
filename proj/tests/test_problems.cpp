#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "sbo/problems.hpp"
#include "test_util.hpp"

using namespace sbo;

TEST_CASE("analytic problem: oracle and moments") {
  Problem p = analytic_problem();
  CHECK(p.oracle_g(std::vector<double>{0.0}) == 0.0);
  CHECK(p.oracle_g(std::vector<double>{0.5}) == doctest::Approx(-0.25));
  CHECK(p.oracle_g(std::vector<double>{-0.5}) == doctest::Approx(-0.25));

  // E[z x^2 + w] = -x^2 + w
  EvalResult e = p.evaluate(std::vector<double>{0.4}, std::vector<double>{0.7},
                            100000, 3);
  CHECK(std::fabs(e.y - (-0.16 + 0.7)) <= 0.01);
  // Var[z x^2] = x^4; at x = 1/2 that is 0.0625
  EvalResult v = p.evaluate(std::vector<double>{0.5}, std::vector<double>{0.0},
                            100000, 4);
  CHECK(std::fabs(v.sample_var - 0.0625) <= 0.002);

  // determinism
  EvalResult a = p.evaluate(std::vector<double>{0.1}, std::vector<double>{0.2}, 10, 11);
  EvalResult b = p.evaluate(std::vector<double>{0.1}, std::vector<double>{0.2}, 10, 11);
  CHECK(a.y == b.y);
  CHECK(a.sample_var == b.sample_var);
}

TEST_CASE("analytic problem: conditional-law consistency at x = 0.3") {
  Problem p = analytic_problem();
  Rng rng(61);
  const int n = 40000;
  // conditioned path: draw w ~ p(w), evaluate with M = 1
  double s1 = 0.0, ss1 = 0.0;
  for (int i = 0; i < n; ++i) {
    const std::vector<double> w = p.sample_w(Rng::derive(500, i));
    const double y = p.evaluate(std::vector<double>{0.3}, w, 1,
                                Rng::derive(501, i)).y;
    s1 += y;
    ss1 += y * y;
  }
  // unconditional oracle: G(0.3) = -0.09
  const double m1 = s1 / n;
  const double se1 = std::sqrt((ss1 / n - m1 * m1) / n);
  CHECK(std::fabs(m1 - (-0.09)) <= 4.0 * se1);
}

TEST_CASE("gp_sampled: no-nugget exactness and oracle consistency") {
  GPSampledSpec spec;
  spec.A_ratio = 1.0;  // a_d = 0
  spec.beta = std::exp(4.0);
  spec.grid = 50;
  spec.seed = 9;
  Problem p = gp_sampled_problem(spec);

  // deterministic: evaluate returns h(x, w) exactly, zero variance
  EvalResult e1 = p.evaluate(std::vector<double>{0.3}, std::vector<double>{0.5}, 4, 1);
  EvalResult e2 = p.evaluate(std::vector<double>{0.3}, std::vector<double>{0.5}, 4, 2);
  CHECK(e1.y == e2.y);
  CHECK(e1.sample_var == 0.0);

  // oracle equals the brute-force average of h over the 50 w atoms
  for (double x : {0.0, 0.22, 0.71, 1.0}) {
    double s = 0.0;
    for (int j = 0; j < 50; ++j)
      s += p.evaluate(std::vector<double>{x}, std::vector<double>{j / 49.0}, 2, 0).y;
    CHECK(p.oracle_g(std::vector<double>{x}) == doctest::Approx(s / 50).epsilon(1e-12));
  }
}

TEST_CASE("gp_sampled: nugget variance matches a_d") {
  GPSampledSpec spec;
  spec.A_ratio = 0.3;  // a_d = 0.7
  spec.beta = 1.0;
  spec.seed = 4;
  Problem p = gp_sampled_problem(spec);
  // single call with many inner draws: sample_var estimates a_d
  EvalResult e = p.evaluate(std::vector<double>{0.5}, std::vector<double>{0.5},
                            10000, 8);
  const double se = 0.7 * std::sqrt(2.0 / 9999.0);
  CHECK(std::fabs(e.sample_var - 0.7) <= 4.0 * se);
  // distinct instances for distinct seeds
  GPSampledSpec spec2 = spec;
  spec2.seed = 5;
  Problem q = gp_sampled_problem(spec2);
  CHECK(p.evaluate(std::vector<double>{0.5}, std::vector<double>{0.5}, 2, 0).y !=
        q.evaluate(std::vector<double>{0.5}, std::vector<double>{0.5}, 2, 0).y);
}

TEST_CASE("bikeshare: zero demand means zero affected trips") {
  BikeShareConfig cfg;
  cfg.stations = 8;
  cfg.groups = 4;
  cfg.docks_per_station = 5;
  cfg.budget = 20.0;
  cfg.total_demand = 0.0;
  cfg.seed = 2;
  Problem p = bikeshare_problem(cfg);
  CHECK(p.wdist.kind == WDistribution::Kind::Discrete);
  const std::vector<double> x = bikeshare_uniform_allocation(cfg);
  EvalResult e = p.evaluate(x, std::vector<double>{0.0}, 5, 1);
  CHECK(e.y == 0.0);
  CHECK(e.sample_var == 0.0);
}

TEST_CASE("bikeshare: truncated Poisson support and probabilities") {
  BikeShareConfig cfg;
  cfg.total_demand = 500.0;
  Problem p = bikeshare_problem(cfg);
  const WDistribution& w = p.wdist;
  double total = std::accumulate(w.probs.begin(), w.probs.end(), 0.0);
  CHECK(std::fabs(total - 1.0) <= 1e-12);
  // support concentrated around the mean, within +-6 sd plus slack
  const double sd = std::sqrt(500.0);
  CHECK(w.support.front()[0] >= 500.0 - 8 * sd);
  CHECK(w.support.back()[0] <= 500.0 + 8 * sd);
  CHECK(w.support.size() >= 100);
}

TEST_CASE("bikeshare: DES core against hand-enumerated 5-trip traces") {
  // two stations, explicit closest order
  const std::vector<int> capacity{2, 2};
  const std::vector<std::vector<int>> closest{{0, 1}, {1, 0}};

  // one bike at station 0: trips 0->1 twice; second departure finds no bike
  std::vector<BikeTrip> t1{{10.0, 0, 1, 5.0}, {12.0, 0, 1, 5.0}};
  CHECK(bikeshare_simulate_trace(std::vector<int>{1, 0}, capacity, closest, t1,
                                 true) == 1);

  // bike returns before the second departure: nothing affected
  std::vector<BikeTrip> t2{{10.0, 0, 1, 5.0}, {16.0, 1, 0, 5.0}};
  CHECK(bikeshare_simulate_trace(std::vector<int>{1, 0}, capacity, closest, t2,
                                 true) == 0);

  // destination full: arrival redirected to the other station, counted once
  std::vector<BikeTrip> t3{{10.0, 0, 1, 1.0}};
  CHECK(bikeshare_simulate_trace(std::vector<int>{1, 2}, capacity, closest, t3,
                                 true) == 1);

  // five-trip trace mixing both failure modes:
  //  t=1: 0->1 ok (bike leaves 0; station 0 empty)
  //  t=2: 0->1 no bike -> affected
  //  t=3: arrival at 1 (full, 2 docked) -> affected, redirected to 0
  //  t=4: 1->0 ok
  //  t=5: 1->0 arrival fine
  std::vector<BikeTrip> t4{{1.0, 0, 1, 2.0},
                           {2.0, 0, 1, 2.0},
                           {4.0, 1, 0, 1.0}};
  CHECK(bikeshare_simulate_trace(std::vector<int>{1, 2}, capacity, closest, t4,
                                 true) == 2);

  // zero bikes anywhere: every departure is affected
  std::vector<BikeTrip> t5{{1.0, 0, 1, 1.0}, {2.0, 1, 0, 1.0}, {3.0, 0, 1, 1.0},
                           {4.0, 1, 0, 1.0}, {5.0, 0, 1, 1.0}};
  CHECK(bikeshare_simulate_trace(std::vector<int>{0, 0}, capacity, closest, t5,
                                 true) == 5);
}

TEST_CASE("bikeshare: multinomial OD split matches rate proportions") {
  BikeShareConfig cfg;
  cfg.stations = 6;
  cfg.groups = 3;
  cfg.seed = 12;
  BikeShareView view = bikeshare_view(cfg);
  const std::size_t pairs = view.od_rates.size();
  REQUIRE(pairs == 30);

  std::vector<double> counts(pairs, 0.0);
  const int reps = 1000, w = 1000;
  for (int r = 0; r < reps; ++r) {
    const std::vector<BikeTrip> trips =
        bikeshare_sample_trips(cfg, w, Rng::derive(900, r));
    for (const BikeTrip& t : trips)
      for (std::size_t pr = 0; pr < pairs; ++pr)
        if (view.od_from[pr] == t.origin && view.od_to[pr] == t.dest) {
          counts[pr] += 1.0;
          break;
        }
  }
  const double total = reps * static_cast<double>(w);
  double rate_sum = std::accumulate(view.od_rates.begin(), view.od_rates.end(), 0.0);
  for (std::size_t pr = 0; pr < pairs; ++pr) {
    const double prob = view.od_rates[pr] / rate_sum;
    const double se = std::sqrt(prob * (1 - prob) / total);
    CHECK(std::fabs(counts[pr] / total - prob) <= 4.0 * se + 1e-9);
  }
}

TEST_CASE("bikeshare: conservation holds and seeds reproduce") {
  BikeShareConfig cfg;
  cfg.stations = 16;
  cfg.groups = 4;
  cfg.docks_per_station = 6;
  cfg.budget = 48.0;
  cfg.total_demand = 120.0;
  cfg.seed = 3;
  cfg.check_conservation = true;  // throws on any conservation violation
  Problem p = bikeshare_problem(cfg);
  const std::vector<double> x = bikeshare_uniform_allocation(cfg);
  EvalResult a = p.evaluate(x, std::vector<double>{120.0}, 8, 42);
  EvalResult b = p.evaluate(x, std::vector<double>{120.0}, 8, 42);
  CHECK(a.y == b.y);
  CHECK(a.sample_var == b.sample_var);
  CHECK(a.y <= 0.0);

  // off-simplex input rejected
  CHECK_THROWS_AS(p.evaluate(std::vector<double>{48.0, 48.0, 0.0, 0.0},
                             std::vector<double>{10.0}, 2, 1),
                  ContractViolation);
}

TEST_CASE("bikeshare: sample_w draws from the Poisson demand law") {
  BikeShareConfig cfg;
  cfg.total_demand = 50.0;
  Problem p = bikeshare_problem(cfg);
  const int n = 20000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = p.sample_w(Rng::derive(77, i))[0];
    s += w;
    ss += w * w;
  }
  const double m = s / n;
  const double var = ss / n - m * m;
  CHECK(std::fabs(m - 50.0) <= 4.0 * std::sqrt(50.0 / n));
  CHECK(std::fabs(var - 50.0) <= 5.0);
}
