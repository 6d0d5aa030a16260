#pragma once

#include <cstdint>
#include <memory>

#include "sbo/problem.hpp"

namespace sbo {

// f(x, w, z) = z x^2 + w on A = [-1/2, 1/2], w ~ N(0,1), z ~ N(-1,1)
// independent of w.  F(x, w) = -x^2 + w and G(x) = -x^2.
Problem analytic_problem();

// Synthetic family drawn from a GP prior: f(x,w,z) = h(x,w) + g(z) on the
// 50x50 grid over [0,1]^2, h ~ GP(0, a_h exp(-beta ||.||^2)), g ~ N(0, a_d)
// i.i.d. per inner sample, with a_h = A_ratio and a_d = 1 - A_ratio.
struct GPSampledSpec {
  double A_ratio = 0.5;  // approximate variance reduction ratio
  double beta = 1.0;     // kernel inverse squared length scale
  int grid = 50;
  std::uint64_t seed = 0;
};
Problem gp_sampled_problem(const GPSampledSpec& spec);

// Synthetic bike-share rebalancing instance: S stations clustered into 4
// groups, gravity-model OD rates, Poisson total demand w, multinomial
// conditional trip assignment, exponential trip durations, and a
// discrete-event simulation counting negatively affected trips.
struct BikeShareConfig {
  int stations = 64;
  int groups = 4;
  int docks_per_station = 30;
  double budget = 960.0;        // total bikes to allocate
  double total_demand = 500.0;  // Poisson mean over the horizon
  double horizon_minutes = 240.0;
  double mean_trip_minutes = 18.0;
  std::uint64_t seed = 0;
  // Validation hook: when set, every simulated event checks that docked +
  // in-transit bikes equal the allocated total, and throws on violation.
  bool check_conservation = false;
};
Problem bikeshare_problem(const BikeShareConfig& config);

// Deterministic uniform allocation over groups, the bike-share baseline.
std::vector<double> bikeshare_uniform_allocation(const BikeShareConfig& config);

// Test/diagnostic surface for the bike-share simulator: the generated
// instance, the conditional trip sampler, and the discrete-event core, so
// each can be checked against independent oracles.
struct BikeTrip {
  double start = 0.0;
  int origin = 0, dest = 0;
  double duration = 0.0;
};

struct BikeShareView {
  std::vector<double> station_x, station_y;
  std::vector<int> group;                  // station -> group
  std::vector<int> capacity;               // docks per station
  std::vector<int> od_from, od_to;         // OD pair index -> stations
  std::vector<double> od_rates;            // unnormalized gravity rates
  std::vector<std::vector<int>> closest;   // per station: stations by distance
};
BikeShareView bikeshare_view(const BikeShareConfig& config);

// Conditional law of the w trips given total demand w: multinomial OD split
// proportional to rates, uniform start times, exponential durations.
// Returns trips sorted by start time.
std::vector<BikeTrip> bikeshare_sample_trips(const BikeShareConfig& config,
                                             int trips, std::uint64_t seed);

// Discrete-event core: returns the negatively-affected-trip count for an
// explicit allocation and trip list.  Throws when check_conservation is set
// and docked + in-transit bikes ever drift from the allocated total.
int bikeshare_simulate_trace(std::span<const int> bikes,
                             std::span<const int> capacity,
                             const std::vector<std::vector<int>>& closest,
                             const std::vector<BikeTrip>& trips,
                             bool check_conservation = false);

}  // namespace sbo
