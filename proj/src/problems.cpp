#include "sbo/problems.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <queue>

namespace sbo {

Problem analytic_problem() {
  Problem p;
  p.name = "analytic";
  p.dim_x = 1;
  p.dim_w = 1;
  p.domain = Domain::box({-0.5}, {0.5});
  p.wdist = WDistribution::gaussian({0.0}, {1.0});
  p.sample_w = [](std::uint64_t seed) {
    Rng rng(seed);
    return std::vector<double>{rng.normal()};
  };
  p.evaluate = [](std::span<const double> x, std::span<const double> w, int M,
                  std::uint64_t seed) {
    Rng rng(seed);
    const double x2 = x[0] * x[0];
    double sum = 0.0, sumsq = 0.0;
    for (int m = 0; m < M; ++m) {
      const double z = rng.normal(-1.0, 1.0);
      const double y = z * x2 + w[0];
      sum += y;
      sumsq += y * y;
    }
    EvalResult e;
    e.y = sum / M;
    e.sample_var =
        M > 1 ? std::max(0.0, (sumsq - sum * sum / M) / (M - 1)) : 0.0;
    return e;
  };
  p.oracle_g = [](std::span<const double> x) { return -x[0] * x[0]; };
  return p;
}

namespace {

int snap_index(double v, int grid) {
  const int i = static_cast<int>(std::lround(v * (grid - 1)));
  return std::clamp(i, 0, grid - 1);
}

}  // namespace

Problem gp_sampled_problem(const GPSampledSpec& spec) {
  if (!(spec.A_ratio > 0.0 && spec.A_ratio <= 1.0) || !(spec.beta > 0.0))
    throw ContractViolation("gp_sampled_problem: invalid spec");
  const int g = spec.grid;
  const int L = g * g;
  const double a_h = spec.A_ratio;       // a_h + a_d = 1
  const double a_d = 1.0 - spec.A_ratio;

  // Draw h once from GP(0, a_h exp(-beta ||.||^2)) on the grid.
  Eigen::MatrixXd K(L, L);
  std::vector<double> coord(g);
  for (int i = 0; i < g; ++i) coord[i] = static_cast<double>(i) / (g - 1);
  for (int i = 0; i < L; ++i) {
    const double xi = coord[i / g], wi = coord[i % g];
    for (int j = 0; j <= i; ++j) {
      const double dx = xi - coord[j / g], dw = wi - coord[j % g];
      K(i, j) = a_h * std::exp(-spec.beta * (dx * dx + dw * dw));
      K(j, i) = K(i, j);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 1e-10 * a_h;
  for (;;) {
    llt.compute(K + jitter * Eigen::MatrixXd::Identity(L, L));
    if (llt.info() == Eigen::Success) break;
    jitter *= 10.0;
    if (jitter > 1e-2 * a_h)
      throw FactorizationError("gp_sampled_problem: grid kernel not PSD");
  }
  Rng draw(Rng::derive(spec.seed, 0x6501ULL));
  Eigen::VectorXd xi(L);
  for (int i = 0; i < L; ++i) xi(i) = draw.normal();
  const Eigen::VectorXd hv = llt.matrixL() * xi;
  auto h = std::make_shared<std::vector<double>>(hv.data(), hv.data() + L);

  Problem p;
  p.name = "gp_sampled";
  p.dim_x = 1;
  p.dim_w = 1;
  p.domain = Domain::box({0.0}, {1.0});
  std::vector<std::vector<double>> atoms(g);
  for (int i = 0; i < g; ++i) atoms[i] = {coord[i]};
  p.wdist = WDistribution::discrete(atoms, std::vector<double>(g, 1.0));
  p.sample_w = [g, coord](std::uint64_t seed) {
    Rng rng(seed);
    return std::vector<double>{coord[rng.index(g)]};
  };
  p.evaluate = [h, g, a_d](std::span<const double> x,
                           std::span<const double> w, int M,
                           std::uint64_t seed) {
    Rng rng(seed);
    const int ix = snap_index(x[0], g);
    const int iw = snap_index(w[0], g);
    const double base = (*h)[ix * g + iw];
    const double sd = std::sqrt(a_d);
    double sum = 0.0, sumsq = 0.0;
    for (int m = 0; m < M; ++m) {
      const double y = base + (a_d > 0.0 ? rng.normal(0.0, sd) : 0.0);
      sum += y;
      sumsq += y * y;
    }
    EvalResult e;
    e.y = sum / M;
    e.sample_var =
        M > 1 ? std::max(0.0, (sumsq - sum * sum / M) / (M - 1)) : 0.0;
    return e;
  };
  p.oracle_g = [h, g](std::span<const double> x) {
    const int ix = snap_index(x[0], g);
    double s = 0.0;
    for (int j = 0; j < g; ++j) s += (*h)[ix * g + j];
    return s / g;
  };
  return p;
}

namespace {

// Largest-remainder apportionment of `total` units across weights.
std::vector<int> apportion(const std::vector<double>& weights, int total) {
  const int n = static_cast<int>(weights.size());
  double wsum = 0.0;
  for (double w : weights) wsum += std::max(0.0, w);
  std::vector<int> out(n, 0);
  if (wsum <= 0.0 || total <= 0) return out;
  std::vector<std::pair<double, int>> rem(n);
  int assigned = 0;
  for (int i = 0; i < n; ++i) {
    const double share = std::max(0.0, weights[i]) / wsum * total;
    out[i] = static_cast<int>(std::floor(share));
    assigned += out[i];
    rem[i] = {share - out[i], i};
  }
  std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int k = 0; k < total - assigned; ++k) out[rem[k % n].second] += 1;
  return out;
}

struct BikeShareInstance {
  BikeShareConfig cfg;
  std::vector<double> sx, sy;                 // station coordinates
  std::vector<int> group;                     // station -> group
  std::vector<std::vector<int>> group_members;
  std::vector<int> capacity;                  // docks per station
  std::vector<int> od_from, od_to;            // OD pair index -> stations
  std::vector<double> od_cum;                 // cumulative OD rates (sums to 1)
  std::vector<double> od_mean_minutes;        // mean trip duration per pair
  std::vector<std::vector<int>> closest;      // per station: others by distance

  // Integer bike allocation per station from a group-level x on the simplex.
  std::vector<int> allocate(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != cfg.groups)
      throw ContractViolation("bikeshare: allocation dimension mismatch");
    double s = 0.0;
    for (double v : x) {
      if (v < -1e-6 * cfg.budget)
        throw ContractViolation("bikeshare: negative group allocation");
      s += v;
    }
    if (std::fabs(s - cfg.budget) > 1e-6 * std::max(1.0, cfg.budget))
      throw ContractViolation("bikeshare: allocation off the budget simplex");

    std::vector<double> gw(x.begin(), x.end());
    std::vector<int> per_group =
        apportion(gw, static_cast<int>(std::lround(cfg.budget)));
    std::vector<int> bikes(sx.size(), 0);
    int spill = 0;
    for (int k = 0; k < cfg.groups; ++k) {
      const auto& members = group_members[k];
      // uniform within the group, capped by dock capacity
      std::vector<double> ones(members.size(), 1.0);
      std::vector<int> share = apportion(ones, per_group[k]);
      int overflow = 0;
      for (std::size_t j = 0; j < members.size(); ++j) {
        const int s_id = members[j];
        const int take = std::min(share[j], capacity[s_id]);
        bikes[s_id] = take;
        overflow += share[j] - take;
      }
      // redistribute overflow within the group first
      for (std::size_t j = 0; j < members.size() && overflow > 0; ++j) {
        const int s_id = members[j];
        const int room = capacity[s_id] - bikes[s_id];
        const int add = std::min(room, overflow);
        bikes[s_id] += add;
        overflow -= add;
      }
      spill += overflow;
    }
    // group-saturated remainder goes to any station with room
    for (std::size_t s_id = 0; s_id < bikes.size() && spill > 0; ++s_id) {
      const int room = capacity[s_id] - bikes[s_id];
      const int add = std::min(room, spill);
      bikes[s_id] += add;
      spill -= add;
    }
    return bikes;
  }

  // Conditional trip plan given total demand `trips`, sorted by start time.
  std::vector<BikeTrip> sample_trips(int trips, Rng& rng) const {
    std::vector<BikeTrip> plan(trips);
    for (int t = 0; t < trips; ++t) {
      const double u = rng.uniform();
      const int pair = static_cast<int>(
          std::lower_bound(od_cum.begin(), od_cum.end(), u) - od_cum.begin());
      const int pi = std::min<int>(pair, od_cum.size() - 1);
      plan[t] = {rng.uniform(0.0, cfg.horizon_minutes), od_from[pi], od_to[pi],
                 rng.exponential(od_mean_minutes[pi])};
    }
    std::sort(plan.begin(), plan.end(),
              [](const BikeTrip& a, const BikeTrip& b) {
                if (a.start != b.start) return a.start < b.start;
                if (a.origin != b.origin) return a.origin < b.origin;
                return a.dest < b.dest;
              });
    return plan;
  }
};

std::shared_ptr<BikeShareInstance> build_bikeshare(
    const BikeShareConfig& cfg) {
  auto inst = std::make_shared<BikeShareInstance>();
  inst->cfg = cfg;
  const int S = cfg.stations;
  const int G = cfg.groups;
  Rng rng(Rng::derive(cfg.seed, 0xB1CEULL));

  // clustered synthetic coordinates
  std::vector<double> cx(G), cy(G);
  for (int k = 0; k < G; ++k) {
    cx[k] = rng.uniform(0.0, 10.0);
    cy[k] = rng.uniform(0.0, 10.0);
  }
  inst->sx.resize(S);
  inst->sy.resize(S);
  for (int s = 0; s < S; ++s) {
    const int k = s % G;
    inst->sx[s] = cx[k] + rng.normal(0.0, 1.2);
    inst->sy[s] = cy[k] + rng.normal(0.0, 1.2);
  }

  // k-means into G groups, seeded from the generating centers
  inst->group.assign(S, 0);
  for (int it = 0; it < 25; ++it) {
    for (int s = 0; s < S; ++s) {
      double bd = 1e300;
      for (int k = 0; k < G; ++k) {
        const double d = (inst->sx[s] - cx[k]) * (inst->sx[s] - cx[k]) +
                         (inst->sy[s] - cy[k]) * (inst->sy[s] - cy[k]);
        if (d < bd) {
          bd = d;
          inst->group[s] = k;
        }
      }
    }
    std::vector<double> nx(G, 0.0), ny(G, 0.0);
    std::vector<int> cnt(G, 0);
    for (int s = 0; s < S; ++s) {
      nx[inst->group[s]] += inst->sx[s];
      ny[inst->group[s]] += inst->sy[s];
      cnt[inst->group[s]] += 1;
    }
    for (int k = 0; k < G; ++k)
      if (cnt[k] > 0) {
        cx[k] = nx[k] / cnt[k];
        cy[k] = ny[k] / cnt[k];
      }
  }
  inst->group_members.assign(G, {});
  for (int s = 0; s < S; ++s) inst->group_members[inst->group[s]].push_back(s);
  // keep all groups nonempty
  for (int k = 0; k < G; ++k)
    if (inst->group_members[k].empty()) {
      int donor = 0;
      for (int j = 0; j < G; ++j)
        if (inst->group_members[j].size() > inst->group_members[donor].size())
          donor = j;
      const int moved = inst->group_members[donor].back();
      inst->group_members[donor].pop_back();
      inst->group_members[k].push_back(moved);
      inst->group[moved] = k;
    }

  inst->capacity.assign(S, cfg.docks_per_station);

  // gravity-model OD rates over ordered pairs
  std::vector<double> origin_w(S), dest_w(S);
  for (int s = 0; s < S; ++s) {
    origin_w[s] = std::exp(rng.normal(0.0, 0.6));
    dest_w[s] = std::exp(rng.normal(0.0, 0.6));
  }
  double dist_sum = 0.0;
  int dist_cnt = 0;
  std::vector<double> rates;
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < S; ++j) {
      if (i == j) continue;
      const double d = std::hypot(inst->sx[i] - inst->sx[j],
                                  inst->sy[i] - inst->sy[j]);
      inst->od_from.push_back(i);
      inst->od_to.push_back(j);
      rates.push_back(origin_w[i] * dest_w[j] * std::exp(-d / 5.0));
      dist_sum += d;
      ++dist_cnt;
    }
  const double mean_dist = dist_sum / dist_cnt;
  double rate_sum = std::accumulate(rates.begin(), rates.end(), 0.0);
  inst->od_cum.resize(rates.size());
  inst->od_mean_minutes.resize(rates.size());
  double acc = 0.0;
  for (std::size_t p = 0; p < rates.size(); ++p) {
    acc += rates[p] / rate_sum;
    inst->od_cum[p] = acc;
    const double d = std::hypot(inst->sx[inst->od_from[p]] - inst->sx[inst->od_to[p]],
                                inst->sy[inst->od_from[p]] - inst->sy[inst->od_to[p]]);
    inst->od_mean_minutes[p] = cfg.mean_trip_minutes * d / mean_dist;
  }
  inst->od_cum.back() = 1.0;

  inst->closest.assign(S, {});
  for (int s = 0; s < S; ++s) {
    std::vector<int> order(S);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double da = std::hypot(inst->sx[s] - inst->sx[a],
                                   inst->sy[s] - inst->sy[a]);
      const double db = std::hypot(inst->sx[s] - inst->sx[b],
                                   inst->sy[s] - inst->sy[b]);
      if (da != db) return da < db;
      return a < b;
    });
    inst->closest[s] = std::move(order);
  }
  return inst;
}

// Poisson pmf support truncated at the 1e-8 tails, renormalized.
WDistribution truncated_poisson(double mean) {
  std::vector<std::vector<double>> support;
  std::vector<double> probs;
  double p = std::exp(-mean);
  double cdf = p;
  constexpr double tail = 1e-8;
  int k = 0;
  // skip the lower tail
  while (cdf < tail && k < 10 * mean + 100) {
    ++k;
    p *= mean / k;
    cdf += p;
  }
  const int lo = k;
  double mass = p;
  support.push_back({static_cast<double>(lo)});
  probs.push_back(p);
  while (cdf < 1.0 - tail) {
    ++k;
    p *= mean / k;
    cdf += p;
    mass += p;
    support.push_back({static_cast<double>(k)});
    probs.push_back(p);
    if (k > 10 * mean + 1000) break;
  }
  (void)mass;
  return WDistribution::discrete(std::move(support), std::move(probs));
}

}  // namespace

int bikeshare_simulate_trace(std::span<const int> bikes_in,
                             std::span<const int> capacity,
                             const std::vector<std::vector<int>>& closest,
                             const std::vector<BikeTrip>& trips,
                             bool check_conservation) {
  std::vector<int> bikes(bikes_in.begin(), bikes_in.end());
  const int total_alloc = std::accumulate(bikes.begin(), bikes.end(), 0);
  int in_transit = 0;
  int affected = 0;

  // arrivals get processed before any departure at the same instant
  using Arrival = std::pair<double, int>;  // (time, destination)
  std::priority_queue<Arrival, std::vector<Arrival>, std::greater<>> arrivals;

  auto check = [&]() {
    if (!check_conservation) return;
    const int docked = std::accumulate(bikes.begin(), bikes.end(), 0);
    if (docked + in_transit != total_alloc)
      throw std::runtime_error("bikeshare: bike conservation violated");
  };

  auto handle_arrival = [&](int dest) {
    int station = dest;
    if (bikes[station] >= capacity[station]) {
      ++affected;  // no dock at the preferred destination
      station = -1;
      for (int cand : closest[dest]) {
        if (bikes[cand] < capacity[cand]) {
          station = cand;
          break;
        }
      }
    }
    if (station >= 0) {
      ++bikes[station];
      --in_transit;
    }
    // else every dock in the system is full; the bike stays in transit
    check();
  };

  for (const BikeTrip& trip : trips) {
    while (!arrivals.empty() && arrivals.top().first <= trip.start) {
      const int dest = arrivals.top().second;
      arrivals.pop();
      handle_arrival(dest);
    }
    if (bikes[trip.origin] == 0) {
      ++affected;  // no bike at the origin; the trip does not occur
    } else {
      --bikes[trip.origin];
      ++in_transit;
      arrivals.emplace(trip.start + trip.duration, trip.dest);
    }
    check();
  }
  while (!arrivals.empty()) {
    const int dest = arrivals.top().second;
    arrivals.pop();
    handle_arrival(dest);
  }
  return affected;
}

BikeShareView bikeshare_view(const BikeShareConfig& config) {
  auto inst = build_bikeshare(config);
  BikeShareView v;
  v.station_x = inst->sx;
  v.station_y = inst->sy;
  v.group = inst->group;
  v.capacity = inst->capacity;
  v.od_from = inst->od_from;
  v.od_to = inst->od_to;
  v.closest = inst->closest;
  v.od_rates.resize(inst->od_cum.size());
  double prev = 0.0;
  for (std::size_t p = 0; p < inst->od_cum.size(); ++p) {
    v.od_rates[p] = inst->od_cum[p] - prev;
    prev = inst->od_cum[p];
  }
  return v;
}

std::vector<BikeTrip> bikeshare_sample_trips(const BikeShareConfig& config,
                                             int trips, std::uint64_t seed) {
  auto inst = build_bikeshare(config);
  Rng rng(seed);
  return inst->sample_trips(trips, rng);
}

std::vector<double> bikeshare_uniform_allocation(
    const BikeShareConfig& config) {
  return std::vector<double>(config.groups,
                             config.budget / config.groups);
}

Problem bikeshare_problem(const BikeShareConfig& config) {
  if (config.budget >
      static_cast<double>(config.stations) * config.docks_per_station)
    throw ContractViolation("bikeshare: budget exceeds total dock capacity");
  auto inst = build_bikeshare(config);

  Problem p;
  p.name = "bikeshare";
  p.dim_x = config.groups;
  p.dim_w = 1;
  p.domain = Domain::simplex(config.groups, config.budget);
  p.wdist = truncated_poisson(config.total_demand);
  const double demand = config.total_demand;
  p.sample_w = [demand](std::uint64_t seed) {
    Rng rng(seed);
    return std::vector<double>{static_cast<double>(rng.poisson(demand))};
  };
  p.evaluate = [inst](std::span<const double> x, std::span<const double> w,
                      int M, std::uint64_t seed) {
    const std::vector<int> allocation = inst->allocate(x);
    const int trips = static_cast<int>(std::lround(w[0]));
    double sum = 0.0, sumsq = 0.0;
    for (int m = 0; m < M; ++m) {
      Rng rng(Rng::derive(seed, 0x51ULL, m));
      const std::vector<BikeTrip> plan = inst->sample_trips(trips, rng);
      const double y = -static_cast<double>(bikeshare_simulate_trace(
          allocation, inst->capacity, inst->closest, plan,
          inst->cfg.check_conservation));
      sum += y;
      sumsq += y * y;
    }
    EvalResult e;
    e.y = sum / M;
    e.sample_var =
        M > 1 ? std::max(0.0, (sumsq - sum * sum / M) / (M - 1)) : 0.0;
    return e;
  };
  return p;
}

}  // namespace sbo
