#include "sbo/problem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sbo {

Domain Domain::box(std::vector<double> lo, std::vector<double> hi) {
  if (lo.size() != hi.size())
    throw ContractViolation("Domain::box: bound size mismatch");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!(lo[i] < hi[i]))
      throw ContractViolation("Domain::box: lo must be < hi");
  Domain d;
  d.kind = Kind::Box;
  d.lo = std::move(lo);
  d.hi = std::move(hi);
  return d;
}

Domain Domain::simplex(int dims, double budget) {
  if (dims < 1 || !(budget > 0.0))
    throw ContractViolation("Domain::simplex: invalid dims or budget");
  Domain d;
  d.kind = Kind::Simplex;
  d.simplex_dims = dims;
  d.budget = budget;
  return d;
}

bool Domain::contains(std::span<const double> x, double tol) const {
  if (static_cast<int>(x.size()) != dim()) return false;
  if (kind == Kind::Box) {
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
    return true;
  }
  double s = 0.0;
  for (double v : x) {
    if (v < -tol) return false;
    s += v;
  }
  return std::fabs(s - budget) <= tol * std::max(1.0, budget);
}

std::vector<double> Domain::project(std::vector<double> x) const {
  if (kind == Kind::Box) {
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = std::clamp(x[i], lo[i], hi[i]);
    return x;
  }
  // Euclidean projection onto {v >= 0, sum v = budget}.
  const int n = static_cast<int>(x.size());
  std::vector<double> u = x;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumsum = 0.0, theta = 0.0;
  int rho = 0;
  for (int i = 0; i < n; ++i) {
    cumsum += u[i];
    const double t = (cumsum - budget) / (i + 1);
    if (u[i] - t > 0.0) {
      rho = i + 1;
      theta = t;
    }
  }
  (void)rho;
  for (double& v : x) v = std::max(0.0, v - theta);
  return x;
}

std::vector<double> Domain::sample(Rng& rng) const {
  std::vector<double> x(dim());
  if (kind == Kind::Box) {
    for (int i = 0; i < dim(); ++i) x[i] = rng.uniform(lo[i], hi[i]);
    return x;
  }
  // Uniform on the simplex via normalized exponentials.
  double s = 0.0;
  for (double& v : x) {
    v = rng.exponential(1.0);
    s += v;
  }
  for (double& v : x) v *= budget / s;
  return x;
}

}  // namespace sbo
