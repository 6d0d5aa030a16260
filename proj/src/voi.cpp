#include "sbo/voi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sbo/simd.hpp"

namespace sbo {

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) * 0.39894228040143267794;
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z * 0.70710678118654752440);
}

namespace {

// f(z) = pdf(z) + z cdf(z), evaluated at z = -|c|.  For large |c| the two
// terms cancel; switch to the asymptotic tail expansion there.
double f_neg(double c) {
  c = std::fabs(c);
  if (c > 8.0) {
    const double c2 = c * c;
    return normal_pdf(c) * (1.0 / c2) * (1.0 - 3.0 / c2 + 15.0 / (c2 * c2));
  }
  return normal_pdf(c) - c * normal_cdf(-c);
}

}  // namespace

HResult compute_h(std::span<const double> a, std::span<const double> b) {
  const int L = static_cast<int>(a.size());
  if (L == 0 || b.size() != a.size())
    throw ContractViolation("compute_h: empty or mismatched inputs");
  for (int i = 0; i < L; ++i)
    if (!std::isfinite(a[i]) || !std::isfinite(b[i]))
      throw ContractViolation("compute_h: non-finite input");

  std::vector<int> order(L);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    if (b[i] != b[j]) return b[i] < b[j];
    if (a[i] != a[j]) return a[i] < a[j];
    return i < j;
  });

  // Among equal slopes only the largest intercept can touch the envelope.
  std::vector<int> lines;
  for (int idx : order) {
    if (!lines.empty() && b[lines.back()] == b[idx]) lines.back() = idx;
    else lines.push_back(idx);
  }

  // Upper-envelope sweep over slope-sorted lines.
  std::vector<int> kept;
  std::vector<double> breaks;
  for (int idx : lines) {
    for (;;) {
      if (kept.empty()) {
        kept.push_back(idx);
        break;
      }
      const int top = kept.back();
      const double z = (a[top] - a[idx]) / (b[idx] - b[top]);
      if (!breaks.empty() && z <= breaks.back()) {
        kept.pop_back();
        breaks.pop_back();
        continue;
      }
      kept.push_back(idx);
      breaks.push_back(z);
      break;
    }
  }

  HResult res;
  res.kept_indices = kept;
  res.breakpoints = breaks;
  double v = 0.0;
  for (std::size_t i = 0; i + 1 < kept.size(); ++i)
    v += (b[kept[i + 1]] - b[kept[i]]) * f_neg(breaks[i]);
  res.value = std::max(0.0, v);
  return res;
}

VoiContext::VoiContext(const GPPosterior& post, const WDistribution& wdist,
                       const Discretization& disc, double lambda_c)
    : post_(post), wdist_(wdist), lambda_c_(lambda_c) {
  L_ = disc.size();
  if (L_ < 1) throw ContractViolation("VoiContext: empty discretization");
  dim_x_ = static_cast<int>(disc.points.front().size());
  grid_cols_.assign(dim_x_, std::vector<double>(L_));
  for (int l = 0; l < L_; ++l)
    for (int k = 0; k < dim_x_; ++k) grid_cols_[k][l] = disc.points[l][k];
  col_ptrs_.resize(dim_x_);
  for (int k = 0; k < dim_x_; ++k) col_ptrs_[k] = grid_cols_[k].data();

  const int n = post_.n();
  Bmat_.resize(L_, n);
  std::vector<double> xp(L_);
  for (int i = 0; i < n; ++i) {
    const auto& obs = post_.training()[i];
    simd::weighted_sqdist_batch(col_ptrs_.data(), obs.point.x.data(),
                                post_.params().alpha_x.data(), dim_x_, L_,
                                xp.data());
    const double wf = post_.params().sigma0_sq *
                      w_moment(wdist_, post_.params().alpha_w, obs.point.w);
    simd::exp_neg_scale(xp.data(), L_, wf);
    for (int l = 0; l < L_; ++l) Bmat_(l, i) = xp[l];
  }
  a_vals_.assign(L_, post_.mu0());
  if (n > 0) {
    const Eigen::VectorXd av = Bmat_ * post_.alpha_vec();
    for (int l = 0; l < L_; ++l) a_vals_[l] += av(l);
    AinvBt_ = post_.solve(Eigen::MatrixXd(Bmat_.transpose()));
  } else {
    AinvBt_.resize(0, L_);
  }
}

VoiContext::VoiContext(const GPPosterior& post, const WDistribution& wdist,
                       const Discretization& disc)
    : VoiContext(post, wdist, disc, default_candidate_noise(post)) {}

std::vector<double> VoiContext::grid_point(int l) const {
  std::vector<double> p(dim_x_);
  for (int k = 0; k < dim_x_; ++k) p[k] = grid_cols_[k][l];
  return p;
}

int VoiContext::argmax_a() const {
  return static_cast<int>(std::max_element(a_vals_.begin(), a_vals_.end()) -
                          a_vals_.begin());
}

std::vector<double> VoiContext::sigma_tilde_batch(
    const DesignPoint& candidate) const {
  const int n = post_.n();
  const double prior_var = post_.params().sigma0_sq;

  Eigen::VectorXd gamma(n), u(n);
  double d2 = prior_var + lambda_c_;
  if (n > 0) {
    gamma = post_.kernel_column(candidate);
    u = post_.solve(gamma);
    d2 -= gamma.dot(u);
  }
  if (!(d2 > 0.0))
    throw DegenerateCandidate(
        "VOI: candidate indistinguishable from existing data");
  const double inv_denom = 1.0 / std::sqrt(d2);

  std::vector<double> b(L_);
  simd::weighted_sqdist_batch(col_ptrs_.data(), candidate.x.data(),
                              post_.params().alpha_x.data(), dim_x_, L_,
                              b.data());
  const double wf_c = post_.params().sigma0_sq *
                      w_moment(wdist_, post_.params().alpha_w, candidate.w);
  simd::exp_neg_scale(b.data(), L_, wf_c);
  if (n > 0) {
    const Eigen::VectorXd Bu = Bmat_ * u;
    for (int l = 0; l < L_; ++l) b[l] = (b[l] - Bu(l)) * inv_denom;
  } else {
    for (int l = 0; l < L_; ++l) b[l] *= inv_denom;
  }
  return b;
}

VOIResult VoiContext::evaluate(const DesignPoint& candidate,
                               bool want_gradient) const {
  const int n = post_.n();
  const int dw = static_cast<int>(candidate.w.size());
  const int nd = dim_x_ + dw;
  const double prior_var = post_.params().sigma0_sq;

  VOIResult res;
  res.gradient.assign(nd, 0.0);

  Eigen::VectorXd gamma(n), u(n);
  double d2 = prior_var + lambda_c_;
  if (n > 0) {
    gamma = post_.kernel_column(candidate);
    u = post_.solve(gamma);
    d2 -= gamma.dot(u);
  }
  if (!(d2 > 0.0)) {
    res.degenerate = true;
    return res;
  }
  const double inv_denom = 1.0 / std::sqrt(d2);

  // b_cand over the grid, then sigma_tilde = (b_cand - Bmat u) / denom.
  std::vector<double> xp(L_);
  simd::weighted_sqdist_batch(col_ptrs_.data(), candidate.x.data(),
                              post_.params().alpha_x.data(), dim_x_, L_,
                              xp.data());
  simd::exp_neg_scale(xp.data(), L_, 1.0);
  const double wf_c = w_moment(wdist_, post_.params().alpha_w, candidate.w);
  const double sw = prior_var * wf_c;

  std::vector<double> bc(L_), b(L_);
  for (int l = 0; l < L_; ++l) bc[l] = sw * xp[l];
  if (n > 0) {
    const Eigen::VectorXd Bu = Bmat_ * u;
    for (int l = 0; l < L_; ++l) b[l] = (bc[l] - Bu(l)) * inv_denom;
  } else {
    for (int l = 0; l < L_; ++l) b[l] = bc[l] * inv_denom;
  }

  HResult h = compute_h(a_vals_, b);
  res.value = h.value;
  res.kept_indices = std::move(h.kept_indices);
  res.breakpoints = std::move(h.breakpoints);
  if (res.kept_indices.size() <= 1 || !want_gradient) return res;

  // Gradients of the kept sigma_tilde entries with respect to the candidate.
  Eigen::MatrixXd Gg;  // n x nd, rows grad gamma_i
  Eigen::VectorXd GgTu;
  if (n > 0) {
    Gg.resize(n, nd);
    for (int i = 0; i < n; ++i) {
      const auto gi = kernel_grad_candidate(post_.params(), candidate,
                                            post_.training()[i].point);
      for (int j = 0; j < nd; ++j) Gg(i, j) = gi[j];
    }
    GgTu = Gg.transpose() * u;  // for the denominator term (beta4 / 2)
  }

  std::vector<double> gw;
  if (dw > 0) gw = w_moment_grad(wdist_, post_.params().alpha_w, candidate.w);

  const double inv_d3 = inv_denom * inv_denom * inv_denom;

  auto grad_b_at = [&](int l, Eigen::VectorXd& out) {
    // grad of B(x_l, cand)
    Eigen::VectorXd gB(nd);
    for (int j = 0; j < dim_x_; ++j)
      gB(j) = 2.0 * post_.params().alpha_x[j] *
              (grid_cols_[j][l] - candidate.x[j]) * bc[l];
    for (int k = 0; k < dw; ++k)
      gB(dim_x_ + k) = prior_var * xp[l] * gw[k];
    if (n == 0) {
      out = gB * inv_denom;
      return;
    }
    const double num = b[l] / inv_denom;  // bc - Bmat u at l
    const Eigen::VectorXd beta3 = gB - Gg.transpose() * AinvBt_.col(l);
    out = inv_denom * beta3 + inv_d3 * num * GgTu;
  };

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(nd);
  Eigen::VectorXd gb_next(nd), gb_cur(nd);
  grad_b_at(res.kept_indices[0], gb_cur);
  for (std::size_t i = 0; i + 1 < res.kept_indices.size(); ++i) {
    grad_b_at(res.kept_indices[i + 1], gb_next);
    grad += (gb_next - gb_cur) * normal_pdf(std::fabs(res.breakpoints[i]));
    gb_cur = gb_next;
  }
  for (int j = 0; j < nd; ++j) res.gradient[j] = grad(j);
  return res;
}

VOIResult compute_voi(const DesignPoint& candidate, const Discretization& disc,
                      const GPPosterior& post, const WDistribution& wdist) {
  VoiContext ctx(post, wdist, disc);
  return ctx.evaluate(candidate);
}

Discretization uniform_grid(const std::vector<double>& lo,
                            const std::vector<double>& hi, int per_dim,
                            int max_total) {
  const int d = static_cast<int>(lo.size());
  int m = std::max(per_dim, 1);
  auto total = [&](int k) {
    double t = 1.0;
    for (int i = 0; i < d; ++i) t *= k;
    return t;
  };
  while (m > 2 && total(m) > max_total) --m;
  Discretization disc;
  std::vector<int> idx(d, 0);
  for (;;) {
    std::vector<double> p(d);
    for (int k = 0; k < d; ++k)
      p[k] = m == 1 ? 0.5 * (lo[k] + hi[k])
                    : lo[k] + (hi[k] - lo[k]) * idx[k] / (m - 1);
    disc.points.push_back(std::move(p));
    int k = 0;
    while (k < d && ++idx[k] == m) idx[k++] = 0;
    if (k == d) break;
  }
  return disc;
}

}  // namespace sbo
