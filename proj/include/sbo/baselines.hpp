#pragma once

#include "sbo/sbo.hpp"

namespace sbo {

// Rewrites a problem so that w is folded into the unobserved noise: each of
// the M inner samples draws its own w ~ p(w) and z ~ p(z | w).  The identity
// transform when the problem already has no w.
Problem strip_w(const Problem& problem);

// Knowledge Gradient: SBO's w-free specialization (GP directly on G(x)).
// Trajectory-identical to run_sbo on problems with dim_w == 0.
RunRecord run_kg(const Problem& problem, const SBOConfig& config);

// Expected Improvement over the plug-in incumbent (maximum posterior mean
// over A'), on the same GP-on-G model and evaluation budget.
RunRecord run_ei(const Problem& problem, const SBOConfig& config);

// Closed-form EI = s * (z Phi(z) + phi(z)), z = (mu - incumbent) / s.
double expected_improvement(double mu, double var, double incumbent);

}  // namespace sbo
