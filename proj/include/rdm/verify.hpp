#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rdm/processes.hpp"

namespace rdm {

// Outcome of one identity or statistical check. Deterministic checks pass
// iff max_error <= tolerance; statistical checks normalize their test
// statistic by the critical value so the same rule applies.
struct CheckReport {
  std::string name;
  bool passed = false;
  double max_error = 0.0;
  double tolerance = 0.0;
  long cases_run = 0;
};

using BranchFn = std::function<Categorical(
    int xt, int x0, int s, int t, const AlphaSchedule& sched,
    const NoiseDistribution& noise)>;

// Exhaustive branching-form vs Bayes-enumeration comparison over
// K in {2..8}, uniform/absorbing/seeded-custom noise, linear schedules
// T in {2,4,6}, all valid (x_t, x0, s, t). Tolerance 1e-12 on TV distance.
CheckReport check_prop1();
// Same sweep against a caller-supplied branching implementation (used by the
// mutation-canary test).
CheckReport check_prop1_with(const BranchFn& branch);

// Analytic marginalization of the two-step routed construction (enumerate the
// Bernoulli routing variable, mix the component distributions) vs the Bayes
// oracle, over the same sweep.
CheckReport check_reparam_marginal();

// Cross-entropy form of the step loss vs the teacher-forced expected-KL form,
// random cases per noise kind. Tolerance 1e-10.
CheckReport check_loss_equivalence(std::uint64_t seed);

// sum_{x_t} q(x_s|x_t,x0) q(x_t|x0) = q(x_s|x0), exhaustive. Tolerance 1e-12.
CheckReport check_chain_consistency();

// Vanilla multinomial copy probability >= 0.99 at K=10000 and near-1 alpha;
// the routed form keeps denoise probability lambda2 = 0.5 there; small-alpha
// regime stays mobile.
CheckReport check_multinomial_degeneracy();

// Chi-square goodness-of-fit (alpha 0.001, Bonferroni across subtests) of
// corrupt, stochastic routing, tempered predictions, and single-token
// denoise_step marginals against their exact distributions; >= 1e5 draws.
CheckReport check_sampler_statistics(std::uint64_t seed);

// Coupled (conditioned) loss estimator mean vs independent estimator mean
// within 3 combined standard errors over >= 1e5 draws each.
CheckReport check_conditioned_unbiased(std::uint64_t seed);

// Analytic gradients vs central finite differences (step 1e-5) on 2000
// sampled parameters; relative tolerance 1e-4.
CheckReport check_gradients(std::uint64_t seed);

// Runs every check; deterministic ones are seed-independent.
std::vector<CheckReport> run_all_checks(std::uint64_t seed);

// Fixed-width human-readable table.
std::string format_report_table(const std::vector<CheckReport>& reports);

}  // namespace rdm
