#pragma once

#include <vector>

#include "rdm/noise.hpp"
#include "rdm/schedule.hpp"

namespace rdm {

// Exact distributions of the interpolation-family diffusion
//   q(x_t | x_{t-1}) = beta_t x_{t-1} + (1 - beta_t) q_noise.
// All functions are pure; randomness only enters through an explicit Rng.

// Forward marginal q(x_t | x_0) = alpha_t x_0 + (1 - alpha_t) q_noise.
Categorical q_xt_given_x0(int x0, int t, const AlphaSchedule& sched,
                          const NoiseDistribution& noise);

// Multi-step forward q(x_t | x_s) = (a_t/a_s) x_s + (1 - a_t/a_s) q_noise,
// 0 <= s < t <= T, requires alpha_s > 0.
Categorical q_xt_given_xs(int xs, int s, int t, const AlphaSchedule& sched,
                          const NoiseDistribution& noise);

// Samples each position of x0_seq independently from q(x_t | x_0).
std::vector<int> corrupt(const std::vector<int>& x0_seq, int t,
                         const AlphaSchedule& sched,
                         const NoiseDistribution& noise, Rng& rng);

// q_noise(x_t) = (a_t/a_s) x_t + (1 - a_t/a_s) q_noise: the interpolated
// noise a not-denoised token is resampled from on the jump t -> s.
Categorical noise_given_xt(int xt, int s, int t, const AlphaSchedule& sched,
                           const NoiseDistribution& noise);

// Ground-truth backward transition q(x_s | x_t, x_0) by literal Bayes
// enumeration over all K values of x_s. O(K) per query; this is the trusted
// oracle the branching form is verified against.
Categorical backward_bayes(int xt, int x0, int s, int t,
                           const AlphaSchedule& sched,
                           const NoiseDistribution& noise);

// The same distribution in branching form:
//   x_t = x_0:  lambda1 x_t + (1 - lambda1) q_noise
//   x_t != x_0: lambda2 x_0 + (1 - lambda2) q_noise(x_t).
Categorical backward_branch(int xt, int x0, int s, int t,
                            const AlphaSchedule& sched,
                            const NoiseDistribution& noise);

// Parameterized single-path backward of vanilla absorbing diffusion:
//   x_t = mask: (a_s - a_t)/(1 - a_t) f + (1 - a_s)/(1 - a_t) onehot(mask)
//   else:       onehot(x_t).
Categorical vanilla_backward_absorbing(const Categorical& f, int xt, int s,
                                       int t, const AlphaSchedule& sched,
                                       int mask_id);

// Parameterized backward of vanilla multinomial diffusion (uniform noise),
// single step t -> t-1, marginalized over f in closed form.
Categorical vanilla_backward_multinomial(const Categorical& f, int xt, int t,
                                         const AlphaSchedule& sched, int K);

// Step-gap generalization of the multinomial backward (s < t); the t -> t-1
// form above is the s = t-1 special case.
Categorical vanilla_backward_multinomial_gap(const Categorical& f, int xt,
                                             int s, int t,
                                             const AlphaSchedule& sched,
                                             int K);

}  // namespace rdm
