#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "rdm/denoiser.hpp"

namespace rdm {

// Sequence state during reverse diffusion: tokens x_{t,1:N}, the denoised
// flags b_{t,1:N}, the current step, and the scores/tokens of the previous
// iteration (needed by the conservative routing rule).
struct DiffusionState {
  std::vector<int> tokens;
  std::vector<bool> denoised;
  int t = 0;
  std::vector<double> scores;     // previous-iteration confidence, init 0
  std::vector<int> prev_tokens;   // previous-iteration tokens, init = tokens

  int length() const { return static_cast<int>(tokens.size()); }

  // x_T ~ q_noise per position, all b false.
  static DiffusionState init(int length, int T, const NoiseDistribution& noise,
                             Rng& rng);
};

// Per-position routing indicators v^(1) (denoised stays) and v^(2) (noisy
// gets denoised).
struct RoutingDecision {
  std::vector<bool> v1;
  std::vector<bool> v2;
};

enum class KScheduleKind { kCosine, kLinear };
enum class DecodeMode { kArgmax, kSample };

struct RoutingStrategy {
  enum class Kind { kStochastic, kAdaptiveTopK };
  Kind kind = Kind::kAdaptiveTopK;
  // adaptive options
  KScheduleKind k_schedule = KScheduleKind::kCosine;
  bool gumbel = false;
  bool conservative_v1 = false;

  static RoutingStrategy stochastic() {
    RoutingStrategy s;
    s.kind = Kind::kStochastic;
    return s;
  }
  static RoutingStrategy adaptive(KScheduleKind ks = KScheduleKind::kCosine,
                                  bool gumbel = false,
                                  bool conservative = false) {
    RoutingStrategy s;
    s.kind = Kind::kAdaptiveTopK;
    s.k_schedule = ks;
    s.gumbel = gumbel;
    s.conservative_v1 = conservative;
    return s;
  }
};

// v1[n] ~ Bernoulli(lambda1), v2[n] ~ Bernoulli(lambda2), independent per
// position. Draw order: v1 then v2, positions in index order.
RoutingDecision route_stochastic(const DiffusionState& state,
                                 const RoutingCoefficients& coeffs, Rng& rng);

// Number of positions to hold denoised at step t: cosine floor(cos(pi t/2T) N)
// or linear floor((1 - t/T) N).
int k_schedule(KScheduleKind kind, int t, int T, int N);

// Top-k routing: P = indices of the k largest (optionally Gumbel-perturbed)
// scores, ties to the lowest index; v1 = v2 = membership in P. The
// conservative variant additionally keeps v1[n] = 1 when the score improved
// on the previous iteration or the token changed.
RoutingDecision route_adaptive(const DiffusionState& state,
                               const std::vector<double>& new_scores, int k,
                               const RoutingStrategy& opts, Rng& rng);

// b' = (b AND v1) OR v2, elementwise.
std::vector<bool> update_b(const std::vector<bool>& b,
                           const RoutingDecision& v);

// Argmax of f (lowest index on ties), or a draw from softmax(log f / tau).
int predict_x0(const Categorical& f, double tau, DecodeMode mode, Rng& rng);

// Computes lambda1/lambda2 for the jump t -> s given the observed token.
using CoeffsProvider =
    std::function<RoutingCoefficients(int s, int t, int token)>;

// Default provider built from the schedule and noise distribution.
CoeffsProvider make_coeffs_provider(const AlphaSchedule& sched,
                                    const NoiseDistribution& noise);

// One reverse transition state.t -> target_s following the reparameterized
// two-branch update, then the recursive b update. Scores are refreshed from
// the denoiser output (max entry per position).
DiffusionState denoise_step(const DiffusionState& state,
                            const Denoiser& denoiser,
                            const RoutingStrategy& strategy,
                            const CoeffsProvider& coeffs, double tau,
                            DecodeMode mode, int target_s,
                            const AlphaSchedule& sched,
                            const NoiseDistribution& noise,
                            const std::vector<int>* condition, Rng& rng);

struct SamplerOptions {
  RoutingStrategy strategy;
  double tau = 1.0;
  DecodeMode mode = DecodeMode::kArgmax;
};

// Full reverse loop over a step sequence T = s_0 > s_1 > ... > 0.
std::vector<int> sample(const Denoiser& denoiser, int length,
                        const std::vector<int>& step_sequence,
                        const SamplerOptions& opts, const AlphaSchedule& sched,
                        const NoiseDistribution& noise,
                        const std::vector<int>* condition, Rng& rng);

enum class VanillaKind { kAbsorbing, kMultinomial };

// Ancestral sampling through the single-path vanilla backward kernels;
// baseline for ablations.
std::vector<int> sample_vanilla(const Denoiser& denoiser, int length,
                                const std::vector<int>& step_sequence,
                                VanillaKind kind, double tau, DecodeMode mode,
                                const AlphaSchedule& sched,
                                const NoiseDistribution& noise,
                                const std::vector<int>* condition, Rng& rng);

// Picks the candidate with the highest mean per-position log f at t = 1;
// ties go to the first occurrence.
std::vector<int> rerank(const std::vector<std::vector<int>>& candidates,
                        const Denoiser& denoiser,
                        const std::vector<int>* condition);

// Evenly spaced decreasing step list from T to 0 with `count` transitions.
std::vector<int> make_step_sequence(int T, int count);

}  // namespace rdm
