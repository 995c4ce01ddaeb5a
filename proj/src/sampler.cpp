#include "rdm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace rdm {

DiffusionState DiffusionState::init(int length, int T,
                                    const NoiseDistribution& noise, Rng& rng) {
  if (length < 1) throw std::invalid_argument("state needs length >= 1");
  DiffusionState s;
  s.tokens.resize(length);
  for (int n = 0; n < length; ++n) s.tokens[n] = noise.sample(rng);
  s.denoised.assign(length, false);
  s.t = T;
  s.scores.assign(length, 0.0);
  s.prev_tokens = s.tokens;
  return s;
}

RoutingDecision route_stochastic(const DiffusionState& state,
                                 const RoutingCoefficients& coeffs, Rng& rng) {
  const int N = state.length();
  RoutingDecision v;
  v.v1.resize(N);
  v.v2.resize(N);
  for (int n = 0; n < N; ++n) v.v1[n] = rng.bernoulli(coeffs.lambda1);
  for (int n = 0; n < N; ++n) v.v2[n] = rng.bernoulli(coeffs.lambda2);
  return v;
}

int k_schedule(KScheduleKind kind, int t, int T, int N) {
  if (t < 0 || t > T) throw std::invalid_argument("k_schedule: t out of range");
  const double frac = static_cast<double>(t) / T;
  double v = 0.0;
  switch (kind) {
    case KScheduleKind::kCosine:
      v = std::cos(std::numbers::pi * frac / 2.0);
      break;
    case KScheduleKind::kLinear:
      v = 1.0 - frac;
      break;
  }
  const int k = static_cast<int>(std::floor(v * N));
  return std::clamp(k, 0, N);
}

namespace {

// Indices of the k largest values, ties to the lowest index.
std::vector<int> top_k_indices(const std::vector<double>& values, int k) {
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  });
  order.resize(k);
  return order;
}

}  // namespace

RoutingDecision route_adaptive(const DiffusionState& state,
                               const std::vector<double>& new_scores, int k,
                               const RoutingStrategy& opts, Rng& rng) {
  const int N = state.length();
  if (static_cast<int>(new_scores.size()) != N)
    throw std::invalid_argument("route_adaptive: score length mismatch");
  if (k < 0 || k > N) throw std::invalid_argument("route_adaptive: bad k");

  std::vector<double> ranked = new_scores;
  if (opts.gumbel)
    for (double& s : ranked) s += rng.gumbel();

  std::vector<bool> in_pool(N, false);
  for (int idx : top_k_indices(ranked, k)) in_pool[idx] = true;

  RoutingDecision v;
  v.v1.assign(in_pool.begin(), in_pool.end());
  v.v2.assign(in_pool.begin(), in_pool.end());
  if (opts.conservative_v1) {
    for (int n = 0; n < N; ++n)
      if (new_scores[n] > state.scores[n] ||
          state.tokens[n] != state.prev_tokens[n])
        v.v1[n] = true;
  }
  return v;
}

std::vector<bool> update_b(const std::vector<bool>& b,
                           const RoutingDecision& v) {
  if (b.size() != v.v1.size() || b.size() != v.v2.size())
    throw std::invalid_argument("update_b: length mismatch");
  std::vector<bool> out(b.size());
  for (std::size_t n = 0; n < b.size(); ++n)
    out[n] = (b[n] && v.v1[n]) || v.v2[n];
  return out;
}

int predict_x0(const Categorical& f, double tau, DecodeMode mode, Rng& rng) {
  if (!(tau > 0.0)) throw std::invalid_argument("predict_x0: tau must be > 0");
  if (mode == DecodeMode::kArgmax) return f.argmax();
  // softmax(log f / tau), computed stably in log space
  std::vector<double> w(f.size());
  double mx = -HUGE_VAL;
  for (int j = 0; j < f.size(); ++j) {
    w[j] = f[j] > 0.0 ? std::log(f[j]) / tau : -HUGE_VAL;
    mx = std::max(mx, w[j]);
  }
  double total = 0.0;
  for (double& x : w) {
    x = std::exp(x - mx);
    total += x;
  }
  for (double& x : w) x /= total;
  return Categorical(std::move(w)).sample(rng);
}

CoeffsProvider make_coeffs_provider(const AlphaSchedule& sched,
                                    const NoiseDistribution& noise) {
  return [&sched, &noise](int s, int t, int token) {
    RoutingCoefficients c;
    c.lambda1 = lambda1(sched, s, t, noise.prob(token));
    c.lambda2 = lambda2(sched, s, t);
    return c;
  };
}

DiffusionState denoise_step(const DiffusionState& state,
                            const Denoiser& denoiser,
                            const RoutingStrategy& strategy,
                            const CoeffsProvider& coeffs, double tau,
                            DecodeMode mode, int target_s,
                            const AlphaSchedule& sched,
                            const NoiseDistribution& noise,
                            const std::vector<int>* condition, Rng& rng) {
  const int N = state.length();
  const int t = state.t;
  if (!(0 <= target_s && target_s < t))
    throw std::invalid_argument("denoise_step: need 0 <= target_s < t");

  const DenoiserOutput f = denoiser.predict(state.tokens, t, condition);
  if (f.length() != N)
    throw std::invalid_argument("denoise_step: denoiser output length mismatch");

  std::vector<double> new_scores(N);
  for (int n = 0; n < N; ++n)
    new_scores[n] = f.per_position[n][f.per_position[n].argmax()];

  std::vector<int> x0_hat(N);
  for (int n = 0; n < N; ++n)
    x0_hat[n] = predict_x0(f.per_position[n], tau, mode, rng);

  RoutingDecision v;
  if (strategy.kind == RoutingStrategy::Kind::kStochastic) {
    v.v1.resize(N);
    v.v2.resize(N);
    for (int n = 0; n < N; ++n) {
      const RoutingCoefficients c = coeffs(target_s, t, state.tokens[n]);
      v.v1[n] = rng.bernoulli(c.lambda1);
      v.v2[n] = rng.bernoulli(c.lambda2);
    }
  } else {
    const int k = k_schedule(strategy.k_schedule, target_s, sched.T(), N);
    v = route_adaptive(state, new_scores, k, strategy, rng);
  }

  DiffusionState next;
  next.tokens.resize(N);
  for (int n = 0; n < N; ++n) {
    if (state.denoised[n]) {
      next.tokens[n] = v.v1[n] ? state.tokens[n] : noise.sample(rng);
    } else {
      next.tokens[n] =
          v.v2[n] ? x0_hat[n]
                  : noise_given_xt(state.tokens[n], target_s, t, sched, noise)
                        .sample(rng);
    }
  }
  next.denoised = update_b(state.denoised, v);
  next.t = target_s;
  next.scores = std::move(new_scores);
  next.prev_tokens = state.tokens;
  return next;
}

namespace {

void check_step_sequence(const std::vector<int>& steps, int T) {
  if (steps.size() < 2 || steps.front() != T || steps.back() != 0)
    throw std::invalid_argument("step sequence must run from T to 0");
  for (std::size_t i = 1; i < steps.size(); ++i)
    if (!(steps[i] < steps[i - 1]))
      throw std::invalid_argument("step sequence must be strictly decreasing");
}

}  // namespace

std::vector<int> sample(const Denoiser& denoiser, int length,
                        const std::vector<int>& step_sequence,
                        const SamplerOptions& opts, const AlphaSchedule& sched,
                        const NoiseDistribution& noise,
                        const std::vector<int>* condition, Rng& rng) {
  check_step_sequence(step_sequence, sched.T());
  DiffusionState state = DiffusionState::init(length, sched.T(), noise, rng);
  const CoeffsProvider coeffs = make_coeffs_provider(sched, noise);
  for (std::size_t i = 1; i < step_sequence.size(); ++i)
    state = denoise_step(state, denoiser, opts.strategy, coeffs, opts.tau,
                         opts.mode, step_sequence[i], sched, noise, condition,
                         rng);
  return state.tokens;
}

std::vector<int> sample_vanilla(const Denoiser& denoiser, int length,
                                const std::vector<int>& step_sequence,
                                VanillaKind kind, double tau, DecodeMode mode,
                                const AlphaSchedule& sched,
                                const NoiseDistribution& noise,
                                const std::vector<int>* condition, Rng& rng) {
  check_step_sequence(step_sequence, sched.T());
  if (kind == VanillaKind::kAbsorbing &&
      noise.kind() != NoiseDistribution::Kind::kAbsorbing)
    throw std::invalid_argument("vanilla absorbing sampling needs absorbing noise");
  if (kind == VanillaKind::kMultinomial &&
      noise.kind() != NoiseDistribution::Kind::kUniform)
    throw std::invalid_argument("vanilla multinomial sampling needs uniform noise");
  (void)tau;
  (void)mode;

  std::vector<int> tokens(length);
  for (int n = 0; n < length; ++n) tokens[n] = noise.sample(rng);
  for (std::size_t i = 1; i < step_sequence.size(); ++i) {
    const int t = step_sequence[i - 1];
    const int s = step_sequence[i];
    const DenoiserOutput f = denoiser.predict(tokens, t, condition);
    if (f.length() != length)
      throw std::invalid_argument("sample_vanilla: output length mismatch");
    std::vector<int> next(length);
    for (int n = 0; n < length; ++n) {
      const Categorical p =
          kind == VanillaKind::kAbsorbing
              ? vanilla_backward_absorbing(f.per_position[n], tokens[n], s, t,
                                           sched, noise.mask_id())
              : vanilla_backward_multinomial_gap(f.per_position[n], tokens[n],
                                                 s, t, sched, noise.vocab());
      next[n] = p.sample(rng);
    }
    tokens = std::move(next);
  }
  return tokens;
}

std::vector<int> rerank(const std::vector<std::vector<int>>& candidates,
                        const Denoiser& denoiser,
                        const std::vector<int>* condition) {
  if (candidates.empty())
    throw std::invalid_argument("rerank: empty candidate list");
  int best = 0;
  double best_score = -HUGE_VAL;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const std::vector<int>& cand = candidates[c];
    const DenoiserOutput f = denoiser.predict(cand, 1, condition);
    double acc = 0.0;
    for (std::size_t n = 0; n < cand.size(); ++n) {
      const double p = f.per_position[n][cand[n]];
      acc += p > 0.0 ? std::log(p) : -HUGE_VAL;
    }
    const double score = acc / static_cast<double>(cand.size());
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(c);
    }
  }
  return candidates[best];
}

std::vector<int> make_step_sequence(int T, int count) {
  if (count < 1 || count > T)
    throw std::invalid_argument("step count must be in [1, T]");
  std::vector<int> steps;
  steps.push_back(T);
  for (int i = 1; i <= count; ++i) {
    const int s = static_cast<int>(
        std::llround(static_cast<double>(T) * (count - i) / count));
    if (s < steps.back()) steps.push_back(s);
  }
  if (steps.back() != 0) steps.push_back(0);
  return steps;
}

}  // namespace rdm
