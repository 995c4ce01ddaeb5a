#include <doctest.h>

#include <cmath>

#include "rdm/sampler.hpp"
#include "rdm/stats.hpp"

using namespace rdm;

namespace {

class FixedDenoiser : public Denoiser {
 public:
  FixedDenoiser(int vocab, std::vector<Categorical> out)
      : vocab_(vocab), out_(std::move(out)) {}
  DenoiserOutput predict(const std::vector<int>& tokens, int,
                         const std::vector<int>*) const override {
    REQUIRE(tokens.size() == out_.size());
    return {out_};
  }
  int vocab() const override { return vocab_; }

 private:
  int vocab_;
  std::vector<Categorical> out_;
};

class TrueX0Denoiser : public Denoiser {
 public:
  TrueX0Denoiser(int vocab, std::vector<int> x0) : vocab_(vocab), x0_(std::move(x0)) {}
  DenoiserOutput predict(const std::vector<int>& tokens, int,
                         const std::vector<int>*) const override {
    REQUIRE(tokens.size() == x0_.size());
    DenoiserOutput out;
    for (int id : x0_) out.per_position.push_back(Categorical::onehot(vocab_, id));
    return out;
  }
  int vocab() const override { return vocab_; }

 private:
  int vocab_;
  std::vector<int> x0_;
};

DiffusionState make_state(std::vector<int> tokens, std::vector<bool> b, int t) {
  DiffusionState s;
  s.tokens = std::move(tokens);
  s.denoised = std::move(b);
  s.t = t;
  s.scores.assign(s.tokens.size(), 0.0);
  s.prev_tokens = s.tokens;
  return s;
}

}  // namespace

TEST_CASE("route_stochastic degenerate and empirical rates") {
  Rng rng(3);
  DiffusionState state = make_state({0, 1, 2, 3}, {false, false, false, false}, 2);
  const RoutingDecision deg = route_stochastic(state, {1.0, 0.0}, rng);
  for (int n = 0; n < 4; ++n) {
    CHECK(deg.v1[n]);
    CHECK_FALSE(deg.v2[n]);
  }
  long v1 = 0, v2 = 0;
  const long draws = 20000;
  for (long i = 0; i < draws; ++i) {
    const RoutingDecision v = route_stochastic(state, {0.5, 0.5}, rng);
    for (int n = 0; n < 4; ++n) {
      v1 += v.v1[n];
      v2 += v.v2[n];
    }
  }
  CHECK(std::abs(double(v1) / (4 * draws) - 0.5) < 0.01);
  CHECK(std::abs(double(v2) / (4 * draws) - 0.5) < 0.01);
}

TEST_CASE("k_schedule") {
  CHECK(k_schedule(KScheduleKind::kCosine, 10, 10, 8) == 0);
  CHECK(k_schedule(KScheduleKind::kLinear, 0, 10, 8) == 8);
  CHECK(k_schedule(KScheduleKind::kCosine, 0, 10, 8) == 8);
  CHECK(k_schedule(KScheduleKind::kLinear, 10, 10, 8) == 0);
  CHECK(k_schedule(KScheduleKind::kCosine, 5, 10, 8) == 5);  // floor(cos(pi/4)*8)
  for (auto kind : {KScheduleKind::kCosine, KScheduleKind::kLinear}) {
    int prev = 100;
    for (int t = 0; t <= 14; ++t) {
      const int k = k_schedule(kind, t, 14, 9);
      CHECK(k <= prev);
      CHECK(k >= 0);
      CHECK(k <= 9);
      prev = k;
    }
  }
}

TEST_CASE("route_adaptive") {
  Rng rng(1);
  DiffusionState state = make_state({0, 0, 0}, {false, false, false}, 3);
  RoutingStrategy opts = RoutingStrategy::adaptive();

  const RoutingDecision top2 =
      route_adaptive(state, {0.9, 0.2, 0.7}, 2, opts, rng);
  CHECK(top2.v1 == std::vector<bool>{true, false, true});
  CHECK(top2.v2 == std::vector<bool>{true, false, true});

  const RoutingDecision none = route_adaptive(state, {0.9, 0.2, 0.7}, 0, opts, rng);
  CHECK(none.v1 == std::vector<bool>{false, false, false});
  const RoutingDecision all = route_adaptive(state, {0.1, 0.1, 0.1}, 3, opts, rng);
  CHECK(all.v1 == std::vector<bool>{true, true, true});

  // ties break toward the lowest index
  const RoutingDecision tie = route_adaptive(state, {0.5, 0.5, 0.5}, 2, opts, rng);
  CHECK(tie.v1 == std::vector<bool>{true, true, false});

  // deterministic without gumbel noise
  const RoutingDecision again = route_adaptive(state, {0.5, 0.5, 0.5}, 2, opts, rng);
  CHECK(again.v1 == tie.v1);
}

TEST_CASE("route_adaptive conservative rule widens v1") {
  Rng rng(1);
  DiffusionState state = make_state({4, 5, 6, 7}, {true, true, true, true}, 3);
  state.scores = {0.9, 0.2, 0.9, 0.3};
  state.prev_tokens = {4, 5, 6, 2};  // position 3 changed last step
  RoutingStrategy opts =
      RoutingStrategy::adaptive(KScheduleKind::kCosine, false, true);
  // new scores: position1 improved (0.3 > 0.2), position2 dropped
  const RoutingDecision v =
      route_adaptive(state, {0.95, 0.3, 0.5, 0.1}, 1, opts, rng);
  CHECK(v.v2 == std::vector<bool>{true, false, false, false});  // top-1 only
  CHECK(v.v1[0]);        // in pool
  CHECK(v.v1[1]);        // score improved
  CHECK_FALSE(v.v1[2]);  // dropped score, unchanged token, not in pool
  CHECK(v.v1[3]);        // token changed on the previous step
}

TEST_CASE("update_b") {
  RoutingDecision v;
  v.v1 = {true, false, false};
  v.v2 = {false, false, true};
  const std::vector<bool> b = {true, true, false};
  CHECK(update_b(b, v) == std::vector<bool>{true, false, true});

  // idempotent under keep-everything routing
  RoutingDecision keep;
  keep.v1 = {true, true, true};
  keep.v2 = {false, false, false};
  CHECK(update_b(b, keep) == b);
  CHECK(update_b(update_b(b, keep), keep) == b);

  RoutingDecision bad;
  bad.v1 = {true};
  bad.v2 = {true};
  CHECK_THROWS_AS(update_b(b, bad), std::invalid_argument);
}

TEST_CASE("predict_x0") {
  Rng rng(7);
  const Categorical f({0.1, 0.7, 0.2});
  CHECK(predict_x0(f, 1.0, DecodeMode::kArgmax, rng) == 1);
  CHECK_THROWS_AS(predict_x0(f, 0.0, DecodeMode::kSample, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(predict_x0(f, -1.0, DecodeMode::kArgmax, rng),
                  std::invalid_argument);

  // argmax tie goes to the lowest index
  CHECK(predict_x0(Categorical({0.4, 0.4, 0.2}), 1.0, DecodeMode::kArgmax,
                   rng) == 0);

  // low temperature concentrates on the mode
  long hits = 0;
  for (int i = 0; i < 10000; ++i)
    hits += predict_x0(f, 0.01, DecodeMode::kSample, rng) == 1;
  CHECK(double(hits) / 10000 > 0.999);

  // tau = 1 reproduces f
  std::vector<long> counts(3, 0);
  const long draws = 100000;
  for (long i = 0; i < draws; ++i)
    ++counts[predict_x0(f, 1.0, DecodeMode::kSample, rng)];
  const ChiSquareResult res = chi_square_statistic(counts, f.probs(), draws);
  CHECK(res.statistic < chi_square_critical(res.dof, 0.001));
}

TEST_CASE("denoise_step deterministic routing limit") {
  // lambda1 = lambda2 = 1: noisy positions take x0_hat, clean ones stay
  const AlphaSchedule sched = AlphaSchedule::linear(4);
  const NoiseDistribution noise = NoiseDistribution::uniform(5);
  const TrueX0Denoiser oracle(5, {2, 3, 1});
  Rng rng(9);
  DiffusionState state = make_state({2, 0, 0}, {true, false, false}, 3);
  const CoeffsProvider ones = [](int, int, int) {
    return RoutingCoefficients{1.0, 1.0};
  };
  const DiffusionState next =
      denoise_step(state, oracle, RoutingStrategy::stochastic(), ones, 1.0,
                   DecodeMode::kArgmax, 2, sched, noise, nullptr, rng);
  CHECK(next.tokens == std::vector<int>{2, 3, 1});
  CHECK(next.denoised == std::vector<bool>{true, true, true});
  CHECK(next.t == 2);
}

TEST_CASE("denoise_step adaptive with k=0 keeps everything noisy") {
  const AlphaSchedule sched = AlphaSchedule::linear(4);
  const NoiseDistribution noise = NoiseDistribution::absorbing(5, 4);
  const TrueX0Denoiser oracle(5, {2, 3, 1});
  Rng rng(11);
  DiffusionState state = make_state({4, 4, 4}, {false, false, false}, 4);
  // target 3: cosine k(3) with T=4, N=3 -> floor(cos(3pi/8)*3) = 1... use
  // linear k(3) = floor((1-3/4)*3) = 0
  const DiffusionState next = denoise_step(
      state, oracle, RoutingStrategy::adaptive(KScheduleKind::kLinear),
      make_coeffs_provider(sched, noise), 1.0, DecodeMode::kArgmax, 3, sched,
      noise, nullptr, rng);
  CHECK(next.denoised == std::vector<bool>{false, false, false});
  // absorbing noise_given_xt from mask is mask again
  CHECK(next.tokens == std::vector<int>{4, 4, 4});
}

TEST_CASE("denoise_step b-tracking under absorbing noise") {
  const int K = 7, N = 6, T = 8;
  const AlphaSchedule sched = AlphaSchedule::linear(T);
  const NoiseDistribution noise = NoiseDistribution::absorbing(K, K - 1);
  const std::vector<int> x0 = {1, 5, 0, 3, 2, 4};
  const TrueX0Denoiser oracle(K, x0);
  const CoeffsProvider coeffs = make_coeffs_provider(sched, noise);
  for (auto strategy : {RoutingStrategy::stochastic(),
                        RoutingStrategy::adaptive(),
                        RoutingStrategy::adaptive(KScheduleKind::kLinear, true,
                                                  true)}) {
    Rng rng(1234);
    for (int trial = 0; trial < 20; ++trial) {
      DiffusionState state = DiffusionState::init(N, T, noise, rng);
      int t = T;
      while (t > 0) {
        const int target = t - 1 - rng.uniform_int(std::min(2, t));
        const int s = std::max(0, target);
        state = denoise_step(state, oracle, strategy, coeffs, 1.0,
                             DecodeMode::kArgmax, s, sched, noise, nullptr,
                             rng);
        t = s;
        for (int n = 0; n < N; ++n)
          CHECK(state.denoised[n] == (state.tokens[n] == x0[n]));
      }
    }
  }
}

TEST_CASE("denoise_step rejects mismatched denoiser output") {
  const AlphaSchedule sched = AlphaSchedule::linear(4);
  const NoiseDistribution noise = NoiseDistribution::uniform(4);
  const TrueX0Denoiser bad(4, {0, 1});  // two positions
  Rng rng(2);
  DiffusionState state = make_state({0, 1, 2}, {false, false, false}, 3);
  CHECK_THROWS(denoise_step(state, bad, RoutingStrategy::stochastic(),
                            make_coeffs_provider(sched, noise), 1.0,
                            DecodeMode::kArgmax, 2, sched, noise, nullptr,
                            rng));
}

TEST_CASE("sample with one-step schedule returns the argmax of f(x_T)") {
  const AlphaSchedule sched = AlphaSchedule::linear(6);
  const NoiseDistribution noise = NoiseDistribution::uniform(4);
  std::vector<Categorical> fixed = {Categorical({0.1, 0.6, 0.2, 0.1}),
                                    Categorical({0.7, 0.1, 0.1, 0.1}),
                                    Categorical({0.2, 0.2, 0.5, 0.1})};
  const FixedDenoiser denoiser(4, fixed);
  Rng rng(5);
  SamplerOptions opts;
  opts.strategy = RoutingStrategy::adaptive();
  const std::vector<int> out =
      sample(denoiser, 3, {6, 0}, opts, sched, noise, nullptr, rng);
  CHECK(out == std::vector<int>{1, 0, 2});
}

TEST_CASE("sample validates the step sequence") {
  const AlphaSchedule sched = AlphaSchedule::linear(6);
  const NoiseDistribution noise = NoiseDistribution::uniform(4);
  const TrueX0Denoiser oracle(4, {0, 1});
  Rng rng(5);
  SamplerOptions opts;
  CHECK_THROWS_AS(sample(oracle, 2, {5, 0}, opts, sched, noise, nullptr, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(sample(oracle, 2, {6, 3}, opts, sched, noise, nullptr, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(sample(oracle, 2, {6, 3, 3, 0}, opts, sched, noise, nullptr,
                         rng),
                  std::invalid_argument);
}

TEST_CASE("sample is reproducible under a fixed seed") {
  const AlphaSchedule sched = AlphaSchedule::linear(8);
  const NoiseDistribution noise = NoiseDistribution::uniform(6);
  std::vector<Categorical> fixed(4, Categorical({0.3, 0.2, 0.1, 0.1, 0.2, 0.1}));
  const FixedDenoiser denoiser(6, fixed);
  SamplerOptions opts;
  opts.strategy = RoutingStrategy::stochastic();
  opts.mode = DecodeMode::kSample;
  Rng rng1(77), rng2(77);
  const auto a = sample(denoiser, 4, {8, 6, 4, 2, 0}, opts, sched, noise,
                        nullptr, rng1);
  const auto b = sample(denoiser, 4, {8, 6, 4, 2, 0}, opts, sched, noise,
                        nullptr, rng2);
  CHECK(a == b);
}

TEST_CASE("adaptive sampling ends with every position denoised") {
  const AlphaSchedule sched = AlphaSchedule::linear(10);
  const NoiseDistribution noise = NoiseDistribution::absorbing(5, 4);
  const TrueX0Denoiser oracle(5, {0, 1, 2, 3});
  const CoeffsProvider coeffs = make_coeffs_provider(sched, noise);
  Rng rng(6);
  DiffusionState state = DiffusionState::init(4, 10, noise, rng);
  for (int s : {8, 6, 4, 2, 0})
    state = denoise_step(state, oracle, RoutingStrategy::adaptive(), coeffs,
                         1.0, DecodeMode::kArgmax, s, sched, noise, nullptr,
                         rng);
  for (int n = 0; n < 4; ++n) CHECK(state.denoised[n]);
}

TEST_CASE("sample_vanilla absorbing freezes decoded tokens") {
  const int K = 6, N = 5, T = 10;
  const AlphaSchedule sched = AlphaSchedule::linear(T);
  const NoiseDistribution noise = NoiseDistribution::absorbing(K, K - 1);
  const std::vector<int> x0 = {0, 1, 2, 3, 4};
  const TrueX0Denoiser oracle(K, x0);
  Rng rng(8);
  // with the true-x0 oracle every decoded token equals x0, so the final output
  // must be exactly x0 at any step count
  const auto out = sample_vanilla(oracle, N, {10, 8, 6, 4, 2, 0},
                                  VanillaKind::kAbsorbing, 1.0,
                                  DecodeMode::kArgmax, sched, noise, nullptr,
                                  rng);
  CHECK(out == x0);
}

TEST_CASE("sample_vanilla multinomial near-1 alpha copies states") {
  // schedule staying near 1 gives per-step copy probability > 0.99 (K large)
  const AlphaSchedule high({1.0, 0.998, 0.996, 0.994, 0.992, 0.99});
  const int K = 10000;
  const NoiseDistribution noise = NoiseDistribution::uniform(K);
  std::vector<Categorical> fixed(3, Categorical::uniform(K));
  const FixedDenoiser denoiser(K, fixed);
  Rng rng(12);
  long copies = 0, steps = 0;
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<int> tokens(3);
    for (int& id : tokens) id = noise.sample(rng);
    for (int t = 5; t >= 1; --t) {
      const DenoiserOutput f = denoiser.predict(tokens, t, nullptr);
      for (int n = 0; n < 3; ++n) {
        const int next =
            vanilla_backward_multinomial(f.per_position[n], tokens[n], t, high,
                                         K)
                .sample(rng);
        copies += next == tokens[n];
        ++steps;
        tokens[n] = next;
      }
    }
  }
  CHECK(double(copies) / steps > 0.99);
}

TEST_CASE("rerank") {
  std::vector<Categorical> fixed = {Categorical({0.8, 0.1, 0.1}),
                                    Categorical({0.1, 0.8, 0.1})};
  const FixedDenoiser denoiser(3, fixed);
  const std::vector<int> good = {0, 1};
  const std::vector<int> bad = {2, 2};
  CHECK(rerank({bad}, denoiser, nullptr) == bad);           // single candidate
  CHECK(rerank({bad, good, bad}, denoiser, nullptr) == good);
  CHECK(rerank({good, good}, denoiser, nullptr) == good);   // first of ties
  CHECK_THROWS_AS(rerank({}, denoiser, nullptr), std::invalid_argument);
}

TEST_CASE("make_step_sequence") {
  CHECK(make_step_sequence(20, 10) ==
        std::vector<int>{20, 18, 16, 14, 12, 10, 8, 6, 4, 2, 0});
  CHECK(make_step_sequence(6, 1) == std::vector<int>{6, 0});
  CHECK(make_step_sequence(6, 6) == std::vector<int>{6, 5, 4, 3, 2, 1, 0});
  CHECK(make_step_sequence(7, 3) == std::vector<int>{7, 5, 2, 0});
  CHECK_THROWS_AS(make_step_sequence(5, 6), std::invalid_argument);
  CHECK_THROWS_AS(make_step_sequence(5, 0), std::invalid_argument);
}
