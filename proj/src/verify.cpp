#include "rdm/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>

#include "rdm/stats.hpp"
#include "rdm/trainer.hpp"

namespace rdm {

namespace {

constexpr double kAlphaSuite = 0.001;
constexpr int kChiSquareSubtests = 7;  // Bonferroni divisor
constexpr long kDrawsPerSubtest = 100000;

std::vector<int> sweep_T() { return {2, 4, 6}; }

std::vector<NoiseDistribution> sweep_noises(int K) {
  std::vector<NoiseDistribution> out;
  out.push_back(NoiseDistribution::uniform(K));
  out.push_back(NoiseDistribution::absorbing(K, K - 1));
  Rng rng(0x5eedULL * 1000003ULL + static_cast<std::uint64_t>(K));
  for (int i = 0; i < 3; ++i) {
    std::vector<double> w(K);
    double total = 0.0;
    for (double& x : w) {
      x = 0.05 + rng.uniform();
      total += x;
    }
    for (double& x : w) x /= total;
    out.push_back(NoiseDistribution::custom(Categorical(std::move(w))));
  }
  return out;
}

// Eq.-3 marginal built by explicit enumeration of the routing variable:
// a Bernoulli-weighted mixture of the two branch component distributions.
Categorical two_step_marginal(int xt, int x0, int s, int t,
                              const AlphaSchedule& sched,
                              const NoiseDistribution& noise) {
  const int K = noise.vocab();
  std::vector<double> p(K, 0.0);
  if (xt == x0) {
    const double l1 = lambda1(sched, s, t, noise.prob(xt));
    const Categorical keep = Categorical::onehot(K, xt);
    for (int j = 0; j < K; ++j)
      p[j] = l1 * keep[j] + (1.0 - l1) * noise.prob(j);
  } else {
    const double l2 = lambda2(sched, s, t);
    const Categorical denoised = Categorical::onehot(K, x0);
    const Categorical stay = noise_given_xt(xt, s, t, sched, noise);
    for (int j = 0; j < K; ++j)
      p[j] = l2 * denoised[j] + (1.0 - l2) * stay[j];
  }
  return Categorical(std::move(p));
}

using PairFn = std::function<double(int xt, int x0, int s, int t,
                                    const AlphaSchedule& sched,
                                    const NoiseDistribution& noise)>;

// Runs fn over every valid (K, noise, T, s, t, x0, x_t) of the standard sweep
// and reports the largest returned error.
CheckReport sweep_backward_cases(const std::string& name, double tolerance,
                                 const PairFn& fn) {
  CheckReport report;
  report.name = name;
  report.tolerance = tolerance;
  for (int K = 2; K <= 8; ++K) {
    for (const NoiseDistribution& noise : sweep_noises(K)) {
      for (int T : sweep_T()) {
        const AlphaSchedule sched = AlphaSchedule::linear(T);
        for (int t = 1; t <= T; ++t) {
          for (int s = 0; s < t; ++s) {
            for (int x0 = 0; x0 < K; ++x0) {
              const Categorical reach = q_xt_given_x0(x0, t, sched, noise);
              for (int xt = 0; xt < K; ++xt) {
                if (reach[xt] == 0.0) continue;
                report.max_error = std::max(
                    report.max_error, fn(xt, x0, s, t, sched, noise));
                ++report.cases_run;
              }
            }
          }
        }
      }
    }
  }
  report.passed = report.max_error <= tolerance;
  return report;
}

}  // namespace

CheckReport check_prop1() {
  return check_prop1_with([](int xt, int x0, int s, int t,
                             const AlphaSchedule& sched,
                             const NoiseDistribution& noise) {
    return backward_branch(xt, x0, s, t, sched, noise);
  });
}

CheckReport check_prop1_with(const BranchFn& branch) {
  return sweep_backward_cases(
      "prop1_equivalence", 1e-12,
      [&branch](int xt, int x0, int s, int t, const AlphaSchedule& sched,
                const NoiseDistribution& noise) {
        return tv_distance(branch(xt, x0, s, t, sched, noise),
                           backward_bayes(xt, x0, s, t, sched, noise));
      });
}

CheckReport check_reparam_marginal() {
  return sweep_backward_cases(
      "reparam_marginal", 1e-12,
      [](int xt, int x0, int s, int t, const AlphaSchedule& sched,
         const NoiseDistribution& noise) {
        return tv_distance(two_step_marginal(xt, x0, s, t, sched, noise),
                           backward_bayes(xt, x0, s, t, sched, noise));
      });
}

namespace {

// Teacher-forced expected-KL form of the step-t loss for one position:
// E_{q(v)} KL(q(x_{t-1}|v, x_t, x_0) || p_theta(x_{t-1}|v, x_t)) with
// p_theta(v) = q(v).
double kl_form_loss(const Categorical& f, int x0, int xt, int t,
                    const AlphaSchedule& sched,
                    const NoiseDistribution& noise) {
  const int K = noise.vocab();
  if (xt == x0) {
    const double l1 = lambda1(sched, t - 1, t, noise.prob(xt));
    const Categorical keep = Categorical::onehot(K, xt);
    const double kl_keep = kl_divergence(keep, keep);
    const double kl_noise =
        kl_divergence(noise.distribution(), noise.distribution());
    return l1 * kl_keep + (1.0 - l1) * kl_noise;
  }
  const double l2 = lambda2(sched, t - 1, t);
  const Categorical target = Categorical::onehot(K, x0);
  const Categorical stay = noise_given_xt(xt, t - 1, t, sched, noise);
  return l2 * kl_divergence(target, f) + (1.0 - l2) * kl_divergence(stay, stay);
}

Categorical random_simplex_point(int K, Rng& rng) {
  std::vector<double> w(K);
  double total = 0.0;
  for (double& x : w) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    x = -std::log(u);
    total += x;
  }
  for (double& x : w) x /= total;
  return Categorical(std::move(w));
}

}  // namespace

CheckReport check_loss_equivalence(std::uint64_t seed) {
  CheckReport report;
  report.name = "loss_equivalence";
  report.tolerance = 1e-10;
  Rng rng(seed);
  const int cases_per_kind = 1000;
  for (int kind = 0; kind < 3; ++kind) {
    for (int c = 0; c < cases_per_kind; ++c) {
      const int K = 2 + rng.uniform_int(7);
      const int T = sweep_T()[rng.uniform_int(3)];
      const AlphaSchedule sched = AlphaSchedule::linear(T);
      NoiseDistribution noise =
          kind == 0   ? NoiseDistribution::uniform(K)
          : kind == 1 ? NoiseDistribution::absorbing(K, K - 1)
                      : NoiseDistribution::custom(random_simplex_point(K, rng));
      const int t = 1 + rng.uniform_int(T);
      const int N = 1 + rng.uniform_int(4);

      std::vector<int> x0_seq(N), xt_seq(N);
      DenoiserOutput f_out;
      double kl_total = 0.0;
      for (int n = 0; n < N; ++n) {
        x0_seq[n] = rng.uniform_int(K);
        xt_seq[n] = q_xt_given_x0(x0_seq[n], t, sched, noise).sample(rng);
        f_out.per_position.push_back(random_simplex_point(K, rng));
        kl_total += kl_form_loss(f_out.per_position[n], x0_seq[n], xt_seq[n],
                                 t, sched, noise);
      }
      const LossResult ce = loss_simple(f_out, x0_seq, xt_seq, t,
                                        ReweightingScheme::kOriginal, sched,
                                        /*label_smoothing=*/0.0);
      report.max_error =
          std::max(report.max_error, std::abs(ce.report.loss - kl_total));
      ++report.cases_run;
    }
  }
  report.passed = report.max_error <= report.tolerance;
  return report;
}

CheckReport check_chain_consistency() {
  CheckReport report;
  report.name = "chain_consistency";
  report.tolerance = 1e-12;
  for (int K = 2; K <= 8; ++K) {
    for (const NoiseDistribution& noise : sweep_noises(K)) {
      for (int T : sweep_T()) {
        const AlphaSchedule sched = AlphaSchedule::linear(T);
        for (int t = 1; t <= T; ++t) {
          for (int s = 0; s < t; ++s) {
            for (int x0 = 0; x0 < K; ++x0) {
              const Categorical at_t = q_xt_given_x0(x0, t, sched, noise);
              const Categorical at_s = q_xt_given_x0(x0, s, sched, noise);
              std::vector<double> mixed(K, 0.0);
              for (int xt = 0; xt < K; ++xt) {
                if (at_t[xt] == 0.0) continue;
                const Categorical back =
                    backward_bayes(xt, x0, s, t, sched, noise);
                for (int j = 0; j < K; ++j) mixed[j] += at_t[xt] * back[j];
              }
              for (int j = 0; j < K; ++j)
                report.max_error = std::max(report.max_error,
                                            std::abs(mixed[j] - at_s[j]));
              ++report.cases_run;
            }
          }
        }
      }
    }
  }
  report.passed = report.max_error <= report.tolerance;
  return report;
}

CheckReport check_multinomial_degeneracy() {
  CheckReport report;
  report.name = "multinomial_degeneracy";
  report.tolerance = 0.0;
  const int K = 10000;
  const Categorical f = Categorical::uniform(K);

  // near-1 alpha regime: the vanilla kernel collapses onto the copy branch
  const AlphaSchedule high({1.0, 0.995, 0.99});
  const Categorical vanilla = vanilla_backward_multinomial(f, 0, 2, high, K);
  double violation = std::max(0.0, 0.99 - vanilla[0]);

  // under the routed form the same schedule still denoises with prob lambda2
  const double l2 = lambda2(high, 1, 2);
  violation = std::max(violation, std::abs(l2 - 0.5) - 1e-12);
  const NoiseDistribution uni = NoiseDistribution::uniform(K);
  const Categorical routed = backward_branch(0, 1, 1, 2, high, uni);
  violation = std::max(violation, routed[0] - 0.99);  // must stay mobile

  // small-alpha regime: the vanilla kernel is still mobile
  const AlphaSchedule low({1.0, 0.1, 0.01});
  const Categorical early = vanilla_backward_multinomial(f, 0, 2, low, K);
  violation = std::max(violation, early[0] - 0.5);

  report.max_error = std::max(0.0, violation);
  report.cases_run = 4;
  report.passed = report.max_error <= report.tolerance;
  return report;
}

namespace {

class PointMassDenoiser : public Denoiser {
 public:
  PointMassDenoiser(int vocab, std::vector<int> targets)
      : vocab_(vocab), targets_(std::move(targets)) {}

  DenoiserOutput predict(const std::vector<int>& tokens, int /*t*/,
                         const std::vector<int>* /*condition*/) const override {
    DenoiserOutput out;
    for (std::size_t n = 0; n < tokens.size(); ++n)
      out.per_position.push_back(Categorical::onehot(vocab_, targets_[n]));
    return out;
  }
  int vocab() const override { return vocab_; }

 private:
  int vocab_;
  std::vector<int> targets_;
};

struct SubtestOutcome {
  double ratio = 0.0;  // statistic / critical value
  bool valid = true;
};

SubtestOutcome gof(const std::vector<long>& observed,
                   const std::vector<double>& probs, long draws,
                   double alpha_each) {
  SubtestOutcome out;
  const ChiSquareResult res = chi_square_statistic(observed, probs, draws);
  if (res.impossible_bin_hit || res.dof < 1) {
    out.valid = false;
    out.ratio = HUGE_VAL;
    return out;
  }
  out.ratio = res.statistic / chi_square_critical(res.dof, alpha_each);
  return out;
}

}  // namespace

CheckReport check_sampler_statistics(std::uint64_t seed) {
  CheckReport report;
  report.name = "sampler_statistics";
  report.tolerance = 1.0;
  const double alpha_each = kAlphaSuite / kChiSquareSubtests;
  Rng rng(seed);
  const long draws = kDrawsPerSubtest;

  // corrupt vs the closed-form forward marginal, uniform and absorbing
  for (int kind = 0; kind < 2; ++kind) {
    const int K = 5;
    const NoiseDistribution noise = kind == 0
                                        ? NoiseDistribution::uniform(K)
                                        : NoiseDistribution::absorbing(K, 4);
    const AlphaSchedule sched = AlphaSchedule::linear(4);
    const int t = 2, x0 = 3;
    const Categorical expected = q_xt_given_x0(x0, t, sched, noise);
    std::vector<long> counts(K, 0);
    for (long i = 0; i < draws; ++i)
      ++counts[corrupt({x0}, t, sched, noise, rng)[0]];
    const SubtestOutcome o = gof(counts, expected.probs(), draws, alpha_each);
    report.max_error = std::max(report.max_error, o.ratio);
    ++report.cases_run;
  }

  // stochastic routing frequencies
  {
    DiffusionState state;
    state.tokens = {0};
    state.denoised = {false};
    state.t = 2;
    state.scores = {0.0};
    state.prev_tokens = {0};
    const RoutingCoefficients coeffs{0.3, 0.7};
    long v1_true = 0, v2_true = 0;
    for (long i = 0; i < draws; ++i) {
      const RoutingDecision v = route_stochastic(state, coeffs, rng);
      v1_true += v.v1[0];
      v2_true += v.v2[0];
    }
    const SubtestOutcome o1 = gof({v1_true, draws - v1_true},
                                  {coeffs.lambda1, 1.0 - coeffs.lambda1},
                                  draws, alpha_each);
    const SubtestOutcome o2 = gof({v2_true, draws - v2_true},
                                  {coeffs.lambda2, 1.0 - coeffs.lambda2},
                                  draws, alpha_each);
    report.max_error = std::max({report.max_error, o1.ratio, o2.ratio});
    report.cases_run += 2;
  }

  // tempered prediction at tau = 1 recovers f itself
  {
    const Categorical f(std::vector<double>{0.1, 0.7, 0.2});
    std::vector<long> counts(3, 0);
    for (long i = 0; i < draws; ++i)
      ++counts[predict_x0(f, 1.0, DecodeMode::kSample, rng)];
    const SubtestOutcome o = gof(counts, f.probs(), draws, alpha_each);
    report.max_error = std::max(report.max_error, o.ratio);
    ++report.cases_run;
  }

  // single-token denoise_step marginal vs the branching backward, both b cases
  {
    const int K = 4;
    const NoiseDistribution noise = NoiseDistribution::uniform(K);
    const AlphaSchedule sched = AlphaSchedule::linear(4);
    const int t = 3, s = 1, x0 = 2;
    const CoeffsProvider coeffs = make_coeffs_provider(sched, noise);
    const RoutingStrategy strategy = RoutingStrategy::stochastic();
    for (int xt : {1, 2}) {  // noisy then clean
      const PointMassDenoiser oracle(K, {x0});
      const Categorical expected = backward_branch(xt, x0, s, t, sched, noise);
      std::vector<long> counts(K, 0);
      for (long i = 0; i < draws; ++i) {
        DiffusionState state;
        state.tokens = {xt};
        state.denoised = {xt == x0};
        state.t = t;
        state.scores = {0.0};
        state.prev_tokens = {xt};
        const DiffusionState next =
            denoise_step(state, oracle, strategy, coeffs, 1.0,
                         DecodeMode::kArgmax, s, sched, noise, nullptr, rng);
        ++counts[next.tokens[0]];
      }
      const SubtestOutcome o = gof(counts, expected.probs(), draws, alpha_each);
      report.max_error = std::max(report.max_error, o.ratio);
      ++report.cases_run;
    }
  }

  report.passed = report.max_error <= report.tolerance;
  return report;
}

CheckReport check_conditioned_unbiased(std::uint64_t seed) {
  CheckReport report;
  report.name = "conditioned_unbiased";
  report.tolerance = 0.0;
  Rng rng(seed);

  const int K = 6, N = 6, T = 6;
  const AlphaSchedule sched = AlphaSchedule::linear(T);
  const NoiseDistribution noise = NoiseDistribution::absorbing(K, K - 1);
  Rng model_rng(seed ^ 0xabcdefULL);
  std::vector<Categorical> marginals;
  for (int n = 0; n < N; ++n) {
    std::vector<double> w(K, 0.0);
    double total = 0.0;
    for (int j = 0; j < K - 1; ++j) {
      w[j] = 0.1 + model_rng.uniform();
      total += w[j];
    }
    for (double& x : w) x /= total;
    marginals.emplace_back(std::move(w));
  }
  const DataModel model = DataModel::factorized(marginals);
  const OracleDenoiser oracle(model, sched, noise);

  auto step_loss = [&](const std::vector<int>& x0, const std::vector<int>& xt,
                       int t) {
    const DenoiserOutput f = oracle.predict(xt, t, nullptr);
    return loss_simple(f, x0, xt, t, ReweightingScheme::kOriginal, sched, 0.0)
        .report.loss;
  };

  const long draws = 100000;
  double sum_a = 0.0, sq_a = 0.0, sum_b = 0.0, sq_b = 0.0;
  for (long i = 0; i < draws; ++i) {
    // coupled estimator
    const std::vector<int> x0 = model.sample(rng);
    int s = 1 + rng.uniform_int(T);
    int t = 1 + rng.uniform_int(T);
    if (s > t) std::swap(s, t);
    const std::vector<int> xt = corrupt(x0, t, sched, noise, rng);
    std::vector<int> xs(N);
    if (s == t) {
      xs = corrupt(x0, s, sched, noise, rng);
    } else {
      for (int n = 0; n < N; ++n)
        xs[n] = backward_branch(xt[n], x0[n], s, t, sched, noise).sample(rng);
    }
    const double la = 0.5 * (step_loss(x0, xs, s) + step_loss(x0, xt, t));
    sum_a += la;
    sq_a += la * la;

    // two independent standard estimators
    const std::vector<int> y0 = model.sample(rng);
    const int t1 = 1 + rng.uniform_int(T);
    const int t2 = 1 + rng.uniform_int(T);
    const double lb = 0.5 * (step_loss(y0, corrupt(y0, t1, sched, noise, rng), t1) +
                             step_loss(y0, corrupt(y0, t2, sched, noise, rng), t2));
    sum_b += lb;
    sq_b += lb * lb;
  }

  const double mean_a = sum_a / draws;
  const double mean_b = sum_b / draws;
  const double var_a = sq_a / draws - mean_a * mean_a;
  const double var_b = sq_b / draws - mean_b * mean_b;
  const double se = std::sqrt(var_a / draws + var_b / draws);
  std::fprintf(stderr,
               "[conditioned_unbiased] coupled mean %.6f (var %.6f), "
               "independent mean %.6f (var %.6f)\n",
               mean_a, var_a, mean_b, var_b);
  report.max_error = std::max(0.0, std::abs(mean_a - mean_b) - 3.0 * se);
  report.cases_run = 2 * draws;
  report.passed = report.max_error <= report.tolerance;
  return report;
}

CheckReport check_gradients(std::uint64_t seed) {
  CheckReport report;
  report.name = "gradient_check";
  report.tolerance = 1e-4;
  Rng rng(seed);

  DenoiserArch arch;
  arch.K = 9;
  arch.N_max = 6;
  TrainableDenoiser model(arch);
  model.init_params(rng);

  const AlphaSchedule sched = AlphaSchedule::linear(6);
  const NoiseDistribution noise = NoiseDistribution::absorbing(arch.K, 8);

  struct Example {
    std::vector<int> x0, xt;
    int t;
    std::optional<std::vector<int>> condition;
  };
  std::vector<Example> batch;
  for (int i = 0; i < 2; ++i) {
    Example ex;
    const int N = 5;
    ex.x0.resize(N);
    for (int n = 0; n < N; ++n) ex.x0[n] = rng.uniform_int(arch.K - 1);
    ex.t = 1 + rng.uniform_int(sched.T());
    ex.xt = corrupt(ex.x0, ex.t, sched, noise, rng);
    if (i == 1) {
      std::vector<int> cond(N);
      for (int n = 0; n < N; ++n) cond[n] = rng.uniform_int(arch.K - 1);
      ex.condition = std::move(cond);
    }
    batch.push_back(std::move(ex));
  }

  auto total_loss = [&](const TrainableDenoiser& m) {
    double loss = 0.0;
    for (const Example& ex : batch) {
      const std::vector<int>* cond = ex.condition ? &*ex.condition : nullptr;
      const DenoiserOutput f = m.forward(ex.xt, ex.t, cond);
      loss += loss_simple(f, ex.x0, ex.xt, ex.t, ReweightingScheme::kOriginal,
                          sched, 0.1)
                  .report.loss;
    }
    return loss;
  };

  std::vector<double> analytic(model.params().size(), 0.0);
  for (const Example& ex : batch) {
    const std::vector<int>* cond = ex.condition ? &*ex.condition : nullptr;
    const DenoiserOutput f = model.forward(ex.xt, ex.t, cond);
    const LossResult lr = loss_simple(f, ex.x0, ex.xt, ex.t,
                                      ReweightingScheme::kOriginal, sched, 0.1);
    model.backward(ex.xt, ex.t, cond, lr.grad_logits, analytic);
  }

  const long P = static_cast<long>(model.params().size());
  const double h = 1e-5;
  TrainableDenoiser probe(arch, model.params());
  for (int c = 0; c < 2000; ++c) {
    const long idx = rng.uniform_int(static_cast<int>(P));
    const double orig = probe.mutable_params()[idx];
    probe.mutable_params()[idx] = orig + h;
    const double up = total_loss(probe);
    probe.mutable_params()[idx] = orig - h;
    const double down = total_loss(probe);
    probe.mutable_params()[idx] = orig;
    const double fd = (up - down) / (2.0 * h);
    const double rel = std::abs(analytic[idx] - fd) /
                       std::max({std::abs(analytic[idx]), std::abs(fd), 1e-6});
    report.max_error = std::max(report.max_error, rel);
    ++report.cases_run;
  }
  report.passed = report.max_error <= report.tolerance;
  return report;
}

std::vector<CheckReport> run_all_checks(std::uint64_t seed) {
  std::vector<CheckReport> reports;
  reports.push_back(check_prop1());
  reports.push_back(check_reparam_marginal());
  reports.push_back(check_loss_equivalence(seed));
  reports.push_back(check_chain_consistency());
  reports.push_back(check_multinomial_degeneracy());
  reports.push_back(check_sampler_statistics(seed));
  reports.push_back(check_conditioned_unbiased(seed));
  reports.push_back(check_gradients(seed));
  return reports;
}

std::string format_report_table(const std::vector<CheckReport>& reports) {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof(line), "%-26s %-6s %-13s %-13s %s\n", "check",
                "status", "max_error", "tolerance", "cases");
  out += line;
  for (const CheckReport& r : reports) {
    std::snprintf(line, sizeof(line), "%-26s %-6s %-13.3e %-13.3e %ld\n",
                  r.name.c_str(), r.passed ? "pass" : "FAIL", r.max_error,
                  r.tolerance, r.cases_run);
    out += line;
  }
  return out;
}

}  // namespace rdm
