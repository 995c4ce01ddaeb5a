// Acceptance suite: runs every top-level criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exits nonzero on any failure.

#include <unistd.h>
#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rdm/config.hpp"
#include "rdm/io.hpp"
#include "rdm/sampler.hpp"
#include "rdm/trainer.hpp"
#include "rdm/verify.hpp"

using namespace rdm;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int number, const std::string& what, bool ok,
            const std::string& detail) {
  std::printf("%s  criterion %2d: %s (%s)\n", ok ? "PASS" : "FAIL", number,
              what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

// ---- shared toy tasks -----------------------------------------------------

struct ReversePairs {
  std::vector<std::vector<int>> src, tgt;
};

ReversePairs make_reverse_pairs(int K, int N, int rows, std::uint64_t seed) {
  ReversePairs d;
  Rng rng(seed);
  for (int r = 0; r < rows; ++r) {
    std::vector<int> s(N);
    for (int n = 0; n < N; ++n) s[n] = rng.uniform_int(K - 1);
    d.src.push_back(s);
    d.tgt.emplace_back(s.rbegin(), s.rend());
  }
  return d;
}

DataModel make_factorized_model(int K, int N, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Categorical> marginals;
  for (int n = 0; n < N; ++n) {
    std::vector<double> w(K, 0.0);
    double tot = 0.0;
    for (int j = 0; j < K - 1; ++j) {
      w[j] = 0.1 + rng.uniform();
      tot += w[j];
    }
    for (double& x : w) x /= tot;
    marginals.emplace_back(std::move(w));
  }
  return DataModel::factorized(marginals);
}

TrainableDenoiser train_reverse_model(const ReversePairs& data, int T,
                                      int steps, ReweightingScheme scheme,
                                      const AlphaSchedule& sched,
                                      const NoiseDistribution& noise, int K,
                                      int N) {
  DenoiserArch arch;
  arch.K = K;
  arch.N_max = N;
  TrainConfig cfg;
  cfg.T = T;
  cfg.steps = steps;
  cfg.scheme = scheme;
  cfg.label_smoothing = 0.0;
  cfg.ema_decay = 0.99;
  cfg.conditioned = true;
  cfg.seed = 11;
  TrainableDenoiser net(arch);
  train(net, data.tgt, cfg, sched, noise, &data.src);
  return net;
}

double reverse_exact_match(const TrainableDenoiser& net,
                           const RoutingStrategy& strategy,
                           const AlphaSchedule& sched,
                           const NoiseDistribution& noise, int K, int N,
                           int rows, std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<int> steps10 = make_step_sequence(sched.T(), 10);
  SamplerOptions opts;
  opts.strategy = strategy;
  opts.mode = DecodeMode::kArgmax;
  int exact = 0;
  for (int r = 0; r < rows; ++r) {
    std::vector<int> s(N);
    for (int n = 0; n < N; ++n) s[n] = rng.uniform_int(K - 1);
    const std::vector<int> want(s.rbegin(), s.rend());
    const std::vector<int> got =
        sample(net, N, steps10, opts, sched, noise, &s, rng);
    exact += got == want;
  }
  return static_cast<double>(exact) / rows;
}

// ---- criteria -------------------------------------------------------------

void criterion_identity_checks() {
  auto timed = [](auto&& fn) {
    const auto start = std::chrono::steady_clock::now();
    const CheckReport r = fn();
    return std::make_pair(r, seconds_since(start));
  };

  {
    const auto [r, secs] = timed([] { return check_prop1(); });
    report(1, "branching backward equals Bayes enumeration",
           r.passed && secs < 10.0,
           fmt("max TV %.2e over %.0f cases, %.2f s", r.max_error,
               double(r.cases_run), secs));
  }
  {
    const auto [r, secs] = timed([] { return check_reparam_marginal(); });
    report(2, "two-step routed sampling marginalizes to the backward kernel",
           r.passed && secs < 10.0,
           fmt("max TV %.2e over %.0f cases, %.2f s", r.max_error,
               double(r.cases_run), secs));
  }
  {
    const auto [r, secs] = timed([] { return check_loss_equivalence(404); });
    report(3, "cross-entropy loss equals the expected-KL form",
           r.passed && secs < 5.0 && r.cases_run >= 3000,
           fmt("max |diff| %.2e over %.0f cases, %.2f s", r.max_error,
               double(r.cases_run), secs));
  }
  {
    const auto [r, secs] = timed([] { return check_chain_consistency(); });
    report(4, "backward kernel composes to the forward marginals",
           r.passed, fmt("max error %.2e, %.2f s", r.max_error, secs));
  }
  {
    const CheckReport r = check_multinomial_degeneracy();
    report(5, "vanilla multinomial copies states; routed form stays mobile",
           r.passed, fmt("max violation %.2e", r.max_error));
  }
  {
    const CheckReport r = check_gradients(707);
    report(6, "analytic gradients match finite differences",
           r.passed && r.cases_run >= 2000,
           fmt("max rel err %.2e over %.0f params", r.max_error,
               double(r.cases_run)));
  }
  {
    const CheckReport r = check_conditioned_unbiased(606);
    report(7, "conditioned loss estimator is unbiased",
           r.passed && r.cases_run >= 200000,
           fmt("|mean gap| beyond 3 SE: %.2e", r.max_error));
  }
}

void criterion_end_to_end() {
  const auto start = std::chrono::steady_clock::now();

  // (a) factorized K=8 absorbing task vs the exact-posterior oracle
  {
    const int K = 8, N = 8, T = 20;
    const AlphaSchedule sched = AlphaSchedule::linear(T);
    const NoiseDistribution noise = NoiseDistribution::absorbing(K, K - 1);
    const DataModel model = make_factorized_model(K, N, 7);
    Rng data_rng(70);
    std::vector<std::vector<int>> corpus;
    for (int r = 0; r < 4096; ++r) corpus.push_back(model.sample(data_rng));

    DenoiserArch arch;
    arch.K = K;
    arch.N_max = N;
    TrainConfig cfg;
    cfg.T = T;
    cfg.steps = 3000;
    cfg.label_smoothing = 0.0;
    cfg.ema_decay = 0.99;
    cfg.seed = 11;
    TrainableDenoiser net(arch);
    train(net, corpus, cfg, sched, noise, nullptr);

    Rng eval_rng(999);
    std::vector<std::vector<int>> eval_rows;
    for (int r = 0; r < 1500; ++r) eval_rows.push_back(model.sample(eval_rng));
    const auto items = make_batch(eval_rows, 10000, sched, noise, eval_rng);
    const OracleDenoiser oracle(model, sched, noise);
    const double ce_model = masked_cross_entropy(net, items, nullptr);
    const double ce_oracle = masked_cross_entropy(oracle, items, nullptr);
    const double gap = ce_model - ce_oracle;
    report(8, "toy training (a): masked CE within 0.05 nats of the oracle",
           gap <= 0.05,
           fmt("model %.4f vs oracle %.4f nats, gap %.4f", ce_model, ce_oracle,
               gap));
  }

  // (b) reverse-pairs task, 10-step adaptive decoding
  {
    const int K = 16, N = 8, T = 20;
    const AlphaSchedule sched = AlphaSchedule::linear(T);
    const NoiseDistribution noise = NoiseDistribution::absorbing(K, K - 1);
    const ReversePairs data = make_reverse_pairs(K, N, 4096, 21);
    const TrainableDenoiser net = train_reverse_model(
        data, T, 6000, ReweightingScheme::kLinear, sched, noise, K, N);
    const double em = reverse_exact_match(net, RoutingStrategy::adaptive(),
                                          sched, noise, K, N, 300, 4242);
    const double secs = seconds_since(start);
    report(8, "toy training (b): reverse-pairs exact match >= 0.9",
           em >= 0.9 && secs < 600.0,
           fmt("exact match %.3f, both runs %.1f s", em, secs));
  }
}

void criterion_ablation() {
  const int K = 16, N = 8, T = 20;
  const AlphaSchedule sched = AlphaSchedule::linear(T);
  const NoiseDistribution noise = NoiseDistribution::absorbing(K, K - 1);
  const ReversePairs data = make_reverse_pairs(K, N, 4096, 21);
  const int quarter_steps = 6000 / 4;

  const TrainableDenoiser linear_net = train_reverse_model(
      data, T, quarter_steps, ReweightingScheme::kLinear, sched, noise, K, N);
  const TrainableDenoiser original_net =
      train_reverse_model(data, T, quarter_steps, ReweightingScheme::kOriginal,
                          sched, noise, K, N);

  const double em_adaptive = reverse_exact_match(
      linear_net, RoutingStrategy::adaptive(), sched, noise, K, N, 300, 4242);
  const double em_stochastic =
      reverse_exact_match(linear_net, RoutingStrategy::stochastic(), sched,
                          noise, K, N, 300, 4242);

  Rng ce_rng(777);
  const ReversePairs held_out = make_reverse_pairs(K, N, 1000, 900);
  const auto items = make_batch(held_out.tgt, 4000, sched, noise, ce_rng);
  const double ce_linear =
      masked_cross_entropy(linear_net, items, &held_out.src);
  const double ce_original =
      masked_cross_entropy(original_net, items, &held_out.src);

  const bool ok = em_adaptive >= em_stochastic && ce_linear <= ce_original;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "EM %.3f vs %.3f; held-out CE %.4f vs %.4f", em_adaptive,
                em_stochastic, ce_linear, ce_original);
  report(9, "ablation: adaptive >= stochastic EM; linear <= original loss", ok,
         detail);
}

// ---- criterion 10: CLI determinism ---------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RDM_CLI_PATH) + " " + args +
                          " > /dev/null 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "<missing:" + path.string() + ">";
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

void criterion_determinism() {
  const fs::path dir =
      fs::temp_directory_path() / ("rdm_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string d = dir.string();

  std::string detail;
  bool ok = true;
  auto expect = [&](bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  };

  // one config used by train and sample
  const std::string config_path = d + "/run.json";
  {
    std::ofstream cfg(config_path);
    cfg << R"({
      "seed": 5,
      "schedule": {"T": 6, "family": "linear"},
      "noise": {"kind": "absorbing"},
      "arch": {"K": 6, "N_max": 5},
      "train": {"steps": 40, "batch_size": 8, "warmup_steps": 5},
      "sampling": {"steps": 3, "count": 40},
      "data": {"corpus": ")" << d << R"(/corpus.txt"},
      "out_dir": ")" << d << R"(/run"
    })";
  }

  struct Step {
    std::string args;
    std::vector<std::string> artifacts;
  };
  const std::vector<Step> steps = {
      {"gen-corpus --kind factorized --K 6 --N 5 --count 300 --seed 5 --out " +
           d + "/corpus.txt",
       {d + "/corpus.txt", d + "/corpus.txt.model.json"}},
      {"train --config " + config_path,
       {d + "/run/checkpoint.json", d + "/run/loss.csv", d + "/run/config.json"}},
      {"sample --checkpoint " + d + "/run/checkpoint.json --out " + d +
           "/gen.txt --steps 3 --count 40 --seed 9",
       {d + "/gen.txt"}},
      {"verify --only sampler_statistics --seed 303 --out " + d +
           "/report.json",
       {d + "/report.json"}},
      {"eval --generated " + d + "/gen.txt --model " + d +
           "/corpus.txt.model.json --out " + d + "/metrics.json",
       {d + "/metrics.json"}},
  };

  for (const Step& step : steps) {
    expect(run_cli(step.args) == 0, "command failed: " + step.args);
    if (!ok) break;
    std::vector<std::string> first;
    for (const std::string& artifact : step.artifacts)
      first.push_back(slurp(artifact));
    expect(run_cli(step.args) == 0, "rerun failed: " + step.args);
    if (!ok) break;
    for (std::size_t i = 0; i < step.artifacts.size(); ++i)
      expect(first[i] == slurp(step.artifacts[i]),
             "artifact differs across reruns: " + step.artifacts[i]);
    if (!ok) break;
  }
  if (ok) detail = "5 commands, byte-identical artifacts on rerun";
  report(10, "commands are deterministic given config and seed", ok, detail);
  fs::remove_all(dir);
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion_identity_checks();
  criterion_end_to_end();
  criterion_ablation();
  criterion_determinism();
  if (g_failures == 0) {
    std::printf("all criteria passed\n");
    return 0;
  }
  std::printf("%d criterion(s) failed\n", g_failures);
  return 1;
}
