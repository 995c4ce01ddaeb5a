#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rdm/config.hpp"
#include "rdm/io.hpp"
#include "rdm/sampler.hpp"
#include "rdm/trainer.hpp"
#include "rdm/verify.hpp"

namespace fs = std::filesystem;
using namespace rdm;

namespace {

constexpr int kExitVerifyFailure = 2;
constexpr int kExitInvalidConfig = 3;
constexpr int kExitDivergence = 4;

Categorical random_data_marginal(int K, Rng& rng) {
  // mass over data ids only; K-1 stays reserved for the mask
  std::vector<double> w(K, 0.0);
  double total = 0.0;
  for (int j = 0; j < K - 1; ++j) {
    w[j] = 0.1 + rng.uniform();
    total += w[j];
  }
  for (double& x : w) x /= total;
  return Categorical(std::move(w));
}

int cmd_gen_corpus(const std::string& kind, int K, int N, int count,
                   std::uint64_t seed, const std::string& out) {
  if (K < 2 || N < 1 || count < 1)
    throw invalid_config_error("gen-corpus: need K >= 2, N >= 1, count >= 1");
  Rng rng(seed);

  if (kind == "reverse-pairs") {
    if (K < 3)
      throw invalid_config_error("gen-corpus: reverse-pairs needs K >= 3");
    std::vector<std::vector<int>> src(count), tgt(count);
    for (int r = 0; r < count; ++r) {
      src[r].resize(N);
      for (int n = 0; n < N; ++n) src[r][n] = rng.uniform_int(K - 1);
      tgt[r].assign(src[r].rbegin(), src[r].rend());
    }
    save_corpus(out + ".src", src);
    save_corpus(out + ".tgt", tgt);
    std::printf("wrote %s.src and %s.tgt (%d rows)\n", out.c_str(), out.c_str(),
                count);
    return 0;
  }

  DataModel model = [&] {
    if (kind == "factorized") {
      std::vector<Categorical> marginals;
      for (int n = 0; n < N; ++n) marginals.push_back(random_data_marginal(K, rng));
      return DataModel::factorized(std::move(marginals));
    }
    if (kind == "markov") {
      Categorical initial = random_data_marginal(K, rng);
      std::vector<Categorical> rows;
      for (int i = 0; i < K - 1; ++i) rows.push_back(random_data_marginal(K, rng));
      rows.push_back(Categorical::onehot(K, K - 1));  // mask self-loop, unused
      return DataModel::markov(std::move(initial), std::move(rows), N);
    }
    throw invalid_config_error("gen-corpus: unknown kind " + kind);
  }();

  std::vector<std::vector<int>> rows(count);
  for (int r = 0; r < count; ++r) rows[r] = model.sample(rng);
  save_corpus(out, rows);
  save_data_model(out + ".model.json", model);
  std::printf("wrote %s and %s.model.json (%d rows)\n", out.c_str(),
              out.c_str(), count);
  return 0;
}

int cmd_train(const std::string& config_path) {
  const RunConfig config = load_run_config(config_path);
  if (config.corpus_path.empty())
    throw invalid_config_error("train: config has no data.corpus");
  if (config.arch.K < 2)
    throw invalid_config_error("train: config has no arch block");

  const auto corpus = load_corpus(config.corpus_path);
  std::vector<std::vector<int>> source;
  if (!config.source_path.empty()) source = load_corpus(config.source_path);
  const auto* source_ptr = source.empty() ? nullptr : &source;

  const AlphaSchedule sched = config.make_schedule();
  const NoiseDistribution noise = config.make_noise();
  for (const auto& row : corpus)
    for (int id : row)
      if (id < 0 || id >= config.arch.K ||
          (noise.kind() == NoiseDistribution::Kind::kAbsorbing &&
           id == noise.mask_id()))
        throw invalid_config_error("train: corpus token outside data vocab");

  fs::create_directories(config.out_dir);
  write_file_atomic((fs::path(config.out_dir) / "config.json").string(),
                    render_run_config(config));

  TrainableDenoiser model(config.arch);
  const TrainResult result =
      train(model, corpus, config.train, sched, noise, source_ptr);

  Checkpoint ckpt;
  ckpt.arch = config.arch;
  ckpt.params = result.params;
  ckpt.ema_params = result.ema_params;
  ckpt.alpha = sched.alphas();
  ckpt.noise_kind = noise.kind_name();
  ckpt.mask_id = noise.mask_id();
  if (noise.kind() == NoiseDistribution::Kind::kCustom)
    ckpt.noise_probs = noise.distribution().probs();
  save_checkpoint((fs::path(config.out_dir) / "checkpoint.json").string(),
                  ckpt);
  write_file_atomic((fs::path(config.out_dir) / "loss.csv").string(),
                    render_loss_csv(result.curve));
  std::printf("trained %d steps; final loss %s\n", config.train.steps,
              result.curve.empty()
                  ? "n/a"
                  : format_double(result.curve.back().loss).c_str());
  return 0;
}

struct SampleArgs {
  std::string checkpoint, out, config_path, source_path, step_list_arg;
  SamplingSpec spec;
  std::uint64_t seed = 1;
  bool seed_set = false;
};

int cmd_sample(const SampleArgs& args) {
  const Checkpoint ckpt = load_checkpoint(args.checkpoint);
  const AlphaSchedule sched = ckpt.schedule();
  const NoiseDistribution noise = ckpt.noise();

  RunConfig config;
  config.T = sched.T();
  config.arch = ckpt.arch;
  config.sampling = args.spec;
  config.seed = args.seed;

  // EMA parameters are the decoding parameters when present
  TrainableDenoiser model(ckpt.arch,
                          ckpt.ema_params ? *ckpt.ema_params : ckpt.params);

  const std::vector<int> steps = config.make_step_list();
  SamplerOptions opts;
  opts.strategy = config.make_strategy();
  opts.tau = config.sampling.tau;
  opts.mode = config.make_mode();

  Rng rng(config.seed);
  std::vector<std::vector<int>> rows;

  auto gen_one = [&](int length, const std::vector<int>* condition) {
    if (config.sampling.candidates == 1)
      return sample(model, length, steps, opts, sched, noise, condition, rng);
    std::vector<std::vector<int>> candidates;
    for (int c = 0; c < config.sampling.candidates; ++c)
      candidates.push_back(
          sample(model, length, steps, opts, sched, noise, condition, rng));
    return rerank(candidates, model, condition);
  };

  if (!args.source_path.empty()) {
    const auto source = load_corpus(args.source_path);
    for (const auto& src : source)
      rows.push_back(gen_one(static_cast<int>(src.size()), &src));
  } else {
    const int length =
        config.sampling.length > 0 ? config.sampling.length : ckpt.arch.N_max;
    for (int r = 0; r < config.sampling.count; ++r)
      rows.push_back(gen_one(length, nullptr));
  }
  save_corpus(args.out, rows);
  std::printf("wrote %zu rows to %s\n", rows.size(), args.out.c_str());
  return 0;
}

int cmd_verify(std::uint64_t seed, const std::string& only,
               const std::string& out_path) {
  std::vector<CheckReport> reports = run_all_checks(seed);
  if (!only.empty()) {
    std::vector<CheckReport> filtered;
    for (auto& r : reports)
      if (r.name.find(only) != std::string::npos) filtered.push_back(r);
    reports = std::move(filtered);
    if (reports.empty())
      throw invalid_config_error("verify: no check matches --only " + only);
  }
  std::fputs(format_report_table(reports).c_str(), stdout);
  const std::string json = render_report_json(reports);
  if (!out_path.empty())
    write_file_atomic(out_path, json);
  else
    std::fputs(json.c_str(), stdout);
  for (const CheckReport& r : reports)
    if (!r.passed) return kExitVerifyFailure;
  return 0;
}

int cmd_eval(const std::string& generated_path, const std::string& reference,
             const std::string& model_path, const std::string& out_path) {
  const auto generated = load_corpus(generated_path);
  EvalMetrics metrics;
  if (!reference.empty()) {
    metrics = eval_paired(generated, load_corpus(reference));
  } else if (!model_path.empty()) {
    metrics = eval_against_model(generated, load_data_model(model_path));
  } else {
    throw invalid_config_error("eval: need --reference or --model");
  }
  const std::string json = render_metrics_json(metrics);
  if (!out_path.empty())
    write_file_atomic(out_path, json);
  else
    std::fputs(json.c_str(), stdout);
  return 0;
}

std::vector<int> parse_step_list(const std::string& arg) {
  std::vector<int> steps;
  std::string token;
  for (char c : arg + ",") {
    if (c == ',') {
      if (!token.empty()) steps.push_back(std::stoi(token));
      token.clear();
    } else {
      token += c;
    }
  }
  return steps;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reparameterized discrete diffusion toolkit"};
  app.require_subcommand(1);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus");
  std::string gen_kind = "factorized", gen_out = "corpus.txt";
  int gen_K = 8, gen_N = 8, gen_count = 1000;
  std::uint64_t gen_seed = 1;
  gen->add_option("--kind", gen_kind, "factorized|markov|reverse-pairs");
  gen->add_option("--K", gen_K, "vocabulary size incl. reserved mask id");
  gen->add_option("--N", gen_N, "sequence length");
  gen->add_option("--count", gen_count, "number of rows");
  gen->add_option("--seed", gen_seed, "rng seed");
  gen->add_option("--out", gen_out, "output path (prefix for reverse-pairs)");

  // train
  auto* tr = app.add_subcommand("train", "train a denoiser from a config");
  std::string train_config;
  tr->add_option("--config", train_config, "run config JSON")->required();

  // sample
  auto* sm = app.add_subcommand("sample", "decode sequences from a checkpoint");
  SampleArgs sa;
  sm->add_option("--checkpoint", sa.checkpoint, "checkpoint JSON")->required();
  sm->add_option("--out", sa.out, "output corpus file")->required();
  sm->add_option("--config", sa.config_path, "run config JSON for defaults");
  sm->add_option("--source", sa.source_path, "conditioning corpus (.src)");
  auto* o_steps = sm->add_option("--steps", sa.spec.steps, "reverse transitions");
  auto* o_steplist =
      sm->add_option("--step-list", sa.step_list_arg, "explicit steps T,..,0");
  auto* o_strategy =
      sm->add_option("--strategy", sa.spec.strategy, "adaptive|stochastic");
  auto* o_ks =
      sm->add_option("--k-schedule", sa.spec.k_schedule, "cosine|linear");
  auto* o_gumbel = sm->add_flag("--gumbel", sa.spec.gumbel, "gumbel top-k");
  auto* o_cons = sm->add_flag("--conservative", sa.spec.conservative,
                              "conservative v1 rule");
  auto* o_tau = sm->add_option("--tau", sa.spec.tau, "temperature");
  auto* o_mode = sm->add_option("--mode", sa.spec.mode, "argmax|sample");
  auto* o_cand =
      sm->add_option("--candidates", sa.spec.candidates, "rerank pool size");
  auto* o_count = sm->add_option("--count", sa.spec.count, "rows to generate");
  auto* o_len = sm->add_option("--length", sa.spec.length, "sequence length");
  auto* o_seed = sm->add_option("--seed", sa.seed, "rng seed");

  // verify
  auto* vf = app.add_subcommand("verify", "run the identity/statistics suite");
  std::uint64_t verify_seed = 20240001;
  std::string verify_only, verify_out;
  vf->add_option("--seed", verify_seed, "seed for the statistical checks");
  vf->add_option("--only", verify_only, "run checks whose name contains this");
  vf->add_option("--out", verify_out, "write the JSON report here");

  // eval
  auto* ev = app.add_subcommand("eval", "score a generated corpus");
  std::string eval_generated, eval_reference, eval_model, eval_out;
  ev->add_option("--generated", eval_generated, "generated corpus")->required();
  ev->add_option("--reference", eval_reference, "paired reference corpus");
  ev->add_option("--model", eval_model, "data model sidecar JSON");
  ev->add_option("--out", eval_out, "write metrics JSON here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_corpus(gen_kind, gen_K, gen_N, gen_count, gen_seed,
                            gen_out);
    if (tr->parsed()) return cmd_train(train_config);
    if (sm->parsed()) {
      if (!sa.config_path.empty()) {
        const RunConfig file_config = load_run_config(sa.config_path);
        SamplingSpec spec = file_config.sampling;
        // explicit flags win over the config document
        if (o_steps->count()) spec.steps = sa.spec.steps;
        if (o_strategy->count()) spec.strategy = sa.spec.strategy;
        if (o_ks->count()) spec.k_schedule = sa.spec.k_schedule;
        if (o_gumbel->count()) spec.gumbel = sa.spec.gumbel;
        if (o_cons->count()) spec.conservative = sa.spec.conservative;
        if (o_tau->count()) spec.tau = sa.spec.tau;
        if (o_mode->count()) spec.mode = sa.spec.mode;
        if (o_cand->count()) spec.candidates = sa.spec.candidates;
        if (o_count->count()) spec.count = sa.spec.count;
        if (o_len->count()) spec.length = sa.spec.length;
        if (o_steplist->count() == 0) spec.step_list = file_config.sampling.step_list;
        sa.spec = spec;
        if (!o_seed->count()) sa.seed = file_config.seed;
      }
      if (o_steplist->count()) sa.spec.step_list = parse_step_list(sa.step_list_arg);
      return cmd_sample(sa);
    }
    if (vf->parsed()) return cmd_verify(verify_seed, verify_only, verify_out);
    if (ev->parsed())
      return cmd_eval(eval_generated, eval_reference, eval_model, eval_out);
  } catch (const invalid_config_error& e) {
    std::fprintf(stderr, "invalid config: %s\n", e.what());
    return kExitInvalidConfig;
  } catch (const divergence_error& e) {
    std::fprintf(stderr, "numeric divergence: %s\n", e.what());
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
