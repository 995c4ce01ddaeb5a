#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rdm/io.hpp"
#include "rdm/trainer.hpp"

namespace rdm {

struct invalid_config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SamplingSpec {
  int steps = 10;               // transitions when step_list is empty
  std::vector<int> step_list;   // explicit decreasing list, T..0
  std::string strategy = "adaptive";  // adaptive | stochastic
  std::string k_schedule = "cosine";  // cosine | linear
  bool gumbel = false;
  bool conservative = false;
  double tau = 1.0;
  std::string mode = "argmax";  // argmax | sample
  int candidates = 1;
  int count = 100;  // rows to generate when unconditioned
  int length = 0;   // 0 = use arch N_max
};

// The single JSON config document driving training and sampling.
struct RunConfig {
  std::uint64_t seed = 1;
  // schedule block: {"T": int, "family": "linear"} or {"T": int, "alpha": [..]}
  int T = 20;
  std::string schedule_family = "linear";
  std::vector<double> alpha;  // family == "custom"
  // noise block
  std::string noise_kind = "absorbing";
  int mask_id = -1;  // -1 = K-1
  std::vector<double> noise_probs;
  DenoiserArch arch;
  TrainConfig train;
  SamplingSpec sampling;
  std::string corpus_path;
  std::string source_path;  // empty = unconditioned
  std::string out_dir = ".";

  AlphaSchedule make_schedule() const;
  NoiseDistribution make_noise() const;
  RoutingStrategy make_strategy() const;
  DecodeMode make_mode() const;
  std::vector<int> make_step_list() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& text);

// Serialization with every default materialized.
std::string render_run_config(const RunConfig& config);

struct EvalMetrics {
  bool paired = false;
  double token_accuracy = 0.0;
  double exact_match = 0.0;
  double unigram_tv = 0.0;
  double bigram_tv = 0.0;
};

// Paired evaluation: per-token accuracy and sequence exact match.
EvalMetrics eval_paired(const std::vector<std::vector<int>>& generated,
                        const std::vector<std::vector<int>>& reference);

// Unconditional evaluation: TV between empirical unigram/adjacent-bigram
// statistics and the data model's.
EvalMetrics eval_against_model(const std::vector<std::vector<int>>& generated,
                               const DataModel& model);

std::string render_metrics_json(const EvalMetrics& metrics);

}  // namespace rdm
