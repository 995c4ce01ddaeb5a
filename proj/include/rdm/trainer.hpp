#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rdm/denoiser.hpp"
#include "rdm/sampler.hpp"

namespace rdm {

// Training aborts when the loss stops being finite.
struct divergence_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int T = 20;
  ReweightingScheme scheme = ReweightingScheme::kLinear;
  int batch_size = 32;
  int steps = 3000;
  double learning_rate = 5e-4;
  int warmup_steps = 100;
  double weight_decay = 0.01;
  double label_smoothing = 0.1;
  double ema_decay = 0.9999;
  bool conditioned = false;
  std::uint64_t seed = 1;

  void validate() const;
};

// Realized per-sequence loss value together with what produced it.
struct LossReport {
  double loss = 0.0;
  std::vector<bool> b;  // b_{t,n} = 1{x_{t,n} = x_{0,n}}
  int t = 0;
  double weight = 0.0;  // lambda_{t-1} actually applied
};

// loss = lambda_{t-1} * sum_n (1 - b_n) * CE(smoothed onehot(x0_n), f_n),
// with the exact derivative of that expression w.r.t. the logits.
struct LossResult {
  LossReport report;
  std::vector<std::vector<double>> grad_logits;  // N x K
};

LossResult loss_simple(const DenoiserOutput& f_out,
                       const std::vector<int>& x0_seq,
                       const std::vector<int>& xt_seq, int t,
                       ReweightingScheme scheme, const AlphaSchedule& sched,
                       double label_smoothing);

// One training example: a data row, its corruption at a drawn step, and the
// oracle noisy-position mask.
struct BatchItem {
  std::vector<int> x0;
  std::vector<int> xt;
  int t = 0;
  std::vector<bool> b;
  int row = -1;  // corpus row the example came from (for paired conditions)
};

// Coupled pair of corruptions sharing one data row (s <= t); x_s is drawn
// through the backward kernel given x_t unless s = t.
struct ConditionedItem {
  BatchItem view_s;
  BatchItem view_t;
};

std::vector<BatchItem> make_batch(const std::vector<std::vector<int>>& corpus,
                                  int batch_size, const AlphaSchedule& sched,
                                  const NoiseDistribution& noise, Rng& rng);

std::vector<ConditionedItem> make_conditioned_batch(
    const std::vector<std::vector<int>>& corpus, int batch_size,
    const AlphaSchedule& sched, const NoiseDistribution& noise, Rng& rng);

// ema <- decay * ema + (1 - decay) * params
void ema_update(std::vector<double>& ema_params,
                const std::vector<double>& params, double decay);

struct LossCurveRow {
  int step = 0;
  double loss = 0.0;
  double weight = 0.0;  // batch mean lambda
  double t = 0.0;       // batch mean drawn step
};

struct TrainResult {
  std::vector<double> params;
  std::vector<double> ema_params;
  std::vector<LossCurveRow> curve;
};

// Runs Algorithm-1 training (or its conditioned variant) with Adam under
// linear warmup + inverse-sqrt decay, decoupled weight decay, and EMA
// tracking. Deterministic given config.seed. condition_corpus, when present,
// must be row-aligned with corpus.
TrainResult train(TrainableDenoiser& model,
                  const std::vector<std::vector<int>>& corpus,
                  const TrainConfig& config, const AlphaSchedule& sched,
                  const NoiseDistribution& noise,
                  const std::vector<std::vector<int>>* condition_corpus);

// Mean cross-entropy -log f[x0] over noisy positions of the given items;
// scheme-independent held-out metric.
double masked_cross_entropy(const Denoiser& denoiser,
                            const std::vector<BatchItem>& items,
                            const std::vector<std::vector<int>>* condition_corpus);

}  // namespace rdm
