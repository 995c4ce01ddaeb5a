#include "rdm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rdm {

void TrainConfig::validate() const {
  if (T < 1) throw std::invalid_argument("T must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (learning_rate < 0.0)
    throw std::invalid_argument("learning_rate must be >= 0");
  if (warmup_steps < 1) throw std::invalid_argument("warmup_steps must be >= 1");
  if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
    throw std::invalid_argument("label_smoothing must lie in [0, 1)");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0))
    throw std::invalid_argument("ema_decay must lie in [0, 1)");
}

LossResult loss_simple(const DenoiserOutput& f_out,
                       const std::vector<int>& x0_seq,
                       const std::vector<int>& xt_seq, int t,
                       ReweightingScheme scheme, const AlphaSchedule& sched,
                       double label_smoothing) {
  const int N = static_cast<int>(x0_seq.size());
  if (static_cast<int>(xt_seq.size()) != N || f_out.length() != N)
    throw std::invalid_argument("loss_simple: sequence length mismatch");
  const double weight = reweight(scheme, sched, t);

  LossResult res;
  res.report.t = t;
  res.report.weight = weight;
  res.report.b.resize(N);
  res.grad_logits.resize(N);

  for (int n = 0; n < N; ++n) {
    const Categorical& f = f_out.per_position[n];
    const int K = f.size();
    if (x0_seq[n] < 0 || x0_seq[n] >= K)
      throw std::invalid_argument("loss_simple: x0 id out of range");
    const bool clean = xt_seq[n] == x0_seq[n];
    res.report.b[n] = clean;
    res.grad_logits[n].assign(K, 0.0);
    if (clean) continue;
    double ce = 0.0;
    for (int j = 0; j < K; ++j) {
      const double target = (j == x0_seq[n] ? 1.0 - label_smoothing : 0.0) +
                            label_smoothing / K;
      if (target > 0.0)
        ce -= target * (f[j] > 0.0 ? std::log(f[j]) : -HUGE_VAL);
      res.grad_logits[n][j] = weight * (f[j] - target);
    }
    res.report.loss += weight * ce;
  }
  return res;
}

std::vector<BatchItem> make_batch(const std::vector<std::vector<int>>& corpus,
                                  int batch_size, const AlphaSchedule& sched,
                                  const NoiseDistribution& noise, Rng& rng) {
  if (corpus.empty()) throw std::invalid_argument("make_batch: empty corpus");
  std::vector<BatchItem> batch(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    BatchItem& item = batch[i];
    item.row = rng.uniform_int(static_cast<int>(corpus.size()));
    item.x0 = corpus[item.row];
    item.t = 1 + rng.uniform_int(sched.T());
    item.xt = corrupt(item.x0, item.t, sched, noise, rng);
    item.b.resize(item.x0.size());
    for (std::size_t n = 0; n < item.x0.size(); ++n)
      item.b[n] = item.xt[n] == item.x0[n];
  }
  return batch;
}

std::vector<ConditionedItem> make_conditioned_batch(
    const std::vector<std::vector<int>>& corpus, int batch_size,
    const AlphaSchedule& sched, const NoiseDistribution& noise, Rng& rng) {
  if (corpus.empty())
    throw std::invalid_argument("make_conditioned_batch: empty corpus");
  std::vector<ConditionedItem> batch(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    ConditionedItem& pair = batch[i];
    const int row = rng.uniform_int(static_cast<int>(corpus.size()));
    const std::vector<int>& x0 = corpus[row];
    int s = 1 + rng.uniform_int(sched.T());
    int t = 1 + rng.uniform_int(sched.T());
    if (s > t) std::swap(s, t);

    BatchItem& vt = pair.view_t;
    vt.row = row;
    vt.x0 = x0;
    vt.t = t;
    vt.xt = corrupt(x0, t, sched, noise, rng);

    BatchItem& vs = pair.view_s;
    vs.row = row;
    vs.x0 = x0;
    vs.t = s;
    if (s == t) {
      vs.xt = corrupt(x0, s, sched, noise, rng);
    } else {
      vs.xt.resize(x0.size());
      for (std::size_t n = 0; n < x0.size(); ++n)
        vs.xt[n] =
            backward_branch(vt.xt[n], x0[n], s, t, sched, noise).sample(rng);
    }
    vt.b.resize(x0.size());
    vs.b.resize(x0.size());
    for (std::size_t n = 0; n < x0.size(); ++n) {
      vt.b[n] = vt.xt[n] == x0[n];
      vs.b[n] = vs.xt[n] == x0[n];
    }
  }
  return batch;
}

void ema_update(std::vector<double>& ema_params,
                const std::vector<double>& params, double decay) {
  if (ema_params.size() != params.size())
    throw std::invalid_argument("ema_update: length mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    ema_params[i] = decay * ema_params[i] + (1.0 - decay) * params[i];
}

namespace {

struct AdamState {
  std::vector<double> m, v;
  double beta1 = 0.9, beta2 = 0.98, eps = 1e-9;
  long step = 0;

  explicit AdamState(std::size_t size) : m(size, 0.0), v(size, 0.0) {}

  void update(std::vector<double>& params, const std::vector<double>& grad,
              double lr, double weight_decay) {
    ++step;
    const double bc1 = 1.0 - std::pow(beta1, step);
    const double bc2 = 1.0 - std::pow(beta2, step);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      params[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * params[i]);
    }
  }
};

// Linear warmup to the peak rate, then inverse-sqrt decay.
double lr_at(int step, double peak, int warmup) {
  const double s = step;
  return peak * std::min(s / warmup, std::sqrt(static_cast<double>(warmup) / s));
}

const std::vector<int>* condition_for(
    const std::vector<std::vector<int>>* condition_corpus, int row) {
  if (!condition_corpus) return nullptr;
  return &(*condition_corpus)[row];
}

}  // namespace

TrainResult train(TrainableDenoiser& model,
                  const std::vector<std::vector<int>>& corpus,
                  const TrainConfig& config, const AlphaSchedule& sched,
                  const NoiseDistribution& noise,
                  const std::vector<std::vector<int>>* condition_corpus) {
  config.validate();
  if (corpus.empty()) throw std::invalid_argument("train: empty corpus");
  if (sched.T() != config.T)
    throw std::invalid_argument("train: schedule length differs from config.T");
  if (condition_corpus && condition_corpus->size() != corpus.size())
    throw std::invalid_argument("train: condition corpus not row-aligned");

  Rng rng(config.seed);
  model.init_params(rng);

  TrainResult result;
  result.ema_params = model.params();
  result.curve.reserve(config.steps);

  AdamState adam(model.params().size());
  std::vector<double> grad(model.params().size(), 0.0);

  for (int step = 1; step <= config.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss_sum = 0.0;
    double weight_sum = 0.0;
    double t_sum = 0.0;
    double noisy_count = 0.0;
    int loss_terms = 0;

    auto accumulate = [&](const BatchItem& item, double scale) {
      const std::vector<int>* cond = condition_for(condition_corpus, item.row);
      const DenoiserOutput f = model.forward(item.xt, item.t, cond);
      LossResult lr = loss_simple(f, item.x0, item.xt, item.t, config.scheme,
                                  sched, config.label_smoothing);
      loss_sum += scale * lr.report.loss;
      weight_sum += lr.report.weight;
      t_sum += lr.report.t;
      ++loss_terms;
      long noisy = 0;
      for (bool b : lr.report.b)
        if (!b) ++noisy;
      noisy_count += scale * noisy;
      if (noisy == 0) return;  // zero gradient contribution
      if (scale != 1.0)
        for (auto& row : lr.grad_logits)
          for (double& g : row) g *= scale;
      model.backward(item.xt, item.t, cond, lr.grad_logits, grad);
    };

    if (config.conditioned) {
      const auto batch = make_conditioned_batch(corpus, config.batch_size,
                                                sched, noise, rng);
      for (const ConditionedItem& pair : batch) {
        accumulate(pair.view_s, 0.5);
        accumulate(pair.view_t, 0.5);
      }
    } else {
      const auto batch =
          make_batch(corpus, config.batch_size, sched, noise, rng);
      for (const BatchItem& item : batch) accumulate(item, 1.0);
    }

    const double denom = std::max(1.0, noisy_count);
    loss_sum /= denom;
    for (double& g : grad) g /= denom;

    if (!std::isfinite(loss_sum))
      throw divergence_error("training loss is not finite at step " +
                             std::to_string(step));

    const double lr =
        lr_at(step, config.learning_rate, config.warmup_steps);
    adam.update(model.mutable_params(), grad, lr, config.weight_decay);
    ema_update(result.ema_params, model.params(), config.ema_decay);

    result.curve.push_back({step, loss_sum, weight_sum / loss_terms,
                            t_sum / loss_terms});
  }

  result.params = model.params();
  return result;
}

double masked_cross_entropy(
    const Denoiser& denoiser, const std::vector<BatchItem>& items,
    const std::vector<std::vector<int>>* condition_corpus) {
  double ce = 0.0;
  long count = 0;
  for (const BatchItem& item : items) {
    const std::vector<int>* cond = condition_for(condition_corpus, item.row);
    const DenoiserOutput f = denoiser.predict(item.xt, item.t, cond);
    for (std::size_t n = 0; n < item.x0.size(); ++n) {
      if (item.b[n]) continue;
      const double p = f.per_position[n][item.x0[n]];
      ce += p > 0.0 ? -std::log(p) : HUGE_VAL;
      ++count;
    }
  }
  return count > 0 ? ce / count : 0.0;
}

}  // namespace rdm
