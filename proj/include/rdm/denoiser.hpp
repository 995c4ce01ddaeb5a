#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rdm/processes.hpp"

namespace rdm {

// One Categorical over the vocabulary per sequence position, approximating
// p(x_{0,n} | x_t).
struct DenoiserOutput {
  std::vector<Categorical> per_position;

  int length() const { return static_cast<int>(per_position.size()); }
};

// Anything that maps (noisy sequence, timestep, optional condition) to
// per-position denoising distributions.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual DenoiserOutput predict(const std::vector<int>& tokens, int t,
                                 const std::vector<int>* condition) const = 0;
  virtual int vocab() const = 0;
};

// Synthetic data distribution over fixed-length sequences; the ground truth
// the oracle denoiser and the evaluation metrics are computed against.
class DataModel {
 public:
  enum class Kind { kFactorized, kMarkov };

  static DataModel factorized(std::vector<Categorical> marginals);
  static DataModel markov(Categorical initial,
                          std::vector<Categorical> transition_rows,
                          int length);

  Kind kind() const { return kind_; }
  int vocab() const { return vocab_; }
  int length() const { return length_; }
  const std::vector<Categorical>& marginals() const { return marginals_; }
  const Categorical& initial() const { return initial_; }
  const std::vector<Categorical>& transition() const { return transition_; }

  std::vector<int> sample(Rng& rng) const;

  // Marginal distribution of position n under the model.
  Categorical position_marginal(int n) const;

 private:
  DataModel() = default;

  Kind kind_ = Kind::kFactorized;
  int vocab_ = 0;
  int length_ = 0;
  std::vector<Categorical> marginals_;   // factorized
  Categorical initial_;                  // markov
  std::vector<Categorical> transition_;  // markov, K rows
};

// Exact posterior p(x_{0,n} | x_{t,1:N}) under the synthetic model and the
// forward corruption channel. Factorized models factor per position; Markov
// models use the forward-backward recursion with per-position emission
// likelihoods q(x_{t,n} | x_{0,n} = j).
DenoiserOutput oracle_predict(const DataModel& model,
                              const std::vector<int>& tokens, int t,
                              const AlphaSchedule& sched,
                              const NoiseDistribution& noise);

// Denoiser adapter around oracle_predict.
class OracleDenoiser : public Denoiser {
 public:
  OracleDenoiser(DataModel model, AlphaSchedule sched, NoiseDistribution noise)
      : model_(std::move(model)),
        sched_(std::move(sched)),
        noise_(std::move(noise)) {}

  DenoiserOutput predict(const std::vector<int>& tokens, int t,
                         const std::vector<int>* condition) const override {
    (void)condition;
    return oracle_predict(model_, tokens, t, sched_, noise_);
  }
  int vocab() const override { return model_.vocab(); }

 private:
  DataModel model_;
  AlphaSchedule sched_;
  NoiseDistribution noise_;
};

// Architecture of the trainable denoiser. Per-position features are the
// token embedding, an aggregate of neighboring token embeddings, a learned
// position embedding, sinusoidal timestep features, and (when conditioning)
// a learned position-wise mix of condition-token embeddings; a single tanh
// hidden layer feeds a softmax head over the vocabulary.
struct DenoiserArch {
  enum class Context { kMeanPool, kWindow };

  int K = 0;
  int N_max = 0;
  int embed_dim = 32;
  int time_dim = 16;
  int hidden_dim = 64;
  Context context = Context::kWindow;
  int window = 3;

  int feature_dim() const { return 4 * embed_dim + time_dim; }
  long param_count() const;
  std::string context_name() const {
    return context == Context::kMeanPool ? "mean_pool" : "window";
  }
};

class TrainableDenoiser : public Denoiser {
 public:
  explicit TrainableDenoiser(DenoiserArch arch);
  TrainableDenoiser(DenoiserArch arch, std::vector<double> params);

  // Uniform [-0.05, 0.05] everywhere except the output-head bias (zero).
  void init_params(Rng& rng);

  const DenoiserArch& arch() const { return arch_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& mutable_params() { return params_; }

  DenoiserOutput predict(const std::vector<int>& tokens, int t,
                         const std::vector<int>* condition) const override {
    return forward(tokens, t, condition);
  }
  int vocab() const override { return arch_.K; }

  DenoiserOutput forward(const std::vector<int>& tokens, int t,
                         const std::vector<int>* condition) const;

  // Exact gradient of the forward computation; grad_logits is N x K row
  // gradients of a scalar loss with respect to the pre-softmax logits.
  // Accumulates into grad_out (size param_count), positions in index order.
  void backward(const std::vector<int>& tokens, int t,
                const std::vector<int>* condition,
                const std::vector<std::vector<double>>& grad_logits,
                std::vector<double>& grad_out) const;

 private:
  struct Cache;
  void run_forward(const std::vector<int>& tokens, int t,
                   const std::vector<int>* condition, Cache& cache) const;

  DenoiserArch arch_;
  std::vector<double> params_;

  // parameter block offsets into params_
  long off_tok_embed_, off_cond_embed_, off_pos_embed_, off_cond_mix_;
  long off_w1_, off_b1_, off_w2_, off_b2_;
};

// Sinusoidal encoding of an integer timestep, dim entries.
std::vector<double> sinusoidal_features(int t, int dim);

}  // namespace rdm
