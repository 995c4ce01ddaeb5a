#include "rdm/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rdm {

DataModel DataModel::factorized(std::vector<Categorical> marginals) {
  if (marginals.empty())
    throw std::invalid_argument("factorized model needs >= 1 position");
  DataModel m;
  m.kind_ = Kind::kFactorized;
  m.vocab_ = marginals[0].size();
  m.length_ = static_cast<int>(marginals.size());
  for (const auto& c : marginals)
    if (c.size() != m.vocab_)
      throw std::invalid_argument("marginal vocab sizes differ");
  m.marginals_ = std::move(marginals);
  return m;
}

DataModel DataModel::markov(Categorical initial,
                            std::vector<Categorical> transition_rows,
                            int length) {
  if (length < 1) throw std::invalid_argument("markov model needs length >= 1");
  DataModel m;
  m.kind_ = Kind::kMarkov;
  m.vocab_ = initial.size();
  m.length_ = length;
  if (static_cast<int>(transition_rows.size()) != m.vocab_)
    throw std::invalid_argument("transition matrix must have K rows");
  for (const auto& row : transition_rows)
    if (row.size() != m.vocab_)
      throw std::invalid_argument("transition rows must have K entries");
  m.initial_ = std::move(initial);
  m.transition_ = std::move(transition_rows);
  return m;
}

std::vector<int> DataModel::sample(Rng& rng) const {
  std::vector<int> row(length_);
  if (kind_ == Kind::kFactorized) {
    for (int n = 0; n < length_; ++n) row[n] = marginals_[n].sample(rng);
  } else {
    row[0] = initial_.sample(rng);
    for (int n = 1; n < length_; ++n) row[n] = transition_[row[n - 1]].sample(rng);
  }
  return row;
}

Categorical DataModel::position_marginal(int n) const {
  if (n < 0 || n >= length_)
    throw std::invalid_argument("position out of range");
  if (kind_ == Kind::kFactorized) return marginals_[n];
  std::vector<double> p = initial_.probs();
  for (int step = 0; step < n; ++step) {
    std::vector<double> next(vocab_, 0.0);
    for (int i = 0; i < vocab_; ++i) {
      if (p[i] == 0.0) continue;
      for (int j = 0; j < vocab_; ++j) next[j] += p[i] * transition_[i][j];
    }
    p = std::move(next);
  }
  return Categorical(std::move(p));
}

namespace {

// Emission likelihood vector e[j] = q(observed | x_0 = j) under Eq.-1
// corruption.
std::vector<double> emission_likelihood(int observed, int t,
                                        const AlphaSchedule& sched,
                                        const NoiseDistribution& noise) {
  const double at = sched.alpha(t);
  std::vector<double> e(noise.vocab());
  const double noise_part = (1.0 - at) * noise.prob(observed);
  for (int j = 0; j < noise.vocab(); ++j)
    e[j] = noise_part + (j == observed ? at : 0.0);
  return e;
}

void normalize_in_place(std::vector<double>& v, const char* what) {
  double total = 0.0;
  for (double x : v) total += x;
  if (total <= 0.0)
    throw impossible_event_error(std::string(what) +
                                 ": observation has zero likelihood");
  for (double& x : v) x /= total;
}

}  // namespace

DenoiserOutput oracle_predict(const DataModel& model,
                              const std::vector<int>& tokens, int t,
                              const AlphaSchedule& sched,
                              const NoiseDistribution& noise) {
  if (model.vocab() != noise.vocab())
    throw std::invalid_argument("oracle_predict: vocab mismatch");
  const int N = static_cast<int>(tokens.size());
  if (N != model.length())
    throw std::invalid_argument("oracle_predict: sequence length mismatch");
  const int K = model.vocab();

  DenoiserOutput out;
  out.per_position.reserve(N);

  if (model.kind() == DataModel::Kind::kFactorized) {
    for (int n = 0; n < N; ++n) {
      std::vector<double> post = emission_likelihood(tokens[n], t, sched, noise);
      for (int j = 0; j < K; ++j) post[j] *= model.marginals()[n][j];
      normalize_in_place(post, "oracle_predict");
      out.per_position.emplace_back(std::move(post));
    }
    return out;
  }

  // Markov chain: forward-backward with per-step renormalization.
  std::vector<std::vector<double>> em(N);
  for (int n = 0; n < N; ++n)
    em[n] = emission_likelihood(tokens[n], t, sched, noise);

  std::vector<std::vector<double>> fwd(N), bwd(N);
  fwd[0].resize(K);
  for (int j = 0; j < K; ++j) fwd[0][j] = model.initial()[j] * em[0][j];
  normalize_in_place(fwd[0], "oracle_predict");
  for (int n = 1; n < N; ++n) {
    fwd[n].assign(K, 0.0);
    for (int i = 0; i < K; ++i) {
      if (fwd[n - 1][i] == 0.0) continue;
      for (int j = 0; j < K; ++j)
        fwd[n][j] += fwd[n - 1][i] * model.transition()[i][j];
    }
    for (int j = 0; j < K; ++j) fwd[n][j] *= em[n][j];
    normalize_in_place(fwd[n], "oracle_predict");
  }

  bwd[N - 1].assign(K, 1.0);
  for (int n = N - 2; n >= 0; --n) {
    bwd[n].assign(K, 0.0);
    for (int j = 0; j < K; ++j) {
      double acc = 0.0;
      for (int k = 0; k < K; ++k)
        acc += model.transition()[j][k] * em[n + 1][k] * bwd[n + 1][k];
      bwd[n][j] = acc;
    }
    normalize_in_place(bwd[n], "oracle_predict");
  }

  for (int n = 0; n < N; ++n) {
    std::vector<double> post(K);
    for (int j = 0; j < K; ++j) post[j] = fwd[n][j] * bwd[n][j];
    normalize_in_place(post, "oracle_predict");
    out.per_position.emplace_back(std::move(post));
  }
  return out;
}

std::vector<double> sinusoidal_features(int t, int dim) {
  std::vector<double> f(dim);
  for (int i = 0; i < dim / 2; ++i) {
    const double freq =
        std::pow(10000.0, -2.0 * i / static_cast<double>(dim));
    f[2 * i] = std::sin(t * freq);
    f[2 * i + 1] = std::cos(t * freq);
  }
  return f;
}

long DenoiserArch::param_count() const {
  const long E = embed_dim, H = hidden_dim, F = feature_dim();
  return static_cast<long>(K) * E      // token embeddings
         + static_cast<long>(K) * E    // condition embeddings
         + static_cast<long>(N_max) * E  // position embeddings
         + static_cast<long>(N_max) * N_max  // condition position mix
         + H * F + H                   // hidden layer
         + static_cast<long>(K) * H + K;  // output head
}

TrainableDenoiser::TrainableDenoiser(DenoiserArch arch)
    : TrainableDenoiser(std::move(arch), {}) {
  params_.assign(arch_.param_count(), 0.0);
}

TrainableDenoiser::TrainableDenoiser(DenoiserArch arch,
                                     std::vector<double> params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  if (arch_.K < 2 || arch_.N_max < 1 || arch_.embed_dim < 1 ||
      arch_.hidden_dim < 1 || arch_.time_dim < 2 || arch_.time_dim % 2 != 0)
    throw std::invalid_argument("invalid denoiser architecture");
  const long E = arch_.embed_dim;
  off_tok_embed_ = 0;
  off_cond_embed_ = off_tok_embed_ + static_cast<long>(arch_.K) * E;
  off_pos_embed_ = off_cond_embed_ + static_cast<long>(arch_.K) * E;
  off_cond_mix_ = off_pos_embed_ + static_cast<long>(arch_.N_max) * E;
  off_w1_ = off_cond_mix_ + static_cast<long>(arch_.N_max) * arch_.N_max;
  off_b1_ = off_w1_ + static_cast<long>(arch_.hidden_dim) * arch_.feature_dim();
  off_w2_ = off_b1_ + arch_.hidden_dim;
  off_b2_ = off_w2_ + static_cast<long>(arch_.K) * arch_.hidden_dim;
  if (!params_.empty() &&
      static_cast<long>(params_.size()) != arch_.param_count())
    throw std::invalid_argument("parameter count does not match architecture");
}

void TrainableDenoiser::init_params(Rng& rng) {
  params_.resize(arch_.param_count());
  for (double& p : params_) p = (rng.uniform() * 2.0 - 1.0) * 0.05;
  for (int j = 0; j < arch_.K; ++j) params_[off_b2_ + j] = 0.0;
}

struct TrainableDenoiser::Cache {
  int N = 0;
  std::vector<std::vector<double>> features;  // N x F
  std::vector<std::vector<double>> hidden;    // N x H (post-tanh)
};

void TrainableDenoiser::run_forward(const std::vector<int>& tokens, int t,
                                    const std::vector<int>* condition,
                                    Cache& cache) const {
  const int N = static_cast<int>(tokens.size());
  const int E = arch_.embed_dim;
  const int F = arch_.feature_dim();
  const int H = arch_.hidden_dim;
  if (N < 1 || N > arch_.N_max)
    throw std::invalid_argument("sequence length exceeds N_max");
  if (t < 0) throw std::invalid_argument("negative timestep");
  for (int id : tokens)
    if (id < 0 || id >= arch_.K)
      throw std::invalid_argument("token id out of range");
  if (condition) {
    if (static_cast<int>(condition->size()) > arch_.N_max ||
        condition->empty())
      throw std::invalid_argument("condition length out of range");
    for (int id : *condition)
      if (id < 0 || id >= arch_.K)
        throw std::invalid_argument("condition token id out of range");
  }

  const std::vector<double> ts = sinusoidal_features(t, arch_.time_dim);
  const double* tok_embed = params_.data() + off_tok_embed_;
  const double* cond_embed = params_.data() + off_cond_embed_;
  const double* pos_embed = params_.data() + off_pos_embed_;
  const double* cond_mix = params_.data() + off_cond_mix_;
  const double* w1 = params_.data() + off_w1_;
  const double* b1 = params_.data() + off_b1_;

  cache.N = N;
  cache.features.assign(N, std::vector<double>(F, 0.0));
  cache.hidden.assign(N, std::vector<double>(H, 0.0));

  // shared mean embedding for the mean-pool context
  std::vector<double> pooled(E, 0.0);
  if (arch_.context == DenoiserArch::Context::kMeanPool) {
    for (int n = 0; n < N; ++n)
      for (int e = 0; e < E; ++e) pooled[e] += tok_embed[tokens[n] * E + e];
    for (int e = 0; e < E; ++e) pooled[e] /= N;
  }

  for (int n = 0; n < N; ++n) {
    std::vector<double>& z = cache.features[n];
    for (int e = 0; e < E; ++e) z[e] = tok_embed[tokens[n] * E + e];
    if (arch_.context == DenoiserArch::Context::kMeanPool) {
      for (int e = 0; e < E; ++e) z[E + e] = pooled[e];
    } else {
      const int lo = std::max(0, n - arch_.window);
      const int hi = std::min(N - 1, n + arch_.window);
      const double inv = 1.0 / (hi - lo + 1);
      for (int m = lo; m <= hi; ++m)
        for (int e = 0; e < E; ++e) z[E + e] += inv * tok_embed[tokens[m] * E + e];
    }
    for (int e = 0; e < E; ++e) z[2 * E + e] = pos_embed[n * E + e];
    for (int i = 0; i < arch_.time_dim; ++i) z[3 * E + i] = ts[i];
    if (condition) {
      const int M = static_cast<int>(condition->size());
      for (int m = 0; m < M; ++m) {
        const double a = cond_mix[n * arch_.N_max + m];
        const double* ce = cond_embed + (*condition)[m] * E;
        for (int e = 0; e < E; ++e) z[3 * E + arch_.time_dim + e] += a * ce[e];
      }
    }
    std::vector<double>& h = cache.hidden[n];
    for (int i = 0; i < H; ++i) {
      double acc = b1[i];
      const double* row = w1 + static_cast<long>(i) * F;
      for (int j = 0; j < F; ++j) acc += row[j] * z[j];
      h[i] = std::tanh(acc);
    }
  }
}

DenoiserOutput TrainableDenoiser::forward(const std::vector<int>& tokens, int t,
                                          const std::vector<int>* condition) const {
  Cache cache;
  run_forward(tokens, t, condition, cache);
  const int H = arch_.hidden_dim;
  const int K = arch_.K;
  const double* w2 = params_.data() + off_w2_;
  const double* b2 = params_.data() + off_b2_;

  DenoiserOutput out;
  out.per_position.reserve(cache.N);
  for (int n = 0; n < cache.N; ++n) {
    std::vector<double> logits(K);
    for (int k = 0; k < K; ++k) {
      double acc = b2[k];
      const double* row = w2 + static_cast<long>(k) * H;
      for (int i = 0; i < H; ++i) acc += row[i] * cache.hidden[n][i];
      logits[k] = acc;
    }
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double total = 0.0;
    for (double& v : logits) {
      v = std::exp(v - mx);
      total += v;
    }
    for (double& v : logits) v /= total;
    out.per_position.emplace_back(std::move(logits));
  }
  return out;
}

void TrainableDenoiser::backward(
    const std::vector<int>& tokens, int t, const std::vector<int>* condition,
    const std::vector<std::vector<double>>& grad_logits,
    std::vector<double>& grad_out) const {
  const int E = arch_.embed_dim;
  const int F = arch_.feature_dim();
  const int H = arch_.hidden_dim;
  const int K = arch_.K;
  if (grad_out.size() != params_.size())
    throw std::invalid_argument("gradient buffer size mismatch");
  if (grad_logits.size() != tokens.size())
    throw std::invalid_argument("grad_logits length mismatch");

  Cache cache;
  run_forward(tokens, t, condition, cache);

  const double* w1 = params_.data() + off_w1_;
  const double* w2 = params_.data() + off_w2_;
  const double* cond_mix = params_.data() + off_cond_mix_;
  const double* cond_embed = params_.data() + off_cond_embed_;

  std::vector<double> dh(H), da(H), dz(F);
  for (int n = 0; n < cache.N; ++n) {
    const std::vector<double>& g = grad_logits[n];
    if (static_cast<int>(g.size()) != K)
      throw std::invalid_argument("grad_logits row size mismatch");
    // output head
    std::fill(dh.begin(), dh.end(), 0.0);
    for (int k = 0; k < K; ++k) {
      if (g[k] == 0.0) continue;
      grad_out[off_b2_ + k] += g[k];
      const double* row = w2 + static_cast<long>(k) * H;
      double* grow = grad_out.data() + off_w2_ + static_cast<long>(k) * H;
      for (int i = 0; i < H; ++i) {
        grow[i] += g[k] * cache.hidden[n][i];
        dh[i] += g[k] * row[i];
      }
    }
    // tanh hidden layer
    const std::vector<double>& h = cache.hidden[n];
    const std::vector<double>& z = cache.features[n];
    for (int i = 0; i < H; ++i) da[i] = dh[i] * (1.0 - h[i] * h[i]);
    std::fill(dz.begin(), dz.end(), 0.0);
    for (int i = 0; i < H; ++i) {
      if (da[i] == 0.0) continue;
      grad_out[off_b1_ + i] += da[i];
      const double* row = w1 + static_cast<long>(i) * F;
      double* grow = grad_out.data() + off_w1_ + static_cast<long>(i) * F;
      for (int j = 0; j < F; ++j) {
        grow[j] += da[i] * z[j];
        dz[j] += da[i] * row[j];
      }
    }
    // token embedding (direct slot)
    {
      double* ge = grad_out.data() + off_tok_embed_ + tokens[n] * E;
      for (int e = 0; e < E; ++e) ge[e] += dz[e];
    }
    // context aggregate
    if (arch_.context == DenoiserArch::Context::kMeanPool) {
      const double inv = 1.0 / cache.N;
      for (int m = 0; m < cache.N; ++m) {
        double* ge = grad_out.data() + off_tok_embed_ + tokens[m] * E;
        for (int e = 0; e < E; ++e) ge[e] += inv * dz[E + e];
      }
    } else {
      const int lo = std::max(0, n - arch_.window);
      const int hi = std::min(cache.N - 1, n + arch_.window);
      const double inv = 1.0 / (hi - lo + 1);
      for (int m = lo; m <= hi; ++m) {
        double* ge = grad_out.data() + off_tok_embed_ + tokens[m] * E;
        for (int e = 0; e < E; ++e) ge[e] += inv * dz[E + e];
      }
    }
    // position embedding
    {
      double* ge = grad_out.data() + off_pos_embed_ + n * E;
      for (int e = 0; e < E; ++e) ge[e] += dz[2 * E + e];
    }
    // condition mix and condition embeddings (timestep features carry no
    // parameters)
    if (condition) {
      const int M = static_cast<int>(condition->size());
      const double* dcond = dz.data() + 3 * E + arch_.time_dim;
      for (int m = 0; m < M; ++m) {
        const double a = cond_mix[n * arch_.N_max + m];
        const double* ce = cond_embed + (*condition)[m] * E;
        double dot = 0.0;
        for (int e = 0; e < E; ++e) dot += dcond[e] * ce[e];
        grad_out[off_cond_mix_ + n * arch_.N_max + m] += dot;
        double* gce = grad_out.data() + off_cond_embed_ + (*condition)[m] * E;
        for (int e = 0; e < E; ++e) gce[e] += a * dcond[e];
      }
    }
  }
}

}  // namespace rdm
