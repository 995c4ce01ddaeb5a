#pragma once

#include <string>

#include "rdm/categorical.hpp"

namespace rdm {

// The q_noise distribution characterizing the corruption process.
class NoiseDistribution {
 public:
  enum class Kind { kUniform, kAbsorbing, kCustom };

  static NoiseDistribution uniform(int vocab) {
    return NoiseDistribution(Kind::kUniform, vocab, vocab - 1,
                             Categorical::uniform(vocab));
  }

  // Point mass on mask_id; tokens that hit it never leave (forward in time).
  static NoiseDistribution absorbing(int vocab, int mask_id) {
    return NoiseDistribution(Kind::kAbsorbing, vocab, mask_id,
                             Categorical::onehot(vocab, mask_id));
  }

  static NoiseDistribution custom(Categorical dist) {
    const int vocab = dist.size();
    return NoiseDistribution(Kind::kCustom, vocab, vocab - 1, std::move(dist));
  }

  Kind kind() const { return kind_; }
  int vocab() const { return vocab_; }
  int mask_id() const { return mask_id_; }
  double prob(int id) const { return dist_[id]; }
  const Categorical& distribution() const { return dist_; }
  int sample(Rng& rng) const { return dist_.sample(rng); }

  std::string kind_name() const {
    switch (kind_) {
      case Kind::kUniform: return "uniform";
      case Kind::kAbsorbing: return "absorbing";
      case Kind::kCustom: return "custom";
    }
    return "?";
  }

 private:
  NoiseDistribution(Kind kind, int vocab, int mask_id, Categorical dist)
      : kind_(kind), vocab_(vocab), mask_id_(mask_id), dist_(std::move(dist)) {
    if (vocab_ < 2) throw std::invalid_argument("noise needs vocab >= 2");
  }

  Kind kind_;
  int vocab_;
  int mask_id_;  // meaningful for kAbsorbing only
  Categorical dist_;
};

}  // namespace rdm
