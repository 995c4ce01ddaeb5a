#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdm/rng.hpp"

namespace rdm {

// Conditioning on an event of probability zero (e.g. an x_t that the forward
// process can never produce from the given x_0).
struct impossible_event_error : std::domain_error {
  using std::domain_error::domain_error;
};

// A schedule denominator hit zero or one where the formulas need it strictly
// inside (0, 1).
struct singular_schedule_error : std::domain_error {
  using std::domain_error::domain_error;
};

// Probability vector over K token ids.
class Categorical {
 public:
  Categorical() = default;
  explicit Categorical(std::vector<double> probs) : probs_(std::move(probs)) {
    validate();
  }

  static Categorical onehot(int size, int id) {
    std::vector<double> p(size, 0.0);
    p.at(id) = 1.0;
    return Categorical(std::move(p));
  }

  static Categorical uniform(int size) {
    return Categorical(std::vector<double>(size, 1.0 / size));
  }

  // Normalizes a nonnegative weight vector; throws if the total mass is zero.
  static Categorical normalized(std::vector<double> weights) {
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw std::invalid_argument("negative probability weight");
      total += w;
    }
    if (total <= 0.0)
      throw impossible_event_error("conditioning event has zero probability");
    for (double& w : weights) w /= total;
    return Categorical(std::move(weights));
  }

  int size() const { return static_cast<int>(probs_.size()); }
  double operator[](int i) const { return probs_[i]; }
  const std::vector<double>& probs() const { return probs_; }

  int argmax() const {
    int best = 0;
    for (int i = 1; i < size(); ++i)
      if (probs_[i] > probs_[best]) best = i;
    return best;
  }

  int sample(Rng& rng) const {
    const double u = rng.uniform();
    double cum = 0.0;
    for (int i = 0; i < size(); ++i) {
      cum += probs_[i];
      if (u < cum) return i;
    }
    return size() - 1;  // guard against rounding in the cumulative sum
  }

 private:
  void validate() const {
    if (probs_.empty()) throw std::invalid_argument("empty categorical");
    double total = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0))
        throw std::invalid_argument("categorical entry negative or NaN");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("categorical does not sum to 1, total=" +
                                  std::to_string(total));
  }

  std::vector<double> probs_;
};

// Half the L1 distance between two probability vectors.
inline double tv_distance(const Categorical& a, const Categorical& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("tv_distance: size mismatch");
  double acc = 0.0;
  for (int i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return 0.5 * acc;
}

// KL(a || b) with the 0 log 0 = 0 convention. Infinite when a puts mass where
// b does not.
inline double kl_divergence(const Categorical& a, const Categorical& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("kl_divergence: size mismatch");
  double acc = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    acc += a[i] * (std::log(a[i]) - std::log(b[i]));
  }
  return acc;
}

}  // namespace rdm
