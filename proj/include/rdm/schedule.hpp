#pragma once

#include <string>
#include <vector>

#include "rdm/categorical.hpp"

namespace rdm {

// Noise schedule alpha_0..alpha_T with alpha_0 = 1, strictly decreasing.
// alpha_T may be exactly 0 (absorbing schedules fully mask at t = T).
// Immutable after construction; safe to share across threads.
class AlphaSchedule {
 public:
  // Validates the supplied sequence: alpha[0] == 1, strictly decreasing,
  // entries in [0, 1].
  explicit AlphaSchedule(std::vector<double> alpha);

  // alpha[t] = 1 - t/T.
  static AlphaSchedule linear(int steps);

  int T() const { return static_cast<int>(alpha_.size()) - 1; }
  double alpha(int t) const { return alpha_.at(t); }
  const std::vector<double>& alphas() const { return alpha_; }

  // Per-step survival probability beta_t = alpha_t / alpha_{t-1}, 1 <= t <= T.
  double beta(int t) const;

 private:
  std::vector<double> alpha_;
};

// Probabilities of the two routing branches for the backward jump t -> s.
struct RoutingCoefficients {
  double lambda1 = 1.0;  // denoised token stays denoised
  double lambda2 = 0.0;  // noisy token gets denoised
};

// lambda^(2)_s = (alpha_s - alpha_t) / (1 - alpha_t), 0 <= s < t <= T.
double lambda2(const AlphaSchedule& sched, int s, int t);

// lambda^(1)_s = 1 - (1 - a_t/a_s)(1 - a_s) m / (a_t + (1 - a_t) m), where
// m = q_noise(u = x_t) is the noise mass on the observed token.
double lambda1(const AlphaSchedule& sched, int s, int t,
               double noise_mass_at_xt);

// Step-t weight applied to the cross-entropy during training.
enum class ReweightingScheme {
  kOriginal,  // (alpha_{t-1} - alpha_t) / (1 - alpha_t), i.e. lambda2(t-1, t)
  kLinear,    // 1 - (t-1)/T
  kConstant,  // 1
};

double reweight(ReweightingScheme scheme, const AlphaSchedule& sched, int t);

const char* reweighting_scheme_name(ReweightingScheme scheme);
ReweightingScheme reweighting_scheme_from_name(const std::string& name);

}  // namespace rdm
