#include "rdm/schedule.hpp"

#include <stdexcept>

namespace rdm {

AlphaSchedule::AlphaSchedule(std::vector<double> alpha)
    : alpha_(std::move(alpha)) {
  if (alpha_.size() < 2)
    throw std::invalid_argument("schedule needs at least alpha_0 and alpha_1");
  if (alpha_[0] != 1.0)
    throw std::invalid_argument("alpha_0 must be exactly 1");
  for (std::size_t t = 0; t < alpha_.size(); ++t) {
    if (!(alpha_[t] >= 0.0 && alpha_[t] <= 1.0))
      throw std::invalid_argument("alpha entries must lie in [0, 1]");
    if (t > 0 && !(alpha_[t] < alpha_[t - 1]))
      throw std::invalid_argument("alpha must be strictly decreasing");
  }
}

AlphaSchedule AlphaSchedule::linear(int steps) {
  if (steps < 1) throw std::invalid_argument("step count must be positive");
  std::vector<double> alpha(steps + 1);
  for (int t = 0; t <= steps; ++t)
    alpha[t] = 1.0 - static_cast<double>(t) / steps;
  alpha[0] = 1.0;
  alpha[steps] = 0.0;
  return AlphaSchedule(std::move(alpha));
}

double AlphaSchedule::beta(int t) const {
  if (t < 1 || t > T()) throw std::invalid_argument("beta: t out of range");
  if (alpha_[t - 1] == 0.0)
    throw singular_schedule_error("beta undefined: alpha_{t-1} = 0");
  return alpha_[t] / alpha_[t - 1];
}

double lambda2(const AlphaSchedule& sched, int s, int t) {
  if (!(0 <= s && s < t && t <= sched.T()))
    throw std::invalid_argument("lambda2: need 0 <= s < t <= T");
  const double at = sched.alpha(t);
  if (at == 1.0)
    throw singular_schedule_error("lambda2 undefined: alpha_t = 1");
  return (sched.alpha(s) - at) / (1.0 - at);
}

double lambda1(const AlphaSchedule& sched, int s, int t,
               double noise_mass_at_xt) {
  if (!(0 <= s && s < t && t <= sched.T()))
    throw std::invalid_argument("lambda1: need 0 <= s < t <= T");
  if (!(noise_mass_at_xt >= 0.0 && noise_mass_at_xt <= 1.0))
    throw std::invalid_argument("lambda1: noise mass outside [0, 1]");
  const double as = sched.alpha(s);
  const double at = sched.alpha(t);
  if (as == 0.0)
    throw singular_schedule_error("lambda1 undefined: alpha_s = 0");
  const double denom = at + (1.0 - at) * noise_mass_at_xt;
  if (denom <= 0.0)
    throw singular_schedule_error(
        "lambda1 undefined: zero mass on the conditioning state");
  return 1.0 - (1.0 - at / as) * (1.0 - as) * noise_mass_at_xt / denom;
}

double reweight(ReweightingScheme scheme, const AlphaSchedule& sched, int t) {
  if (t < 1 || t > sched.T())
    throw std::invalid_argument("reweight: t out of range");
  switch (scheme) {
    case ReweightingScheme::kOriginal:
      return lambda2(sched, t - 1, t);
    case ReweightingScheme::kLinear:
      return 1.0 - static_cast<double>(t - 1) / sched.T();
    case ReweightingScheme::kConstant:
      return 1.0;
  }
  throw std::logic_error("unknown reweighting scheme");
}

const char* reweighting_scheme_name(ReweightingScheme scheme) {
  switch (scheme) {
    case ReweightingScheme::kOriginal: return "original";
    case ReweightingScheme::kLinear: return "linear";
    case ReweightingScheme::kConstant: return "constant";
  }
  throw std::logic_error("unknown reweighting scheme");
}

ReweightingScheme reweighting_scheme_from_name(const std::string& name) {
  if (name == "original") return ReweightingScheme::kOriginal;
  if (name == "linear") return ReweightingScheme::kLinear;
  if (name == "constant") return ReweightingScheme::kConstant;
  throw std::invalid_argument("unknown reweighting scheme: " + name);
}

}  // namespace rdm
