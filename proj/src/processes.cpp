#include "rdm/processes.hpp"

#include <stdexcept>

namespace rdm {

namespace {

void check_token(int id, int vocab, const char* what) {
  if (id < 0 || id >= vocab)
    throw std::invalid_argument(std::string(what) + ": token id out of range");
}

// alpha_t x_0 + (1 - alpha_t) q_noise with an explicit mixing weight.
Categorical mix_onehot_noise(double w, int id,
                             const NoiseDistribution& noise) {
  std::vector<double> p(noise.vocab());
  for (int j = 0; j < noise.vocab(); ++j) p[j] = (1.0 - w) * noise.prob(j);
  p[id] += w;
  return Categorical(std::move(p));
}

}  // namespace

Categorical q_xt_given_x0(int x0, int t, const AlphaSchedule& sched,
                          const NoiseDistribution& noise) {
  check_token(x0, noise.vocab(), "q_xt_given_x0");
  if (t < 0 || t > sched.T())
    throw std::invalid_argument("q_xt_given_x0: t out of range");
  return mix_onehot_noise(sched.alpha(t), x0, noise);
}

Categorical q_xt_given_xs(int xs, int s, int t, const AlphaSchedule& sched,
                          const NoiseDistribution& noise) {
  check_token(xs, noise.vocab(), "q_xt_given_xs");
  if (!(0 <= s && s < t && t <= sched.T()))
    throw std::invalid_argument("q_xt_given_xs: need 0 <= s < t <= T");
  if (sched.alpha(s) == 0.0)
    throw singular_schedule_error("q_xt_given_xs undefined: alpha_s = 0");
  return mix_onehot_noise(sched.alpha(t) / sched.alpha(s), xs, noise);
}

std::vector<int> corrupt(const std::vector<int>& x0_seq, int t,
                         const AlphaSchedule& sched,
                         const NoiseDistribution& noise, Rng& rng) {
  std::vector<int> out(x0_seq.size());
  for (std::size_t n = 0; n < x0_seq.size(); ++n)
    out[n] = q_xt_given_x0(x0_seq[n], t, sched, noise).sample(rng);
  return out;
}

Categorical noise_given_xt(int xt, int s, int t, const AlphaSchedule& sched,
                           const NoiseDistribution& noise) {
  check_token(xt, noise.vocab(), "noise_given_xt");
  if (!(0 <= s && s < t && t <= sched.T()))
    throw std::invalid_argument("noise_given_xt: need 0 <= s < t <= T");
  if (sched.alpha(s) == 0.0)
    throw singular_schedule_error("noise_given_xt undefined: alpha_s = 0");
  return mix_onehot_noise(sched.alpha(t) / sched.alpha(s), xt, noise);
}

Categorical backward_bayes(int xt, int x0, int s, int t,
                           const AlphaSchedule& sched,
                           const NoiseDistribution& noise) {
  check_token(xt, noise.vocab(), "backward_bayes");
  check_token(x0, noise.vocab(), "backward_bayes");
  if (!(0 <= s && s < t && t <= sched.T()))
    throw std::invalid_argument("backward_bayes: need 0 <= s < t <= T");
  const Categorical prior = q_xt_given_x0(x0, s, sched, noise);
  std::vector<double> weights(noise.vocab(), 0.0);
  for (int j = 0; j < noise.vocab(); ++j) {
    if (prior[j] == 0.0) continue;
    weights[j] = prior[j] * q_xt_given_xs(j, s, t, sched, noise)[xt];
  }
  return Categorical::normalized(std::move(weights));
}

Categorical backward_branch(int xt, int x0, int s, int t,
                            const AlphaSchedule& sched,
                            const NoiseDistribution& noise) {
  check_token(xt, noise.vocab(), "backward_branch");
  check_token(x0, noise.vocab(), "backward_branch");
  if (q_xt_given_x0(x0, t, sched, noise)[xt] == 0.0)
    throw impossible_event_error(
        "backward_branch: x_t unreachable from x_0 at step t");
  if (xt == x0) {
    const double l1 = lambda1(sched, s, t, noise.prob(xt));
    return mix_onehot_noise(l1, xt, noise);
  }
  const double l2 = lambda2(sched, s, t);
  const Categorical resample = noise_given_xt(xt, s, t, sched, noise);
  std::vector<double> p(noise.vocab());
  for (int j = 0; j < noise.vocab(); ++j) p[j] = (1.0 - l2) * resample[j];
  p[x0] += l2;
  return Categorical(std::move(p));
}

Categorical vanilla_backward_absorbing(const Categorical& f, int xt, int s,
                                       int t, const AlphaSchedule& sched,
                                       int mask_id) {
  const int K = f.size();
  check_token(xt, K, "vanilla_backward_absorbing");
  check_token(mask_id, K, "vanilla_backward_absorbing");
  if (!(0 <= s && s < t && t <= sched.T()))
    throw std::invalid_argument(
        "vanilla_backward_absorbing: need 0 <= s < t <= T");
  if (xt != mask_id) return Categorical::onehot(K, xt);
  const double at = sched.alpha(t);
  const double as = sched.alpha(s);
  if (at == 1.0)
    throw singular_schedule_error(
        "vanilla_backward_absorbing undefined: alpha_t = 1");
  const double denoise_w = (as - at) / (1.0 - at);
  std::vector<double> p(K);
  for (int j = 0; j < K; ++j) p[j] = denoise_w * f[j];
  p[mask_id] += 1.0 - denoise_w;
  return Categorical(std::move(p));
}

Categorical vanilla_backward_multinomial(const Categorical& f, int xt, int t,
                                         const AlphaSchedule& sched, int K) {
  return vanilla_backward_multinomial_gap(f, xt, t - 1, t, sched, K);
}

Categorical vanilla_backward_multinomial_gap(const Categorical& f, int xt,
                                             int s, int t,
                                             const AlphaSchedule& sched,
                                             int K) {
  check_token(xt, K, "vanilla_backward_multinomial");
  if (f.size() != K)
    throw std::invalid_argument("vanilla_backward_multinomial: f size != K");
  if (!(0 <= s && s < t && t <= sched.T()))
    throw std::invalid_argument(
        "vanilla_backward_multinomial: need 0 <= s < t <= T");
  const double as = sched.alpha(s);
  const double at = sched.alpha(t);
  if (as == 0.0)
    throw singular_schedule_error(
        "vanilla_backward_multinomial undefined: alpha_s = 0");
  const double ratio = at / as;  // beta_t when s = t-1
  const double z = at * f[xt] + (1.0 - at) / K;
  std::vector<double> p(K);
  for (int j = 0; j < K; ++j) {
    double num = (1.0 - ratio) * as * f[j] / K +
                 (1.0 - ratio) * (1.0 - as) / (K * static_cast<double>(K));
    if (j == xt) num += at * f[j] + ratio * (1.0 - as) / K;
    p[j] = num / z;
  }
  return Categorical(std::move(p));
}

}  // namespace rdm
