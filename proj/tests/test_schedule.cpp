#include <doctest.h>

#include "rdm/schedule.hpp"

using namespace rdm;

TEST_CASE("linear schedule values") {
  const AlphaSchedule s4 = AlphaSchedule::linear(4);
  CHECK(s4.T() == 4);
  CHECK(s4.alpha(0) == 1.0);
  CHECK(s4.alpha(1) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(s4.alpha(2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s4.alpha(3) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(s4.alpha(4) == 0.0);

  const AlphaSchedule s1 = AlphaSchedule::linear(1);
  CHECK(s1.alpha(0) == 1.0);
  CHECK(s1.alpha(1) == 0.0);

  CHECK(AlphaSchedule::linear(10).alpha(3) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK_THROWS_AS(AlphaSchedule::linear(0), std::invalid_argument);
}

TEST_CASE("schedule validation") {
  CHECK_THROWS_AS(AlphaSchedule({0.9, 0.5}), std::invalid_argument);   // alpha_0 != 1
  CHECK_THROWS_AS(AlphaSchedule({1.0, 0.5, 0.5}), std::invalid_argument);  // not strict
  CHECK_THROWS_AS(AlphaSchedule({1.0, 0.5, 0.6}), std::invalid_argument);  // increasing
  CHECK_THROWS_AS(AlphaSchedule({1.0, -0.1}), std::invalid_argument);  // below 0
  CHECK_THROWS_AS(AlphaSchedule({1.0}), std::invalid_argument);        // too short
  CHECK_NOTHROW(AlphaSchedule({1.0, 0.4, 0.0}));  // alpha_T = 0 is allowed
}

TEST_CASE("beta") {
  const AlphaSchedule s = AlphaSchedule::linear(4);
  CHECK(s.beta(2) == doctest::Approx(0.5 / 0.75).epsilon(1e-15));
  CHECK(s.beta(1) == s.alpha(1));  // alpha_0 = 1
  CHECK(s.beta(4) == 0.0);
  CHECK_THROWS_AS(s.beta(0), std::invalid_argument);
  CHECK_THROWS_AS(s.beta(5), std::invalid_argument);
}

TEST_CASE("beta products recover alpha") {
  for (int T : {1, 4, 6, 17}) {
    const AlphaSchedule s = AlphaSchedule::linear(T);
    double prod = 1.0;
    for (int t = 1; t <= T; ++t) {
      prod *= s.beta(t);
      CHECK(prod == doctest::Approx(s.alpha(t)).epsilon(1e-12));
    }
  }
  const AlphaSchedule custom({1.0, 0.83, 0.4, 0.21, 0.001});
  double prod = 1.0;
  for (int t = 1; t <= custom.T(); ++t) {
    prod *= custom.beta(t);
    CHECK(prod == doctest::Approx(custom.alpha(t)).epsilon(1e-12));
  }
}

TEST_CASE("lambda2 values") {
  const AlphaSchedule s = AlphaSchedule::linear(4);
  CHECK(lambda2(s, 1, 2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(lambda2(s, 3, 4) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(lambda2(s, 0, 3) == 1.0);  // alpha_s = 1 makes the ratio exactly 1
  CHECK_THROWS_AS(lambda2(s, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(lambda2(s, 3, 1), std::invalid_argument);
}

TEST_CASE("lambda2 is monotone in alpha_s") {
  const AlphaSchedule s = AlphaSchedule::linear(6);
  for (int t = 2; t <= 6; ++t) {
    double prev = -1.0;
    for (int sidx = t - 1; sidx >= 0; --sidx) {
      const double v = lambda2(s, sidx, t);  // alpha_s grows as sidx falls
      CHECK(v > prev);
      prev = v;
    }
  }
}

TEST_CASE("lambda1 values") {
  // absorbing noise at a non-mask token: zero noise mass keeps it denoised
  const AlphaSchedule s = AlphaSchedule::linear(4);
  for (int t = 1; t <= 4; ++t)
    for (int sidx = 0; sidx < t; ++sidx)
      CHECK(lambda1(s, sidx, t, 0.0) == 1.0);

  // uniform K=4 with alpha_s=0.5, alpha_t=0.25
  const AlphaSchedule pair({1.0, 0.5, 0.25});
  CHECK(lambda1(pair, 1, 2, 0.25) ==
        doctest::Approx(6.0 / 7.0).epsilon(1e-15));

  // alpha_s = 1 means no noise yet at step s
  CHECK(lambda1(s, 0, 2, 0.3) == 1.0);

  // absorbing with alpha_t = 0 and zero mass on the token is singular
  CHECK_THROWS_AS(lambda1(s, 2, 4, 0.0), singular_schedule_error);
  CHECK_THROWS_AS(lambda1(s, 1, 2, 1.5), std::invalid_argument);
}

TEST_CASE("reweight") {
  const AlphaSchedule s10 = AlphaSchedule::linear(10);
  CHECK(reweight(ReweightingScheme::kLinear, s10, 1) == 1.0);
  CHECK(reweight(ReweightingScheme::kConstant, s10, 7) == 1.0);
  const AlphaSchedule s4 = AlphaSchedule::linear(4);
  CHECK(reweight(ReweightingScheme::kOriginal, s4, 2) ==
        doctest::Approx(0.5).epsilon(1e-15));
  // Original weight is exactly the single-step lambda2
  for (int t = 1; t <= 4; ++t)
    CHECK(reweight(ReweightingScheme::kOriginal, s4, t) ==
          lambda2(s4, t - 1, t));
  CHECK_THROWS_AS(reweight(ReweightingScheme::kLinear, s4, 0),
                  std::invalid_argument);
}

TEST_CASE("scheme names round trip") {
  for (auto scheme : {ReweightingScheme::kOriginal, ReweightingScheme::kLinear,
                      ReweightingScheme::kConstant})
    CHECK(reweighting_scheme_from_name(reweighting_scheme_name(scheme)) ==
          scheme);
  CHECK_THROWS_AS(reweighting_scheme_from_name("bogus"), std::invalid_argument);
}
