#include "doctest.h"

#include "fixtures.hpp"
#include "scotrl/grpo.hpp"
#include "scotrl/rng.hpp"

#include <cmath>
#include <vector>

using namespace scotrl;
using fixtures::make_traj;
using fixtures::make_unparsed;
using fixtures::toy_vocab;

TEST_CASE("advantages normalize by population std plus epsilon") {
  // Rewards {2, 0}: mean 1, population std 1, so a = +-1 / (1 + eps).
  const std::vector<double> a = advantages({2.0, 0.0}, 1e-4);
  CHECK(a[0] == doctest::Approx(1.0 / (1.0 + 1e-4)).epsilon(1e-15));
  CHECK(a[1] == doctest::Approx(-1.0 / (1.0 + 1e-4)).epsilon(1e-15));

  SUBCASE("constant rewards vanish through the epsilon floor") {
    for (double x : advantages({1.0, 1.0, 1.0}, 1e-4)) CHECK(x == 0.0);
  }

  SUBCASE("epsilon 0 gives the exact z-score") {
    const std::vector<double> z = advantages({3.0, 1.0}, 0.0);
    CHECK(z[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(z[1] == doctest::Approx(-1.0).epsilon(1e-15));
  }

  SUBCASE("validation") {
    CHECK_THROWS_AS(advantages({1.0}, 1e-4), InvariantError);
    CHECK_THROWS_AS(advantages({}, 1e-4), InvariantError);
    CHECK_THROWS_AS(advantages({1.0, 2.0}, -1.0), InvariantError);
  }

  SUBCASE("random rewards match an independent Eigen computation") {
    Rng rng(88);
    for (int rep = 0; rep < 200; ++rep) {
      const int n = rng.between(2, 8);
      Vec r(n);
      for (int i = 0; i < n; ++i) r(i) = rng.normal() * 3.0;
      const double mean = r.mean();
      const double sd = std::sqrt((r.array() - mean).square().sum() / n);
      const std::vector<double> got =
          advantages(std::vector<double>(r.data(), r.data() + n), 1e-4);
      for (int i = 0; i < n; ++i)
        CHECK(got[static_cast<size_t>(i)] ==
              doctest::Approx((r(i) - mean) / (sd + 1e-4)).epsilon(1e-12));
    }
  }
}

TEST_CASE("assemble_weights routes each segment to its weight source") {
  const VocabSpec vocab = toy_vocab();
  SampleGroup g;
  g.members.push_back(make_traj({11, 12}, {13, 14}, {7}, vocab));
  g.members.push_back(make_unparsed(vocab));
  // Member 0 layout: summary content 1..2, think content 5..6, answer 9.

  const std::vector<double> omega_s = {0.8, 0.6, 0.9};  // longer than the span
  DiversityWeights dvr;
  dvr.think_base = {{1.25, 1.5}, {}};
  dvr.answer_base = {{1.75}, {}};
  dvr.accuracy = 0.5;
  dvr.degenerate = false;

  SUBCASE("both sources on") {
    const TokenWeights w = assemble_weights(g, omega_s, &dvr, true, true);
    REQUIRE(w.size() == 2);
    REQUIRE(w[0].size() == 11);
    const std::vector<double> want = {1.0, 0.8, 0.6, 1.0, 1.0, 0.625,
                                      0.75, 1.0, 1.0, 0.875, 1.0};
    for (size_t t = 0; t < want.size(); ++t) CHECK(w[0][t] == want[t]);
    for (double x : w[1]) CHECK(x == 1.0);  // unparsed member stays neutral
  }

  SUBCASE("cvk off leaves the summary at one") {
    const TokenWeights w = assemble_weights(g, omega_s, &dvr, false, true);
    CHECK(w[0][1] == 1.0);
    CHECK(w[0][2] == 1.0);
    CHECK(w[0][5] == 0.625);
  }

  SUBCASE("dvr off leaves think and answer at one") {
    const TokenWeights w = assemble_weights(g, omega_s, &dvr, true, false);
    CHECK(w[0][1] == 0.8);
    CHECK(w[0][5] == 1.0);
    CHECK(w[0][9] == 1.0);
  }

  SUBCASE("null diversity weights behave like dvr off") {
    const TokenWeights w = assemble_weights(g, omega_s, nullptr, true, true);
    CHECK(w[0][5] == 1.0);
  }

  SUBCASE("short omega_s covers a prefix only") {
    const TokenWeights w = assemble_weights(g, {0.8}, &dvr, true, false);
    CHECK(w[0][1] == 0.8);
    CHECK(w[0][2] == 1.0);
  }

  SUBCASE("mismatched diversity rows are rejected") {
    DiversityWeights bad = dvr;
    bad.think_base.pop_back();
    CHECK_THROWS_AS(assemble_weights(g, omega_s, &bad, true, true), InvariantError);
  }
}

TEST_CASE("surrogate takes the clipped minimum and averages over the group only") {
  SUBCASE("positive advantage clips the ratio from above") {
    // r = 1.5, eps = 0.2, A = +2: plain 3.0 vs clipped 2.4.
    const SurrogateResult out = surrogate({{1.0}}, {2.0}, {{0.6}}, {{0.4}}, 0.2);
    CHECK(out.value == doctest::Approx(2.4).epsilon(1e-15));
    CHECK(out.clip_frac == 1.0);
    CHECK(out.token_count == 1);
  }

  SUBCASE("negative advantage keeps the plain term when it is lower") {
    const SurrogateResult out = surrogate({{1.0}}, {-2.0}, {{0.6}}, {{0.4}}, 0.2);
    CHECK(out.value == doctest::Approx(-3.0).epsilon(1e-15));
    CHECK(out.clip_frac == 0.0);
  }

  SUBCASE("low ratio with negative advantage clips from below") {
    const SurrogateResult out = surrogate({{1.0}}, {-1.0}, {{0.2}}, {{0.4}}, 0.2);
    CHECK(out.value == doctest::Approx(-0.8).epsilon(1e-15));
    CHECK(out.clip_frac == 1.0);
  }

  SUBCASE("token weights scale their position") {
    const SurrogateResult out = surrogate({{0.5}}, {2.0}, {{0.6}}, {{0.4}}, 0.2);
    CHECK(out.value == doctest::Approx(1.2).epsilon(1e-15));
  }

  SUBCASE("token sums are divided by G, never by length") {
    // Member lengths 1 and 3, ratio 1 everywhere, A = 1: sum 4, over G = 2.
    const TokenWeights w = {{1.0}, {1.0, 1.0, 1.0}};
    const std::vector<std::vector<double>> p = {{0.3}, {0.2, 0.2, 0.2}};
    const SurrogateResult out = surrogate(w, {1.0, 1.0}, p, p, 0.2);
    CHECK(out.value == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(out.token_count == 4);
    CHECK(out.clip_frac == 0.0);
  }

  SUBCASE("validation") {
    CHECK_THROWS_AS(surrogate({{1.0}}, {1.0}, {{0.5}}, {{0.5}}, 0.0), InvariantError);
    CHECK_THROWS_AS(surrogate({{1.0}}, {1.0}, {{0.5}}, {{0.5}}, 1.0), InvariantError);
    CHECK_THROWS_AS(surrogate({{1.0}}, {1.0, 2.0}, {{0.5}}, {{0.5}}, 0.2), InvariantError);
    CHECK_THROWS_AS(surrogate({{1.0}}, {1.0}, {{0.5, 0.5}}, {{0.5}}, 0.2), InvariantError);
    CHECK_THROWS_AS(surrogate({{1.0}}, {1.0}, {{0.5}}, {{0.0}}, 0.2), InvariantError);
  }
}

TEST_CASE("kl_regularizer averages ratio - log ratio - 1 over tokens") {
  SUBCASE("ratio 2 anchor") {
    const double got = kl_regularizer({{0.5}}, {{0.25}}, 0.04);
    CHECK(got == doctest::Approx(0.04 * (2.0 - std::log(2.0) - 1.0)).epsilon(1e-15));
  }

  SUBCASE("identical policies give exactly zero") {
    CHECK(kl_regularizer({{0.3, 0.7}}, {{0.3, 0.7}}, 0.04) == 0.0);
  }

  SUBCASE("mean over all tokens, across members") {
    // Ratios 2 and 1: only the first contributes, averaged over 2 tokens.
    const double got = kl_regularizer({{0.5}, {0.3}}, {{0.25}, {0.3}}, 0.04);
    CHECK(got == doctest::Approx(0.04 * (2.0 - std::log(2.0) - 1.0) / 2.0).epsilon(1e-15));
  }

  SUBCASE("zero coefficient and empty input give zero") {
    CHECK(kl_regularizer({{0.5}}, {{0.25}}, 0.0) == 0.0);
    CHECK(kl_regularizer({}, {}, 0.04) == 0.0);
  }

  SUBCASE("nonnegative for random ratios") {
    Rng rng(99);
    for (int rep = 0; rep < 200; ++rep) {
      const double ref = rng.uniform() * 0.9 + 0.05;
      const double neu = rng.uniform() * 0.9 + 0.05;
      CHECK(kl_regularizer({{ref}}, {{neu}}, 1.0) >= 0.0);
    }
  }

  SUBCASE("validation") {
    CHECK_THROWS_AS(kl_regularizer({{0.5}}, {{0.25}}, -0.1), InvariantError);
    CHECK_THROWS_AS(kl_regularizer({{0.5}}, {{0.25, 0.25}}, 0.04), InvariantError);
    CHECK_THROWS_AS(kl_regularizer({{0.5}, {0.5}}, {{0.25}}, 0.04), InvariantError);
    CHECK_THROWS_AS(kl_regularizer({{0.0}}, {{0.25}}, 0.04), InvariantError);
    CHECK_THROWS_AS(kl_regularizer({{0.5}}, {{0.0}}, 0.04), InvariantError);
  }
}
