// Copyright 2026 The Deconfound Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <memory>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "doctest.h"

#include "deconfound/dgp.hpp"
#include "deconfound/error.hpp"
#include "deconfound/eval.hpp"
#include "deconfound/reward.hpp"
#include "deconfound/rng.hpp"
#include "test_util.hpp"

namespace deconfound {
namespace {

using testing::MakeItem;

double BoostTwoSided(double t, double df) {
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

// O(n^2) Mann-Whitney count: pairs (positive, negative), ties count 1/2.
double BruteAuc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos) {
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

Dataset ScoredItems(const std::vector<double>& scores) {
  Dataset ds;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    ds.items.push_back(MakeItem("i" + std::to_string(i), {scores[i]}, 0.0));
  }
  return ds;
}

RewardModel Identity() {
  RewardModel m;
  m.weights = {1.0};
  return m;
}

TEST_CASE("roc_auc: perfect ranking, all ties, three of four") {
  const Dataset ds = ScoredItems({0.9, 0.8, 0.1, 0.2});
  const std::vector<PreferencePair> perfect = {{"c", "i0", "i2", 1}, {"c", "i1", "i3", 1}};
  CHECK(RocAuc(ds, perfect, Identity()) == 1.0);

  RewardModel flat;
  flat.weights = {0.0};
  CHECK(RocAuc(ds, perfect, flat) == 0.5);

  const std::vector<PreferencePair> mixed = {{"c", "i0", "i2", 1}, {"c", "i1", "i3", 1},
                                             {"c", "i0", "i1", 1}, {"c", "i2", "i1", 1}};
  CHECK(RocAuc(ds, mixed, Identity()) == 0.75);
}

TEST_CASE("roc_auc equals the brute-force count on 1000 scored items") {
  CounterRng rng(2024, 0, 0);
  std::vector<double> scores(1000);
  std::unique_ptr<bool[]> flags(new bool[1000]);
  std::vector<double> pos;
  std::vector<double> neg;
  for (int i = 0; i < 1000; ++i) {
    // Coarse rounding forces many ties.
    scores[i] = std::round(rng.Normal() * 8.0) / 8.0;
    flags[i] = rng.Uniform() < 0.4;
    (flags[i] ? pos : neg).push_back(scores[i]);
  }
  const double fast = MannWhitneyAuc(scores, std::span<const bool>(flags.get(), 1000));
  CHECK(fast == BruteAuc(pos, neg));

  std::vector<double> w;
  std::vector<double> l;
  for (int i = 0; i + 1 < 1000; i += 2) {
    w.push_back(scores[i]);
    l.push_back(scores[i + 1]);
  }
  double wins = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) wins += w[k] > l[k] ? 1.0 : (w[k] == l[k] ? 0.5 : 0.0);
  CHECK(RocAucFromScores(w, l) == wins / static_cast<double>(w.size()));
}

TEST_CASE("roc_auc: monotone transforms and reversal") {
  CounterRng rng(9, 0, 0);
  std::vector<double> w(200);
  std::vector<double> l(200);
  for (int i = 0; i < 200; ++i) {
    w[i] = std::round(rng.Normal() * 4.0) / 4.0;
    l[i] = std::round(rng.Normal() * 4.0) / 4.0;
  }
  const double base = RocAucFromScores(w, l);
  std::vector<double> tw(200);
  std::vector<double> tl(200);
  for (int i = 0; i < 200; ++i) {
    tw[i] = std::exp(3.0 * w[i]) + 1.0;
    tl[i] = std::exp(3.0 * l[i]) + 1.0;
  }
  CHECK(RocAucFromScores(tw, tl) == base);
  CHECK(RocAucFromScores(l, w) == doctest::Approx(1.0 - base).epsilon(1e-15));
}

TEST_CASE("pearson: examples and the constant case") {
  CHECK(Pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}) == doctest::Approx(1.0));
  CHECK(Pearson(std::vector<double>{1, 2, 3}, std::vector<double>{6, 4, 2}) == doctest::Approx(-1.0));
  CHECK(Pearson(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}) ==
        doctest::Approx(0.8).epsilon(1e-12));
  CHECK_THROWS_AS(Pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), NumericalError);
}

TEST_CASE("pearson: affine invariance and sign flip") {
  CounterRng rng(10, 0, 0);
  std::vector<double> a(50);
  std::vector<double> b(50);
  for (int i = 0; i < 50; ++i) {
    a[i] = rng.Normal();
    b[i] = a[i] + rng.Normal();
  }
  const double r = Pearson(a, b);
  CHECK(r == doctest::Approx(testing::NaiveCorr(a, b)).epsilon(1e-12));
  std::vector<double> a2(50);
  std::vector<double> a3(50);
  for (int i = 0; i < 50; ++i) {
    a2[i] = 4.0 * a[i] - 7.0;
    a3[i] = -2.0 * a[i] + 1.0;
  }
  CHECK(Pearson(a2, b) == doctest::Approx(r).epsilon(1e-12));
  CHECK(Pearson(a3, b) == doctest::Approx(-r).epsilon(1e-12));
}

TEST_CASE("temporal_corr: a model reproducing month effects scores 1") {
  const auto effects = DefaultMonthEffects();
  Dataset ds;
  int id = 0;
  for (Split s : {Split::kTrain, Split::kValid}) {
    for (int m = 1; m <= 12; ++m) {
      for (int rep = 0; rep < 3; ++rep) {
        Item item = MakeItem("i" + std::to_string(id++), {effects[m - 1]}, effects[m - 1]);
        item.month = m;
        ds.split[item.id] = s;
        ds.items.push_back(item);
      }
    }
  }
  CHECK(TemporalCorr(Identity(), ds) == doctest::Approx(1.0).epsilon(1e-12));
  RewardModel flat;
  flat.weights = {0.0};
  flat.bias = 2.0;
  CHECK_THROWS_AS(TemporalCorr(flat, ds), NumericalError);
}

TEST_CASE("temporal_corr: unregularized ridge high, infinite shrinkage undefined") {
  DgpConfig cfg;
  cfg.scenario = Scenario::kTemporal;
  cfg.n = 6000;
  cfg.seed = 4;
  cfg.month_effects = DefaultMonthEffects();
  cfg.nuisance_dims = 40;
  cfg.nuisance_sd = 0.15;
  cfg.month_drift = 0.1;
  const Dataset ds = Generate(cfg);
  const auto train = ds.ItemsIn(Split::kTrain);
  const auto x = EmbeddingMatrix(train);
  const auto y = OutcomeVector(train);
  FitOptions o;
  CHECK(TemporalCorr(FitRidge(x, y, o), ds) > 0.5);
  o.lambda = 1e12;
  const RewardModel flat = FitRidge(x, y, o);
  bool small_or_undefined = false;
  try {
    small_or_undefined = std::abs(TemporalCorr(flat, ds)) < 0.2;
  } catch (const NumericalError&) {
    small_or_undefined = true;
  }
  CHECK(small_or_undefined);
}

TEST_CASE("marker_stats: all markers, one in seven, binomial runs") {
  const MarkerSummary all = MarkerStats({{true, true}, {true, true, true}});
  CHECK(all.mean == 1.0);
  CHECK(all.se == 0.0);

  const MarkerSummary week = MarkerStats({{true, false, false, false, false, false, false}});
  CHECK(week.mean == doctest::Approx(1.0 / 7.0));
  CHECK(week.mean == doctest::Approx(0.143).epsilon(0.01));

  std::vector<std::vector<bool>> runs(25);
  for (int r = 0; r < 25; ++r) {
    CounterRng rng(0, 0, r);
    for (int i = 0; i < 3000; ++i) runs[r].push_back(rng.Uniform() < 0.2);
  }
  const MarkerSummary bern = MarkerStats(runs);
  CHECK(bern.rates.size() == 25);
  CHECK(std::abs(bern.mean - 0.2) < 3.0 * bern.se);
}

TEST_CASE("welch: identical samples give t=0, p=1") {
  const std::vector<double> a = {0.2, 0.25, 0.3};
  const TTestResult r = WelchTTest(a, a);
  CHECK(r.t == 0.0);
  CHECK(r.p == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("welch: A=[1,2,3], B=[4,5,6] matches the textbook computation") {
  const std::vector<double> a = {1, 2, 3};
  const std::vector<double> b = {4, 5, 6};
  const TTestResult r = WelchTTest(a, b);
  // Both variances are 1 with n = 3: t = -3 / sqrt(2/3), df = 4.
  const double t_ref = -3.0 / std::sqrt(2.0 / 3.0);
  CHECK(std::abs(r.t - t_ref) < 1e-6);
  CHECK(std::abs(r.df - 4.0) < 1e-6);
  CHECK(std::abs(r.p - BoostTwoSided(t_ref, 4.0)) < 1e-6);
  CHECK(r.p == doctest::Approx(0.02131).epsilon(1e-3));
}

TEST_CASE("welch: unequal variances use the Satterthwaite df") {
  const std::vector<double> a = {1.0, 2.5, 2.0, 4.0, 3.3};
  const std::vector<double> b = {10.0, 3.0, 7.5};
  const double va = 1.343;  // sample variance of a
  const double mb = 20.5 / 3.0;
  const double vb = ((10.0 - mb) * (10.0 - mb) + (3.0 - mb) * (3.0 - mb) + (7.5 - mb) * (7.5 - mb)) / 2.0;
  const double se2 = va / 5.0 + vb / 3.0;
  const double t_ref = (2.56 - mb) / std::sqrt(se2);
  const double df_ref = se2 * se2 / ((va / 5.0) * (va / 5.0) / 4.0 + (vb / 3.0) * (vb / 3.0) / 2.0);
  const TTestResult r = WelchTTest(a, b);
  CHECK(r.t == doctest::Approx(t_ref).epsilon(1e-9));
  CHECK(r.df == doctest::Approx(df_ref).epsilon(1e-9));
  CHECK(r.p == doctest::Approx(BoostTwoSided(t_ref, df_ref)).epsilon(1e-9));
}

TEST_CASE("welch: a 0.075 rate gap over 25 runs is detected in >= 95% of seeds") {
  int detected = 0;
  const int seeds = 100;
  for (int seed = 0; seed < seeds; ++seed) {
    std::vector<double> a;
    std::vector<double> b;
    for (int r = 0; r < 25; ++r) {
      CounterRng ra(seed, 1, r);
      CounterRng rb(seed, 2, r);
      int ha = 0;
      int hb = 0;
      for (int i = 0; i < 3000; ++i) {
        ha += ra.Uniform() < 0.275;
        hb += rb.Uniform() < 0.2;
      }
      a.push_back(ha / 3000.0);
      b.push_back(hb / 3000.0);
    }
    if (WelchTTest(a, b).p < 0.01) ++detected;
  }
  CHECK(detected >= 95);
}

TEST_CASE("one-sample t against Boost") {
  const std::vector<double> a = {0.3, -0.1, 0.4, 0.25, 0.05, 0.6};
  const TTestResult r = OneSampleTTest(a, 0.0);
  CHECK(r.df == 5.0);
  CHECK(r.p == doctest::Approx(BoostTwoSided(r.t, 5.0)).epsilon(1e-10));
}

TEST_CASE("incomplete beta and t tail agree with Boost to 1e-10") {
  for (double a : {0.5, 1.0, 2.5, 10.0, 50.0}) {
    for (double b : {0.5, 1.0, 3.0, 20.0}) {
      for (double x : {0.001, 0.1, 0.35, 0.5, 0.8, 0.999}) {
        CHECK(std::abs(RegularizedIncompleteBeta(a, b, x) - boost::math::ibeta(a, b, x)) < 1e-10);
      }
    }
  }
  for (double df : {1.0, 2.0, 4.0, 9.0, 17.77, 100.0}) {
    for (double t : {0.0, 0.3, 1.0, 2.0, 3.674, 8.0, 35.0}) {
      CHECK(std::abs(StudentTwoSidedP(t, df) - BoostTwoSided(t, df)) < 1e-10);
    }
  }
}

TEST_CASE("best_of_n: argmax, zero-model tie rule, invariances") {
  Dataset ds;
  Item lo = MakeItem("b-low", {0.1}, 0.0);
  Item hi = MakeItem("a-high", {0.9}, 0.0);
  Item lo2 = MakeItem("a-low", {0.1}, 0.0);
  std::vector<CandidateSet> sets = {{"c1", {&lo, &hi}}, {"c2", {&lo, &lo2}}};
  const auto picks = BestOfN(Identity(), sets);
  CHECK(picks[0]->id == "a-high");
  CHECK(picks[1]->id == "a-low");

  RewardModel zero;
  zero.weights = {0.0};
  CHECK(BestOfN(zero, sets)[0]->id == "a-high");
  std::vector<CandidateSet> z = {{"c", {&lo, &lo2, &hi}}};
  CHECK(BestOfN(zero, z)[0]->id == "a-high");

  RewardModel shifted = Identity();
  shifted.bias = 100.0;
  shifted.weights = {3.0};
  CHECK(BestOfN(shifted, sets)[0] == picks[0]);
  CHECK(BestOfN(shifted, sets)[1] == picks[1]);
}

TEST_CASE("candidate sets: consecutive groups with a short tail") {
  std::vector<Item> items;
  for (int i = 0; i < 10; ++i) items.push_back(MakeItem("i" + std::to_string(i), {0.0}, 0.0));
  std::vector<const Item*> ptrs;
  for (const Item& it : items) ptrs.push_back(&it);
  const auto sets = MakeCandidateSets(ptrs, 4);
  REQUIRE(sets.size() == 3);
  CHECK(sets[0].candidates.size() == 4);
  CHECK(sets[2].candidates.size() == 2);
}

TEST_CASE("arm_report: all-ones sentiment and evenly split regions") {
  std::vector<Item> items;
  for (int i = 0; i < 300; ++i) {
    Item item = MakeItem("i" + std::to_string(i), {0.0}, 0.0);
    item.latent = NamedValues{{"sentiment", 1.0}, {"region", static_cast<double>(1 + i % 3)}};
    items.push_back(item);
  }
  std::vector<std::vector<const Item*>> picks(2);
  for (int i = 0; i < 300; ++i) picks[i % 2].push_back(&items[i]);
  const ArmSummary s = ArmReport("oracle_sentiment", picks);
  CHECK(s.mean_sentiment == 1.0);
  CHECK(s.se == 0.0);
  CHECK(s.region_counts[0] == 100);
  CHECK(s.region_counts[1] == 100);
  CHECK(s.region_counts[2] == 100);
  CHECK(s.picks == 300);

  Item bare = MakeItem("bare", {0.0}, 0.0);
  CHECK_THROWS_AS(ArmReport("x", {{&bare}}), ConfigError);
}

TEST_CASE("mean and standard error") {
  const std::vector<double> v = {1, 2, 3, 4};
  CHECK(Mean(v) == 2.5);
  CHECK(StandardError(v) == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(StandardError(std::vector<double>{7.0}) == 0.0);
}

}  // namespace
}  // namespace deconfound
