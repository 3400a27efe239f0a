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

#ifndef DECONFOUND_EVAL_HPP_
#define DECONFOUND_EVAL_HPP_

#include <array>
#include <span>
#include <string>
#include <vector>

#include "deconfound/model.hpp"
#include "deconfound/reward.hpp"

namespace deconfound {

// Fraction of pairs the model orders correctly; exact ties count 1/2.
double RocAuc(const Dataset& dataset, std::span<const PreferencePair> pairs,
              const RewardModel& model);
double RocAucFromScores(std::span<const double> winner_scores,
                        std::span<const double> loser_scores);

// Mann-Whitney AUC of positives over negatives via midranks, O(n log n).
double MannWhitneyAuc(std::span<const double> scores,
                      std::span<const bool> positive);

// Sample Pearson correlation. Throws NumericalError when either side is
// constant (spread below 1e-10 of its magnitude counts as constant).
double Pearson(std::span<const double> a, std::span<const double> b);

// Correlation between per-month mean predicted score on the validation split
// and per-month mean observed outcome on the training split.
double TemporalCorr(const RewardModel& model, const Dataset& dataset);

struct MarkerSummary {
  std::vector<double> rates;
  double mean = 0.0;
  double se = 0.0;
};

MarkerSummary MarkerStats(const std::vector<std::vector<bool>>& runs);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

// Welch's unequal-variance t-test with Welch-Satterthwaite df.
TTestResult WelchTTest(std::span<const double> a, std::span<const double> b);
TTestResult OneSampleTTest(std::span<const double> a, double mu0 = 0.0);

// Regularized incomplete beta I_x(a, b).
double RegularizedIncompleteBeta(double a, double b, double x);
// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double StudentTwoSidedP(double t, double df);

struct CandidateSet {
  std::string context_id;
  std::vector<const Item*> candidates;
};

// Highest-scoring candidate per set; ties go to the smallest id.
std::vector<const Item*> BestOfN(const RewardModel& model,
                                 std::span<const CandidateSet> sets);

// Consecutive groups of k items in the given order. A short tail group is
// kept when it has at least one item.
std::vector<CandidateSet> MakeCandidateSets(std::span<const Item* const> items,
                                            int k);

struct ArmSummary {
  std::string arm;
  std::vector<double> seed_means;  // mean selected sentiment per seed
  double mean_sentiment = 0.0;
  double se = 0.0;
  std::array<long long, 3> region_counts = {0, 0, 0};  // west, central, east
  long long picks = 0;
};

// Aggregates best-of-n picks (one vector per seed) using latent sentiment and
// region. Throws ConfigError naming the first item without them.
ArmSummary ArmReport(const std::string& arm,
                     const std::vector<std::vector<const Item*>>& picks);

double Mean(std::span<const double> v);
// Standard error of the mean; 0 for fewer than two values.
double StandardError(std::span<const double> v);

}  // namespace deconfound

#endif  // DECONFOUND_EVAL_HPP_
