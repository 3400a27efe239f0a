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

// Experiment drivers: regularization sweeps, reward-arm comparisons on the
// popularity scenarios, and the weekday-marker amplification study.
//
// Seeds run in parallel; every report is assembled in (arm, seed) order, so
// the result does not depend on the worker count.

#ifndef DECONFOUND_HARNESS_HPP_
#define DECONFOUND_HARNESS_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deconfound/deconfound.hpp"
#include "deconfound/eval.hpp"
#include "deconfound/model.hpp"
#include "deconfound/reward.hpp"

namespace deconfound {

struct SweepRow {
  double lambda = 0.0;
  double train_mse = 0.0;
  double valid_mse = 0.0;
  double test_pair_auc = 0.0;
  std::optional<double> temporal_corr;  // absent without months or if undefined
};

struct SweepReport {
  std::vector<SweepRow> rows;  // ascending lambda
  std::size_t argmin_valid = 0;
  std::size_t argmax_auc = 0;
  double argmin_valid_lambda() const { return rows[argmin_valid].lambda; }
  double argmax_auc_lambda() const { return rows[argmax_auc].lambda; }
};

// `count` points evenly spaced in log10 between 10^lo and 10^hi.
std::vector<double> LogGrid(double lo_exp, double hi_exp, int count);

// "logspace(a,b,n)", "linspace(a,b,n)" or a comma-separated list.
std::vector<double> ParseGrid(const std::string& text);

// Fits ridge on the train split for every lambda and records train/valid MSE,
// AUC on test-split pairs and, when items carry months, TemporalCorr.
// Duplicate or negative lambdas are rejected. Ties in the arg fields go to
// the smallest lambda.
SweepReport RunLambdaSweep(const Dataset& dataset, std::span<const double> grid,
                           const FitOptions& opts);

inline constexpr std::array<std::string_view, 7> kArmNames = {
    "oracle_sentiment", "sentiment_plus_noise", "naive_observed",
    "conf_in_embedding", "conf_in_head",       "deconfound_iv",
    "deconfound_dml"};

struct ScenarioOptions {
  std::vector<std::string> arms;
  std::vector<std::uint64_t> seeds;
  FitOptions fit;
  int candidate_k = 8;
  std::string confounder = "popularity";
  std::vector<std::string> instruments = {"region_west", "region_central",
                                          "region_east"};
  int folds = 5;
};

struct ArmSeedResult {
  std::string arm;
  std::uint64_t seed = 0;
  double mean_sentiment = 0.0;
  std::array<long long, 3> region_counts = {0, 0, 0};
  long long picks = 0;
  double reward_sentiment_corr_train = 0.0;
  double reward_sentiment_corr_valid = 0.0;
  double test_pair_auc = 0.0;
  std::optional<double> alpha_hat;
  std::optional<double> alpha_se;
};

struct ArmRow {
  std::string arm;
  double mean_sentiment = 0.0;
  double se = 0.0;
  std::array<long long, 3> region_counts = {0, 0, 0};
  double region_pick_rate = 0.0;
  double reward_sentiment_corr_train = 0.0;
  double reward_sentiment_corr_train_se = 0.0;
  double reward_sentiment_corr_valid = 0.0;
  double reward_sentiment_corr_valid_se = 0.0;
  double test_pair_auc = 0.0;
  std::optional<double> alpha_hat;
};

struct EvalReport {
  std::string scenario;
  std::vector<std::uint64_t> seeds;
  std::vector<ArmRow> rows;               // one per requested arm
  std::vector<ArmSeedResult> per_seed;    // (arm, seed) order
};

// Runs every requested arm on the same per-seed dataset. Only the orthogonal
// and entangled scenarios are accepted.
EvalReport RunScenario(const DgpConfig& cfg, const ScenarioOptions& opts);

struct WeekdayArmRow {
  std::string arm;
  std::vector<double> marker_weights;  // per seed
  double weight_mean = 0.0;
  double weight_se = 0.0;
  TTestResult weight_vs_zero;
  std::vector<double> pick_rates;  // marker rate among best-of-n picks
  double rate_mean = 0.0;
  double rate_se = 0.0;
};

struct WeekdayReport {
  double skew = 0.5;
  std::vector<std::uint64_t> seeds;
  std::vector<double> base_rates;  // marker rate among all test candidates
  double base_rate_mean = 0.0;
  std::vector<double> monday_win_fraction;  // mixed training pairs, per seed
  WeekdayArmRow naive;
  WeekdayArmRow deconfounded;
  TTestResult weight_welch;  // naive vs deconfounded marker weights
  TTestResult rate_welch;    // naive vs deconfounded pick rates
};

struct WeekdayOptions {
  std::vector<std::uint64_t> seeds;
  FitOptions fit;  // learning_rate is replaced by the safe step 1/L
  int candidate_k = 8;
};

WeekdayReport RunWeekdayStudy(const DgpConfig& cfg, double skew,
                              const WeekdayOptions& opts);

}  // namespace deconfound

#endif  // DECONFOUND_HARNESS_HPP_
