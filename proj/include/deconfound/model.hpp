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

// Shared domain types: logged items, preference pairs, and the dataset
// container that every estimator, metric and report consumes.

#ifndef DECONFOUND_MODEL_HPP_
#define DECONFOUND_MODEL_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace deconfound {

using NamedValues = std::map<std::string, double>;

// One logged interaction.
//
// `latent` holds simulation ground truth (sentiment, the noiseless confounder,
// the outcome noise draw). Training code never reads it; only evaluation does.
struct Item {
  std::string id;
  std::vector<double> embedding;
  NamedValues confounders;
  NamedValues instruments;
  std::optional<NamedValues> latent;
  double outcome = 0.0;
  std::optional<int> month;    // 1..12
  std::optional<int> weekday;  // 0..6, 0 = Monday
};

struct PreferencePair {
  std::string context_id;
  std::string winner_id;
  std::string loser_id;
  double margin = 0.0;  // winner outcome minus loser outcome, > 0
};

enum class Split { kTrain, kValid, kTest };

std::string_view SplitName(Split split);
std::optional<Split> ParseSplit(std::string_view name);

// Items that were compared against each other (one question, one A/B test).
// Pairs are rebuilt from contexts whenever outcomes change.
struct Context {
  std::string id;
  std::vector<std::string> members;
};

struct Dataset {
  std::vector<Item> items;
  std::vector<PreferencePair> pairs;
  std::map<std::string, Split> split;
  std::vector<Context> contexts;

  // Items without an explicit split entry are treated as training data.
  Split SplitOf(const std::string& id) const;
  std::vector<const Item*> ItemsIn(Split s) const;
  std::vector<PreferencePair> PairsIn(Split s) const;
  std::unordered_map<std::string, std::size_t> IndexById() const;
};

// Returns one human-readable message per broken invariant; empty when the
// dataset is well formed. Each message names the offending id or field.
std::vector<std::string> Validate(const Dataset& dataset);

enum class Scenario { kOrthogonal, kEntangled, kTemporal, kWeekdayMarker };

std::string_view ScenarioName(Scenario scenario);
std::optional<Scenario> ParseScenario(std::string_view name);

enum class Region { kNone = 0, kWest = 1, kCentral = 2, kEast = 3 };

inline constexpr std::array<std::string_view, 4> kRegionNames = {
    "none", "west", "central", "east"};

struct SplitFractions {
  double train = 0.6;
  double valid = 0.2;
  double test = 0.2;
};

// Generator settings. With the defaults:
// y = s + 0.1 p + nu with nu ~ N(0, 0.1^2), p = region level (+ coef * s) +
// eps with eps ~ N(0, 0.5^2).
struct DgpConfig {
  Scenario scenario = Scenario::kOrthogonal;
  std::int64_t n = 1000;  // items; contexts for kWeekdayMarker
  std::uint64_t seed = 0;
  double coef_confounder = 0.1;
  double coef_entangle = -10.5;
  std::array<double, 3> region_levels = {1.0, 2.0, 3.0};
  double noise_outcome_sd = 0.1;
  double noise_confounder_sd = 0.5;
  int d = 0;  // 0 selects the layout size exactly
  int nuisance_dims = 4;
  double nuisance_sd = 1.0;
  std::array<double, 4> region_prob = {0.25, 0.25, 0.25, 0.25};

  // Temporal scenario: additive month effects (index 0 is January) and the
  // scale of the per-month mean shift leaked into the nuisance dimensions.
  std::array<double, 12> month_effects = {};
  double month_drift = 0.0;

  // Weekday scenario: probability that the Monday item wins a mixed pair.
  double skew = 0.5;

  int context_size = 4;
  int pair_cap = 10;
  SplitFractions split;
};

// Throws ConfigError naming the first offending field.
void CheckConfig(const DgpConfig& cfg);

// Default seasonal profile for the temporal scenario.
std::array<double, 12> DefaultMonthEffects();

}  // namespace deconfound

#endif  // DECONFOUND_MODEL_HPP_
