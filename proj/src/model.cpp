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

#include "deconfound/model.hpp"

#include <cmath>
#include <numbers>
#include <unordered_set>

#include "deconfound/error.hpp"

namespace deconfound {

std::string_view SplitName(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValid:
      return "valid";
    case Split::kTest:
      return "test";
  }
  return "train";
}

std::optional<Split> ParseSplit(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "valid") return Split::kValid;
  if (name == "test") return Split::kTest;
  return std::nullopt;
}

std::string_view ScenarioName(Scenario scenario) {
  switch (scenario) {
    case Scenario::kOrthogonal:
      return "orthogonal";
    case Scenario::kEntangled:
      return "entangled";
    case Scenario::kTemporal:
      return "temporal";
    case Scenario::kWeekdayMarker:
      return "weekday_marker";
  }
  return "orthogonal";
}

std::optional<Scenario> ParseScenario(std::string_view name) {
  if (name == "orthogonal") return Scenario::kOrthogonal;
  if (name == "entangled") return Scenario::kEntangled;
  if (name == "temporal") return Scenario::kTemporal;
  if (name == "weekday_marker") return Scenario::kWeekdayMarker;
  return std::nullopt;
}

Split Dataset::SplitOf(const std::string& id) const {
  auto it = split.find(id);
  return it == split.end() ? Split::kTrain : it->second;
}

std::vector<const Item*> Dataset::ItemsIn(Split s) const {
  std::vector<const Item*> out;
  for (const Item& item : items) {
    if (SplitOf(item.id) == s) out.push_back(&item);
  }
  return out;
}

std::vector<PreferencePair> Dataset::PairsIn(Split s) const {
  std::vector<PreferencePair> out;
  for (const PreferencePair& pair : pairs) {
    if (SplitOf(pair.winner_id) == s && SplitOf(pair.loser_id) == s) {
      out.push_back(pair);
    }
  }
  return out;
}

std::unordered_map<std::string, std::size_t> Dataset::IndexById() const {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) index.emplace(items[i].id, i);
  return index;
}

std::vector<std::string> Validate(const Dataset& dataset) {
  std::vector<std::string> violations;
  std::unordered_set<std::string> ids;
  std::size_t dim = dataset.items.empty() ? 0
                                          : dataset.items.front().embedding.size();
  for (const Item& item : dataset.items) {
    if (item.id.empty()) violations.push_back("item with empty id");
    if (!ids.insert(item.id).second) {
      violations.push_back("duplicate item id '" + item.id + "'");
    }
    if (item.embedding.size() != dim) {
      violations.push_back("item '" + item.id + "': embedding length " +
                           std::to_string(item.embedding.size()) +
                           " differs from " + std::to_string(dim));
    }
    for (std::size_t j = 0; j < item.embedding.size(); ++j) {
      if (!std::isfinite(item.embedding[j])) {
        violations.push_back("item '" + item.id + "': embedding[" +
                             std::to_string(j) + "] is not finite");
        break;
      }
    }
    if (!std::isfinite(item.outcome)) {
      violations.push_back("item '" + item.id + "': outcome is not finite");
    }
    for (const auto* values : {&item.confounders, &item.instruments}) {
      for (const auto& [name, v] : *values) {
        if (!std::isfinite(v)) {
          violations.push_back("item '" + item.id + "': field '" + name +
                               "' is not finite");
        }
      }
    }
    if (item.month && (*item.month < 1 || *item.month > 12)) {
      violations.push_back("item '" + item.id + "': month out of range 1..12");
    }
    if (item.weekday && (*item.weekday < 0 || *item.weekday > 6)) {
      violations.push_back("item '" + item.id +
                           "': weekday out of range 0..6");
    }
  }
  for (const auto& [id, s] : dataset.split) {
    if (!ids.contains(id)) {
      violations.push_back("split entry for unknown item '" + id + "'");
    }
  }
  for (std::size_t k = 0; k < dataset.pairs.size(); ++k) {
    const PreferencePair& pair = dataset.pairs[k];
    std::string tag = "pair " + std::to_string(k) + " ('" + pair.winner_id +
                      "' > '" + pair.loser_id + "')";
    if (pair.winner_id == pair.loser_id) {
      violations.push_back(tag + ": winner_id equals loser_id");
      continue;
    }
    bool known = true;
    for (const std::string* id : {&pair.winner_id, &pair.loser_id}) {
      if (!ids.contains(*id)) {
        violations.push_back(tag + ": unknown item '" + *id + "'");
        known = false;
      }
    }
    if (!(pair.margin > 0.0) || !std::isfinite(pair.margin)) {
      violations.push_back(tag + ": margin must be finite and > 0");
    }
    if (known &&
        dataset.SplitOf(pair.winner_id) != dataset.SplitOf(pair.loser_id)) {
      violations.push_back(tag + ": cross-split pair");
    }
  }
  for (const Context& ctx : dataset.contexts) {
    for (const std::string& id : ctx.members) {
      if (!ids.contains(id)) {
        violations.push_back("context '" + ctx.id + "': unknown item '" + id +
                             "'");
      }
    }
  }
  return violations;
}

void CheckConfig(const DgpConfig& cfg) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("dgp." + field + ": " + why);
  };
  if (cfg.n < 1) fail("n", "must be >= 1");
  if (!(cfg.noise_outcome_sd >= 0.0)) fail("noise_outcome_sd", "must be >= 0");
  if (!(cfg.noise_confounder_sd >= 0.0)) {
    fail("noise_confounder_sd", "must be >= 0");
  }
  if (!(cfg.nuisance_sd >= 0.0)) fail("nuisance_sd", "must be >= 0");
  if (!(cfg.month_drift >= 0.0)) fail("month_drift", "must be >= 0");
  if (cfg.nuisance_dims < 0) fail("nuisance_dims", "must be >= 0");
  if (cfg.d < 0) fail("d", "must be >= 0");
  double total = 0.0;
  for (double p : cfg.region_prob) {
    if (!(p >= 0.0)) fail("region_prob", "probabilities must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) fail("region_prob", "must sum to 1");
  const SplitFractions& f = cfg.split;
  if (!(f.train >= 0.0 && f.valid >= 0.0 && f.test >= 0.0) ||
      std::abs(f.train + f.valid + f.test - 1.0) > 1e-9) {
    fail("split", "fractions must be >= 0 and sum to 1");
  }
  if (!(cfg.skew >= 0.0 && cfg.skew <= 1.0)) fail("skew", "must lie in [0, 1]");
  if (cfg.context_size < 2) fail("context_size", "must be >= 2");
  if (cfg.pair_cap < 1) fail("pair_cap", "must be >= 1");
  for (double v : cfg.month_effects) {
    if (!std::isfinite(v)) fail("month_effects", "must be finite");
  }
}

std::array<double, 12> DefaultMonthEffects() {
  std::array<double, 12> effects{};
  for (int m = 0; m < 12; ++m) {
    effects[m] = 0.3 * std::sin(2.0 * std::numbers::pi * m / 12.0);
  }
  return effects;
}

}  // namespace deconfound
