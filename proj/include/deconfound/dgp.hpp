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

// Seeded generators for confounded outcome data.
//
// Every item draws from its own counter-based stream keyed by (seed, index),
// so the generated dataset is bit-identical for any worker count.
//
// Embedding layout (stable):
//   [0]                 sentiment s
//   [1], [2], [3]       region one-hot: west, central, east
//   [4]                 Monday marker (weekday scenario only)
//   [...]               nuisance dims, N(0, nuisance_sd^2) plus, in the
//                       temporal scenario, a per-month mean shift

#ifndef DECONFOUND_DGP_HPP_
#define DECONFOUND_DGP_HPP_

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "deconfound/model.hpp"
#include "deconfound/rng.hpp"

namespace deconfound {

struct EmbeddingLayout {
  int dim = 0;
  int sentiment = 0;
  int region_begin = 1;
  int marker = -1;  // -1 when absent
  int nuisance_begin = 4;
  int nuisance_count = 0;
};

// Throws ConfigError when cfg.d is nonzero and smaller than the layout.
// A d larger than the layout adds nuisance dimensions.
EmbeddingLayout LayoutFor(const DgpConfig& cfg);

struct ItemAttributes {
  double sentiment = 0.0;
  Region region = Region::kNone;
  bool monday = false;
};

// Builds one embedding. Nuisance dims are drawn from `rng`; `nuisance_shift`
// (empty or nuisance_count long) is added to them.
std::vector<double> Embed(const ItemAttributes& attrs, const DgpConfig& cfg,
                          CounterRng& rng,
                          std::span<const double> nuisance_shift = {});

// p = sum(level * indicator) + eps ; y = s + coef_confounder * p + nu.
Dataset GenOrthogonal(const DgpConfig& cfg);

// As GenOrthogonal with coef_entangle * s added to p.
Dataset GenEntangled(const DgpConfig& cfg);

// y = s + month_effects[month] + nu. Month leaks into the nuisance dims
// through a per-month mean shift of scale cfg.month_drift.
Dataset GenTemporal(const DgpConfig& cfg,
                    std::span<const double> month_effects);

// Contexts of 2-5 answers with weekday tags. Among mixed Monday/non-Monday
// pairs the Monday item wins with probability `skew`.
Dataset GenWeekdayPairs(const DgpConfig& cfg, double skew);

// Dispatches on cfg.scenario, using cfg.month_effects and cfg.skew.
Dataset Generate(const DgpConfig& cfg);

struct ContextGroup {
  std::string context_id;
  std::vector<std::pair<std::string, double>> members;  // (item id, outcome)
};

// All strictly ordered pairs per context, capped at `cap` per context by
// descending margin with ties broken by (winner_id, loser_id).
std::vector<PreferencePair> BuildPairs(std::span<const ContextGroup> groups,
                                       int cap);

// Rebuilds pairs from dataset.contexts using the current outcomes.
std::vector<PreferencePair> BuildPairs(const Dataset& dataset, int cap);

// Constant outcome shift for Monday items that makes
// P(monday item beats other item) = skew, when both have s ~ U[0,1] and
// independent N(0, noise_sd^2) noise.
double MondayShiftForSkew(double skew, double noise_sd);

}  // namespace deconfound

#endif  // DECONFOUND_DGP_HPP_
