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

#include "deconfound/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <tuple>

#include "deconfound/error.hpp"
#include "deconfound/parallel.hpp"

namespace deconfound {
namespace {

constexpr const char* kRegionInstrument[] = {"", "region_west",
                                             "region_central", "region_east"};

std::string PaddedId(const char* prefix, std::int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%07lld", prefix, static_cast<long long>(i));
  return buf;
}

Region DrawRegion(CounterRng& rng, const std::array<double, 4>& prob) {
  double u = rng.Uniform();
  double acc = 0.0;
  for (int r = 0; r < 3; ++r) {
    acc += prob[r];
    if (u < acc) return static_cast<Region>(r);
  }
  return Region::kEast;
}

Split DrawSplit(CounterRng& rng, const SplitFractions& f) {
  double u = rng.Uniform();
  if (u < f.train) return Split::kTrain;
  if (u < f.train + f.valid) return Split::kValid;
  return Split::kTest;
}

double RegionLevel(Region r, const std::array<double, 3>& levels) {
  return r == Region::kNone ? 0.0 : levels[static_cast<int>(r) - 1];
}

void SetRegionInstruments(Item& item, Region r) {
  for (int k = 1; k <= 3; ++k) {
    item.instruments[kRegionInstrument[k]] =
        static_cast<int>(r) == k ? 1.0 : 0.0;
  }
}

void RequireScenario(const DgpConfig& cfg, Scenario want) {
  if (cfg.scenario != want) {
    throw ConfigError("dgp.scenario: expected '" +
                      std::string(ScenarioName(want)) + "', got '" +
                      std::string(ScenarioName(cfg.scenario)) + "'");
  }
}

// Groups consecutive items of one split (and, when `by_month`, one month)
// into contexts of cfg.context_size. A trailing group of one is dropped.
std::vector<Context> GroupContexts(const Dataset& ds, const DgpConfig& cfg,
                                   bool by_month) {
  std::map<std::pair<Split, int>, std::vector<std::string>> buckets;
  for (const Item& item : ds.items) {
    int month = by_month ? item.month.value_or(0) : 0;
    buckets[{ds.SplitOf(item.id), month}].push_back(item.id);
  }
  std::vector<Context> contexts;
  for (const auto& [key, ids] : buckets) {
    for (std::size_t start = 0; start < ids.size();
         start += static_cast<std::size_t>(cfg.context_size)) {
      std::size_t end = std::min(ids.size(), start + cfg.context_size);
      if (end - start < 2) break;
      char buf[48];
      std::snprintf(buf, sizeof(buf), "%s-m%02d-c%06zu",
                    std::string(SplitName(key.first)).c_str(), key.second,
                    start / cfg.context_size);
      contexts.push_back(
          {buf, std::vector<std::string>(ids.begin() + start, ids.begin() + end)});
    }
  }
  return contexts;
}

Dataset GenPopularity(const DgpConfig& cfg, double entangle) {
  CheckConfig(cfg);
  LayoutFor(cfg);  // rejects a too-small d before any work
  Dataset ds;
  ds.items.resize(static_cast<std::size_t>(cfg.n));
  std::vector<Split> splits(ds.items.size());
  ParallelFor(ds.items.size(), [&](std::size_t i) {
    CounterRng rng(cfg.seed, streams::kItem, i);
    const double s = rng.Uniform();
    const Region region = DrawRegion(rng, cfg.region_prob);
    const double eps = cfg.noise_confounder_sd * rng.Normal();
    const double nu = cfg.noise_outcome_sd * rng.Normal();
    splits[i] = DrawSplit(rng, cfg.split);

    const double p_true = RegionLevel(region, cfg.region_levels) + entangle * s;
    const double p = p_true + eps;

    Item& item = ds.items[i];
    item.id = PaddedId("item-", static_cast<std::int64_t>(i));
    item.embedding = Embed({s, region, false}, cfg, rng);
    item.confounders["popularity"] = p;
    SetRegionInstruments(item, region);
    item.latent = NamedValues{{"sentiment", s},
                              {"popularity_true", p_true},
                              {"nu", nu},
                              {"region", static_cast<double>(region)}};
    item.outcome = s + cfg.coef_confounder * p + nu;
  });
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    ds.split[ds.items[i].id] = splits[i];
  }
  ds.contexts = GroupContexts(ds, cfg, false);
  ds.pairs = BuildPairs(ds, cfg.pair_cap);
  return ds;
}

double NormalCdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// P(U1 - U2 + N(0, 2 sd^2) + shift > 0) with U1, U2 ~ U[0, 1].
double MondayWinProbability(double shift, double noise_sd) {
  if (noise_sd == 0.0) {
    double x = -shift;  // P(D > x), D triangular on [-1, 1]
    if (x <= -1.0) return 1.0;
    if (x >= 1.0) return 0.0;
    double cdf = x < 0.0 ? 0.5 * (1 + x) * (1 + x) : 1.0 - 0.5 * (1 - x) * (1 - x);
    return 1.0 - cdf;
  }
  const double scale = noise_sd * std::numbers::sqrt2;
  auto f = [&](double u) {
    return (1.0 - std::abs(u)) * NormalCdf((u + shift) / scale);
  };
  // Composite Simpson on each linear piece of the triangular density.
  constexpr int kIntervals = 4000;
  double total = 0.0;
  for (double lo : {-1.0, 0.0}) {
    const double h = 1.0 / kIntervals;
    double acc = f(lo) + f(lo + 1.0);
    for (int k = 1; k < kIntervals; ++k) {
      acc += (k % 2 == 1 ? 4.0 : 2.0) * f(lo + k * h);
    }
    total += acc * h / 3.0;
  }
  return total;
}

}  // namespace

EmbeddingLayout LayoutFor(const DgpConfig& cfg) {
  EmbeddingLayout layout;
  int base = 4;
  if (cfg.scenario == Scenario::kWeekdayMarker) {
    layout.marker = 4;
    base = 5;
  }
  layout.nuisance_begin = base;
  const int needed = base + cfg.nuisance_dims;
  if (cfg.d != 0 && cfg.d < needed) {
    throw ConfigError("dgp.d: " + std::to_string(cfg.d) +
                      " is smaller than the embedding layout (" +
                      std::to_string(needed) + ")");
  }
  layout.dim = cfg.d == 0 ? needed : cfg.d;
  layout.nuisance_count = layout.dim - base;
  return layout;
}

std::vector<double> Embed(const ItemAttributes& attrs, const DgpConfig& cfg,
                          CounterRng& rng,
                          std::span<const double> nuisance_shift) {
  const EmbeddingLayout layout = LayoutFor(cfg);
  if (!nuisance_shift.empty() &&
      nuisance_shift.size() != static_cast<std::size_t>(layout.nuisance_count)) {
    throw ConfigError("nuisance shift length does not match layout");
  }
  std::vector<double> e(static_cast<std::size_t>(layout.dim), 0.0);
  e[layout.sentiment] = attrs.sentiment;
  if (attrs.region != Region::kNone) {
    e[layout.region_begin + static_cast<int>(attrs.region) - 1] = 1.0;
  }
  if (layout.marker >= 0) e[layout.marker] = attrs.monday ? 1.0 : 0.0;
  for (int k = 0; k < layout.nuisance_count; ++k) {
    double v = cfg.nuisance_sd * rng.Normal();
    if (!nuisance_shift.empty()) v += nuisance_shift[k];
    e[layout.nuisance_begin + k] = v;
  }
  return e;
}

Dataset GenOrthogonal(const DgpConfig& cfg) {
  RequireScenario(cfg, Scenario::kOrthogonal);
  return GenPopularity(cfg, 0.0);
}

Dataset GenEntangled(const DgpConfig& cfg) {
  RequireScenario(cfg, Scenario::kEntangled);
  return GenPopularity(cfg, cfg.coef_entangle);
}

Dataset GenTemporal(const DgpConfig& cfg,
                    std::span<const double> month_effects) {
  RequireScenario(cfg, Scenario::kTemporal);
  CheckConfig(cfg);
  if (month_effects.size() != 12) {
    throw ConfigError("dgp.month_effects: expected 12 values, got " +
                      std::to_string(month_effects.size()));
  }
  const EmbeddingLayout layout = LayoutFor(cfg);

  // Per-month topic drift, shared by every item of that month.
  std::vector<std::vector<double>> shift(12);
  for (int m = 0; m < 12; ++m) {
    CounterRng rng(cfg.seed, streams::kLoadings, static_cast<std::uint64_t>(m));
    shift[m].resize(static_cast<std::size_t>(layout.nuisance_count));
    for (double& v : shift[m]) v = cfg.month_drift * rng.Normal();
  }

  Dataset ds;
  ds.items.resize(static_cast<std::size_t>(cfg.n));
  std::vector<Split> splits(ds.items.size());
  ParallelFor(ds.items.size(), [&](std::size_t i) {
    CounterRng rng(cfg.seed, streams::kItem, i);
    const double s = rng.Uniform();
    const Region region = DrawRegion(rng, cfg.region_prob);
    const int month = 1 + static_cast<int>(rng.Below(12));
    const double nu = cfg.noise_outcome_sd * rng.Normal();
    splits[i] = DrawSplit(rng, cfg.split);
    const double effect = month_effects[month - 1];

    Item& item = ds.items[i];
    item.id = PaddedId("item-", static_cast<std::int64_t>(i));
    item.embedding = Embed({s, region, false}, cfg, rng, shift[month - 1]);
    item.confounders["month_effect"] = effect;
    for (int m = 1; m <= 12; ++m) {
      item.instruments["month_" + std::to_string(m)] = m == month ? 1.0 : 0.0;
    }
    item.latent = NamedValues{{"sentiment", s},
                              {"nu", nu},
                              {"region", static_cast<double>(region)}};
    item.month = month;
    item.outcome = s + effect + nu;
  });
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    ds.split[ds.items[i].id] = splits[i];
  }
  ds.contexts = GroupContexts(ds, cfg, true);
  ds.pairs = BuildPairs(ds, cfg.pair_cap);
  return ds;
}

double MondayShiftForSkew(double skew, double noise_sd) {
  if (!(skew >= 0.0 && skew <= 1.0)) {
    throw ConfigError("skew must lie in [0, 1]");
  }
  if (skew == 0.5) return 0.0;
  // Beyond +-bound the win probability equals 0 or 1 in double precision.
  const double bound = 1.0 + 40.0 * noise_sd * std::numbers::sqrt2;
  if (skew >= MondayWinProbability(bound, noise_sd)) return bound;
  if (skew <= MondayWinProbability(-bound, noise_sd)) return -bound;
  double lo = -bound, hi = bound;
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    double mid = 0.5 * (lo + hi);
    if (MondayWinProbability(mid, noise_sd) < skew) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Dataset GenWeekdayPairs(const DgpConfig& cfg, double skew) {
  RequireScenario(cfg, Scenario::kWeekdayMarker);
  CheckConfig(cfg);
  if (!(skew >= 0.0 && skew <= 1.0)) {
    throw ConfigError("skew: must lie in [0, 1], got " + std::to_string(skew));
  }
  const double shift = MondayShiftForSkew(skew, cfg.noise_outcome_sd);

  const auto n_ctx = static_cast<std::size_t>(cfg.n);
  std::vector<std::size_t> sizes(n_ctx), offsets(n_ctx + 1, 0);
  std::vector<Split> ctx_split(n_ctx);
  for (std::size_t c = 0; c < n_ctx; ++c) {
    CounterRng rng(cfg.seed, streams::kContext, c);
    sizes[c] = 2 + rng.Below(4);
    ctx_split[c] = DrawSplit(rng, cfg.split);
    offsets[c + 1] = offsets[c] + sizes[c];
  }

  Dataset ds;
  ds.items.resize(offsets.back());
  ds.contexts.resize(n_ctx);
  ParallelFor(n_ctx, [&](std::size_t c) {
    Context& ctx = ds.contexts[c];
    ctx.id = PaddedId("q", static_cast<std::int64_t>(c));
    for (std::size_t k = 0; k < sizes[c]; ++k) {
      const std::size_t i = offsets[c] + k;
      CounterRng rng(cfg.seed, streams::kItem, i);
      const double s = rng.Uniform();
      const Region region = DrawRegion(rng, cfg.region_prob);
      const int weekday = static_cast<int>(rng.Below(7));
      const double nu = cfg.noise_outcome_sd * rng.Normal();
      const bool monday = weekday == 0;

      Item& item = ds.items[i];
      item.id = ctx.id + "-a" + std::to_string(k);
      item.embedding = Embed({s, region, monday}, cfg, rng);
      item.confounders["monday"] = monday ? 1.0 : 0.0;
      item.latent = NamedValues{{"sentiment", s},
                                {"nu", nu},
                                {"region", static_cast<double>(region)}};
      item.weekday = weekday;
      item.outcome = s + (monday ? shift : 0.0) + nu;
      ctx.members.push_back(item.id);
    }
  });
  for (std::size_t c = 0; c < n_ctx; ++c) {
    for (const std::string& id : ds.contexts[c].members) {
      ds.split[id] = ctx_split[c];
    }
  }
  ds.pairs = BuildPairs(ds, cfg.pair_cap);
  return ds;
}

Dataset Generate(const DgpConfig& cfg) {
  switch (cfg.scenario) {
    case Scenario::kOrthogonal:
      return GenOrthogonal(cfg);
    case Scenario::kEntangled:
      return GenEntangled(cfg);
    case Scenario::kTemporal:
      return GenTemporal(cfg, cfg.month_effects);
    case Scenario::kWeekdayMarker:
      return GenWeekdayPairs(cfg, cfg.skew);
  }
  throw ConfigError("dgp.scenario: unknown");
}

std::vector<PreferencePair> BuildPairs(std::span<const ContextGroup> groups,
                                       int cap) {
  std::vector<PreferencePair> out;
  std::vector<PreferencePair> local;
  for (const ContextGroup& g : groups) {
    local.clear();
    for (std::size_t a = 0; a < g.members.size(); ++a) {
      for (std::size_t b = 0; b < g.members.size(); ++b) {
        const auto& [wid, wy] = g.members[a];
        const auto& [lid, ly] = g.members[b];
        if (a == b || !(wy > ly)) continue;
        local.push_back({g.context_id, wid, lid, wy - ly});
      }
    }
    std::sort(local.begin(), local.end(),
              [](const PreferencePair& x, const PreferencePair& y) {
                if (x.margin != y.margin) return x.margin > y.margin;
                return std::tie(x.winner_id, x.loser_id) <
                       std::tie(y.winner_id, y.loser_id);
              });
    if (cap >= 0 && local.size() > static_cast<std::size_t>(cap)) {
      local.resize(static_cast<std::size_t>(cap));
    }
    out.insert(out.end(), local.begin(), local.end());
  }
  return out;
}

std::vector<PreferencePair> BuildPairs(const Dataset& dataset, int cap) {
  const auto index = dataset.IndexById();
  std::vector<ContextGroup> groups;
  groups.reserve(dataset.contexts.size());
  for (const Context& ctx : dataset.contexts) {
    ContextGroup g{ctx.id, {}};
    for (const std::string& id : ctx.members) {
      auto it = index.find(id);
      if (it == index.end()) {
        throw ConfigError("context '" + ctx.id + "' references unknown item '" +
                          id + "'");
      }
      g.members.emplace_back(id, dataset.items[it->second].outcome);
    }
    groups.push_back(std::move(g));
  }
  return BuildPairs(groups, cap);
}

}  // namespace deconfound
