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

#include "deconfound/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <sstream>

#include "deconfound/dgp.hpp"
#include "deconfound/error.hpp"
#include "deconfound/parallel.hpp"
#include "deconfound/rng.hpp"

namespace deconfound {
namespace {

[[noreturn]] void Annotate(const Error& e, const std::string& where) {
  throw Error(e.kind(), where + ": " + e.what());
}

double MeanSquaredError(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                        const RewardModel& model) {
  if (x.rows() == 0) return 0.0;
  Eigen::Map<const Eigen::VectorXd> w(model.weights.data(), x.cols());
  Eigen::VectorXd r = y - x * w;
  r.array() -= model.bias;
  return r.squaredNorm() / static_cast<double>(x.rows());
}

double Sentiment(const Item& item) {
  if (!item.latent || !item.latent->contains("sentiment")) {
    throw ConfigError("item '" + item.id + "' lacks latent sentiment");
  }
  return item.latent->at("sentiment");
}

double SentimentCorrelation(const RewardModel& model,
                            const std::vector<const Item*>& items) {
  std::vector<double> score, truth;
  score.reserve(items.size());
  truth.reserve(items.size());
  for (const Item* item : items) {
    score.push_back(Predict(model, *item));
    truth.push_back(Sentiment(*item));
  }
  return Pearson(score, truth);
}

std::string FormatDouble(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::vector<double> LogGrid(double lo_exp, double hi_exp, int count) {
  if (count < 1) throw ConfigError("grid: count must be >= 1");
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    grid.push_back(std::pow(10.0, lo_exp + t * (hi_exp - lo_exp)));
  }
  return grid;
}

std::vector<double> ParseGrid(const std::string& text) {
  static const std::regex kSpace(
      R"(^\s*(logspace|linspace)\(\s*([^,\s]+)\s*,\s*([^,\s]+)\s*,\s*([0-9]+)\s*\)\s*$)");
  std::smatch m;
  auto number = [&](const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || !std::isfinite(v)) {
      throw ConfigError("grid: cannot parse number '" + s + "' in '" + text + "'");
    }
    return v;
  };
  if (std::regex_match(text, m, kSpace)) {
    const double a = number(m[2]);
    const double b = number(m[3]);
    const int n = std::atoi(m[4].str().c_str());
    if (n < 1) throw ConfigError("grid: count must be >= 1 in '" + text + "'");
    if (m[1] == "logspace") return LogGrid(a, b, n);
    std::vector<double> grid;
    for (int i = 0; i < n; ++i) {
      grid.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
    }
    return grid;
  }
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(" \t"));
    tok.erase(tok.find_last_not_of(" \t") + 1);
    grid.push_back(number(tok));
  }
  if (grid.empty()) throw ConfigError("grid: empty specification");
  return grid;
}

SweepReport RunLambdaSweep(const Dataset& dataset, std::span<const double> grid,
                           const FitOptions& opts) {
  if (grid.empty()) throw ConfigError("sweep: grid is empty");
  std::vector<double> lambdas(grid.begin(), grid.end());
  for (double l : lambdas) {
    if (!(l >= 0.0) || !std::isfinite(l)) {
      throw ConfigError("sweep: lambda values must be finite and >= 0");
    }
  }
  std::sort(lambdas.begin(), lambdas.end());
  if (std::adjacent_find(lambdas.begin(), lambdas.end()) != lambdas.end()) {
    throw ConfigError("sweep: grid contains duplicate lambda values");
  }
  const auto train = dataset.ItemsIn(Split::kTrain);
  const auto valid = dataset.ItemsIn(Split::kValid);
  const auto test_pairs = dataset.PairsIn(Split::kTest);
  if (train.empty()) throw ConfigError("sweep: no training items");
  if (valid.empty()) throw ConfigError("sweep: no validation items");
  if (test_pairs.empty()) throw ConfigError("sweep: no test pairs");
  const bool has_months = std::any_of(
      dataset.items.begin(), dataset.items.end(),
      [](const Item& item) { return item.month.has_value(); });

  const Eigen::MatrixXd x_train = EmbeddingMatrix(train);
  const Eigen::VectorXd y_train = OutcomeVector(train);
  const Eigen::MatrixXd x_valid = EmbeddingMatrix(valid);
  const Eigen::VectorXd y_valid = OutcomeVector(valid);

  SweepReport report;
  report.rows.resize(lambdas.size());
  ParallelFor(lambdas.size(), [&](std::size_t i) {
    FitOptions o = opts;
    o.lambda = lambdas[i];
    SweepRow& row = report.rows[i];
    row.lambda = lambdas[i];
    try {
      const RewardModel model = FitRidge(x_train, y_train, o);
      row.train_mse = MeanSquaredError(x_train, y_train, model);
      row.valid_mse = MeanSquaredError(x_valid, y_valid, model);
      row.test_pair_auc = RocAuc(dataset, test_pairs, model);
      if (has_months) {
        try {
          row.temporal_corr = TemporalCorr(model, dataset);
        } catch (const NumericalError&) {
          row.temporal_corr.reset();
        }
      }
    } catch (const Error& e) {
      Annotate(e, "lambda=" + FormatDouble(lambdas[i]));
    }
  });
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    if (report.rows[i].valid_mse < report.rows[report.argmin_valid].valid_mse) {
      report.argmin_valid = i;
    }
    if (report.rows[i].test_pair_auc > report.rows[report.argmax_auc].test_pair_auc) {
      report.argmax_auc = i;
    }
  }
  return report;
}

namespace {

Dataset AppendConfounderToEmbedding(const Dataset& ds,
                                    const std::string& confounder) {
  Dataset out = ds;
  for (Item& item : out.items) {
    auto it = item.confounders.find(confounder);
    if (it == item.confounders.end()) {
      throw ConfigError("item '" + item.id + "' lacks confounder '" +
                        confounder + "'");
    }
    item.embedding.push_back(it->second);
  }
  return out;
}

ArmSeedResult RunArm(const std::string& arm, const Dataset& ds,
                     std::uint64_t seed, const DgpConfig& cfg,
                     const ScenarioOptions& opts) {
  ArmSeedResult result;
  result.arm = arm;
  result.seed = seed;

  const Dataset* eval_ds = &ds;
  Dataset augmented;
  if (arm == "conf_in_embedding") {
    augmented = AppendConfounderToEmbedding(ds, opts.confounder);
    eval_ds = &augmented;
  }
  const auto train = eval_ds->ItemsIn(Split::kTrain);
  const auto valid = eval_ds->ItemsIn(Split::kValid);
  const auto test = eval_ds->ItemsIn(Split::kTest);
  const Eigen::MatrixXd x = EmbeddingMatrix(train);
  Eigen::VectorXd target(x.rows());

  std::optional<ExtraColumns> extra;
  if (arm == "oracle_sentiment") {
    for (Eigen::Index i = 0; i < x.rows(); ++i) target(i) = Sentiment(*train[i]);
  } else if (arm == "sentiment_plus_noise") {
    const Item* base = eval_ds->items.data();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      CounterRng rng(seed, streams::kArmNoise,
                     static_cast<std::uint64_t>(train[i] - base));
      target(i) = Sentiment(*train[i]) + cfg.noise_outcome_sd * rng.Normal();
    }
  } else if (arm == "naive_observed" || arm == "conf_in_embedding") {
    target = OutcomeVector(train);
  } else if (arm == "conf_in_head") {
    target = OutcomeVector(train);
    ExtraColumns cols{{opts.confounder}, Eigen::MatrixXd(x.rows(), 1)};
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      auto it = train[i]->confounders.find(opts.confounder);
      if (it == train[i]->confounders.end()) {
        throw ConfigError("item '" + train[i]->id + "' lacks confounder '" +
                          opts.confounder + "'");
      }
      cols.values(i, 0) = it->second;
    }
    extra = std::move(cols);
  } else if (arm == "deconfound_iv" || arm == "deconfound_dml") {
    const DeconfoundFit fit =
        arm == "deconfound_iv"
            ? FitIv2sls(ds, opts.confounder, opts.instruments)
            : FitDml(ds, opts.confounder, opts.folds, opts.fit);
    result.alpha_hat = fit.alpha.at(opts.confounder);
    result.alpha_se = fit.std_error.at(opts.confounder);
    const Dataset residual = Residualize(ds, fit);
    target = OutcomeVector(residual.ItemsIn(Split::kTrain));
  } else {
    throw ConfigError("unknown arm '" + arm + "'");
  }

  const RewardModel model =
      FitRidge(x, target, opts.fit, extra ? &*extra : nullptr);
  result.reward_sentiment_corr_train = SentimentCorrelation(model, train);
  result.reward_sentiment_corr_valid = SentimentCorrelation(model, valid);
  const auto test_pairs = eval_ds->PairsIn(Split::kTest);
  if (!test_pairs.empty()) {
    result.test_pair_auc = RocAuc(*eval_ds, test_pairs, model);
  }

  const auto sets = MakeCandidateSets(test, opts.candidate_k);
  const auto picks = BestOfN(model, sets);
  const ArmSummary summary = ArmReport(arm, {picks});
  result.mean_sentiment = summary.mean_sentiment;
  result.region_counts = summary.region_counts;
  result.picks = summary.picks;
  return result;
}

}  // namespace

EvalReport RunScenario(const DgpConfig& cfg, const ScenarioOptions& opts) {
  if (cfg.scenario != Scenario::kOrthogonal &&
      cfg.scenario != Scenario::kEntangled) {
    throw ConfigError("scenario: arms need the orthogonal or entangled scenario");
  }
  if (opts.seeds.empty()) throw ConfigError("scenario: no seeds given");
  if (opts.arms.empty()) throw ConfigError("scenario: no arms given");
  std::vector<std::string> seen;
  for (const std::string& arm : opts.arms) {
    if (std::find(kArmNames.begin(), kArmNames.end(), arm) == kArmNames.end()) {
      throw ConfigError("scenario: unknown arm '" + arm + "'");
    }
    if (std::find(seen.begin(), seen.end(), arm) != seen.end()) {
      throw ConfigError("scenario: arm '" + arm + "' requested twice");
    }
    seen.push_back(arm);
  }
  CheckOptions(opts.fit);

  const std::size_t n_seeds = opts.seeds.size();
  const std::size_t n_arms = opts.arms.size();
  std::vector<std::vector<ArmSeedResult>> grid(n_seeds);
  ParallelFor(n_seeds, [&](std::size_t s) {
    DgpConfig seeded = cfg;
    seeded.seed = opts.seeds[s];
    const Dataset ds = Generate(seeded);
    grid[s].resize(n_arms);
    for (std::size_t a = 0; a < n_arms; ++a) {
      try {
        grid[s][a] = RunArm(opts.arms[a], ds, opts.seeds[s], seeded, opts);
      } catch (const Error& e) {
        Annotate(e, "arm " + opts.arms[a] + ", seed " +
                        std::to_string(opts.seeds[s]));
      }
    }
  });

  EvalReport report;
  report.scenario = std::string(ScenarioName(cfg.scenario));
  report.seeds = opts.seeds;
  for (std::size_t a = 0; a < n_arms; ++a) {
    ArmRow row;
    row.arm = opts.arms[a];
    std::vector<double> sent, ctrain, cvalid, auc, alpha;
    long long picks = 0;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const ArmSeedResult& r = grid[s][a];
      report.per_seed.push_back(r);
      sent.push_back(r.mean_sentiment);
      ctrain.push_back(r.reward_sentiment_corr_train);
      cvalid.push_back(r.reward_sentiment_corr_valid);
      auc.push_back(r.test_pair_auc);
      if (r.alpha_hat) alpha.push_back(*r.alpha_hat);
      for (int k = 0; k < 3; ++k) row.region_counts[k] += r.region_counts[k];
      picks += r.picks;
    }
    row.mean_sentiment = Mean(sent);
    row.se = StandardError(sent);
    row.reward_sentiment_corr_train = Mean(ctrain);
    row.reward_sentiment_corr_train_se = StandardError(ctrain);
    row.reward_sentiment_corr_valid = Mean(cvalid);
    row.reward_sentiment_corr_valid_se = StandardError(cvalid);
    row.test_pair_auc = Mean(auc);
    const long long tagged =
        row.region_counts[0] + row.region_counts[1] + row.region_counts[2];
    row.region_pick_rate =
        picks == 0 ? 0.0 : static_cast<double>(tagged) / static_cast<double>(picks);
    if (!alpha.empty()) row.alpha_hat = Mean(alpha);
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace {

struct WeekdaySeedResult {
  double naive_weight = 0.0;
  double deconf_weight = 0.0;
  double naive_rate = 0.0;
  double deconf_rate = 0.0;
  double base_rate = 0.0;
  double monday_win_fraction = 0.0;
};

RewardModel FitBtSafe(const Dataset& ds, const std::vector<PreferencePair>& pairs,
                      FitOptions opts) {
  const Eigen::MatrixXd diffs = PairDifferences(ds, pairs);
  opts.learning_rate = BtSafeStep(diffs, opts.lambda);
  return FitPairwiseBt(diffs, opts);
}

double MarkerRate(const std::vector<const Item*>& items) {
  if (items.empty()) return 0.0;
  std::size_t hits = 0;
  for (const Item* item : items) hits += item->weekday.value_or(-1) == 0;
  return static_cast<double>(hits) / static_cast<double>(items.size());
}

}  // namespace

WeekdayReport RunWeekdayStudy(const DgpConfig& cfg, double skew,
                              const WeekdayOptions& opts) {
  if (cfg.scenario != Scenario::kWeekdayMarker) {
    throw ConfigError("weekday study: dgp.scenario must be 'weekday_marker'");
  }
  if (opts.seeds.empty()) throw ConfigError("weekday study: no seeds given");
  CheckOptions(opts.fit);
  const EmbeddingLayout layout = LayoutFor(cfg);
  const std::vector<std::string> monday = {"monday"};

  std::vector<WeekdaySeedResult> results(opts.seeds.size());
  ParallelFor(opts.seeds.size(), [&](std::size_t s) {
    try {
      DgpConfig seeded = cfg;
      seeded.seed = opts.seeds[s];
      const Dataset ds = GenWeekdayPairs(seeded, skew);
      WeekdaySeedResult& r = results[s];

      const auto train_pairs = ds.PairsIn(Split::kTrain);
      const auto index = ds.IndexById();
      std::size_t mixed = 0, monday_wins = 0;
      for (const PreferencePair& p : train_pairs) {
        const bool w = ds.items[index.at(p.winner_id)].weekday == 0;
        const bool l = ds.items[index.at(p.loser_id)].weekday == 0;
        if (w != l) {
          ++mixed;
          monday_wins += w;
        }
      }
      r.monday_win_fraction =
          mixed == 0 ? 0.0 : static_cast<double>(monday_wins) / static_cast<double>(mixed);

      const RewardModel naive = FitBtSafe(ds, train_pairs, opts.fit);

      Dataset residual = Residualize(ds, FitOls(ds, monday));
      residual.pairs = BuildPairs(residual, seeded.pair_cap);
      const RewardModel deconf =
          FitBtSafe(residual, residual.PairsIn(Split::kTrain), opts.fit);

      r.naive_weight = naive.weights[layout.marker];
      r.deconf_weight = deconf.weights[layout.marker];

      const auto test = ds.ItemsIn(Split::kTest);
      const auto sets = MakeCandidateSets(test, opts.candidate_k);
      r.base_rate = MarkerRate(test);
      r.naive_rate = MarkerRate(BestOfN(naive, sets));
      r.deconf_rate = MarkerRate(BestOfN(deconf, sets));
    } catch (const Error& e) {
      Annotate(e, "seed " + std::to_string(opts.seeds[s]));
    }
  });

  WeekdayReport report;
  report.skew = skew;
  report.seeds = opts.seeds;
  report.naive.arm = "naive";
  report.deconfounded.arm = "deconfounded";
  for (const WeekdaySeedResult& r : results) {
    report.naive.marker_weights.push_back(r.naive_weight);
    report.deconfounded.marker_weights.push_back(r.deconf_weight);
    report.naive.pick_rates.push_back(r.naive_rate);
    report.deconfounded.pick_rates.push_back(r.deconf_rate);
    report.base_rates.push_back(r.base_rate);
    report.monday_win_fraction.push_back(r.monday_win_fraction);
  }
  report.base_rate_mean = Mean(report.base_rates);
  for (WeekdayArmRow* row : {&report.naive, &report.deconfounded}) {
    row->weight_mean = Mean(row->marker_weights);
    row->weight_se = StandardError(row->marker_weights);
    row->rate_mean = Mean(row->pick_rates);
    row->rate_se = StandardError(row->pick_rates);
    if (row->marker_weights.size() >= 2) {
      row->weight_vs_zero = OneSampleTTest(row->marker_weights, 0.0);
    }
  }
  if (opts.seeds.size() >= 2) {
    report.weight_welch = WelchTTest(report.naive.marker_weights,
                                     report.deconfounded.marker_weights);
    report.rate_welch =
        WelchTTest(report.naive.pick_rates, report.deconfounded.pick_rates);
  }
  return report;
}

}  // namespace deconfound
