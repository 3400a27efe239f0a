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

#include "deconfound/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "deconfound/error.hpp"

namespace deconfound {

double RocAucFromScores(std::span<const double> winner_scores,
                        std::span<const double> loser_scores) {
  if (winner_scores.size() != loser_scores.size()) {
    throw ConfigError("roc_auc: score vectors differ in length");
  }
  if (winner_scores.empty()) throw ConfigError("roc_auc: empty pair set");
  double credit = 0.0;
  for (std::size_t i = 0; i < winner_scores.size(); ++i) {
    if (winner_scores[i] > loser_scores[i]) {
      credit += 1.0;
    } else if (winner_scores[i] == loser_scores[i]) {
      credit += 0.5;
    }
  }
  return credit / static_cast<double>(winner_scores.size());
}

double RocAuc(const Dataset& dataset, std::span<const PreferencePair> pairs,
              const RewardModel& model) {
  if (pairs.empty()) throw ConfigError("roc_auc: empty pair set");
  const auto index = dataset.IndexById();
  std::vector<double> win(pairs.size()), lose(pairs.size());
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    auto w = index.find(pairs[r].winner_id);
    auto l = index.find(pairs[r].loser_id);
    if (w == index.end() || l == index.end()) {
      throw ConfigError("roc_auc: pair " + std::to_string(r) +
                        " references an unknown item");
    }
    win[r] = Predict(model, dataset.items[w->second]);
    lose[r] = Predict(model, dataset.items[l->second]);
  }
  return RocAucFromScores(win, lose);
}

double MannWhitneyAuc(std::span<const double> scores,
                      std::span<const bool> positive) {
  if (scores.size() != positive.size()) {
    throw ConfigError("mann_whitney: length mismatch");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the midrank keeps every quantity an exact integer.
  double rank_sum2 = 0.0;
  double n_pos = 0.0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) ++end;
    const double midrank2 = static_cast<double>(start + 1 + end);  // 2 * mean rank
    for (std::size_t k = start; k < end; ++k) {
      if (positive[order[k]]) {
        rank_sum2 += midrank2;
        n_pos += 1.0;
      }
    }
    start = end;
  }
  const double n_neg = static_cast<double>(scores.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) {
    throw ConfigError("mann_whitney: need both positive and negative items");
  }
  const double u2 = rank_sum2 - n_pos * (n_pos + 1.0);  // 2U
  return (u2 / 2.0) / (n_pos * n_neg);
}

double Pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("pearson: length mismatch");
  if (a.size() < 2) throw ConfigError("pearson: need at least 2 values");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double saa = 0.0, sbb = 0.0, sab = 0.0, amax = 0.0, bmax = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
    amax = std::max(amax, std::abs(a[i]));
    bmax = std::max(bmax, std::abs(b[i]));
  }
  auto constant = [n](double ss, double mag) {
    return !(ss > 0.0) || std::sqrt(ss / n) <= 1e-10 * mag;
  };
  if (constant(saa, amax) || constant(sbb, bmax)) {
    throw NumericalError("pearson: undefined correlation (zero variance)");
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double TemporalCorr(const RewardModel& model, const Dataset& dataset) {
  std::map<int, std::pair<double, int>> predicted, observed;
  for (const Item& item : dataset.items) {
    if (!item.month) continue;
    const Split s = dataset.SplitOf(item.id);
    if (s == Split::kValid) {
      auto& acc = predicted[*item.month];
      acc.first += Predict(model, item);
      acc.second += 1;
    } else if (s == Split::kTrain) {
      auto& acc = observed[*item.month];
      acc.first += item.outcome;
      acc.second += 1;
    }
  }
  std::vector<double> a, b;
  for (const auto& [month, acc] : predicted) {
    auto it = observed.find(month);
    if (it == observed.end()) continue;
    a.push_back(acc.first / acc.second);
    b.push_back(it->second.first / it->second.second);
  }
  if (a.size() < 2) {
    throw NumericalError("temporal_corr: fewer than 2 months common to the "
                         "train and valid splits");
  }
  return Pearson(a, b);
}

double Mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double StandardError(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = Mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double n = static_cast<double>(v.size());
  return std::sqrt(ss / (n - 1.0) / n);
}

MarkerSummary MarkerStats(const std::vector<std::vector<bool>>& runs) {
  if (runs.empty()) throw ConfigError("marker_stats: need at least one run");
  MarkerSummary out;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (runs[r].empty()) {
      throw ConfigError("marker_stats: run " + std::to_string(r) + " is empty");
    }
    const auto hits = std::count(runs[r].begin(), runs[r].end(), true);
    out.rates.push_back(static_cast<double>(hits) /
                        static_cast<double>(runs[r].size()));
  }
  out.mean = Mean(out.rates);
  out.se = StandardError(out.rates);
  return out;
}

namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
double BetaContinuedFraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw NumericalError("incomplete beta: continued fraction did not converge");
}

TTestResult FromStatistic(double t, double df) {
  return {t, df, StudentTwoSidedP(t, df)};
}

double Variance(std::span<const double> v) {
  const double m = Mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

double RegularizedIncompleteBeta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("incomplete beta: a, b must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("incomplete beta: x outside [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * BetaContinuedFraction(a, b, x) / a;
  }
  return 1.0 - front * BetaContinuedFraction(b, a, 1.0 - x) / b;
}

double StudentTwoSidedP(double t, double df) {
  if (std::isnan(t) || !(df > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  return RegularizedIncompleteBeta(0.5 * df, 0.5, df / (df + t * t));
}

TTestResult WelchTTest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw ConfigError("welch_ttest: each sample needs at least 2 values");
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = Variance(a) / na, vb = Variance(b) / nb;
  const double diff = Mean(a) - Mean(b);
  const double se2 = va + vb;
  if (se2 == 0.0) {
    if (diff == 0.0) return {0.0, na + nb - 2.0, 1.0};
    return {diff > 0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity(),
            na + nb - 2.0, 0.0};
  }
  const double df =
      se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  return FromStatistic(diff / std::sqrt(se2), df);
}

TTestResult OneSampleTTest(std::span<const double> a, double mu0) {
  if (a.size() < 2) throw ConfigError("one-sample t-test: need at least 2 values");
  const double n = static_cast<double>(a.size());
  const double se2 = Variance(a) / n;
  const double diff = Mean(a) - mu0;
  if (se2 == 0.0) {
    if (diff == 0.0) return {0.0, n - 1.0, 1.0};
    return {diff > 0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity(),
            n - 1.0, 0.0};
  }
  return FromStatistic(diff / std::sqrt(se2), n - 1.0);
}

std::vector<const Item*> BestOfN(const RewardModel& model,
                                 std::span<const CandidateSet> sets) {
  std::vector<const Item*> chosen;
  chosen.reserve(sets.size());
  for (const CandidateSet& set : sets) {
    if (set.candidates.empty()) {
      throw ConfigError("best_of_n: context '" + set.context_id +
                        "' has no candidates");
    }
    const Item* best = nullptr;
    double best_score = 0.0;
    for (const Item* item : set.candidates) {
      const double score = Predict(model, *item);
      if (best == nullptr || score > best_score ||
          (score == best_score && item->id < best->id)) {
        best = item;
        best_score = score;
      }
    }
    chosen.push_back(best);
  }
  return chosen;
}

std::vector<CandidateSet> MakeCandidateSets(std::span<const Item* const> items,
                                            int k) {
  if (k < 1) throw ConfigError("candidate_k: must be >= 1");
  std::vector<CandidateSet> sets;
  for (std::size_t start = 0; start < items.size(); start += static_cast<std::size_t>(k)) {
    const std::size_t end = std::min(items.size(), start + static_cast<std::size_t>(k));
    CandidateSet set;
    set.context_id = "cand-" + std::to_string(start / static_cast<std::size_t>(k));
    set.candidates.assign(items.begin() + start, items.begin() + end);
    sets.push_back(std::move(set));
  }
  return sets;
}

ArmSummary ArmReport(const std::string& arm,
                     const std::vector<std::vector<const Item*>>& picks) {
  ArmSummary out;
  out.arm = arm;
  for (const auto& seed_picks : picks) {
    double sum = 0.0;
    for (const Item* item : seed_picks) {
      if (!item->latent || !item->latent->contains("sentiment") ||
          !item->latent->contains("region")) {
        throw ConfigError("arm_report: item '" + item->id +
                          "' lacks latent sentiment/region");
      }
      sum += item->latent->at("sentiment");
      const int region = static_cast<int>(item->latent->at("region"));
      if (region >= 1 && region <= 3) ++out.region_counts[region - 1];
      ++out.picks;
    }
    out.seed_means.push_back(seed_picks.empty() ? 0.0
                                                : sum / static_cast<double>(seed_picks.size()));
  }
  out.mean_sentiment = Mean(out.seed_means);
  out.se = StandardError(out.seed_means);
  return out;
}

}  // namespace deconfound
