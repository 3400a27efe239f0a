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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Thresholds and budgets are fixed below.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "deconfound/deconfound.hpp"
#include "deconfound/dgp.hpp"
#include "deconfound/eval.hpp"
#include "deconfound/harness.hpp"
#include "deconfound/reward.hpp"

namespace dc = deconfound;
namespace fs = std::filesystem;

namespace {

// ---- pinned thresholds ----------------------------------------------------

constexpr double kTrueAlpha = 0.1;
// Population slope of y on p alone, entangled scenario, Var(s) = 1/12:
// 0.1 - 10.5 Var(s) / (Var(level) + 10.5^2 Var(s) + 0.5^2).
constexpr double kAnalyticOlsSlope = 0.1 - 0.875 / 10.6875;

constexpr int kRecoverySeeds = 20;
constexpr int kRecoveryNeeded = 18;
constexpr std::int64_t kRecoveryN = 10000;

constexpr std::int64_t kScenarioN = 10000;
constexpr int kScenarioSeeds = 5;
constexpr int kScenarioNeeded = 4;

constexpr int kWeekdaySeeds = 10;
constexpr std::int64_t kWeekdayContexts = 1000;
constexpr double kWeekdaySkew = 0.6;
constexpr double kAlphaLevel = 0.05;

constexpr int kSweepSeeds = 20;
constexpr double kSweepOrderFraction = 0.8;
constexpr double kSweepCorrFraction = 0.7;

constexpr double kGradRelTol = 1e-4;
constexpr double kSelfIvTol = 1e-10;
constexpr double kWelchTol = 1e-6;
constexpr double kWelchT = -3.674234614;  // -3 / sqrt(2/3)
constexpr double kWelchDf = 4.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::vector<std::uint64_t> Seeds(int count) {
  std::vector<std::uint64_t> s(count);
  for (int i = 0; i < count; ++i) s[i] = static_cast<std::uint64_t>(i + 1);
  return s;
}

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

const std::vector<std::string> kRegions = {"region_west", "region_central",
                                           "region_east"};

// ---- 1. confounder coefficient recovery ----------------------------------

Outcome AlphaRecovery() {
  int iv_covers = 0;
  int ols_misses = 0;
  double ols_sum = 0.0, ols_se_sum = 0.0;
  const std::vector<std::string> pop = {"popularity"};
  for (std::uint64_t seed : Seeds(kRecoverySeeds)) {
    dc::DgpConfig cfg;
    cfg.scenario = dc::Scenario::kEntangled;
    cfg.n = kRecoveryN;
    cfg.seed = seed;
    const dc::Dataset ds = dc::Generate(cfg);
    const dc::DeconfoundFit iv = dc::FitIv2sls(ds, "popularity", kRegions);
    const dc::DeconfoundFit ols = dc::FitOls(ds, pop);
    const double a_iv = iv.alpha.at("popularity"), se_iv = iv.std_error.at("popularity");
    const double a_ols = ols.alpha.at("popularity"), se_ols = ols.std_error.at("popularity");
    iv_covers += std::abs(a_iv - kTrueAlpha) <= 3.0 * se_iv;
    ols_misses += std::abs(a_ols - kTrueAlpha) > 5.0 * se_ols;
    ols_sum += a_ols;
    ols_se_sum += se_ols;
  }
  const double ols_mean = ols_sum / kRecoverySeeds;
  // The seed-averaged OLS estimate must sit on the analytic slope.
  const double mean_se = ols_se_sum / kRecoverySeeds / std::sqrt(kRecoverySeeds);
  const bool on_slope = std::abs(ols_mean - kAnalyticOlsSlope) <= 4.0 * mean_se;
  return {iv_covers >= kRecoveryNeeded && ols_misses >= kRecoveryNeeded && on_slope,
          Fmt("iv covers %d/%d, ols misses %d/%d, mean ols %.5f vs analytic %.5f", iv_covers,
              kRecoverySeeds, ols_misses, kRecoverySeeds, ols_mean, kAnalyticOlsSlope)};
}

// ---- 2 and 3. reward arms -------------------------------------------------

dc::EvalReport Arms(dc::Scenario sc, std::vector<std::string> arms) {
  dc::DgpConfig cfg;
  cfg.scenario = sc;
  cfg.n = kScenarioN;
  cfg.seed = 1;
  dc::ScenarioOptions o;
  o.arms = std::move(arms);
  o.seeds = Seeds(kScenarioSeeds);
  return dc::RunScenario(cfg, o);
}

const dc::ArmSeedResult& PerSeed(const dc::EvalReport& r, const std::string& arm,
                                 std::uint64_t seed) {
  for (const auto& row : r.per_seed) {
    if (row.arm == arm && row.seed == seed) return row;
  }
  throw std::runtime_error("missing " + arm);
}

const dc::ArmRow& Row(const dc::EvalReport& r, const std::string& arm) {
  for (const auto& row : r.rows) {
    if (row.arm == arm) return row;
  }
  throw std::runtime_error("missing " + arm);
}

Outcome SignFlip() {
  const std::vector<std::string> all(dc::kArmNames.begin(), dc::kArmNames.end());
  struct {
    dc::EvalReport entangled, orthogonal;
  } r{Arms(dc::Scenario::kEntangled, {"naive_observed", "deconfound_iv"}),
      Arms(dc::Scenario::kOrthogonal, all)};
  int ent_ok = 0, orth_ok = 0;
  for (std::uint64_t seed : Seeds(kScenarioSeeds)) {
    const double naive = PerSeed(r.entangled, "naive_observed", seed).reward_sentiment_corr_valid;
    const double iv = PerSeed(r.entangled, "deconfound_iv", seed).reward_sentiment_corr_valid;
    ent_ok += naive < 0.1 && iv > 0.6;
    bool all_positive = true;
    for (std::string_view arm : dc::kArmNames) {
      all_positive &= PerSeed(r.orthogonal, std::string(arm), seed).reward_sentiment_corr_valid > 0.0;
    }
    orth_ok += all_positive &&
               PerSeed(r.orthogonal, "deconfound_iv", seed).reward_sentiment_corr_valid >=
                   PerSeed(r.orthogonal, "naive_observed", seed).reward_sentiment_corr_valid;
  }
  return {ent_ok >= kScenarioNeeded && orth_ok >= kScenarioNeeded,
          Fmt("entangled %d/%d (naive %.3f, iv %.3f), orthogonal %d/%d", ent_ok, kScenarioSeeds,
              Row(r.entangled, "naive_observed").reward_sentiment_corr_valid,
              Row(r.entangled, "deconfound_iv").reward_sentiment_corr_valid, orth_ok,
              kScenarioSeeds)};
}

Outcome BestOfNOrdering() {
  const dc::EvalReport r =
      Arms(dc::Scenario::kEntangled, {"naive_observed", "deconfound_iv"});
  int better = 0;
  for (std::uint64_t seed : Seeds(kScenarioSeeds)) {
    better += PerSeed(r, "deconfound_iv", seed).mean_sentiment >
              PerSeed(r, "naive_observed", seed).mean_sentiment;
  }
  const double naive_rate = Row(r, "naive_observed").region_pick_rate;
  const double iv_rate = Row(r, "deconfound_iv").region_pick_rate;
  return {better >= kScenarioNeeded && naive_rate > iv_rate,
          Fmt("iv sentiment higher in %d/%d seeds (%.3f vs %.3f); region pick rate naive %.3f, "
              "iv %.3f",
              better, kScenarioSeeds, Row(r, "deconfound_iv").mean_sentiment,
              Row(r, "naive_observed").mean_sentiment, naive_rate, iv_rate)};
}

// ---- 4. weekday marker ----------------------------------------------------

// Welch test computed here from scratch, p-value from Boost.
struct Welch {
  double t, df, p;
};

Welch WelchRef(const std::vector<double>& a, const std::vector<double>& b) {
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / v.size();
  };
  auto var = [&](const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
  };
  const double va = var(a) / a.size(), vb = var(b) / b.size();
  const double t = (mean(a) - mean(b)) / std::sqrt(va + vb);
  const double df = (va + vb) * (va + vb) /
                    (va * va / (a.size() - 1) + vb * vb / (b.size() - 1));
  boost::math::students_t dist(df);
  return {t, df, 2.0 * boost::math::cdf(dist, -std::abs(t))};
}

// One-sample t against 0, p from Boost.
double OneSampleP(const std::vector<double>& a) {
  double m = 0;
  for (double x : a) m += x;
  m /= a.size();
  double s = 0;
  for (double x : a) s += (x - m) * (x - m);
  const double se = std::sqrt(s / (a.size() - 1) / a.size());
  boost::math::students_t dist(static_cast<double>(a.size() - 1));
  return 2.0 * boost::math::cdf(dist, -std::abs(m / se));
}

Outcome WeekdayAmplification() {
  dc::DgpConfig cfg;
  cfg.scenario = dc::Scenario::kWeekdayMarker;
  cfg.n = kWeekdayContexts;
  cfg.seed = 1;
  dc::WeekdayOptions o;
  o.seeds = Seeds(kWeekdaySeeds);
  const dc::WeekdayReport r = dc::RunWeekdayStudy(cfg, kWeekdaySkew, o);
  const auto& naive = r.naive.marker_weights;
  const auto& dec = r.deconfounded.marker_weights;
  const double p_naive = OneSampleP(naive);
  const double p_dec = OneSampleP(dec);
  const Welch between = WelchRef(naive, dec);
  // Library statistics must agree with the reference computation.
  const bool agree = std::abs(r.naive.weight_vs_zero.p - p_naive) < 1e-9 &&
                     std::abs(r.weight_welch.p - between.p) < 1e-9;
  const bool pass = r.naive.weight_mean > 0.0 && p_naive < kAlphaLevel &&
                    p_dec >= kAlphaLevel && between.t > 0.0 && between.p < kAlphaLevel && agree;
  return {pass, Fmt("naive weight %.3f (p=%.2g), deconfounded %.3f (p=%.2g), welch between "
                    "arms p=%.2g; pick rate naive %.3f, deconfounded %.3f, base %.3f",
                    r.naive.weight_mean, p_naive, r.deconfounded.weight_mean, p_dec, between.p,
                    r.naive.rate_mean, r.deconfounded.rate_mean, r.base_rate_mean)};
}

// ---- 5. regularization sweep ---------------------------------------------

Outcome SweepGap() {
  const std::vector<double> grid = dc::LogGrid(-5, 1, 15);
  int ordered = 0, corr_lower = 0;
  for (std::uint64_t seed : Seeds(kSweepSeeds)) {
    dc::DgpConfig cfg;
    cfg.scenario = dc::Scenario::kTemporal;
    cfg.n = 6000;
    cfg.seed = seed;
    cfg.nuisance_dims = 40;
    cfg.nuisance_sd = 0.15;
    cfg.month_drift = 0.1;
    cfg.month_effects = dc::DefaultMonthEffects();
    const dc::SweepReport r = dc::RunLambdaSweep(dc::Generate(cfg), grid, dc::FitOptions{});
    ordered += r.argmax_auc_lambda() >= r.argmin_valid_lambda();
    const auto& at_auc = r.rows[r.argmax_auc].temporal_corr;
    const auto& at_valid = r.rows[r.argmin_valid].temporal_corr;
    corr_lower += at_auc && at_valid && *at_auc < *at_valid;
  }
  const bool pass = ordered >= kSweepOrderFraction * kSweepSeeds &&
                    corr_lower >= kSweepCorrFraction * kSweepSeeds;
  return {pass, Fmt("auc-optimal lambda >= valid-optimal in %d/%d; temporal corr lower in %d/%d",
                    ordered, kSweepSeeds, corr_lower, kSweepSeeds)};
}

// ---- 6. numerical oracles -------------------------------------------------

bool AucMatchesBruteForce(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> level(0, 199);  // coarse levels force ties
  std::bernoulli_distribution label(0.4);
  std::vector<double> scores(1000);
  std::vector<char> pos(1000);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = level(gen) / 10.0;
    pos[i] = label(gen);
  }
  double wins = 0;
  long long np = 0, nn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!pos[i]) continue;
    ++np;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (pos[j]) continue;
      wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
    }
  }
  for (char p : pos) nn += !p;
  const double brute = wins / (static_cast<double>(np) * static_cast<double>(nn));
  std::vector<bool> positive(pos.begin(), pos.end());
  std::unique_ptr<bool[]> flags(new bool[positive.size()]);
  for (std::size_t i = 0; i < positive.size(); ++i) flags[i] = positive[i];
  const double mw = dc::MannWhitneyAuc(scores, std::span<const bool>(flags.get(), positive.size()));

  // Pairwise form: every (positive, negative) combination as a pair.
  std::vector<double> w, l;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!pos[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (!pos[j]) {
        w.push_back(scores[i]);
        l.push_back(scores[j]);
      }
    }
  }
  return mw == brute && dc::RocAucFromScores(w, l) == brute;
}

double BtLoss(const Eigen::MatrixXd& d, const Eigen::VectorXd& w, double lambda) {
  double s = 0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) s += std::log1p(std::exp(-d.row(i).dot(w)));
  return s / d.rows() + lambda * w.squaredNorm();
}

double WorstGradError(std::mt19937_64& gen) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_int_distribution<int> dim(2, 8), rows(5, 60);
  double worst = 0.0;
  for (int prob = 0; prob < 20; ++prob) {
    const int m = rows(gen), k = dim(gen);
    Eigen::MatrixXd d(m, k);
    Eigen::VectorXd w(k);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < k; ++j) d(i, j) = z(gen);
    for (int j = 0; j < k; ++j) w(j) = z(gen);
    const double lambda = prob % 2 ? 0.1 : 0.0;
    const Eigen::VectorXd g = dc::BtLossAndGradient(d, w, lambda).gradient;
    const double h = 1e-5;
    for (int j = 0; j < k; ++j) {
      Eigen::VectorXd up = w, dn = w;
      up(j) += h;
      dn(j) -= h;
      const double fd = (BtLoss(d, up, lambda) - BtLoss(d, dn, lambda)) / (2 * h);
      const double rel = std::abs(fd - g(j)) / std::max(std::abs(fd), 1e-8);
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

bool RidgeIsLocalMinimum(std::mt19937_64& gen) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 6), rows(10, 80);
  for (int prob = 0; prob < 20; ++prob) {
    const int n = rows(gen), k = dim(gen);
    Eigen::MatrixXd x(n, k);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) x(i, j) = z(gen);
      y(i) = z(gen);
    }
    dc::FitOptions o;
    o.lambda = prob % 3 == 0 ? 0.0 : 0.05 * prob;
    const dc::RewardModel m = dc::FitRidge(x, y, o);
    auto objective = [&](const std::vector<double>& w, double b) {
      double s = 0;
      for (int i = 0; i < n; ++i) {
        double r = y(i) - b;
        for (int j = 0; j < k; ++j) r -= w[j] * x(i, j);
        s += r * r;
      }
      double pen = 0;
      for (double v : w) pen += v * v;
      return s / n + o.lambda * pen;
    };
    const double base = objective(m.weights, m.bias);
    for (int j = 0; j <= k; ++j) {
      for (double step : {1e-3, -1e-3}) {
        std::vector<double> w = m.weights;
        double b = m.bias;
        (j < k ? w[j] : b) += step;
        if (!(objective(w, b) > base)) return false;
      }
    }
  }
  return true;
}

bool SelfIvEqualsOls() {
  dc::DgpConfig cfg;
  cfg.scenario = dc::Scenario::kEntangled;
  cfg.n = 5000;
  cfg.seed = 7;
  const dc::Dataset ds = dc::Generate(cfg);
  const std::vector<std::string> pop = {"popularity"};
  const double ols = dc::FitOls(ds, pop).alpha.at("popularity");
  const double iv = dc::FitIv2sls(ds, "popularity", pop).alpha.at("popularity");
  return std::abs(ols - iv) <= kSelfIvTol;
}

Outcome NumericalOracles() {
  std::mt19937_64 gen(20261018);
  const bool auc = AucMatchesBruteForce(gen);
  const double grad = WorstGradError(gen);
  const bool ridge = RidgeIsLocalMinimum(gen);
  const bool self_iv = SelfIvEqualsOls();

  const std::vector<double> a = {1, 2, 3}, b = {4, 5, 6};
  const dc::TTestResult lib = dc::WelchTTest(a, b);
  const Welch ref = WelchRef(a, b);
  const bool welch = std::abs(lib.t - kWelchT) < kWelchTol && std::abs(lib.df - kWelchDf) < kWelchTol &&
                     std::abs(ref.t - kWelchT) < kWelchTol && std::abs(lib.p - ref.p) < kWelchTol;
  return {auc && grad < kGradRelTol && ridge && self_iv && welch,
          Fmt("auc exact %s, grad rel err %.2e, ridge minimum %s, self-iv %s, welch t=%.9f "
              "df=%.3f p=%.6f (ref p=%.6f)",
              auc ? "yes" : "no", grad, ridge ? "yes" : "no", self_iv ? "yes" : "no", lib.t,
              lib.df, lib.p, ref.p)};
}

// ---- 7. determinism through the CLI --------------------------------------

int Sh(const std::string& args) {
  const std::string cmd = std::string(DCF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool Pipeline(const fs::path& dir, int threads) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream c(dir / "c.json");
    c << R"({"dgp":{"scenario":"entangled","n":3000,"seed":7},"eval":{"seeds":[1,2,3]}})";
  }
  const std::string t = " --threads " + std::to_string(threads);
  const std::string d = "'" + dir.string() + "'";
  const std::string c = " --config " + d + "/c.json";
  return Sh("simulate" + t + c + " --out " + d + "/ds") == 0 &&
         Sh("deconfound" + t + c + " --data " + d + "/ds --out " + d + "/rep/fit.json" +
            " --residualized " + d + "/res") == 0 &&
         Sh("train" + t + c + " --data " + d + "/res --out " + d + "/rep/model.json") == 0 &&
         Sh("eval" + t + c + " --data " + d + "/ds --model " + d + "/rep/model.json --out " + d +
            "/rep") == 0 &&
         Sh("sweep" + t + c + " --data " + d + "/ds --out " + d + "/rep") == 0 &&
         Sh("scenario" + t + c + " --out " + d + "/rep") == 0;
}

Outcome Determinism() {
  const fs::path root = fs::current_path() / "acceptance_scratch";
  const fs::path a = root / "t1", b = root / "t4";
  if (!Pipeline(a, 1) || !Pipeline(b, 4)) return {false, "a pipeline step failed"};
  int files = 0, same = 0;
  for (const auto& entry : fs::directory_iterator(a / "rep")) {
    ++files;
    same += Slurp(entry.path()) == Slurp(b / "rep" / entry.path().filename());
  }
  const bool data_same = Slurp(a / "ds" / "items.jsonl") == Slurp(b / "ds" / "items.jsonl") &&
                         Slurp(a / "res" / "items.jsonl") == Slurp(b / "res" / "items.jsonl");
  fs::remove_all(root);
  return {files >= 7 && same == files && data_same,
          Fmt("%d/%d report files identical at --threads 1 and 4", same, files)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"1 alpha recovery", 30, AlphaRecovery},
      {"2 correlation sign flip", 60, SignFlip},
      {"3 best-of-n ordering", 60, BestOfNOrdering},
      {"4 weekday marker amplification", 60, WeekdayAmplification},
      {"5 sweep gap", 120, SweepGap},
      {"6 numerical oracles", 10, NumericalOracles},
      {"7 determinism", 60, Determinism},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs < c.budget_s;
    const bool pass = o.pass && in_budget;
    failed += !pass;
    std::printf("%s  %-32s %6.1fs (budget %.0fs)  %s\n", pass ? "PASS" : "FAIL", c.name, secs,
                c.budget_s, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
