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

#include "deconfound/deconfound.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "deconfound/deconfound.hpp"
#include "deconfound/dgp.hpp"
#include "deconfound/error.hpp"
#include "deconfound/eval.hpp"
#include "deconfound/harness.hpp"
#include "deconfound/io.hpp"
#include "deconfound/model.hpp"
#include "deconfound/parallel.hpp"
#include "deconfound/reward.hpp"

struct dcf_dataset {
  deconfound::Dataset ds;
};

struct dcf_model {
  deconfound::RewardModel model;
};

namespace {

using deconfound::AppConfig;
using deconfound::ConfigError;
using nlohmann::json;
using nlohmann::ordered_json;

thread_local std::string g_last_error;

template <typename Fn>
dcf_status Guard(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return DCF_OK;
  } catch (const deconfound::Error& e) {
    g_last_error = e.what();
    return static_cast<dcf_status>(static_cast<int>(e.kind()));
  } catch (const json::exception& e) {
    g_last_error = std::string("invalid JSON: ") + e.what();
    return DCF_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DCF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DCF_ERR_INTERNAL;
  }
}

void Require(const void* p, const char* what) {
  if (p == nullptr) throw ConfigError(std::string(what) + " is NULL");
}

char* Dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void SetOut(char** out, const std::string& s) {
  if (out != nullptr) *out = Dup(s);
}

AppConfig ParseConfig(const char* config_json) {
  if (config_json == nullptr || *config_json == '\0') {
    return deconfound::ConfigFromJson(json::object());
  }
  json doc;
  try {
    doc = json::parse(config_json);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return deconfound::ConfigFromJson(doc);
}

const deconfound::DgpConfig& RequireDgp(const AppConfig& cfg) {
  if (!cfg.dgp) throw ConfigError("dgp: section is required");
  return *cfg.dgp;
}

std::vector<std::string> ArmsOrAll(const std::vector<std::string>& arms) {
  if (!arms.empty()) return arms;
  return {deconfound::kArmNames.begin(), deconfound::kArmNames.end()};
}

std::vector<std::uint64_t> MetaSeeds(const AppConfig& cfg) {
  if (cfg.dgp) return {cfg.dgp->seed};
  return {};
}

std::string Dump(const ordered_json& j) { return j.dump(2) + "\n"; }

std::optional<double> MseOn(const deconfound::RewardModel& m,
                            const std::vector<const deconfound::Item*>& items) {
  if (items.empty()) return std::nullopt;
  double sum = 0.0;
  for (const deconfound::Item* item : items) {
    const double r = deconfound::Predict(m, *item) - item->outcome;
    sum += r * r;
  }
  return sum / static_cast<double>(items.size());
}

std::optional<double> SentimentCorr(
    const deconfound::RewardModel& m,
    const std::vector<const deconfound::Item*>& items) {
  std::vector<double> pred;
  std::vector<double> truth;
  for (const deconfound::Item* item : items) {
    if (!item->latent) return std::nullopt;
    auto it = item->latent->find("sentiment");
    if (it == item->latent->end()) return std::nullopt;
    pred.push_back(deconfound::Predict(m, *item));
    truth.push_back(it->second);
  }
  if (pred.size() < 2) return std::nullopt;
  try {
    return deconfound::Pearson(pred, truth);
  } catch (const deconfound::NumericalError&) {
    return std::nullopt;
  }
}

ordered_json OptJson(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

extern "C" {

const char* dcf_version(void) { return deconfound::kToolVersion; }

const char* dcf_last_error(void) { return g_last_error.c_str(); }

void dcf_string_free(char* s) { std::free(s); }

dcf_status dcf_set_threads(int threads) {
  return Guard([&] {
    if (threads < 0) throw ConfigError("threads: must be >= 0");
    deconfound::SetThreadCount(threads);
  });
}

dcf_status dcf_default_config(char** out_json) {
  return Guard([&] {
    Require(out_json, "out_json");
    *out_json = Dup(Dump(deconfound::DefaultConfigJson()));
  });
}

dcf_status dcf_simulate(const char* config_json, dcf_dataset** out) {
  return Guard([&] {
    Require(out, "out");
    const AppConfig cfg = ParseConfig(config_json);
    *out = new dcf_dataset{deconfound::Generate(RequireDgp(cfg))};
  });
}

dcf_status dcf_dataset_read(const char* items_path, const char* pairs_path,
                            dcf_dataset** out) {
  return Guard([&] {
    Require(items_path, "items_path");
    Require(out, "out");
    const std::string items = deconfound::ReadFile(items_path);
    const std::string pairs =
        pairs_path ? deconfound::ReadFile(pairs_path) : std::string();
    *out = new dcf_dataset{deconfound::DatasetFromJsonl(items, pairs)};
  });
}

dcf_status dcf_dataset_from_jsonl(const char* items_text,
                                  const char* pairs_text, dcf_dataset** out) {
  return Guard([&] {
    Require(items_text, "items_text");
    Require(out, "out");
    *out = new dcf_dataset{
        deconfound::DatasetFromJsonl(items_text, pairs_text ? pairs_text : "")};
  });
}

dcf_status dcf_dataset_write(const dcf_dataset* ds, const char* items_path,
                             const char* pairs_path) {
  return Guard([&] {
    Require(ds, "dataset");
    Require(items_path, "items_path");
    deconfound::WriteFileAtomic(items_path, deconfound::ItemsToJsonl(ds->ds));
    if (pairs_path != nullptr) {
      deconfound::WriteFileAtomic(pairs_path, deconfound::PairsToJsonl(ds->ds));
    }
  });
}

dcf_status dcf_dataset_to_jsonl(const dcf_dataset* ds, char** items_text,
                                char** pairs_text) {
  return Guard([&] {
    Require(ds, "dataset");
    const std::string items = deconfound::ItemsToJsonl(ds->ds);
    const std::string pairs = deconfound::PairsToJsonl(ds->ds);
    char* a = items_text ? Dup(items) : nullptr;
    char* b = nullptr;
    try {
      b = pairs_text ? Dup(pairs) : nullptr;
    } catch (...) {
      std::free(a);
      throw;
    }
    if (items_text) *items_text = a;
    if (pairs_text) *pairs_text = b;
  });
}

dcf_status dcf_dataset_ingest(const char* path, const char* format,
                              const char* mapping_json, dcf_dataset** out) {
  return Guard([&] {
    Require(path, "path");
    Require(format, "format");
    Require(mapping_json, "mapping_json");
    Require(out, "out");
    json m;
    try {
      m = json::parse(mapping_json);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("mapping: ") + e.what());
    }
    const deconfound::ColumnMapping mapping = deconfound::ColumnMappingFromJson(m);
    const std::string fmt = format;
    if (fmt != "csv" && fmt != "jsonl") {
      throw ConfigError("format: expected 'csv' or 'jsonl', got '" + fmt + "'");
    }
    const std::string text = deconfound::ReadFile(path);
    *out = new dcf_dataset{fmt == "csv" ? deconfound::IngestCsv(text, mapping)
                                        : deconfound::IngestJsonl(text, mapping)};
  });
}

dcf_status dcf_dataset_validate(const dcf_dataset* ds, char** out_json) {
  return Guard([&] {
    Require(ds, "dataset");
    Require(out_json, "out_json");
    *out_json = Dup(json(deconfound::Validate(ds->ds)).dump());
  });
}

size_t dcf_dataset_item_count(const dcf_dataset* ds) {
  return ds ? ds->ds.items.size() : 0;
}

size_t dcf_dataset_pair_count(const dcf_dataset* ds) {
  return ds ? ds->ds.pairs.size() : 0;
}

void dcf_dataset_free(dcf_dataset* ds) { delete ds; }

dcf_status dcf_fit(const dcf_dataset* ds, const char* config_json,
                   const char* head, dcf_model** out) {
  return Guard([&] {
    Require(ds, "dataset");
    Require(out, "out");
    const AppConfig cfg = ParseConfig(config_json);
    const auto h = deconfound::ParseHead(head ? head : "regression");
    if (!h) throw ConfigError("head: expected 'regression' or 'pairwise'");
    deconfound::RewardModel model;
    if (*h == deconfound::Head::kRegression) {
      const auto train = ds->ds.ItemsIn(deconfound::Split::kTrain);
      if (train.empty()) throw ConfigError("fit: no train items");
      model = deconfound::FitRidge(deconfound::EmbeddingMatrix(train),
                                   deconfound::OutcomeVector(train), cfg.fit);
    } else {
      const auto pairs = ds->ds.PairsIn(deconfound::Split::kTrain);
      model = deconfound::FitPairwiseBt(ds->ds, pairs, cfg.fit);
    }
    *out = new dcf_model{std::move(model)};
  });
}

dcf_status dcf_model_to_json(const dcf_model* model, char** out_json) {
  return Guard([&] {
    Require(model, "model");
    Require(out_json, "out_json");
    *out_json = Dup(Dump(deconfound::ModelToJson(model->model)));
  });
}

dcf_status dcf_model_from_json(const char* text, dcf_model** out) {
  return Guard([&] {
    Require(text, "json");
    Require(out, "out");
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
    *out = new dcf_model{deconfound::ModelFromJson(j)};
  });
}

dcf_status dcf_model_predict(const dcf_model* model, const dcf_dataset* ds,
                             double* scores, size_t n) {
  return Guard([&] {
    Require(model, "model");
    Require(ds, "dataset");
    if (n != ds->ds.items.size()) {
      throw ConfigError("predict: buffer holds " + std::to_string(n) +
                        " scores, dataset has " +
                        std::to_string(ds->ds.items.size()) + " items");
    }
    if (n > 0) Require(scores, "scores");
    for (size_t i = 0; i < n; ++i) {
      scores[i] = deconfound::Predict(model->model, ds->ds.items[i]);
    }
  });
}

void dcf_model_free(dcf_model* model) { delete model; }

dcf_status dcf_deconfound(const dcf_dataset* ds, const char* config_json,
                          char** fit_json) {
  return Guard([&] {
    Require(ds, "dataset");
    Require(fit_json, "fit_json");
    const AppConfig cfg = ParseConfig(config_json);
    const auto& d = cfg.deconfound;
    deconfound::DeconfoundFit fit;
    switch (d.method) {
      case deconfound::Method::kOls:
        fit = deconfound::FitOls(ds->ds, d.confounders);
        break;
      case deconfound::Method::kIv2sls:
        if (d.confounders.size() != 1) {
          throw ConfigError("deconfound.confounders: iv2sls takes exactly one");
        }
        fit = deconfound::FitIv2sls(ds->ds, d.confounders[0], d.instruments);
        break;
      case deconfound::Method::kDml:
        if (d.confounders.size() != 1) {
          throw ConfigError("deconfound.confounders: dml takes exactly one");
        }
        fit = deconfound::FitDml(ds->ds, d.confounders[0], d.folds, cfg.fit);
        break;
    }
    *fit_json = Dup(Dump(deconfound::FitToJson(fit)));
  });
}

dcf_status dcf_residualize(const dcf_dataset* ds, const char* fit_json,
                           dcf_dataset** out) {
  return Guard([&] {
    Require(ds, "dataset");
    Require(fit_json, "fit_json");
    Require(out, "out");
    json j;
    try {
      j = json::parse(fit_json);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("fit: ") + e.what());
    }
    *out = new dcf_dataset{
        deconfound::Residualize(ds->ds, deconfound::FitFromJson(j))};
  });
}

dcf_status dcf_evaluate(const dcf_model* model, const dcf_dataset* ds,
                        const char* config_json, char** report_json) {
  return Guard([&] {
    Require(model, "model");
    Require(ds, "dataset");
    Require(report_json, "report_json");
    const AppConfig cfg = ParseConfig(config_json);
    const deconfound::Dataset& data = ds->ds;
    ordered_json splits;
    for (deconfound::Split s : {deconfound::Split::kTrain,
                                deconfound::Split::kValid,
                                deconfound::Split::kTest}) {
      const auto items = data.ItemsIn(s);
      const auto pairs = data.PairsIn(s);
      ordered_json row;
      row["items"] = items.size();
      row["pairs"] = pairs.size();
      row["mse"] = OptJson(MseOn(model->model, items));
      row["pair_auc"] =
          pairs.empty() ? ordered_json(nullptr)
                        : ordered_json(deconfound::RocAuc(data, pairs, model->model));
      row["reward_sentiment_corr"] = OptJson(SentimentCorr(model->model, items));
      splits[std::string(deconfound::SplitName(s))] = row;
    }
    ordered_json j;
    j["meta"] = deconfound::MetaToJson({cfg.hash, MetaSeeds(cfg)});
    j["head"] = std::string(deconfound::HeadName(model->model.head));
    j["lambda"] = model->model.lambda;
    j["splits"] = splits;
    bool has_months = !data.items.empty();
    for (const auto& item : data.items) has_months = has_months && item.month;
    std::optional<double> temporal;
    if (has_months) {
      try {
        temporal = deconfound::TemporalCorr(model->model, data);
      } catch (const deconfound::NumericalError&) {
      }
    }
    j["temporal_corr"] = OptJson(temporal);
    *report_json = Dup(Dump(j));
  });
}

dcf_status dcf_sweep(const dcf_dataset* ds, const char* config_json,
                     char** report_json, char** report_csv, char** plot_csv) {
  return Guard([&] {
    Require(ds, "dataset");
    const AppConfig cfg = ParseConfig(config_json);
    const std::vector<double> grid = deconfound::ParseGrid(cfg.eval.grid);
    const deconfound::SweepReport report =
        deconfound::RunLambdaSweep(ds->ds, grid, cfg.fit);
    const std::string j =
        Dump(deconfound::SweepToJson(report, {cfg.hash, MetaSeeds(cfg)}));
    const std::string c = deconfound::SweepToCsv(report);
    const std::string p = deconfound::SweepToPlotCsv(report);
    SetOut(report_json, j);
    SetOut(report_csv, c);
    SetOut(plot_csv, p);
  });
}

dcf_status dcf_scenario(const char* config_json, char** report_json,
                        char** report_csv) {
  return Guard([&] {
    const AppConfig cfg = ParseConfig(config_json);
    const deconfound::DgpConfig& dgp = RequireDgp(cfg);
    deconfound::ScenarioOptions opts;
    opts.arms = ArmsOrAll(cfg.eval.arms);
    opts.seeds = cfg.eval.seeds;
    opts.fit = cfg.fit;
    opts.candidate_k = cfg.eval.candidate_k;
    if (cfg.deconfound.confounders.size() != 1) {
      throw ConfigError("deconfound.confounders: scenarios take exactly one");
    }
    opts.confounder = cfg.deconfound.confounders[0];
    opts.instruments = cfg.deconfound.instruments;
    opts.folds = cfg.deconfound.folds;
    const deconfound::EvalReport report = deconfound::RunScenario(dgp, opts);
    const std::string j =
        Dump(deconfound::EvalReportToJson(report, {cfg.hash, opts.seeds}));
    const std::string c = deconfound::EvalReportToCsv(report);
    SetOut(report_json, j);
    SetOut(report_csv, c);
  });
}

dcf_status dcf_weekday_study(const char* config_json, char** report_json,
                             char** report_csv) {
  return Guard([&] {
    const AppConfig cfg = ParseConfig(config_json);
    const deconfound::DgpConfig& dgp = RequireDgp(cfg);
    deconfound::WeekdayOptions opts;
    opts.seeds = cfg.eval.seeds;
    opts.fit = cfg.fit;
    opts.candidate_k = cfg.eval.candidate_k;
    const deconfound::WeekdayReport report =
        deconfound::RunWeekdayStudy(dgp, dgp.skew, opts);
    const std::string j =
        Dump(deconfound::WeekdayToJson(report, {cfg.hash, opts.seeds}));
    const std::string c = deconfound::WeekdayToCsv(report);
    SetOut(report_json, j);
    SetOut(report_csv, c);
  });
}

}  // extern "C"
