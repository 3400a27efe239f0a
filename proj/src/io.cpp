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

#include "deconfound/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <unordered_map>

#include "deconfound/dgp.hpp"
#include "deconfound/error.hpp"

namespace deconfound {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// ---- small JSON helpers ----

void RejectUnknown(const json& obj, std::initializer_list<const char*> allowed,
                   const std::string& where) {
  if (!obj.is_object()) {
    throw ConfigError(where + ": expected a JSON object");
  }
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + "." + key + ": unknown key");
  }
}

std::string Field(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

double AsDouble(const json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError(field + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(field + ": must be finite");
  return d;
}

std::int64_t AsInt(const json& v, const std::string& field) {
  if (!v.is_number_integer()) throw ConfigError(field + ": expected an integer");
  return v.get<std::int64_t>();
}

std::uint64_t AsUint(const json& v, const std::string& field) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  throw ConfigError(field + ": expected a non-negative integer");
}

bool AsBool(const json& v, const std::string& field) {
  if (!v.is_boolean()) throw ConfigError(field + ": expected true or false");
  return v.get<bool>();
}

std::string AsString(const json& v, const std::string& field) {
  if (!v.is_string()) throw ConfigError(field + ": expected a string");
  return v.get<std::string>();
}

std::vector<std::string> AsStrings(const json& v, const std::string& field) {
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) throw ConfigError(field + ": expected a list of strings");
  std::vector<std::string> out;
  for (const json& e : v) out.push_back(AsString(e, field));
  return out;
}

const json* Find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

NamedValues AsNamedValues(const json& v, const std::string& field) {
  if (!v.is_object()) throw ConfigError(field + ": expected an object");
  NamedValues out;
  for (const auto& [key, value] : v.items()) {
    out[key] = AsDouble(value, field + "." + key);
  }
  return out;
}

ordered_json NamedToJson(const NamedValues& values) {
  ordered_json out = ordered_json::object();
  for (const auto& [k, v] : values) out[k] = v;
  return out;
}

ordered_json NumberOrNull(double v) {
  return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
}

ordered_json OptionalNumber(const std::optional<double>& v) {
  return v ? NumberOrNull(*v) : ordered_json(nullptr);
}

ordered_json TTestToJson(const TTestResult& t) {
  return ordered_json{{"t", NumberOrNull(t.t)},
                      {"df", NumberOrNull(t.df)},
                      {"p", NumberOrNull(t.p)}};
}

// ---- CSV ----

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (ch != '\r') {
      cell.push_back(ch);
    }
  }
  cells.push_back(cell);
  return cells;
}

std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  return lines;
}

// Shared by the CSV and JSONL ingesters: `cell(name)` returns the raw text
// or number for a column of the current row.
template <typename CellFn, typename HasFn>
Item BuildIngestedItem(const ColumnMapping& mapping,
                       const std::vector<std::string>& embedding_cols,
                       std::size_t row, CellFn cell, HasFn has) {
  auto number = [&](const std::string& col) {
    if (!has(col)) {
      throw ConfigError("row " + std::to_string(row) + ": missing column '" +
                        col + "'");
    }
    const std::optional<double> v = cell(col);
    if (!v || !std::isfinite(*v)) {
      throw ConfigError("row " + std::to_string(row) + ", column '" + col +
                        "': value is not a finite number");
    }
    return *v;
  };
  Item item;
  for (const std::string& col : embedding_cols) {
    item.embedding.push_back(number(col));
  }
  item.outcome = number(mapping.outcome);
  for (const std::string& col : mapping.confounders) item.confounders[col] = number(col);
  for (const std::string& col : mapping.instruments) item.instruments[col] = number(col);
  if (!mapping.latent.empty()) {
    NamedValues latent;
    for (const std::string& col : mapping.latent) latent[col] = number(col);
    item.latent = std::move(latent);
  }
  if (mapping.month) item.month = static_cast<int>(number(*mapping.month));
  if (mapping.weekday) item.weekday = static_cast<int>(number(*mapping.weekday));
  return item;
}

void FinishIngest(Dataset& ds) {
  const auto violations = Validate(ds);
  if (!violations.empty()) {
    std::string msg = "ingest: dataset is invalid:";
    for (std::size_t i = 0; i < violations.size() && i < 10; ++i) {
      msg += "\n  " + violations[i];
    }
    throw ConfigError(msg);
  }
}

Split ParseSplitCell(const std::string& text, std::size_t row) {
  auto s = ParseSplit(text);
  if (!s) {
    throw ConfigError("row " + std::to_string(row) + ": unknown split '" +
                      text + "'");
  }
  return *s;
}

std::string SeedRange(const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) return "none";
  if (seeds.size() == 1) return std::to_string(seeds.front());
  return std::to_string(seeds.front()) + "-" + std::to_string(seeds.back());
}

}  // namespace

std::string FormatNumber(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "NaN" : (v > 0 ? "Inf" : "-Inf");
  return json(v).dump();
}

// ---- datasets ----

std::string ItemsToJsonl(const Dataset& dataset) {
  std::string out;
  for (const Item& item : dataset.items) {
    ordered_json j;
    j["id"] = item.id;
    j["embedding"] = item.embedding;
    j["confounders"] = NamedToJson(item.confounders);
    j["instruments"] = NamedToJson(item.instruments);
    if (item.latent) j["latent"] = NamedToJson(*item.latent);
    j["outcome"] = item.outcome;
    if (item.month) j["month"] = *item.month;
    if (item.weekday) j["weekday"] = *item.weekday;
    j["split"] = std::string(SplitName(dataset.SplitOf(item.id)));
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string PairsToJsonl(const Dataset& dataset) {
  std::string out;
  for (const PreferencePair& p : dataset.pairs) {
    ordered_json j;
    j["context_id"] = p.context_id;
    j["winner_id"] = p.winner_id;
    j["loser_id"] = p.loser_id;
    j["margin"] = p.margin;
    out += j.dump();
    out += '\n';
  }
  return out;
}

Dataset DatasetFromJsonl(const std::string& items_text,
                         const std::string& pairs_text) {
  Dataset ds;
  const auto item_lines = Lines(items_text);
  for (std::size_t ln = 0; ln < item_lines.size(); ++ln) {
    if (item_lines[ln].find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "items line " + std::to_string(ln + 1);
    json j;
    try {
      j = json::parse(item_lines[ln]);
    } catch (const json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
    RejectUnknown(j, {"id", "embedding", "confounders", "instruments", "latent",
                      "outcome", "month", "weekday", "split"},
                  where);
    for (const char* key : {"id", "embedding", "outcome", "split"}) {
      if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
    }
    Item item;
    item.id = AsString(j["id"], where + ".id");
    if (!j["embedding"].is_array()) throw ConfigError(where + ".embedding: expected an array");
    for (const json& v : j["embedding"]) item.embedding.push_back(AsDouble(v, where + ".embedding"));
    if (const json* v = Find(j, "confounders")) item.confounders = AsNamedValues(*v, where + ".confounders");
    if (const json* v = Find(j, "instruments")) item.instruments = AsNamedValues(*v, where + ".instruments");
    if (const json* v = Find(j, "latent")) item.latent = AsNamedValues(*v, where + ".latent");
    item.outcome = AsDouble(j["outcome"], where + ".outcome");
    if (const json* v = Find(j, "month")) item.month = static_cast<int>(AsInt(*v, where + ".month"));
    if (const json* v = Find(j, "weekday")) item.weekday = static_cast<int>(AsInt(*v, where + ".weekday"));
    const std::string split = AsString(j["split"], where + ".split");
    auto s = ParseSplit(split);
    if (!s) throw ConfigError(where + ".split: unknown split '" + split + "'");
    if (!ds.split.emplace(item.id, *s).second) {
      throw ConfigError(where + ": duplicate id '" + item.id + "'");
    }
    ds.items.push_back(std::move(item));
  }

  std::unordered_map<std::string, std::size_t> context_index;
  std::vector<std::set<std::string>> context_seen;
  const auto pair_lines = Lines(pairs_text);
  for (std::size_t ln = 0; ln < pair_lines.size(); ++ln) {
    if (pair_lines[ln].find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "pairs line " + std::to_string(ln + 1);
    json j;
    try {
      j = json::parse(pair_lines[ln]);
    } catch (const json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
    RejectUnknown(j, {"context_id", "winner_id", "loser_id", "margin"}, where);
    for (const char* key : {"context_id", "winner_id", "loser_id", "margin"}) {
      if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
    }
    PreferencePair p;
    p.context_id = AsString(j["context_id"], where + ".context_id");
    p.winner_id = AsString(j["winner_id"], where + ".winner_id");
    p.loser_id = AsString(j["loser_id"], where + ".loser_id");
    p.margin = AsDouble(j["margin"], where + ".margin");
    auto [it, fresh] = context_index.emplace(p.context_id, ds.contexts.size());
    if (fresh) {
      ds.contexts.push_back({p.context_id, {}});
      context_seen.emplace_back();
    }
    for (const std::string* id : {&p.winner_id, &p.loser_id}) {
      if (context_seen[it->second].insert(*id).second) {
        ds.contexts[it->second].members.push_back(*id);
      }
    }
    ds.pairs.push_back(std::move(p));
  }
  return ds;
}

ColumnMapping ColumnMappingFromJson(const json& j) {
  RejectUnknown(j, {"id", "embedding", "embedding_prefix", "outcome",
                    "confounders", "instruments", "latent", "month", "weekday",
                    "split"},
                "mapping");
  ColumnMapping m;
  if (const json* v = Find(j, "id")) m.id = AsString(*v, "mapping.id");
  if (const json* v = Find(j, "embedding")) m.embedding = AsStrings(*v, "mapping.embedding");
  if (const json* v = Find(j, "embedding_prefix")) m.embedding_prefix = AsString(*v, "mapping.embedding_prefix");
  if (m.embedding.empty() && !m.embedding_prefix) {
    throw ConfigError("mapping.embedding: name the embedding columns or set embedding_prefix");
  }
  const json* outcome = Find(j, "outcome");
  if (!outcome) throw ConfigError("mapping.outcome: required");
  m.outcome = AsString(*outcome, "mapping.outcome");
  if (const json* v = Find(j, "confounders")) m.confounders = AsStrings(*v, "mapping.confounders");
  if (const json* v = Find(j, "instruments")) m.instruments = AsStrings(*v, "mapping.instruments");
  if (const json* v = Find(j, "latent")) m.latent = AsStrings(*v, "mapping.latent");
  if (const json* v = Find(j, "month")) m.month = AsString(*v, "mapping.month");
  if (const json* v = Find(j, "weekday")) m.weekday = AsString(*v, "mapping.weekday");
  if (const json* v = Find(j, "split")) m.split = AsString(*v, "mapping.split");
  return m;
}

Dataset IngestCsv(const std::string& text, const ColumnMapping& mapping) {
  const auto lines = Lines(text);
  if (lines.empty()) throw ConfigError("ingest: empty CSV");
  const auto header = SplitCsvLine(lines.front());
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < header.size(); ++c) col[header[c]] = c;

  std::vector<std::string> embedding_cols = mapping.embedding;
  if (embedding_cols.empty()) {
    for (const std::string& h : header) {
      if (h.rfind(*mapping.embedding_prefix, 0) == 0) embedding_cols.push_back(h);
    }
    if (embedding_cols.empty()) {
      throw ConfigError("ingest: no column starts with embedding prefix '" +
                        *mapping.embedding_prefix + "'");
    }
  }

  Dataset ds;
  std::size_t row = 0;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    const auto cells = SplitCsvLine(lines[ln]);
    auto has = [&](const std::string& name) {
      auto it = col.find(name);
      return it != col.end() && it->second < cells.size();
    };
    auto raw = [&](const std::string& name) { return cells[col.at(name)]; };
    auto cell = [&](const std::string& name) -> std::optional<double> {
      const std::string s = raw(name);
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || end == s.c_str() || *end != '\0') return std::nullopt;
      return v;
    };
    Item item = BuildIngestedItem(mapping, embedding_cols, row, cell, has);
    item.id = mapping.id ? raw(*mapping.id) : "row-" + std::to_string(row);
    ds.split[item.id] =
        mapping.split ? ParseSplitCell(raw(*mapping.split), row) : Split::kTrain;
    ds.items.push_back(std::move(item));
  }
  FinishIngest(ds);
  return ds;
}

Dataset IngestJsonl(const std::string& text, const ColumnMapping& mapping) {
  Dataset ds;
  std::size_t row = 0;
  for (const std::string& line : Lines(text)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError("row " + std::to_string(row) + ": " + e.what());
    }
    // An array-valued embedding field expands to name[0], name[1], ...
    std::vector<std::string> embedding_cols = mapping.embedding;
    json flat = j;
    if (mapping.embedding.size() == 1 && j.contains(mapping.embedding[0]) &&
        j[mapping.embedding[0]].is_array()) {
      embedding_cols.clear();
      const json& arr = j[mapping.embedding[0]];
      for (std::size_t k = 0; k < arr.size(); ++k) {
        const std::string name = mapping.embedding[0] + "[" + std::to_string(k) + "]";
        flat[name] = arr[k];
        embedding_cols.push_back(name);
      }
    } else if (embedding_cols.empty()) {
      for (const auto& [key, value] : j.items()) {
        if (key.rfind(*mapping.embedding_prefix, 0) == 0) embedding_cols.push_back(key);
      }
    }
    auto has = [&](const std::string& name) { return flat.contains(name); };
    auto cell = [&](const std::string& name) -> std::optional<double> {
      const json& v = flat[name];
      if (v.is_number()) return v.get<double>();
      if (v.is_string()) {
        const std::string s = v.get<std::string>();
        char* end = nullptr;
        const double d = std::strtod(s.c_str(), &end);
        if (!s.empty() && *end == '\0') return d;
      }
      return std::nullopt;
    };
    Item item = BuildIngestedItem(mapping, embedding_cols, row, cell, has);
    if (mapping.id) {
      const json& v = flat[*mapping.id];
      item.id = v.is_string() ? v.get<std::string>() : v.dump();
    } else {
      item.id = "row-" + std::to_string(row);
    }
    Split s = Split::kTrain;
    if (mapping.split) {
      s = ParseSplitCell(flat.value(*mapping.split, std::string()), row);
    }
    ds.split[item.id] = s;
    ds.items.push_back(std::move(item));
  }
  FinishIngest(ds);
  return ds;
}

// ---- models and fits ----

ordered_json ModelToJson(const RewardModel& model) {
  ordered_json j;
  j["head"] = std::string(HeadName(model.head));
  j["lambda"] = model.lambda;
  j["bias"] = model.bias;
  j["weights"] = model.weights;
  if (model.confounder_coeffs) {
    j["confounder_coeffs"] = NamedToJson(*model.confounder_coeffs);
  }
  return j;
}

RewardModel ModelFromJson(const json& j) {
  RejectUnknown(j, {"head", "lambda", "bias", "weights", "confounder_coeffs"},
                "model");
  RewardModel m;
  const json* head = Find(j, "head");
  if (!head) throw ConfigError("model.head: required");
  auto h = ParseHead(AsString(*head, "model.head"));
  if (!h) throw ConfigError("model.head: expected 'regression' or 'pairwise'");
  m.head = *h;
  if (const json* v = Find(j, "lambda")) m.lambda = AsDouble(*v, "model.lambda");
  if (const json* v = Find(j, "bias")) m.bias = AsDouble(*v, "model.bias");
  const json* w = Find(j, "weights");
  if (!w || !w->is_array()) throw ConfigError("model.weights: expected an array");
  for (const json& v : *w) m.weights.push_back(AsDouble(v, "model.weights"));
  if (const json* v = Find(j, "confounder_coeffs")) {
    m.confounder_coeffs = AsNamedValues(*v, "model.confounder_coeffs");
  }
  return m;
}

ordered_json FitToJson(const DeconfoundFit& fit) {
  ordered_json j;
  j["method"] = std::string(MethodName(fit.method));
  j["alpha"] = NamedToJson(fit.alpha);
  j["stderr"] = NamedToJson(fit.std_error);
  j["intercept"] = fit.intercept;
  if (fit.first_stage_f) {
    j["first_stage_F"] = NumberOrNull(*fit.first_stage_f);
    j["weak_instrument"] = fit.weak_instrument;
  }
  if (fit.folds) j["folds"] = *fit.folds;
  j["n_used"] = fit.n_used;
  return j;
}

DeconfoundFit FitFromJson(const json& j) {
  RejectUnknown(j, {"method", "alpha", "stderr", "intercept", "first_stage_F",
                    "weak_instrument", "folds", "n_used"},
                "fit");
  DeconfoundFit fit;
  const json* method = Find(j, "method");
  if (!method) throw ConfigError("fit.method: required");
  auto m = ParseMethod(AsString(*method, "fit.method"));
  if (!m) throw ConfigError("fit.method: expected ols, iv2sls or dml");
  fit.method = *m;
  const json* alpha = Find(j, "alpha");
  if (!alpha) throw ConfigError("fit.alpha: required");
  fit.alpha = AsNamedValues(*alpha, "fit.alpha");
  if (const json* v = Find(j, "stderr")) fit.std_error = AsNamedValues(*v, "fit.stderr");
  if (const json* v = Find(j, "intercept")) fit.intercept = AsDouble(*v, "fit.intercept");
  if (const json* v = Find(j, "first_stage_F"); v && !v->is_null()) {
    fit.first_stage_f = v->get<double>();
  } else if (v) {
    fit.first_stage_f = std::numeric_limits<double>::infinity();
  }
  if (const json* v = Find(j, "weak_instrument")) fit.weak_instrument = AsBool(*v, "fit.weak_instrument");
  if (const json* v = Find(j, "folds")) fit.folds = static_cast<int>(AsInt(*v, "fit.folds"));
  if (const json* v = Find(j, "n_used")) fit.n_used = static_cast<int>(AsInt(*v, "fit.n_used"));
  return fit;
}

// ---- configuration ----

DgpConfig DgpConfigFromJson(const json& j) {
  const std::string w = "dgp";
  RejectUnknown(j, {"scenario", "n", "seed", "coef_confounder", "coef_entangle",
                    "region_levels", "noise_outcome_sd", "noise_confounder_sd",
                    "d", "nuisance_dims", "nuisance_sd", "region_prob",
                    "month_effects", "month_drift", "skew", "context_size",
                    "pair_cap", "split"},
                w);
  for (const char* key : {"scenario", "n", "seed"}) {
    if (!j.contains(key)) {
      throw ConfigError(Field(w, key) + ": required field is missing");
    }
  }
  DgpConfig cfg;
  const std::string scenario = AsString(j["scenario"], "dgp.scenario");
  auto s = ParseScenario(scenario);
  if (!s) {
    throw ConfigError("dgp.scenario: unknown scenario '" + scenario +
                      "' (orthogonal, entangled, temporal, weekday_marker)");
  }
  cfg.scenario = *s;
  cfg.n = AsInt(j["n"], "dgp.n");
  cfg.seed = AsUint(j["seed"], "dgp.seed");
  if (cfg.scenario == Scenario::kTemporal) cfg.month_effects = DefaultMonthEffects();
  if (const json* v = Find(j, "coef_confounder")) cfg.coef_confounder = AsDouble(*v, "dgp.coef_confounder");
  if (const json* v = Find(j, "coef_entangle")) cfg.coef_entangle = AsDouble(*v, "dgp.coef_entangle");
  if (const json* v = Find(j, "region_levels")) {
    if (!v->is_array() || v->size() != 3) {
      throw ConfigError("dgp.region_levels: expected 3 numbers (west, central, east)");
    }
    for (int k = 0; k < 3; ++k) cfg.region_levels[k] = AsDouble((*v)[k], "dgp.region_levels");
  }
  if (const json* v = Find(j, "noise_outcome_sd")) cfg.noise_outcome_sd = AsDouble(*v, "dgp.noise_outcome_sd");
  if (const json* v = Find(j, "noise_confounder_sd")) cfg.noise_confounder_sd = AsDouble(*v, "dgp.noise_confounder_sd");
  if (const json* v = Find(j, "d")) cfg.d = static_cast<int>(AsInt(*v, "dgp.d"));
  if (const json* v = Find(j, "nuisance_dims")) cfg.nuisance_dims = static_cast<int>(AsInt(*v, "dgp.nuisance_dims"));
  if (const json* v = Find(j, "nuisance_sd")) cfg.nuisance_sd = AsDouble(*v, "dgp.nuisance_sd");
  if (const json* v = Find(j, "region_prob")) {
    RejectUnknown(*v, {"none", "west", "central", "east"}, "dgp.region_prob");
    for (int k = 0; k < 4; ++k) {
      const char* name = kRegionNames[k].data();
      if (!v->contains(name)) {
        throw ConfigError("dgp.region_prob." + std::string(name) + ": required");
      }
      cfg.region_prob[k] = AsDouble((*v)[name], "dgp.region_prob." + std::string(name));
    }
  }
  if (const json* v = Find(j, "month_effects")) {
    if (!v->is_array() || v->size() != 12) {
      throw ConfigError("dgp.month_effects: expected 12 numbers");
    }
    for (int k = 0; k < 12; ++k) cfg.month_effects[k] = AsDouble((*v)[k], "dgp.month_effects");
  }
  if (const json* v = Find(j, "month_drift")) cfg.month_drift = AsDouble(*v, "dgp.month_drift");
  if (const json* v = Find(j, "skew")) cfg.skew = AsDouble(*v, "dgp.skew");
  if (const json* v = Find(j, "context_size")) cfg.context_size = static_cast<int>(AsInt(*v, "dgp.context_size"));
  if (const json* v = Find(j, "pair_cap")) cfg.pair_cap = static_cast<int>(AsInt(*v, "dgp.pair_cap"));
  if (const json* v = Find(j, "split")) {
    RejectUnknown(*v, {"train", "valid", "test"}, "dgp.split");
    if (const json* f = Find(*v, "train")) cfg.split.train = AsDouble(*f, "dgp.split.train");
    if (const json* f = Find(*v, "valid")) cfg.split.valid = AsDouble(*f, "dgp.split.valid");
    if (const json* f = Find(*v, "test")) cfg.split.test = AsDouble(*f, "dgp.split.test");
  }
  CheckConfig(cfg);
  LayoutFor(cfg);
  return cfg;
}

ordered_json DgpConfigToJson(const DgpConfig& cfg) {
  ordered_json j;
  j["scenario"] = std::string(ScenarioName(cfg.scenario));
  j["n"] = cfg.n;
  j["seed"] = cfg.seed;
  j["coef_confounder"] = cfg.coef_confounder;
  j["coef_entangle"] = cfg.coef_entangle;
  j["region_levels"] = cfg.region_levels;
  j["noise_outcome_sd"] = cfg.noise_outcome_sd;
  j["noise_confounder_sd"] = cfg.noise_confounder_sd;
  j["d"] = cfg.d;
  j["nuisance_dims"] = cfg.nuisance_dims;
  j["nuisance_sd"] = cfg.nuisance_sd;
  ordered_json prob;
  for (int k = 0; k < 4; ++k) prob[std::string(kRegionNames[k])] = cfg.region_prob[k];
  j["region_prob"] = prob;
  j["month_effects"] = cfg.month_effects;
  j["month_drift"] = cfg.month_drift;
  j["skew"] = cfg.skew;
  j["context_size"] = cfg.context_size;
  j["pair_cap"] = cfg.pair_cap;
  j["split"] = {{"train", cfg.split.train},
                {"valid", cfg.split.valid},
                {"test", cfg.split.test}};
  return j;
}

FitOptions FitOptionsFromJson(const json& j) {
  RejectUnknown(j, {"lambda", "max_iters", "tol", "learning_rate",
                    "intercept_penalized", "fit_intercept", "seed"},
                "fit");
  FitOptions o;
  if (const json* v = Find(j, "lambda")) o.lambda = AsDouble(*v, "fit.lambda");
  if (const json* v = Find(j, "max_iters")) o.max_iters = static_cast<int>(AsInt(*v, "fit.max_iters"));
  if (const json* v = Find(j, "tol")) o.tol = AsDouble(*v, "fit.tol");
  if (const json* v = Find(j, "learning_rate")) o.learning_rate = AsDouble(*v, "fit.learning_rate");
  if (const json* v = Find(j, "intercept_penalized")) o.intercept_penalized = AsBool(*v, "fit.intercept_penalized");
  if (const json* v = Find(j, "fit_intercept")) o.fit_intercept = AsBool(*v, "fit.fit_intercept");
  if (const json* v = Find(j, "seed")) o.seed = AsUint(*v, "fit.seed");
  CheckOptions(o);
  return o;
}

AppConfig ConfigFromJson(const json& j) {
  RejectUnknown(j, {"dgp", "fit", "deconfound", "eval", "output"}, "config");
  AppConfig cfg;
  if (const json* v = Find(j, "dgp")) cfg.dgp = DgpConfigFromJson(*v);
  if (const json* v = Find(j, "fit")) cfg.fit = FitOptionsFromJson(*v);
  if (const json* v = Find(j, "deconfound")) {
    RejectUnknown(*v, {"method", "confounder", "confounders", "instruments", "folds"},
                  "deconfound");
    DeconfoundSettings& d = cfg.deconfound;
    if (const json* m = Find(*v, "method")) {
      auto parsed = ParseMethod(AsString(*m, "deconfound.method"));
      if (!parsed) throw ConfigError("deconfound.method: expected ols, iv or dml");
      d.method = *parsed;
    }
    if (const json* c = Find(*v, "confounder")) d.confounders = {AsString(*c, "deconfound.confounder")};
    if (const json* c = Find(*v, "confounders")) d.confounders = AsStrings(*c, "deconfound.confounders");
    if (const json* c = Find(*v, "instruments")) d.instruments = AsStrings(*c, "deconfound.instruments");
    if (const json* c = Find(*v, "folds")) d.folds = static_cast<int>(AsInt(*c, "deconfound.folds"));
    if (d.confounders.empty()) throw ConfigError("deconfound.confounders: empty");
    if (d.folds < 2) throw ConfigError("deconfound.folds: must be >= 2");
  }
  if (const json* v = Find(j, "eval")) {
    RejectUnknown(*v, {"candidate_k", "seeds", "arms", "grid"}, "eval");
    EvalSettings& e = cfg.eval;
    if (const json* c = Find(*v, "candidate_k")) e.candidate_k = static_cast<int>(AsInt(*c, "eval.candidate_k"));
    if (const json* c = Find(*v, "seeds")) {
      if (!c->is_array() || c->empty()) throw ConfigError("eval.seeds: expected a non-empty list");
      e.seeds.clear();
      for (const json& s : *c) e.seeds.push_back(AsUint(s, "eval.seeds"));
    }
    if (const json* c = Find(*v, "arms")) e.arms = AsStrings(*c, "eval.arms");
    if (const json* c = Find(*v, "grid")) e.grid = AsString(*c, "eval.grid");
    if (e.candidate_k < 1) throw ConfigError("eval.candidate_k: must be >= 1");
  }
  if (const json* v = Find(j, "output")) {
    RejectUnknown(*v, {"dir"}, "output");
    if (const json* c = Find(*v, "dir")) cfg.output.dir = AsString(*c, "output.dir");
  }
  cfg.hash = Fnv1aHex(j.dump());
  return cfg;
}

ordered_json DefaultConfigJson() {
  DgpConfig dgp;
  FitOptions fit;
  DeconfoundSettings dec;
  EvalSettings ev;
  OutputSettings out;
  ordered_json j;
  j["dgp"] = DgpConfigToJson(dgp);
  j["fit"] = {{"lambda", fit.lambda},
              {"max_iters", fit.max_iters},
              {"tol", fit.tol},
              {"learning_rate", fit.learning_rate},
              {"intercept_penalized", fit.intercept_penalized},
              {"fit_intercept", fit.fit_intercept},
              {"seed", fit.seed}};
  j["deconfound"] = {{"method", std::string(MethodName(dec.method))},
                     {"confounders", dec.confounders},
                     {"instruments", dec.instruments},
                     {"folds", dec.folds}};
  std::vector<std::string> arms(kArmNames.begin(), kArmNames.end());
  j["eval"] = {{"candidate_k", ev.candidate_k},
               {"seeds", ev.seeds},
               {"arms", arms},
               {"grid", ev.grid}};
  j["output"] = {{"dir", out.dir}};
  return j;
}

std::string Fnv1aHex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- reports ----

ordered_json MetaToJson(const ReportMeta& meta) {
  ordered_json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["config_hash"] = meta.config_hash;
  j["seeds"] = meta.seeds;
  j["ttest"] = "welch";
  return j;
}

ordered_json SweepToJson(const SweepReport& report, const ReportMeta& meta) {
  ordered_json j;
  j["meta"] = MetaToJson(meta);
  ordered_json rows = ordered_json::array();
  for (const SweepRow& r : report.rows) {
    rows.push_back({{"lambda", r.lambda},
                    {"train_mse", NumberOrNull(r.train_mse)},
                    {"valid_mse", NumberOrNull(r.valid_mse)},
                    {"test_pair_auc", NumberOrNull(r.test_pair_auc)},
                    {"temporal_corr", OptionalNumber(r.temporal_corr)}});
  }
  j["rows"] = rows;
  j["argmin_valid_lambda"] = report.argmin_valid_lambda();
  j["argmax_auc_lambda"] = report.argmax_auc_lambda();
  return j;
}

std::string SweepToCsv(const SweepReport& report) {
  std::string out = "lambda,train_mse,valid_mse,test_pair_auc,temporal_corr\n";
  for (const SweepRow& r : report.rows) {
    out += FormatNumber(r.lambda) + "," + FormatNumber(r.train_mse) + "," +
           FormatNumber(r.valid_mse) + "," + FormatNumber(r.test_pair_auc) + "," +
           (r.temporal_corr ? FormatNumber(*r.temporal_corr) : "") + "\n";
  }
  return out;
}

std::string SweepToPlotCsv(const SweepReport& report) {
  std::string out = "series,x,y\n";
  for (const SweepRow& r : report.rows) out += "train_mse," + FormatNumber(r.lambda) + "," + FormatNumber(r.train_mse) + "\n";
  for (const SweepRow& r : report.rows) out += "valid_mse," + FormatNumber(r.lambda) + "," + FormatNumber(r.valid_mse) + "\n";
  for (const SweepRow& r : report.rows) out += "test_pair_auc," + FormatNumber(r.lambda) + "," + FormatNumber(r.test_pair_auc) + "\n";
  for (const SweepRow& r : report.rows) {
    if (r.temporal_corr) out += "temporal_corr," + FormatNumber(r.lambda) + "," + FormatNumber(*r.temporal_corr) + "\n";
  }
  return out;
}

ordered_json EvalReportToJson(const EvalReport& report, const ReportMeta& meta) {
  ordered_json j;
  j["meta"] = MetaToJson(meta);
  j["scenario"] = report.scenario;
  j["seeds"] = report.seeds;
  ordered_json rows = ordered_json::array();
  for (const ArmRow& r : report.rows) {
    ordered_json row;
    row["arm"] = r.arm;
    row["mean_sentiment"] = NumberOrNull(r.mean_sentiment);
    row["se"] = NumberOrNull(r.se);
    row["region_counts"] = {{"west", r.region_counts[0]},
                            {"central", r.region_counts[1]},
                            {"east", r.region_counts[2]}};
    row["region_pick_rate"] = NumberOrNull(r.region_pick_rate);
    row["reward_sentiment_corr_train"] = NumberOrNull(r.reward_sentiment_corr_train);
    row["reward_sentiment_corr_train_se"] = NumberOrNull(r.reward_sentiment_corr_train_se);
    row["reward_sentiment_corr_valid"] = NumberOrNull(r.reward_sentiment_corr_valid);
    row["reward_sentiment_corr_valid_se"] = NumberOrNull(r.reward_sentiment_corr_valid_se);
    row["test_pair_auc"] = NumberOrNull(r.test_pair_auc);
    row["alpha_hat"] = OptionalNumber(r.alpha_hat);
    rows.push_back(row);
  }
  j["rows"] = rows;
  ordered_json per_seed = ordered_json::array();
  for (const ArmSeedResult& r : report.per_seed) {
    ordered_json row;
    row["arm"] = r.arm;
    row["seed"] = r.seed;
    row["mean_sentiment"] = NumberOrNull(r.mean_sentiment);
    row["region_counts"] = {{"west", r.region_counts[0]},
                            {"central", r.region_counts[1]},
                            {"east", r.region_counts[2]}};
    row["picks"] = r.picks;
    row["reward_sentiment_corr_train"] = NumberOrNull(r.reward_sentiment_corr_train);
    row["reward_sentiment_corr_valid"] = NumberOrNull(r.reward_sentiment_corr_valid);
    row["test_pair_auc"] = NumberOrNull(r.test_pair_auc);
    row["alpha_hat"] = OptionalNumber(r.alpha_hat);
    row["alpha_se"] = OptionalNumber(r.alpha_se);
    per_seed.push_back(row);
  }
  j["per_seed"] = per_seed;
  return j;
}

std::string EvalReportToCsv(const EvalReport& report) {
  std::string out =
      "arm,seed,mean_sentiment,se,west,central,east,region_pick_rate,"
      "reward_sentiment_corr_train,reward_sentiment_corr_valid,test_pair_auc,"
      "alpha_hat\n";
  auto opt = [](const std::optional<double>& v) {
    return v ? FormatNumber(*v) : std::string();
  };
  for (const ArmSeedResult& r : report.per_seed) {
    const long long tagged = r.region_counts[0] + r.region_counts[1] + r.region_counts[2];
    out += r.arm + "," + std::to_string(r.seed) + "," +
           FormatNumber(r.mean_sentiment) + ",," +
           std::to_string(r.region_counts[0]) + "," +
           std::to_string(r.region_counts[1]) + "," +
           std::to_string(r.region_counts[2]) + "," +
           FormatNumber(r.picks == 0 ? 0.0 : static_cast<double>(tagged) / static_cast<double>(r.picks)) + "," +
           FormatNumber(r.reward_sentiment_corr_train) + "," +
           FormatNumber(r.reward_sentiment_corr_valid) + "," +
           FormatNumber(r.test_pair_auc) + "," + opt(r.alpha_hat) + "\n";
  }
  for (const ArmRow& r : report.rows) {
    out += r.arm + ",all," + FormatNumber(r.mean_sentiment) + "," +
           FormatNumber(r.se) + "," + std::to_string(r.region_counts[0]) + "," +
           std::to_string(r.region_counts[1]) + "," +
           std::to_string(r.region_counts[2]) + "," +
           FormatNumber(r.region_pick_rate) + "," +
           FormatNumber(r.reward_sentiment_corr_train) + "," +
           FormatNumber(r.reward_sentiment_corr_valid) + "," +
           FormatNumber(r.test_pair_auc) + "," + opt(r.alpha_hat) + "\n";
  }
  return out;
}

ordered_json WeekdayToJson(const WeekdayReport& report, const ReportMeta& meta) {
  auto arm = [](const WeekdayArmRow& r) {
    ordered_json j;
    j["arm"] = r.arm;
    j["marker_weights"] = r.marker_weights;
    j["weight_mean"] = NumberOrNull(r.weight_mean);
    j["weight_se"] = NumberOrNull(r.weight_se);
    j["weight_vs_zero"] = TTestToJson(r.weight_vs_zero);
    j["pick_rates"] = r.pick_rates;
    j["rate_mean"] = NumberOrNull(r.rate_mean);
    j["rate_se"] = NumberOrNull(r.rate_se);
    return j;
  };
  ordered_json j;
  j["meta"] = MetaToJson(meta);
  j["skew"] = report.skew;
  j["seeds"] = report.seeds;
  j["base_rates"] = report.base_rates;
  j["base_rate_mean"] = NumberOrNull(report.base_rate_mean);
  j["monday_win_fraction"] = report.monday_win_fraction;
  j["arms"] = {arm(report.naive), arm(report.deconfounded)};
  j["weight_welch"] = TTestToJson(report.weight_welch);
  j["rate_welch"] = TTestToJson(report.rate_welch);
  return j;
}

std::string WeekdayToCsv(const WeekdayReport& report) {
  std::string out = "arm,seed,marker_weight,marker_pick_rate,base_rate\n";
  for (const WeekdayArmRow* r : {&report.naive, &report.deconfounded}) {
    for (std::size_t s = 0; s < report.seeds.size(); ++s) {
      out += r->arm + "," + std::to_string(report.seeds[s]) + "," +
             FormatNumber(r->marker_weights[s]) + "," +
             FormatNumber(r->pick_rates[s]) + "," +
             FormatNumber(report.base_rates[s]) + "\n";
    }
  }
  return out;
}

std::string ReportFileName(const std::string& scenario,
                           const std::string& report,
                           const std::vector<std::uint64_t>& seeds,
                           const std::string& ext) {
  return scenario + "_" + report + "_" + SeedRange(seeds) + "." + ext;
}

// ---- files ----

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return ss.str();
}

void WriteFileAtomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out << contents;
    out.flush();
    if (!out) throw IoError("error writing '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename '" + tmp + "' to '" + path + "'");
  }
}

}  // namespace deconfound
