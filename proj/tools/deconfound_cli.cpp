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

// deconfound: command-line driver over libdeconfound's C interface.
//
// Exit codes: 0 success, 2 usage or configuration, 3 I/O, 4 numerical.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "deconfound/deconfound.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Carries an exit code up to main().
struct Failure {
  int code;
  std::string message;
};

[[noreturn]] void Fail(int code, const std::string& message) {
  throw Failure{code, message};
}

void Check(dcf_status status) {
  if (status != DCF_OK) Fail(static_cast<int>(status), dcf_last_error());
}

struct CString {
  char* p = nullptr;
  ~CString() { dcf_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

struct DatasetPtr {
  dcf_dataset* p = nullptr;
  ~DatasetPtr() { dcf_dataset_free(p); }
};

struct ModelPtr {
  dcf_model* p = nullptr;
  ~ModelPtr() { dcf_model_free(p); }
};

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(3, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) Fail(3, "cannot create directory '" + dir.string() + "': " + ec.message());
}

void WriteAtomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) EnsureDir(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) Fail(3, "cannot open '" + tmp.string() + "' for writing");
    out << contents;
    out.flush();
    if (!out) Fail(3, "error writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) Fail(3, "cannot rename '" + tmp.string() + "' to '" + path.string() + "'");
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(text);
  while (std::getline(ss, cur, ',')) {
    cur.erase(0, cur.find_first_not_of(" \t"));
    cur.erase(cur.find_last_not_of(" \t") + 1);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::uint64_t ParseSeed(const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    Fail(2, "--seeds: '" + s + "' is not a non-negative integer");
  }
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    Fail(2, "--seeds: '" + s + "' is out of range");
  }
}

// "1-5", "3" or "1,4,9".
std::vector<std::uint64_t> ParseSeeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const std::string& part : SplitList(text)) {
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(ParseSeed(part));
      continue;
    }
    const std::uint64_t lo = ParseSeed(part.substr(0, dash));
    const std::uint64_t hi = ParseSeed(part.substr(dash + 1));
    if (hi < lo || hi - lo > 100000) Fail(2, "--seeds: bad range '" + part + "'");
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) Fail(2, "--seeds: empty list");
  return out;
}

std::string SeedRange(const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) return "none";
  if (seeds.size() == 1) return std::to_string(seeds.front());
  return std::to_string(seeds.front()) + "-" + std::to_string(seeds.back());
}

// Options shared by several subcommands. Flags only override the config
// document when given.
struct Common {
  std::string config;
  std::string data;
  std::string out;
  int threads = 0;
};

struct Overrides {
  double lambda = 0.0;
  std::string method = "iv";
  std::string confounder = "popularity";
  std::string instruments = "region_west,region_central,region_east";
  int folds = 5;
  std::string seeds = "1-5";
  std::string arms;
  std::string grid = "logspace(-5,1,15)";
  double skew = 0.5;
};

json LoadConfig(const std::string& path) {
  if (path.empty()) return json::object();
  const std::string text = Slurp(path);
  try {
    json doc = json::parse(text);
    if (!doc.is_object()) Fail(2, "config: expected a JSON object");
    return doc;
  } catch (const json::parse_error& e) {
    Fail(2, std::string("config: ") + e.what());
  }
}

struct Flag {
  CLI::Option* opt = nullptr;
  bool given() const { return opt != nullptr && opt->count() > 0; }
};

struct DataFiles {
  fs::path items;
  fs::path pairs;
};

DataFiles FilesIn(const fs::path& dir) {
  return {dir / "items.jsonl", dir / "pairs.jsonl"};
}

void ReadData(const std::string& dir, DatasetPtr& ds) {
  if (dir.empty()) Fail(2, "--data is required");
  const DataFiles f = FilesIn(dir);
  if (!fs::exists(f.items)) Fail(3, "no items.jsonl in '" + dir + "'");
  const std::string pairs = f.pairs.string();
  Check(dcf_dataset_read(f.items.c_str(),
                         fs::exists(f.pairs) ? pairs.c_str() : nullptr, &ds.p));
}

void WriteData(const dcf_dataset* ds, const fs::path& dir) {
  EnsureDir(dir);
  const DataFiles f = FilesIn(dir);
  Check(dcf_dataset_write(ds, f.items.c_str(), f.pairs.c_str()));
}

std::string ScenarioOf(const json& doc, const std::string& fallback) {
  if (doc.contains("dgp") && doc["dgp"].is_object() &&
      doc["dgp"].contains("scenario") && doc["dgp"]["scenario"].is_string()) {
    return doc["dgp"]["scenario"].get<std::string>();
  }
  return fallback;
}

std::vector<std::uint64_t> DgpSeed(const json& doc) {
  if (doc.contains("dgp") && doc["dgp"].is_object() &&
      doc["dgp"].contains("seed") && doc["dgp"]["seed"].is_number_unsigned()) {
    return {doc["dgp"]["seed"].get<std::uint64_t>()};
  }
  return {};
}

std::vector<std::uint64_t> EvalSeeds(const json& doc) {
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  if (doc.contains("eval") && doc["eval"].is_object() &&
      doc["eval"].contains("seeds") && doc["eval"]["seeds"].is_array()) {
    seeds.clear();
    for (const json& s : doc["eval"]["seeds"]) {
      if (s.is_number_unsigned()) seeds.push_back(s.get<std::uint64_t>());
    }
  }
  return seeds;
}

fs::path OutDir(const Common& c, const json& doc) {
  if (!c.out.empty()) return c.out;
  if (doc.contains("output") && doc["output"].is_object() &&
      doc["output"].contains("dir") && doc["output"]["dir"].is_string()) {
    return doc["output"]["dir"].get<std::string>();
  }
  return "out";
}

std::string ReportName(const std::string& scenario, const std::string& report,
                       const std::vector<std::uint64_t>& seeds,
                       const std::string& ext) {
  return scenario + "_" + report + "_" + SeedRange(seeds) + "." + ext;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "deconfound: simulate confounded outcome data, fit reward models on raw "
      "and deconfounded outcomes, and emit diagnostic reports.\n"
      "Exit codes: 0 success, 2 usage/config, 3 I/O, 4 numerical.\n"
      "Datasets are directories holding items.jsonl and pairs.jsonl."};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dcf_version()));

  Common common;
  Overrides ov;

  auto add_common = [&](CLI::App* sub, bool data) {
    sub->add_option("--config", common.config,
                    "JSON config file with sections dgp, fit, deconfound, eval, "
                    "output (see `deconfound config` for every default)");
    if (data) sub->add_option("--data", common.data, "Dataset directory");
    sub->add_option("--threads", common.threads,
                    "Worker threads; 0 uses all cores. Never changes output")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
  };

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Generate a dataset from the dgp section");
  add_common(simulate, false);
  simulate->add_option("--out", common.out, "Output dataset directory")->required();

  // train
  std::string head = "regression";
  auto* train = app.add_subcommand("train", "Fit a reward model on the train split");
  add_common(train, true);
  train->add_option("--out", common.out, "Model JSON path")->required();
  train->add_option("--head", head, "regression (ridge on outcomes) or pairwise (Bradley-Terry on pairs)")
      ->capture_default_str()
      ->check(CLI::IsMember({"regression", "pairwise"}));
  Flag train_lambda{train->add_option("--lambda", ov.lambda, "Ridge penalty")
                        ->capture_default_str()
                        ->check(CLI::NonNegativeNumber)};

  // deconfound
  std::string residualized;
  auto* dec = app.add_subcommand("deconfound", "Estimate confounder effects on the outcome");
  add_common(dec, true);
  dec->add_option("--out", common.out, "Fit JSON path")->required();
  Flag dec_method{dec->add_option("--method", ov.method, "Estimator")
                      ->capture_default_str()
                      ->check(CLI::IsMember({"ols", "iv", "iv2sls", "dml"}))};
  Flag dec_conf{dec->add_option("--confounder", ov.confounder,
                                "Confounder name (comma list for ols)")
                    ->capture_default_str()};
  Flag dec_inst{dec->add_option("--instruments", ov.instruments,
                                "Comma-separated instrument names")
                    ->capture_default_str()};
  Flag dec_folds{dec->add_option("--folds", ov.folds, "Cross-fitting folds for dml")
                     ->capture_default_str()
                     ->check(CLI::Range(2, 1000))};
  Flag dec_lambda{dec->add_option("--lambda", ov.lambda, "Ridge penalty of the dml nuisance fits")
                      ->capture_default_str()
                      ->check(CLI::NonNegativeNumber)};
  dec->add_option("--residualized", residualized,
                  "Also write the residualized dataset to this directory");

  // eval
  std::string model_path;
  std::string eval_name;
  auto* eval = app.add_subcommand("eval", "Per-split diagnostics of a trained model");
  add_common(eval, true);
  eval->add_option("--model", model_path, "Model JSON path")->required();
  eval->add_option("--out", common.out, "Report directory (default: output.dir, else out)");
  eval->add_option("--name", eval_name,
                   "Report name prefix (default: dgp.scenario, else the data directory name)");

  // sweep
  auto* sweep = app.add_subcommand(
      "sweep", "Ridge regularization sweep; uses --data or simulates from the dgp section");
  add_common(sweep, true);
  sweep->add_option("--out", common.out, "Report directory (default: output.dir, else out)");
  Flag sweep_grid{sweep->add_option("--grid", ov.grid,
                                    "logspace(a,b,n), linspace(a,b,n) or a comma list")
                      ->capture_default_str()};

  // scenario
  auto* scenario = app.add_subcommand(
      "scenario", "Compare reward arms over seeds on the orthogonal or entangled scenario");
  add_common(scenario, false);
  scenario->add_option("--out", common.out, "Report directory (default: output.dir, else out)");
  Flag sc_seeds{scenario->add_option("--seeds", ov.seeds, "Seeds: range a-b or comma list")
                    ->capture_default_str()};
  Flag sc_arms{scenario->add_option("--arms", ov.arms,
                                    "Comma list of arms (default: all of oracle_sentiment, "
                                    "sentiment_plus_noise, naive_observed, conf_in_embedding, "
                                    "conf_in_head, deconfound_iv, deconfound_dml)")};
  Flag sc_conf{scenario->add_option("--confounder", ov.confounder, "Confounder name")
                   ->capture_default_str()};
  Flag sc_inst{scenario->add_option("--instruments", ov.instruments,
                                    "Comma-separated instrument names")
                   ->capture_default_str()};
  Flag sc_folds{scenario->add_option("--folds", ov.folds, "Cross-fitting folds")
                    ->capture_default_str()
                    ->check(CLI::Range(2, 1000))};
  Flag sc_lambda{scenario->add_option("--lambda", ov.lambda, "Ridge penalty of every arm")
                     ->capture_default_str()
                     ->check(CLI::NonNegativeNumber)};

  // weekday
  auto* weekday = app.add_subcommand(
      "weekday", "Weekday-marker amplification study (naive vs deconfounded pairwise models)");
  add_common(weekday, false);
  weekday->add_option("--out", common.out, "Report directory (default: output.dir, else out)");
  Flag wk_seeds{weekday->add_option("--seeds", ov.seeds, "Seeds: range a-b or comma list")
                    ->capture_default_str()};
  Flag wk_skew{weekday->add_option("--skew", ov.skew,
                                   "Probability a Monday item wins a mixed pair")
                   ->capture_default_str()
                   ->check(CLI::Range(0.0, 1.0))};

  // ingest
  std::string input;
  std::string format;
  std::string mapping;
  auto* ingest = app.add_subcommand("ingest", "Convert external CSV/JSONL data into a dataset");
  ingest->add_option("--input", input, "CSV or JSONL file")->required();
  ingest->add_option("--format", format, "csv or jsonl (default: from the extension)")
      ->check(CLI::IsMember({"csv", "jsonl"}));
  ingest->add_option("--mapping", mapping,
                     "JSON column mapping: id, embedding or embedding_prefix, outcome, "
                     "confounders, instruments, latent, month, weekday, split")
      ->required();
  ingest->add_option("--out", common.out, "Output dataset directory")->required();

  // validate
  auto* validate = app.add_subcommand("validate", "Check a dataset; prints one line per violation");
  validate->add_option("--data", common.data, "Dataset directory")->required();

  // config
  auto* config = app.add_subcommand("config", "Print the configuration document with all defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    Check(dcf_set_threads(common.threads));
    json doc = LoadConfig(common.config);
    auto section = [&](const char* name) -> json& {
      json& s = doc[name];
      if (s.is_null()) s = json::object();
      if (!s.is_object()) Fail(2, std::string(name) + ": expected a JSON object");
      return s;
    };

    if (config->parsed()) {
      CString out;
      Check(dcf_default_config(&out.p));
      std::cout << out.str();
      return 0;
    }

    if (simulate->parsed()) {
      DatasetPtr ds;
      Check(dcf_simulate(doc.dump().c_str(), &ds.p));
      WriteData(ds.p, common.out);
      std::cout << "scenario " << ScenarioOf(doc, "?") << ": "
                << dcf_dataset_item_count(ds.p) << " items, "
                << dcf_dataset_pair_count(ds.p) << " pairs -> " << common.out
                << "\n";
      return 0;
    }

    if (train->parsed()) {
      if (train_lambda.given()) section("fit")["lambda"] = ov.lambda;
      DatasetPtr ds;
      ReadData(common.data, ds);
      ModelPtr model;
      Check(dcf_fit(ds.p, doc.dump().c_str(), head.c_str(), &model.p));
      CString text;
      Check(dcf_model_to_json(model.p, &text.p));
      WriteAtomic(common.out, text.str());
      std::cout << "trained " << head << " model -> " << common.out << "\n";
      return 0;
    }

    if (dec->parsed()) {
      json& d = section("deconfound");
      if (dec_method.given()) d["method"] = ov.method;
      if (dec_conf.given()) {
        d.erase("confounder");
        d["confounders"] = SplitList(ov.confounder);
      }
      if (dec_inst.given()) d["instruments"] = SplitList(ov.instruments);
      if (dec_folds.given()) d["folds"] = ov.folds;
      if (dec_lambda.given()) section("fit")["lambda"] = ov.lambda;
      DatasetPtr ds;
      ReadData(common.data, ds);
      CString fit;
      Check(dcf_deconfound(ds.p, doc.dump().c_str(), &fit.p));
      WriteAtomic(common.out, fit.str());
      const json parsed = json::parse(fit.str());
      for (const auto& [name, alpha] : parsed["alpha"].items()) {
        std::cout << parsed["method"].get<std::string>() << " alpha[" << name
                  << "] = " << alpha.dump() << " (se "
                  << parsed["stderr"][name].dump() << ")\n";
      }
      if (parsed.value("weak_instrument", false)) {
        std::cerr << "warning: weak instrument (first-stage F "
                  << parsed["first_stage_F"].dump() << " < 10)\n";
      }
      if (!residualized.empty()) {
        DatasetPtr res;
        Check(dcf_residualize(ds.p, fit.p, &res.p));
        WriteData(res.p, residualized);
      }
      return 0;
    }

    if (eval->parsed()) {
      DatasetPtr ds;
      ReadData(common.data, ds);
      ModelPtr model;
      Check(dcf_model_from_json(Slurp(model_path).c_str(), &model.p));
      CString report;
      Check(dcf_evaluate(model.p, ds.p, doc.dump().c_str(), &report.p));
      const fs::path dir = OutDir(common, doc);
      EnsureDir(dir);
      std::string name = eval_name;
      if (name.empty()) {
        name = ScenarioOf(doc, fs::path(common.data).lexically_normal().filename().string());
        if (name.empty()) name = "data";
      }
      const fs::path path = dir / ReportName(name, "eval", DgpSeed(doc), "json");
      WriteAtomic(path, report.str());
      std::cout << "eval report -> " << path.string() << "\n";
      return 0;
    }

    if (sweep->parsed()) {
      if (sweep_grid.given()) section("eval")["grid"] = ov.grid;
      DatasetPtr ds;
      if (!common.data.empty()) {
        ReadData(common.data, ds);
      } else {
        Check(dcf_simulate(doc.dump().c_str(), &ds.p));
      }
      CString j;
      CString c;
      CString p;
      Check(dcf_sweep(ds.p, doc.dump().c_str(), &j.p, &c.p, &p.p));
      const fs::path dir = OutDir(common, doc);
      EnsureDir(dir);
      const std::string name = ScenarioOf(doc, "data");
      const auto seeds = DgpSeed(doc);
      WriteAtomic(dir / ReportName(name, "sweep", seeds, "json"), j.str());
      WriteAtomic(dir / ReportName(name, "sweep", seeds, "csv"), c.str());
      WriteAtomic(dir / ReportName(name, "sweep-plot", seeds, "csv"), p.str());
      const json parsed = json::parse(j.str());
      std::cout << "sweep: argmin valid MSE lambda " << parsed["argmin_valid_lambda"].dump()
                << ", argmax test AUC lambda " << parsed["argmax_auc_lambda"].dump()
                << " -> " << dir.string() << "\n";
      return 0;
    }

    if (scenario->parsed()) {
      json& e = section("eval");
      if (sc_seeds.given()) e["seeds"] = ParseSeeds(ov.seeds);
      if (sc_arms.given()) e["arms"] = SplitList(ov.arms);
      json& d = section("deconfound");
      if (sc_conf.given()) {
        d.erase("confounder");
        d["confounders"] = SplitList(ov.confounder);
      }
      if (sc_inst.given()) d["instruments"] = SplitList(ov.instruments);
      if (sc_folds.given()) d["folds"] = ov.folds;
      if (sc_lambda.given()) section("fit")["lambda"] = ov.lambda;
      CString j;
      CString c;
      Check(dcf_scenario(doc.dump().c_str(), &j.p, &c.p));
      const fs::path dir = OutDir(common, doc);
      EnsureDir(dir);
      const std::string name = ScenarioOf(doc, "scenario");
      const auto seeds = EvalSeeds(doc);
      WriteAtomic(dir / ReportName(name, "arms", seeds, "json"), j.str());
      WriteAtomic(dir / ReportName(name, "arms", seeds, "csv"), c.str());
      const json parsed = json::parse(j.str());
      for (const json& row : parsed["rows"]) {
        std::cout << row["arm"].get<std::string>() << ": mean selected sentiment "
                  << row["mean_sentiment"].dump() << ", valid corr "
                  << row["reward_sentiment_corr_valid"].dump() << "\n";
      }
      return 0;
    }

    if (weekday->parsed()) {
      if (wk_seeds.given()) section("eval")["seeds"] = ParseSeeds(ov.seeds);
      if (wk_skew.given()) section("dgp")["skew"] = ov.skew;
      CString j;
      CString c;
      Check(dcf_weekday_study(doc.dump().c_str(), &j.p, &c.p));
      const fs::path dir = OutDir(common, doc);
      EnsureDir(dir);
      const auto seeds = EvalSeeds(doc);
      const std::string name = ScenarioOf(doc, "weekday_marker");
      WriteAtomic(dir / ReportName(name, "study", seeds, "json"), j.str());
      WriteAtomic(dir / ReportName(name, "study", seeds, "csv"), c.str());
      const json parsed = json::parse(j.str());
      for (const json& arm : parsed["arms"]) {
        std::cout << arm["arm"].get<std::string>() << ": marker weight "
                  << arm["weight_mean"].dump() << " (p "
                  << arm["weight_vs_zero"]["p"].dump() << "), marker pick rate "
                  << arm["rate_mean"].dump() << "\n";
      }
      return 0;
    }

    if (ingest->parsed()) {
      std::string fmt = format;
      if (fmt.empty()) {
        const std::string ext = fs::path(input).extension().string();
        if (ext == ".csv") {
          fmt = "csv";
        } else if (ext == ".jsonl" || ext == ".json") {
          fmt = "jsonl";
        } else {
          Fail(2, "--format: cannot infer from '" + input + "'");
        }
      }
      const std::string map_text = fs::exists(mapping) ? Slurp(mapping) : mapping;
      DatasetPtr ds;
      Check(dcf_dataset_ingest(input.c_str(), fmt.c_str(), map_text.c_str(), &ds.p));
      WriteData(ds.p, common.out);
      std::cout << "ingested " << dcf_dataset_item_count(ds.p) << " items -> "
                << common.out << "\n";
      return 0;
    }

    if (validate->parsed()) {
      DatasetPtr ds;
      ReadData(common.data, ds);
      CString out;
      Check(dcf_dataset_validate(ds.p, &out.p));
      const json violations = json::parse(out.str());
      for (const json& v : violations) std::cout << v.get<std::string>() << "\n";
      if (!violations.empty()) return 2;
      std::cout << "ok: " << dcf_dataset_item_count(ds.p) << " items, "
                << dcf_dataset_pair_count(ds.p) << " pairs\n";
      return 0;
    }
  } catch (const Failure& f) {
    std::cerr << "deconfound: error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "deconfound: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
