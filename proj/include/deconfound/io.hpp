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

// File formats: JSONL datasets, JSON models and fits, the experiment config
// file, and CSV/JSON reports.
//
// Items file, one object per line, fields in this order:
//   {"id", "embedding", "confounders", "instruments", "latent"?, "outcome",
//    "month"?, "weekday"?, "split"}
// Pairs file:
//   {"context_id", "winner_id", "loser_id", "margin"}
//
// Writers are canonical: reading a written file and writing it again yields
// the same bytes.

#ifndef DECONFOUND_IO_HPP_
#define DECONFOUND_IO_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "deconfound/deconfound.hpp"
#include "deconfound/harness.hpp"
#include "deconfound/model.hpp"
#include "deconfound/reward.hpp"

namespace deconfound {

inline constexpr const char* kToolName = "deconfound";
inline constexpr const char* kToolVersion = "0.1.0";

// ---- datasets ------------------------------------------------------------

std::string ItemsToJsonl(const Dataset& dataset);
std::string PairsToJsonl(const Dataset& dataset);

// Parses the items file (and optionally the pairs file). Contexts are
// recovered from the pairs' context ids. Errors cite 1-based line numbers.
Dataset DatasetFromJsonl(const std::string& items_text,
                         const std::string& pairs_text = "");

// Column mapping for ingestion of external data. Every entry names a CSV
// column (or a JSONL field).
struct ColumnMapping {
  std::optional<std::string> id;
  std::vector<std::string> embedding;
  std::optional<std::string> embedding_prefix;  // alternative to `embedding`
  std::string outcome;
  std::vector<std::string> confounders;
  std::vector<std::string> instruments;
  std::vector<std::string> latent;
  std::optional<std::string> month;
  std::optional<std::string> weekday;
  std::optional<std::string> split;
};

ColumnMapping ColumnMappingFromJson(const nlohmann::json& j);

// Rejects NaN/Inf cells citing the 1-based data row and the column. The
// result is checked with Validate().
Dataset IngestCsv(const std::string& text, const ColumnMapping& mapping);
Dataset IngestJsonl(const std::string& text, const ColumnMapping& mapping);

// ---- models and fits -----------------------------------------------------

nlohmann::ordered_json ModelToJson(const RewardModel& model);
RewardModel ModelFromJson(const nlohmann::json& j);

nlohmann::ordered_json FitToJson(const DeconfoundFit& fit);
DeconfoundFit FitFromJson(const nlohmann::json& j);

// ---- configuration -------------------------------------------------------

struct DeconfoundSettings {
  Method method = Method::kIv2sls;
  std::vector<std::string> confounders = {"popularity"};
  std::vector<std::string> instruments = {"region_west", "region_central",
                                          "region_east"};
  int folds = 5;
};

struct EvalSettings {
  int candidate_k = 8;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<std::string> arms;  // empty selects every arm
  std::string grid = "logspace(-5,1,15)";
};

struct OutputSettings {
  std::string dir = "out";
};

struct AppConfig {
  std::optional<DgpConfig> dgp;
  FitOptions fit;
  DeconfoundSettings deconfound;
  EvalSettings eval;
  OutputSettings output;
  std::string hash;  // FNV-1a of the canonical document
};

// Schema-checks the document: unknown keys are rejected and the message
// names the offending field. Within "dgp", "scenario", "n" and "seed" are
// required.
AppConfig ConfigFromJson(const nlohmann::json& j);
DgpConfig DgpConfigFromJson(const nlohmann::json& j);
FitOptions FitOptionsFromJson(const nlohmann::json& j);
nlohmann::ordered_json DgpConfigToJson(const DgpConfig& cfg);

// The full document with every default filled in.
nlohmann::ordered_json DefaultConfigJson();

// Hex FNV-1a 64 of a string.
std::string Fnv1aHex(const std::string& text);

// ---- reports -------------------------------------------------------------

struct ReportMeta {
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
};

nlohmann::ordered_json MetaToJson(const ReportMeta& meta);

nlohmann::ordered_json SweepToJson(const SweepReport& report,
                                   const ReportMeta& meta);
std::string SweepToCsv(const SweepReport& report);
// Long-format plot data: series,x,y.
std::string SweepToPlotCsv(const SweepReport& report);

nlohmann::ordered_json EvalReportToJson(const EvalReport& report,
                                        const ReportMeta& meta);
std::string EvalReportToCsv(const EvalReport& report);

nlohmann::ordered_json WeekdayToJson(const WeekdayReport& report,
                                     const ReportMeta& meta);
std::string WeekdayToCsv(const WeekdayReport& report);

// "{scenario}_{report}_{first}-{last}.{ext}"; a single seed gives "{s}".
std::string ReportFileName(const std::string& scenario,
                           const std::string& report,
                           const std::vector<std::uint64_t>& seeds,
                           const std::string& ext);

// Shortest decimal text that round-trips to the same double.
std::string FormatNumber(double v);

// ---- files ---------------------------------------------------------------

std::string ReadFile(const std::string& path);
// Writes via a temporary sibling and rename. Throws IoError.
void WriteFileAtomic(const std::string& path, const std::string& contents);

}  // namespace deconfound

#endif  // DECONFOUND_IO_HPP_
