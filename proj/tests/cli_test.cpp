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

#include <sys/wait.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;  // stdout and stderr
};

Run Cli(const std::string& args) {
  const std::string cmd = std::string(DCF_CLI_PATH) + " " + args + " 2>&1";
  std::FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void Spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

int Lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

std::uint64_t Fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// A scratch directory under the working directory, emptied per test.
fs::path Scratch(const std::string& name) {
  const fs::path dir = fs::current_path() / "cli_scratch" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string Q(const fs::path& p) { return "'" + p.string() + "'"; }

TEST_CASE("simulate n=100 writes a 100-line items file") {
  const fs::path d = Scratch("sim100");
  Spit(d / "c.json", R"({"dgp":{"scenario":"orthogonal","n":100,"seed":3}})");
  const Run r = Cli("simulate --config " + Q(d / "c.json") + " --out " + Q(d / "ds"));
  REQUIRE(r.code == 0);
  CHECK(Lines(Slurp(d / "ds" / "items.jsonl")) == 100);
  CHECK(Cli("validate --data " + Q(d / "ds")).code == 0);
}

TEST_CASE("missing dgp seed exits 2 and names the field") {
  const fs::path d = Scratch("noseed");
  Spit(d / "c.json", R"({"dgp":{"scenario":"orthogonal","n":100}})");
  const Run r = Cli("simulate --config " + Q(d / "c.json") + " --out " + Q(d / "ds"));
  CHECK(r.code == 2);
  CHECK(r.out.find("seed") != std::string::npos);
  CHECK_FALSE(fs::exists(d / "ds" / "items.jsonl"));
}

TEST_CASE("usage errors exit 2") {
  CHECK(Cli("simulate --bogus").code == 2);
  CHECK(Cli("frobnicate").code == 2);
  CHECK(Cli("deconfound --data x --out y --method lasso").code == 2);
}

TEST_CASE("a missing data directory exits 3") {
  const fs::path d = Scratch("missing");
  const Run r = Cli("train --data " + Q(d / "nope") + " --out " + Q(d / "m.json"));
  CHECK(r.code == 3);
  CHECK(r.out.find("nope") != std::string::npos);
  CHECK(Cli("ingest --input " + Q(d / "absent.csv") + " --mapping '{\"embedding\":[\"e\"],\"outcome\":\"y\"}' --out " +
            Q(d / "ds"))
            .code == 3);
}

TEST_CASE("a rank-deficient confounder design exits 4") {
  const fs::path d = Scratch("rank");
  Spit(d / "in.csv", "e0,y,c\n0.1,1,5\n0.2,0,5\n0.3,2,5\n0.4,1,5\n");
  Spit(d / "map.json", R"({"embedding":["e0"],"outcome":"y","confounders":["c"]})");
  REQUIRE(Cli("ingest --input " + Q(d / "in.csv") + " --format csv --mapping " +
              Q(d / "map.json") + " --out " + Q(d / "ds"))
              .code == 0);
  const Run r = Cli("deconfound --data " + Q(d / "ds") + " --out " + Q(d / "f.json") +
                    " --method ols --confounder c");
  CHECK(r.code == 4);
  CHECK_FALSE(fs::exists(d / "f.json"));
}

TEST_CASE("invalid datasets are reported one violation per line") {
  const fs::path d = Scratch("invalid");
  fs::create_directories(d / "ds");
  Spit(d / "ds" / "items.jsonl",
       "{\"id\":\"a\",\"embedding\":[1],\"outcome\":1,\"split\":\"train\"}\n"
       "{\"id\":\"b\",\"embedding\":[1,2],\"outcome\":1,\"split\":\"train\"}\n");
  const Run r = Cli("validate --data " + Q(d / "ds"));
  CHECK(r.code == 2);
  CHECK(r.out.find("'b'") != std::string::npos);
}

TEST_CASE("simulate is deterministic and thread-count independent") {
  const fs::path d = Scratch("determinism");
  Spit(d / "c.json", R"({"dgp":{"scenario":"temporal","n":800,"seed":11}})");
  REQUIRE(Cli("simulate --threads 1 --config " + Q(d / "c.json") + " --out " + Q(d / "a")).code == 0);
  REQUIRE(Cli("simulate --threads 4 --config " + Q(d / "c.json") + " --out " + Q(d / "b")).code == 0);
  CHECK(Slurp(d / "a" / "items.jsonl") == Slurp(d / "b" / "items.jsonl"));
  CHECK(Slurp(d / "a" / "pairs.jsonl") == Slurp(d / "b" / "pairs.jsonl"));
}

TEST_CASE("self-instrumented IV reproduces OLS on the command line") {
  const fs::path d = Scratch("selfiv");
  Spit(d / "c.json", R"({"dgp":{"scenario":"entangled","n":1500,"seed":2}})");
  REQUIRE(Cli("simulate --config " + Q(d / "c.json") + " --out " + Q(d / "ds")).code == 0);
  const Run ols = Cli("deconfound --data " + Q(d / "ds") + " --out " + Q(d / "ols.json") +
                      " --method ols");
  const Run iv = Cli("deconfound --data " + Q(d / "ds") + " --out " + Q(d / "iv.json") +
                     " --method iv --instruments popularity");
  REQUIRE(ols.code == 0);
  REQUIRE(iv.code == 0);
  auto alpha = [](const std::string& text) {
    const std::size_t at = text.find("\"popularity\":");
    return std::stod(text.substr(at + 13));
  };
  CHECK(std::abs(alpha(Slurp(d / "ols.json")) - alpha(Slurp(d / "iv.json"))) < 1e-10);
}

TEST_CASE("sweep with a 13-point grid writes 13 CSV rows and a plot file") {
  const fs::path d = Scratch("sweep");
  Spit(d / "c.json", R"({"dgp":{"scenario":"temporal","n":600,"seed":4}})");
  const Run r = Cli("sweep --config " + Q(d / "c.json") + " --grid 'logspace(-3,3,13)' --out " +
                    Q(d / "rep"));
  REQUIRE(r.code == 0);
  const std::string csv = Slurp(d / "rep" / "temporal_sweep_4.csv");
  CHECK(Lines(csv) == 14);
  CHECK(fs::exists(d / "rep" / "temporal_sweep_4.json"));
  CHECK(fs::exists(d / "rep" / "temporal_sweep-plot_4.csv"));
}

TEST_CASE("scenario and weekday write their named reports") {
  const fs::path d = Scratch("reports");
  Spit(d / "c.json", R"({"dgp":{"scenario":"entangled","n":400,"seed":1}})");
  REQUIRE(Cli("scenario --config " + Q(d / "c.json") + " --seeds 1-2 --out " + Q(d / "rep")).code == 0);
  CHECK(fs::exists(d / "rep" / "entangled_arms_1-2.csv"));
  CHECK(fs::exists(d / "rep" / "entangled_arms_1-2.json"));
  Spit(d / "w.json", R"({"dgp":{"scenario":"weekday_marker","n":150,"seed":1}})");
  REQUIRE(Cli("weekday --config " + Q(d / "w.json") + " --seeds 3,4 --skew 0.6 --out " +
              Q(d / "rep"))
              .code == 0);
  CHECK(fs::exists(d / "rep" / "weekday_marker_study_3-4.json"));
}

TEST_CASE("help lists defaults") {
  const Run r = Cli("deconfound --help");
  CHECK(r.code == 0);
  CHECK(r.out.find("[popularity]") != std::string::npos);
  CHECK(r.out.find("[5]") != std::string::npos);
  CHECK(Cli("sweep --help").out.find("logspace(-5,1,15)") != std::string::npos);
}

// simulate -> deconfound -> train on residualized outcomes -> eval.
std::string Pipeline(const fs::path& d, int threads) {
  const std::string t = " --threads " + std::to_string(threads);
  const fs::path c = d / "c.json";
  Spit(c, R"({"dgp":{"scenario":"entangled","n":2000,"seed":7}})");
  REQUIRE(Cli("simulate" + t + " --config " + Q(c) + " --out " + Q(d / "ds")).code == 0);
  REQUIRE(Cli("deconfound" + t + " --data " + Q(d / "ds") + " --out " + Q(d / "fit.json") +
              " --residualized " + Q(d / "res"))
              .code == 0);
  REQUIRE(Cli("train" + t + " --data " + Q(d / "res") + " --out " + Q(d / "m.json")).code == 0);
  REQUIRE(Cli("eval" + t + " --config " + Q(c) + " --data " + Q(d / "ds") + " --model " +
              Q(d / "m.json") + " --out " + Q(d / "rep"))
              .code == 0);
  return Slurp(d / "fit.json") + Slurp(d / "m.json") + Slurp(d / "rep" / "entangled_eval_7.json");
}

TEST_CASE("entangled pipeline: golden checksum, identical across thread counts") {
  const std::string one = Pipeline(Scratch("pipe1"), 1);
  const std::string four = Pipeline(Scratch("pipe4"), 4);
  CHECK(one == four);
  CHECK(Fnv1a(one) == 381261509961725472ULL);
}

}  // namespace
