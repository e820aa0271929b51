// Copyright 2026 The sonarleaf Authors. All Rights Reserved.
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


#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "sonarleaf/dataio.hpp"
#include "temp_dir.hpp"

namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "sonarleaf");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = sonarleaf::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Small enough for a full gen/train/eval cycle in a few seconds.
constexpr const char* kTinyConfig = R"([model]
num_filters=4
kernel_width=201
encoder_channels=4,4
attn_dim=4
meta_hidden=4
clip_seconds=0.25
[data]
clips_per_cell=7
gen_seed=11
[train]
epochs=2
batch_size=8
seeds=5,6
)";

// Generates the tiny dataset once per fixture.
struct Workspace {
  TempDir dir;
  std::string config;
  std::string data;
  Workspace() {
    dir.write("tiny.ini", kTinyConfig);
    config = (dir / "tiny.ini").string();
    data = (dir / "data").string();
    const auto r = invoke({"gen", "-c", config, "--out", data, "--threads", "1"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
};

}  // namespace

TEST_CASE("help and usage errors") {
  auto help = invoke({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("train") != std::string::npos);

  auto none = invoke({});
  CHECK(none.code == sonarleaf::cli::kExitConfig);
  CHECK(none.err.rfind("error[config]: ", 0) == 0);

  auto unknown = invoke({"train", "--out", "x", "--bogus"});
  CHECK(unknown.code == sonarleaf::cli::kExitConfig);

  auto missing_out = invoke({"train"});
  CHECK(missing_out.code == sonarleaf::cli::kExitConfig);
}

TEST_CASE("configuration errors map to exit code 2 with one line") {
  TempDir dir;
  auto bad_set = invoke({"train", "--out", (dir / "r").string(), "--set", "epochs=3"});
  CHECK(bad_set.code == sonarleaf::cli::kExitConfig);
  CHECK(bad_set.err.find("section.key=value") != std::string::npos);

  auto bad_pool = invoke({"train", "--out", (dir / "r").string(), "--pooling", "mean"});
  CHECK(bad_pool.code == sonarleaf::cli::kExitConfig);
  CHECK(lines(bad_pool.err).size() == 1);

  auto bad_key = invoke({"train", "--out", (dir / "r").string(), "--set", "train.epoch=3"});
  CHECK(bad_key.code == sonarleaf::cli::kExitConfig);

  auto no_config = invoke({"gen", "-c", (dir / "absent.ini").string()});
  CHECK(no_config.code == sonarleaf::cli::kExitConfig);
}

TEST_CASE("data errors map to exit code 3") {
  TempDir dir;
  auto r = invoke({"train", "--out", (dir / "r").string(), "--data-dir", (dir / "none").string()});
  CHECK(r.code == sonarleaf::cli::kExitData);
  CHECK(r.err.rfind("error[io]: ", 0) == 0);

  dir.write("data/manifest.csv", std::string(sonarleaf::kManifestHeader) + "\n");
  auto empty = invoke({"train", "--out", (dir / "r").string(), "--data-dir",
                       (dir / "data").string()});
  CHECK(empty.code == sonarleaf::cli::kExitData);

  auto ckpt = invoke({"eval", "--checkpoint", (dir / "missing.ckpt").string()});
  CHECK(ckpt.code == sonarleaf::cli::kExitData);
}

TEST_CASE("gen, train, eval and analyze produce their artifacts") {
  Workspace ws;
  CHECK(fs::exists(fs::path(ws.data) / "manifest.csv"));
  CHECK(fs::exists(fs::path(ws.data) / "run_config.ini"));
  // 5 classes x 3 scenarios x 7 clips, split 5/1/1 per cell.
  CHECK(lines(slurp(fs::path(ws.data) / "manifest.csv")).size() == 106);

  const auto run_dir = ws.dir / "run";
  auto tr = invoke({"train", "-c", ws.config, "--data-dir", ws.data, "--out", run_dir.string(),
                    "--threads", "1"});
  REQUIRE_MESSAGE(tr.code == 0, tr.err);
  for (const char* f : {"model.ckpt", "last.ckpt", "history.csv", "run_config.ini"}) {
    CHECK_MESSAGE(fs::exists(run_dir / f), f);
  }
  const auto hist = lines(slurp(run_dir / "history.csv"));
  REQUIRE(hist.size() == 4);
  CHECK(hist[0].rfind("# train_rows=", 0) == 0);
  CHECK(hist[0].find("seed=5") != std::string::npos);
  CHECK(hist[1] == "epoch,train_loss,val_accuracy,val_accuracy_S1,val_accuracy_S2,val_accuracy_S3");
  CHECK(hist[2].rfind("1,", 0) == 0);

  auto ev = invoke({"eval", "-c", ws.config, "--data-dir", ws.data, "--checkpoint",
                    (run_dir / "model.ckpt").string()});
  REQUIRE_MESSAGE(ev.code == 0, ev.err);
  const auto j = nlohmann::json::parse(slurp(run_dir / "metrics.json"));
  for (const char* k : {"accuracy", "per_class", "confusion", "per_scenario"}) {
    CHECK_MESSAGE(j.contains(k), k);
  }
  CHECK(j["per_class"].size() == 5);
  CHECK(j["per_scenario"].size() == 3);
  CHECK(j["total"].get<int>() == 15);
  CHECK(j["accuracy"].get<double>() >= 0.0);
  CHECK(j["accuracy"].get<double>() <= 1.0);

  // The snapshot is itself a valid config file.
  auto replay = invoke({"eval", "-c", (run_dir / "run_config.ini").string(), "--checkpoint",
                        (run_dir / "model.ckpt").string(), "--out", (ws.dir / "replay").string()});
  REQUIRE_MESSAGE(replay.code == 0, replay.err);
  CHECK(slurp(ws.dir / "replay" / "metrics.json").find("\"accuracy\"") != std::string::npos);

  auto mismatch = invoke({"eval", "-c", ws.config, "--data-dir", ws.data, "--checkpoint",
                          (run_dir / "model.ckpt").string(), "--pooling", "max"});
  CHECK(mismatch.code == sonarleaf::cli::kExitConfig);
  CHECK(mismatch.err.find("pooling") != std::string::npos);

  const auto ana_dir = ws.dir / "analysis";
  auto an = invoke({"analyze", "-c", ws.config, "--data-dir", ws.data, "--checkpoint",
                    (run_dir / "model.ckpt").string(), "--out", ana_dir.string()});
  REQUIRE_MESSAGE(an.code == 0, an.err);
  for (const char* s : {"S1", "S2", "S3"}) {
    CHECK(fs::exists(ana_dir / (std::string("delta_curve_") + s + ".csv")));
    CHECK(fs::exists(ana_dir / (std::string("delta_spectrogram_") + s + ".csv")));
  }
  const auto summary = lines(slurp(ana_dir / "summary.csv"));
  REQUIRE(summary.size() == 4);
  CHECK(summary[0] == "scenario,clips,tug_clips,background_clips,active_filters,threshold");
  CHECK(summary[1].rfind("S1,5,1,1,", 0) == 0);
}

TEST_CASE("scenario filter restricts training and evaluation rows") {
  Workspace ws;
  const auto run_dir = ws.dir / "s1";
  auto tr = invoke({"train", "-c", ws.config, "--data-dir", ws.data, "--out", run_dir.string(),
                    "--scenarios", "S1", "--epochs", "1"});
  REQUIRE_MESSAGE(tr.code == 0, tr.err);
  const auto hist = lines(slurp(run_dir / "history.csv"));
  CHECK(hist[0].rfind("# train_rows=25 val_rows=5 ", 0) == 0);
  CHECK(hist.size() == 3);
  CHECK(hist[2].back() == ',');  // S3 column empty

  auto ev = invoke({"eval", "-c", ws.config, "--data-dir", ws.data, "--checkpoint",
                    (run_dir / "model.ckpt").string(), "--scenarios", "S1"});
  REQUIRE_MESSAGE(ev.code == 0, ev.err);
  const auto j = nlohmann::json::parse(slurp(run_dir / "metrics.json"));
  CHECK(j["total"].get<int>() == 5);
  CHECK(j["per_scenario"].size() == 1);
}

TEST_CASE("single-thread training is reproducible bit for bit") {
  Workspace ws;
  const auto a = ws.dir / "a";
  const auto b = ws.dir / "b";
  for (const auto& d : {a, b}) {
    auto r = invoke({"train", "-c", ws.config, "--data-dir", ws.data, "--out", d.string(),
                     "--threads", "1"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
  CHECK(slurp(a / "history.csv") == slurp(b / "history.csv"));
  CHECK(slurp(a / "model.ckpt") == slurp(b / "model.ckpt"));
  CHECK(slurp(a / "last.ckpt") == slurp(b / "last.ckpt"));
}

TEST_CASE("ablate writes four rows per subset") {
  Workspace ws;
  const auto out = ws.dir / "abl";
  auto r = invoke({"ablate", "-c", ws.config, "--data-dir", ws.data, "--out", out.string(),
                   "--epochs", "1", "--subsets", "S1;S1,S2,S3"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto table = lines(slurp(out / "ablation.csv"));
  REQUIRE(table.size() == 9);
  CHECK(table[0] == "subset,pooling,use_ctdsv,seeds,median_accuracy,accuracies");
  CHECK(table[1].rfind("\"S1\",attention,true,2,", 0) == 0);
  CHECK(table[4].rfind("\"S1\",max,false,2,", 0) == 0);
  CHECK(table[5].rfind("\"S1,S2,S3\",attention,true,2,", 0) == 0);
  const auto runs = lines(slurp(out / "runs.csv"));
  CHECK(runs.size() == 1 + 2 * 4 * 2);
}
