// Copyright 2026 The attr2style Authors.
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


#include "attr2style/common.hpp"
#include "attr2style/corpus.hpp"
#include "attr2style/pipeline.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>

using namespace attr2style;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kTiny = {"synth.n_source=12", "synth.n_target=12", "synth.n_test=6",
                                        "train.epochs=1",    "train.batch_size=4", "decode.max_len=12"};

fs::path fresh_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("a2s_cli_" + name);
  fs::remove_all(p);
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(ATTR2STYLE_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("exit codes of the command-line tool") {
  const auto out = fresh_dir("codes");
  CHECK(cli("synth --out " + out.string() + " bogus.key=1") == 1);
  CHECK(cli("synth --out " + out.string() + " train.epochs=abc") == 1);
  CHECK(cli("no-such-command") == 1);
  CHECK(cli("train-source --out " + out.string()) == 2);
  CHECK(cli("--help") == 0);
}

TEST_CASE("missing artifacts are named") {
  const auto out = fresh_dir("missing");
  Workspace ws(out.string(), parse_config_text("", {}));
  CHECK_THROWS_WITH_AS(cmd_train_source(ws), doctest::Contains("missing input artifact"), Error);
  CHECK_THROWS_WITH_AS(Workspace::require((out / "nope.npz").string(), "checkpoint"),
                       doctest::Contains("nope.npz"), Error);
  CHECK(run_command("compare", "", out.string(), {}) == 2);
  CHECK(run_command("synth", "", out.string(), {"unknown.key=1"}) == 1);
}

TEST_CASE("tiny end-to-end pipeline") {
  const auto out = fresh_dir("pipeline");
  for (const char* c : {"synth", "build-vocab", "train-source", "finetune-target", "train-baseline", "compare"})
    REQUIRE_MESSAGE(run_command(c, "", out.string(), kTiny) == 0, c);

  for (const char* m : {"source.jsonl", "target.jsonl", "test.jsonl", "vocab.txt", "norm_stats.json"})
    CHECK(fs::exists(out / "corpus" / m));
  for (const char* c : {"phase_a.npz", "phase_b.npz", "baseline.npz"}) CHECK(fs::exists(out / "checkpoints" / c));
  CHECK(fs::exists(out / "reports" / "history_phase_a.csv"));
  CHECK(fs::exists(out / "figures" / "confusion_phase_b.png"));

  const json cmp = json::parse(read_file((out / "reports" / "compare.json").string()));
  const auto& acc = cmp.at("accuracy_micro");
  CHECK(acc.at("difference").get<double>() ==
        doctest::Approx(acc.at("transfer").get<double>() - acc.at("baseline").get<double>()));
  CHECK(cmp.at("transfer").at("n_test") == 6);
  CHECK(cmp.at("baseline").at("confusion").size() == 6);

  const json resolved = json::parse(read_file((out / "resolved_config.json").string()));
  CHECK(resolved["synth"]["n_source"] == 12);
  CHECK(resolved["train"]["epochs"] == 1);

  CommandOptions opts;
  opts.checkpoint = "baseline";
  opts.limit = 2;
  CHECK(run_command("caption", "", out.string(), kTiny, opts) == 0);
  const auto lines = read_file((out / "reports" / "captions_baseline.jsonl").string());
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 6);
  const json first = json::parse(lines.substr(0, lines.find('\n')));
  for (const char* k : {"image", "caption", "log_prob", "style"}) CHECK(first.contains(k));

  CHECK(run_command("attention-maps", "", out.string(), kTiny, opts) == 0);
  int dirs = 0;
  for (const auto& e : fs::directory_iterator(out / "figures" / "attention")) {
    ++dirs;
    CHECK(fs::exists(e.path() / "composite.png"));
  }
  CHECK(dirs == 2);

  // Re-running synth from the resolved snapshot reproduces the corpus.
  const auto again = fresh_dir("pipeline_again");
  const auto snapshot = (out / "resolved_config.json").string();
  REQUIRE(run_command("synth", snapshot, again.string(), {}) == 0);
  CHECK(read_file((out / "corpus" / "test.jsonl").string()) == read_file((again / "corpus" / "test.jsonl").string()));
  CHECK(read_file((out / "corpus" / "source.jsonl").string()) ==
        read_file((again / "corpus" / "source.jsonl").string()));
}
