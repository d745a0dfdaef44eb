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


// attr2style <command> --config <path> [--out <dir>] [key=value ...]

#include "attr2style/pipeline.hpp"

#include <CLI11.hpp>

#include <string>
#include <vector>

int main(int argc, char** argv) {
  CLI::App app{"Attribute-to-style caption transfer toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  attr2style::CommandOptions opts;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "generate the synthetic source/target/test corpus"},
      {"build-vocab", "build the shared vocabulary from the training manifests"},
      {"train-source", "phase A: train on attribute captions"},
      {"finetune-target", "phase B: fine-tune on style captions from the phase A encoder"},
      {"train-baseline", "train on style captions without transfer"},
      {"caption", "caption a manifest of images (JSON Lines)"},
      {"evaluate", "style accuracy, precision/recall and BLEU for one checkpoint"},
      {"compare", "evaluate phase B and baseline side by side"},
      {"attention-maps", "per-word attention overlays"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config file (omit for defaults)");
    sub->add_option("--out", out_dir, "output root")->capture_default_str();
    if (name == "caption" || name == "evaluate" || name == "attention-maps") {
      sub->add_option("--checkpoint", opts.checkpoint, "checkpoint path or name under <out>/checkpoints (default phase_b)");
      sub->add_option("--manifest", opts.manifest, "records to process (default: test manifest)");
    }
    if (name == "attention-maps") sub->add_option("--limit", opts.limit, "images to render")->capture_default_str();
    sub->add_option("overrides", overrides, "key=value config overrides");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  return attr2style::run_command(command, config_path, out_dir, overrides, opts);
}
