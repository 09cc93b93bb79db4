// Copyright (c) 2026 The pkit Authors. All Rights Reserved.
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

// pkit command-line front end.

#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "pkit/audio_io.hpp"
#include "pkit/blur.hpp"
#include "pkit/features.hpp"
#include "pkit/keyring.hpp"
#include "pkit/learner.hpp"
#include "pkit/pipeline.hpp"
#include "pkit/quality.hpp"

namespace fs = std::filesystem;
using namespace pkit;

namespace {

void write_protected(const ProtectedDataset& out, const fs::path& dir) {
  Dataset data = out.data;
  save_dataset(data, dir);
  if (!out.log.empty()) write_protection_log(out.log, dir / "protection_log.jsonl");
  std::cout << "wrote " << data.clips.size() << " clips to " << dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pkit: keyed positional blurs for unlearnable audio datasets"};
  app.require_subcommand(1);

  // synth
  SynthConfig synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a tone+noise dataset (train/ and test/ splits)");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--classes", synth.class_count, "Class count")->capture_default_str();
  synth_cmd->add_option("--per-class", synth.per_class, "Clips per class")->capture_default_str();
  synth_cmd->add_option("--duration", synth.duration, "Seconds per clip")->capture_default_str();
  synth_cmd->add_option("--rate", synth.sample_rate, "Sample rate (Hz)")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Seed")->capture_default_str();
  synth_cmd->add_option("--patch-len", synth.patch_len, "Patch length the clips must hold")->capture_default_str();

  // keygen
  ProtectionConfig key_cfg;
  std::string key_out, key_mode = "positional";
  std::optional<uint64_t> key_seed;
  auto* keygen_cmd = app.add_subcommand("keygen", "Create a keyring (master key + protection config)");
  keygen_cmd->add_option("--out", key_out, "Keyring file")->required();
  keygen_cmd->add_option("--classes", key_cfg.class_count, "Class count")->required();
  keygen_cmd->add_option("--min-len", key_cfg.min_len, "Shortest clip length in samples")->capture_default_str();
  keygen_cmd->add_option("--k", key_cfg.k, "Filter length")->capture_default_str();
  keygen_cmd->add_option("--p", key_cfg.p, "Patch length")->capture_default_str();
  keygen_cmd->add_option("--b", key_cfg.b, "Blur factor")->capture_default_str();
  keygen_cmd->add_option("--mode", key_mode, "positional|full")->capture_default_str();
  keygen_cmd->add_flag("--normalize-taps", key_cfg.normalize_taps, "Rescale taps to sum 1");
  keygen_cmd->add_option("--seed", key_seed, "Derive the master key from a seed (reproducible, not secret)");

  // protect
  std::string prot_manifest, prot_keyring, prot_mode, prot_out;
  bool pollute_test = false;
  auto* protect_cmd = app.add_subcommand("protect", "Apply the keyed blur to a dataset split");
  protect_cmd->add_option("--manifest", prot_manifest, "Input manifest.json")->required();
  protect_cmd->add_option("--keyring", prot_keyring, "Keyring file")->required();
  protect_cmd->add_option("--mode", prot_mode, "positional|full (default: keyring mode)");
  protect_cmd->add_option("--out", prot_out, "Output directory")->required();
  protect_cmd->add_flag("--pollute-test", pollute_test, "Also blur a test split");

  // train
  std::string train_manifest, train_model = "conv", train_out, train_history;
  TrainConfig train_cfg;
  auto* train_cmd = app.add_subcommand("train", "Train a toy classifier");
  train_cmd->add_option("--manifest", train_manifest, "Training manifest.json")->required();
  train_cmd->add_option("--model", train_model, "conv|mlp")->capture_default_str();
  train_cmd->add_option("--out", train_out, "Checkpoint path")->required();
  train_cmd->add_option("--history", train_history, "History CSV path");
  train_cmd->add_option("--epochs", train_cfg.epochs)->capture_default_str();
  train_cmd->add_option("--batch-size", train_cfg.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", train_cfg.learning_rate)->capture_default_str();
  train_cmd->add_option("--seed", train_cfg.seed)->capture_default_str();

  // evaluate
  std::string eval_manifest, eval_model;
  auto* eval_cmd = app.add_subcommand("evaluate", "Accuracy and confusion matrix of a checkpoint");
  eval_cmd->add_option("--manifest", eval_manifest, "Test manifest.json")->required();
  eval_cmd->add_option("--model", eval_model, "Checkpoint path")->required();

  // quality
  std::string q_clean, q_protected, q_log, q_out;
  auto* quality_cmd = app.add_subcommand("quality", "SNR and Frechet-MFCC distance between two datasets");
  quality_cmd->add_option("--clean", q_clean, "Clean manifest.json")->required();
  quality_cmd->add_option("--protected", q_protected, "Protected manifest.json")->required();
  quality_cmd->add_option("--log", q_log, "Protection log (default: next to the protected manifest)");
  quality_cmd->add_option("--out", q_out, "Write the JSON report here");

  // attack
  std::string atk_kind, atk_manifest, atk_keyring, atk_out;
  double atk_amplitude = 0.0;
  uint64_t atk_seed = 0;
  uint32_t atk_shift = 1;
  ProtectionConfig atk_cfg;
  auto* attack_cmd = app.add_subcommand("attack", "Build mixed-key or attacked evaluation sets");
  attack_cmd->add_option("--kind", atk_kind, "mixed|known-noise|random-blur")
      ->required()
      ->check(CLI::IsMember({"mixed", "known-noise", "random-blur"}));
  attack_cmd->add_option("--manifest", atk_manifest, "Input manifest.json")->required();
  attack_cmd->add_option("--out", atk_out, "Output directory")->required();
  attack_cmd->add_option("--keyring", atk_keyring, "Keyring (mixed, known-noise; optional for random-blur)");
  attack_cmd->add_option("--amplitude", atk_amplitude, "Noise amplitude (known-noise)");
  attack_cmd->add_option("--seed", atk_seed, "Attack seed")->capture_default_str();
  attack_cmd->add_option("--shift", atk_shift, "Cyclic class shift (mixed)")->capture_default_str();
  attack_cmd->add_option("--k", atk_cfg.k, "Filter length (random-blur without keyring)");
  attack_cmd->add_option("--p", atk_cfg.p, "Patch length (random-blur without keyring)");
  attack_cmd->add_option("--b", atk_cfg.b, "Blur factor (random-blur without keyring)");
  attack_cmd->add_option("--min-len", atk_cfg.min_len, "Position range limit (random-blur without keyring)");

  // run
  std::string run_spec, run_out;
  std::vector<std::string> run_sets;
  bool no_store_key = false;
  auto* run_cmd = app.add_subcommand("run", "Run a full experiment into a run directory");
  run_cmd->add_option("--spec", run_spec, "Experiment spec file (TOML-style)");
  run_cmd->add_option("--out", run_out, "Run directory")->required();
  run_cmd->add_option("--set", run_sets, "Override key=value (repeatable; beats the spec file)");
  run_cmd->add_flag("--no-store-key", no_store_key, "Do not write the keyring into the run directory");

  // compare
  std::string cmp_a, cmp_b;
  bool cmp_all = false;
  auto* compare_cmd = app.add_subcommand("compare", "Diff two run summaries");
  compare_cmd->add_option("run_a", cmp_a)->required();
  compare_cmd->add_option("run_b", cmp_b)->required();
  compare_cmd->add_flag("--all", cmp_all, "Show every metric, not only differences");

  // features
  std::string feat_wav, feat_out;
  auto* features_cmd = app.add_subcommand("features", "Dump the MFCC matrix of one WAV file");
  features_cmd->add_option("--wav", feat_wav)->required();
  features_cmd->add_option("--out", feat_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      auto [train, test] = synth_dataset(synth);
      save_dataset(train, fs::path(synth_out) / "train");
      save_dataset(test, fs::path(synth_out) / "test");
      std::cout << "wrote " << train.clips.size() << " train and " << test.clips.size() << " test clips to "
                << synth_out << "\n";
    } else if (*keygen_cmd) {
      Keyring kr;
      kr.cfg = key_cfg;
      kr.cfg.mode = parse_blur_mode(key_mode);
      kr.master = key_seed ? MasterKey::from_seed(*key_seed) : MasterKey::generate();
      if (kr.cfg.bin_width() == 0) throw Error("min_len too small for class count");
      export_keyring(kr, key_out);
      std::cout << "wrote keyring " << key_out << " (keep it private; it holds the master key)\n";
    } else if (*protect_cmd) {
      const Keyring kr = import_keyring(prot_keyring);
      const BlurMode mode = prot_mode.empty() ? kr.cfg.mode : parse_blur_mode(prot_mode);
      const Dataset ds = load_dataset(prot_manifest);
      if (ds.manifest.split == Split::kTest && !pollute_test) {
        std::cerr << "note: test split copied unmodified (use --pollute-test to blur it)\n";
      }
      write_protected(protect_dataset(ds, kr, mode, pollute_test), prot_out);
    } else if (*train_cmd) {
      const Dataset ds = load_dataset(train_manifest);
      TrainResult r = train(parse_model_kind(train_model), ds, train_cfg);
      save_checkpoint(r.model, train_out);
      if (!train_history.empty()) write_history_csv(r.history, train_history);
      std::cout << "final epoch: loss " << r.history.back().loss << ", train acc " << r.history.back().accuracy
                << "\n";
    } else if (*eval_cmd) {
      const Model model = load_checkpoint(eval_model);
      const Evaluation ev = evaluate(model, load_dataset(eval_manifest));
      std::cout << "accuracy " << ev.accuracy << "\nconfusion (rows = true class):\n" << ev.confusion << "\n";
    } else if (*quality_cmd) {
      const Dataset clean = load_dataset(q_clean);
      const Dataset prot = load_dataset(q_protected);
      fs::path log_path = q_log.empty() ? fs::path(q_protected).parent_path() / "protection_log.jsonl" : fs::path(q_log);
      std::vector<BlurReport> log;
      if (fs::exists(log_path)) log = read_protection_log(log_path);
      const QualityReport report = dataset_quality_report(clean, prot, log);
      if (!q_out.empty()) write_quality_report(report, q_out);
      std::cout << quality_report_json(report) << "\n";
    } else if (*attack_cmd) {
      const Dataset ds = load_dataset(atk_manifest);
      if (atk_kind == "mixed" || atk_kind == "known-noise") {
        if (atk_keyring.empty()) throw Error("--keyring is required for --kind " + atk_kind);
        const Keyring kr = import_keyring(atk_keyring);
        if (atk_kind == "mixed") {
          write_protected(apply_mixed_keys(ds, kr, cyclic_permutation(kr.cfg.class_count, atk_shift)), atk_out);
        } else {
          if (!(atk_amplitude > 0.0)) std::cerr << "warning: --amplitude not positive\n";
          std::vector<uint32_t> positions;
          for (const auto& p : kr.protections()) positions.push_back(p.position);
          write_protected(attack_known_location_noise(ds, positions, kr.cfg.p, atk_amplitude, atk_seed), atk_out);
        }
      } else {
        ProtectionConfig cfg = atk_cfg;
        if (!atk_keyring.empty()) cfg = import_keyring(atk_keyring).cfg;
        write_protected(attack_random_blur(ds, cfg, atk_seed), atk_out);
      }
    } else if (*run_cmd) {
      ExperimentSpec spec = run_spec.empty() ? ExperimentSpec{} : load_spec(run_spec);
      for (const auto& s : run_sets) apply_override(spec, s);
      if (no_store_key) spec.store_key = false;
      const ExperimentResult r = run_experiment(spec, run_out);
      std::cout << r.summary_json;
    } else if (*compare_cmd) {
      const RunComparison cmp = compare_runs(cmp_a, cmp_b);
      std::cout << cmp.table(cmp_all);
      if (cmp.identical()) std::cout << "(no differences)\n";
    } else if (*features_cmd) {
      const AudioClip clip = read_wav(feat_wav);
      write_feature_dump(mfcc(clip, MfccConfig::for_rate(clip.sample_rate)), feat_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
