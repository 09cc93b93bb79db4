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

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pkit/audio_io.hpp"
#include "pkit/keyring.hpp"
#include "pkit/learner.hpp"

namespace pkit {

enum class ExperimentKind {
  kClean,
  kPositional,
  kFullBlur,
  kMixedKeys,
  kAttackKnownNoise,
  kAttackRandomBlur,
  kPollutedTest,
};

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& text);

/// Everything needed to reproduce one run. Serialized as a flat TOML-style
/// file (see parse_spec); a run directory stores the resolved copy.
struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::kClean;
  ModelKind model = ModelKind::kConv;

  // Dataset: a directory with train/manifest.json and test/manifest.json,
  // or synthetic data when empty.
  std::string dataset_dir;
  SynthConfig synth;

  // class_count is taken from the data; min_len 0 means "shortest clip".
  ProtectionConfig protection;
  std::optional<uint64_t> key_seed;
  std::string master_key_hex;
  std::string keyring;  // path to an existing keyring file
  bool store_key = true;

  TrainConfig train;

  double attack_amplitude = 0.0;  // required for attack_known_noise
  uint64_t attack_seed = 0;

  void validate() const;
};

/// Parses `key = value` lines; `[section]` headers prefix keys with
/// "section.". `#` starts a comment. Unknown keys are errors.
ExperimentSpec parse_spec(const std::string& text);
ExperimentSpec load_spec(const std::filesystem::path& path);
/// Applies one `key=value` override with the same key names as the file.
void apply_override(ExperimentSpec& spec, const std::string& assignment);
std::string format_spec(const ExperimentSpec& spec);

struct ExperimentResult {
  std::string summary_json;
  double clean_test_acc = 0.0;
  std::optional<double> poisoned_test_acc;  // identically protected test set
  std::optional<double> mixed_key_test_acc;
  std::optional<double> attacked_test_acc;
  double frechet_mfcc = 0.0;
  double snr_median = 0.0;
};

/// Runs data -> keyring -> protect -> train -> evaluate -> quality and writes
/// every artifact under run_dir. Stage failures are rethrown prefixed with
/// the stage name.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::filesystem::path& run_dir);

struct MetricRow {
  std::string metric;
  std::optional<double> a;
  std::optional<double> b;
  bool differs() const { return a != b; }
  std::optional<double> delta() const {
    if (a && b) return *b - *a;
    return std::nullopt;
  }
};

struct RunComparison {
  std::vector<MetricRow> rows;  // every numeric summary field outside "config"
  std::vector<std::string> config_mismatches;

  std::vector<MetricRow> differences() const;
  bool identical() const { return differences().empty() && config_mismatches.empty(); }
  std::string table(bool all_rows = false) const;
};

RunComparison compare_runs(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b);

}  // namespace pkit
