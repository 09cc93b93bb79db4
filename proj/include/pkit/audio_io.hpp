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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pkit/core.hpp"

namespace pkit {

namespace fs = std::filesystem;

/// One mono clip. Samples live in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  uint32_t sample_rate = 0;
  uint32_t label = 0;
  std::string id;
};

enum class Split { kTrain, kTest };

std::string to_string(Split split);
Split parse_split(const std::string& text);

struct ManifestEntry {
  std::string id;
  std::string path;  // relative to the manifest's directory
  uint32_t label = 0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  uint32_t sample_rate = 0;
  uint32_t class_count = 0;
  Split split = Split::kTrain;
  // Directory holding manifest.json; not serialized.
  fs::path root;

  /// Throws if a label is out of range or an id repeats.
  void validate() const;
};

/// A manifest together with its decoded clips, in manifest order.
struct Dataset {
  DatasetManifest manifest;
  std::vector<AudioClip> clips;
};

// PCM16 codec. Reads scale by 1/32768, writes by 32767 with
// round-half-away-from-zero and clamping to the int16 range.
int16_t quantize_pcm16(double sample);
double dequantize_pcm16(int16_t value);

/// Applies the write/read quantizer pair, i.e. what a clip looks like after
/// a trip through a WAV file.
std::vector<double> pcm16_round_trip(std::span<const double> samples);

/// Parses a RIFF/WAVE PCM16 image. Multi-channel data keeps channel 0 and
/// logs a warning to stderr.
AudioClip decode_wav(std::span<const uint8_t> bytes, const std::string& id = {});
/// Canonical 44-byte-header PCM16 mono image.
std::vector<uint8_t> encode_wav(const AudioClip& clip);

AudioClip read_wav(const fs::path& path);
void write_wav(const AudioClip& clip, const fs::path& path);

/// manifest.json holds {sample_rate, class_count, split, entries:[{id, path, label}]}.
DatasetManifest load_manifest(const fs::path& path);
void save_manifest(const DatasetManifest& manifest, const fs::path& path);

/// Loads every clip of a manifest. Enforces a uniform sample rate and that
/// each clip's label matches its entry.
Dataset load_dataset(const fs::path& manifest_path);

/// Writes clips as <dir>/<id>.wav plus <dir>/manifest.json and returns the
/// written manifest (root = dir).
DatasetManifest save_dataset(const Dataset& dataset, const fs::path& dir);

struct SynthConfig {
  uint32_t class_count = 10;
  uint32_t per_class = 200;
  double duration = 1.0;  // seconds
  uint32_t sample_rate = 8000;
  uint64_t seed = 0;
  // Patch length the clips must hold; used for the minimum-length check.
  uint32_t patch_len = 240;
};

/// Minimum clip length, in samples, accepted by synth_dataset.
size_t synth_min_length(const SynthConfig& cfg);

/// Tone-plus-noise classes: class c is a sine at 200 (c+1) Hz with a random
/// phase plus Gaussian noise of standard deviation 0.05, peak-normalized to
/// 0.9. The first 80% of each class goes to train. Clips are returned already
/// quantized to PCM16 precision so in-memory and on-disk copies agree.
std::pair<Dataset, Dataset> synth_dataset(const SynthConfig& cfg);

}  // namespace pkit
