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
#include <map>
#include <string>
#include <vector>

#include "pkit/audio_io.hpp"
#include "pkit/keyring.hpp"

namespace pkit {

struct BlurReport {
  std::string clip_id;
  size_t start = 0;  // modified range [start, end)
  size_t end = 0;
  uint32_t protection_class = 0;
  double max_abs_delta = 0.0;
  double patch_snr_db = 0.0;
  size_t clamped = 0;
};

struct BlurOptions {
  bool clamp = true;  // disabling exposes the linear operator for tests
};

/// Filters samples in [start, start + len) with the given taps:
///   out[t] = sum_j taps[j] * in[t - j + k/2]
/// reading context from the unmodified input (zero outside the signal).
/// Samples outside the range are copied bit-exactly.
std::vector<double> convolve_range(std::span<const double> in, std::span<const double> taps,
                                   size_t start, size_t len, size_t* clamped = nullptr,
                                   const BlurOptions& opts = {});

/// Positional blur of the patch [prot.position, prot.position + p).
/// Requires clip.label == prot.class_id.
std::pair<AudioClip, BlurReport> blur_patch(const AudioClip& clip, const ClassProtection& prot,
                                            const BlurOptions& opts = {});

/// Baseline variant: the same filter over the whole clip.
std::pair<AudioClip, BlurReport> blur_full(const AudioClip& clip, const ClassProtection& prot,
                                           const BlurOptions& opts = {});

struct ProtectedDataset {
  Dataset data;
  std::vector<BlurReport> log;  // manifest order; empty when nothing was blurred
};

/// Blurs every clip with its class's protection (or, through
/// `class_map`, with protection class_map[label]). Test splits pass through
/// untouched unless pollute_test is set.
ProtectedDataset protect_dataset(const Dataset& dataset, const Keyring& keyring, BlurMode mode,
                                 bool pollute_test = false);

/// Blurs class c with the protection of permutation[c]. The permutation
/// must be a bijection on [0, N). Applies regardless of split.
ProtectedDataset apply_mixed_keys(const Dataset& dataset, const Keyring& keyring,
                                  const std::vector<uint32_t>& permutation);

/// Cyclic shift c -> (c + shift) mod N.
std::vector<uint32_t> cyclic_permutation(uint32_t class_count, uint32_t shift = 1);

/// Adds U(-amplitude, amplitude) noise on [positions[c], positions[c] + patch_len)
/// of each clip of class c, then clamps.
ProtectedDataset attack_known_location_noise(const Dataset& dataset,
                                             const std::vector<uint32_t>& positions,
                                             uint32_t patch_len, double amplitude, uint64_t seed);

/// Per-clip random U(0, b) filter at a per-clip random position in
/// [0, min(len, min_len) - p]; not keyed to the class.
ProtectedDataset attack_random_blur(const Dataset& dataset, const ProtectionConfig& cfg,
                                    uint64_t seed);

/// Protection log: one JSON object per line.
void write_protection_log(const std::vector<BlurReport>& log, const std::filesystem::path& path);
std::vector<BlurReport> read_protection_log(const std::filesystem::path& path);

}  // namespace pkit
