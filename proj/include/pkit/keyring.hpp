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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pkit/core.hpp"

namespace pkit {

/// 32-byte master secret. Only export_keyring ever writes it out.
struct MasterKey {
  std::array<uint8_t, 32> secret{};

  /// Fresh key from std::random_device.
  static MasterKey generate();
  /// Reproducible key for tests and pinned experiments:
  /// SHA-256("pkit/master-key" || seed as 8-byte little-endian).
  static MasterKey from_seed(uint64_t seed);
  static MasterKey from_hex(std::string_view hex);

  bool operator==(const MasterKey&) const = default;
};

enum class BlurMode { kPositional, kFullSample };

std::string to_string(BlurMode mode);
/// Accepts "positional", "full_sample" and the CLI shorthand "full".
BlurMode parse_blur_mode(const std::string& text);

struct ProtectionConfig {
  uint32_t k = 80;             // filter length
  uint32_t p = 240;            // patch length
  double b = 0.01;             // blur factor; taps ~ U(0, b)
  uint32_t class_count = 2;
  uint32_t min_len = 8000;     // shortest clip the keyring must fit
  BlurMode mode = BlurMode::kPositional;
  bool normalize_taps = false;  // rescale taps to sum 1

  void validate() const;
  /// floor((min_len - p) / class_count); each class owns one bin of this width.
  uint32_t bin_width() const;

  bool operator==(const ProtectionConfig&) const = default;
};

/// Secret material for one class. The patch is [position, position + p).
struct ClassProtection {
  uint32_t class_id = 0;
  std::vector<double> taps;
  uint32_t position = 0;
  uint32_t k = 0;
  uint32_t p = 0;
};

/// First 8 bytes (little-endian) of SHA-256(secret || class_id as u32 LE).
uint64_t derive_class_seed(const MasterKey& master, uint32_t class_id);

/// taps[j] = b * unit(), then position = class_id * w + (next_u64 mod w)
/// where w = cfg.bin_width(); all draws from splitmix64(derive_class_seed).
ClassProtection derive_protection(const MasterKey& master, uint32_t class_id,
                                  const ProtectionConfig& cfg);

/// Master key plus config; the per-class protections are derived on demand.
struct Keyring {
  MasterKey master;
  ProtectionConfig cfg;

  std::vector<ClassProtection> protections() const;
};

// On-disk format, three lines:
//   PKR1
//   {"master_hex":..., "k":..., "p":..., "b":..., "class_count":..., "min_len":..., "mode":..., "normalize_taps":...}
//   <hex SHA-256 of the JSON line>
// The file holds the raw secret; it is created with owner-only permissions.
void export_keyring(const Keyring& keyring, const std::filesystem::path& path);
Keyring import_keyring(const std::filesystem::path& path);

}  // namespace pkit
