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

#include "pkit/keyring.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace pkit {

MasterKey MasterKey::generate() {
  std::random_device rd;
  MasterKey key;
  for (size_t i = 0; i < key.secret.size(); i += 4) {
    uint32_t word = rd();
    for (size_t j = 0; j < 4; ++j) key.secret[i + j] = static_cast<uint8_t>(word >> (8 * j));
  }
  return key;
}

MasterKey MasterKey::from_seed(uint64_t seed) {
  std::string msg = "pkit/master-key";
  for (int i = 0; i < 8; ++i) msg.push_back(static_cast<char>(seed >> (8 * i)));
  MasterKey key;
  key.secret = sha256(msg);
  return key;
}

MasterKey MasterKey::from_hex(std::string_view hex) {
  auto bytes = pkit::from_hex(hex);
  if (bytes.size() != 32) throw Error("master key must be 32 bytes (64 hex digits)");
  MasterKey key;
  std::copy(bytes.begin(), bytes.end(), key.secret.begin());
  return key;
}

std::string to_string(BlurMode mode) {
  return mode == BlurMode::kPositional ? "positional" : "full_sample";
}

BlurMode parse_blur_mode(const std::string& text) {
  if (text == "positional") return BlurMode::kPositional;
  if (text == "full_sample" || text == "full") return BlurMode::kFullSample;
  throw Error("unknown blur mode '" + text + "'");
}

void ProtectionConfig::validate() const {
  if (k < 1) throw Error("protection config: k must be >= 1");
  if (p < k) throw Error("protection config: p must be >= k");
  if (!(b > 0.0)) throw Error("protection config: b must be > 0");
  if (class_count < 2) throw Error("protection config: class_count must be >= 2");
  if (min_len < p + class_count) throw Error("protection config: min_len must be >= p + class_count");
}

uint32_t ProtectionConfig::bin_width() const { return (min_len - p) / class_count; }

uint64_t derive_class_seed(const MasterKey& master, uint32_t class_id) {
  std::array<uint8_t, 36> msg{};
  std::copy(master.secret.begin(), master.secret.end(), msg.begin());
  for (int i = 0; i < 4; ++i) msg[32 + i] = static_cast<uint8_t>(class_id >> (8 * i));
  Sha256Digest d = sha256(msg);
  uint64_t seed = 0;
  for (int i = 7; i >= 0; --i) seed = seed << 8 | d[i];
  return seed;
}

ClassProtection derive_protection(const MasterKey& master, uint32_t class_id,
                                  const ProtectionConfig& cfg) {
  cfg.validate();
  if (class_id >= cfg.class_count) throw Error("class id out of range");
  const uint32_t width = cfg.bin_width();
  if (width == 0) throw Error("protection config: min_len too small for class_count position bins");

  SplitMix64 rng(derive_class_seed(master, class_id));
  ClassProtection prot;
  prot.class_id = class_id;
  prot.k = cfg.k;
  prot.p = cfg.p;
  prot.taps.resize(cfg.k);
  for (double& tap : prot.taps) tap = cfg.b * rng.next_unit();
  prot.position = class_id * width + static_cast<uint32_t>(rng.below(width));

  if (cfg.normalize_taps) {
    double sum = 0.0;
    for (double tap : prot.taps) sum += tap;
    if (sum > 0.0) {
      for (double& tap : prot.taps) tap /= sum;
    }
  }
  return prot;
}

std::vector<ClassProtection> Keyring::protections() const {
  std::vector<ClassProtection> out;
  out.reserve(cfg.class_count);
  for (uint32_t c = 0; c < cfg.class_count; ++c) out.push_back(derive_protection(master, c, cfg));
  return out;
}

namespace {

constexpr std::string_view kMagicPrefix = "PKR";
constexpr std::string_view kMagic = "PKR1";

}  // namespace

void export_keyring(const Keyring& keyring, const std::filesystem::path& path) {
  keyring.cfg.validate();
  nlohmann::ordered_json body;
  body["master_hex"] = to_hex(keyring.master.secret);
  body["k"] = keyring.cfg.k;
  body["p"] = keyring.cfg.p;
  body["b"] = keyring.cfg.b;
  body["class_count"] = keyring.cfg.class_count;
  body["min_len"] = keyring.cfg.min_len;
  body["mode"] = to_string(keyring.cfg.mode);
  body["normalize_taps"] = keyring.cfg.normalize_taps;
  const std::string text = body.dump();

  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write keyring " + path.string());
    out << kMagic << '\n' << text << '\n' << to_hex(sha256(text)) << '\n';
    if (!out) throw Error("write failed: " + path.string());
  }
  std::error_code ec;
  std::filesystem::permissions(path,
                               std::filesystem::perms::owner_read | std::filesystem::perms::owner_write,
                               std::filesystem::perm_options::replace, ec);
}

Keyring import_keyring(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open keyring " + path.string());
  std::string magic, text, checksum;
  std::getline(in, magic);
  if (magic.rfind(kMagicPrefix, 0) != 0) throw Error("keyring " + path.string() + ": corrupt file (bad magic)");
  if (magic != kMagic) throw Error("keyring " + path.string() + ": version mismatch (" + magic + ")");
  if (!std::getline(in, text) || !std::getline(in, checksum)) {
    throw Error("keyring " + path.string() + ": corrupt file (truncated)");
  }
  if (to_hex(sha256(text)) != checksum) throw Error("keyring " + path.string() + ": checksum mismatch");

  try {
    auto body = nlohmann::json::parse(text);
    Keyring kr;
    kr.master = MasterKey::from_hex(body.at("master_hex").get<std::string>());
    kr.cfg.k = body.at("k").get<uint32_t>();
    kr.cfg.p = body.at("p").get<uint32_t>();
    kr.cfg.b = body.at("b").get<double>();
    kr.cfg.class_count = body.at("class_count").get<uint32_t>();
    kr.cfg.min_len = body.at("min_len").get<uint32_t>();
    kr.cfg.mode = parse_blur_mode(body.at("mode").get<std::string>());
    kr.cfg.normalize_taps = body.value("normalize_taps", false);
    kr.cfg.validate();
    return kr;
  } catch (const nlohmann::json::exception& e) {
    throw Error("keyring " + path.string() + ": corrupt file (" + e.what() + ")");
  }
}

}  // namespace pkit
