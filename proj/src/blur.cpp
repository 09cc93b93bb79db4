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

#include "pkit/blur.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include "json.hpp"

namespace pkit {

namespace {

double energy_ratio_db(double signal, double noise) {
  if (noise <= 0.0) return 300.0;
  if (signal <= 0.0) return -300.0;
  return std::clamp(10.0 * std::log10(signal / noise), -300.0, 300.0);
}

BlurReport make_report(const AudioClip& before, const std::vector<double>& after, size_t start,
                       size_t end, uint32_t protection_class, size_t clamped) {
  BlurReport r;
  r.clip_id = before.id;
  r.start = start;
  r.end = end;
  r.protection_class = protection_class;
  r.clamped = clamped;
  double signal = 0.0, noise = 0.0;
  for (size_t t = start; t < end; ++t) {
    double d = after[t] - before.samples[t];
    r.max_abs_delta = std::max(r.max_abs_delta, std::abs(d));
    signal += before.samples[t] * before.samples[t];
    noise += d * d;
  }
  r.patch_snr_db = energy_ratio_db(signal, noise);
  return r;
}

std::pair<AudioClip, BlurReport> blur_range(const AudioClip& clip, const ClassProtection& prot,
                                            size_t start, size_t len, const BlurOptions& opts) {
  if (prot.taps.empty()) throw Error("protection for class " + std::to_string(prot.class_id) + " has no taps");
  if (start + len > clip.samples.size()) {
    throw Error("clip '" + clip.id + "' has " + std::to_string(clip.samples.size()) +
                " samples, patch needs " + std::to_string(start + len));
  }
  size_t clamped = 0;
  AudioClip out = clip;
  out.samples = convolve_range(clip.samples, prot.taps, start, len, &clamped, opts);
  BlurReport report = make_report(clip, out.samples, start, start + len, prot.class_id, clamped);
  return {std::move(out), std::move(report)};
}

// Runs fn over every clip; collects per-clip failures into one error.
template <class Fn>
ProtectedDataset transform_clips(const Dataset& dataset, const char* what, Fn&& fn) {
  const size_t n = dataset.clips.size();
  ProtectedDataset out;
  out.data.manifest = dataset.manifest;
  out.data.clips.resize(n);
  out.log.resize(n);
  std::vector<std::string> errors(n);
  parallel_for(n, [&](size_t i) {
    try {
      auto [clip, report] = fn(i, dataset.clips[i]);
      out.data.clips[i] = std::move(clip);
      out.log[i] = std::move(report);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::string listing;
  size_t failures = 0;
  for (size_t i = 0; i < n; ++i) {
    if (errors[i].empty()) continue;
    ++failures;
    listing += "\n  " + dataset.clips[i].id + ": " + errors[i];
  }
  if (failures > 0) {
    throw Error(std::string(what) + ": " + std::to_string(failures) + " clip(s) failed:" + listing);
  }
  return out;
}

void check_permutation(const std::vector<uint32_t>& perm, uint32_t class_count) {
  if (perm.size() != class_count) throw Error("permutation size does not match class count");
  std::vector<bool> hit(class_count, false);
  for (uint32_t v : perm) {
    if (v >= class_count || hit[v]) throw Error("class map is not a bijection");
    hit[v] = true;
  }
}

}  // namespace

std::vector<double> convolve_range(std::span<const double> in, std::span<const double> taps,
                                   size_t start, size_t len, size_t* clamped,
                                   const BlurOptions& opts) {
  std::vector<double> out(in.begin(), in.end());
  const auto n = static_cast<std::ptrdiff_t>(in.size());
  const auto k = static_cast<std::ptrdiff_t>(taps.size());
  const std::ptrdiff_t offset = k / 2;
  size_t clamp_count = 0;
  for (size_t t = start; t < start + len; ++t) {
    double acc = 0.0;
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(t) + offset;
    for (std::ptrdiff_t j = 0; j < k; ++j) {
      const std::ptrdiff_t src = base - j;
      if (src >= 0 && src < n) acc += taps[static_cast<size_t>(j)] * in[static_cast<size_t>(src)];
    }
    if (opts.clamp && (acc > 1.0 || acc < -1.0)) {
      acc = std::clamp(acc, -1.0, 1.0);
      ++clamp_count;
    }
    out[t] = acc;
  }
  if (clamped) *clamped = clamp_count;
  return out;
}

std::pair<AudioClip, BlurReport> blur_patch(const AudioClip& clip, const ClassProtection& prot,
                                            const BlurOptions& opts) {
  if (clip.label != prot.class_id) {
    throw Error("clip '" + clip.id + "' has label " + std::to_string(clip.label) +
                " but protection is for class " + std::to_string(prot.class_id));
  }
  return blur_range(clip, prot, prot.position, prot.p, opts);
}

std::pair<AudioClip, BlurReport> blur_full(const AudioClip& clip, const ClassProtection& prot,
                                           const BlurOptions& opts) {
  if (clip.samples.empty()) throw Error("clip '" + clip.id + "' is empty");
  return blur_range(clip, prot, 0, clip.samples.size(), opts);
}

std::vector<uint32_t> cyclic_permutation(uint32_t class_count, uint32_t shift) {
  std::vector<uint32_t> perm(class_count);
  for (uint32_t c = 0; c < class_count; ++c) perm[c] = (c + shift) % class_count;
  return perm;
}

namespace {

ProtectedDataset blur_with_map(const Dataset& dataset, const Keyring& keyring, BlurMode mode,
                               const std::vector<uint32_t>& class_map, const char* what) {
  if (dataset.manifest.class_count != keyring.cfg.class_count) {
    throw Error(std::string(what) + ": dataset has " + std::to_string(dataset.manifest.class_count) +
                " classes, keyring has " + std::to_string(keyring.cfg.class_count));
  }
  const auto protections = keyring.protections();
  return transform_clips(dataset, what, [&](size_t, const AudioClip& clip) {
    if (clip.label >= protections.size()) throw Error("label out of range");
    const ClassProtection& prot = protections[class_map[clip.label]];
    if (mode == BlurMode::kFullSample) return blur_full(clip, prot);
    return blur_range(clip, prot, prot.position, prot.p, BlurOptions{});
  });
}

}  // namespace

ProtectedDataset protect_dataset(const Dataset& dataset, const Keyring& keyring, BlurMode mode,
                                 bool pollute_test) {
  if (dataset.manifest.split == Split::kTest && !pollute_test) return {dataset, {}};
  std::vector<uint32_t> identity(keyring.cfg.class_count);
  for (uint32_t c = 0; c < identity.size(); ++c) identity[c] = c;
  return blur_with_map(dataset, keyring, mode, identity, "protect");
}

ProtectedDataset apply_mixed_keys(const Dataset& dataset, const Keyring& keyring,
                                  const std::vector<uint32_t>& permutation) {
  check_permutation(permutation, keyring.cfg.class_count);
  return blur_with_map(dataset, keyring, keyring.cfg.mode, permutation, "mixed-key blur");
}

ProtectedDataset attack_known_location_noise(const Dataset& dataset,
                                             const std::vector<uint32_t>& positions,
                                             uint32_t patch_len, double amplitude, uint64_t seed) {
  if (amplitude < 0.0 || !std::isfinite(amplitude)) throw Error("known-noise attack: amplitude must be >= 0");
  if (amplitude == 0.0) std::cerr << "warning: known-noise attack with amplitude 0 leaves clips unchanged\n";
  if (positions.size() < dataset.manifest.class_count) throw Error("known-noise attack: missing class positions");
  return transform_clips(dataset, "known-noise attack", [&](size_t i, const AudioClip& clip) {
    const size_t start = positions[clip.label];
    if (start + patch_len > clip.samples.size()) throw Error("clip shorter than attacked range");
    SplitMix64 rng(substream_seed(seed, i));
    AudioClip out = clip;
    size_t clamped = 0;
    if (amplitude > 0.0) {
      for (size_t t = start; t < start + patch_len; ++t) {
        double v = clip.samples[t] + rng.uniform(-amplitude, amplitude);
        if (v > 1.0 || v < -1.0) ++clamped;
        out.samples[t] = std::clamp(v, -1.0, 1.0);
      }
    }
    BlurReport report = make_report(clip, out.samples, start, start + patch_len, clip.label, clamped);
    return std::pair{std::move(out), std::move(report)};
  });
}

ProtectedDataset attack_random_blur(const Dataset& dataset, const ProtectionConfig& cfg, uint64_t seed) {
  if (cfg.k < 1 || cfg.p < cfg.k || !(cfg.b > 0.0)) throw Error("random-blur attack: invalid k/p/b");
  return transform_clips(dataset, "random-blur attack", [&](size_t i, const AudioClip& clip) {
    const size_t usable = std::min<size_t>(clip.samples.size(), cfg.min_len);
    if (usable < cfg.p) throw Error("clip shorter than patch");
    SplitMix64 rng(substream_seed(seed, i));
    ClassProtection prot;
    prot.class_id = clip.label;
    prot.k = cfg.k;
    prot.p = cfg.p;
    prot.taps.resize(cfg.k);
    for (double& tap : prot.taps) tap = cfg.b * rng.next_unit();
    prot.position = static_cast<uint32_t>(rng.below(usable - cfg.p + 1));
    return blur_range(clip, prot, prot.position, prot.p, BlurOptions{});
  });
}

void write_protection_log(const std::vector<BlurReport>& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write protection log " + path.string());
  for (const auto& r : log) {
    nlohmann::ordered_json line;
    line["id"] = r.clip_id;
    line["start"] = r.start;
    line["end"] = r.end;
    line["protection_class"] = r.protection_class;
    line["max_abs_delta"] = r.max_abs_delta;
    line["patch_snr_db"] = r.patch_snr_db;
    line["clamped"] = r.clamped;
    out << line.dump() << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<BlurReport> read_protection_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open protection log " + path.string());
  std::vector<BlurReport> log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      BlurReport r;
      r.clip_id = j.at("id").get<std::string>();
      r.start = j.at("start").get<size_t>();
      r.end = j.at("end").get<size_t>();
      r.protection_class = j.at("protection_class").get<uint32_t>();
      r.max_abs_delta = j.at("max_abs_delta").get<double>();
      r.patch_snr_db = j.at("patch_snr_db").get<double>();
      r.clamped = j.at("clamped").get<size_t>();
      log.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error("protection log " + path.string() + ": " + e.what());
    }
  }
  return log;
}

}  // namespace pkit
