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

#include "pkit/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <set>

#include "json.hpp"

namespace pkit {

namespace {

uint16_t read_u16(std::span<const uint8_t> b, size_t at) {
  return static_cast<uint16_t>(b[at] | b[at + 1] << 8);
}

uint32_t read_u32(std::span<const uint8_t> b, size_t at) {
  return static_cast<uint32_t>(b[at]) | static_cast<uint32_t>(b[at + 1]) << 8 |
         static_cast<uint32_t>(b[at + 2]) << 16 | static_cast<uint32_t>(b[at + 3]) << 24;
}

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xFF));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_tag(std::vector<uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

bool tag_is(std::span<const uint8_t> b, size_t at, const char* tag) {
  return std::equal(tag, tag + 4, b.begin() + static_cast<std::ptrdiff_t>(at));
}

std::vector<uint8_t> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

Split parse_split(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "test") return Split::kTest;
  throw Error("unknown split '" + text + "'");
}

void DatasetManifest::validate() const {
  if (class_count < 2) throw Error("manifest: class_count must be >= 2");
  if (sample_rate == 0) throw Error("manifest: sample_rate must be positive");
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (e.label >= class_count) {
      throw Error("manifest: entry '" + e.id + "' has label " + std::to_string(e.label) +
                  " >= class_count " + std::to_string(class_count));
    }
    if (!seen.insert(e.id).second) throw Error("manifest: duplicate id '" + e.id + "'");
  }
}

int16_t quantize_pcm16(double sample) {
  double scaled = std::round(sample * 32768.0);  // std::round is half-away-from-zero
  return static_cast<int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

double dequantize_pcm16(int16_t value) { return static_cast<double>(value) / 32768.0; }

std::vector<double> pcm16_round_trip(std::span<const double> samples) {
  std::vector<double> out(samples.size());
  std::transform(samples.begin(), samples.end(), out.begin(),
                 [](double s) { return dequantize_pcm16(quantize_pcm16(s)); });
  return out;
}

AudioClip decode_wav(std::span<const uint8_t> bytes, const std::string& id) {
  const std::string where = id.empty() ? std::string("wav") : "wav '" + id + "'";
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE")) {
    throw Error(where + ": malformed header (missing RIFF/WAVE)");
  }
  uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  size_t at = 12;
  while (at + 8 <= bytes.size()) {
    uint32_t size = read_u32(bytes, at + 4);
    size_t body = at + 8;
    if (tag_is(bytes, at, "fmt ")) {
      if (size < 16 || body + 16 > bytes.size()) throw Error(where + ": malformed fmt chunk");
      format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      rate = read_u32(bytes, body + 4);
      block_align = read_u16(bytes, body + 12);
      bits = read_u16(bytes, body + 14);
      have_fmt = true;
    } else if (tag_is(bytes, at, "data")) {
      if (!have_fmt) throw Error(where + ": data chunk precedes fmt chunk");
      if (format != 1) throw Error(where + ": unsupported codec (format tag " + std::to_string(format) + ")");
      if (bits != 16) throw Error(where + ": unsupported bit depth " + std::to_string(bits));
      if (channels == 0 || rate == 0 || block_align != channels * 2) {
        throw Error(where + ": malformed fmt chunk");
      }
      size_t available = std::min<size_t>(size, bytes.size() - body);
      size_t frames = available / block_align;
      if (frames == 0) throw Error(where + ": zero-length data chunk");
      if (channels > 1) {
        std::cerr << "warning: " << where << ": " << channels
                  << " channels, keeping channel 0\n";
      }
      AudioClip clip;
      clip.sample_rate = rate;
      clip.id = id;
      clip.samples.resize(frames);
      for (size_t f = 0; f < frames; ++f) {
        auto v = static_cast<int16_t>(read_u16(bytes, body + f * block_align));
        clip.samples[f] = dequantize_pcm16(v);
      }
      return clip;
    }
    at = body + size + (size & 1);
  }
  throw Error(where + (have_fmt ? ": missing data chunk" : ": malformed header (missing fmt chunk)"));
}

std::vector<uint8_t> encode_wav(const AudioClip& clip) {
  const auto data_bytes = static_cast<uint32_t>(clip.samples.size() * 2);
  std::vector<uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, clip.sample_rate);
  put_u32(out, clip.sample_rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double s : clip.samples) put_u16(out, static_cast<uint16_t>(quantize_pcm16(s)));
  return out;
}

AudioClip read_wav(const fs::path& path) {
  auto bytes = slurp(path);
  return decode_wav(bytes, path.stem().string());
}

void write_wav(const AudioClip& clip, const fs::path& path) {
  auto bytes = encode_wav(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
    DatasetManifest m;
    m.sample_rate = doc.at("sample_rate").get<uint32_t>();
    m.class_count = doc.at("class_count").get<uint32_t>();
    m.split = parse_split(doc.at("split").get<std::string>());
    for (const auto& e : doc.at("entries")) {
      m.entries.push_back({e.at("id").get<std::string>(), e.at("path").get<std::string>(),
                           e.at("label").get<uint32_t>()});
    }
    m.root = path.parent_path();
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error("manifest " + path.string() + ": " + e.what());
  }
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  nlohmann::ordered_json doc;
  doc["sample_rate"] = manifest.sample_rate;
  doc["class_count"] = manifest.class_count;
  doc["split"] = to_string(manifest.split);
  doc["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : manifest.entries) {
    doc["entries"].push_back({{"id", e.id}, {"path", e.path}, {"label", e.label}});
  }
  std::ofstream out(path, std::ios::trunc);
  out << doc.dump(2) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

Dataset load_dataset(const fs::path& manifest_path) {
  Dataset ds;
  ds.manifest = load_manifest(manifest_path);
  ds.clips.resize(ds.manifest.entries.size());
  parallel_for(ds.clips.size(), [&](size_t i) {
    const auto& e = ds.manifest.entries[i];
    AudioClip clip = read_wav(ds.manifest.root / e.path);
    clip.id = e.id;
    clip.label = e.label;
    ds.clips[i] = std::move(clip);
  });
  for (const auto& clip : ds.clips) {
    if (clip.sample_rate != ds.manifest.sample_rate) {
      throw Error("clip '" + clip.id + "' has sample rate " + std::to_string(clip.sample_rate) +
                  ", manifest says " + std::to_string(ds.manifest.sample_rate));
    }
  }
  return ds;
}

DatasetManifest save_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  DatasetManifest m = dataset.manifest;
  m.root = dir;
  m.entries.clear();
  for (const auto& clip : dataset.clips) m.entries.push_back({clip.id, clip.id + ".wav", clip.label});
  m.validate();
  parallel_for(dataset.clips.size(),
               [&](size_t i) { write_wav(dataset.clips[i], dir / m.entries[i].path); });
  save_manifest(m, dir / "manifest.json");
  return m;
}

size_t synth_min_length(const SynthConfig& cfg) {
  return static_cast<size_t>(cfg.patch_len) + static_cast<size_t>(cfg.class_count) * 64;
}

std::pair<Dataset, Dataset> synth_dataset(const SynthConfig& cfg) {
  if (cfg.class_count < 2) throw Error("synth: class_count must be >= 2");
  if (cfg.per_class < 20) throw Error("synth: per_class must be >= 20");
  if (cfg.sample_rate == 0 || !(cfg.duration > 0.0)) throw Error("synth: non-positive duration or rate");
  const auto length = static_cast<size_t>(std::llround(cfg.duration * cfg.sample_rate));
  if (length < synth_min_length(cfg)) {
    throw Error("synth: " + std::to_string(length) + " samples cannot hold a patch of " +
                std::to_string(cfg.patch_len) + " for " + std::to_string(cfg.class_count) +
                " classes (need " + std::to_string(synth_min_length(cfg)) + ")");
  }
  const uint32_t train_per_class = cfg.per_class * 4 / 5;

  Dataset train, test;
  for (auto* ds : {&train, &test}) {
    ds->manifest.sample_rate = cfg.sample_rate;
    ds->manifest.class_count = cfg.class_count;
  }
  train.manifest.split = Split::kTrain;
  test.manifest.split = Split::kTest;

  for (uint32_t c = 0; c < cfg.class_count; ++c) {
    const double freq = 200.0 * (c + 1);
    for (uint32_t i = 0; i < cfg.per_class; ++i) {
      SplitMix64 rng(substream_seed(cfg.seed, uint64_t{c} * cfg.per_class + i));
      const double phase = rng.uniform(0.0, 6.283185307179586);
      AudioClip clip;
      clip.sample_rate = cfg.sample_rate;
      clip.label = c;
      char id[32];
      std::snprintf(id, sizeof id, "c%02u_%04u", c, i);
      clip.id = id;
      clip.samples.resize(length);
      double peak = 0.0;
      for (size_t t = 0; t < length; ++t) {
        double s = std::sin(6.283185307179586 * freq * static_cast<double>(t) / cfg.sample_rate + phase) +
                   0.05 * rng.normal();
        clip.samples[t] = s;
        peak = std::max(peak, std::abs(s));
      }
      for (double& s : clip.samples) s *= 0.9 / peak;
      clip.samples = pcm16_round_trip(clip.samples);
      (i < train_per_class ? train : test).clips.push_back(std::move(clip));
    }
  }
  for (auto* ds : {&train, &test}) {
    for (const auto& clip : ds->clips) ds->manifest.entries.push_back({clip.id, clip.id + ".wav", clip.label});
  }
  return {std::move(train), std::move(test)};
}

}  // namespace pkit
