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

#include <algorithm>
#include <cmath>
#include <fstream>

#include "doctest.h"
#include "pkit/audio_io.hpp"
#include "pkit/fft.hpp"
#include "test_util.hpp"

using namespace pkit;
using pkit::testing::TempDir;

namespace {

// Canonical 44-byte header PCM16 image with arbitrary channel count.
std::vector<uint8_t> pcm16_image(const std::vector<int16_t>& interleaved, uint16_t channels, uint32_t rate = 8000,
                                 uint16_t format = 1, uint16_t bits = 16) {
  std::vector<uint8_t> out;
  auto u16 = [&](uint16_t v) {
    out.push_back(v & 0xFF);
    out.push_back(v >> 8);
  };
  auto u32 = [&](uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
  };
  auto tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };
  const auto data = static_cast<uint32_t>(interleaved.size() * 2);
  tag("RIFF");
  u32(36 + data);
  tag("WAVE");
  tag("fmt ");
  u32(16);
  u16(format);
  u16(channels);
  u32(rate);
  u32(rate * channels * 2);
  u16(static_cast<uint16_t>(channels * 2));
  u16(bits);
  tag("data");
  u32(data);
  for (int16_t v : interleaved) u16(static_cast<uint16_t>(v));
  return out;
}

}  // namespace

TEST_CASE("read: fixed-point scaling by 1/32768") {
  const auto clip = decode_wav(pcm16_image({0, 16384, -32768}, 1));
  REQUIRE(clip.samples.size() == 3);
  CHECK(clip.samples[0] == 0.0);
  CHECK(clip.samples[1] == 0.5);
  CHECK(clip.samples[2] == -1.0);
  CHECK(clip.sample_rate == 8000);
}

TEST_CASE("read: multi-channel input keeps channel 0") {
  // L = 16384 (0.5), R = 3277 (~0.1)
  const auto clip = decode_wav(pcm16_image({16384, 3277, 16384, 3277, -8192, 3277}, 2));
  REQUIRE(clip.samples.size() == 3);
  CHECK(clip.samples[0] == 0.5);
  CHECK(clip.samples[1] == 0.5);
  CHECK(clip.samples[2] == -0.25);
}

TEST_CASE("write: quantizer boundaries") {
  CHECK(quantize_pcm16(1.0) == 32767);
  CHECK(quantize_pcm16(0.0) == 0);
  CHECK(quantize_pcm16(-1.0) == -32768);
  CHECK(quantize_pcm16(1.5 / 32768.0) == 2);    // half away from zero
  CHECK(quantize_pcm16(-1.5 / 32768.0) == -2);
  CHECK(quantize_pcm16(7.0) == 32767);
  CHECK(quantize_pcm16(-7.0) == -32768);
}

TEST_CASE("property: canonical PCM16 mono files round-trip byte-identically") {
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    SplitMix64 rng(seed);
    std::vector<int16_t> values(1 + rng.below(500));
    for (auto& v : values) v = static_cast<int16_t>(static_cast<int64_t>(rng.below(65536)) - 32768);
    values[0] = seed % 2 ? int16_t{32767} : int16_t{-32768};
    const auto image = pcm16_image(values, 1, 8000 + static_cast<uint32_t>(seed));
    CHECK(encode_wav(decode_wav(image)) == image);
  }
}

TEST_CASE("file round trip through read_wav/write_wav") {
  TempDir dir("wav");
  const auto image = pcm16_image({1, -2, 300, -32768, 32767}, 1);
  {
    std::ofstream out(dir / "a.wav", std::ios::binary);
    out.write(reinterpret_cast<const char*>(image.data()), static_cast<std::streamsize>(image.size()));
  }
  const AudioClip clip = read_wav(dir / "a.wav");
  CHECK(clip.id == "a");
  write_wav(clip, dir / "b.wav");
  std::ifstream in(dir / "b.wav", std::ios::binary);
  std::vector<uint8_t> back((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(back == image);
}

TEST_CASE("read: error paths") {
  CHECK_THROWS_WITH_AS(decode_wav(std::vector<uint8_t>{'R', 'I', 'F'}), doctest::Contains("malformed header"), Error);
  auto not_wave = pcm16_image({1}, 1);
  not_wave[8] = 'X';
  CHECK_THROWS_WITH_AS(decode_wav(not_wave), doctest::Contains("malformed header"), Error);
  CHECK_THROWS_WITH_AS(decode_wav(pcm16_image({1, 2}, 1, 8000, 3)), doctest::Contains("unsupported codec"), Error);
  CHECK_THROWS_WITH_AS(decode_wav(pcm16_image({1, 2}, 1, 8000, 1, 8)), doctest::Contains("unsupported bit depth"),
                       Error);
  CHECK_THROWS_WITH_AS(decode_wav(pcm16_image({}, 1)), doctest::Contains("zero-length"), Error);
}

TEST_CASE("manifest: save/load and validation") {
  TempDir dir("manifest");
  DatasetManifest m;
  m.sample_rate = 8000;
  m.class_count = 3;
  m.split = Split::kTest;
  m.entries = {{"a", "a.wav", 0}, {"b", "sub/b.wav", 2}};
  save_manifest(m, dir / "manifest.json");
  const auto back = load_manifest(dir / "manifest.json");
  CHECK(back.sample_rate == 8000);
  CHECK(back.class_count == 3);
  CHECK(back.split == Split::kTest);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[1].path == "sub/b.wav");
  CHECK(back.root == dir.path());

  m.entries.push_back({"a", "c.wav", 1});
  CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("duplicate id"), Error);
  m.entries.back() = {"c", "c.wav", 3};
  CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("label 3"), Error);
}

TEST_CASE("dataset: sample rate must be uniform") {
  TempDir dir("rates");
  Dataset ds;
  ds.manifest.sample_rate = 8000;
  ds.manifest.class_count = 2;
  ds.clips = {pkit::testing::make_clip({0.1, 0.2}, 0, "x"), pkit::testing::make_clip({0.1, 0.2}, 1, "y", 16000)};
  save_dataset(ds, dir.path());
  CHECK_THROWS_WITH_AS(load_dataset(dir / "manifest.json"), doctest::Contains("sample rate"), Error);
}

TEST_CASE("synth: deterministic, split 80/20, byte-identical on disk") {
  SynthConfig cfg;
  cfg.class_count = 2;
  cfg.per_class = 20;
  cfg.duration = 1.0;
  cfg.sample_rate = 8000;
  cfg.seed = 7;
  const auto a = synth_dataset(cfg);
  const auto b = synth_dataset(cfg);
  REQUIRE(a.first.clips.size() == 32);
  REQUIRE(a.second.clips.size() == 8);
  for (size_t i = 0; i < a.first.clips.size(); ++i) {
    CHECK(encode_wav(a.first.clips[i]) == encode_wav(b.first.clips[i]));
  }
  for (size_t i = 0; i < a.second.clips.size(); ++i) {
    CHECK(encode_wav(a.second.clips[i]) == encode_wav(b.second.clips[i]));
  }

  TempDir d1("synth1"), d2("synth2");
  save_dataset(a.first, d1.path());
  save_dataset(b.first, d2.path());
  for (const auto& e : load_manifest(d1 / "manifest.json").entries) {
    std::ifstream f1(d1 / e.path, std::ios::binary), f2(d2 / e.path, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {}), s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
  }
  // Reading back equals the in-memory (already quantized) clips.
  const Dataset loaded = load_dataset(d1 / "manifest.json");
  CHECK(loaded.clips[5].samples == a.first.clips[5].samples);

  cfg.seed = 8;
  CHECK(synth_dataset(cfg).first.clips[0].samples != a.first.clips[0].samples);
}

TEST_CASE("synth: class tones and peak level") {
  SynthConfig cfg;
  cfg.class_count = 3;
  cfg.per_class = 20;
  cfg.seed = 3;
  const auto [train, test] = synth_dataset(cfg);
  for (uint32_t c = 0; c < 3; ++c) {
    const auto it = std::find_if(train.clips.begin(), train.clips.end(), [&](const AudioClip& x) { return x.label == c; });
    REQUIRE(it != train.clips.end());
    const std::vector<double> head(it->samples.begin(), it->samples.begin() + 4096);
    const auto spectrum = fft_real<double>(head);
    size_t peak = 1;
    for (size_t k = 1; k < 2048; ++k)
      if (std::abs(spectrum[k]) > std::abs(spectrum[peak])) peak = k;
    const double expected_bin = 200.0 * (c + 1) * 4096.0 / 8000.0;
    CHECK(std::abs(static_cast<double>(peak) - expected_bin) <= 0.5);

    double max_abs = 0.0;
    for (double s : it->samples) max_abs = std::max(max_abs, std::abs(s));
    CHECK(max_abs == doctest::Approx(0.9).epsilon(1e-4));
  }
}

TEST_CASE("synth: rejects clips too short for the patch scheme") {
  SynthConfig cfg;
  cfg.class_count = 10;
  cfg.per_class = 20;
  cfg.sample_rate = 8000;
  cfg.duration = (240.0 + 10 * 64 - 1) / 8000.0;
  CHECK_THROWS_WITH_AS(synth_dataset(cfg), doctest::Contains("cannot hold a patch"), Error);
  cfg.duration = (240.0 + 10 * 64) / 8000.0;
  CHECK_NOTHROW(synth_dataset(cfg));
  cfg.per_class = 19;
  CHECK_THROWS_AS(synth_dataset(cfg), Error);
}
