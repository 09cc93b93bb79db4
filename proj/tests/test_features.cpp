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

#include <cmath>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "pkit/features.hpp"
#include "test_util.hpp"

using namespace pkit;
using pkit::testing::make_clip;
using pkit::testing::random_signal;

TEST_CASE("dct2 is orthonormal") {
  for (size_t n : {1u, 13u, 26u}) {
    const MatrixXd d = dct2_matrix(n);
    const MatrixXd eye = MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    CHECK((d * d.transpose() - eye).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("mel filterbank shape and coverage") {
  const size_t fft = 256;
  const uint32_t rate = 8000;
  const MatrixXd fb = mel_filterbank(26, fft, rate);
  REQUIRE(fb.rows() == 26);
  REQUIRE(fb.cols() == 129);
  CHECK(fb.minCoeff() >= 0.0);
  CHECK(fb.maxCoeff() <= 1.0 + 1e-9);
  const double lo = mel_to_hz(hz_to_mel(4000.0) / 27.0);
  const double hi = mel_to_hz(hz_to_mel(4000.0) * 26.0 / 27.0);
  for (Eigen::Index b = 0; b < fb.cols(); ++b) {
    const double f = static_cast<double>(b) * rate / static_cast<double>(fft);
    if (f >= lo && f <= hi) CHECK(fb.col(b).sum() == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(hz_to_mel(mel_to_hz(1234.5)) == doctest::Approx(1234.5).epsilon(1e-12));
  CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)));
}

TEST_CASE("hann window is periodic") {
  const VectorXd w = hann_window(200);
  CHECK(w[0] == 0.0);
  CHECK(w[100] == doctest::Approx(1.0));
  CHECK(w[50] == doctest::Approx(w[150]).epsilon(1e-12));
}

TEST_CASE("frame count") {
  const MfccConfig cfg;
  CHECK(frame_count(8000, cfg) == 98);
  CHECK(frame_count(200, cfg) == 1);
  CHECK(frame_count(279, cfg) == 1);
  CHECK(frame_count(280, cfg) == 2);
  CHECK(frame_count(199, cfg) == 0);
  const auto f = mfcc(make_clip(random_signal(8000, 1)), cfg);
  CHECK(f.values.rows() == 98);
  CHECK(f.values.cols() == 13);
}

TEST_CASE("config defaults and hashing") {
  const auto cfg = MfccConfig::for_rate(8000);
  CHECK(cfg.frame_len == 200);
  CHECK(cfg.hop == 80);
  CHECK(cfg.fft_size == 256);
  CHECK(cfg.hash() == MfccConfig{}.hash());
  auto other = cfg;
  other.n_mels = 40;
  CHECK(other.hash() != cfg.hash());
  other = cfg;
  other.fft_size = 100;
  CHECK_THROWS_AS(other.validate(), Error);
}

TEST_CASE("silence hits the log floor") {
  const MfccConfig cfg;
  const auto f = mfcc(make_clip(std::vector<double>(1000, 0.0)), cfg);
  const double c0 = std::sqrt(26.0) * std::log(1e-10);
  for (Eigen::Index r = 0; r < f.values.rows(); ++r) {
    CHECK(f.values(r, 0) == doctest::Approx(c0).epsilon(1e-12));
    for (Eigen::Index c = 1; c < 13; ++c) CHECK(std::abs(f.values(r, c)) <= 1e-9);
  }
}

TEST_CASE("flat log-mel spectrum gives zero higher cepstra") {
  const MatrixXd log_mel = MatrixXd::Constant(4, 26, -3.25);
  const MatrixXd c = cepstra_from_log_mel(log_mel, 13);
  for (Eigen::Index r = 0; r < 4; ++r) {
    CHECK(c(r, 0) == doctest::Approx(-3.25 * std::sqrt(26.0)).epsilon(1e-12));
    for (Eigen::Index k = 1; k < 13; ++k) CHECK(std::abs(c(r, k)) <= 1e-12);
  }
}

TEST_CASE("scaling the signal shifts c0 only") {
  // x -> a*x multiplies every mel energy by a^2, adding 2 log a to each log-mel bin.
  const MfccConfig cfg;
  const auto clip = make_clip(random_signal(4000, 9, 0.4));
  auto scaled = clip;
  const double a = 0.5;
  for (auto& s : scaled.samples) s *= a;
  const auto f = mfcc(clip, cfg);
  const auto g = mfcc(scaled, cfg);
  const double shift = std::sqrt(26.0) * 2.0 * std::log(a);
  for (Eigen::Index r = 0; r < f.values.rows(); ++r) {
    CHECK(std::abs(g.values(r, 0) - f.values(r, 0) - shift) <= 1e-6);
    for (Eigen::Index k = 1; k < 13; ++k) CHECK(std::abs(g.values(r, k) - f.values(r, k)) <= 1e-6);
  }
}

TEST_CASE("pure tone peaks in the matching mel band") {
  std::vector<double> x(2000);
  for (size_t t = 0; t < x.size(); ++t) x[t] = 0.5 * std::sin(2.0 * std::numbers::pi * 1000.0 * static_cast<double>(t) / 8000.0);
  const auto f = mfcc(make_clip(x), MfccConfig{});
  CHECK(f.values.allFinite());
  // A tone is far from flat, so the cepstrum carries energy past c0.
  CHECK(f.values.row(0).tail(12).norm() > 1.0);
}

TEST_CASE("too-short clip is an error naming the clip") {
  CHECK_THROWS_WITH_AS(mfcc(make_clip(std::vector<double>(150, 0.1), 0, "tiny"), MfccConfig{}),
                       doctest::Contains("tiny"), Error);
}

TEST_CASE("feature dump round trip") {
  testing::TempDir dir("mfc");
  auto f = mfcc(make_clip(random_signal(3000, 4), 0, "x"), MfccConfig{});
  write_feature_dump(f, dir / "x.mfc");
  const auto back = read_feature_dump(dir / "x.mfc");
  CHECK(back.values == f.values);
  CHECK(back.config_hash == f.config_hash);
  CHECK(back.clip_id == "x");
  {
    std::ofstream bad(dir / "bad.mfc", std::ios::binary);
    bad << "NOPE";
  }
  CHECK_THROWS_AS(read_feature_dump(dir / "bad.mfc"), Error);
}

TEST_CASE("mfcc_dataset preserves order") {
  Dataset ds;
  for (int i = 0; i < 5; ++i) ds.clips.push_back(make_clip(random_signal(1000, i), 0, "c" + std::to_string(i)));
  const auto all = mfcc_dataset(ds, MfccConfig{});
  for (int i = 0; i < 5; ++i) {
    CHECK(all[i].clip_id == "c" + std::to_string(i));
    CHECK(all[i].values == mfcc(ds.clips[i], MfccConfig{}).values);
  }
}
