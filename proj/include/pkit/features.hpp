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
#include <string>
#include <vector>

#include "pkit/audio_io.hpp"
#include "pkit/core.hpp"

namespace pkit {

struct MfccConfig {
  size_t frame_len = 200;  // 25 ms at 8 kHz
  size_t hop = 80;         // 10 ms at 8 kHz
  size_t fft_size = 256;
  uint32_t sample_rate = 8000;
  size_t n_mels = 26;
  size_t n_coeffs = 13;
  double log_floor = 1e-10;

  /// 25 ms frames, 10 ms hop, fft_size = next power of two >= frame_len.
  static MfccConfig for_rate(uint32_t sample_rate);

  void validate() const;
  /// Hex digest identifying the configuration; features are comparable only
  /// when their hashes match.
  std::string hash() const;
};

struct FeatureMatrix {
  MatrixXd values;  // frames x n_coeffs
  std::string clip_id;
  std::string config_hash;
};

/// Periodic Hann window of length n.
VectorXd hann_window(size_t n);

/// n_mels x (fft_size/2 + 1) triangular filters on the HTK mel scale,
/// m = 2595 log10(1 + f/700), spanning 0 Hz to Nyquist. Peaks are 1, so
/// interior bins are covered with total weight exactly 1.
MatrixXd mel_filterbank(size_t n_mels, size_t fft_size, uint32_t sample_rate);

/// Orthonormal DCT-II, n x n.
MatrixXd dct2_matrix(size_t n);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Number of full frames: 1 + floor((len - frame_len) / hop).
size_t frame_count(size_t len, const MfccConfig& cfg);

/// Hann -> |FFT|^2 -> mel filterbank -> log(max(e, floor)) -> DCT-II,
/// keeping the first n_coeffs coefficients of each frame.
FeatureMatrix mfcc(const AudioClip& clip, const MfccConfig& cfg);

/// Cepstral stage alone: log-mel energies (frames x n_mels) to coefficients.
MatrixXd cepstra_from_log_mel(const MatrixXd& log_mel, size_t n_coeffs);

/// MFCC for every clip, in dataset order.
std::vector<FeatureMatrix> mfcc_dataset(const Dataset& dataset, const MfccConfig& cfg);

// Binary dump: "MFC1", rows u32, cols u32, config hash (first 8 bytes, u64),
// then row-major little-endian doubles.
void write_feature_dump(const FeatureMatrix& features, const std::filesystem::path& path);
FeatureMatrix read_feature_dump(const std::filesystem::path& path);

}  // namespace pkit
