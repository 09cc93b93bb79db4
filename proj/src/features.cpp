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

#include "pkit/features.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "pkit/fft.hpp"

namespace pkit {

MfccConfig MfccConfig::for_rate(uint32_t sample_rate) {
  MfccConfig cfg;
  cfg.sample_rate = sample_rate;
  cfg.frame_len = static_cast<size_t>(std::llround(0.025 * sample_rate));
  cfg.hop = static_cast<size_t>(std::llround(0.010 * sample_rate));
  cfg.fft_size = next_power_of_two(cfg.frame_len);
  return cfg;
}

void MfccConfig::validate() const {
  if (frame_len == 0 || hop == 0) throw Error("mfcc config: frame_len and hop must be positive");
  if (!is_power_of_two(fft_size) || fft_size < frame_len) {
    throw Error("mfcc config: fft_size must be a power of two >= frame_len");
  }
  if (n_mels == 0 || n_coeffs == 0 || n_coeffs > n_mels) throw Error("mfcc config: need 0 < n_coeffs <= n_mels");
  if (sample_rate == 0) throw Error("mfcc config: sample_rate must be positive");
  if (!(log_floor > 0.0)) throw Error("mfcc config: log_floor must be positive");
}

std::string MfccConfig::hash() const {
  std::ostringstream canon;
  canon.precision(17);
  canon << "mfcc/v1 frame_len=" << frame_len << " hop=" << hop << " fft=" << fft_size
        << " rate=" << sample_rate << " mels=" << n_mels << " coeffs=" << n_coeffs
        << " floor=" << log_floor << " window=hann-periodic mel=htk";
  auto digest = sha256(canon.str());
  return to_hex(std::span<const uint8_t>(digest.data(), 8));
}

VectorXd hann_window(size_t n) {
  VectorXd w(n);
  for (size_t i = 0; i < n; ++i) {
    w[static_cast<Eigen::Index>(i)] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MatrixXd mel_filterbank(size_t n_mels, size_t fft_size, uint32_t sample_rate) {
  const size_t bins = fft_size / 2 + 1;
  const double nyquist = sample_rate / 2.0;
  const double mel_max = hz_to_mel(nyquist);
  std::vector<double> edges(n_mels + 2);
  for (size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  MatrixXd fb = MatrixXd::Zero(static_cast<Eigen::Index>(n_mels), static_cast<Eigen::Index>(bins));
  for (size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    for (size_t b = 0; b < bins; ++b) {
      const double f = static_cast<double>(b) * sample_rate / static_cast<double>(fft_size);
      double w = 0.0;
      if (f > lo && f <= center) {
        w = (f - lo) / (center - lo);
      } else if (f > center && f < hi) {
        w = (hi - f) / (hi - center);
      }
      fb(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(b)) = w;
    }
  }
  return fb;
}

MatrixXd dct2_matrix(size_t n) {
  const auto N = static_cast<Eigen::Index>(n);
  MatrixXd d(N, N);
  for (Eigen::Index k = 0; k < N; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
    for (Eigen::Index i = 0; i < N; ++i) {
      d(k, i) = scale * std::cos(std::numbers::pi * static_cast<double>(k) * (static_cast<double>(i) + 0.5) /
                                 static_cast<double>(n));
    }
  }
  return d;
}

size_t frame_count(size_t len, const MfccConfig& cfg) {
  if (len < cfg.frame_len) return 0;
  return 1 + (len - cfg.frame_len) / cfg.hop;
}

MatrixXd cepstra_from_log_mel(const MatrixXd& log_mel, size_t n_coeffs) {
  const MatrixXd dct = dct2_matrix(static_cast<size_t>(log_mel.cols()));
  return log_mel * dct.topRows(static_cast<Eigen::Index>(n_coeffs)).transpose();
}

FeatureMatrix mfcc(const AudioClip& clip, const MfccConfig& cfg) {
  cfg.validate();
  const size_t frames = frame_count(clip.samples.size(), cfg);
  if (frames == 0) {
    throw Error("mfcc: clip '" + clip.id + "' has " + std::to_string(clip.samples.size()) +
                " samples, shorter than one frame (" + std::to_string(cfg.frame_len) + ")");
  }
  const VectorXd window = hann_window(cfg.frame_len);
  const MatrixXd fb = mel_filterbank(cfg.n_mels, cfg.fft_size, cfg.sample_rate);
  const size_t bins = cfg.fft_size / 2 + 1;

  MatrixXd log_mel(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(cfg.n_mels));
  std::vector<std::complex<double>> buf(cfg.fft_size);
  VectorXd power(static_cast<Eigen::Index>(bins));
  for (size_t f = 0; f < frames; ++f) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    const size_t start = f * cfg.hop;
    for (size_t i = 0; i < cfg.frame_len; ++i) {
      buf[i] = clip.samples[start + i] * window[static_cast<Eigen::Index>(i)];
    }
    fft_inplace<double>(buf);
    for (size_t b = 0; b < bins; ++b) power[static_cast<Eigen::Index>(b)] = std::norm(buf[b]);
    VectorXd mel = fb * power;
    log_mel.row(static_cast<Eigen::Index>(f)) = mel.unaryExpr([&](double e) { return std::log(std::max(e, cfg.log_floor)); });
  }

  FeatureMatrix out;
  out.values = cepstra_from_log_mel(log_mel, cfg.n_coeffs);
  out.clip_id = clip.id;
  out.config_hash = cfg.hash();
  if (!out.values.allFinite()) throw Error("mfcc: non-finite coefficients for clip '" + clip.id + "'");
  return out;
}

std::vector<FeatureMatrix> mfcc_dataset(const Dataset& dataset, const MfccConfig& cfg) {
  std::vector<FeatureMatrix> out(dataset.clips.size());
  parallel_for(out.size(), [&](size_t i) { out[i] = mfcc(dataset.clips[i], cfg); });
  return out;
}

namespace {

void put_le(std::ostream& out, uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>(v >> (8 * i)));
}

uint64_t get_le(std::istream& in, int bytes) {
  uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    int c = in.get();
    if (c == EOF) throw Error("feature dump: truncated file");
    v |= static_cast<uint64_t>(static_cast<uint8_t>(c)) << (8 * i);
  }
  return v;
}

}  // namespace

void write_feature_dump(const FeatureMatrix& features, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write("MFC1", 4);
  put_le(out, static_cast<uint64_t>(features.values.rows()), 4);
  put_le(out, static_cast<uint64_t>(features.values.cols()), 4);
  auto hash = from_hex(features.config_hash);
  hash.resize(8, 0);
  out.write(reinterpret_cast<const char*>(hash.data()), 8);
  for (Eigen::Index r = 0; r < features.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < features.values.cols(); ++c) {
      put_le(out, std::bit_cast<uint64_t>(features.values(r, c)), 8);
    }
  }
  if (!out) throw Error("write failed: " + path.string());
}

FeatureMatrix read_feature_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "MFC1", 4) != 0) throw Error("feature dump: bad magic in " + path.string());
  const auto rows = static_cast<Eigen::Index>(get_le(in, 4));
  const auto cols = static_cast<Eigen::Index>(get_le(in, 4));
  std::array<uint8_t, 8> hash{};
  in.read(reinterpret_cast<char*>(hash.data()), 8);
  if (!in) throw Error("feature dump: truncated file");
  FeatureMatrix f;
  f.config_hash = to_hex(hash);
  f.clip_id = path.stem().string();
  f.values.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) f.values(r, c) = std::bit_cast<double>(get_le(in, 8));
  }
  return f;
}

}  // namespace pkit
