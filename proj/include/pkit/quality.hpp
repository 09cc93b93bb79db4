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

#include <filesystem>
#include <string>
#include <vector>

#include "pkit/audio_io.hpp"
#include "pkit/blur.hpp"
#include "pkit/features.hpp"

namespace pkit {

/// Reported in place of +inf for identical signals.
inline constexpr double kSnrCapDb = 300.0;

struct GaussianStats {
  VectorXd mean;
  MatrixXd cov;
  size_t frame_count = 0;
};

/// 10 log10(sum clean^2 / sum (clean - modified)^2), capped at kSnrCapDb.
double snr_db(const AudioClip& clean, const AudioClip& modified);

/// Pooled-frame mean and unbiased covariance, symmetrized as (C + C^T) / 2.
GaussianStats fit_stats(const std::vector<FeatureMatrix>& features);

/// Frechet distance between two Gaussians,
///   |mu_a - mu_b|^2 + tr(Sa + Sb - 2 (Sa^1/2 Sb Sa^1/2)^1/2),
/// with 1e-10 I added to both covariances and the result clamped at 0.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

struct SnrSummary {
  double min = 0.0;
  double median = 0.0;
  double mean = 0.0;
};

SnrSummary summarize_snr(std::vector<double> values);

struct QualityReport {
  double frechet_mfcc = 0.0;
  SnrSummary snr;
  size_t clamped_samples = 0;
  std::string config_hash;
  size_t clips = 0;
};

/// Compares a protected dataset against its clean source, clip by clip
/// (aligned by id). `log` supplies clamp counts and may be empty.
QualityReport dataset_quality_report(const Dataset& clean, const Dataset& protected_set,
                                     const std::vector<BlurReport>& log = {});

/// {frechet_mfcc, snr:{min,median,mean}, clamped_samples, config_hash, ...}
std::string quality_report_json(const QualityReport& report);
void write_quality_report(const QualityReport& report, const std::filesystem::path& path);

}  // namespace pkit
