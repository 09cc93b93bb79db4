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

#include "pkit/quality.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "json.hpp"
#include "pkit/linalg.hpp"

namespace pkit {

double snr_db(const AudioClip& clean, const AudioClip& modified) {
  if (clean.samples.size() != modified.samples.size()) {
    throw Error("snr: length mismatch for clip '" + clean.id + "' (" + std::to_string(clean.samples.size()) +
                " vs " + std::to_string(modified.samples.size()) + ")");
  }
  double signal = 0.0, noise = 0.0;
  for (size_t i = 0; i < clean.samples.size(); ++i) {
    const double d = clean.samples[i] - modified.samples[i];
    signal += clean.samples[i] * clean.samples[i];
    noise += d * d;
  }
  if (signal == 0.0) throw Error("snr: clean clip '" + clean.id + "' is all zeros");
  if (noise == 0.0) return kSnrCapDb;
  return std::min(kSnrCapDb, 10.0 * std::log10(signal / noise));
}

GaussianStats fit_stats(const std::vector<FeatureMatrix>& features) {
  if (features.empty()) throw Error("fit_stats: no feature matrices");
  const Eigen::Index dim = features.front().values.cols();
  Eigen::Index total = 0;
  for (const auto& f : features) {
    if (f.values.cols() != dim) throw Error("fit_stats: coefficient count differs between clips");
    total += f.values.rows();
  }
  if (total <= dim) {
    throw Error("fit_stats: " + std::to_string(total) + " frames is not enough for dimension " + std::to_string(dim));
  }

  GaussianStats stats;
  stats.frame_count = static_cast<size_t>(total);
  stats.mean = VectorXd::Zero(dim);
  for (const auto& f : features) stats.mean += f.values.colwise().sum().transpose();
  stats.mean /= static_cast<double>(total);

  stats.cov = MatrixXd::Zero(dim, dim);
  for (const auto& f : features) {
    MatrixXd centered = f.values.rowwise() - stats.mean.transpose();
    stats.cov.noalias() += centered.transpose() * centered;
  }
  stats.cov /= static_cast<double>(total - 1);
  stats.cov = (stats.cov + stats.cov.transpose()) / 2.0;
  return stats;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size() || a.cov.rows() != b.cov.rows() || a.cov.rows() != a.mean.size()) {
    throw Error("frechet_distance: dimension mismatch");
  }
  const Eigen::Index n = a.mean.size();
  const MatrixXd reg = 1e-10 * MatrixXd::Identity(n, n);
  const MatrixXd sa = a.cov + reg;
  const MatrixXd sb = b.cov + reg;

  const MatrixXd sa_half = sqrtm_psd(sa);
  MatrixXd sandwich = sa_half * sb * sa_half;
  sandwich = (sandwich + sandwich.transpose()) / 2.0;
  const MatrixXd cross = sqrtm_psd(sandwich);

  const double d = (a.mean - b.mean).squaredNorm() + sa.trace() + sb.trace() - 2.0 * cross.trace();
  return std::max(0.0, d);
}

SnrSummary summarize_snr(std::vector<double> values) {
  SnrSummary s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.min = values.front();
  const size_t n = values.size();
  s.median = n % 2 == 1 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  return s;
}

QualityReport dataset_quality_report(const Dataset& clean, const Dataset& protected_set,
                                     const std::vector<BlurReport>& log) {
  if (clean.clips.size() != protected_set.clips.size()) {
    throw Error("quality: datasets differ in size (" + std::to_string(clean.clips.size()) + " vs " +
                std::to_string(protected_set.clips.size()) + ")");
  }
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < protected_set.clips.size(); ++i) index[protected_set.clips[i].id] = i;

  Dataset aligned = protected_set;
  for (size_t i = 0; i < clean.clips.size(); ++i) {
    auto it = index.find(clean.clips[i].id);
    if (it == index.end()) throw Error("quality: clip '" + clean.clips[i].id + "' missing from protected set");
    aligned.clips[i] = protected_set.clips[it->second];
  }

  std::vector<double> snrs(clean.clips.size());
  parallel_for(snrs.size(), [&](size_t i) { snrs[i] = snr_db(clean.clips[i], aligned.clips[i]); });

  const MfccConfig cfg = MfccConfig::for_rate(clean.manifest.sample_rate);
  const GaussianStats clean_stats = fit_stats(mfcc_dataset(clean, cfg));
  const GaussianStats prot_stats = fit_stats(mfcc_dataset(aligned, cfg));

  QualityReport report;
  report.frechet_mfcc = frechet_distance(prot_stats, clean_stats);
  report.snr = summarize_snr(std::move(snrs));
  for (const auto& r : log) report.clamped_samples += r.clamped;
  report.config_hash = cfg.hash();
  report.clips = clean.clips.size();
  return report;
}

std::string quality_report_json(const QualityReport& report) {
  nlohmann::ordered_json doc;
  doc["metric"] = "frechet distance over pooled MFCC frame statistics (not an embedding-based FAD)";
  doc["frechet_mfcc"] = report.frechet_mfcc;
  doc["snr"] = {{"min", report.snr.min}, {"median", report.snr.median}, {"mean", report.snr.mean}};
  doc["clamped_samples"] = report.clamped_samples;
  doc["config_hash"] = report.config_hash;
  doc["clips"] = report.clips;
  return doc.dump(2);
}

void write_quality_report(const QualityReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out << quality_report_json(report) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace pkit
