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
#include <variant>
#include <vector>

#include "pkit/audio_io.hpp"
#include "pkit/core.hpp"

namespace pkit {

enum class ModelKind { kConv, kMlp };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

/// Raw-waveform classifier: conv(8 channels, kernel 64, stride 16) -> ReLU
/// -> global average pool -> dense(8 -> N) -> softmax.
struct TinyConvNet {
  static constexpr Eigen::Index kChannels = 8;
  static constexpr Eigen::Index kKernel = 64;
  static constexpr Eigen::Index kStride = 16;

  uint32_t class_count = 0;
  uint32_t sample_rate = 0;
  uint32_t input_len = 0;  // clips are truncated or zero-padded to this

  MatrixXd conv_w;   // kChannels x kKernel
  VectorXd conv_b;   // kChannels
  MatrixXd dense_w;  // N x kChannels
  VectorXd dense_b;  // N

  Eigen::Index positions() const { return (input_len - kKernel) / kStride + 1; }
};

/// MFCC classifier: mean-pooled MFCC (13) -> standardize -> dense 64 -> ReLU
/// -> dense N -> softmax. The standardization is fitted on the training
/// inputs and is not trained.
struct TinyMlp {
  static constexpr Eigen::Index kInputs = 13;
  static constexpr Eigen::Index kHidden = 64;

  uint32_t class_count = 0;
  uint32_t sample_rate = 0;

  VectorXd in_mean;   // kInputs
  VectorXd in_scale;  // kInputs, 1 / std
  MatrixXd w1;        // kHidden x kInputs
  VectorXd b1;
  MatrixXd w2;  // N x kHidden
  VectorXd b2;
};

using Model = std::variant<TinyConvNet, TinyMlp>;

ModelKind kind_of(const Model& model);
uint32_t class_count_of(const Model& model);

/// Flat views over every trainable tensor, in a fixed order.
std::vector<Eigen::Map<VectorXd>> parameter_views(Model& model);
size_t parameter_count(const Model& model);

/// Fresh model, weights and biases uniform in +-1/sqrt(fan_in) from `seed`.
Model init_model(ModelKind kind, uint32_t class_count, uint32_t sample_rate, uint64_t seed,
                 uint32_t input_len = 0);

/// Inputs as columns: padded/truncated waveforms for the conv net,
/// mean-pooled MFCC vectors for the MLP.
MatrixXd prepare_inputs(ModelKind kind, const Dataset& dataset, uint32_t input_len);
MatrixXd prepare_inputs(const Model& model, const Dataset& dataset);
std::vector<uint32_t> labels_of(const Dataset& dataset);

/// Softmax probabilities, N x batch.
MatrixXd forward(const Model& model, const MatrixXd& inputs);

struct LossGradient {
  double loss = 0.0;  // mean cross-entropy over the batch
  Model gradient;     // same shapes as the model
};

/// Mean cross-entropy and its exact gradient. Throws on non-finite
/// activations.
LossGradient backward(const Model& model, const MatrixXd& inputs, std::span<const uint32_t> labels);

double cross_entropy(const MatrixXd& probs, std::span<const uint32_t> labels);

struct TrainConfig {
  uint32_t epochs = 30;
  uint32_t batch_size = 128;
  double learning_rate = 0.01;
  uint64_t seed = 0;
  bool shuffle = true;

  void validate() const;
};

struct EpochStats {
  uint32_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> history;
};

/// Plain minibatch SGD from `init`. Single-threaded, so the weights are a
/// pure function of (inputs, labels, cfg).
TrainResult train(Model init, const MatrixXd& inputs, std::span<const uint32_t> labels, const TrainConfig& cfg);

/// Builds the model (and, for the MLP, its input standardization) from the
/// dataset and trains it. The conv net sees one second of audio.
TrainResult train(ModelKind kind, const Dataset& dataset, const TrainConfig& cfg);

struct Evaluation {
  double accuracy = 0.0;
  Eigen::Matrix<int64_t, Eigen::Dynamic, Eigen::Dynamic> confusion;  // rows: true class
};

Evaluation evaluate(const Model& model, const MatrixXd& inputs, std::span<const uint32_t> labels);
Evaluation evaluate(const Model& model, const Dataset& dataset);

// Checkpoint: "TNN1", arch tag, class count, sample rate, input length,
// tensor count, then per tensor rows, cols and little-endian doubles.
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

void write_history_csv(const std::vector<EpochStats>& history, const std::filesystem::path& path);

}  // namespace pkit
