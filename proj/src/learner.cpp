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

#include "pkit/learner.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "pkit/features.hpp"

namespace pkit {

namespace {

using ConstStridedFrames = Eigen::Map<const MatrixXd, 0, Eigen::OuterStride<>>;

ConstStridedFrames conv_frames(const TinyConvNet& net, const double* column) {
  return ConstStridedFrames(column, TinyConvNet::kKernel, net.positions(),
                            Eigen::OuterStride<>(TinyConvNet::kStride));
}

void fill_uniform(Eigen::Ref<MatrixXd> m, double bound, SplitMix64& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
}

MatrixXd softmax_columns(MatrixXd logits) {
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    auto col = logits.col(j);
    col.array() -= col.maxCoeff();
    col = col.array().exp().matrix();
    col /= col.sum();
  }
  return logits;
}

void check_finite(const MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(std::string("non-finite values in ") + what + " (max |x| = " +
                std::to_string(m.array().isFinite().select(m.cwiseAbs(), 0.0).maxCoeff()) + ")");
  }
}

void check_inputs(const Model& model, const MatrixXd& inputs) {
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        Eigen::Index want;
        if constexpr (std::is_same_v<M, TinyConvNet>) {
          want = m.input_len;
        } else {
          want = TinyMlp::kInputs;
        }
        if (inputs.rows() != want) {
          throw Error("model expects inputs of " + std::to_string(want) + " rows, got " +
                      std::to_string(inputs.rows()));
        }
      },
      model);
}

MatrixXd conv_hidden(const TinyConvNet& net, const MatrixXd& inputs) {
  MatrixXd pooled(TinyConvNet::kChannels, inputs.cols());
  for (Eigen::Index s = 0; s < inputs.cols(); ++s) {
    MatrixXd z = net.conv_w * conv_frames(net, inputs.col(s).data());
    z.colwise() += net.conv_b;
    pooled.col(s) = z.cwiseMax(0.0).rowwise().mean();
  }
  return pooled;
}

MatrixXd mlp_standardize(const TinyMlp& net, const MatrixXd& inputs) {
  return (inputs.colwise() - net.in_mean).array().colwise() * net.in_scale.array();
}

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::kConv ? "conv" : "mlp"; }

ModelKind parse_model_kind(const std::string& text) {
  if (text == "conv" || text == "cnn") return ModelKind::kConv;
  if (text == "mlp") return ModelKind::kMlp;
  throw Error("unknown model kind '" + text + "'");
}

ModelKind kind_of(const Model& model) {
  return std::holds_alternative<TinyConvNet>(model) ? ModelKind::kConv : ModelKind::kMlp;
}

uint32_t class_count_of(const Model& model) {
  return std::visit([](const auto& m) { return m.class_count; }, model);
}

std::vector<Eigen::Map<VectorXd>> parameter_views(Model& model) {
  auto view = [](auto& t) { return Eigen::Map<VectorXd>(t.data(), t.size()); };
  if (auto* c = std::get_if<TinyConvNet>(&model)) {
    return {view(c->conv_w), view(c->conv_b), view(c->dense_w), view(c->dense_b)};
  }
  auto& m = std::get<TinyMlp>(model);
  return {view(m.w1), view(m.b1), view(m.w2), view(m.b2)};
}

size_t parameter_count(const Model& model) {
  Model copy = model;
  size_t n = 0;
  for (const auto& v : parameter_views(copy)) n += static_cast<size_t>(v.size());
  return n;
}

Model init_model(ModelKind kind, uint32_t class_count, uint32_t sample_rate, uint64_t seed,
                 uint32_t input_len) {
  if (class_count < 2) throw Error("init_model: class_count must be >= 2");
  SplitMix64 rng(seed);
  const auto n = static_cast<Eigen::Index>(class_count);
  if (kind == ModelKind::kConv) {
    if (input_len < TinyConvNet::kKernel) throw Error("init_model: input length shorter than conv kernel");
    TinyConvNet net;
    net.class_count = class_count;
    net.sample_rate = sample_rate;
    net.input_len = input_len;
    net.conv_w.resize(TinyConvNet::kChannels, TinyConvNet::kKernel);
    net.conv_b.resize(TinyConvNet::kChannels);
    net.dense_w.resize(n, TinyConvNet::kChannels);
    net.dense_b.resize(n);
    const double conv_bound = 1.0 / std::sqrt(static_cast<double>(TinyConvNet::kKernel));
    const double dense_bound = 1.0 / std::sqrt(static_cast<double>(TinyConvNet::kChannels));
    fill_uniform(net.conv_w, conv_bound, rng);
    fill_uniform(net.conv_b, conv_bound, rng);
    fill_uniform(net.dense_w, dense_bound, rng);
    fill_uniform(net.dense_b, dense_bound, rng);
    return net;
  }
  TinyMlp net;
  net.class_count = class_count;
  net.sample_rate = sample_rate;
  net.in_mean = VectorXd::Zero(TinyMlp::kInputs);
  net.in_scale = VectorXd::Ones(TinyMlp::kInputs);
  net.w1.resize(TinyMlp::kHidden, TinyMlp::kInputs);
  net.b1.resize(TinyMlp::kHidden);
  net.w2.resize(n, TinyMlp::kHidden);
  net.b2.resize(n);
  const double b1 = 1.0 / std::sqrt(static_cast<double>(TinyMlp::kInputs));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(TinyMlp::kHidden));
  fill_uniform(net.w1, b1, rng);
  fill_uniform(net.b1, b1, rng);
  fill_uniform(net.w2, b2, rng);
  fill_uniform(net.b2, b2, rng);
  return net;
}

MatrixXd prepare_inputs(ModelKind kind, const Dataset& dataset, uint32_t input_len) {
  const auto n = static_cast<Eigen::Index>(dataset.clips.size());
  if (kind == ModelKind::kConv) {
    MatrixXd x = MatrixXd::Zero(input_len, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& s = dataset.clips[static_cast<size_t>(i)].samples;
      const size_t len = std::min<size_t>(s.size(), input_len);
      x.col(i).head(static_cast<Eigen::Index>(len)) = Eigen::Map<const VectorXd>(s.data(), static_cast<Eigen::Index>(len));
    }
    return x;
  }
  const MfccConfig cfg = MfccConfig::for_rate(dataset.manifest.sample_rate);
  if (cfg.n_coeffs != static_cast<size_t>(TinyMlp::kInputs)) throw Error("mlp expects 13 MFCC coefficients");
  const auto features = mfcc_dataset(dataset, cfg);
  MatrixXd x(TinyMlp::kInputs, n);
  for (Eigen::Index i = 0; i < n; ++i) x.col(i) = features[static_cast<size_t>(i)].values.colwise().mean().transpose();
  return x;
}

MatrixXd prepare_inputs(const Model& model, const Dataset& dataset) {
  if (const auto* c = std::get_if<TinyConvNet>(&model)) return prepare_inputs(ModelKind::kConv, dataset, c->input_len);
  return prepare_inputs(ModelKind::kMlp, dataset, 0);
}

std::vector<uint32_t> labels_of(const Dataset& dataset) {
  std::vector<uint32_t> labels;
  labels.reserve(dataset.clips.size());
  for (const auto& clip : dataset.clips) labels.push_back(clip.label);
  return labels;
}

MatrixXd forward(const Model& model, const MatrixXd& inputs) {
  check_inputs(model, inputs);
  MatrixXd logits;
  if (const auto* c = std::get_if<TinyConvNet>(&model)) {
    logits = c->dense_w * conv_hidden(*c, inputs);
    logits.colwise() += c->dense_b;
  } else {
    const auto& m = std::get<TinyMlp>(model);
    MatrixXd a1 = m.w1 * mlp_standardize(m, inputs);
    a1.colwise() += m.b1;
    logits = m.w2 * a1.cwiseMax(0.0);
    logits.colwise() += m.b2;
  }
  check_finite(logits, "logits");
  return softmax_columns(std::move(logits));
}

double cross_entropy(const MatrixXd& probs, std::span<const uint32_t> labels) {
  if (static_cast<size_t>(probs.cols()) != labels.size()) throw Error("cross_entropy: label count mismatch");
  double loss = 0.0;
  for (Eigen::Index s = 0; s < probs.cols(); ++s) {
    loss -= std::log(std::max(probs(labels[static_cast<size_t>(s)], s), 1e-300));
  }
  return loss / static_cast<double>(probs.cols());
}

LossGradient backward(const Model& model, const MatrixXd& inputs, std::span<const uint32_t> labels) {
  check_inputs(model, inputs);
  const Eigen::Index batch = inputs.cols();
  if (batch == 0 || static_cast<size_t>(batch) != labels.size()) throw Error("backward: batch/label size mismatch");
  const uint32_t n_classes = class_count_of(model);
  for (uint32_t y : labels) {
    if (y >= n_classes) throw Error("backward: label out of range");
  }

  LossGradient out;
  out.gradient = model;
  for (auto& v : parameter_views(out.gradient)) v.setZero();

  auto output_grad = [&](MatrixXd logits) {
    check_finite(logits, "logits");
    MatrixXd probs = softmax_columns(std::move(logits));
    out.loss = cross_entropy(probs, labels);
    for (Eigen::Index s = 0; s < batch; ++s) probs(labels[static_cast<size_t>(s)], s) -= 1.0;
    return MatrixXd(probs / static_cast<double>(batch));
  };

  if (const auto* c = std::get_if<TinyConvNet>(&model)) {
    auto& g = std::get<TinyConvNet>(out.gradient);
    const MatrixXd pooled = conv_hidden(*c, inputs);
    MatrixXd logits = c->dense_w * pooled;
    logits.colwise() += c->dense_b;
    const MatrixXd g_logits = output_grad(std::move(logits));

    g.dense_w.noalias() = g_logits * pooled.transpose();
    g.dense_b = g_logits.rowwise().sum();
    const MatrixXd g_pooled = c->dense_w.transpose() * g_logits;  // channels x batch
    const double inv_positions = 1.0 / static_cast<double>(c->positions());
    for (Eigen::Index s = 0; s < batch; ++s) {
      const auto frames = conv_frames(*c, inputs.col(s).data());
      MatrixXd z = c->conv_w * frames;
      z.colwise() += c->conv_b;
      // d pooled / d z = 1/T where z > 0.
      MatrixXd g_z = (z.array() > 0.0).cast<double>().colwise() * (g_pooled.col(s).array() * inv_positions);
      g.conv_w.noalias() += g_z * frames.transpose();
      g.conv_b += g_z.rowwise().sum();
    }
  } else {
    const auto& m = std::get<TinyMlp>(model);
    auto& g = std::get<TinyMlp>(out.gradient);
    const MatrixXd x = mlp_standardize(m, inputs);
    MatrixXd a1 = m.w1 * x;
    a1.colwise() += m.b1;
    const MatrixXd h = a1.cwiseMax(0.0);
    MatrixXd logits = m.w2 * h;
    logits.colwise() += m.b2;
    const MatrixXd g_logits = output_grad(std::move(logits));

    g.w2.noalias() = g_logits * h.transpose();
    g.b2 = g_logits.rowwise().sum();
    const MatrixXd g_a1 = (m.w2.transpose() * g_logits).cwiseProduct((a1.array() > 0.0).cast<double>().matrix());
    g.w1.noalias() = g_a1 * x.transpose();
    g.b1 = g_a1.rowwise().sum();
  }
  return out;
}

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0 || !(learning_rate > 0.0)) {
    throw Error("train config: epochs, batch_size and learning_rate must be positive");
  }
}

TrainResult train(Model init, const MatrixXd& inputs, std::span<const uint32_t> labels, const TrainConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<size_t>(inputs.cols());
  if (n == 0 || labels.size() != n) throw Error("train: empty dataset or label count mismatch");

  TrainResult result{std::move(init), {}};
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  MatrixXd batch_x;
  std::vector<uint32_t> batch_y;

  for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      SplitMix64 rng(substream_seed(cfg.seed, epoch));
      for (size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    }
    double loss_sum = 0.0;
    size_t correct = 0;
    for (size_t start = 0; start < n; start += cfg.batch_size) {
      const size_t len = std::min<size_t>(cfg.batch_size, n - start);
      batch_x.resize(inputs.rows(), static_cast<Eigen::Index>(len));
      batch_y.resize(len);
      for (size_t i = 0; i < len; ++i) {
        batch_x.col(static_cast<Eigen::Index>(i)) = inputs.col(static_cast<Eigen::Index>(order[start + i]));
        batch_y[i] = labels[order[start + i]];
      }
      const MatrixXd probs = forward(result.model, batch_x);
      for (size_t i = 0; i < len; ++i) {
        Eigen::Index pred;
        probs.col(static_cast<Eigen::Index>(i)).maxCoeff(&pred);
        if (static_cast<uint32_t>(pred) == batch_y[i]) ++correct;
      }
      LossGradient lg = backward(result.model, batch_x, batch_y);
      loss_sum += lg.loss * static_cast<double>(len);

      auto params = parameter_views(result.model);
      auto grads = parameter_views(lg.gradient);
      for (size_t t = 0; t < params.size(); ++t) params[t] -= cfg.learning_rate * grads[t];
    }
    EpochStats stats{epoch + 1, loss_sum / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
    if (!std::isfinite(stats.loss) || stats.loss > 1e3) {
      throw Error("train: diverged at epoch " + std::to_string(stats.epoch) + " (loss " + std::to_string(stats.loss) + ")");
    }
    result.history.push_back(stats);
  }
  return result;
}

TrainResult train(ModelKind kind, const Dataset& dataset, const TrainConfig& cfg) {
  const auto& m = dataset.manifest;
  const uint32_t input_len = m.sample_rate;  // one second
  Model init = init_model(kind, m.class_count, m.sample_rate, cfg.seed, input_len);
  const MatrixXd inputs = prepare_inputs(kind, dataset, input_len);
  if (auto* mlp = std::get_if<TinyMlp>(&init)) {
    mlp->in_mean = inputs.rowwise().mean();
    const VectorXd var =
        (inputs.colwise() - mlp->in_mean).array().square().rowwise().sum() / static_cast<double>(inputs.cols());
    mlp->in_scale = var.unaryExpr([](double v) { return 1.0 / std::max(std::sqrt(v), 1e-8); });
  }
  const auto labels = labels_of(dataset);
  return train(std::move(init), inputs, labels, cfg);
}

Evaluation evaluate(const Model& model, const MatrixXd& inputs, std::span<const uint32_t> labels) {
  const auto n = static_cast<Eigen::Index>(class_count_of(model));
  if (static_cast<size_t>(inputs.cols()) != labels.size()) throw Error("evaluate: label count mismatch");
  Evaluation ev;
  ev.confusion = decltype(ev.confusion)::Zero(n, n);
  if (labels.empty()) return ev;
  const MatrixXd probs = forward(model, inputs);
  int64_t correct = 0;
  for (Eigen::Index s = 0; s < probs.cols(); ++s) {
    Eigen::Index pred;
    probs.col(s).maxCoeff(&pred);
    const auto truth = static_cast<Eigen::Index>(labels[static_cast<size_t>(s)]);
    if (truth >= n) throw Error("evaluate: label out of range");
    ++ev.confusion(truth, pred);
    if (pred == truth) ++correct;
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  return ev;
}

Evaluation evaluate(const Model& model, const Dataset& dataset) {
  if (dataset.manifest.class_count != class_count_of(model)) {
    throw Error("evaluate: dataset has " + std::to_string(dataset.manifest.class_count) + " classes, model has " +
                std::to_string(class_count_of(model)));
  }
  const auto labels = labels_of(dataset);
  return evaluate(model, prepare_inputs(model, dataset), labels);
}

namespace {

void put_u32(std::ostream& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>(v >> (8 * i)));
}

void put_f64(std::ostream& out, double d) {
  const auto v = std::bit_cast<uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>(v >> (8 * i)));
}

uint64_t get_le(std::istream& in, int bytes) {
  uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == EOF) throw Error("checkpoint: truncated file");
    v |= static_cast<uint64_t>(static_cast<uint8_t>(c)) << (8 * i);
  }
  return v;
}

template <class M>
void put_tensor(std::ostream& out, const M& t) {
  put_u32(out, static_cast<uint32_t>(t.rows()));
  put_u32(out, static_cast<uint32_t>(t.cols()));
  for (Eigen::Index i = 0; i < t.size(); ++i) put_f64(out, t.data()[i]);
}

template <class M>
void get_tensor(std::istream& in, M& t, Eigen::Index rows, Eigen::Index cols) {
  const auto r = static_cast<Eigen::Index>(get_le(in, 4));
  const auto c = static_cast<Eigen::Index>(get_le(in, 4));
  if (r != rows || c != cols) throw Error("checkpoint: tensor shape mismatch");
  if constexpr (M::ColsAtCompileTime == 1) {
    t.resize(rows);
  } else {
    t.resize(rows, cols);
  }
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = std::bit_cast<double>(get_le(in, 8));
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write("TNN1", 4);
  if (const auto* c = std::get_if<TinyConvNet>(&model)) {
    put_u32(out, 1);
    put_u32(out, c->class_count);
    put_u32(out, c->sample_rate);
    put_u32(out, c->input_len);
    put_u32(out, 4);
    put_tensor(out, c->conv_w);
    put_tensor(out, c->conv_b);
    put_tensor(out, c->dense_w);
    put_tensor(out, c->dense_b);
  } else {
    const auto& m = std::get<TinyMlp>(model);
    put_u32(out, 2);
    put_u32(out, m.class_count);
    put_u32(out, m.sample_rate);
    put_u32(out, 0);
    put_u32(out, 6);
    put_tensor(out, m.in_mean);
    put_tensor(out, m.in_scale);
    put_tensor(out, m.w1);
    put_tensor(out, m.b1);
    put_tensor(out, m.w2);
    put_tensor(out, m.b2);
  }
  if (!out) throw Error("write failed: " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "TNN1", 4) != 0) throw Error("checkpoint: bad magic in " + path.string());
  const auto arch = static_cast<uint32_t>(get_le(in, 4));
  const auto classes = static_cast<uint32_t>(get_le(in, 4));
  const auto rate = static_cast<uint32_t>(get_le(in, 4));
  const auto input_len = static_cast<uint32_t>(get_le(in, 4));
  const auto tensors = static_cast<uint32_t>(get_le(in, 4));
  const auto n = static_cast<Eigen::Index>(classes);
  if (arch == 1 && tensors == 4) {
    TinyConvNet c;
    c.class_count = classes;
    c.sample_rate = rate;
    c.input_len = input_len;
    get_tensor(in, c.conv_w, TinyConvNet::kChannels, TinyConvNet::kKernel);
    get_tensor(in, c.conv_b, TinyConvNet::kChannels, 1);
    get_tensor(in, c.dense_w, n, TinyConvNet::kChannels);
    get_tensor(in, c.dense_b, n, 1);
    return c;
  }
  if (arch == 2 && tensors == 6) {
    TinyMlp m;
    m.class_count = classes;
    m.sample_rate = rate;
    get_tensor(in, m.in_mean, TinyMlp::kInputs, 1);
    get_tensor(in, m.in_scale, TinyMlp::kInputs, 1);
    get_tensor(in, m.w1, TinyMlp::kHidden, TinyMlp::kInputs);
    get_tensor(in, m.b1, TinyMlp::kHidden, 1);
    get_tensor(in, m.w2, n, TinyMlp::kHidden);
    get_tensor(in, m.b2, n, 1);
    return m;
  }
  throw Error("checkpoint: unknown architecture tag " + std::to_string(arch));
}

void write_history_csv(const std::vector<EpochStats>& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write history " + path.string());
  out << "epoch,loss,acc\n";
  out.precision(17);
  for (const auto& e : history) out << e.epoch << ',' << e.loss << ',' << e.accuracy << '\n';
}

}  // namespace pkit
