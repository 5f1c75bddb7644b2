// Copyright 2026 The Sitpose Authors
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

// Windowing, supervision targets and the training loop for the kinematics
// network.

#ifndef SITPOSE_TRAINING_HPP_
#define SITPOSE_TRAINING_HPP_

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "sitpose/body_model.hpp"
#include "sitpose/error.hpp"
#include "sitpose/imu.hpp"
#include "sitpose/kinematics_net.hpp"

namespace sitpose {

struct Window {
  int frame = 0;           // index of the output (current) frame in the sequence
  Eigen::MatrixXd data;    // input_dim x 26
};

inline std::vector<Window> MakeWindows(const std::vector<NormalizedInput>& seq, const WindowSpec& spec = {}) {
  const int total = spec.total();
  const int len = static_cast<int>(seq.size());
  if (len < total) {
    throw Error(ErrorKind::kSequenceTooShort,
                "need at least " + std::to_string(total) + " frames, got " + std::to_string(len));
  }
  std::vector<Window> out;
  out.reserve(static_cast<std::size_t>(len - total + 1));
  for (int t = spec.past; t + spec.future < len; ++t) {
    Window w;
    w.frame = t;
    w.data.resize(kNormalizedInputSize, total);
    for (int k = 0; k < total; ++k) w.data.col(k) = seq[static_cast<std::size_t>(t - spec.past + k)];
    out.push_back(std::move(w));
  }
  return out;
}

struct TrainingSample {
  Eigen::MatrixXd input;   // 48 x 26
  Eigen::MatrixXd leaf;    // 9 x 26
  Eigen::MatrixXd joints;  // 48 x 26
  Eigen::VectorXd pose;    // 96, current frame
};

// Pairs every window of the synthesized IMU stream with targets from the
// motion frames it was synthesized from.
inline std::vector<TrainingSample> BuildTrainingSamples(const KinematicModel& model, const MotionSequence& motion,
                                                        const ImuSequence& imu, const WindowSpec& spec = {}) {
  const int shift = imu.first_frame - motion.first_frame;
  if (shift < 0 || shift + static_cast<int>(imu.frames.size()) > static_cast<int>(motion.frames.size())) {
    throw Error(ErrorKind::kLengthMismatch, "IMU frames do not lie inside the motion sequence");
  }
  const auto windows = MakeWindows(NormalizeSequence(imu), spec);
  std::vector<IntermediateTargets> targets;
  targets.reserve(imu.frames.size());
  for (std::size_t t = 0; t < imu.frames.size(); ++t) {
    targets.push_back(ComputeIntermediateTargets(model, motion.frames[t + static_cast<std::size_t>(shift)]));
  }
  std::vector<TrainingSample> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    TrainingSample s;
    s.input = w.data;
    s.leaf.resize(9, spec.total());
    s.joints.resize(static_cast<Eigen::Index>(3 * model.upper_body().size()), spec.total());
    for (int k = 0; k < spec.total(); ++k) {
      const auto& tg = targets[static_cast<std::size_t>(w.frame - spec.past + k)];
      s.leaf.col(k) = tg.leaf_positions;
      s.joints.col(k) = tg.joint_positions;
    }
    s.pose = PoseTarget6d(model, motion.frames[static_cast<std::size_t>(w.frame + shift)]);
    out.push_back(std::move(s));
  }
  return out;
}

struct TrainConfig {
  int batch_size = 256;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 100;
  std::uint64_t seed = 0;
  double clip_norm = 1.0;  // <= 0 disables clipping
  bool sequential_stages = false;

  void Validate() const {
    if (batch_size <= 0 || !(learning_rate > 0.0) || epochs <= 0 || !(beta1 >= 0.0 && beta1 < 1.0) ||
        !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
      throw Error(ErrorKind::kConfigError, "training hyperparameters must be positive");
    }
  }
};

struct TrainResult {
  NetworkWeights<float> weights;
  std::vector<double> loss;  // mean loss per epoch
};

namespace train_detail {

using Mf = nn::Mat<float>;

struct Batch {
  Mf input;
  Mf leaf;
  Mf joints;
  Mf pose;  // 96 x B
  int size = 0;
};

inline Batch Gather(const std::vector<TrainingSample>& data, const std::vector<std::size_t>& order,
                    std::size_t begin, std::size_t end, int steps) {
  Batch b;
  b.size = static_cast<int>(end - begin);
  const Eigen::Index bs = b.size;
  const auto& first = data[order[begin]];
  b.input.resize(first.input.rows(), steps * bs);
  b.leaf.resize(first.leaf.rows(), steps * bs);
  b.joints.resize(first.joints.rows(), steps * bs);
  b.pose.resize(first.pose.rows(), bs);
  for (Eigen::Index i = 0; i < bs; ++i) {
    const auto& s = data[order[begin + static_cast<std::size_t>(i)]];
    for (int t = 0; t < steps; ++t) {
      const Eigen::Index col = t * bs + i;
      b.input.col(col) = s.input.col(t).cast<float>();
      b.leaf.col(col) = s.leaf.col(t).cast<float>();
      b.joints.col(col) = s.joints.col(t).cast<float>();
    }
    b.pose.col(i) = s.pose.cast<float>();
  }
  return b;
}

// MSE over all entries; writes d(loss)/d(pred) into `grad`.
inline double Mse(const Mf& pred, const Mf& target, Mf& grad) {
  const Mf diff = pred - target;
  const double n = static_cast<double>(diff.size());
  grad = diff * static_cast<float>(2.0 / n);
  return diff.cast<double>().squaredNorm() / n;
}

// Loss and per-stage output gradients for one batch. `only_stage` < 0 means
// every stage contributes.
inline double BatchLoss(const NetworkConfig& cfg, const std::vector<nn::StageCache<float>>& caches, const Batch& b,
                        int only_stage, std::vector<Mf>& douts) {
  const int stages = cfg.StageCount();
  douts.assign(static_cast<std::size_t>(stages), Mf());
  const Eigen::Index cur = static_cast<Eigen::Index>(cfg.window.current_index()) * b.size;
  double loss = 0.0;
  auto final_loss = [&](Mf& dst) {
    const auto& out = caches.back().output;
    Mf g;
    loss += Mse(out.middleCols(cur, b.size), b.pose, g);
    dst = Mf::Zero(out.rows(), out.cols());
    dst.middleCols(cur, b.size) = g;
  };
  if (stages == 1) {
    final_loss(douts[0]);
    return loss;
  }
  if (only_stage < 0 || only_stage == 0) loss += Mse(caches[0].output, b.leaf, douts[0]);
  if (only_stage < 0 || only_stage == 1) loss += Mse(caches[1].output, b.joints, douts[1]);
  if (only_stage < 0 || only_stage == 2) final_loss(douts[2]);
  return loss;
}

class Adam {
 public:
  Adam(const TrainConfig& cfg, Eigen::Index n)
      : cfg_(cfg), m_(nn::Vec<float>::Zero(n)), v_(nn::Vec<float>::Zero(n)) {}

  void Step(nn::Vec<float>& w, const nn::Vec<float>& g, std::size_t lo, std::size_t hi) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const auto b1 = static_cast<float>(cfg_.beta1);
    const auto b2 = static_cast<float>(cfg_.beta2);
    const auto step = static_cast<float>(cfg_.learning_rate / c1);
    const auto eps = static_cast<float>(cfg_.epsilon);
    const auto inv_c2 = static_cast<float>(1.0 / c2);
    const auto n = static_cast<Eigen::Index>(hi - lo);
    const auto s = static_cast<Eigen::Index>(lo);
    auto m = m_.segment(s, n);
    auto v = v_.segment(s, n);
    m = b1 * m + (1.0f - b1) * g.segment(s, n);
    v = b2 * v + (1.0f - b2) * g.segment(s, n).cwiseProduct(g.segment(s, n));
    w.segment(s, n).array() -= step * m.array() / ((v.array() * inv_c2).sqrt() + eps);
  }

 private:
  TrainConfig cfg_;
  nn::Vec<float> m_;
  nn::Vec<float> v_;
  long t_ = 0;
};

}  // namespace train_detail

// Mean loss of the current weights over the whole dataset, no updates.
inline double EvaluateLoss(const NetworkWeights<float>& w, const std::vector<TrainingSample>& data,
                           int batch_size = 256) {
  if (data.empty()) throw Error(ErrorKind::kEmptyDataset, "no training samples");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const int steps = w.config.window.total();
  std::vector<nn::StageCache<float>> caches;
  std::vector<train_detail::Mf> douts;
  double sum = 0.0;
  for (std::size_t b0 = 0; b0 < data.size(); b0 += static_cast<std::size_t>(batch_size)) {
    const std::size_t b1 = std::min(data.size(), b0 + static_cast<std::size_t>(batch_size));
    const auto batch = train_detail::Gather(data, order, b0, b1, steps);
    nn::NetworkForward(w, batch.input, steps, batch.size, caches);
    sum += train_detail::BatchLoss(w.config, caches, batch, -1, douts) * batch.size;
  }
  return sum / static_cast<double>(data.size());
}

// Trains from a fresh seeded initialization, or fine-tunes `init` when given.
// Every parameter is trainable in fine-tune mode.
inline TrainResult Train(const TrainConfig& tc, const NetworkConfig& nc, const std::vector<TrainingSample>& data,
                         const NetworkWeights<float>* init = nullptr) {
  tc.Validate();
  nc.Validate();
  if (data.empty()) throw Error(ErrorKind::kEmptyDataset, "no training samples");
  const int steps = nc.window.total();
  for (const auto& s : data) {
    if (s.input.rows() != nc.input_dim || s.input.cols() != steps || s.pose.size() != nc.output_dim ||
        s.leaf.rows() != nc.leaf_dim || s.joints.rows() != nc.joint_position_dim) {
      throw Error(ErrorKind::kShapeMismatch, "training sample does not match the network configuration");
    }
  }
  std::mt19937_64 rng(tc.seed);
  const std::uint64_t init_seed = rng();
  TrainResult result{init ? *init : NetworkWeights<float>::Initialized(nc, init_seed), {}};
  auto& w = result.weights;
  if (init && w.layout.size() != ParamLayout(nc).size()) {
    throw Error(ErrorKind::kShapeMismatch, "fine-tune weights do not match the network configuration");
  }
  w.config = nc;

  const int stages = nc.StageCount();
  const bool sequential = tc.sequential_stages && stages > 1;
  const int phases = sequential ? stages : 1;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<nn::StageCache<float>> caches;
  std::vector<train_detail::Mf> douts;
  nn::Vec<float> grad(w.values.size());

  for (int phase = 0; phase < phases; ++phase) {
    train_detail::Adam adam(tc, w.values.size());
    const int only = sequential ? phase : -1;
    const auto range = sequential ? w.layout.StageRange(phase)
                                  : std::pair<std::size_t, std::size_t>{0, w.layout.size()};
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      double sum = 0.0;
      for (std::size_t b0 = 0; b0 < data.size(); b0 += static_cast<std::size_t>(tc.batch_size)) {
        const std::size_t b1 = std::min(data.size(), b0 + static_cast<std::size_t>(tc.batch_size));
        const auto batch = train_detail::Gather(data, order, b0, b1, steps);
        nn::NetworkForward(w, batch.input, steps, batch.size, caches);
        const double loss = train_detail::BatchLoss(nc, caches, batch, only, douts);
        if (!std::isfinite(loss)) {
          throw Error(ErrorKind::kNonFiniteLoss, "loss became non-finite at epoch " + std::to_string(epoch) +
                                                     ", batch starting at sample " + std::to_string(b0));
        }
        grad.setZero();
        nn::NetworkBackward(w, caches, douts, steps, batch.size, grad);
        const auto lo = static_cast<Eigen::Index>(range.first);
        const auto n = static_cast<Eigen::Index>(range.second - range.first);
        const double norm = grad.segment(lo, n).cast<double>().norm();
        if (!std::isfinite(norm)) {
          throw Error(ErrorKind::kNonFiniteLoss, "gradient became non-finite at epoch " + std::to_string(epoch));
        }
        if (tc.clip_norm > 0.0 && norm > tc.clip_norm) {
          grad.segment(lo, n) *= static_cast<float>(tc.clip_norm / norm);
        }
        adam.Step(w.values, grad, range.first, range.second);
        sum += loss * batch.size;
      }
      result.loss.push_back(sum / static_cast<double>(data.size()));
    }
  }
  if (!w.AllFinite()) throw Error(ErrorKind::kNonFiniteLoss, "weights became non-finite");
  return result;
}

}  // namespace sitpose

#endif  // SITPOSE_TRAINING_HPP_
