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

// Bidirectional recurrent kinematics network: normalized IMU windows in,
// 16 joint rotations in 6D form out.
//
// Every stage is: ReLU dense lift to the hidden size, two bidirectional LSTM
// layers, and a linear head applied at every timestep. The three-stage
// variant chains leaf-joint positions -> upper-body joint positions -> pose,
// feeding each stage the raw input concatenated with the previous output.

#ifndef SITPOSE_KINEMATICS_NET_HPP_
#define SITPOSE_KINEMATICS_NET_HPP_

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sitpose/body_model.hpp"
#include "sitpose/error.hpp"
#include "sitpose/imu.hpp"
#include "sitpose/lstm.hpp"
#include "sitpose/rotation.hpp"

namespace sitpose {

enum class NetworkVariant { kSingleStage = 0, kThreeStage = 1 };

struct WindowSpec {
  int past = 20;
  int current = 1;
  int future = 5;

  int total() const { return past + current + future; }
  int current_index() const { return past; }
};

struct StageShape {
  int input = 0;
  int hidden = 0;
  int output = 0;
};

struct NetworkConfig {
  NetworkVariant variant = NetworkVariant::kThreeStage;
  std::vector<int> hidden = {256, 64, 128};
  int input_dim = kNormalizedInputSize;
  int output_dim = 6 * static_cast<int>(kUpperBodyJointCount);
  int leaf_dim = 9;                                               // head, wrists
  int joint_position_dim = 3 * static_cast<int>(kUpperBodyJointCount);
  WindowSpec window;

  static NetworkConfig SingleStage(int hidden_dim = 256) {
    NetworkConfig c;
    c.variant = NetworkVariant::kSingleStage;
    c.hidden = {hidden_dim};
    return c;
  }
  static NetworkConfig ThreeStage(int h1 = 256, int h2 = 64, int h3 = 128) {
    NetworkConfig c;
    c.variant = NetworkVariant::kThreeStage;
    c.hidden = {h1, h2, h3};
    return c;
  }

  int StageCount() const { return variant == NetworkVariant::kSingleStage ? 1 : 3; }

  StageShape Stage(int s) const {
    if (variant == NetworkVariant::kSingleStage) return {input_dim, hidden[0], output_dim};
    switch (s) {
      case 0: return {input_dim, hidden[0], leaf_dim};
      case 1: return {input_dim + leaf_dim, hidden[1], joint_position_dim};
      default: return {input_dim + joint_position_dim, hidden[2], output_dim};
    }
  }

  void Validate() const {
    if (static_cast<int>(hidden.size()) != StageCount()) {
      throw Error(ErrorKind::kConfigError, "one hidden size per stage is required");
    }
    for (int h : hidden) {
      if (h <= 0) throw Error(ErrorKind::kConfigError, "hidden sizes must be positive");
    }
    if (input_dim <= 0 || output_dim <= 0 || output_dim % 6 != 0 || leaf_dim <= 0 || joint_position_dim <= 0) {
      throw Error(ErrorKind::kConfigError, "network dimensions must be positive");
    }
    if (window.past < 0 || window.current != 1 || window.future < 0 || window.total() != 26) {
      throw Error(ErrorKind::kConfigError, "window must be past + 1 + future = 26 frames");
    }
  }
};

struct ParamBlock {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  int fan_in = 1;
};

// Flat parameter layout. Per stage, in order: lift.w lift.b, then for layer
// l in {0, 1} and direction d in {fwd, bwd}: wx wh b, then head.w head.b.
class ParamLayout {
 public:
  static constexpr int kBlocksPerStage = 16;

  explicit ParamLayout(const NetworkConfig& cfg) {
    cfg.Validate();
    for (int s = 0; s < cfg.StageCount(); ++s) {
      const StageShape sh = cfg.Stage(s);
      const std::string p = "stage" + std::to_string(s) + ".";
      const int h = sh.hidden;
      Add(p + "lift.weight", h, sh.input, sh.input);
      Add(p + "lift.bias", h, 1, sh.input);
      for (int l = 0; l < 2; ++l) {
        const int in = l == 0 ? h : 2 * h;
        for (const char* dir : {"fwd", "bwd"}) {
          const std::string q = p + "lstm" + std::to_string(l) + "." + dir + ".";
          Add(q + "wx", 4 * h, in, h);
          Add(q + "wh", 4 * h, h, h);
          Add(q + "bias", 4 * h, 1, h);
        }
      }
      Add(p + "head.weight", sh.output, 2 * h, 2 * h);
      Add(p + "head.bias", sh.output, 1, 2 * h);
    }
  }

  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  const ParamBlock& block(int stage, int index) const {
    return blocks_[static_cast<std::size_t>(stage * kBlocksPerStage + index)];
  }
  std::size_t size() const { return size_; }

  // Range of flat indices owned by a stage.
  std::pair<std::size_t, std::size_t> StageRange(int stage) const {
    const auto& first = block(stage, 0);
    const auto& last = block(stage, kBlocksPerStage - 1);
    return {first.offset, last.offset + static_cast<std::size_t>(last.rows * last.cols)};
  }

 private:
  void Add(std::string name, int rows, int cols, int fan_in) {
    blocks_.push_back({std::move(name), rows, cols, size_, fan_in});
    size_ += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }
  std::vector<ParamBlock> blocks_;
  std::size_t size_ = 0;
};

namespace nn {

// Block indices within a stage.
enum StageBlock : int {
  kLiftW = 0,
  kLiftB = 1,
  kLstmBase = 2,  // + 6 * layer + 3 * direction + {0 wx, 1 wh, 2 b}
  kHeadW = 14,
  kHeadB = 15,
};

}  // namespace nn

template <class T>
struct NetworkWeights {
  NetworkConfig config;
  ParamLayout layout;
  nn::Vec<T> values;
  std::uint64_t init_seed = 0;

  explicit NetworkWeights(const NetworkConfig& cfg)
      : config(cfg), layout(cfg), values(nn::Vec<T>::Zero(static_cast<Eigen::Index>(layout.size()))) {}

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every block.
  static NetworkWeights Initialized(const NetworkConfig& cfg, std::uint64_t seed) {
    NetworkWeights w(cfg);
    w.init_seed = seed;
    std::mt19937_64 rng(seed);
    for (const auto& b : w.layout.blocks()) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(b.fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      const std::size_t n = static_cast<std::size_t>(b.rows * b.cols);
      for (std::size_t i = 0; i < n; ++i) {
        w.values(static_cast<Eigen::Index>(b.offset + i)) = static_cast<T>(dist(rng));
      }
    }
    return w;
  }

  nn::ConstMap<T> Block(const ParamBlock& b) const {
    return nn::ConstMap<T>(values.data() + b.offset, b.rows, b.cols);
  }
  nn::ConstMap<T> Block(int stage, int index) const { return Block(layout.block(stage, index)); }

  bool AllFinite() const { return values.allFinite(); }
};

namespace nn {

template <class T>
LstmParams<T> StageLstm(const NetworkWeights<T>& w, int stage, int layer, int dir) {
  const int base = kLstmBase + 6 * layer + 3 * dir;
  return {w.Block(stage, base), w.Block(stage, base + 1), w.Block(stage, base + 2)};
}

template <class T>
LstmGrads<T> StageLstmGrads(const ParamLayout& layout, Vec<T>& grad, int stage, int layer, int dir) {
  const int base = kLstmBase + 6 * layer + 3 * dir;
  auto map = [&](int i) {
    const auto& b = layout.block(stage, base + i);
    return MutMap<T>(grad.data() + b.offset, b.rows, b.cols);
  };
  return {map(0), map(1), map(2)};
}

template <class T>
struct BiLayerCache {
  LstmCache<T> fwd;
  LstmCache<T> bwd;
  Mat<T> out;  // [h_fwd; h_bwd], 2H x TB
};

template <class T>
struct StageCache {
  Mat<T> input;
  Mat<T> lift_pre;
  Mat<T> lifted;
  BiLayerCache<T> layer[2];
  Mat<T> output;
};

template <class T>
void BiLayerForward(const NetworkWeights<T>& w, int stage, int layer, const Mat<T>& x, int steps, int batch,
                    BiLayerCache<T>& c) {
  LstmForward(StageLstm(w, stage, layer, 0), x, steps, batch, false, c.fwd);
  LstmForward(StageLstm(w, stage, layer, 1), x, steps, batch, true, c.bwd);
  const Eigen::Index h = c.fwd.hidden.rows();
  c.out.resize(2 * h, x.cols());
  c.out.topRows(h) = c.fwd.hidden;
  c.out.bottomRows(h) = c.bwd.hidden;
}

template <class T>
void StageForward(const NetworkWeights<T>& w, int stage, const Mat<T>& x, int steps, int batch,
                  StageCache<T>& c) {
  c.input = x;
  c.lift_pre.noalias() = w.Block(stage, kLiftW) * x;
  c.lift_pre.colwise() += w.Block(stage, kLiftB).col(0);
  c.lifted = c.lift_pre.cwiseMax(T(0));
  BiLayerForward(w, stage, 0, c.lifted, steps, batch, c.layer[0]);
  BiLayerForward(w, stage, 1, c.layer[0].out, steps, batch, c.layer[1]);
  c.output.noalias() = w.Block(stage, kHeadW) * c.layer[1].out;
  c.output.colwise() += w.Block(stage, kHeadB).col(0);
}

template <class T>
void BiLayerBackward(const NetworkWeights<T>& w, int stage, int layer, const Mat<T>& x, const BiLayerCache<T>& c,
                     const Mat<T>& dout, int steps, int batch, Vec<T>& grad, Mat<T>& dx) {
  const Eigen::Index h = c.fwd.hidden.rows();
  auto gf = StageLstmGrads(w.layout, grad, stage, layer, 0);
  auto gb = StageLstmGrads(w.layout, grad, stage, layer, 1);
  Mat<T> dx_b;
  LstmBackward(StageLstm(w, stage, layer, 0), x, c.fwd, Mat<T>(dout.topRows(h)), steps, batch, false, gf, dx);
  LstmBackward(StageLstm(w, stage, layer, 1), x, c.bwd, Mat<T>(dout.bottomRows(h)), steps, batch, true, gb, dx_b);
  dx += dx_b;
}

// Accumulates parameter gradients of `stage` and returns d(loss)/d(input).
template <class T>
Mat<T> StageBackward(const NetworkWeights<T>& w, int stage, const StageCache<T>& c, const Mat<T>& dout,
                     int steps, int batch, Vec<T>& grad) {
  const auto& layout = w.layout;
  auto gmap = [&](int idx) {
    const auto& b = layout.block(stage, idx);
    return MutMap<T>(grad.data() + b.offset, b.rows, b.cols);
  };
  gmap(kHeadW).noalias() += dout * c.layer[1].out.transpose();
  gmap(kHeadB).col(0) += dout.rowwise().sum();
  const Mat<T> d_l1 = w.Block(stage, kHeadW).transpose() * dout;
  Mat<T> d_l0;
  BiLayerBackward(w, stage, 1, c.layer[0].out, c.layer[1], d_l1, steps, batch, grad, d_l0);
  Mat<T> d_lift;
  BiLayerBackward(w, stage, 0, c.lifted, c.layer[0], d_l0, steps, batch, grad, d_lift);
  d_lift = (c.lift_pre.array() > T(0)).select(d_lift, T(0));
  gmap(kLiftW).noalias() += d_lift * c.input.transpose();
  gmap(kLiftB).col(0) += d_lift.rowwise().sum();
  return w.Block(stage, kLiftW).transpose() * d_lift;
}

// Forward pass over every stage; `caches` is resized to the stage count.
template <class T>
const Mat<T>& NetworkForward(const NetworkWeights<T>& w, const Mat<T>& x, int steps, int batch,
                             std::vector<StageCache<T>>& caches) {
  const int stages = w.config.StageCount();
  caches.resize(static_cast<std::size_t>(stages));
  if (x.rows() != w.config.input_dim || x.cols() != static_cast<Eigen::Index>(steps) * batch) {
    throw Error(ErrorKind::kShapeMismatch, "network input has the wrong shape");
  }
  StageForward(w, 0, x, steps, batch, caches[0]);
  for (int s = 1; s < stages; ++s) {
    const Mat<T>& prev = caches[static_cast<std::size_t>(s - 1)].output;
    Mat<T> in(x.rows() + prev.rows(), x.cols());
    in.topRows(x.rows()) = x;
    in.bottomRows(prev.rows()) = prev;
    StageForward(w, s, in, steps, batch, caches[static_cast<std::size_t>(s)]);
  }
  return caches.back().output;
}

// Backward through all stages. `douts[s]` is the loss gradient w.r.t. stage
// s output (may be empty for no direct loss). Gradients from later stages
// flow into earlier outputs through the concatenated inputs.
template <class T>
void NetworkBackward(const NetworkWeights<T>& w, const std::vector<StageCache<T>>& caches,
                     std::vector<Mat<T>> douts, int steps, int batch, Vec<T>& grad) {
  const int stages = w.config.StageCount();
  for (int s = stages - 1; s >= 0; --s) {
    auto& d = douts[static_cast<std::size_t>(s)];
    if (d.size() == 0) continue;
    const Mat<T> dx = StageBackward(w, s, caches[static_cast<std::size_t>(s)], d, steps, batch, grad);
    if (s > 0) {
      auto& dprev = douts[static_cast<std::size_t>(s - 1)];
      const Eigen::Index rows = caches[static_cast<std::size_t>(s - 1)].output.rows();
      if (dprev.size() == 0) dprev = Mat<T>::Zero(rows, dx.cols());
      dprev += dx.bottomRows(rows);
    }
  }
}

}  // namespace nn

// Packs a window (input_dim x frames, double) into network layout, batch 1.
template <class T>
nn::Mat<T> WindowToNetworkInput(const Eigen::MatrixXd& window) {
  return window.cast<T>();
}

// Per-frame biRNN features (second layer outputs, 2H x frames) of a stage.
template <class T>
nn::Mat<T> RecurrentFeatures(const NetworkWeights<T>& w, int stage, const Eigen::MatrixXd& input) {
  nn::StageCache<T> c;
  const int steps = static_cast<int>(input.cols());
  nn::StageForward(w, stage, input.cast<T>().eval(), steps, 1, c);
  return c.layer[1].out;
}

struct PoseParams {
  Eigen::VectorXd raw;           // 96 values, 6D per upper-body joint
  std::vector<Mat3> rotations;   // decoded, one per upper-body joint
};

template <class T>
PoseParams PredictPose(const NetworkWeights<T>& w, const Eigen::MatrixXd& window) {
  const int steps = w.config.window.total();
  if (window.rows() != w.config.input_dim || window.cols() != steps) {
    throw Error(ErrorKind::kShapeMismatch, "window must be input_dim x 26");
  }
  std::vector<nn::StageCache<T>> caches;
  const auto& out = nn::NetworkForward(w, WindowToNetworkInput<T>(window), steps, 1, caches);
  PoseParams p;
  p.raw = out.col(w.config.window.current_index()).template cast<double>();
  const int joints = w.config.output_dim / 6;
  p.rotations.reserve(static_cast<std::size_t>(joints));
  for (int j = 0; j < joints; ++j) p.rotations.push_back(Rot6dToMatrix(p.raw.segment<6>(6 * j)));
  return p;
}

// Full pose from the predicted upper-body rotations; the root rotation is
// global, the rest local; other joints stay at identity.
inline Pose PoseFromPrediction(const KinematicModel& model, const std::vector<Mat3>& rotations) {
  if (rotations.size() != model.upper_body().size()) {
    throw Error(ErrorKind::kShapeMismatch, "prediction joint count does not match the model");
  }
  Pose p = Pose::Identity(model);
  for (std::size_t k = 0; k < rotations.size(); ++k) {
    p.local_rotations[static_cast<std::size_t>(model.upper_body()[k])] = Rotation::FromMatrix(rotations[k]);
  }
  return p;
}

// Supervision targets derived from a ground-truth pose.
struct IntermediateTargets {
  Eigen::VectorXd leaf_positions;   // head, left wrist, right wrist; 9
  Eigen::VectorXd joint_positions;  // upper-body joints; 48
};

inline IntermediateTargets ComputeIntermediateTargets(const KinematicModel& model, const Pose& pose) {
  const FkResult fk = ForwardKinematics(model, pose);
  const Vec3 root = fk.positions[0];
  IntermediateTargets t;
  t.leaf_positions.resize(9);
  const int leaves[3] = {model.RequireJoint("head"), model.RequireJoint("left_wrist"),
                         model.RequireJoint("right_wrist")};
  for (int k = 0; k < 3; ++k) {
    t.leaf_positions.segment<3>(3 * k) = fk.positions[static_cast<std::size_t>(leaves[k])] - root;
  }
  const auto& upper = model.upper_body();
  t.joint_positions.resize(static_cast<Eigen::Index>(3 * upper.size()));
  for (std::size_t k = 0; k < upper.size(); ++k) {
    t.joint_positions.segment<3>(static_cast<Eigen::Index>(3 * k)) =
        fk.positions[static_cast<std::size_t>(upper[k])] - root;
  }
  return t;
}

inline Eigen::VectorXd PoseTarget6d(const KinematicModel& model, const Pose& pose) {
  const auto& upper = model.upper_body();
  Eigen::VectorXd out(static_cast<Eigen::Index>(6 * upper.size()));
  for (std::size_t k = 0; k < upper.size(); ++k) {
    out.segment<6>(static_cast<Eigen::Index>(6 * k)) =
        pose.local_rotations[static_cast<std::size_t>(upper[k])].rot6d();
  }
  return out;
}

}  // namespace sitpose

#endif  // SITPOSE_KINEMATICS_NET_HPP_
