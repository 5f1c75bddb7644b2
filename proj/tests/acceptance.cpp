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

// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "net_oracles.hpp"
#include "qp_oracle.hpp"
#include "sitpose/pipeline.hpp"
#include "test_support.hpp"

namespace sitpose {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDegree = kPi / 180.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// 1
Outcome SynthesisOracle() {
  const KinematicModel& m = DefaultModel();
  auto translated = [&](int frames, const std::function<Vec3(double)>& root) {
    MotionSequence s;
    for (int k = 0; k < frames; ++k) {
      Pose p = Pose::Identity(m);
      p.root_position = root(k / s.frame_rate);
      s.frames.push_back(p);
    }
    return s;
  };
  double quad_err = 0.0, sin_err = 0.0;
  const Vec3 a(0.7, -9.81, 2.5), v(0.1, 0.2, -0.3);
  const auto quad = translated(90, [&](double t) { return v * t + 0.5 * a * t * t; });
  for (int n : {1, 2, 4, 8}) {
    SynthesisOptions o;
    o.smoothing = n;
    for (const auto& f : SynthesizeImu(m, quad, o).frames) {
      for (const auto& x : f.acceleration) quad_err = std::max(quad_err, (x - a).norm());
    }
  }
  const double w = 2.0 * kPi * 1.3;
  const auto sine = translated(150, [&](double t) { return Vec3(std::sin(w * t), 0.5 * std::cos(w * t), 0.0); });
  const int n = 4;
  const double h = n / 60.0, gain = 2.0 * (std::cos(w * h) - 1.0) / (h * h);
  const auto imu = SynthesizeImu(m, sine);
  for (std::size_t k = 0; k < imu.frames.size(); ++k) {
    const double t = static_cast<double>(k + n) / 60.0;
    const Vec3 oracle = gain * Vec3(std::sin(w * t), 0.5 * std::cos(w * t), 0.0);
    for (const auto& x : imu.frames[k].acceleration) sin_err = std::max(sin_err, (x - oracle).norm());
  }
  return {quad_err < 1e-9 && sin_err < 1e-9,
          "quadratic max err " + Fmt("%.2e", quad_err) + ", sinusoid max err " + Fmt("%.2e", sin_err)};
}

// 2
Outcome NormalizationEquivariance() {
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    ImuFrame f;
    for (std::size_t s = 0; s < kSensorCount; ++s) {
      f.acceleration[s] = testing::RandomVec(rng, 5.0);
      f.orientation[s] = Quat(testing::RandomRotation(rng));
    }
    const Mat3 r = testing::RandomRotation(rng);
    ImuFrame g = f;
    for (std::size_t s = 0; s < kSensorCount; ++s) {
      g.acceleration[s] = r * f.acceleration[s];
      g.orientation[s] = Quat(r * f.orientation[s].toRotationMatrix());
    }
    const NormalizedInput a = NormalizeFrame(f), b = NormalizeFrame(g);
    for (auto s : {SensorId::kLeftForearm, SensorId::kRightForearm, SensorId::kHead}) {
      worst = std::max(worst, (a.segment<3>(NormalizedAccelOffset(s)) - b.segment<3>(NormalizedAccelOffset(s))).norm());
      worst = std::max(worst, (NormalizedRotation(a, s) - NormalizedRotation(b, s)).norm());
    }
  }
  return {worst < 1e-9, "1000 frames, max leaf deviation " + Fmt("%.2e", worst)};
}

// 3
Outcome FkOracle() {
  KinematicModel chain;
  chain.AddJoint("a", "-", Vec3::Zero());
  chain.AddJoint("b", "a", Vec3(1, 0, 0));
  chain.AddJoint("c", "b", Vec3(0.5, 0.25, 0));
  std::mt19937_64 rng(1);
  double chain_err = 0.0;
  for (int i = 0; i < 200; ++i) {
    Pose p = Pose::Identity(chain);
    const Mat3 r0 = testing::RandomRotation(rng), r1 = testing::RandomRotation(rng), r2 = testing::RandomRotation(rng);
    p.local_rotations = {Rotation::FromMatrix(r0), Rotation::FromMatrix(r1), Rotation::FromMatrix(r2)};
    p.root_position = testing::RandomVec(rng);
    const FkResult f = ForwardKinematics(chain, p);
    Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
    auto hom = [](const Mat3& r, const Vec3& x) {
      Eigen::Matrix4d h = Eigen::Matrix4d::Identity();
      h.topLeftCorner<3, 3>() = r;
      h.topRightCorner<3, 1>() = x;
      return h;
    };
    const Mat3 rs[3] = {r0, r1, r2};
    for (int j = 0; j < 3; ++j) {
      t = t * hom(rs[j], j == 0 ? p.root_position : chain.joint(j).offset);
      chain_err = std::max(chain_err, (f.positions[static_cast<std::size_t>(j)] - t.topRightCorner<3, 1>()).norm());
      chain_err = std::max(chain_err, (f.rotations[static_cast<std::size_t>(j)] - t.topLeftCorner<3, 3>()).norm());
    }
  }
  const KinematicModel& m = DefaultModel();
  double rigid_err = 0.0;
  for (int i = 0; i < 500; ++i) {
    Pose p = testing::RandomPose(m, rng);
    const FkResult before = ForwardKinematics(m, p);
    const Mat3 r = testing::RandomRotation(rng);
    const Vec3 x = testing::RandomVec(rng, 2.0);
    p.local_rotations[0] = Rotation::FromMatrix(r) * p.local_rotations[0];
    p.root_position = r * p.root_position + x;
    const FkResult after = ForwardKinematics(m, p);
    for (std::size_t j = 0; j < before.positions.size(); ++j) {
      rigid_err = std::max(rigid_err, (after.positions[j] - (r * before.positions[j] + x)).norm());
      rigid_err = std::max(rigid_err, (after.rotations[j] - r * before.rotations[j]).norm());
    }
  }
  return {chain_err < 1e-12 && rigid_err < 1e-9,
          "chain max err " + Fmt("%.2e", chain_err) + ", rigid max err " + Fmt("%.2e", rigid_err) + " over 500 poses"};
}

// 4
Outcome GradientCheck() {
  double worst = 0.0;
  std::string name;
  std::size_t blocks = 0;
  for (const auto& cfg : {NetworkConfig::SingleStage(4), NetworkConfig::ThreeStage(4, 4, 4)}) {
    for (const auto& r : testing::GradientCheck(cfg, 12)) {
      ++blocks;
      if (r.rel_error >= worst) {
        worst = r.rel_error;
        name = r.name;
      }
    }
  }
  return {worst < 1e-4, std::to_string(blocks) + " blocks, worst rel err " + Fmt("%.2e", worst) + " (" + name + ")"};
}

// 5
Outcome Overfit() {
  const auto data = testing::SmallTrainingSet(32, 3);
  TrainConfig tc;
  tc.epochs = 500;
  tc.batch_size = 32;
  tc.learning_rate = 1e-3;
  tc.seed = 5;
  const NetworkConfig net = NetworkConfig::ThreeStage(256, 64, 128);
  const auto a = Train(tc, net, data);
  const double mse = EvaluateLoss(a.weights, data);
  double pose_mse = 0.0;
  for (const auto& s : data) pose_mse += (PredictPose(a.weights, s.input).raw - s.pose).squaredNorm() / 96.0;
  pose_mse /= static_cast<double>(data.size());
  tc.epochs = 20;
  const auto b = Train(tc, net, data);
  const auto c = Train(tc, net, data);
  const bool same = b.weights.values == c.weights.values && b.loss == c.loss;
  const bool prefix = std::equal(b.loss.begin(), b.loss.end(), a.loss.begin());
  return {mse < 1e-3 && same && prefix,
          "32 windows, 500 epochs: loss " + Fmt("%.2e", mse) + ", pose MSE " + Fmt("%.2e", pose_mse) +
              (same && prefix ? ", reruns identical" : ", reruns differ")};
}

// 6
Outcome QpCorrectness() {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  int count = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 6;
    const QpProblem q = testing::RandomQp(rng, n, std::min(trial % 4, n - 1));
    const auto oracle = testing::KktOracle(q);
    if (!oracle) return {false, "oracle failed on trial " + std::to_string(trial)};
    worst = std::max(worst, (SolveQp(q).x - *oracle).lpNorm<Eigen::Infinity>());
    ++count;
  }
  CorpusConfig cfg;
  cfg.sequences_per_category = 1;
  cfg.duration_s = 2.0;
  double kkt = 0.0;
  std::size_t frames = 0;
  for (const auto& mo : GenerateSyntheticCorpus(DefaultModel(), cfg, 21)) {
    const auto r = RefineSequence(DefaultModel(), mo.frames, RefineConfig{});
    kkt = std::max(kkt, r.max_kkt);
    frames += r.poses.size();
  }
  return {worst < 1e-8 && kkt < 1e-6, std::to_string(count) + " random QPs, max |x - oracle| " + Fmt("%.2e", worst) +
                                          "; pipeline max KKT residual " + Fmt("%.2e", kkt) + " over " +
                                          std::to_string(frames) + " frames"};
}

// 7
Outcome PdDynamics() {
  const RefineConfig cfg;
  const double h = 1.0 / (cfg.frame_rate * cfg.substeps);
  DynamicsState s{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), 0.0};
  const Eigen::VectorXd target = Eigen::VectorXd::Constant(1, 1.0);
  double peak = 0.0;
  for (int k = 0; k < 120 * cfg.substeps; ++k) {
    s = Integrate(s, PdReference(s, target, cfg.gains), h);
    peak = std::max(peak, s.theta(0));
  }
  const double scalar_err = std::abs(s.theta(0) - 1.0);

  const KinematicModel& m = DefaultModel();
  RefineConfig zero_g = cfg;
  zero_g.gravity = Vec3::Zero();
  Refiner r(m, zero_g);
  const Pose start = Pose::Identity(m);
  r.Step(start, 0);
  Pose goal = start;
  const int elbow = m.RequireJoint("left_elbow");
  goal.local_rotations[static_cast<std::size_t>(elbow)] = Rotation::FromAxisAngle(Vec3(0, -0.8, 0));
  double joint_peak = 0.0;
  Refiner::FrameOutput out;
  for (int f = 1; f <= 120; ++f) {
    out = r.Step(goal, f);
    joint_peak = std::max(joint_peak, GeodesicAngle(out.pose.local_rotations[static_cast<std::size_t>(elbow)].matrix(),
                                                    Mat3::Identity()));
  }
  const double joint_err = GeodesicAngle(out.pose.local_rotations[static_cast<std::size_t>(elbow)].matrix(),
                                         goal.local_rotations[static_cast<std::size_t>(elbow)].matrix());
  const bool pass = scalar_err < 1e-3 && peak > 1.0 && joint_err < 1e-3 && joint_peak > 0.8;
  return {pass, "unit step after 2 s: err " + Fmt("%.1e", scalar_err) + ", overshoot " +
                    Fmt("%.1f%%", 100.0 * (peak - 1.0)) + "; elbow step err " + Fmt("%.1e", joint_err) +
                    " rad, overshoot " + Fmt("%.1f%%", 100.0 * (joint_peak / 0.8 - 1.0))};
}

// 8
Outcome JitterReduction() {
  const KinematicModel& m = DefaultModel();
  CorpusConfig cfg;
  cfg.sequences_per_category = 1;
  cfg.duration_s = 4.0;
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd(0.0, 2.0 * kDegree);
  MetricSamples kin, phys;
  double jk = 0.0, jp = 0.0;
  std::size_t fallbacks = 0;
  for (const auto& mo : GenerateSyntheticCorpus(m, cfg, 31)) {
    auto noisy = mo.frames;
    for (auto& p : noisy) {
      for (int j : m.upper_body()) {
        auto& r = p.local_rotations[static_cast<std::size_t>(j)];
        r = Rotation::FromMatrix(ExpMap(Vec3(nd(rng), nd(rng), nd(rng))) * r.matrix());
      }
    }
    const auto refined = RefineSequence(m, noisy, RefineConfig{});
    fallbacks += refined.fallback_frames.size();
    kin.Append(EvaluateSequence(m, noisy, mo.frames));
    phys.Append(EvaluateSequence(m, refined.poses, mo.frames));
  }
  auto mean = [](const std::vector<double>& v) { return Summarize(v).mean; };
  jk = mean(kin.jitter);
  jp = mean(phys.jitter);
  const double reduction = 1.0 - jp / jk;
  const double dang = mean(phys.angle) / mean(kin.angle) - 1.0;
  const double dpos = mean(phys.position) / mean(kin.position) - 1.0;
  const bool pass = reduction >= 0.30 && dang < 0.05 && dpos < 0.05 && fallbacks == 0;
  return {pass, "jerk " + Fmt("%.0f", jk) + " -> " + Fmt("%.0f", jp) + " m/s^3 (" +
                    Fmt("-%.1f%%", 100.0 * reduction) + "), angle err " + Fmt("%+.1f%%", 100.0 * dang) +
                    ", position err " + Fmt("%+.1f%%", 100.0 * dpos) + ", fallbacks " + std::to_string(fallbacks)};
}

// 9
Outcome TorqueShape() {
  const KinematicModel& m = DefaultModel();
  // Trapezoidal velocity raise of the left arm about the shoulder z axis.
  const double fps = 60.0, t_acc = 0.3, t_cruise = 0.6, hold = 0.3, lift = 100.0 * kDegree;
  const double v = lift / (t_acc + t_cruise), acc = v / t_acc;
  auto angle = [&](double t) {
    t -= hold;
    if (t <= 0.0) return 0.0;
    if (t < t_acc) return 0.5 * acc * t * t;
    if (t < t_acc + t_cruise) return 0.5 * acc * t_acc * t_acc + v * (t - t_acc);
    const double u = std::min(t - t_acc - t_cruise, t_acc);
    return 0.5 * acc * t_acc * t_acc + v * t_cruise + v * u - 0.5 * acc * u * u;
  };
  const int shoulder = m.RequireJoint("left_shoulder");
  const int frames = static_cast<int>(std::lround((2.0 * hold + 2.0 * t_acc + t_cruise) * fps)) + 1;
  std::vector<Pose> poses;
  for (int k = 0; k < frames; ++k) {
    Pose p = Pose::Identity(m);
    p.local_rotations[static_cast<std::size_t>(shoulder)] = Rotation::FromAxisAngle(Vec3(0, 0, -75.0 * kDegree + angle(k / fps)));
    poses.push_back(p);
  }
  RefineConfig cfg;
  cfg.gravity = Vec3::Zero();
  const auto r = RefineSequence(m, poses, cfg);
  Refiner probe(m, cfg);
  const auto col = 3 * static_cast<Eigen::Index>(probe.dofs().slot[static_cast<std::size_t>(shoulder)]) + 2;
  auto phase = [&](double t0, double t1) {
    double sum = 0.0;
    int n = 0;
    for (int k = static_cast<int>(std::ceil(t0 * fps)); k <= static_cast<int>(std::floor(t1 * fps)); ++k) {
      sum += r.torques[static_cast<std::size_t>(k)](col);
      ++n;
    }
    return sum / n;
  };
  double peak = 0.0;
  for (const auto& t : r.torques) peak = std::max(peak, std::abs(t(col)));
  // Phases shifted by the tracking lag of a few frames.
  const double lag = 3.0 / fps;
  const double up = phase(hold + lag, hold + t_acc);
  const double cruise = phase(hold + t_acc + 0.25, hold + t_acc + t_cruise);
  const double down = phase(hold + t_acc + t_cruise + lag, hold + 2.0 * t_acc + t_cruise);
  const bool pass = up > 0.3 * peak && down < -0.3 * peak && std::abs(cruise) < 0.1 * peak && r.fallback_frames.empty();
  return {pass, "shoulder torque mean: accelerating " + Fmt("%+.3f", up) + ", steady " + Fmt("%+.3f", cruise) +
                    ", decelerating " + Fmt("%+.3f", down) + " N m (peak " + Fmt("%.3f", peak) + ")"};
}

// 10
Outcome Streaming() {
  const KinematicModel& m = DefaultModel();
  CorpusConfig cfg;
  cfg.sequences_per_category = 1;
  cfg.duration_s = 4.0;
  cfg.categories = {"combined"};
  const auto motion = GenerateSyntheticCorpus(m, cfg, 8).front();
  const ImuSequence imu = SynthesizeImu(m, motion);
  const auto weights = NetworkWeights<float>::Initialized(NetworkConfig::ThreeStage(256, 64, 128), 3);
  EstimateOptions eo;
  const Estimate offline = EstimateSequence(m, weights, imu, eo);
  std::ostringstream out, log;
  const StreamStats s = RunStream(m, weights, imu, eo, 0.0, out, log);
  std::istringstream in(out.str());
  const auto streamed = ReadStream(in, m);
  std::ostringstream offline_text;
  WriteStreamHeader(offline_text, m, imu.frame_rate, 5);
  for (std::size_t f = 0; f < offline.poses.frames.size(); ++f) {
    offline_text << "pose " << offline.poses.first_frame + static_cast<int>(f) << ' ';
    WritePoseLine(offline_text, offline.poses.frames[f]);
    offline_text << '\n';
  }
  const bool identical = out.str() == offline_text.str() && streamed.size() == offline.poses.frames.size();
  auto ms = s.compute_ms;
  std::sort(ms.begin(), ms.end());
  const double p95 = ms[ms.size() * 95 / 100];
  const bool pass = identical && s.latency_frames == 5 && p95 < 1000.0 / 60.0;
  return {pass, std::string(identical ? "identical" : "differs") + " to offline over " + std::to_string(streamed.size()) +
                    " poses; latency " + std::to_string(s.latency_frames) + " frames (" + Fmt("%.1f", s.latency_ms) +
                    " ms); compute mean " + Fmt("%.2f", s.mean_compute_ms) + " ms, p95 " + Fmt("%.2f", p95) +
                    " ms, max " + Fmt("%.2f", s.max_compute_ms) + " ms"};
}

// 11
Outcome ClosedLoop() {
  namespace fs = std::filesystem;
  const std::string dir = testing::TempDir("acceptance");
  const std::string cli = SITPOSE_CLI;
  auto run = [&](const std::string& args) { return testing::Run(cli + " " + args, dir); };
  const std::string corpus = dir + "/corpus";
  auto r = run("--seed 11 synthesize --out " + corpus + " --sequences 1 --duration 2 --categories arm");
  if (r.exit_code != 0) return {false, "synthesize failed: " + r.err};
  const std::string name = LoadManifest(corpus).sequences.front().name;
  r = run("--seed 12 train --corpus " + corpus + " --weights " + dir +
          "/w.bin --hidden 64 32 64 --epochs 400 --batch-size 32 --lr 3e-3");
  if (r.exit_code != 0) return {false, "train failed: " + r.err};
  r = run("estimate --weights " + dir + "/w.bin --imu " + ImuPath(corpus, name) + " --out " + dir + "/p.motion");
  if (r.exit_code != 0) return {false, "estimate failed: " + r.err};
  r = run("evaluate --pred " + dir + "/p.motion --gt " + MotionPath(corpus, name) + " --csv " + dir + "/r.csv");
  if (r.exit_code != 0) return {false, "evaluate failed: " + r.err};
  std::istringstream csv(testing::ReadFile(dir + "/r.csv"));
  std::string line;
  std::getline(csv, line);
  std::getline(csv, line);
  std::vector<std::string> cells;
  std::stringstream ss(line);
  for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
  fs::remove_all(dir);
  if (cells.size() < 6) return {false, "malformed report"};
  const double pos = std::stod(cells[4]), ang = std::stod(cells[2]);
  return {pos < 1.0, "mean joint position error " + Fmt("%.3f", pos) + " cm, angle error " + Fmt("%.2f", ang) +
                         " deg over " + cells[1] + " frames"};
}

}  // namespace
}  // namespace sitpose

int main(int argc, char** argv) {
  using namespace sitpose;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"synthesis oracle", SynthesisOracle},
      {"normalization equivariance", NormalizationEquivariance},
      {"forward kinematics oracle", FkOracle},
      {"gradient check", GradientCheck},
      {"overfit at full network size", Overfit},
      {"QP correctness", QpCorrectness},
      {"PD closed loop", PdDynamics},
      {"jitter reduction", JitterReduction},
      {"torque shape", TorqueShape},
      {"streaming contract", Streaming},
      {"closed loop", ClosedLoop},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str(),
                s);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
