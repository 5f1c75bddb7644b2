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

// End-to-end commands: corpus synthesis, training, offline estimation,
// paced streaming, evaluation and calibration. The CLI is a thin layer over
// these functions.

#ifndef SITPOSE_PIPELINE_HPP_
#define SITPOSE_PIPELINE_HPP_

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sitpose/body_model.hpp"
#include "sitpose/calibration.hpp"
#include "sitpose/corpus.hpp"
#include "sitpose/error.hpp"
#include "sitpose/formats.hpp"
#include "sitpose/imu.hpp"
#include "sitpose/kinematics_net.hpp"
#include "sitpose/metrics.hpp"
#include "sitpose/refine.hpp"
#include "sitpose/training.hpp"
#include "sitpose/weights_io.hpp"

namespace sitpose {

// ---- Corpus manifest ----

struct ManifestEntry {
  std::string name;
  std::string tag;
  std::size_t motion_frames = 0;
  std::size_t imu_frames = 0;
};

struct CorpusManifest {
  std::uint64_t seed = 0;
  double frame_rate = 60.0;
  int smoothing = 4;
  std::vector<ManifestEntry> sequences;

  std::map<std::string, int> CategoryCounts() const {
    std::map<std::string, int> out;
    for (auto c : kMotionCategories) out[std::string(c)] = 0;
    for (const auto& e : sequences) ++out[e.tag];
    return out;
  }
};

inline void WriteManifest(std::ostream& out, const CorpusManifest& m) {
  out << "sitpose-corpus v1\nseed " << m.seed << "\nframe_rate ";
  WriteNumber(out, m.frame_rate);
  out << "\nsmoothing " << m.smoothing << '\n';
  for (const auto& [cat, n] : m.CategoryCounts()) out << "category " << cat << ' ' << n << '\n';
  out << "sequences " << m.sequences.size() << '\n';
  for (const auto& e : m.sequences) {
    out << "sequence " << e.name << ' ' << e.tag << ' ' << e.motion_frames << ' ' << e.imu_frames << '\n';
  }
}

inline CorpusManifest ReadManifest(std::istream& in) {
  formats_detail::LineReader r(in, "manifest");
  auto head = r.Next();
  if (head.size() != 2 || head[0] != "sitpose-corpus" || head[1] != "v1") r.Fail("expected 'sitpose-corpus v1'");
  CorpusManifest m;
  m.seed = static_cast<std::uint64_t>(r.Integer(r.Expect("seed", 2)[1]));
  m.frame_rate = r.Number(r.Expect("frame_rate", 2)[1]);
  m.smoothing = static_cast<int>(r.Integer(r.Expect("smoothing", 2)[1]));
  std::map<std::string, long> declared;
  for (std::size_t c = 0; c < kMotionCategories.size(); ++c) {
    auto t = r.Expect("category", 3);
    declared[std::string(t[1])] = r.Integer(t[2]);
  }
  const long n = r.Integer(r.Expect("sequences", 2)[1]);
  for (long i = 0; i < n; ++i) {
    auto t = r.Expect("sequence", 5);
    m.sequences.push_back({std::string(t[1]), std::string(t[2]), static_cast<std::size_t>(r.Integer(t[3])),
                           static_cast<std::size_t>(r.Integer(t[4]))});
  }
  if (!r.AtEnd()) r.Fail("trailing data");
  for (const auto& [cat, count] : m.CategoryCounts()) {
    if (declared[cat] != count) r.Fail("category count for '" + cat + "' disagrees with the sequence list");
  }
  return m;
}

inline std::string ManifestPath(const std::string& dir) { return (std::filesystem::path(dir) / "manifest.txt").string(); }
inline std::string MotionPath(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / (name + ".motion")).string();
}
inline std::string ImuPath(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / (name + ".imu")).string();
}

inline CorpusManifest LoadManifest(const std::string& dir) {
  auto in = OpenForRead(ManifestPath(dir));
  return ReadManifest(in);
}

// ---- synthesize ----

struct SynthesizeOptions {
  std::string out_dir;
  CorpusConfig corpus;
  SynthesisOptions synthesis;
  std::uint64_t seed = 0;
};

inline CorpusManifest CmdSynthesize(const KinematicModel& model, const SynthesizeOptions& o) {
  if (o.out_dir.empty()) throw Error(ErrorKind::kConfigError, "synthesize needs an output directory");
  std::error_code ec;
  std::filesystem::create_directories(o.out_dir, ec);
  if (ec) throw Error(ErrorKind::kIoError, "cannot create '" + o.out_dir + "': " + ec.message());
  // One generator stream: the corpus seed, then per-sequence noise seeds.
  std::mt19937_64 rng(o.seed);
  const auto corpus = GenerateSyntheticCorpus(model, o.corpus, rng());
  CorpusManifest m;
  m.seed = o.seed;
  m.frame_rate = o.corpus.frame_rate;
  m.smoothing = o.synthesis.smoothing;
  for (const auto& seq : corpus) {
    SynthesisOptions so = o.synthesis;
    so.noise_seed = rng();
    const ImuSequence imu = SynthesizeImu(model, seq, so);
    SaveMotion(MotionPath(o.out_dir, seq.subject), model, seq);
    SaveImu(ImuPath(o.out_dir, seq.subject), imu);
    m.sequences.push_back({seq.subject, seq.tag, seq.frames.size(), imu.frames.size()});
  }
  auto out = OpenForWrite(ManifestPath(o.out_dir));
  WriteManifest(out, m);
  CheckWritten(out, ManifestPath(o.out_dir));
  return m;
}

// ---- train ----

struct TrainOptions {
  std::string corpus_dir;
  std::string weights_out;
  std::string loss_csv;  // optional
  std::string init_weights;  // fine-tune from these when set
  std::vector<std::string> sequences;  // subset of the manifest; all when empty
  int window_stride = 1;
  int max_windows = 0;  // 0 keeps all
  TrainConfig train;
  NetworkConfig network;
};

inline std::vector<TrainingSample> LoadTrainingSamples(const KinematicModel& model, const TrainOptions& o) {
  const CorpusManifest m = LoadManifest(o.corpus_dir);
  if (o.window_stride < 1 || o.max_windows < 0) throw Error(ErrorKind::kConfigError, "invalid window selection");
  std::vector<TrainingSample> out;
  for (const auto& e : m.sequences) {
    if (!o.sequences.empty() && std::find(o.sequences.begin(), o.sequences.end(), e.name) == o.sequences.end()) {
      continue;
    }
    const auto motion = LoadMotion(MotionPath(o.corpus_dir, e.name), model);
    const auto imu = LoadImu(ImuPath(o.corpus_dir, e.name));
    auto samples = BuildTrainingSamples(model, motion, imu, o.network.window);
    for (std::size_t i = 0; i < samples.size(); i += static_cast<std::size_t>(o.window_stride)) {
      out.push_back(std::move(samples[i]));
    }
  }
  for (const auto& name : o.sequences) {
    bool found = false;
    for (const auto& e : m.sequences) found = found || e.name == name;
    if (!found) throw Error(ErrorKind::kConfigError, "sequence '" + name + "' is not in the corpus");
  }
  if (o.max_windows > 0 && out.size() > static_cast<std::size_t>(o.max_windows)) {
    out.resize(static_cast<std::size_t>(o.max_windows));
  }
  return out;
}

inline TrainResult CmdTrain(const KinematicModel& model, const TrainOptions& o) {
  if (o.weights_out.empty()) throw Error(ErrorKind::kConfigError, "train needs a weights output path");
  const auto samples = LoadTrainingSamples(model, o);
  std::optional<NetworkWeights<float>> init;
  if (!o.init_weights.empty()) init = LoadWeights(o.init_weights);
  NetworkConfig net = init ? init->config : o.network;
  TrainResult r = Train(o.train, net, samples, init ? &*init : nullptr);
  SaveWeights(o.weights_out, r.weights);
  if (!o.loss_csv.empty()) {
    auto out = OpenForWrite(o.loss_csv);
    WriteLossCsv(out, r.loss);
    CheckWritten(out, o.loss_csv);
  }
  return r;
}

// ---- estimate ----

struct EstimateOptions {
  bool physics = true;
  RefineConfig refine;
  std::optional<CalibrationResult> calibration;
};

struct Estimate {
  MotionSequence kinematic;               // network output
  MotionSequence poses;                   // refined when physics is on
  std::optional<RefinedSequence> refined;
};

// Estimator state shared by the offline and streaming paths so that both
// produce identical numbers.
class PoseEstimator {
 public:
  PoseEstimator(const KinematicModel& model, const NetworkWeights<float>& weights, const EstimateOptions& opts,
                Refiner::Logger log = {})
      : model_(model), weights_(weights), opts_(opts) {
    if (opts_.physics) {
      RefineConfig rc = opts_.refine;
      refiner_.emplace(model_, rc, std::move(log));
    }
  }

  // Raw sensor frame in; pose for the frame `future` frames back once enough
  // frames have been seen.
  struct Output {
    int frame = 0;  // index into the input sequence
    Pose kinematic;
    Pose pose;
    Eigen::VectorXd torque;
    bool fallback = false;
  };

  std::optional<Output> Push(const ImuFrame& raw) {
    const ImuFrame f = opts_.calibration ? ApplyCalibration(*opts_.calibration, raw) : raw;
    buffer_.push_back(NormalizeFrame(f));
    ++seen_;
    const auto& w = weights_.config.window;
    if (buffer_.size() > static_cast<std::size_t>(w.total())) buffer_.pop_front();
    if (buffer_.size() < static_cast<std::size_t>(w.total())) return std::nullopt;
    Eigen::MatrixXd window(kNormalizedInputSize, w.total());
    for (int k = 0; k < w.total(); ++k) window.col(k) = buffer_[static_cast<std::size_t>(k)];
    Output out;
    out.frame = seen_ - 1 - w.future;
    const PoseParams p = PredictPose(weights_, window);
    out.kinematic = PoseFromPrediction(model_, p.rotations);
    if (refiner_) {
      auto step = refiner_->Step(out.kinematic, out.frame);
      out.pose = std::move(step.pose);
      out.torque = std::move(step.torque);
      out.fallback = step.fallback;
    } else {
      out.pose = out.kinematic;
    }
    return out;
  }

  int latency_frames() const { return weights_.config.window.future; }
  const Refiner* refiner() const { return refiner_ ? &*refiner_ : nullptr; }

 private:
  const KinematicModel& model_;
  const NetworkWeights<float>& weights_;
  EstimateOptions opts_;
  std::optional<Refiner> refiner_;
  std::deque<NormalizedInput> buffer_;
  int seen_ = 0;
};

inline Estimate EstimateSequence(const KinematicModel& model, const NetworkWeights<float>& weights,
                                 const ImuSequence& imu, const EstimateOptions& opts,
                                 const Refiner::Logger& log = {}) {
  const int total = weights.config.window.total();
  if (static_cast<int>(imu.frames.size()) < total) {
    throw Error(ErrorKind::kSequenceTooShort, "need at least " + std::to_string(total) + " IMU frames, got " +
                                                  std::to_string(imu.frames.size()));
  }
  PoseEstimator est(model, weights, opts, log);
  Estimate e;
  for (auto* m : {&e.kinematic, &e.poses}) {
    m->frame_rate = imu.frame_rate;
    m->first_frame = imu.first_frame + weights.config.window.past;
    m->subject = "estimate";
  }
  if (opts.physics) {
    e.refined.emplace();
    e.refined->torque_joints = DofMap::UpperBody(model).joints;
  }
  for (std::size_t f = 0; f < imu.frames.size(); ++f) {
    auto out = est.Push(imu.frames[f]);
    if (!out) continue;
    e.kinematic.frames.push_back(out->kinematic);
    e.poses.frames.push_back(out->pose);
    if (e.refined) {
      const int local = static_cast<int>(e.poses.frames.size()) - 1;
      if (out->fallback) e.refined->fallback_frames.push_back(local);
      e.refined->poses.push_back(out->pose);
      e.refined->torques.push_back(out->torque);
    }
  }
  return e;
}

// ---- stream ----

struct StreamStats {
  int frames_in = 0;
  int poses_out = 0;
  int latency_frames = 0;
  double latency_ms = 0.0;
  double mean_compute_ms = 0.0;
  double max_compute_ms = 0.0;
  int underruns = 0;
  std::vector<double> compute_ms;  // per emitted pose
};

inline void WriteStreamHeader(std::ostream& out, const KinematicModel& model, double frame_rate, int latency) {
  out << "sitpose-stream v1\nframe_rate ";
  WriteNumber(out, frame_rate);
  out << "\nlatency_frames " << latency << "\njoints " << model.JointCount();
  for (const auto& j : model.joints()) out << ' ' << j.name;
  out << '\n';
}

// Replays `imu` at `rate` Hz (no pacing when rate <= 0) from a producer
// thread; the consumer estimates and writes "pose <frame> <pose line>".
inline StreamStats RunStream(const KinematicModel& model, const NetworkWeights<float>& weights,
                             const ImuSequence& imu, const EstimateOptions& opts, double rate, std::ostream& out,
                             std::ostream& log) {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::size_t> queue;
  bool done = false;
  std::atomic<bool> stop{false};

  std::thread producer([&] {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < imu.frames.size() && !stop; ++i) {
      if (rate > 0.0) {
        std::this_thread::sleep_until(start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                  std::chrono::duration<double>(static_cast<double>(i) / rate)));
      }
      {
        std::lock_guard<std::mutex> lock(mu);
        queue.push_back(i);
      }
      cv.notify_one();
    }
    {
      std::lock_guard<std::mutex> lock(mu);
      done = true;
    }
    cv.notify_one();
  });

  StreamStats stats;
  const double period_ms = 1000.0 / imu.frame_rate;
  try {
    PoseEstimator est(model, weights, opts, [&](const std::string& msg) { log << "warning: " << msg << '\n'; });
    stats.latency_frames = est.latency_frames();
    stats.latency_ms = 1000.0 * stats.latency_frames / imu.frame_rate;
    WriteStreamHeader(out, model, imu.frame_rate, stats.latency_frames);
    for (;;) {
      std::size_t i;
      {
        std::unique_lock<std::mutex> lock(mu);
        cv.wait(lock, [&] { return !queue.empty() || done; });
        if (queue.empty()) break;
        i = queue.front();
        queue.pop_front();
      }
      ++stats.frames_in;
      const auto t0 = std::chrono::steady_clock::now();
      auto o = est.Push(imu.frames[i]);
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      if (!o) continue;
      stats.compute_ms.push_back(ms);
      if (ms > period_ms) {
        ++stats.underruns;
        log << "warning: frame " << o->frame << " took " << ms << " ms, over the " << period_ms
            << " ms frame period\n";
      }
      out << "pose " << imu.first_frame + o->frame << ' ';
      WritePoseLine(out, o->pose);
      out << '\n';
      ++stats.poses_out;
    }
  } catch (...) {
    stop = true;
    producer.join();
    throw;
  }
  producer.join();
  for (double v : stats.compute_ms) {
    stats.mean_compute_ms += v;
    stats.max_compute_ms = std::max(stats.max_compute_ms, v);
  }
  if (!stats.compute_ms.empty()) stats.mean_compute_ms /= static_cast<double>(stats.compute_ms.size());
  return stats;
}

// Parses stream output back into (frame, pose) pairs.
inline std::vector<std::pair<int, Pose>> ReadStream(std::istream& in, const KinematicModel& model) {
  formats_detail::LineReader r(in, "stream");
  auto head = r.Next();
  if (head.size() != 2 || head[0] != "sitpose-stream" || head[1] != "v1") r.Fail("expected 'sitpose-stream v1'");
  r.Expect("frame_rate", 2);
  r.Expect("latency_frames", 2);
  r.Expect("joints", 2);
  std::vector<std::pair<int, Pose>> out;
  const std::size_t n = static_cast<std::size_t>(model.JointCount());
  while (!r.AtEnd()) {
    auto t = r.Expect("pose", 2 + 3 + 4 * n);
    if (t.size() != 2 + 3 + 4 * n) r.Fail("pose line has wrong field count");
    Pose p;
    p.root_position = Vec3(r.Number(t[2]), r.Number(t[3]), r.Number(t[4]));
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t o = 5 + 4 * j;
      p.local_rotations.push_back(
          Rotation::FromQuaternion(Quat(r.Number(t[o]), r.Number(t[o + 1]), r.Number(t[o + 2]), r.Number(t[o + 3]))));
    }
    out.emplace_back(static_cast<int>(r.Integer(t[1])), std::move(p));
  }
  return out;
}

// ---- evaluate ----

// Ground-truth frames matching the prediction's frame indices.
inline std::vector<Pose> AlignGroundTruth(const MotionSequence& pred, const MotionSequence& gt) {
  const long shift = static_cast<long>(pred.first_frame) - gt.first_frame;
  if (shift < 0 || shift + static_cast<long>(pred.frames.size()) > static_cast<long>(gt.frames.size())) {
    throw Error(ErrorKind::kLengthMismatch, "prediction frames " + std::to_string(pred.first_frame) + ".." +
                                                std::to_string(pred.first_frame + static_cast<long>(pred.frames.size())) +
                                                " are not covered by the ground truth");
  }
  return {gt.frames.begin() + shift, gt.frames.begin() + shift + static_cast<long>(pred.frames.size())};
}

inline EvalReport EvaluateMotions(const KinematicModel& model, const std::vector<MotionSequence>& preds,
                                  const std::vector<MotionSequence>& gts, const EvalOptions& opts = {}) {
  if (preds.size() != gts.size() || preds.empty()) {
    throw Error(ErrorKind::kLengthMismatch, "need one ground-truth file per prediction file");
  }
  std::vector<std::vector<Pose>> aligned;
  aligned.reserve(gts.size());
  for (std::size_t i = 0; i < preds.size(); ++i) aligned.push_back(AlignGroundTruth(preds[i], gts[i]));
  std::vector<EvalItem> items;
  for (std::size_t i = 0; i < preds.size(); ++i) items.push_back({&preds[i].frames, &aligned[i], gts[i].tag});
  return BuildReport(model, items, opts);
}

// ---- calibrate ----

// T-pose: the rest pose of the skeleton.
inline Pose TPose(const KinematicModel& model) { return Pose::Identity(model); }

}  // namespace sitpose

#endif  // SITPOSE_PIPELINE_HPP_
