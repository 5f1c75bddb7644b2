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

// sitpose command line: synthesize | train | estimate | stream | evaluate | calibrate

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sitpose/pipeline.hpp"

namespace {

using sitpose::Error;
using sitpose::ErrorKind;

int Fail(ErrorKind kind, const std::string& message, const std::string& command) {
  nlohmann::json j;
  j["error"] = {{"kind", std::string(sitpose::ErrorName(kind))},
                {"message", message},
                {"command", command},
                {"exit_code", sitpose::ExitCode(kind)}};
  std::cerr << j.dump() << '\n';
  return sitpose::ExitCode(kind);
}

sitpose::KinematicModel LoadModel(const std::string& path) {
  return path.empty() ? sitpose::DefaultModel() : sitpose::LoadSkeleton(path);
}

std::vector<int> ParseHidden(const std::vector<int>& v, sitpose::NetworkVariant variant) {
  if (!v.empty()) return v;
  return variant == sitpose::NetworkVariant::kSingleStage ? std::vector<int>{256} : std::vector<int>{256, 64, 128};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-IMU upper-body pose estimation for wheelchair users"};
  app.set_config("--config", "", "INI config file; sections are named after subcommands");
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string physics = "on";
  std::string skeleton;
  app.add_option("--seed", seed, "Seed for every random choice of the command");
  app.add_option("--physics", physics, "Physics refinement")->check(CLI::IsMember({"on", "off"}));
  app.add_option("--skeleton", skeleton, "Skeleton definition file (default: built-in)");

  // synthesize
  auto* syn = app.add_subcommand("synthesize", "Generate a synthetic motion corpus with virtual IMU data");
  std::string syn_out;
  sitpose::CorpusConfig corpus;
  sitpose::SynthesisOptions synth;
  syn->add_option("--out", syn_out, "Output directory")->required();
  syn->add_option("--sequences", corpus.sequences_per_category, "Sequences per motion category");
  syn->add_option("--duration", corpus.duration_s, "Sequence length, seconds");
  syn->add_option("--frame-rate", corpus.frame_rate, "Frame rate, Hz");
  syn->add_option("--categories", corpus.categories, "Motion categories to generate");
  syn->add_option("--smoothing", synth.smoothing, "Acceleration smoothing radius n, frames");
  syn->add_option("--accel-noise", synth.accel_noise_std, "Additive Gaussian acceleration noise, m/s^2");

  // train
  auto* tr = app.add_subcommand("train", "Train the kinematics network on a corpus");
  sitpose::TrainOptions topt;
  std::string variant = "three_stage";
  std::vector<int> hidden;
  tr->add_option("--corpus", topt.corpus_dir, "Corpus directory")->required();
  tr->add_option("--weights", topt.weights_out, "Output weights file")->required();
  tr->add_option("--loss-csv", topt.loss_csv, "Per-epoch loss CSV");
  tr->add_option("--init", topt.init_weights, "Fine-tune starting from these weights");
  tr->add_option("--sequence", topt.sequences, "Restrict training to these corpus sequences");
  tr->add_option("--window-stride", topt.window_stride, "Keep every k-th window");
  tr->add_option("--max-windows", topt.max_windows, "Cap on the number of windows (0: all)");
  tr->add_option("--variant", variant, "Network variant")->check(CLI::IsMember({"single_stage", "three_stage"}));
  tr->add_option("--hidden", hidden, "Hidden sizes, one per stage");
  tr->add_option("--epochs", topt.train.epochs, "Training epochs");
  tr->add_option("--batch-size", topt.train.batch_size, "Batch size");
  tr->add_option("--lr", topt.train.learning_rate, "Learning rate");
  tr->add_option("--clip", topt.train.clip_norm, "Gradient clip norm (<= 0 disables)");
  tr->add_flag("--sequential", topt.train.sequential_stages, "Train the stages one after another");

  // estimate / stream share these
  std::string weights_path, imu_path, calib_path, out_path, torque_csv;
  sitpose::RefineConfig refine;
  auto add_estimation = [&](CLI::App* c) {
    c->add_option("--weights", weights_path, "Network weights")->required();
    c->add_option("--imu", imu_path, "IMU recording")->required();
    c->add_option("--calibration", calib_path, "Calibration record to apply to the raw IMU data");
    c->add_option("--kp", refine.gains.kp, "PD stiffness, 1/s^2");
    c->add_option("--kd", refine.gains.kd, "PD damping, 1/s");
    c->add_option("--substeps", refine.substeps, "Integration substeps per frame");
    c->add_option("--torque-limit", refine.torque_limit, "Joint torque bound, N m");
    c->add_option("--qp-tolerance", refine.qp.tolerance, "QP tolerance");
    c->add_option("--qp-iterations", refine.qp.max_iterations, "QP iteration cap");
  };
  auto* est = app.add_subcommand("estimate", "Estimate poses offline from an IMU recording");
  add_estimation(est);
  est->add_option("--out", out_path, "Output pose file")->required();
  est->add_option("--torque-csv", torque_csv, "Joint torque CSV (physics on)");
  std::string kin_out;
  est->add_option("--kinematic-out", kin_out, "Also write the unrefined network poses");

  auto* str = app.add_subcommand("stream", "Replay an IMU recording in real time and stream poses to stdout");
  add_estimation(str);
  double rate = 60.0;
  str->add_option("--rate", rate, "Replay rate, Hz (0: as fast as possible)");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Compare predicted and ground-truth pose files");
  std::vector<std::string> preds, gts;
  std::string csv_path, table_path;
  bool jitter_global = false;
  ev->add_option("--pred", preds, "Predicted pose files")->required();
  ev->add_option("--gt", gts, "Ground-truth motion files, one per prediction")->required();
  ev->add_option("--csv", csv_path, "Report CSV");
  ev->add_option("--table", table_path, "Report table (default: stdout)");
  ev->add_flag("--jitter-global", jitter_global, "Compute jitter without pelvis alignment");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Compute a T-pose calibration from one raw IMU frame");
  std::string cal_imu, cal_out, reference, apply_out;
  int cal_frame = 0;
  cal->add_option("--imu", cal_imu, "Raw IMU recording")->required();
  cal->add_option("--frame", cal_frame, "Index of the calibration frame");
  cal->add_option("--reference", reference, "Motion file whose first frame is the reference pose (default: T-pose)");
  cal->add_option("--out", cal_out, "Calibration record")->required();
  cal->add_option("--apply-out", apply_out, "Write the calibrated recording here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return Fail(ErrorKind::kConfigError, e.what(), "");
  }

  std::string command;
  for (auto* sub : app.get_subcommands()) command = sub->get_name();
  try {
    const auto model = LoadModel(skeleton);
    const bool physics_on = physics == "on";

    if (*syn) {
      sitpose::SynthesizeOptions o{syn_out, corpus, synth, seed};
      const auto m = sitpose::CmdSynthesize(model, o);
      std::cout << "wrote " << m.sequences.size() << " sequences to " << syn_out << '\n';
      for (const auto& [c, n] : m.CategoryCounts()) std::cout << "  " << c << ' ' << n << '\n';
    } else if (*tr) {
      topt.train.seed = seed;
      topt.network.variant =
          variant == "single_stage" ? sitpose::NetworkVariant::kSingleStage : sitpose::NetworkVariant::kThreeStage;
      topt.network.hidden = ParseHidden(hidden, topt.network.variant);
      const auto r = sitpose::CmdTrain(model, topt);
      std::cout << "trained " << r.loss.size() << " epochs, final loss " << r.loss.back() << '\n';
    } else if (*est || *str) {
      const auto weights = sitpose::LoadWeights(weights_path);
      const auto imu = sitpose::LoadImu(imu_path);
      sitpose::EstimateOptions eo;
      eo.physics = physics_on;
      refine.frame_rate = imu.frame_rate;
      eo.refine = refine;
      if (!calib_path.empty()) {
        auto in = sitpose::OpenForRead(calib_path);
        eo.calibration = sitpose::ReadCalibration(in);
      }
      if (*est) {
        const auto e = sitpose::EstimateSequence(model, weights, imu, eo, [](const std::string& msg) {
          std::cerr << "warning: " << msg << '\n';
        });
        sitpose::SaveMotion(out_path, model, e.poses);
        if (!kin_out.empty()) sitpose::SaveMotion(kin_out, model, e.kinematic);
        if (!torque_csv.empty()) {
          if (!e.refined) throw Error(ErrorKind::kConfigError, "--torque-csv needs --physics on");
          auto out = sitpose::OpenForWrite(torque_csv);
          sitpose::WriteTorqueCsv(out, model, *e.refined, e.poses.first_frame);
          sitpose::CheckWritten(out, torque_csv);
        }
        std::cerr << "estimated " << e.poses.frames.size() << " frames";
        if (e.refined) std::cerr << ", " << e.refined->fallback_frames.size() << " refinement fallbacks";
        std::cerr << '\n';
      } else {
        const auto s = sitpose::RunStream(model, weights, imu, eo, rate, std::cout, std::cerr);
        std::cout.flush();
        std::cerr << "streamed " << s.poses_out << " poses from " << s.frames_in << " frames; latency "
                  << s.latency_frames << " frames (" << s.latency_ms << " ms); compute mean " << s.mean_compute_ms
                  << " ms, max " << s.max_compute_ms << " ms; underruns " << s.underruns << '\n';
      }
    } else if (*ev) {
      std::vector<sitpose::MotionSequence> p, g;
      for (const auto& f : preds) p.push_back(sitpose::LoadMotion(f, model));
      for (const auto& f : gts) g.push_back(sitpose::LoadMotion(f, model));
      sitpose::EvalOptions eo;
      eo.frame_rate = g.empty() ? 60.0 : g.front().frame_rate;
      eo.jitter_pelvis_aligned = !jitter_global;
      const auto report = sitpose::EvaluateMotions(model, p, g, eo);
      if (!csv_path.empty()) {
        auto out = sitpose::OpenForWrite(csv_path);
        sitpose::WriteReportCsv(out, report);
        sitpose::CheckWritten(out, csv_path);
      }
      if (!table_path.empty()) {
        auto out = sitpose::OpenForWrite(table_path);
        sitpose::WriteReportTable(out, report);
        sitpose::CheckWritten(out, table_path);
      } else {
        sitpose::WriteReportTable(std::cout, report);
      }
    } else if (*cal) {
      const auto imu = sitpose::LoadImu(cal_imu);
      if (cal_frame < 0 || static_cast<std::size_t>(cal_frame) >= imu.frames.size()) {
        throw Error(ErrorKind::kConfigError, "calibration frame index out of range");
      }
      sitpose::Pose ref = sitpose::TPose(model);
      if (!reference.empty()) {
        const auto m = sitpose::LoadMotion(reference, model);
        if (m.frames.empty()) throw Error(ErrorKind::kDegenerateInput, "reference motion has no frames");
        ref = m.frames.front();
      }
      const auto c = sitpose::ComputeCalibration(imu.frames[static_cast<std::size_t>(cal_frame)], ref, model);
      auto out = sitpose::OpenForWrite(cal_out);
      sitpose::WriteCalibration(out, c);
      sitpose::CheckWritten(out, cal_out);
      if (!apply_out.empty()) sitpose::SaveImu(apply_out, sitpose::ApplyCalibration(c, imu));
    }
  } catch (const Error& e) {
    return Fail(e.kind(), e.detail(), command);
  } catch (const std::exception& e) {
    return Fail(ErrorKind::kIoError, e.what(), command);
  }
  return 0;
}
