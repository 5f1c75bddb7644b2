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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "sitpose/pipeline.hpp"
#include "test_support.hpp"

namespace sitpose {
namespace {

namespace fs = std::filesystem;
using testing::ReadFile;
using testing::CommandResult;

const std::string kCli = SITPOSE_CLI;

std::string Cli(const std::string& args) { return kCli + " " + args; }

CommandResult Exec(const std::string& cmd, const std::string& scratch) { return testing::Run(cmd, scratch); }

// Tiny corpus and network shared by the whole suite.
class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new std::string(testing::TempDir("pipeline"));
    const auto r1 = Exec(Cli("--seed 5 synthesize --out " + Corpus() + " --sequences 1 --duration 1"), *dir_);
    ASSERT_EQ(r1.exit_code, 0) << r1.err;
    const auto r2 = Exec(Cli("--seed 9 train --corpus " + Corpus() + " --weights " + Weights() + " --loss-csv " +
                            *dir_ + "/loss.csv --hidden 8 8 8 --epochs 3 --max-windows 16 --batch-size 8"),
                        *dir_);
    ASSERT_EQ(r2.exit_code, 0) << r2.err;
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
  }
  static std::string Corpus() { return *dir_ + "/corpus"; }
  static std::string Weights() { return *dir_ + "/w.bin"; }
  static std::string Scratch(const std::string& name) {
    const std::string d = *dir_ + "/" + name;
    fs::create_directories(d);
    return d;
  }
  static std::string FirstSequence() { return LoadManifest(Corpus()).sequences.front().name; }

  static std::string* dir_;
};

std::string* Pipeline::dir_ = nullptr;

nlohmann::json LastJsonLine(const std::string& err) {
  std::istringstream in(err);
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  return nlohmann::json::parse(last);
}

TEST_F(Pipeline, SynthesizeIsDeterministic) {
  const std::string s = Scratch("syn");
  ASSERT_EQ(Exec(Cli("--seed 5 synthesize --out " + s + "/again --sequences 1 --duration 1"), s).exit_code, 0);
  ASSERT_EQ(Exec(Cli("--seed 6 synthesize --out " + s + "/other --sequences 1 --duration 1"), s).exit_code, 0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(Corpus())) {
    const auto name = e.path().filename().string();
    EXPECT_EQ(ReadFile(e.path().string()), ReadFile(s + "/again/" + name)) << name;
    ++files;
  }
  EXPECT_EQ(files, 11);
  const auto imu = LoadManifest(Corpus()).sequences.front().name + ".imu";
  EXPECT_NE(ReadFile(Corpus() + "/" + imu), ReadFile(s + "/other/" + imu));
}

TEST_F(Pipeline, ManifestMatchesContent) {
  const CorpusManifest m = LoadManifest(Corpus());
  for (const auto& [c, n] : m.CategoryCounts()) EXPECT_EQ(n, 1) << c;
  EXPECT_EQ(m.sequences.size(), kMotionCategories.size());
  const KinematicModel& model = DefaultModel();
  for (const auto& e : m.sequences) {
    const auto motion = LoadMotion(MotionPath(Corpus(), e.name), model);
    const auto imu = LoadImu(ImuPath(Corpus(), e.name));
    EXPECT_EQ(motion.tag, e.tag);
    EXPECT_EQ(motion.frames.size(), e.motion_frames);
    EXPECT_EQ(imu.frames.size(), e.imu_frames);
    EXPECT_EQ(e.motion_frames, 60u);
    EXPECT_EQ(e.imu_frames, e.motion_frames - 2 * static_cast<std::size_t>(m.smoothing));
  }
}

TEST_F(Pipeline, ImuFilesEqualInMemorySynthesis) {
  const KinematicModel& model = DefaultModel();
  CorpusConfig cfg;
  cfg.sequences_per_category = 1;
  cfg.duration_s = 1.0;
  std::mt19937_64 rng(5);
  const auto corpus = GenerateSyntheticCorpus(model, cfg, rng());
  for (const auto& seq : corpus) {
    SynthesisOptions so;
    so.noise_seed = rng();
    const ImuSequence mem = SynthesizeImu(model, seq, so);
    const ImuSequence disk = LoadImu(ImuPath(Corpus(), seq.subject));
    ASSERT_EQ(mem.frames.size(), disk.frames.size());
    EXPECT_EQ(mem.first_frame, disk.first_frame);
    for (std::size_t f = 0; f < mem.frames.size(); ++f) {
      for (std::size_t s = 0; s < kSensorCount; ++s) {
        EXPECT_EQ(mem.frames[f].acceleration[s], disk.frames[f].acceleration[s]);
        EXPECT_EQ(mem.frames[f].orientation[s], disk.frames[f].orientation[s]);
      }
    }
  }
}

TEST_F(Pipeline, TrainWritesLossAndIsDeterministic) {
  const std::string s = Scratch("train");
  const std::string loss = ReadFile(*dir_ + "/loss.csv");
  std::istringstream in(loss);
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    const double v = std::stod(line.substr(line.find(',') + 1));
    EXPECT_TRUE(std::isfinite(v));
    ++rows;
  }
  EXPECT_EQ(rows, 3);
  ASSERT_EQ(Exec(Cli("--seed 9 train --corpus " + Corpus() + " --weights " + s +
                    "/w.bin --hidden 8 8 8 --epochs 3 --max-windows 16 --batch-size 8"),
                s)
                .exit_code,
            0);
  EXPECT_EQ(ReadFile(Weights()), ReadFile(s + "/w.bin"));
}

TEST_F(Pipeline, FineTuneChangesWeightsKeepsShapes) {
  const std::string s = Scratch("finetune");
  const auto r = Exec(Cli("--seed 2 train --corpus " + Corpus() + " --weights " + s + "/ft.bin --init " + Weights() +
                         " --sequence " + FirstSequence() + " --epochs 2 --max-windows 8 --batch-size 4"),
                     s);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto a = LoadWeights(Weights());
  const auto b = LoadWeights(s + "/ft.bin");
  EXPECT_NE(ReadFile(Weights()), ReadFile(s + "/ft.bin"));
  EXPECT_EQ(a.config.hidden, b.config.hidden);
  EXPECT_EQ(a.values.size(), b.values.size());
}

TEST_F(Pipeline, ReloadedWeightsPredictIdentically) {
  const KinematicModel& model = DefaultModel();
  TrainOptions o;
  o.corpus_dir = Corpus();
  o.weights_out = Scratch("reload") + "/w.bin";
  o.max_windows = 8;
  o.network.hidden = {8, 8, 8};
  o.train.epochs = 1;
  o.train.batch_size = 4;
  const TrainResult r = CmdTrain(model, o);
  const auto loaded = LoadWeights(o.weights_out);
  const auto imu = LoadImu(ImuPath(Corpus(), FirstSequence()));
  Eigen::MatrixXd window(kNormalizedInputSize, 26);
  for (int k = 0; k < 26; ++k) window.col(k) = NormalizeFrame(imu.frames[static_cast<std::size_t>(k)]);
  const auto a = PredictPose(r.weights, window);
  const auto b = PredictPose(loaded, window);
  EXPECT_EQ(a.raw, b.raw);
}

TEST_F(Pipeline, EstimateFrameCountAndTorques) {
  const std::string s = Scratch("estimate");
  const std::string imu = ImuPath(Corpus(), FirstSequence());
  const auto r = Exec(Cli("estimate --weights " + Weights() + " --imu " + imu + " --out " + s +
                         "/p.motion --torque-csv " + s + "/t.csv --kinematic-out " + s + "/k.motion"),
                     s);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const KinematicModel& model = DefaultModel();
  const auto in = LoadImu(imu);
  const auto out = LoadMotion(s + "/p.motion", model);
  EXPECT_EQ(out.frames.size(), in.frames.size() - 25);
  EXPECT_EQ(out.first_frame, in.first_frame + 20);
  EXPECT_EQ(LoadMotion(s + "/k.motion", model).frames.size(), out.frames.size());
  const std::string csv = ReadFile(s + "/t.csv");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), 1 + 15 * out.frames.size());

  const auto off = Exec(Cli("--physics off estimate --weights " + Weights() + " --imu " + imu + " --out " + s +
                           "/off.motion"),
                       s);
  ASSERT_EQ(off.exit_code, 0) << off.err;
  EXPECT_EQ(ReadFile(s + "/off.motion"), ReadFile(s + "/k.motion"));
}

TEST_F(Pipeline, StreamMatchesEstimateExactly) {
  const std::string s = Scratch("stream");
  const std::string imu = ImuPath(Corpus(), FirstSequence());
  ASSERT_EQ(Exec(Cli("estimate --weights " + Weights() + " --imu " + imu + " --out " + s + "/p.motion"), s).exit_code,
            0);
  const auto r = Exec(Cli("stream --rate 0 --weights " + Weights() + " --imu " + imu), s);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.err.find("latency 5 frames"), std::string::npos) << r.err;
  const KinematicModel& model = DefaultModel();
  std::istringstream in(r.out);
  const auto streamed = ReadStream(in, model);
  const auto offline = LoadMotion(s + "/p.motion", model);
  ASSERT_EQ(streamed.size(), offline.frames.size());
  for (std::size_t f = 0; f < streamed.size(); ++f) {
    EXPECT_EQ(streamed[f].first, offline.first_frame + static_cast<int>(f));
    EXPECT_EQ(streamed[f].second.root_position, offline.frames[f].root_position);
    for (std::size_t j = 0; j < streamed[f].second.local_rotations.size(); ++j) {
      EXPECT_EQ(streamed[f].second.local_rotations[j].matrix(), offline.frames[f].local_rotations[j].matrix());
    }
  }
}

TEST_F(Pipeline, EvaluatePerfectPredictionAndCategories) {
  const std::string s = Scratch("evaluate");
  std::string args;
  for (const auto& e : LoadManifest(Corpus()).sequences) {
    const std::string p = MotionPath(Corpus(), e.name);
    args += " --pred " + p + " --gt " + p;
  }
  const auto r = Exec(Cli("evaluate" + args + " --csv " + s + "/r.csv"), s);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  for (auto c : kMotionCategories) EXPECT_NE(r.out.find(std::string(c)), std::string::npos) << c;
  for (const char* c : kReportColumns) EXPECT_NE(r.out.find(c), std::string::npos) << c;
  std::istringstream in(ReadFile(s + "/r.csv"));
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    std::getline(ss, cell, ',');
    // jitter describes the prediction itself, so only the error columns vanish
    for (int k = 0; std::getline(ss, cell, ','); ++k) {
      if (k >= 6 && k <= 8) {
        EXPECT_GT(std::stod(cell), 0.0) << line;
      } else {
        EXPECT_NEAR(std::stod(cell), 0.0, 1e-9) << line;
      }
    }
    ++rows;
  }
  EXPECT_EQ(rows, 6);
}

TEST_F(Pipeline, EndToEndReportIsReproducible) {
  const std::string s = Scratch("e2e");
  const std::string seq = FirstSequence();
  std::string reports[2];
  for (int k = 0; k < 2; ++k) {
    const std::string d = s + "/" + std::to_string(k);
    fs::create_directories(d);
    ASSERT_EQ(Exec(Cli("--seed 3 synthesize --out " + d + " --sequences 1 --duration 1 --categories arm"), d).exit_code,
              0);
    const std::string name = LoadManifest(d).sequences.front().name;
    ASSERT_EQ(Exec(Cli("--seed 4 train --corpus " + d + " --weights " + d +
                      "/w.bin --hidden 8 8 8 --epochs 2 --max-windows 8 --batch-size 4"),
                  d)
                  .exit_code,
              0);
    ASSERT_EQ(Exec(Cli("estimate --weights " + d + "/w.bin --imu " + ImuPath(d, name) + " --out " + d + "/p.motion"), d)
                  .exit_code,
              0);
    ASSERT_EQ(Exec(Cli("evaluate --pred " + d + "/p.motion --gt " + MotionPath(d, name) + " --csv " + d + "/r.csv"), d)
                  .exit_code,
              0);
    reports[k] = ReadFile(d + "/r.csv");
  }
  EXPECT_FALSE(reports[0].empty());
  EXPECT_EQ(reports[0], reports[1]);
}

TEST_F(Pipeline, CalibrateWritesRecord) {
  const std::string s = Scratch("calibrate");
  const auto r = Exec(Cli("calibrate --imu " + ImuPath(Corpus(), FirstSequence()) + " --out " + s +
                         "/c.txt --apply-out " + s + "/c.imu"),
                     s);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  auto in = OpenForRead(s + "/c.txt");
  EXPECT_NO_THROW(ReadCalibration(in));
  EXPECT_EQ(LoadImu(s + "/c.imu").frames.size(), LoadImu(ImuPath(Corpus(), FirstSequence())).frames.size());
  const auto bad = Exec(Cli("calibrate --imu " + ImuPath(Corpus(), FirstSequence()) + " --frame 100000 --out " + s +
                           "/c2.txt"),
                       s);
  EXPECT_EQ(bad.exit_code, 2);
}

struct ErrorCase {
  std::string args;
  int exit_code;
  std::string kind;
};

TEST_F(Pipeline, ErrorsAreStructured) {
  const std::string s = Scratch("errors");
  const std::string imu = ImuPath(Corpus(), FirstSequence());
  {
    ImuSequence shortseq = LoadImu(imu);
    shortseq.frames.resize(10);
    SaveImu(s + "/short.imu", shortseq);
  }
  std::ofstream(s + "/garbage.imu") << "not an imu file\n";
  const std::string motion = MotionPath(Corpus(), FirstSequence());
  const std::vector<ErrorCase> cases = {
      {"estimate --imu " + imu + " --out x", 2, "ConfigError"},
      {"--physics maybe estimate --weights " + Weights() + " --imu " + imu + " --out x", 2, "ConfigError"},
      {"estimate --weights " + s + "/none.bin --imu " + imu + " --out " + s + "/x", 3, "IoError"},
      {"estimate --weights " + Weights() + " --imu " + s + "/garbage.imu --out " + s + "/x", 3, "ParseError"},
      {"estimate --weights " + Weights() + " --imu " + s + "/short.imu --out " + s + "/x", 3, "SequenceTooShort"},
      {"--physics off estimate --weights " + Weights() + " --imu " + imu + " --out " + s + "/x --torque-csv " + s +
           "/t.csv",
       2, "ConfigError"},
      {"evaluate --pred " + motion + " --gt " + motion + " --gt " + motion, 3, "LengthMismatch"},
      {"train --corpus " + s + "/missing --weights " + s + "/w.bin", 3, "IoError"},
      {"train --corpus " + Corpus() + " --weights " + s + "/w.bin --sequence nope", 2, "ConfigError"},
  };
  for (const auto& c : cases) {
    const auto r = Exec(Cli(c.args), s);
    EXPECT_EQ(r.exit_code, c.exit_code) << c.args << "\n" << r.err;
    ASSERT_FALSE(r.err.empty()) << c.args;
    const auto j = LastJsonLine(r.err);
    EXPECT_EQ(j["error"]["kind"], c.kind) << c.args;
    EXPECT_EQ(j["error"]["exit_code"], c.exit_code);
  }
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(ExitCode(ErrorKind::kConfigError), 2);
  for (auto k : {ErrorKind::kNonFiniteLoss, ErrorKind::kSingularMassMatrix, ErrorKind::kInfeasibleProblem,
                 ErrorKind::kMaxIterations, ErrorKind::kIllPosedProblem}) {
    EXPECT_EQ(ExitCode(k), 4) << ErrorName(k);
  }
  for (auto k : {ErrorKind::kParseError, ErrorKind::kIoError, ErrorKind::kLengthMismatch,
                 ErrorKind::kSequenceTooShort, ErrorKind::kDegenerateInput}) {
    EXPECT_EQ(ExitCode(k), 3) << ErrorName(k);
  }
}

}  // namespace
}  // namespace sitpose
