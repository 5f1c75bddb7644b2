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

// Library walk-through: synthesize a short arm-raise corpus, train a small
// three-stage network on it, estimate poses back from the virtual IMUs with
// physics refinement and print the evaluation table.

#include <iostream>

#include "sitpose/pipeline.hpp"

int main() {
  using namespace sitpose;
  const KinematicModel& model = DefaultModel();

  CorpusConfig cc;
  cc.sequences_per_category = 1;
  cc.duration_s = 2.0;
  cc.categories = {"arm"};
  const auto corpus = GenerateSyntheticCorpus(model, cc, 7);
  const MotionSequence& motion = corpus.front();
  const ImuSequence imu = SynthesizeImu(model, motion);

  const auto samples = BuildTrainingSamples(model, motion, imu);
  TrainConfig tc;
  tc.epochs = 150;
  tc.seed = 7;
  const auto trained = Train(tc, NetworkConfig::ThreeStage(32, 16, 32), samples);
  std::cout << "windows " << samples.size() << ", final training loss " << trained.loss.back() << "\n\n";

  EstimateOptions eo;
  const Estimate e = EstimateSequence(model, trained.weights, imu, eo);
  const auto report = EvaluateMotions(model, {e.poses}, {motion});
  WriteReportTable(std::cout, report);
  return 0;
}
