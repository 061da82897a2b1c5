// Copyright 2026 The Strider Authors
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

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "strider/selfcheck.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitExperimentFailure = 1;
constexpr int kExitConfigError = 2;

std::string defaultModelPath() { return std::string(STRIDER_MODELS_DIR) + "/biped_p1_like.json"; }
std::string defaultQuadPath() { return std::string(STRIDER_MODELS_DIR) + "/quadruped_a1_like.json"; }
std::string defaultConfigPath() { return std::string(STRIDER_CONFIG_DIR) + "/default.json"; }

std::vector<int> parseTests(const std::string& spec, bool quadModel) {
  if (spec == "all") {
    return quadModel ? std::vector<int>{7, 8, 9} : std::vector<int>{1, 2, 3, 4, 5, 6};
  }
  std::vector<int> out;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    size_t pos = 0;
    const int t = std::stoi(tok, &pos);
    if (pos != tok.size() || t < 1 || t > 9) {
      throw strider::ConfigError("invalid test id '" + tok + "' (expected 1..9 or 'all')");
    }
    out.push_back(t);
  }
  if (out.empty()) throw strider::ConfigError("no tests selected");
  return out;
}

int runCommand(const std::string& testSpec, const std::string& mode, const std::string& modelPath,
               const std::string& configPath, const std::string& outDir, double duration,
               bool traces) {
  const strider::RobotModel model = strider::RobotModel::loadFromFile(modelPath);
  strider::ControllerConfig cfg = strider::loadControllerConfig(configPath);
  const bool quad = model.contactFrames().size() >= 4;

  strider::SuiteOptions opt;
  opt.tests = parseTests(testSpec, quad);
  for (int t : opt.tests) {
    if (strider::presetIsQuadruped(t) != quad) {
      throw strider::ConfigError("test " + std::to_string(t) + " does not match model '" +
                                 modelPath + "' (tests 1-6 need a biped, 7-9 a quadruped)");
    }
  }
  if (mode == "pd") {
    opt.runRiccati = false;
  } else if (mode == "riccati") {
    opt.runPd = false;
  } else if (mode != "both") {
    throw strider::ConfigError("invalid --mode '" + mode + "' (expected pd|riccati|both)");
  }
  opt.outDir = outDir;
  opt.duration = duration;
  opt.writeTraces = traces;

  const strider::SuiteReport rep = strider::runSuite(model, cfg, opt);
  std::cout << rep.summaryText;
  std::cout << "\nwrote " << outDir << "/summary.csv and summary.txt\n";
  return rep.anyFailure ? kExitExperimentFailure : kExitOk;
}

int verifyCommand(bool quick) {
  using strider::CheckResult;
  const strider::RobotModel biped = strider::RobotModel::loadFromFile(defaultModelPath());
  strider::ControllerConfig cfg;
  const strider::State standing = strider::standingState(biped, cfg.gait.reference);

  std::vector<CheckResult> results;
  results.push_back(strider::checkBarrierDerivatives());
  results.push_back(strider::checkRiccatiBatchEquivalence(quick ? 10 : 50));
  results.push_back(strider::checkBruteForceCrossCheck());
  results.push_back(strider::checkReducedDynamics(biped, standing, quick ? 20 : 100));
  results.push_back(strider::checkStanceResiduals(biped, standing));
  results.push_back(strider::checkBallisticEnergy());
  results.push_back(strider::checkImprovementArithmetic());
  if (!quick) {
    results.push_back(strider::checkDeterminism(biped));
    results.push_back(strider::checkStanceDrift(biped));
  }

  bool all = true;
  for (const auto& r : results) {
    std::printf("%s  %-45s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    all = all && r.pass;
  }
  std::printf("%s\n", all ? "verify: all checks passed" : "verify: FAILURES");
  return all ? kExitOk : kExitExperimentFailure;
}

int benchCommand(double duration) {
  const strider::RobotModel model = strider::RobotModel::loadFromFile(defaultModelPath());
  strider::ControllerConfig cfg;
  const strider::ExperimentRun run = strider::runExperiment(model, cfg, 1, strider::SimConfig{},
                                                            duration);
  const auto& r = run.result;
  std::printf("bench: preset 1, riccati, %.1f s simulated%s\n", duration,
              r.fell ? " (FELL)" : "");
  std::printf("  horizon re-solve  p50 %7.3f ms  p95 %7.3f ms  max %7.3f ms  (%d solves)\n",
              r.lqrMs.p50, r.lqrMs.p95, r.lqrMs.max, r.lqrMs.samples);
  std::printf("  wbc tick          p50 %7.3f ms  p95 %7.3f ms  max %7.3f ms  (%d ticks)\n",
              r.wbcMs.p50, r.wbcMs.p95, r.wbcMs.max, r.wbcMs.samples);
  std::printf("  tracking mse      linear %.4f  angular %.4f\n", r.linearMse, r.angularMse);
  const bool ok = !r.fell && r.lqrMs.p95 < 10.0 && r.wbcMs.p95 < 1.0;
  std::printf("  budgets           lqr p95 < 10 ms: %s   wbc p95 < 1 ms: %s\n",
              r.lqrMs.p95 < 10.0 ? "yes" : "NO", r.wbcMs.p95 < 1.0 ? "yes" : "NO");
  return ok ? kExitOk : kExitExperimentFailure;
}

int tuneCommand(double duration) {
  const strider::RobotModel model = strider::RobotModel::loadFromFile(defaultModelPath());
  strider::ControllerConfig cfg;
  const auto table = strider::gridSearchPd(model, cfg, duration);
  std::printf("PD gain grid search on preset 1 (%.0f s each), best first:\n", duration);
  std::printf("  %-12s %10s %10s %6s\n", "gains", "lin mse", "ang mse", "fell");
  for (const auto& [gains, r] : table) {
    std::printf("  %-12s %10.4f %10.4f %6s  %s\n", gains.label.c_str(), r.linearMse, r.angularMse,
                r.fell ? "yes" : "no", r.note.c_str());
  }
  return table.empty() ? kExitExperimentFailure : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"strider: whole-body control toolkit and desk-scale gait simulator"};
  app.require_subcommand(1);

  std::string testSpec = "all";
  std::string mode = "both";
  std::string modelPath = defaultModelPath();
  std::string configPath = defaultConfigPath();
  std::string outDir = "out";
  double duration = 10.0;
  bool traces = false;
  bool quick = false;
  double benchDuration = 5.0;
  double tuneDuration = 10.0;

  CLI::App* run = app.add_subcommand("run", "run tracking experiments and write a summary");
  run->add_option("--test", testSpec, "preset id 1..9, comma list, or 'all'");
  run->add_option("--mode", mode, "pd | riccati | both");
  run->add_option("--model", modelPath, "robot description json");
  run->add_option("--config", configPath, "controller config json");
  run->add_option("--out", outDir, "output directory");
  run->add_option("--duration", duration, "simulated seconds per run");
  run->add_flag("--traces", traces, "also write per-run trace csv files");

  CLI::App* verify = app.add_subcommand("verify", "run the built-in oracle checks");
  verify->add_flag("--quick", quick, "smaller sample counts, skip closed-loop checks");

  CLI::App* bench = app.add_subcommand("bench", "solver timing percentiles on the biped");
  bench->add_option("--duration", benchDuration, "simulated seconds");

  CLI::App* tune = app.add_subcommand("tune", "grid-search PD base gains on preset 1");
  tune->add_option("--duration", tuneDuration, "simulated seconds per combination");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfigError;
  }

  try {
    if (run->parsed()) return runCommand(testSpec, mode, modelPath, configPath, outDir, duration, traces);
    if (verify->parsed()) return verifyCommand(quick);
    if (bench->parsed()) return benchCommand(benchDuration);
    if (tune->parsed()) return tuneCommand(tuneDuration);
  } catch (const strider::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const strider::ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitExperimentFailure;
  }
  return kExitConfigError;
}
