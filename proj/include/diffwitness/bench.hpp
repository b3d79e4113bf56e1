#pragma once

// Task generation, the gradient-descent protocol, metrics and sweeps.

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "diffwitness/geom.hpp"
#include "diffwitness/gradient.hpp"
#include "diffwitness/smoothing.hpp"

namespace dw::bench {

using se3::Pose;

enum class Method { Ours, Analytical, Fd, Rs0, Rs1Dir };
const char* methodName(Method m);
Method parseMethod(const std::string& name);  // throws std::invalid_argument

enum class StepNorm { Split, Joint, Clip, None };
const char* stepNormName(StepNorm n);
StepNorm parseStepNorm(const std::string& name);

struct TaskSpec {
  int id = 0;
  std::shared_ptr<const geom::CompositeShape> base1, base2;
  double diag1 = 0.1, diag2 = 0.1;
  std::uint64_t bankSeed1 = 0, bankSeed2 = 0;
  Pose t1;
  Pose t2Init;
  Vec3 target1Local = Vec3::Zero();  // in the scaled shape frame
  Vec3 target2Local = Vec3::Zero();
  std::uint64_t seed = 0;
};

struct OptimizerConfig {
  int iterations = 2000;
  std::vector<std::pair<int, double>> schedule{{0, 10.0}, {200, 1.0}, {1800, 0.1}};
  double translationRatio = 0.01;  // s_t = ratio * s_r
  Method method = Method::Ours;
  smoothing::SamplingConfig sampling;
  smoothing::Score score = smoothing::Score::Distance;  // for method ours; rs1_dir always uses direction
  bool useEg = true;
  bool optimizeT1 = false;
  gradient::LossConfig loss;
  StepNorm stepNorm = StepNorm::Joint;
  bool propagateTau = true;
  double fdRotation = 1e-6;
  double fdTranslation = 1e-6;  // times diag
  double rs0Sigma = 1e-2;
  int rs0Samples = 12;
  double earlyExit = 1e-14;
  std::size_t bankSamples = geom::kDefaultBankSamples;

  double rotationStep(int iteration) const;
  // Replaces the first phase's step; later phases keep their values.
  void setInitialRotationStep(double s);
  void validate() const;  // throws std::invalid_argument
};

inline constexpr double kConvergedLoss = 1e-6;

struct RunRecord {
  int taskId = 0;
  Method method = Method::Ours;
  double finalLoss = 0.0;
  std::vector<double> trace;  // loss before each update
  int iterations = 0;
  std::vector<double> forwardUs;
  std::vector<double> backwardUs;
  int forwardFailures = 0;
  bool failed = false;
  std::string error;

  bool converged() const { return finalLoss < kConvergedLoss; }
  double medianForwardUs() const;
  double medianBackwardUs() const;
};

struct MetricSummary {
  double d5 = 0.0;
  double d9 = 0.0;
  double acc = 0.0;
  std::size_t nTasks = 0;
};

// Shapes are rescaled per task to a diagonal drawn from [0.01, 0.2].
std::vector<TaskSpec> generateTasks(std::shared_ptr<const geom::CompositeShape> shape1,
                                    std::shared_ptr<const geom::CompositeShape> shape2, int nTasks,
                                    std::uint64_t seed, int firstId = 0);

// Scaled shapes and banks for one task.
struct TaskInstance {
  geom::CompositeShape s1, s2;
  geom::SurfacePointBank b1, b2;
};
TaskInstance instantiate(const TaskSpec& task, std::size_t bankSamples = geom::kDefaultBankSamples);

RunRecord optimizeTask(const TaskSpec& task, const OptimizerConfig& cfg);

// Lower-interpolation quantile of a sample.
double lowerQuantile(std::vector<double> values, double q);
MetricSummary summarize(const std::vector<RunRecord>& records);

// Runs every task; results come back in task order regardless of workers.
std::vector<RunRecord> runBatch(const std::vector<TaskSpec>& tasks, const OptimizerConfig& cfg, int workers);

enum class SweepAxis { Margin, StepSize, Ablation, None };
const char* sweepAxisName(SweepAxis a);
SweepAxis parseSweepAxis(const std::string& name);

struct SweepCell {
  SweepAxis axis = SweepAxis::None;
  std::string value;  // grid label
  Method method = Method::Ours;
  MetricSummary summary;
  std::vector<RunRecord> records;
};

struct SweepVariant {
  std::string label;
  OptimizerConfig cfg;
};

// Margin grid sets beta, step-size grid sets the initial s_r.
std::vector<SweepVariant> expandGrid(SweepAxis axis, const std::vector<double>& grid, const OptimizerConfig& base);
// Named ablation rows: dist/dir, adaptive/fixed/neighbor, eg/no_eg/joint.
std::vector<SweepVariant> ablationVariants(const OptimizerConfig& base);

std::vector<SweepCell> runSweep(SweepAxis axis, const std::vector<SweepVariant>& variants,
                                const std::vector<Method>& methods, const std::vector<TaskSpec>& tasks, int workers);

struct RuntimeSample {
  double forwardUs = 0.0;
  double backwardUs = 0.0;
};

// Median per-iteration time per phase; the first `warmup` iterations of each task are dropped.
RuntimeSample measureRuntime(const OptimizerConfig& cfg, const std::vector<TaskSpec>& tasks, int repetitions,
                             int warmup = 5);

// task_id,method,final_loss,iters,fwd_us,bwd_us
std::string csvHeader();
std::string csvRow(const RunRecord& r);

}  // namespace dw::bench
