#include "diffwitness/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

namespace dw::bench {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

const char* methodName(Method m) {
  switch (m) {
    case Method::Ours: return "ours";
    case Method::Analytical: return "analytical";
    case Method::Fd: return "fd";
    case Method::Rs0: return "rs0";
    case Method::Rs1Dir: return "rs1_dir";
  }
  return "?";
}

Method parseMethod(const std::string& name) {
  for (Method m : {Method::Ours, Method::Analytical, Method::Fd, Method::Rs0, Method::Rs1Dir}) {
    if (name == methodName(m)) return m;
  }
  throw std::invalid_argument("unknown method '" + name + "'");
}

const char* stepNormName(StepNorm n) {
  switch (n) {
    case StepNorm::Split: return "split";
    case StepNorm::Joint: return "joint";
    case StepNorm::Clip: return "clip";
    case StepNorm::None: return "none";
  }
  return "?";
}

StepNorm parseStepNorm(const std::string& name) {
  for (StepNorm n : {StepNorm::Split, StepNorm::Joint, StepNorm::Clip, StepNorm::None}) {
    if (name == stepNormName(n)) return n;
  }
  throw std::invalid_argument("unknown step normalization '" + name + "'");
}

double OptimizerConfig::rotationStep(int iteration) const {
  double s = schedule.front().second;
  for (const auto& [at, value] : schedule) {
    if (iteration >= at) s = value;
  }
  return s;
}

void OptimizerConfig::setInitialRotationStep(double s) { schedule.front().second = s; }

void OptimizerConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("iterations must be non-negative");
  if (schedule.empty()) throw std::invalid_argument("empty step schedule");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i].second > 0.0)) throw std::invalid_argument("step sizes must be positive");
    if (i > 0 && schedule[i].first <= schedule[i - 1].first) {
      throw std::invalid_argument("schedule iterations must be strictly increasing");
    }
  }
  if (!(translationRatio > 0.0)) throw std::invalid_argument("translation ratio must be positive");
  if (loss.beta < 0.0) throw std::invalid_argument("beta must be non-negative");
  if (!(fdRotation > 0.0) || !(fdTranslation > 0.0)) throw std::invalid_argument("fd steps must be positive");
  if (!(rs0Sigma > 0.0) || rs0Samples < 1) throw std::invalid_argument("rs0 needs sigma > 0 and samples >= 1");
  sampling.validate();
}

double RunRecord::medianForwardUs() const { return median(forwardUs); }
double RunRecord::medianBackwardUs() const { return median(backwardUs); }

std::vector<TaskSpec> generateTasks(std::shared_ptr<const geom::CompositeShape> shape1,
                                    std::shared_ptr<const geom::CompositeShape> shape2, int nTasks,
                                    std::uint64_t seed, int firstId) {
  if (nTasks < 1) throw std::invalid_argument("n_tasks must be at least 1");
  const std::uint64_t stream = splitmix(seed ^ splitmix(fnv1a(shape1->name) ^ (fnv1a(shape2->name) << 1)));
  std::vector<TaskSpec> tasks;
  tasks.reserve(nTasks);
  for (int k = 0; k < nTasks; ++k) {
    TaskSpec t;
    t.id = firstId + k;
    t.base1 = shape1;
    t.base2 = shape2;
    t.seed = splitmix(stream + static_cast<std::uint64_t>(k));
    std::mt19937_64 rng(t.seed);
    std::uniform_real_distribution<double> diag(0.01, 0.2), unit(0.0, 1.0);
    std::normal_distribution<double> n01;
    t.diag1 = diag(rng);
    t.diag2 = diag(rng);
    t.bankSeed1 = rng();
    t.bankSeed2 = rng();
    const TaskInstance inst = instantiate(t);
    auto pick = [&](const geom::SurfacePointBank& bank) {
      const std::size_t nv = bank.vertexCount, ns = bank.points.size() - nv;
      const bool vertex = ns == 0 || unit(rng) < 0.5;
      const std::size_t idx = vertex ? std::uniform_int_distribution<std::size_t>(0, nv - 1)(rng)
                                     : nv + std::uniform_int_distribution<std::size_t>(0, ns - 1)(rng);
      return bank.points[idx].position;
    };
    t.target1Local = pick(inst.b1);
    t.target2Local = pick(inst.b2);
    t.t1 = Pose{se3::randomRotation(rng, n01), Vec3::Zero()};
    Vec3 dir(n01(rng), n01(rng), n01(rng));
    dir.normalize();
    const double radius = (0.5 + unit(rng)) * 0.5 * (t.diag1 + t.diag2);
    t.t2Init = Pose{se3::randomRotation(rng, n01), t.t1.act(inst.s1.bounds().center()) + radius * dir};
    tasks.push_back(std::move(t));
  }
  return tasks;
}

TaskInstance instantiate(const TaskSpec& task, std::size_t bankSamples) {
  TaskInstance inst;
  inst.s1 = geom::normalizeScale(*task.base1, task.diag1);
  inst.s2 = geom::normalizeScale(*task.base2, task.diag2);
  inst.b1 = geom::sampleSurfaceBank(inst.s1, bankSamples, task.bankSeed1);
  inst.b2 = geom::sampleSurfaceBank(inst.s2, bankSamples, task.bankSeed2);
  return inst;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsedUs(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::micro>(b - a).count();
}

Vec3 unitOrKeep(const Vec3& x) {
  const double n = x.norm();
  return n > 1e-12 ? Vec3(x / n) : x;
}

se3::Twist scaledStep(const se3::Twist& xi, double sr, double st, StepNorm mode) {
  Vec3 w = xi.omega, v = xi.v;
  switch (mode) {
    case StepNorm::Split:
      w = unitOrKeep(w);
      v = unitOrKeep(v);
      break;
    case StepNorm::Joint: {
      const double n = xi.vector().norm();
      if (n > 1e-12) {
        w /= n;
        v /= n;
      }
      break;
    }
    case StepNorm::Clip:
      w /= std::max(1.0, w.norm());
      v /= std::max(1.0, v.norm());
      break;
    case StepNorm::None:
      break;
  }
  return {sr * w, st * v};
}

}  // namespace

RunRecord optimizeTask(const TaskSpec& task, const OptimizerConfig& cfg) {
  RunRecord rec;
  rec.taskId = task.id;
  rec.method = cfg.method;
  try {
    const TaskInstance inst = instantiate(task, cfg.bankSamples);
    const gradient::PairProblem problem{&inst.s1, &inst.s2, task.target1Local, task.target2Local, cfg.loss};
    const gradient::GradientOptions gopt{cfg.useEg, cfg.optimizeT1};
    const smoothing::SamplingConfig& sampling = cfg.sampling;
    // The direction-score baseline samples the k-ring around the witness vertex.
    smoothing::SamplingConfig rs1Sampling = cfg.sampling;
    rs1Sampling.strategy = smoothing::Strategy::Neighbor;
    Pose t1 = task.t1, t2 = task.t2Init;
    rec.trace.reserve(cfg.iterations + 1);

    auto forward = [&](narrowphase::WitnessResult& fwd) {
      fwd = narrowphase::compositeWitness(inst.s1, t1, inst.s2, t2);
      if (!fwd.converged) ++rec.forwardFailures;
      return gradient::loss(fwd.x1World, fwd.x2World, t1.act(task.target1Local), t2.act(task.target2Local),
                            cfg.loss);
    };

    bool stopped = false;
    narrowphase::WitnessResult fwd;
    for (int it = 0; it < cfg.iterations; ++it) {
      const auto a = Clock::now();
      const gradient::LossValue l = forward(fwd);
      const auto b = Clock::now();
      rec.trace.push_back(l.value);
      if (l.value < cfg.earlyExit) {
        rec.forwardUs.push_back(elapsedUs(a, b));
        rec.backwardUs.push_back(0.0);
        stopped = true;
        break;
      }

      std::pair<Vec6, Vec6> coord;
      switch (cfg.method) {
        case Method::Ours:
        case Method::Rs1Dir: {
          const smoothing::Score score = cfg.method == Method::Ours ? cfg.score : smoothing::Score::Direction;
          const smoothing::ObjectContext o1{&inst.s1, &inst.b1, t1, t1.act(task.target1Local)};
          const smoothing::ObjectContext o2{&inst.s2, &inst.b2, t2, t2.act(task.target2Local)};
          const smoothing::SmoothedPair pair =
              smoothing::smoothedWitness(o1, o2, fwd, cfg.method == Method::Ours ? sampling : rs1Sampling, score,
                                         task.seed + static_cast<std::uint64_t>(it));
          const gradient::WitnessJacobians j = gradient::witnessJacobians(pair, t1, t2, cfg.propagateTau);
          coord = gradient::coordinateGradients(j, l, t1, t2, task.target1Local, task.target2Local);
          break;
        }
        case Method::Analytical: {
          const gradient::AnalyticalResult r = gradient::analyticalJacobians(problem, t1, t2, fwd);
          coord = gradient::coordinateGradients(r.jac, l, t1, t2, task.target1Local, task.target2Local);
          break;
        }
        case Method::Fd:
          coord = gradient::gradFiniteDifference(problem, t1, t2, cfg.fdRotation, cfg.fdTranslation, gopt.needsT1());
          break;
        case Method::Rs0:
          coord = gradient::gradRs0(problem, t1, t2, cfg.rs0Sigma, cfg.rs0Samples,
                                    task.seed ^ (0x5851f42d4c957f2dULL * static_cast<std::uint64_t>(it + 1)),
                                    gopt.needsT1());
          break;
      }
      const gradient::TaskGradient g = gradient::assemblePoseGradients(coord.first, coord.second, t1, t2, gopt);
      const double sr = cfg.rotationStep(it), st = sr * cfg.translationRatio;
      if (cfg.optimizeT1) {
        if (cfg.stepNorm == StepNorm::Joint) {
          // One unit norm over both poses' twists.
          const double n = std::hypot(g.xi1.vector().norm(), g.xi2.vector().norm());
          const double k = n > 1e-12 ? 1.0 / n : 1.0;
          t1 = t1 * se3::expMap(-scaledStep(g.xi1, sr * k, st * k, StepNorm::None));
          t2 = t2 * se3::expMap(-scaledStep(g.xi2, sr * k, st * k, StepNorm::None));
        } else {
          t1 = t1 * se3::expMap(-scaledStep(g.xi1, sr, st, cfg.stepNorm));
          t2 = t2 * se3::expMap(-scaledStep(g.xi2, sr, st, cfg.stepNorm));
        }
      } else {
        t2 = t2 * se3::expMap(-scaledStep(g.xi2Total, sr, st, cfg.stepNorm));
      }
      const auto c = Clock::now();
      rec.forwardUs.push_back(elapsedUs(a, b));
      rec.backwardUs.push_back(elapsedUs(b, c));
      ++rec.iterations;
    }
    if (stopped) {
      rec.finalLoss = rec.trace.back();
    } else {
      rec.finalLoss = forward(fwd).value;
      rec.trace.push_back(rec.finalLoss);
    }
    if (!std::isfinite(rec.finalLoss)) {
      rec.failed = true;
      rec.finalLoss = std::numeric_limits<double>::infinity();
    }
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
    rec.finalLoss = std::numeric_limits<double>::infinity();
  }
  return rec;
}

double lowerQuantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(values.size() - 1)));
  return values[idx];
}

MetricSummary summarize(const std::vector<RunRecord>& records) {
  if (records.empty()) throw std::invalid_argument("no records to summarize");
  std::vector<const RunRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->taskId < b->taskId; });
  std::vector<double> losses;
  std::size_t ok = 0;
  for (const auto* r : sorted) {
    losses.push_back(r->finalLoss);
    if (r->converged()) ++ok;
  }
  MetricSummary s;
  s.nTasks = records.size();
  s.d5 = lowerQuantile(losses, 0.5);
  s.d9 = lowerQuantile(losses, 0.9);
  s.acc = static_cast<double>(ok) / static_cast<double>(records.size());
  return s;
}

std::vector<RunRecord> runBatch(const std::vector<TaskSpec>& tasks, const OptimizerConfig& cfg, int workers) {
  cfg.validate();
  std::vector<RunRecord> out(tasks.size());
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(tasks.size())));
  if (n == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) out[i] = optimizeTask(tasks[i], cfg);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < n; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < tasks.size(); i = next++) out[i] = optimizeTask(tasks[i], cfg);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

const char* sweepAxisName(SweepAxis a) {
  switch (a) {
    case SweepAxis::Margin: return "margin";
    case SweepAxis::StepSize: return "step_size";
    case SweepAxis::Ablation: return "ablation";
    case SweepAxis::None: return "none";
  }
  return "?";
}

SweepAxis parseSweepAxis(const std::string& name) {
  for (SweepAxis a : {SweepAxis::Margin, SweepAxis::StepSize, SweepAxis::Ablation, SweepAxis::None}) {
    if (name == sweepAxisName(a)) return a;
  }
  throw std::invalid_argument("unknown sweep axis '" + name + "'");
}

namespace {

std::string label(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", x);
  return buf;
}

}  // namespace

std::vector<SweepVariant> expandGrid(SweepAxis axis, const std::vector<double>& grid, const OptimizerConfig& base) {
  if (axis == SweepAxis::Ablation) return ablationVariants(base);
  if (axis == SweepAxis::None) return {{"base", base}};
  if (grid.empty()) throw std::invalid_argument("empty sweep grid");
  std::vector<SweepVariant> out;
  for (double x : grid) {
    OptimizerConfig c = base;
    if (axis == SweepAxis::Margin) {
      c.loss.beta = x;
    } else {
      c.setInitialRotationStep(x);
    }
    out.push_back({label(x), c});
  }
  return out;
}

std::vector<SweepVariant> ablationVariants(const OptimizerConfig& base) {
  std::vector<SweepVariant> out;
  OptimizerConfig c = base;
  c.method = Method::Ours;
  c.score = smoothing::Score::Distance;
  out.push_back({"dist", c});
  c.score = smoothing::Score::Direction;
  out.push_back({"dir", c});
  c = base;
  c.method = Method::Ours;
  c.score = smoothing::Score::Distance;
  c.sampling.strategy = smoothing::Strategy::Adaptive;
  out.push_back({"adaptive", c});
  c.sampling.strategy = smoothing::Strategy::Fixed;
  out.push_back({"fixed", c});
  c.sampling.strategy = smoothing::Strategy::Neighbor;
  out.push_back({"neighbor", c});
  c = base;
  c.method = Method::Ours;
  c.score = smoothing::Score::Distance;
  c.useEg = true;
  c.optimizeT1 = false;
  out.push_back({"t2_eg", c});
  c.useEg = false;
  out.push_back({"t2_no_eg", c});
  c.optimizeT1 = true;
  out.push_back({"joint", c});
  return out;
}

std::vector<SweepCell> runSweep(SweepAxis axis, const std::vector<SweepVariant>& variants,
                                const std::vector<Method>& methods, const std::vector<TaskSpec>& tasks, int workers) {
  if (variants.empty()) throw std::invalid_argument("empty sweep grid");
  std::vector<SweepCell> cells;
  for (const auto& v : variants) {
    // Ablation rows pin their own method.
    const std::vector<Method> ms = axis == SweepAxis::Ablation ? std::vector<Method>{v.cfg.method} : methods;
    for (Method m : ms) {
      OptimizerConfig c = v.cfg;
      c.method = m;
      SweepCell cell;
      cell.axis = axis;
      cell.value = v.label;
      cell.method = m;
      cell.records = runBatch(tasks, c, workers);
      cell.summary = summarize(cell.records);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

RuntimeSample measureRuntime(const OptimizerConfig& cfg, const std::vector<TaskSpec>& tasks, int repetitions,
                             int warmup) {
  RuntimeSample out;
  if (repetitions <= 0 || tasks.empty()) return out;
  OptimizerConfig c = cfg;
  c.iterations = repetitions + warmup;
  c.earlyExit = -1.0;
  std::vector<double> fwd, bwd;
  for (const auto& t : tasks) {
    const RunRecord r = optimizeTask(t, c);
    for (std::size_t i = static_cast<std::size_t>(warmup); i < r.forwardUs.size(); ++i) {
      fwd.push_back(r.forwardUs[i]);
      bwd.push_back(r.backwardUs[i]);
    }
  }
  out.forwardUs = median(fwd);
  out.backwardUs = median(bwd);
  return out;
}

std::string csvHeader() { return "task_id,method,final_loss,iters,fwd_us,bwd_us"; }

std::string csvRow(const RunRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%s,%.17g,%d,%.3f,%.3f", r.taskId, methodName(r.method), r.finalLoss,
                r.iterations, r.medianForwardUs(), r.medianBackwardUs());
  return buf;
}

}  // namespace dw::bench
