#pragma once

// Loss, witness Jacobians and pose gradients, plus the baseline estimators.

#include <cstdint>
#include <functional>
#include <random>
#include <utility>

#include "diffwitness/geom.hpp"
#include "diffwitness/narrowphase.hpp"
#include "diffwitness/se3.hpp"
#include "diffwitness/smoothing.hpp"

namespace dw::gradient {

using geom::CompositeShape;
using se3::Pose;
using se3::Twist;

struct LossConfig {
  double beta = 0.0;
};

struct LossValue {
  double value = 0.0;
  Vec3 dx1 = Vec3::Zero();
  Vec3 dx2 = Vec3::Zero();
  Vec3 dt1 = Vec3::Zero();
  Vec3 dt2 = Vec3::Zero();
};

// |x1 - x2 + beta n|^2 + |x1 - t1|^2 + |x2 - t2|^2 with n = (x2 - x1)/|x2 - x1| held constant.
LossValue loss(const Vec3& x1, const Vec3& x2, const Vec3& t1, const Vec3& t2, const LossConfig& cfg);

// d/de of pose.act(local) under pose * exp(e).
Mat36 pointJacobian(const Pose& pose, const Vec3& local);

struct WitnessJacobians {
  Mat36 x1_xi1 = Mat36::Zero();
  Mat36 x2_xi2 = Mat36::Zero();
  Mat36 x1_xi2 = Mat36::Zero();
  Mat36 x2_xi1 = Mat36::Zero();
};

// crossScale is a mutation hook for gradient checking; it multiplies both cross blocks.
WitnessJacobians witnessJacobians(const smoothing::SmoothedPair& pair, const Pose& t1, const Pose& t2,
                                  bool propagateTau = true, double crossScale = 1.0);

struct TaskGradient {
  Twist xi1;
  Twist xi2;
  Twist xi2Total;
};

struct GradientOptions {
  bool useEg = true;
  bool optimizeT1 = false;
  bool needsT1() const { return useEg || optimizeT1; }
};

// Coordinate gradients (dL/de for each pose) turned into algebra twists and,
// with EG, the transported T1 twist added to T2.
TaskGradient assemblePoseGradients(const Vec6& coord1, const Vec6& coord2, const Pose& t1, const Pose& t2,
                                   const GradientOptions& opt);

// Chain rule through the witness Jacobians and the attached targets.
std::pair<Vec6, Vec6> coordinateGradients(const WitnessJacobians& j, const LossValue& l, const Pose& t1,
                                          const Pose& t2, const Vec3& t1Local, const Vec3& t2Local);

// A pair of shapes with local targets; forward loss uses raw witness points.
struct PairProblem {
  const CompositeShape* shape1 = nullptr;
  const CompositeShape* shape2 = nullptr;
  Vec3 target1Local = Vec3::Zero();
  Vec3 target2Local = Vec3::Zero();
  LossConfig loss;

  double forwardLoss(const Pose& t1, const Pose& t2) const;
};

using TwistFunction = std::function<double(const Twist&)>;

// dL/de of f(e) at e = 0 by central differences.
Vec6 centralDifference(const TwistFunction& f, double hRot, double hTrans);
// (1 / (n sigma)) sum_k [f(sigma z_k) - f(0)] z_k with standard normal z_k.
Vec6 rs0Estimate(const TwistFunction& f, double sigma, int nSamples, std::mt19937_64& rng);

// Central differences; translation steps are hTrans * diag of the moved shape.
std::pair<Vec6, Vec6> gradFiniteDifference(const PairProblem& p, const Pose& t1, const Pose& t2, double hRot,
                                           double hTrans, bool wrtT1);

std::pair<Vec6, Vec6> gradRs0(const PairProblem& p, const Pose& t1, const Pose& t2, double sigma, int nSamples,
                              std::uint64_t seed, bool wrtT1);

enum class Feature { Vertex, Edge, Face };

struct FeatureInfo {
  Feature type = Feature::Edge;
  int index = -1;  // vertex or face index on the piece
};

// Tolerance is 1e-7 * diag on distances to vertices, edges and face planes.
FeatureInfo classifyWitness(const geom::ConvexPiece& piece, const Vec3& local, double diag);

struct AnalyticalResult {
  WitnessJacobians jac;
  FeatureInfo f1, f2;
  bool rigidFallback = false;
};

// Vertex-face derivatives only; every other configuration moves witnesses rigidly.
AnalyticalResult analyticalJacobians(const PairProblem& p, const Pose& t1, const Pose& t2,
                                     const narrowphase::WitnessResult& fwd);

}  // namespace dw::gradient
