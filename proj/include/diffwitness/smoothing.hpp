#pragma once

// Softmax surrogate of the witness points.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "diffwitness/geom.hpp"
#include "diffwitness/narrowphase.hpp"
#include "diffwitness/se3.hpp"

namespace dw::smoothing {

using geom::CompositeShape;
using geom::SurfacePointBank;
using se3::Pose;

enum class Strategy { Neighbor, Fixed, Adaptive };
enum class Score { Distance, Direction };

const char* strategyName(Strategy s);
const char* scoreName(Score s);

struct SamplingConfig {
  Strategy strategy = Strategy::Adaptive;
  int kRing = 5;
  int subsample = 16;
  double alpha = -1.0;  // fixed radius; non-positive means 0.05 * diag
  double epsilon = 1e-3;
  int maxCandidates = 16;
  // Below this count the nearest bank points outside the ball are added.
  int minCandidates = 8;
  bool crossPiece = true;

  // Throws std::invalid_argument.
  void validate() const;
};

inline constexpr double kTauFloor = 1e-12;

struct CandidateSet {
  std::vector<Vec3> local;  // shape frame; element 0 is the witness
  std::vector<Vec3> world;
  int piece = 0;
  Strategy strategy = Strategy::Adaptive;

  std::size_t size() const { return local.size(); }
  void place(const Pose& pose);
};

struct SmoothingState {
  Eigen::VectorXd u;
  Eigen::VectorXd w;
  double tau = kTauFloor;
  bool tauFloored = true;
  Vec3 xStar = Vec3::Zero();
};

// Throws std::invalid_argument on an empty bank.
CandidateSet selectCandidates(const CompositeShape& shape, const SurfacePointBank& bank, const Pose& pose,
                              const Vec3& witnessLocal, int witnessPiece, const Vec3& targetWorld,
                              const Vec3& witnessWorld, const SamplingConfig& cfg);

// k-ring around the mesh vertex nearest to the witness, subsampled.
CandidateSet selectCandidatesNeighbor(const geom::TriMesh& mesh, const Pose& pose, const Vec3& witnessLocal,
                                      int kRing, int subsample, std::uint64_t seed);

Eigen::VectorXd scoreDistance(const CandidateSet& c, const Vec3& otherWitness);
// y = s (other - self) with s = -1 when penetrating; zero when the witnesses coincide.
Eigen::VectorXd scoreDirection(const CandidateSet& c, const Vec3& selfWitness, const Vec3& otherWitness,
                               bool penetrating);
Vec3 directionVector(const Vec3& selfWitness, const Vec3& otherWitness, bool penetrating);

SmoothingState softmaxSmooth(const CandidateSet& c, const Eigen::VectorXd& u);

// dw/du, optionally including the dependence of tau on u.
Eigen::MatrixXd weightJacobian(const SmoothingState& s, bool propagateTau);

struct SmoothedPair {
  CandidateSet c1, c2;
  SmoothingState s1, s2;
  Score score = Score::Distance;
  bool penetrating = false;
  Vec3 ref1 = Vec3::Zero();  // forward witnesses used as scoring references
  Vec3 ref2 = Vec3::Zero();
};

struct ObjectContext {
  const CompositeShape* shape = nullptr;
  const SurfacePointBank* bank = nullptr;
  Pose pose;
  Vec3 targetWorld = Vec3::Zero();
};

SmoothedPair smoothedWitness(const ObjectContext& o1, const ObjectContext& o2,
                             const narrowphase::WitnessResult& forward, const SamplingConfig& cfg, Score score,
                             std::uint64_t neighborSeed = 0);

}  // namespace dw::smoothing
