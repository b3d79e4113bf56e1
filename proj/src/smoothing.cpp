#include "diffwitness/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace dw::smoothing {

const char* strategyName(Strategy s) {
  switch (s) {
    case Strategy::Neighbor: return "neighbor";
    case Strategy::Fixed: return "fixed";
    case Strategy::Adaptive: return "adaptive";
  }
  return "?";
}

const char* scoreName(Score s) { return s == Score::Distance ? "dist" : "dir"; }

void SamplingConfig::validate() const {
  if (maxCandidates < 2) throw std::invalid_argument("max_candidates must be at least 2");
  if (minCandidates < 2 || minCandidates > maxCandidates) {
    throw std::invalid_argument("min_candidates must lie in [2, max_candidates]");
  }
  if (strategy == Strategy::Adaptive && !(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (strategy == Strategy::Neighbor && (kRing < 0 || subsample < 1)) {
    throw std::invalid_argument("k_ring must be >= 0 and subsample >= 1");
  }
  if (!std::isfinite(alpha)) throw std::invalid_argument("alpha must be finite");
}

void CandidateSet::place(const Pose& pose) {
  world.resize(local.size());
  for (std::size_t i = 0; i < local.size(); ++i) world[i] = pose.act(local[i]);
}

CandidateSet selectCandidates(const CompositeShape& shape, const SurfacePointBank& bank, const Pose& pose,
                              const Vec3& witnessLocal, int witnessPiece, const Vec3& targetWorld,
                              const Vec3& witnessWorld, const SamplingConfig& cfg) {
  if (bank.points.empty()) throw std::invalid_argument("empty candidate bank");
  double alpha = 0.0;
  if (cfg.strategy == Strategy::Adaptive) {
    alpha = std::max((targetWorld - witnessWorld).norm(), cfg.epsilon);
  } else {
    alpha = cfg.alpha > 0.0 ? cfg.alpha : 0.05 * shape.diag;
  }

  std::vector<char> allowed(shape.pieces.size(), 0);
  if (witnessPiece >= 0 && witnessPiece < static_cast<int>(allowed.size())) allowed[witnessPiece] = 1;
  if (cfg.crossPiece) {
    for (std::size_t p = 0; p < shape.pieces.size(); ++p) {
      const auto& piece = shape.pieces[p];
      if ((piece.centroid - witnessLocal).norm() <= piece.boundingRadius + alpha) allowed[p] = 1;
    }
  }

  const double dup = 1e-9 * std::max(shape.diag, 1e-300);
  std::vector<std::pair<double, int>> byDistance;
  for (std::size_t i = 0; i < bank.points.size(); ++i) {
    const auto& bp = bank.points[i];
    if (bp.piece >= 0 && bp.piece < static_cast<int>(allowed.size()) && !allowed[bp.piece]) continue;
    const double d = (bp.position - witnessLocal).norm();
    if (d > dup) byDistance.emplace_back(d, static_cast<int>(i));
  }
  const auto inBall = static_cast<std::size_t>(std::count_if(
      byDistance.begin(), byDistance.end(), [&](const auto& e) { return e.first <= alpha; }));
  const std::size_t keep = std::min<std::size_t>(
      std::max<std::size_t>(inBall, cfg.minCandidates - 1), std::min<std::size_t>(cfg.maxCandidates - 1, byDistance.size()));
  std::partial_sort(byDistance.begin(), byDistance.begin() + static_cast<std::ptrdiff_t>(keep), byDistance.end());

  CandidateSet c;
  c.piece = witnessPiece;
  c.strategy = cfg.strategy;
  c.local.push_back(witnessLocal);
  for (std::size_t k = 0; k < keep; ++k) c.local.push_back(bank.points[byDistance[k].second].position);
  c.place(pose);
  return c;
}

CandidateSet selectCandidatesNeighbor(const geom::TriMesh& mesh, const Pose& pose, const Vec3& witnessLocal,
                                      int kRing, int subsample, std::uint64_t seed) {
  if (mesh.vertices.empty()) throw std::invalid_argument("empty mesh");
  int start = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const double d = (mesh.vertices[i] - witnessLocal).squaredNorm();
    if (d < best) {
      best = d;
      start = static_cast<int>(i);
    }
  }
  std::vector<int> depth(mesh.vertices.size(), -1);
  std::vector<int> order{start};
  depth[start] = 0;
  for (std::size_t head = 0; head < order.size(); ++head) {
    const int v = order[head];
    if (depth[v] >= kRing || v >= static_cast<int>(mesh.adjacency.size())) continue;
    for (int n : mesh.adjacency[v]) {
      if (depth[n] < 0) {
        depth[n] = depth[v] + 1;
        order.push_back(n);
      }
    }
  }
  std::vector<int> rest(order.begin() + 1, order.end());
  std::vector<int> picked;
  std::mt19937_64 rng(seed);
  std::sample(rest.begin(), rest.end(), std::back_inserter(picked), std::max(subsample - 1, 0), rng);

  CandidateSet c;
  c.strategy = Strategy::Neighbor;
  c.piece = -1;
  c.local.push_back(mesh.vertices[start]);
  for (int i : picked) c.local.push_back(mesh.vertices[i]);
  c.place(pose);
  return c;
}

Eigen::VectorXd scoreDistance(const CandidateSet& c, const Vec3& otherWitness) {
  Eigen::VectorXd u(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) u[i] = -(c.world[i] - otherWitness).squaredNorm();
  return u;
}

Vec3 directionVector(const Vec3& selfWitness, const Vec3& otherWitness, bool penetrating) {
  const Vec3 d = otherWitness - selfWitness;
  if (d.norm() < 1e-12) return Vec3::Zero();
  return penetrating ? Vec3(-d) : d;
}

Eigen::VectorXd scoreDirection(const CandidateSet& c, const Vec3& selfWitness, const Vec3& otherWitness,
                               bool penetrating) {
  const Vec3 y = directionVector(selfWitness, otherWitness, penetrating);
  Eigen::VectorXd u(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) u[i] = c.world[i].dot(y);
  return u;
}

SmoothingState softmaxSmooth(const CandidateSet& c, const Eigen::VectorXd& u) {
  SmoothingState s;
  const auto n = u.size();
  s.u = u;
  const double mean = u.mean();
  const double sd = std::sqrt((u.array() - mean).square().sum() / static_cast<double>(n));
  s.tauFloored = !(sd > kTauFloor);
  s.tau = s.tauFloored ? kTauFloor : sd;
  const double top = u.maxCoeff();
  s.w = ((u.array() - top) / s.tau).exp();
  s.w /= s.w.sum();
  s.xStar.setZero();
  for (Eigen::Index i = 0; i < n; ++i) s.xStar += s.w[i] * c.world[i];
  return s;
}

Eigen::MatrixXd weightJacobian(const SmoothingState& s, bool propagateTau) {
  const auto n = s.w.size();
  // dw = diag(w) (I - 1 w^T) ds,  ds = du / tau - u dtau / tau^2
  Eigen::MatrixXd ds = Eigen::MatrixXd::Identity(n, n) / s.tau;
  if (propagateTau && !s.tauFloored) {
    const Eigen::VectorXd centred = s.u.array() - s.u.mean();
    const Eigen::RowVectorXd dtau = centred.transpose() / (static_cast<double>(n) * s.tau);
    ds -= (s.u / (s.tau * s.tau)) * dtau;
  }
  Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(n, n) - Eigen::VectorXd::Ones(n) * s.w.transpose();
  return s.w.asDiagonal() * (proj * ds);
}

namespace {

CandidateSet candidatesFor(const ObjectContext& o, const Vec3& local, const Vec3& world, int piece,
                           const SamplingConfig& cfg, std::uint64_t seed) {
  if (cfg.strategy == Strategy::Neighbor) {
    CandidateSet c = selectCandidatesNeighbor(o.shape->sourceMesh, o.pose, local, cfg.kRing, cfg.subsample, seed);
    c.piece = piece;
    return c;
  }
  return selectCandidates(*o.shape, *o.bank, o.pose, local, piece, o.targetWorld, world, cfg);
}

}  // namespace

SmoothedPair smoothedWitness(const ObjectContext& o1, const ObjectContext& o2,
                             const narrowphase::WitnessResult& fwd, const SamplingConfig& cfg, Score score,
                             std::uint64_t neighborSeed) {
  SmoothedPair out;
  out.score = score;
  out.penetrating = fwd.penetrating;
  out.ref1 = fwd.x1World;
  out.ref2 = fwd.x2World;
  out.c1 = candidatesFor(o1, fwd.x1Local, fwd.x1World, fwd.piece1, cfg, neighborSeed);
  out.c2 = candidatesFor(o2, fwd.x2Local, fwd.x2World, fwd.piece2, cfg, neighborSeed ^ 0x9e3779b97f4a7c15ULL);
  if (score == Score::Distance) {
    out.s1 = softmaxSmooth(out.c1, scoreDistance(out.c1, fwd.x2World));
    out.s2 = softmaxSmooth(out.c2, scoreDistance(out.c2, fwd.x1World));
  } else {
    out.s1 = softmaxSmooth(out.c1, scoreDirection(out.c1, fwd.x1World, fwd.x2World, fwd.penetrating));
    out.s2 = softmaxSmooth(out.c2, scoreDirection(out.c2, fwd.x2World, fwd.x1World, fwd.penetrating));
  }
  return out;
}

}  // namespace dw::smoothing
