#include "diffwitness/gradient.hpp"

#include <cmath>
#include <random>

namespace dw::gradient {

using smoothing::CandidateSet;
using smoothing::Score;
using smoothing::SmoothingState;

LossValue loss(const Vec3& x1, const Vec3& x2, const Vec3& t1, const Vec3& t2, const LossConfig& cfg) {
  Vec3 gap = x1 - x2;
  const double sep = gap.norm();
  if (cfg.beta > 0.0 && sep > 1e-12) gap += cfg.beta * (x2 - x1) / sep;
  const Vec3 r1 = x1 - t1, r2 = x2 - t2;
  LossValue out;
  out.value = gap.squaredNorm() + r1.squaredNorm() + r2.squaredNorm();
  out.dx1 = 2.0 * (gap + r1);
  out.dx2 = 2.0 * (r2 - gap);
  out.dt1 = -2.0 * r1;
  out.dt2 = -2.0 * r2;
  return out;
}

Mat36 pointJacobian(const Pose& pose, const Vec3& local) {
  Mat36 j;
  j.leftCols<3>() = -pose.R * se3::hat(local);
  j.rightCols<3>() = pose.R;
  return j;
}

namespace {

// Rows: du_i / d(candidate i world point) for the self term.
Eigen::MatrixXd selfScoreGrad(const CandidateSet& c, Score score, const Vec3& self, const Vec3& other,
                              bool penetrating) {
  const auto n = static_cast<Eigen::Index>(c.size());
  Eigen::MatrixXd g(n, 3);
  const Vec3 y = smoothing::directionVector(self, other, penetrating);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 r = score == Score::Distance ? Vec3(-2.0 * (c.world[i] - other)) : y;
    g.row(i) = r.transpose();
  }
  return g;
}

// du / d(other witness), N x 3.
Eigen::MatrixXd crossScoreGrad(const CandidateSet& c, Score score, const Vec3& self, const Vec3& other,
                               bool penetrating) {
  const auto n = static_cast<Eigen::Index>(c.size());
  Eigen::MatrixXd g(n, 3);
  const bool degenerate = (other - self).norm() < 1e-12;
  const double s = penetrating ? -1.0 : 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (score == Score::Distance) {
      g.row(i) = 2.0 * (c.world[i] - other).transpose();
    } else {
      g.row(i) = degenerate ? Eigen::RowVector3d::Zero() : Eigen::RowVector3d(s * c.world[i].transpose());
    }
  }
  return g;
}

// Candidates relative to x*; the weight derivatives sum to zero, so this
// drops a common offset that would otherwise cancel in floating point.
Eigen::MatrixXd centredPoints(const CandidateSet& c, const Vec3& xStar) {
  Eigen::MatrixXd v(c.size(), 3);
  for (std::size_t i = 0; i < c.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = (c.world[i] - xStar).transpose();
  return v;
}

struct SideJacobians {
  Mat36 self;
  Mat3 wrtOther;  // dx* / d(other witness)
};

SideJacobians side(const CandidateSet& c, const SmoothingState& s, const Pose& pose, Score score,
                   const Vec3& self, const Vec3& other, bool penetrating, bool propagateTau) {
  const Eigen::MatrixXd dwdu = smoothing::weightJacobian(s, propagateTau);
  const Eigen::MatrixXd g = selfScoreGrad(c, score, self, other, penetrating);
  const Eigen::MatrixXd vt = centredPoints(c, s.xStar).transpose();  // 3 x N
  const auto n = static_cast<Eigen::Index>(c.size());
  Eigen::MatrixXd dudxi(n, 6);
  Mat36 direct = Mat36::Zero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Mat36 j = pointJacobian(pose, c.local[i]);
    direct += s.w[i] * j;
    dudxi.row(i) = g.row(i) * j;
  }
  SideJacobians out;
  out.self = direct + vt * dwdu * dudxi;
  out.wrtOther = vt * dwdu * crossScoreGrad(c, score, self, other, penetrating);
  return out;
}

}  // namespace

WitnessJacobians witnessJacobians(const smoothing::SmoothedPair& p, const Pose& t1, const Pose& t2,
                                  bool propagateTau, double crossScale) {
  const SideJacobians a = side(p.c1, p.s1, t1, p.score, p.ref1, p.ref2, p.penetrating, propagateTau);
  const SideJacobians b = side(p.c2, p.s2, t2, p.score, p.ref2, p.ref1, p.penetrating, propagateTau);
  WitnessJacobians j;
  j.x1_xi1 = a.self;
  j.x2_xi2 = b.self;
  j.x1_xi2 = crossScale * (a.wrtOther * b.self);
  j.x2_xi1 = crossScale * (b.wrtOther * a.self);
  return j;
}

std::pair<Vec6, Vec6> coordinateGradients(const WitnessJacobians& j, const LossValue& l, const Pose& t1,
                                          const Pose& t2, const Vec3& t1Local, const Vec3& t2Local) {
  const Vec6 c1 = j.x1_xi1.transpose() * l.dx1 + j.x2_xi1.transpose() * l.dx2 +
                  pointJacobian(t1, t1Local).transpose() * l.dt1;
  const Vec6 c2 = j.x2_xi2.transpose() * l.dx2 + j.x1_xi2.transpose() * l.dx1 +
                  pointJacobian(t2, t2Local).transpose() * l.dt2;
  return {c1, c2};
}

TaskGradient assemblePoseGradients(const Vec6& coord1, const Vec6& coord2, const Pose& t1, const Pose& t2,
                                   const GradientOptions& opt) {
  TaskGradient g;
  g.xi1 = se3::algebraFromCoordinateGradient(coord1);
  g.xi2 = se3::algebraFromCoordinateGradient(coord2);
  g.xi2Total = g.xi2;
  if (opt.useEg && !opt.optimizeT1) g.xi2Total = g.xi2 + se3::equivalentTransport(t1, t2, g.xi1);
  return g;
}

double PairProblem::forwardLoss(const Pose& t1, const Pose& t2) const {
  const narrowphase::WitnessResult w = narrowphase::compositeWitness(*shape1, t1, *shape2, t2);
  return gradient::loss(w.x1World, w.x2World, t1.act(target1Local), t2.act(target2Local), loss).value;
}

Vec6 centralDifference(const TwistFunction& f, double hRot, double hTrans) {
  Vec6 g;
  for (int j = 0; j < 6; ++j) {
    const double h = j < 3 ? hRot : hTrans;
    Vec6 e = Vec6::Zero();
    e[j] = h;
    g[j] = (f(Twist::fromVector(e)) - f(Twist::fromVector(-e))) / (2.0 * h);
  }
  return g;
}

Vec6 rs0Estimate(const TwistFunction& f, double sigma, int nSamples, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  const double base = f(Twist{});
  Vec6 g = Vec6::Zero();
  for (int k = 0; k < nSamples; ++k) {
    Vec6 z;
    for (int i = 0; i < 6; ++i) z[i] = n01(rng);
    g += (f(Twist::fromVector(sigma * z)) - base) * z;
  }
  return g / (static_cast<double>(nSamples) * sigma);
}

std::pair<Vec6, Vec6> gradFiniteDifference(const PairProblem& p, const Pose& t1, const Pose& t2, double hRot,
                                           double hTrans, bool wrtT1) {
  const Vec6 c2 = centralDifference([&](const Twist& e) { return p.forwardLoss(t1, t2 * se3::expMap(e)); }, hRot,
                                    hTrans * p.shape2->diag);
  Vec6 c1 = Vec6::Zero();
  if (wrtT1) {
    c1 = centralDifference([&](const Twist& e) { return p.forwardLoss(t1 * se3::expMap(e), t2); }, hRot,
                           hTrans * p.shape1->diag);
  }
  return {c1, c2};
}

std::pair<Vec6, Vec6> gradRs0(const PairProblem& p, const Pose& t1, const Pose& t2, double sigma, int nSamples,
                              std::uint64_t seed, bool wrtT1) {
  std::mt19937_64 rng(seed);
  const Vec6 c2 = rs0Estimate([&](const Twist& e) { return p.forwardLoss(t1, t2 * se3::expMap(e)); }, sigma,
                              nSamples, rng);
  Vec6 c1 = Vec6::Zero();
  if (wrtT1) {
    c1 = rs0Estimate([&](const Twist& e) { return p.forwardLoss(t1 * se3::expMap(e), t2); }, sigma, nSamples, rng);
  }
  return {c1, c2};
}

FeatureInfo classifyWitness(const geom::ConvexPiece& piece, const Vec3& x, double diag) {
  const double tol = 1e-7 * diag;
  FeatureInfo out;
  for (std::size_t i = 0; i < piece.vertices.size(); ++i) {
    if ((piece.vertices[i] - x).norm() <= tol) {
      out.type = Feature::Vertex;
      out.index = static_cast<int>(i);
      return out;
    }
  }
  for (std::size_t f = 0; f < piece.faces.size(); ++f) {
    if (std::abs(piece.normals[f].dot(x) - piece.offsets[f]) > tol) continue;
    const auto& t = piece.faces[f];
    bool interior = true;
    for (int k = 0; k < 3 && interior; ++k) {
      const Vec3& a = piece.vertices[t[k]];
      const Vec3& b = piece.vertices[t[(k + 1) % 3]];
      // Signed in-plane distance to the edge line, positive inside.
      const Vec3 inward = piece.normals[f].cross(b - a).normalized();
      if (inward.dot(x - a) <= tol) interior = false;
    }
    if (interior) {
      out.type = Feature::Face;
      out.index = static_cast<int>(f);
      return out;
    }
  }
  out.type = Feature::Edge;
  return out;
}

namespace {

// Closest point on a plane attached to `pose` to a point q, and its derivative
// with respect to the plane pose.
Mat36 planeProjectionJacobian(const Pose& pose, const Vec3& normalLocal, const Vec3& pointLocal, const Vec3& q) {
  const Vec3 n = pose.rotate(normalLocal);
  const Vec3 p0 = pose.act(pointLocal);
  Mat36 dn = Mat36::Zero();
  dn.leftCols<3>() = -pose.R * se3::hat(normalLocal);
  const Mat36 dp0 = pointJacobian(pose, pointLocal);
  const Vec3 r = q - p0;
  return -n.dot(r) * dn - n * (r.transpose() * dn) + n * (n.transpose() * dp0);
}

}  // namespace

AnalyticalResult analyticalJacobians(const PairProblem& p, const Pose& t1, const Pose& t2,
                                     const narrowphase::WitnessResult& fwd) {
  AnalyticalResult out;
  const auto& piece1 = p.shape1->pieces[fwd.piece1];
  const auto& piece2 = p.shape2->pieces[fwd.piece2];
  out.f1 = classifyWitness(piece1, fwd.x1Local, p.shape1->diag);
  out.f2 = classifyWitness(piece2, fwd.x2Local, p.shape2->diag);
  WitnessJacobians& j = out.jac;
  j.x1_xi1 = pointJacobian(t1, fwd.x1Local);
  j.x2_xi2 = pointJacobian(t2, fwd.x2Local);
  if (out.f1.type == Feature::Vertex && out.f2.type == Feature::Face) {
    const Vec3 n = t2.rotate(piece2.normals[out.f2.index]);
    j.x2_xi2 = planeProjectionJacobian(t2, piece2.normals[out.f2.index], fwd.x2Local, fwd.x1World);
    j.x2_xi1 = (Mat3::Identity() - n * n.transpose()) * j.x1_xi1;
  } else if (out.f1.type == Feature::Face && out.f2.type == Feature::Vertex) {
    const Vec3 n = t1.rotate(piece1.normals[out.f1.index]);
    j.x1_xi1 = planeProjectionJacobian(t1, piece1.normals[out.f1.index], fwd.x1Local, fwd.x2World);
    j.x1_xi2 = (Mat3::Identity() - n * n.transpose()) * j.x2_xi2;
  } else if (!(out.f1.type == Feature::Vertex && out.f2.type == Feature::Vertex) &&
             !(out.f1.type == Feature::Edge && out.f2.type == Feature::Edge)) {
    out.rigidFallback = true;
  }
  return out;
}

}  // namespace dw::gradient
