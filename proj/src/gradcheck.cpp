#include "diffwitness/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace dw::gradient {

namespace {

Vec3 frozenSoft(smoothing::CandidateSet c, const Pose& pose, smoothing::Score score, const Vec3& self,
                const Vec3& other, bool penetrating) {
  c.place(pose);
  const Eigen::VectorXd u = score == smoothing::Score::Distance
                                ? smoothing::scoreDistance(c, other)
                                : smoothing::scoreDirection(c, self, other, penetrating);
  return smoothing::softmaxSmooth(c, u).xStar;
}

double relError(const Mat36& a, const Mat36& ref) { return (a - ref).norm() / std::max(ref.norm(), 1e-6); }

}  // namespace

const char* blockName(int k) {
  static const char* names[] = {"x1_xi1", "x2_xi2", "x1_xi2", "x2_xi1"};
  return k >= 0 && k < 4 ? names[k] : "?";
}

std::array<Mat36, 4> frozenSurrogateJacobians(const smoothing::SmoothedPair& p, const Pose& t1, const Pose& t2,
                                              double h) {
  auto self1 = [&](const Pose& T1) { return frozenSoft(p.c1, T1, p.score, p.ref1, p.ref2, p.penetrating); };
  auto self2 = [&](const Pose& T2) { return frozenSoft(p.c2, T2, p.score, p.ref2, p.ref1, p.penetrating); };
  const Vec3 s1 = self1(t1), s2 = self2(t2);
  auto x1 = [&](const Pose& T1, const Pose& T2) {
    return frozenSoft(p.c1, T1, p.score, p.ref1, p.ref2 + self2(T2) - s2, p.penetrating);
  };
  auto x2 = [&](const Pose& T1, const Pose& T2) {
    return frozenSoft(p.c2, T2, p.score, p.ref2, p.ref1 + self1(T1) - s1, p.penetrating);
  };
  std::array<Mat36, 4> out;
  for (int j = 0; j < 6; ++j) {
    Vec6 e = Vec6::Zero();
    e[j] = h;
    const Pose p1 = t1 * se3::expMap(Twist::fromVector(e)), m1 = t1 * se3::expMap(Twist::fromVector(-e));
    const Pose p2 = t2 * se3::expMap(Twist::fromVector(e)), m2 = t2 * se3::expMap(Twist::fromVector(-e));
    out[0].col(j) = (x1(p1, t2) - x1(m1, t2)) / (2 * h);
    out[1].col(j) = (x2(t1, p2) - x2(t1, m2)) / (2 * h);
    out[2].col(j) = (x1(t1, p2) - x1(t1, m2)) / (2 * h);
    out[3].col(j) = (x2(p1, t2) - x2(m1, t2)) / (2 * h);
  }
  return out;
}

GradcheckReport gradcheck(const CompositeShape& shape1, const CompositeShape& shape2, const GradcheckOptions& opt) {
  if (opt.probes < 0) throw std::invalid_argument("probe count must be non-negative");
  if (!(opt.h > 0.0)) throw std::invalid_argument("fd step must be positive");
  opt.sampling.validate();
  GradcheckReport rep;
  rep.probes = opt.probes;
  if (opt.probes == 0) {
    rep.warnings.push_back("no probes requested; the check passes vacuously");
    return rep;
  }
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> diag(0.02, 0.2), unit(0.0, 1.0), logLambda(std::log(1e-3), std::log(10.0));
  std::normal_distribution<double> n01;
  for (int k = 0; k < opt.probes; ++k) {
    const CompositeShape s1 = geom::normalizeScale(shape1, diag(rng));
    const CompositeShape s2 = geom::normalizeScale(shape2, diag(rng));
    const geom::SurfacePointBank b1 = geom::sampleSurfaceBank(s1, 256, rng());
    const geom::SurfacePointBank b2 = geom::sampleSurfaceBank(s2, 256, rng());
    const Pose t1{se3::randomRotation(rng, n01), Vec3::Zero()};
    const Vec3 dir = Vec3(n01(rng), n01(rng), n01(rng)).normalized();
    const Pose t2{se3::randomRotation(rng, n01), dir * (0.3 + 0.5 * unit(rng)) * (s1.diag + s2.diag)};
    const Vec3 target1 = b1.points[rng() % b1.points.size()].position;
    const Vec3 target2 = b2.points[rng() % b2.points.size()].position;

    const narrowphase::WitnessResult fwd = narrowphase::compositeWitness(s1, t1, s2, t2);
    const smoothing::ObjectContext o1{&s1, &b1, t1, t1.act(target1)};
    const smoothing::ObjectContext o2{&s2, &b2, t2, t2.act(target2)};
    const smoothing::SmoothedPair pair = smoothing::smoothedWitness(o1, o2, fwd, opt.sampling, opt.score, rng());
    const WitnessJacobians j = witnessJacobians(pair, t1, t2, true, opt.crossScale);
    const std::array<Mat36, 4> ref = frozenSurrogateJacobians(pair, t1, t2, opt.h);
    const std::array<const Mat36*, 4> got{&j.x1_xi1, &j.x2_xi2, &j.x1_xi2, &j.x2_xi1};
    for (int b = 0; b < 4; ++b) {
      const double e = relError(*got[b], ref[b]);
      rep.maxBlockError[b] = std::isfinite(e) ? std::max(rep.maxBlockError[b], e) : HUGE_VAL;
    }

    const Twist xi1(Vec3(n01(rng), n01(rng), n01(rng)), Vec3(n01(rng), n01(rng), n01(rng)));
    const double lambda = std::exp(logLambda(rng));
    const Twist xi2 = se3::equivalentTransport(t1, t2, xi1);
    const Mat4 lhs = ((t1 * se3::expMap(-lambda * xi1)).inverse() * t2).matrix();
    const Mat4 rhs = (t1.inverse() * (t2 * se3::expMap(-lambda * xi2))).matrix();
    rep.maxTransportError = std::max(rep.maxTransportError, (lhs - rhs).norm());
  }
  for (double e : rep.maxBlockError) rep.passed = rep.passed && e <= opt.tolerance;
  rep.passed = rep.passed && rep.maxTransportError <= 1e-9;
  return rep;
}

}  // namespace dw::gradient
