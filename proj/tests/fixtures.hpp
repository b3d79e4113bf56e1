#pragma once

#include <random>
#include <string>

#include "diffwitness/gradient.hpp"
#include "diffwitness/smoothing.hpp"
#include "oracles.hpp"

namespace fixture {

using namespace dw;

// A random configuration of two bundled shapes with surrogate state built.
struct SurrogateCase {
  geom::CompositeShape s1, s2;
  geom::SurfacePointBank b1, b2;
  se3::Pose t1, t2;
  Vec3 target1Local, target2Local;
  narrowphase::WitnessResult fwd;
  smoothing::SmoothedPair pair;

  oracle::FrozenSurrogate frozen() const {
    oracle::FrozenSurrogate f;
    f.local1 = pair.c1.local;
    f.local2 = pair.c2.local;
    f.t1Ref = t1;
    f.t2Ref = t2;
    f.ref1 = pair.ref1;
    f.ref2 = pair.ref2;
    f.direction = pair.score == smoothing::Score::Direction;
    f.penetrating = pair.penetrating;
    return f;
  }
};

inline SurrogateCase makeCase(std::mt19937_64& rng, const std::string& n1, const std::string& n2,
                              smoothing::Score score = smoothing::Score::Distance,
                              smoothing::SamplingConfig cfg = {}) {
  std::uniform_real_distribution<double> diag(0.02, 0.2), unit(0.0, 1.0);
  std::normal_distribution<double> n01;
  SurrogateCase c;
  c.s1 = geom::normalizeScale(geom::shapes::bundled(n1), diag(rng));
  c.s2 = geom::normalizeScale(geom::shapes::bundled(n2), diag(rng));
  c.b1 = geom::sampleSurfaceBank(c.s1, 256, rng());
  c.b2 = geom::sampleSurfaceBank(c.s2, 256, rng());
  c.t1 = {se3::randomRotation(rng, n01), Vec3::Zero()};
  const Vec3 dir = Vec3(n01(rng), n01(rng), n01(rng)).normalized();
  c.t2 = {se3::randomRotation(rng, n01), dir * (0.3 + 0.5 * unit(rng)) * (c.s1.diag + c.s2.diag)};
  c.target1Local = c.b1.points[rng() % c.b1.points.size()].position;
  c.target2Local = c.b2.points[rng() % c.b2.points.size()].position;
  c.fwd = narrowphase::compositeWitness(c.s1, c.t1, c.s2, c.t2);
  smoothing::ObjectContext o1{&c.s1, &c.b1, c.t1, c.t1.act(c.target1Local)};
  smoothing::ObjectContext o2{&c.s2, &c.b2, c.t2, c.t2.act(c.target2Local)};
  c.pair = smoothing::smoothedWitness(o1, o2, c.fwd, cfg, score, rng());
  return c;
}

inline double relError(const Mat36& a, const Mat36& ref) {
  return (a - ref).norm() / std::max(ref.norm(), 1e-6);
}

}  // namespace fixture
