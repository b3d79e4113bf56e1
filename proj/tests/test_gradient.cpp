#include <cmath>
#include <random>

#include "diffwitness/gradient.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace dw;
using namespace dw::gradient;
using se3::Pose;
using se3::Twist;
using smoothing::Score;

TEST_CASE("loss") {
  SUBCASE("global optimum") {
    const Vec3 p(0.1, 0.2, 0.3);
    const LossValue l = loss(p, p, p, p, {});
    CHECK(l.value == 0.0);
    CHECK(l.dx1.norm() == 0.0);
    CHECK(l.dx2.norm() == 0.0);
  }
  SUBCASE("unit gap") {
    const Vec3 a(0, 0, 0), b(1, 0, 0);
    CHECK(loss(a, b, a, b, {}).value == 1.0);
  }
  SUBCASE("margin") {
    const Vec3 a(0, 0, 0), b(1, 0, 0);
    CHECK(loss(a, b, a, b, {0.1}).value == doctest::Approx(0.81).epsilon(1e-15));
    // Coincident witnesses drop the margin term.
    CHECK(loss(a, a, a, a, {0.1}).value == 0.0);
  }
  SUBCASE("partials match finite differences with the normal frozen") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01;
    auto rv = [&] { return Vec3(n01(rng), n01(rng), n01(rng)); };
    for (int trial = 0; trial < 50; ++trial) {
      const Vec3 x1 = rv(), x2 = rv(), t1 = rv(), t2 = rv();
      const double beta = 0.05;
      const Vec3 n = (x2 - x1).normalized();
      auto frozen = [&](const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
        return (a - b + beta * n).squaredNorm() + (a - c).squaredNorm() + (b - d).squaredNorm();
      };
      const LossValue l = loss(x1, x2, t1, t2, {beta});
      CHECK(l.value == doctest::Approx(frozen(x1, x2, t1, t2)).epsilon(1e-14));
      const double h = 1e-6;
      for (int k = 0; k < 3; ++k) {
        const Vec3 e = Vec3::Unit(k) * h;
        CHECK((frozen(x1 + e, x2, t1, t2) - frozen(x1 - e, x2, t1, t2)) / (2 * h) == doctest::Approx(l.dx1[k]).epsilon(1e-6));
        CHECK((frozen(x1, x2 + e, t1, t2) - frozen(x1, x2 - e, t1, t2)) / (2 * h) == doctest::Approx(l.dx2[k]).epsilon(1e-6));
        CHECK((frozen(x1, x2, t1 + e, t2) - frozen(x1, x2, t1 - e, t2)) / (2 * h) == doctest::Approx(l.dt1[k]).epsilon(1e-6));
        CHECK((frozen(x1, x2, t1, t2 + e) - frozen(x1, x2, t1, t2 - e)) / (2 * h) == doctest::Approx(l.dt2[k]).epsilon(1e-6));
      }
      const Pose Q = oracle::randomPose(rng, 3.0);
      CHECK(loss(Q.act(x1), Q.act(x2), Q.act(t1), Q.act(t2), {beta}).value == doctest::Approx(l.value).epsilon(1e-12));
    }
  }
}

TEST_CASE("point jacobian") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    const Pose T = oracle::randomPose(rng, 1.0);
    const Vec3 p(n01(rng), n01(rng), n01(rng));
    const Mat36 j = pointJacobian(T, p);
    for (int k = 0; k < 6; ++k) {
      const Twist e = Twist::fromVector(Vec6::Unit(k) * 1e-6);
      const Vec3 fd = ((T * se3::expMap(e)).act(p) - (T * se3::expMap(-e)).act(p)) / 2e-6;
      CHECK((fd - j.col(k)).norm() < 1e-8);
    }
  }
}

TEST_CASE("witness jacobians") {
  SUBCASE("single candidate is rigid") {
    smoothing::SmoothedPair p;
    p.c1.local = {Vec3(0.1, 0.2, 0.3)};
    p.c2.local = {Vec3(-0.1, 0, 0)};
    const Pose t1 = Pose::identity(), t2 = Pose::translation({1, 0, 0});
    p.c1.place(t1);
    p.c2.place(t2);
    p.ref1 = p.c1.world[0];
    p.ref2 = p.c2.world[0];
    p.s1 = smoothing::softmaxSmooth(p.c1, smoothing::scoreDistance(p.c1, p.ref2));
    p.s2 = smoothing::softmaxSmooth(p.c2, smoothing::scoreDistance(p.c2, p.ref1));
    const WitnessJacobians j = witnessJacobians(p, t1, t2);
    CHECK((j.x1_xi1 - pointJacobian(t1, p.c1.local[0])).norm() < 1e-15);
    CHECK((j.x2_xi2 - pointJacobian(t2, p.c2.local[0])).norm() < 1e-15);
    CHECK(j.x1_xi2.norm() == 0.0);
    CHECK(j.x2_xi1.norm() == 0.0);
  }
  SUBCASE("coincident candidates are rigid") {
    smoothing::SmoothedPair p;
    p.c1.local = {Vec3(0.1, 0.2, 0.3), Vec3(0.1, 0.2, 0.3), Vec3(0.1, 0.2, 0.3)};
    p.c2.local = {Vec3(-0.1, 0, 0), Vec3(-0.1, 0, 0)};
    const Pose t1 = Pose::identity(), t2 = Pose::translation({1, 0, 0});
    p.c1.place(t1);
    p.c2.place(t2);
    p.ref1 = p.c1.world[0];
    p.ref2 = p.c2.world[0];
    p.s1 = smoothing::softmaxSmooth(p.c1, smoothing::scoreDistance(p.c1, p.ref2));
    p.s2 = smoothing::softmaxSmooth(p.c2, smoothing::scoreDistance(p.c2, p.ref1));
    const WitnessJacobians j = witnessJacobians(p, t1, t2);
    CHECK((j.x1_xi1 - pointJacobian(t1, p.c1.local[0])).norm() < 1e-12);
    CHECK(j.x1_xi2.norm() < 1e-12);
  }
  SUBCASE("all four blocks match the frozen surrogate") {
    std::mt19937_64 rng(42);
    const std::vector<std::pair<std::string, std::string>> pairs = {
        {"cube", "icosahedron"}, {"sphere162", "cube"}, {"lshape", "ring8"}, {"ring8", "sphere162"}};
    double worst = 0.0;
    for (const Score score : {Score::Distance, Score::Direction}) {
      for (int trial = 0; trial < 25; ++trial) {
        const auto& [a, b] = pairs[trial % pairs.size()];
        const auto c = fixture::makeCase(rng, a, b, score);
        const WitnessJacobians j = witnessJacobians(c.pair, c.t1, c.t2);
        // Direction scores can make tau tiny while the blocks stay large, so
        // they need a smaller step than the distance gate.
        const auto fd = c.frozen().jacobians(score == Score::Distance ? 1e-6 : 1e-8);
        worst = std::max({worst, fixture::relError(j.x1_xi1, fd[0]), fixture::relError(j.x2_xi2, fd[1]),
                          fixture::relError(j.x1_xi2, fd[2]), fixture::relError(j.x2_xi1, fd[3])});
      }
    }
    CHECK(worst < 1e-4);
  }
  SUBCASE("freezing the temperature does not match the surrogate") {
    std::mt19937_64 rng(43);
    int differs = 0;
    for (int trial = 0; trial < 20; ++trial) {
      const auto c = fixture::makeCase(rng, "cube", "icosahedron");
      const WitnessJacobians j = witnessJacobians(c.pair, c.t1, c.t2, false);
      const auto fd = c.frozen().jacobians(1e-6);
      if (fixture::relError(j.x1_xi1, fd[0]) > 1e-3) ++differs;
    }
    CHECK(differs > 10);
  }
  SUBCASE("ambient gradient route agrees with the coordinate route") {
    // Self term only: L = |x1* - q|^2 with the other witness held fixed.
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 20; ++trial) {
      const auto c = fixture::makeCase(rng, "sphere162", "lshape");
      const Vec3 q = c.t1.act(c.target1Local);
      const Vec3 dLdx = 2.0 * (c.pair.s1.xStar - q);
      const WitnessJacobians j = witnessJacobians(c.pair, c.t1, c.t2);
      const Vec6 coord = j.x1_xi1.transpose() * dLdx;
      // dL/dv_i for every candidate world point, then G = sum_i dL/dv_i [v_i,o; 1]^T.
      const auto& s = c.pair.s1;
      const Eigen::MatrixXd dwdu = smoothing::weightJacobian(s, true);
      const auto n = static_cast<Eigen::Index>(c.pair.c1.size());
      Eigen::RowVectorXd dLdw(n);
      for (Eigen::Index i = 0; i < n; ++i) dLdw[i] = dLdx.dot(c.pair.c1.world[i]);
      const Eigen::RowVectorXd dLdu = dLdw * dwdu;
      se3::AmbientGradient G;
      for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3 dv = s.w[i] * dLdx - dLdu[i] * 2.0 * (c.pair.c1.world[i] - c.pair.ref2);
        Eigen::Vector4d h;
        h << c.pair.c1.local[i], 1.0;
        G.matrix.topRows<3>() += dv * h.transpose();
      }
      const Twist viaG = se3::projectToAlgebra(c.t1, G);
      const Twist direct = se3::algebraFromCoordinateGradient(coord);
      CHECK((viaG.vector() - direct.vector()).norm() <= 1e-9 * std::max(1.0, direct.vector().norm()));
    }
  }
}

TEST_CASE("assemble_pose_gradients") {
  std::mt19937_64 rng(9);
  SUBCASE("zero loss gradient") {
    const TaskGradient g = assemblePoseGradients(Vec6::Zero(), Vec6::Zero(), oracle::randomPose(rng, 1.0),
                                                 oracle::randomPose(rng, 1.0), {});
    CHECK(g.xi2Total.vector().norm() == 0.0);
  }
  SUBCASE("equal poses transport to the negated twist") {
    const Pose T = oracle::randomPose(rng, 1.0);
    Vec6 c1;
    c1 << 1, 2, 3, 4, 5, 6;
    const TaskGradient g = assemblePoseGradients(c1, Vec6::Zero(), T, T, {});
    CHECK((g.xi2Total.vector() + g.xi1.vector()).norm() < 1e-12);
    const TaskGradient off = assemblePoseGradients(c1, Vec6::Zero(), T, T, {false, false});
    CHECK(off.xi2Total.vector().norm() == 0.0);
    const TaskGradient joint = assemblePoseGradients(c1, Vec6::Zero(), T, T, {true, true});
    CHECK(joint.xi2Total.vector().norm() == 0.0);
    CHECK(joint.xi1.vector().norm() > 0.0);
  }
  SUBCASE("a transported step on T2 matches the step on T1 through the loss") {
    for (int trial = 0; trial < 30; ++trial) {
      const auto c = fixture::makeCase(rng, "icosahedron", "cube");
      PairProblem p{&c.s1, &c.s2, c.target1Local, c.target2Local, {}};
      Vec6 c1;
      for (int k = 0; k < 6; ++k) c1[k] = std::normal_distribution<double>()(rng);
      const TaskGradient g = assemblePoseGradients(c1, Vec6::Zero(), c.t1, c.t2, {});
      const double lambda = 1e-3;
      const Pose t1Step = c.t1 * se3::expMap(-lambda * g.xi1);
      const Pose t2Step = c.t2 * se3::expMap(-lambda * g.xi2Total);
      CHECK(std::abs(p.forwardLoss(t1Step, c.t2) - p.forwardLoss(c.t1, t2Step)) < 1e-8);
      CHECK(((t1Step.inverse() * c.t2).matrix() - (c.t1.inverse() * t2Step).matrix()).norm() < 1e-9);
    }
  }
}

TEST_CASE("zeroth-order estimators") {
  SUBCASE("central differences are exact to second order on a quadratic") {
    Vec6 g;
    g << 1, -2, 3, 0.5, 0.25, -1;
    Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Random();
    A = A * A.transpose();
    auto f = [&](const Twist& e) { return g.dot(e.vector()) + 0.5 * e.vector().dot(A * e.vector()); };
    CHECK((centralDifference(f, 1e-3, 1e-3) - g).norm() < 1e-9);
  }
  SUBCASE("rs0: constant loss gives zero") {
    std::mt19937_64 rng(1);
    CHECK(rs0Estimate([](const Twist&) { return 4.2; }, 1e-2, 12, rng).norm() == 0.0);
  }
  SUBCASE("rs0 is consistent on a linear model") {
    Vec6 g;
    g << 1, -2, 3, 0.5, 0.25, -1;
    std::mt19937_64 rng(2);
    const int n = 10000;
    const Vec6 est = rs0Estimate([&](const Twist& e) { return g.dot(e.vector()); }, 1e-2, n, rng);
    // Var of component k is |g|^2 + g_k^2 for a linear model.
    for (int k = 0; k < 6; ++k) CHECK(std::abs(est[k] - g[k]) < 3.0 * std::sqrt((g.squaredNorm() + g[k] * g[k]) / n));
  }
  SUBCASE("rs0 and fd agree within sampling noise on a smooth pair") {
    const auto sphere = geom::normalizeScale(geom::shapes::sphere642(), 0.1);
    const auto cube = geom::normalizeScale(geom::shapes::cube(), 0.1);
    PairProblem p{&sphere, &cube, Vec3(0.05, 0, 0), Vec3(-0.02, 0.01, 0.0), {}};
    const Pose t1 = Pose::identity();
    const Pose t2 = Pose::translation({0.2, 0.0, 0.0});
    const auto [fd1, fd2] = gradFiniteDifference(p, t1, t2, 1e-6, 1e-6, false);
    const int n = 2000;
    const auto [r1, r2] = gradRs0(p, t1, t2, 1e-4, n, 5, false);
    CHECK((r2 - fd2).norm() < 3.0 * std::sqrt(7.0 / n) * fd2.norm());
    const auto [s1, s2] = gradRs0(p, t1, t2, 1e-2, 12, 6, false);
    const auto [u1, u2] = gradRs0(p, t1, t2, 1e-2, 12, 7, false);
    CHECK((s2 - u2).norm() > 0.0);
  }
}

TEST_CASE("analytical baseline") {
  SUBCASE("classification on a cube") {
    const auto cube = geom::shapes::cube();
    const auto& piece = cube.pieces[0];
    CHECK(classifyWitness(piece, Vec3(0.5, 0.5, 0.5), 1.0).type == Feature::Vertex);
    CHECK(classifyWitness(piece, Vec3(0.5, 0.1, 0.2), 1.0).type == Feature::Face);
    CHECK(classifyWitness(piece, Vec3(0.5, 0.5, 0.1), 1.0).type == Feature::Edge);
  }
  SUBCASE("vertex witness moves rigidly") {
    const auto big = geom::makeConvexShape("slab", geom::shapes::boxMesh({-1, -1, -1}, {1, 1, 0}));
    const auto cube = geom::shapes::cube();
    PairProblem p{&big, &cube, Vec3::Zero(), Vec3::Zero(), {}};
    // Cube balanced on a vertex above the slab's top face.
    const Mat3 R = Eigen::AngleAxisd(0.3, Vec3(1, 1, 0).normalized()).toRotationMatrix();
    Pose t2{R, Vec3::Zero()};
    const auto lowest = narrowphase::support(cube.pieces[0], t2, {0, 0, -1}).point;
    t2.t = Vec3(0.1, 0.2, 0.3) - lowest;
    const auto fwd = narrowphase::compositeWitness(big, Pose::identity(), cube, t2);
    const AnalyticalResult a = analyticalJacobians(p, Pose::identity(), t2, fwd);
    CHECK(a.f2.type == Feature::Vertex);
    CHECK(a.f1.type == Feature::Face);
    CHECK((a.jac.x2_xi2 - pointJacobian(t2, fwd.x2Local)).norm() < 1e-12);
    // Face side: closest point on the slab follows the vertex tangentially only.
    const Mat36 fd = [&] {
      Mat36 out;
      for (int k = 0; k < 6; ++k) {
        const Twist e = Twist::fromVector(Vec6::Unit(k) * 1e-6);
        auto at = [&](const Pose& t) { return narrowphase::compositeWitness(big, Pose::identity(), cube, t).x1World; };
        out.col(k) = (at(t2 * se3::expMap(e)) - at(t2 * se3::expMap(-e))) / 2e-6;
      }
      return out;
    }();
    CHECK((a.jac.x1_xi2 - fd).norm() < 1e-5 * std::max(1.0, fd.norm()));
    CHECK(std::abs(a.jac.x1_xi2.row(2).norm()) < 1e-12);
  }
  SUBCASE("face witness against a fixed point matches finite differences") {
    const auto slab = geom::makeConvexShape("slab", geom::shapes::boxMesh({-1, -1, -1}, {1, 1, 0}));
    const auto tiny = geom::makeConvexShape("tip", geom::shapes::icosahedronMesh(0.01));
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 10; ++trial) {
      const Pose t1{Eigen::AngleAxisd(0.2, Vec3(0.3, 1, 0).normalized()).toRotationMatrix(), Vec3(0.05, -0.02, 0.0)};
      // Icosahedron vertex pointing at the slab.
      Pose t2 = oracle::randomPose(rng, 0.0);
      const Vec3 up = t1.rotate(Vec3::UnitZ());
      const Vec3 low = narrowphase::support(tiny.pieces[0], t2, -up).point;
      t2.t = t1.act(Vec3(0.1, -0.3, 0.0)) + 0.05 * up - low;
      const auto fwd = narrowphase::compositeWitness(slab, t1, tiny, t2);
      PairProblem p{&slab, &tiny, Vec3::Zero(), Vec3::Zero(), {}};
      const AnalyticalResult a = analyticalJacobians(p, t1, t2, fwd);
      REQUIRE(a.f1.type == Feature::Face);
      Mat36 fd;
      for (int k = 0; k < 6; ++k) {
        const Twist e = Twist::fromVector(Vec6::Unit(k) * 1e-6);
        auto at = [&](const Pose& t) { return narrowphase::compositeWitness(slab, t, tiny, t2).x1World; };
        fd.col(k) = (at(t1 * se3::expMap(e)) - at(t1 * se3::expMap(-e))) / 2e-6;
      }
      CHECK((a.jac.x1_xi1 - fd).norm() < 1e-5 * fd.norm());
    }
  }
  SUBCASE("in-plane translation leaves the projection fixed") {
    const auto slab = geom::makeConvexShape("slab", geom::shapes::boxMesh({-1, -1, -1}, {1, 1, 0}));
    const auto tiny = geom::makeConvexShape("tip", geom::shapes::icosahedronMesh(0.01));
    const Vec3 v0 = tiny.pieces[0].vertices[0];
    Pose t2{Eigen::Quaterniond::FromTwoVectors(v0, -Vec3::UnitZ()).toRotationMatrix(), Vec3::Zero()};
    t2.t = Vec3(0.1, -0.3, 1.0) - t2.rotate(v0);
    const auto fwd = narrowphase::compositeWitness(slab, Pose::identity(), tiny, t2);
    PairProblem p{&slab, &tiny, Vec3::Zero(), Vec3::Zero(), {}};
    const AnalyticalResult a = analyticalJacobians(p, Pose::identity(), t2, fwd);
    REQUIRE(a.f1.type == Feature::Face);
    REQUIRE(a.f2.type == Feature::Vertex);
    CHECK(a.jac.x1_xi1.col(3).norm() < 1e-15);
    CHECK(a.jac.x1_xi1.col(4).norm() < 1e-15);
    CHECK((fwd.x1World - Vec3(0.1, -0.3, 0)).norm() < 1e-12);
  }
}
