#pragma once

// Forward collision queries: GJK distance, EPA penetration and the composite
// broad phase. None of this is differentiable; gradients come from smoothing.

#include <array>
#include <optional>
#include <variant>

#include "diffwitness/geom.hpp"
#include "diffwitness/se3.hpp"

namespace dw::narrowphase {

using geom::CompositeShape;
using geom::ConvexPiece;
using se3::Pose;

struct WitnessResult {
  Vec3 x1World = Vec3::Zero();
  Vec3 x2World = Vec3::Zero();
  Vec3 x1Local = Vec3::Zero();  // shape-local frame of object 1
  Vec3 x2Local = Vec3::Zero();
  int piece1 = 0;
  int piece2 = 0;
  double signedDistance = 0.0;  // negative when penetrating
  bool penetrating = false;
  // Unit direction along which object 2 moves away from object 1.
  Vec3 normal = Vec3::UnitX();
  bool converged = true;
  bool degenerate = false;  // EPA fell back to its best face
  int iterations = 0;
};

struct SupportResult {
  Vec3 point;
  int index;
};

// World-frame vertex maximising <v, direction>; lowest index on ties.
SupportResult support(const ConvexPiece& piece, const Pose& pose, const Vec3& direction);

// Vertex of the Minkowski difference A - B.
struct SimplexVertex {
  Vec3 w;       // a - b, world frame
  Vec3 a;       // world support point on A
  Vec3 b;       // world support point on B
  int ia = -1;  // vertex index on A
  int ib = -1;  // vertex index on B
};

struct Simplex {
  std::array<SimplexVertex, 4> v;
  int size = 0;
};

struct Intersecting {
  Simplex simplex;
  int iterations = 0;
};

inline constexpr int kGjkMaxIterations = 128;
inline constexpr int kEpaMaxExpansions = 255;

// Closest points between two convex pieces, or the terminal simplex when they
// overlap. Local coordinates are those of each piece's shape frame.
std::variant<WitnessResult, Intersecting> gjkDistance(const ConvexPiece& p1, const Pose& t1,
                                                      const ConvexPiece& p2, const Pose& t2);

// Penetration depth and deepest points, seeded by a GJK simplex enclosing the origin.
WitnessResult epaPenetration(const ConvexPiece& p1, const Pose& t1, const ConvexPiece& p2,
                             const Pose& t2, const Simplex& seed);

// gjkDistance followed by EPA when the pieces overlap.
WitnessResult pieceWitness(const ConvexPiece& p1, const Pose& t1, const ConvexPiece& p2,
                           const Pose& t2);

struct BroadPhaseStats {
  int pairsTotal = 0;
  int narrowPhaseCalls = 0;
};

// Deepest penetration if any piece pair overlaps, closest pair otherwise.
// Ties go to the lexicographically smallest (piece1, piece2).
WitnessResult compositeWitness(const CompositeShape& s1, const Pose& t1, const CompositeShape& s2,
                               const Pose& t2, BroadPhaseStats* stats = nullptr,
                               bool exhaustive = false);

// Signed-volume closest point of a simplex to the origin. Returns the reduced
// simplex and writes barycentric weights.
Simplex closestOnSimplex(const Simplex& s, std::array<double, 4>& lambda);

}  // namespace dw::narrowphase
