#include "diffwitness/narrowphase.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace dw::narrowphase {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool sameSign(double a, double b) { return (a > 0.0 && b > 0.0) || (a < 0.0 && b < 0.0); }

struct SubResult {
  Simplex s;
  std::array<double, 4> lambda{};
  double dist2 = kInf;
};

SubResult single(const SimplexVertex& p) {
  SubResult r;
  r.s.v[0] = p;
  r.s.size = 1;
  r.lambda = {1.0, 0.0, 0.0, 0.0};
  r.dist2 = p.w.squaredNorm();
  return r;
}

SubResult s1d(const SimplexVertex& p, const SimplexVertex& q) {
  const Vec3 t = q.w - p.w;
  const double tt = t.squaredNorm();
  if (!(tt > 0.0)) return single(p);
  const double tau = -p.w.dot(t) / tt;
  if (tau <= 0.0) return single(p);
  if (tau >= 1.0) return single(q);
  SubResult r;
  r.s.v[0] = p;
  r.s.v[1] = q;
  r.s.size = 2;
  r.lambda = {1.0 - tau, tau, 0.0, 0.0};
  r.dist2 = (p.w + tau * t).squaredNorm();
  return r;
}

SubResult bestOf(const SubResult& a, const SubResult& b) { return b.dist2 < a.dist2 ? b : a; }

SubResult s2d(const SimplexVertex& p, const SimplexVertex& q, const SimplexVertex& r) {
  const Vec3 n = (q.w - p.w).cross(r.w - p.w);
  const double nn = n.squaredNorm();
  const double scale2 = std::max({(q.w - p.w).squaredNorm(), (r.w - p.w).squaredNorm(), (r.w - q.w).squaredNorm()});
  if (!(nn > 1e-24 * scale2 * scale2)) {
    return bestOf(bestOf(s1d(p, q), s1d(q, r)), s1d(r, p));
  }
  const Vec3 p0 = n * (p.w.dot(n) / nn);

  int i = 0;
  if (std::abs(n.y()) > std::abs(n[i])) i = 1;
  if (std::abs(n.z()) > std::abs(n[i])) i = 2;
  const int k = (i + 1) % 3, l = (i + 2) % 3;
  auto cross2 = [&](const Vec3& a, const Vec3& b) { return a[k] * b[l] - a[l] * b[k]; };

  const double mu = n[i];
  const std::array<double, 3> c = {cross2(q.w - p0, r.w - p0), cross2(r.w - p0, p.w - p0),
                                   cross2(p.w - p0, q.w - p0)};
  if (sameSign(mu, c[0]) && sameSign(mu, c[1]) && sameSign(mu, c[2])) {
    SubResult out;
    out.s.v[0] = p;
    out.s.v[1] = q;
    out.s.v[2] = r;
    out.s.size = 3;
    out.lambda = {c[0] / mu, c[1] / mu, c[2] / mu, 0.0};
    out.dist2 = (out.lambda[0] * p.w + out.lambda[1] * q.w + out.lambda[2] * r.w).squaredNorm();
    return out;
  }
  SubResult best;
  if (!sameSign(mu, c[0])) best = bestOf(best, s1d(q, r));
  if (!sameSign(mu, c[1])) best = bestOf(best, s1d(r, p));
  if (!sameSign(mu, c[2])) best = bestOf(best, s1d(p, q));
  return best;
}

double signedVolume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).dot((c - a).cross(d - a));
}

SubResult s3d(const SimplexVertex& p, const SimplexVertex& q, const SimplexVertex& r, const SimplexVertex& s) {
  const Vec3 o = Vec3::Zero();
  const double vol = signedVolume(p.w, q.w, r.w, s.w);
  const std::array<double, 4> c = {signedVolume(o, q.w, r.w, s.w), signedVolume(p.w, o, r.w, s.w),
                                   signedVolume(p.w, q.w, o, s.w), signedVolume(p.w, q.w, r.w, o)};
  if (sameSign(vol, c[0]) && sameSign(vol, c[1]) && sameSign(vol, c[2]) && sameSign(vol, c[3])) {
    SubResult out;
    out.s.v = {p, q, r, s};
    out.s.size = 4;
    for (int j = 0; j < 4; ++j) out.lambda[j] = c[j] / vol;
    out.dist2 = 0.0;
    return out;
  }
  const bool flat = vol == 0.0;
  SubResult best;
  if (flat || !sameSign(vol, c[0])) best = bestOf(best, s2d(q, r, s));
  if (flat || !sameSign(vol, c[1])) best = bestOf(best, s2d(p, r, s));
  if (flat || !sameSign(vol, c[2])) best = bestOf(best, s2d(p, q, s));
  if (flat || !sameSign(vol, c[3])) best = bestOf(best, s2d(p, q, r));
  return best;
}

class MinkowskiSupport {
 public:
  MinkowskiSupport(const ConvexPiece& p1, const Pose& t1, const ConvexPiece& p2, const Pose& t2)
      : p1_(p1), t1_(t1), p2_(p2), t2_(t2) {}

  SimplexVertex operator()(const Vec3& d) const {
    const SupportResult a = support(p1_, t1_, d);
    const SupportResult b = support(p2_, t2_, -d);
    return {a.point - b.point, a.point, b.point, a.index, b.index};
  }

  double scale() const { return std::max({2.0 * p1_.boundingRadius, 2.0 * p2_.boundingRadius, 1e-300}); }

  Vec3 centerOffset() const { return t1_.act(p1_.centroid) - t2_.act(p2_.centroid); }

  // Assemble witnesses from barycentric weights over simplex vertices.
  void witnesses(const SimplexVertex* v, const double* lambda, int n, WitnessResult& out) const {
    Vec3 a = Vec3::Zero(), b = Vec3::Zero();
    for (int k = 0; k < n; ++k) {
      a += lambda[k] * p1_.vertices[v[k].ia];
      b += lambda[k] * p2_.vertices[v[k].ib];
    }
    out.x1Local = a;
    out.x2Local = b;
    out.x1World = t1_.act(a);
    out.x2World = t2_.act(b);
  }

 private:
  const ConvexPiece& p1_;
  const Pose& t1_;
  const ConvexPiece& p2_;
  const Pose& t2_;
};

bool sameVertex(const SimplexVertex& a, const SimplexVertex& b) { return a.ia == b.ia && a.ib == b.ib; }

}  // namespace

SupportResult support(const ConvexPiece& piece, const Pose& pose, const Vec3& direction) {
  const Vec3 dl = pose.R.transpose() * direction;
  int best = 0;
  double bestDot = -kInf;
  for (std::size_t i = 0; i < piece.vertices.size(); ++i) {
    const double d = piece.vertices[i].dot(dl);
    if (d > bestDot) bestDot = d, best = static_cast<int>(i);
  }
  return {pose.act(piece.vertices[best]), best};
}

Simplex closestOnSimplex(const Simplex& s, std::array<double, 4>& lambda) {
  SubResult r;
  switch (s.size) {
    case 1: r = single(s.v[0]); break;
    case 2: r = s1d(s.v[0], s.v[1]); break;
    case 3: r = s2d(s.v[0], s.v[1], s.v[2]); break;
    default: r = s3d(s.v[0], s.v[1], s.v[2], s.v[3]); break;
  }
  lambda = r.lambda;
  return r.s;
}

std::variant<WitnessResult, Intersecting> gjkDistance(const ConvexPiece& p1, const Pose& t1,
                                                      const ConvexPiece& p2, const Pose& t2) {
  const MinkowskiSupport supp(p1, t1, p2, t2);
  const double scale = supp.scale();
  const double touchTol2 = (1e-12 * scale) * (1e-12 * scale);

  Vec3 d0 = supp.centerOffset();
  if (d0.squaredNorm() < touchTol2) d0 = Vec3::UnitX();

  Simplex s;
  s.v[0] = supp(-d0);
  s.size = 1;
  std::array<double, 4> lambda = {1.0, 0.0, 0.0, 0.0};
  Vec3 v = s.v[0].w;

  bool converged = false;
  int it = 0;
  for (; it < kGjkMaxIterations; ++it) {
    const double dist2 = v.squaredNorm();
    if (dist2 <= touchTol2) return Intersecting{s, it};

    const SimplexVertex w = supp(-v);
    bool dup = false;
    for (int k = 0; k < s.size; ++k) dup = dup || sameVertex(s.v[k], w);
    const double gap = dist2 - v.dot(w.w);
    if (dup || gap <= 1e-12 * dist2) {
      converged = true;
      break;
    }

    Simplex grown = s;
    grown.v[grown.size++] = w;
    std::array<double, 4> lam{};
    const Simplex reduced = closestOnSimplex(grown, lam);
    if (reduced.size == 4) return Intersecting{reduced, it + 1};

    Vec3 vNew = Vec3::Zero();
    for (int k = 0; k < reduced.size; ++k) vNew += lam[k] * reduced.v[k].w;
    if (vNew.squaredNorm() >= dist2) {
      // No progress: numerical floor reached.
      converged = true;
      break;
    }
    s = reduced;
    lambda = lam;
    v = vNew;
  }
  if (v.squaredNorm() <= touchTol2) return Intersecting{s, it};

  WitnessResult out;
  supp.witnesses(s.v.data(), lambda.data(), s.size, out);
  const Vec3 gapVec = out.x2World - out.x1World;
  out.signedDistance = gapVec.norm();
  out.penetrating = false;
  out.normal = out.signedDistance > 0.0 ? Vec3(gapVec / out.signedDistance) : Vec3(-v.normalized());
  out.converged = converged;
  out.iterations = it;
  return out;
}

namespace {

struct EpaFace {
  std::array<int, 3> v;
  Vec3 n;
  double dist;
  bool alive = true;
  bool degenerate = false;
};

inline std::uint64_t edgeKey(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

// Grows a GJK terminal simplex into a tetrahedron. Returns false when the
// Minkowski difference is flat in every probed direction.
bool growToTetrahedron(Simplex& s, const MinkowskiSupport& supp, double tol) {
  const std::array<Vec3, 6> axes = {Vec3::UnitX(), -Vec3::UnitX(), Vec3::UnitY(),
                                    -Vec3::UnitY(), Vec3::UnitZ(), -Vec3::UnitZ()};
  if (s.size == 1) {
    for (const auto& d : axes) {
      const SimplexVertex w = supp(d);
      if ((w.w - s.v[0].w).norm() > tol) {
        s.v[s.size++] = w;
        break;
      }
    }
    if (s.size < 2) return false;
  }
  if (s.size == 2) {
    const Vec3 e = (s.v[1].w - s.v[0].w).normalized();
    int minAxis = 0;
    for (int i = 1; i < 3; ++i) {
      if (std::abs(e[i]) < std::abs(e[minAxis])) minAxis = i;
    }
    const Vec3 d1 = e.cross(Vec3::Unit(minAxis)).normalized();
    const Vec3 d2 = e.cross(d1);
    for (int k = 0; k < 6 && s.size == 2; ++k) {
      const double ang = k * std::acos(-1.0) / 3.0;
      const SimplexVertex w = supp(std::cos(ang) * d1 + std::sin(ang) * d2);
      const Vec3 r = w.w - s.v[0].w;
      if ((r - e * e.dot(r)).norm() > tol) s.v[s.size++] = w;
    }
    if (s.size < 3) return false;
  }
  if (s.size == 3) {
    const Vec3 n = (s.v[1].w - s.v[0].w).cross(s.v[2].w - s.v[0].w).normalized();
    const SimplexVertex up = supp(n);
    const SimplexVertex down = supp(-n);
    const double du = std::abs(n.dot(up.w - s.v[0].w));
    const double dd = std::abs(n.dot(down.w - s.v[0].w));
    if (std::max(du, dd) <= tol) return false;
    s.v[s.size++] = du >= dd ? up : down;
  }
  return std::abs(signedVolume(s.v[0].w, s.v[1].w, s.v[2].w, s.v[3].w)) > 0.0;
}

}  // namespace

WitnessResult epaPenetration(const ConvexPiece& p1, const Pose& t1, const ConvexPiece& p2,
                             const Pose& t2, const Simplex& seed) {
  const MinkowskiSupport supp(p1, t1, p2, t2);
  const double scale = supp.scale();
  const double tol = 1e-9 * scale;

  WitnessResult out;
  Simplex s = seed;
  if (!growToTetrahedron(s, supp, 1e-12 * scale)) {
    // Flat Minkowski difference: report contact at the simplex vertex.
    std::array<double, 4> lam = {1.0, 0.0, 0.0, 0.0};
    supp.witnesses(s.v.data(), lam.data(), 1, out);
    out.signedDistance = -(out.x1World - out.x2World).norm();
    out.penetrating = out.signedDistance < 0.0;
    out.degenerate = true;
    out.converged = false;
    return out;
  }

  std::vector<SimplexVertex> verts(s.v.begin(), s.v.end());
  std::vector<EpaFace> faces;
  std::unordered_map<std::uint64_t, int> edges;
  const Vec3 interior = 0.25 * (verts[0].w + verts[1].w + verts[2].w + verts[3].w);

  auto addFace = [&](int a, int b, int c, bool orientByInterior) {
    EpaFace f;
    Vec3 n = (verts[b].w - verts[a].w).cross(verts[c].w - verts[a].w);
    if (orientByInterior && n.dot(interior - verts[a].w) > 0.0) {
      std::swap(b, c);
      n = -n;
    }
    f.v = {a, b, c};
    const double len = n.norm();
    if (len > 1e-30 * scale * scale) {
      f.n = n / len;
      f.dist = f.n.dot(verts[a].w);
    } else {
      f.n = Vec3::UnitX();
      f.dist = kInf;
      f.degenerate = true;
    }
    faces.push_back(f);
    const int id = static_cast<int>(faces.size()) - 1;
    for (int k = 0; k < 3; ++k) edges[edgeKey(f.v[k], f.v[(k + 1) % 3])] = id;
    return id;
  };

  addFace(0, 1, 2, true);
  addFace(0, 1, 3, true);
  addFace(0, 2, 3, true);
  addFace(1, 2, 3, true);

  bool converged = false;
  bool degenerate = false;
  int closest = 0;
  int it = 0;
  for (; it < kEpaMaxExpansions; ++it) {
    closest = -1;
    double best = kInf;
    for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
      if (faces[f].alive && faces[f].dist < best) best = faces[f].dist, closest = f;
    }
    if (closest < 0) {
      degenerate = true;
      break;
    }
    const EpaFace& cf = faces[closest];
    const SimplexVertex w = supp(cf.n);
    if (cf.n.dot(w.w) - cf.dist <= tol) {
      converged = true;
      break;
    }
    bool dup = false;
    for (const auto& pv : verts) dup = dup || sameVertex(pv, w);
    if (dup) {
      converged = true;
      break;
    }

    verts.push_back(w);
    const int apex = static_cast<int>(verts.size()) - 1;

    std::vector<int> visible{closest};
    std::vector<char> isVisible(faces.size(), 0);
    isVisible[closest] = 1;
    for (std::size_t k = 0; k < visible.size(); ++k) {
      const auto fv = faces[visible[k]].v;
      for (int e = 0; e < 3; ++e) {
        auto itE = edges.find(edgeKey(fv[(e + 1) % 3], fv[e]));
        if (itE == edges.end()) continue;
        const int g = itE->second;
        if (isVisible[g] || !faces[g].alive) continue;
        const EpaFace& gf = faces[g];
        const bool sees = gf.degenerate ? true : gf.n.dot(w.w - verts[gf.v[0]].w) > 1e-14 * scale;
        if (sees) {
          isVisible[g] = 1;
          visible.push_back(g);
        }
      }
    }

    std::vector<std::pair<int, int>> horizon;
    for (int f : visible) {
      const auto fv = faces[f].v;
      for (int e = 0; e < 3; ++e) {
        auto itE = edges.find(edgeKey(fv[(e + 1) % 3], fv[e]));
        if (itE == edges.end() || !isVisible[itE->second]) horizon.emplace_back(fv[e], fv[(e + 1) % 3]);
      }
    }
    for (int f : visible) {
      faces[f].alive = false;
      const auto fv = faces[f].v;
      for (int e = 0; e < 3; ++e) {
        auto itE = edges.find(edgeKey(fv[e], fv[(e + 1) % 3]));
        if (itE != edges.end() && itE->second == f) edges.erase(itE);
      }
    }
    for (const auto& [a, b] : horizon) {
      const int id = addFace(a, b, apex, false);
      degenerate = degenerate || faces[id].degenerate;
    }
  }
  if (closest < 0) {
    double best = kInf;
    for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
      if (faces[f].alive && !faces[f].degenerate && faces[f].dist < best) best = faces[f].dist, closest = f;
    }
  }
  if (closest < 0) {
    out.degenerate = true;
    out.converged = false;
    std::array<double, 4> lam = {1.0, 0.0, 0.0, 0.0};
    supp.witnesses(verts.data(), lam.data(), 1, out);
    out.signedDistance = -(out.x1World - out.x2World).norm();
    out.penetrating = out.signedDistance < 0.0;
    return out;
  }

  const EpaFace& f = faces[closest];
  const double depth = std::max(f.dist, 0.0);
  const Vec3 p = f.n * depth;
  const Vec3& A = verts[f.v[0]].w;
  const Vec3& B = verts[f.v[1]].w;
  const Vec3& C = verts[f.v[2]].w;
  const double area = (B - A).cross(C - A).dot(f.n);
  std::array<double, 3> lam = {(B - p).cross(C - p).dot(f.n) / area, (C - p).cross(A - p).dot(f.n) / area, 0.0};
  lam[2] = 1.0 - lam[0] - lam[1];
  const std::array<SimplexVertex, 3> fv = {verts[f.v[0]], verts[f.v[1]], verts[f.v[2]]};
  supp.witnesses(fv.data(), lam.data(), 3, out);

  const double gap = (out.x1World - out.x2World).norm();
  out.penetrating = depth > 0.0;
  out.signedDistance = out.penetrating ? -gap : 0.0;
  out.normal = f.n;
  out.converged = converged;
  out.degenerate = degenerate || f.dist < -tol;
  out.iterations = it;
  return out;
}

WitnessResult pieceWitness(const ConvexPiece& p1, const Pose& t1, const ConvexPiece& p2, const Pose& t2) {
  auto g = gjkDistance(p1, t1, p2, t2);
  if (auto* w = std::get_if<WitnessResult>(&g)) return *w;
  const auto& hit = std::get<Intersecting>(g);
  WitnessResult r = epaPenetration(p1, t1, p2, t2, hit.simplex);
  r.iterations += hit.iterations;
  return r;
}

WitnessResult compositeWitness(const CompositeShape& s1, const Pose& t1, const CompositeShape& s2,
                               const Pose& t2, BroadPhaseStats* stats, bool exhaustive) {
  if (s1.pieces.empty() || s2.pieces.empty()) throw geom::GeometryError("composite witness needs nonempty shapes");

  struct PairBound {
    double lb;
    int i, j;
  };
  std::vector<PairBound> pairs;
  pairs.reserve(s1.pieces.size() * s2.pieces.size());
  for (int i = 0; i < static_cast<int>(s1.pieces.size()); ++i) {
    const Vec3 c1 = t1.act(s1.pieces[i].centroid);
    for (int j = 0; j < static_cast<int>(s2.pieces.size()); ++j) {
      const Vec3 c2 = t2.act(s2.pieces[j].centroid);
      pairs.push_back({(c1 - c2).norm() - s1.pieces[i].boundingRadius - s2.pieces[j].boundingRadius, i, j});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const PairBound& a, const PairBound& b) {
    return std::tie(a.lb, a.i, a.j) < std::tie(b.lb, b.i, b.j);
  });

  WitnessResult best;
  bool have = false;
  bool allConverged = true;
  int calls = 0;
  for (const auto& pr : pairs) {
    // A piece pair's signed distance is bounded below by its sphere gap.
    if (!exhaustive && have && pr.lb > best.signedDistance) break;
    WitnessResult r = pieceWitness(s1.pieces[pr.i], t1, s2.pieces[pr.j], t2);
    ++calls;
    r.piece1 = pr.i;
    r.piece2 = pr.j;
    allConverged = allConverged && r.converged;
    if (!have || r.signedDistance < best.signedDistance ||
        (r.signedDistance == best.signedDistance && std::tie(r.piece1, r.piece2) < std::tie(best.piece1, best.piece2))) {
      best = r;
      have = true;
    }
  }
  best.converged = allConverged;
  if (stats) {
    stats->pairsTotal = static_cast<int>(pairs.size());
    stats->narrowPhaseCalls = calls;
  }
  return best;
}

}  // namespace dw::narrowphase
