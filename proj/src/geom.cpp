#include "diffwitness/geom.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace dw::geom {

namespace {

std::vector<std::vector<int>> buildAdjacency(std::size_t nVerts, const std::vector<Triangle>& tris) {
  std::vector<std::vector<int>> adj(nVerts);
  for (const auto& t : tris) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k];
      const int b = t[(k + 1) % 3];
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
  }
  for (auto& nb : adj) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return adj;
}

double triArea(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

}  // namespace

// ---------------------------------------------------------------------------
// TriMesh

TriMesh::TriMesh(std::vector<Vec3> verts, std::vector<Triangle> tris)
    : vertices(std::move(verts)), triangles(std::move(tris)) {
  validate();
  rebuildAdjacency();
}

void TriMesh::rebuildAdjacency() { adjacency = buildAdjacency(vertices.size(), triangles); }

double TriMesh::triangleArea(std::size_t i) const {
  const auto& t = triangles[i];
  return triArea(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
}

double TriMesh::surfaceArea() const {
  double a = 0.0;
  for (std::size_t i = 0; i < triangles.size(); ++i) a += triangleArea(i);
  return a;
}

void TriMesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (const auto& v : vertices) {
    if (!v.allFinite()) throw GeometryError("mesh has non-finite vertex coordinates");
  }
  for (const auto& t : triangles) {
    for (int idx : t) {
      if (idx < 0 || idx >= n) throw GeometryError("triangle index out of range");
    }
  }
}

Aabb boundsOf(const std::vector<Vec3>& points) {
  Aabb b;
  for (const auto& p : points) b.extend(p);
  return b;
}

// ---------------------------------------------------------------------------
// ConvexPiece

TriMesh ConvexPiece::mesh() const { return TriMesh(vertices, faces); }

double ConvexPiece::volume() const {
  double v = 0.0;
  for (const auto& f : faces) {
    v += vertices[f[0]].dot(vertices[f[1]].cross(vertices[f[2]]));
  }
  return v / 6.0;
}

double ConvexPiece::planeDistance(const Vec3& x) const {
  double d = -std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < faces.size(); ++f) d = std::max(d, normals[f].dot(x) - offsets[f]);
  return d;
}

void ConvexPiece::applyScale(double s, const Vec3& shift) {
  for (auto& v : vertices) v = s * (v - shift);
  refresh();
}

void ConvexPiece::refresh() {
  normals.resize(faces.size());
  offsets.resize(faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Vec3& a = vertices[faces[f][0]];
    const Vec3 n = (vertices[faces[f][1]] - a).cross(vertices[faces[f][2]] - a).normalized();
    normals[f] = n;
    offsets[f] = n.dot(a);
  }
  centroid = Vec3::Zero();
  for (const auto& v : vertices) centroid += v;
  if (!vertices.empty()) centroid /= static_cast<double>(vertices.size());
  boundingRadius = 0.0;
  for (const auto& v : vertices) boundingRadius = std::max(boundingRadius, (v - centroid).norm());
  adjacency = buildAdjacency(vertices.size(), faces);
}

// ---------------------------------------------------------------------------
// Quickhull

namespace {

struct HullFace {
  std::array<int, 3> v;
  Vec3 n;
  double d;
  bool alive = true;
  std::vector<int> outside;
};

inline std::uint64_t edgeKey(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

class QuickHull {
 public:
  QuickHull(const std::vector<Vec3>& pts) : p_(pts) {}

  ConvexPiece run() {
    const std::size_t n = p_.size();
    if (n < 4) throw DegenerateHull("convex hull needs at least 4 points");
    for (const auto& q : p_) {
      if (!q.allFinite()) throw DegenerateHull("non-finite input point");
    }
    const double diag = boundsOf(p_).diagonal();
    if (!(diag > 0.0)) throw DegenerateHull("zero-extent point set");
    eps_ = 1e-9 * diag;

    seedSimplex();

    std::deque<int> queue;
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f) queue.push_back(f);
    while (!queue.empty()) {
      const int fi = queue.front();
      queue.pop_front();
      if (!faces_[fi].alive || faces_[fi].outside.empty()) continue;
      const int apex = farthestOutside(fi);
      for (int nf : addPoint(fi, apex)) queue.push_back(nf);
    }
    return collect();
  }

 private:
  double dist(const HullFace& f, int i) const { return f.n.dot(p_[i]) - f.d; }

  int makeFace(int a, int b, int c) {
    HullFace f;
    Vec3 n = (p_[b] - p_[a]).cross(p_[c] - p_[a]);
    if (n.dot(interior_ - p_[a]) > 0.0) {
      std::swap(b, c);
      n = -n;
    }
    f.v = {a, b, c};
    f.n = n.normalized();
    f.d = f.n.dot(p_[a]);
    faces_.push_back(std::move(f));
    const int id = static_cast<int>(faces_.size()) - 1;
    for (int k = 0; k < 3; ++k) edges_[edgeKey(faces_[id].v[k], faces_[id].v[(k + 1) % 3])] = id;
    return id;
  }

  void seedSimplex() {
    const int n = static_cast<int>(p_.size());
    int i0 = 0;
    for (int i = 1; i < n; ++i) {
      if (p_[i].x() < p_[i0].x()) i0 = i;
    }
    int i1 = -1;
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
      const double d = (p_[i] - p_[i0]).squaredNorm();
      if (d > best) best = d, i1 = i;
    }
    if (std::sqrt(best) <= eps_) throw DegenerateHull("all points coincide");

    const Vec3 axis = (p_[i1] - p_[i0]).normalized();
    int i2 = -1;
    best = -1.0;
    for (int i = 0; i < n; ++i) {
      const Vec3 r = p_[i] - p_[i0];
      const double d = (r - axis * axis.dot(r)).squaredNorm();
      if (d > best) best = d, i2 = i;
    }
    if (std::sqrt(best) <= eps_) throw DegenerateHull("points are collinear");

    const Vec3 pn = (p_[i1] - p_[i0]).cross(p_[i2] - p_[i0]).normalized();
    int i3 = -1;
    best = -1.0;
    for (int i = 0; i < n; ++i) {
      const double d = std::abs(pn.dot(p_[i] - p_[i0]));
      if (d > best) best = d, i3 = i;
    }
    if (best <= eps_) throw DegenerateHull("points are coplanar");

    interior_ = 0.25 * (p_[i0] + p_[i1] + p_[i2] + p_[i3]);
    makeFace(i0, i1, i2);
    makeFace(i0, i1, i3);
    makeFace(i0, i2, i3);
    makeFace(i1, i2, i3);

    std::vector<char> used(n, 0);
    used[i0] = used[i1] = used[i2] = used[i3] = 1;
    std::vector<int> rest;
    for (int i = 0; i < n; ++i) {
      if (!used[i]) rest.push_back(i);
    }
    assign(rest, {0, 1, 2, 3});
  }

  void assign(const std::vector<int>& pts, const std::vector<int>& faces) {
    for (int i : pts) {
      int bestFace = -1;
      double bestDist = eps_;
      for (int f : faces) {
        const double d = dist(faces_[f], i);
        if (d > bestDist) bestDist = d, bestFace = f;
      }
      if (bestFace >= 0) faces_[bestFace].outside.push_back(i);
    }
  }

  int farthestOutside(int fi) const {
    const auto& f = faces_[fi];
    int apex = f.outside.front();
    double best = dist(f, apex);
    for (int i : f.outside) {
      const double d = dist(f, i);
      if (d > best) best = d, apex = i;
    }
    return apex;
  }

  std::vector<int> addPoint(int seed, int apex) {
    // Flood the faces visible from the apex.
    std::vector<int> visible{seed};
    std::unordered_set<int> isVisible{seed};
    for (std::size_t k = 0; k < visible.size(); ++k) {
      const auto v = faces_[visible[k]].v;
      for (int e = 0; e < 3; ++e) {
        auto it = edges_.find(edgeKey(v[(e + 1) % 3], v[e]));
        if (it == edges_.end()) continue;
        const int g = it->second;
        if (isVisible.count(g) || !faces_[g].alive) continue;
        if (dist(faces_[g], apex) > eps_) {
          isVisible.insert(g);
          visible.push_back(g);
        }
      }
    }

    std::vector<std::pair<int, int>> horizon;
    std::vector<int> orphans;
    for (int f : visible) {
      const auto v = faces_[f].v;
      for (int e = 0; e < 3; ++e) {
        auto it = edges_.find(edgeKey(v[(e + 1) % 3], v[e]));
        if (it == edges_.end() || !isVisible.count(it->second)) horizon.emplace_back(v[e], v[(e + 1) % 3]);
      }
      for (int q : faces_[f].outside) {
        if (q != apex) orphans.push_back(q);
      }
    }
    for (int f : visible) {
      faces_[f].alive = false;
      faces_[f].outside.clear();
      const auto v = faces_[f].v;
      for (int e = 0; e < 3; ++e) {
        auto it = edges_.find(edgeKey(v[e], v[(e + 1) % 3]));
        if (it != edges_.end() && it->second == f) edges_.erase(it);
      }
    }

    std::vector<int> created;
    created.reserve(horizon.size());
    for (const auto& [a, b] : horizon) created.push_back(makeFace(a, b, apex));
    assign(orphans, created);
    return created;
  }

  ConvexPiece collect() const {
    std::vector<int> remap(p_.size(), -1);
    std::vector<int> usedIdx;
    for (const auto& f : faces_) {
      if (!f.alive) continue;
      for (int i : f.v) {
        if (remap[i] < 0) {
          remap[i] = 0;
          usedIdx.push_back(i);
        }
      }
    }
    std::sort(usedIdx.begin(), usedIdx.end());
    ConvexPiece piece;
    for (int i : usedIdx) {
      remap[i] = static_cast<int>(piece.vertices.size());
      piece.vertices.push_back(p_[i]);
    }
    for (const auto& f : faces_) {
      if (f.alive) piece.faces.push_back({remap[f.v[0]], remap[f.v[1]], remap[f.v[2]]});
    }
    piece.refresh();
    return piece;
  }

  const std::vector<Vec3>& p_;
  double eps_ = 0.0;
  Vec3 interior_ = Vec3::Zero();
  std::vector<HullFace> faces_;
  std::unordered_map<std::uint64_t, int> edges_;
};

}  // namespace

ConvexPiece convexHull(const std::vector<Vec3>& points) { return QuickHull(points).run(); }

ConvexPiece convexHull(const TriMesh& mesh) { return convexHull(mesh.vertices); }

// ---------------------------------------------------------------------------
// Composite shapes

Aabb CompositeShape::bounds() const {
  Aabb b = boundsOf(sourceMesh.vertices);
  for (const auto& p : pieces) {
    for (const auto& v : p.vertices) b.extend(v);
  }
  return b;
}

CompositeShape makeComposite(std::string name, std::vector<ConvexPiece> pieces, TriMesh source) {
  if (pieces.empty()) throw GeometryError("composite shape needs at least one piece");
  CompositeShape s;
  s.name = std::move(name);
  s.pieces = std::move(pieces);
  s.sourceMesh = std::move(source);
  s.diag = s.bounds().diagonal();
  return s;
}

CompositeShape makeConvexShape(std::string name, const TriMesh& mesh) {
  ConvexPiece hull = convexHull(mesh);
  TriMesh surface = hull.mesh();
  return makeComposite(std::move(name), {std::move(hull)}, std::move(surface));
}

CompositeShape normalizeScale(const CompositeShape& shape, double targetDiag) {
  if (!(targetDiag >= 0.01 && targetDiag <= 0.2)) {
    throw GeometryError("target diagonal must lie in [0.01, 0.2] m");
  }
  const Aabb box = shape.bounds();
  const double diag = box.diagonal();
  if (!(diag > 0.0) || !std::isfinite(diag)) throw GeometryError("cannot normalize a zero-extent shape");
  const double s = targetDiag / diag;
  const Vec3 c = box.center();

  CompositeShape out = shape;
  for (auto& v : out.sourceMesh.vertices) v = s * (v - c);
  for (auto& p : out.pieces) p.applyScale(s, c);
  out.diag = out.bounds().diagonal();
  return out;
}

int owningPiece(const CompositeShape& shape, const Vec3& x) {
  if (shape.pieces.size() == 1) return 0;
  int best = 0;
  double bestDist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < shape.pieces.size(); ++i) {
    const double d = std::abs(shape.pieces[i].planeDistance(x));
    if (d < bestDist) bestDist = d, best = static_cast<int>(i);
  }
  return best;
}

namespace {

SurfacePointBank sampleBank(const TriMesh& mesh, std::size_t nSamples, std::uint64_t seed,
                            const CompositeShape* shape) {
  SurfacePointBank bank;
  bank.points.reserve(mesh.vertices.size() + nSamples);
  for (const auto& v : mesh.vertices) {
    BankPoint bp;
    bp.position = v;
    bp.piece = shape ? owningPiece(*shape, v) : 0;
    bp.origin = PointOrigin::Vertex;
    bank.points.push_back(bp);
  }
  bank.vertexCount = mesh.vertices.size();
  if (nSamples == 0 || mesh.triangles.empty()) return bank;

  std::vector<double> areas(mesh.triangles.size());
  for (std::size_t i = 0; i < areas.size(); ++i) areas[i] = mesh.triangleArea(i);
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pickTri(areas.begin(), areas.end());
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (std::size_t k = 0; k < nSamples; ++k) {
    const int ti = pickTri(rng);
    const double r1 = std::sqrt(uni(rng));
    const double r2 = uni(rng);
    const auto& t = mesh.triangles[ti];
    BankPoint bp;
    bp.position = (1.0 - r1) * mesh.vertices[t[0]] + r1 * (1.0 - r2) * mesh.vertices[t[1]] +
                  r1 * r2 * mesh.vertices[t[2]];
    bp.piece = shape ? owningPiece(*shape, bp.position) : 0;
    bp.origin = PointOrigin::SurfaceSample;
    bp.triangle = ti;
    bank.points.push_back(bp);
  }
  return bank;
}

}  // namespace

SurfacePointBank sampleSurfaceBank(const CompositeShape& shape, std::size_t nSamples, std::uint64_t seed) {
  return sampleBank(shape.sourceMesh, nSamples, seed, &shape);
}

SurfacePointBank sampleSurfaceBank(const TriMesh& mesh, std::size_t nSamples, std::uint64_t seed) {
  return sampleBank(mesh, nSamples, seed, nullptr);
}

// ---------------------------------------------------------------------------
// OBJ

TriMesh parseObj(const std::string& text, std::vector<std::string>* warnings) {
  std::vector<Vec3> verts;
  struct FaceRec {
    std::size_t line;
    std::vector<long> idx;
  };
  std::vector<FaceRec> faces;

  std::istringstream in(text);
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw ObjParseError(lineNo, "vertex record needs three coordinates");
      Vec3 p(x, y, z);
      if (!p.allFinite()) throw ObjParseError(lineNo, "non-finite vertex coordinate");
      verts.push_back(p);
    } else if (tag == "f") {
      FaceRec rec{lineNo, {}};
      std::string tok;
      while (ls >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        std::size_t used = 0;
        long v = 0;
        try {
          v = std::stol(head, &used);
        } catch (const std::exception&) {
          throw ObjParseError(lineNo, "bad face index '" + tok + "'");
        }
        if (used != head.size() || v == 0) throw ObjParseError(lineNo, "bad face index '" + tok + "'");
        // Negative indices are relative to the vertices seen so far.
        rec.idx.push_back(v < 0 ? static_cast<long>(verts.size()) + v + 1 : v);
      }
      if (rec.idx.size() < 3) throw ObjParseError(lineNo, "face needs at least three vertices");
      faces.push_back(std::move(rec));
    }
  }

  const long n = static_cast<long>(verts.size());
  std::vector<Triangle> tris;
  for (const auto& f : faces) {
    for (long i : f.idx) {
      if (i < 1 || i > n) {
        throw ObjParseError(f.line, "face index " + std::to_string(i) + " out of range (" +
                                        std::to_string(n) + " vertices)");
      }
    }
    for (std::size_t k = 1; k + 1 < f.idx.size(); ++k) {
      const Triangle t{static_cast<int>(f.idx[0] - 1), static_cast<int>(f.idx[k] - 1),
                       static_cast<int>(f.idx[k + 1] - 1)};
      if (triArea(verts[t[0]], verts[t[1]], verts[t[2]]) < 1e-16) {
        if (warnings) warnings->push_back("line " + std::to_string(f.line) + ": degenerate triangle dropped");
        continue;
      }
      tris.push_back(t);
    }
  }
  return TriMesh(std::move(verts), std::move(tris));
}

TriMesh loadObj(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parseObj(ss.str(), warnings);
}

void writeObj(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

CompositeShape loadCompositeDir(const std::filesystem::path& dir, std::vector<std::string>* warnings) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> pieceFiles;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string fn = e.path().filename().string();
    if (fn.rfind("piece_", 0) == 0 && e.path().extension() == ".obj") pieceFiles.push_back(e.path());
  }
  std::sort(pieceFiles.begin(), pieceFiles.end());
  if (pieceFiles.empty()) throw IoError("no piece_*.obj files in " + dir.string());

  std::vector<ConvexPiece> pieces;
  for (const auto& f : pieceFiles) pieces.push_back(convexHull(loadObj(f, warnings)));

  TriMesh source;
  if (fs::exists(dir / "source.obj")) {
    source = loadObj(dir / "source.obj", warnings);
  } else {
    if (warnings) warnings->push_back("source.obj missing; using the union of piece surfaces");
    for (const auto& p : pieces) {
      const int off = static_cast<int>(source.vertices.size());
      source.vertices.insert(source.vertices.end(), p.vertices.begin(), p.vertices.end());
      for (const auto& t : p.faces) source.triangles.push_back({t[0] + off, t[1] + off, t[2] + off});
    }
    source.rebuildAdjacency();
  }
  std::string name = dir.filename().string();
  if (name.empty()) name = dir.parent_path().filename().string();
  return makeComposite(name, std::move(pieces), std::move(source));
}

Vec3 closestPointOnTriangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

// ---------------------------------------------------------------------------
// Bundled shapes

namespace shapes {

namespace {

// Appends quad a-b-c-d as two triangles facing `outward`.
void addQuad(std::vector<Triangle>& tris, const std::vector<Vec3>& v, int a, int b, int c, int d,
             const Vec3& outward) {
  const Vec3 n = (v[b] - v[a]).cross(v[c] - v[a]);
  if (n.dot(outward) < 0.0) std::swap(b, d);
  tris.push_back({a, b, c});
  tris.push_back({a, c, d});
}

}  // namespace

TriMesh boxMesh(const Vec3& lo, const Vec3& hi) {
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i) {
    v.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
  }
  std::vector<Triangle> t;
  addQuad(t, v, 0, 2, 6, 4, -Vec3::UnitX());
  addQuad(t, v, 1, 3, 7, 5, Vec3::UnitX());
  addQuad(t, v, 0, 1, 5, 4, -Vec3::UnitY());
  addQuad(t, v, 2, 3, 7, 6, Vec3::UnitY());
  addQuad(t, v, 0, 1, 3, 2, -Vec3::UnitZ());
  addQuad(t, v, 4, 5, 7, 6, Vec3::UnitZ());
  return TriMesh(std::move(v), std::move(t));
}

TriMesh cubeMesh(double halfExtent) { return boxMesh(Vec3::Constant(-halfExtent), Vec3::Constant(halfExtent)); }

TriMesh icosahedronMesh(double radius) {
  const double phi = 0.5 * (1.0 + std::sqrt(5.0));
  std::vector<Vec3> v = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                         {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                         {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& p : v) p = radius * p.normalized();
  return convexHull(v).mesh();
}

TriMesh icosphereMesh(int subdivisions, double radius) {
  TriMesh base = icosahedronMesh(1.0);
  std::vector<Vec3> v = base.vertices;
  std::vector<Triangle> tris = base.triangles;
  for (int s = 0; s < subdivisions; ++s) {
    std::unordered_map<std::uint64_t, int> mid;
    auto midpoint = [&](int a, int b) {
      const std::uint64_t key = edgeKey(std::min(a, b), std::max(a, b));
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((0.5 * (v[a] + v[b])).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(tris.size() * 4);
    for (const auto& t : tris) {
      const int ab = midpoint(t[0], t[1]);
      const int bc = midpoint(t[1], t[2]);
      const int ca = midpoint(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);
  }
  for (auto& p : v) p *= radius;
  return TriMesh(std::move(v), std::move(tris));
}

CompositeShape cube() { return makeConvexShape("cube", cubeMesh(0.5)); }
CompositeShape icosahedron() { return makeConvexShape("icosahedron", icosahedronMesh(1.0)); }
CompositeShape sphere162() { return makeConvexShape("sphere162", icosphereMesh(2, 1.0)); }
CompositeShape sphere642() { return makeConvexShape("sphere642", icosphereMesh(3, 1.0)); }

CompositeShape lShape() {
  // Two unit-height boxes forming an L in the xy-plane.
  std::vector<ConvexPiece> pieces;
  pieces.push_back(convexHull(boxMesh({0, 0, 0}, {2, 1, 1})));
  pieces.push_back(convexHull(boxMesh({0, 1, 0}, {1, 2, 1})));

  const std::vector<Eigen::Vector2d> outline = {{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
  std::vector<Vec3> v;
  for (double z : {0.0, 1.0}) {
    for (const auto& q : outline) v.emplace_back(q.x(), q.y(), z);
  }
  std::vector<Triangle> t;
  for (int k = 1; k + 1 < 6; ++k) {
    t.push_back({0, k + 1, k});  // bottom, facing -z
    t.push_back({6, 6 + k, 6 + k + 1});
  }
  for (int k = 0; k < 6; ++k) {
    const int a = k, b = (k + 1) % 6;
    const Eigen::Vector2d e = outline[b] - outline[a];
    addQuad(t, v, a, b, b + 6, a + 6, Vec3(e.y(), -e.x(), 0.0));
  }
  return makeComposite("lshape", std::move(pieces), TriMesh(std::move(v), std::move(t)));
}

CompositeShape ring8() {
  constexpr int kSegments = 8;
  const double rIn = 0.6, rOut = 1.0, h = 0.2;
  const double pi = std::acos(-1.0);
  auto corner = [&](int k, double r, double z) {
    const double th = 2.0 * pi * (k % kSegments) / kSegments;
    return Vec3(r * std::cos(th), r * std::sin(th), z);
  };

  std::vector<ConvexPiece> pieces;
  for (int k = 0; k < kSegments; ++k) {
    std::vector<Vec3> pts;
    for (int kk : {k, k + 1}) {
      for (double r : {rIn, rOut}) {
        for (double z : {-h, h}) pts.push_back(corner(kk, r, z));
      }
    }
    pieces.push_back(convexHull(pts));
  }

  // Vertex 4k + {0: in/bottom, 1: in/top, 2: out/bottom, 3: out/top}.
  std::vector<Vec3> v;
  for (int k = 0; k < kSegments; ++k) {
    v.push_back(corner(k, rIn, -h));
    v.push_back(corner(k, rIn, h));
    v.push_back(corner(k, rOut, -h));
    v.push_back(corner(k, rOut, h));
  }
  std::vector<Triangle> t;
  for (int k = 0; k < kSegments; ++k) {
    const int a = 4 * k, b = 4 * ((k + 1) % kSegments);
    const double th = 2.0 * pi * (k + 0.5) / kSegments;
    const Vec3 radial(std::cos(th), std::sin(th), 0.0);
    addQuad(t, v, a + 2, b + 2, b + 3, a + 3, radial);
    addQuad(t, v, a + 0, b + 0, b + 1, a + 1, -radial);
    addQuad(t, v, a + 1, b + 1, b + 3, a + 3, Vec3::UnitZ());
    addQuad(t, v, a + 0, b + 0, b + 2, a + 2, -Vec3::UnitZ());
  }
  return makeComposite("ring8", std::move(pieces), TriMesh(std::move(v), std::move(t)));
}

const std::vector<std::string>& bundledNames() {
  static const std::vector<std::string> names = {"cube", "icosahedron", "sphere162", "sphere642", "lshape", "ring8"};
  return names;
}

const std::vector<std::string>& convexNames() {
  static const std::vector<std::string> names = {"cube", "icosahedron", "sphere162", "sphere642"};
  return names;
}

const std::vector<std::string>& concaveNames() {
  static const std::vector<std::string> names = {"lshape", "ring8"};
  return names;
}

bool isBundled(const std::string& name) {
  const auto& n = bundledNames();
  return std::find(n.begin(), n.end(), name) != n.end();
}

CompositeShape bundled(const std::string& name) {
  if (name == "cube") return cube();
  if (name == "icosahedron") return icosahedron();
  if (name == "sphere162") return sphere162();
  if (name == "sphere642") return sphere642();
  if (name == "lshape") return lShape();
  if (name == "ring8") return ring8();
  throw GeometryError("unknown bundled shape '" + name + "'");
}

}  // namespace shapes

CompositeShape loadShape(const std::string& source, std::vector<std::string>* warnings) {
  namespace fs = std::filesystem;
  if (shapes::isBundled(source)) return shapes::bundled(source);
  const fs::path p(source);
  if (fs::is_directory(p)) return loadCompositeDir(p, warnings);
  if (fs::is_regular_file(p)) return makeConvexShape(p.stem().string(), loadObj(p, warnings));
  throw IoError("cannot open shape '" + source + "'");
}

}  // namespace dw::geom
