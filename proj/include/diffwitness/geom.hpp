#pragma once

// Mesh ingestion, convex hulls, composite shapes and surface point banks.

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffwitness/se3.hpp"

namespace dw::geom {

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ObjParseError : public GeometryError {
 public:
  ObjParseError(std::size_t line, const std::string& what)
      : GeometryError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DegenerateHull : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

// Missing or unreadable files.
class IoError : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

using Triangle = std::array<int, 3>;

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<std::vector<int>> adjacency;  // sorted vertex neighbours

  TriMesh() = default;
  TriMesh(std::vector<Vec3> verts, std::vector<Triangle> tris);

  void rebuildAdjacency();
  double triangleArea(std::size_t i) const;
  double surfaceArea() const;
  // Throws GeometryError when an index is out of range or a coordinate is not finite.
  void validate() const;
};

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  Vec3 center() const { return 0.5 * (lo + hi); }
  double diagonal() const { return (hi - lo).norm(); }
};

Aabb boundsOf(const std::vector<Vec3>& points);

struct ConvexPiece {
  std::vector<Vec3> vertices;
  std::vector<Triangle> faces;  // counter-clockwise seen from outside
  std::vector<Vec3> normals;    // unit outward normal per face
  std::vector<double> offsets;  // normals[f].dot(x) == offsets[f] on the face plane
  std::vector<std::vector<int>> adjacency;
  Vec3 centroid = Vec3::Zero();
  double boundingRadius = 0.0;

  TriMesh mesh() const;
  double volume() const;
  // max_f (n_f . x - d_f): negative inside, zero on the boundary.
  double planeDistance(const Vec3& x) const;
  void applyScale(double s, const Vec3& shift);  // x -> s * (x - shift)
  // Recomputes normals, offsets, adjacency, centroid and radius from vertices/faces.
  void refresh();
};

// Incremental quickhull; plane tolerance is 1e-9 times the input diagonal.
ConvexPiece convexHull(const TriMesh& mesh);
ConvexPiece convexHull(const std::vector<Vec3>& points);

struct CompositeShape {
  std::string name;
  std::vector<ConvexPiece> pieces;
  TriMesh sourceMesh;
  double diag = 0.0;

  Aabb bounds() const;
  std::size_t pieceCount() const { return pieces.size(); }
};

CompositeShape makeComposite(std::string name, std::vector<ConvexPiece> pieces, TriMesh source);
CompositeShape makeConvexShape(std::string name, const TriMesh& mesh);

// Uniform scale so the bounding-box diagonal equals target_diag; the box centre
// moves to the origin.
CompositeShape normalizeScale(const CompositeShape& shape, double targetDiag);

enum class PointOrigin : std::uint8_t { Vertex, SurfaceSample };

struct BankPoint {
  Vec3 position;
  int piece = 0;
  PointOrigin origin = PointOrigin::Vertex;
  int triangle = -1;  // source triangle for surface samples
};

struct SurfacePointBank {
  std::vector<BankPoint> points;
  std::size_t vertexCount = 0;  // first vertexCount entries are mesh vertices
};

// Index of the piece whose boundary is closest to x.
int owningPiece(const CompositeShape& shape, const Vec3& x);

// All source-mesh vertices plus n area-weighted uniform surface samples.
SurfacePointBank sampleSurfaceBank(const CompositeShape& shape, std::size_t nSamples, std::uint64_t seed);
SurfacePointBank sampleSurfaceBank(const TriMesh& mesh, std::size_t nSamples, std::uint64_t seed);

inline constexpr std::size_t kDefaultBankSamples = 512;

// Wavefront OBJ, v/f records only. Polygons are fan-triangulated; triangles
// below 1e-16 m^2 are dropped and reported through warnings.
TriMesh loadObj(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);
TriMesh parseObj(const std::string& text, std::vector<std::string>* warnings = nullptr);
void writeObj(const std::filesystem::path& path, const TriMesh& mesh);

// Directory with piece_000.obj ... and source.obj; each piece is hull-repaired.
CompositeShape loadCompositeDir(const std::filesystem::path& dir, std::vector<std::string>* warnings = nullptr);

Vec3 closestPointOnTriangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

namespace shapes {
TriMesh cubeMesh(double halfExtent = 0.5);
TriMesh boxMesh(const Vec3& lo, const Vec3& hi);
TriMesh icosahedronMesh(double radius = 1.0);
TriMesh icosphereMesh(int subdivisions, double radius = 1.0);

CompositeShape cube();
CompositeShape icosahedron();
CompositeShape sphere162();
CompositeShape sphere642();
CompositeShape lShape();
CompositeShape ring8();

const std::vector<std::string>& bundledNames();
const std::vector<std::string>& convexNames();
const std::vector<std::string>& concaveNames();
CompositeShape bundled(const std::string& name);
bool isBundled(const std::string& name);
}  // namespace shapes

// Bundled name, OBJ file (convex hull taken) or composite directory.
CompositeShape loadShape(const std::string& source, std::vector<std::string>* warnings = nullptr);

}  // namespace dw::geom
