#pragma once

// Rigid-body transforms on SE(3) and their tangent vectors.
//
// Twists are ordered (omega, v): angular part first. Perturbations are
// right-multiplied throughout, i.e. a pose T is moved to T * exp(xi).

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace dw {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat36 = Eigen::Matrix<double, 3, 6>;

namespace se3 {

struct Twist {
  Vec3 omega = Vec3::Zero();
  Vec3 v = Vec3::Zero();

  Twist() = default;
  Twist(const Vec3& w, const Vec3& lin) : omega(w), v(lin) {}

  static Twist fromVector(const Vec6& x) { return {x.head<3>(), x.tail<3>()}; }
  Vec6 vector() const {
    Vec6 x;
    x << omega, v;
    return x;
  }

  Twist operator+(const Twist& o) const { return {omega + o.omega, v + o.v}; }
  Twist operator-(const Twist& o) const { return {omega - o.omega, v - o.v}; }
  Twist operator-() const { return {-omega, -v}; }
  Twist operator*(double s) const { return {omega * s, v * s}; }

  bool isFinite() const { return omega.allFinite() && v.allFinite(); }
};

inline Twist operator*(double s, const Twist& x) { return x * s; }

class Pose {
 public:
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Pose() = default;
  Pose(const Mat3& rotation, const Vec3& translation) : R(rotation), t(translation) {}

  static Pose identity() { return {}; }
  static Pose translation(const Vec3& x) { return {Mat3::Identity(), x}; }
  static Pose rotation(const Mat3& r) { return {r, Vec3::Zero()}; }
  static Pose fromMatrix(const Mat4& m) {
    return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
  }

  Vec3 act(const Vec3& x) const { return R * x + t; }
  Vec3 rotate(const Vec3& x) const { return R * x; }

  Pose inverse() const {
    Mat3 rt = R.transpose();
    return {rt, -(rt * t)};
  }

  Pose operator*(const Pose& o) const { return {R * o.R, R * o.t + t}; }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = R;
    m.topRightCorner<3, 1>() = t;
    return m;
  }

  // Orthonormality residual ||R^T R - I||_F and determinant error.
  double orthonormalityError() const;
  bool isValid(double tol = 1e-9) const;
};

// 4x4 ambient gradient dL/dT; the bottom row is ignored.
struct AmbientGradient {
  Mat4 matrix = Mat4::Zero();
};

Mat3 hat(const Vec3& w);
Vec3 vee(const Mat3& s);
Mat4 hat(const Twist& xi);

Vec3 act(const Pose& pose, const Vec3& point);

// Closed-form exponential; Taylor expansion below |omega| = 1e-6.
Pose expMap(const Twist& xi);

// Ad_T(xi): omega' = R omega, v' = R v + t x (R omega).
Twist adjoint(const Pose& pose, const Twist& xi);

// Orthogonal (Frobenius) projection of T^-1 G onto se(3).
Twist projectToAlgebra(const Pose& pose, const AmbientGradient& grad);

// Twist on t2 whose update reproduces the relative pose of updating t1 with xi1.
Twist equivalentTransport(const Pose& t1, const Pose& t2, const Twist& xi1);

// Frobenius pairing <hat(a), hat(b)> = 2 a.omega.b.omega + a.v.b.v.
double frobeniusPairing(const Twist& a, const Twist& b);

// Converts a coordinate gradient (dL/d omega, dL/d v) under right perturbation
// into the projected algebra element; the two differ by the metric factor 2
// on the rotational block.
Twist algebraFromCoordinateGradient(const Vec6& g);
Vec6 coordinateGradientFromAlgebra(const Twist& xi);

// Haar-uniform rotation from a normalized 4D Gaussian quaternion.
template <class Rng, class Normal>
Mat3 randomRotation(Rng& rng, Normal& normal) {
  Eigen::Quaterniond q(normal(rng), normal(rng), normal(rng), normal(rng));
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace se3
}  // namespace dw
