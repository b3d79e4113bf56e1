#include "diffwitness/se3.hpp"

#include <cmath>

namespace dw::se3 {

double Pose::orthonormalityError() const {
  return (R.transpose() * R - Mat3::Identity()).norm();
}

bool Pose::isValid(double tol) const {
  return R.allFinite() && t.allFinite() && orthonormalityError() <= tol &&
         std::abs(R.determinant() - 1.0) <= tol;
}

Mat3 hat(const Vec3& w) {
  Mat3 s;
  s << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return s;
}

Vec3 vee(const Mat3& s) { return {s(2, 1), s(0, 2), s(1, 0)}; }

Mat4 hat(const Twist& xi) {
  Mat4 m = Mat4::Zero();
  m.topLeftCorner<3, 3>() = hat(xi.omega);
  m.topRightCorner<3, 1>() = xi.v;
  return m;
}

Vec3 act(const Pose& pose, const Vec3& point) { return pose.act(point); }

Pose expMap(const Twist& xi) {
  const double theta2 = xi.omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 W = hat(xi.omega);
  const Mat3 W2 = W * W;

  // R = I + a W + b W^2 ; V = I + b W + c W^2
  double a, b, c;
  if (theta < 1e-6) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    const double s = std::sin(theta);
    const double co = std::cos(theta);
    a = s / theta;
    b = (1.0 - co) / theta2;
    c = (theta - s) / (theta2 * theta);
  }
  const Mat3 R = Mat3::Identity() + a * W + b * W2;
  const Mat3 V = Mat3::Identity() + b * W + c * W2;
  return {R, V * xi.v};
}

Twist adjoint(const Pose& pose, const Twist& xi) {
  const Vec3 w = pose.R * xi.omega;
  return {w, pose.R * xi.v + pose.t.cross(w)};
}

Twist projectToAlgebra(const Pose& pose, const AmbientGradient& grad) {
  Mat4 g = grad.matrix;
  g.row(3).setZero();
  const Mat4 m = pose.inverse().matrix() * g;
  const Mat3 a = m.topLeftCorner<3, 3>();
  return {vee(0.5 * (a - a.transpose())), m.topRightCorner<3, 1>()};
}

Twist equivalentTransport(const Pose& t1, const Pose& t2, const Twist& xi1) {
  return -adjoint(t2.inverse() * t1, xi1);
}

double frobeniusPairing(const Twist& a, const Twist& b) {
  return 2.0 * a.omega.dot(b.omega) + a.v.dot(b.v);
}

Twist algebraFromCoordinateGradient(const Vec6& g) {
  return {0.5 * g.head<3>(), g.tail<3>()};
}

Vec6 coordinateGradientFromAlgebra(const Twist& xi) {
  Vec6 g;
  g << 2.0 * xi.omega, xi.v;
  return g;
}

}  // namespace dw::se3
