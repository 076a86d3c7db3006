#include "mrig/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/SVD>

#include "mrig/errors.hpp"

namespace mrig {

namespace {

constexpr double kOrthoTolerance = 1e-9;

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

}  // namespace

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  RigidTransform out(rotation * rhs.rotation, rotation * rhs.translation + translation);
  if (out.orthonormality_drift() > kOrthoTolerance) {
    out.rotation = nearest_rotation(out.rotation);
  }
  return out;
}

RigidTransform RigidTransform::inverse() const {
  Mat3 rt = rotation.transpose();
  return {rt, -(rt * translation)};
}

Mat4 RigidTransform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

double RigidTransform::orthonormality_drift() const {
  return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) { return a * b; }

RigidTransform invert(const RigidTransform& t) { return t.inverse(); }

double max_abs_diff(const RigidTransform& a, const RigidTransform& b) {
  return std::max((a.rotation - b.rotation).cwiseAbs().maxCoeff(),
                  (a.translation - b.translation).cwiseAbs().maxCoeff());
}

double rotation_angle_between(const RigidTransform& a, const RigidTransform& b) {
  return matrix_to_rodrigues(a.rotation.transpose() * b.rotation).norm();
}

Mat3 skew(const Vec3& v) {
  Mat3 k;
  k << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return k;
}

Mat3 rodrigues_to_matrix(const Vec3& rvec) {
  const double theta2 = rvec.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a, b;
  if (theta < 1e-7) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 k = skew(rvec);
  return Mat3::Identity() + a * k + b * k * k;
}

Vec3 matrix_to_rodrigues(const Mat3& r) {
  const Vec3 vee(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = 0.5 * vee.norm();
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(s, c);

  if (theta < 1e-6) {
    return 0.5 * (1.0 + theta * theta / 6.0) * vee;
  }
  if (c > 0.0) {
    return (theta / (2.0 * s)) * vee;
  }

  // Near pi the antisymmetric part vanishes; recover the axis from the
  // symmetric part (1 - cos) * k k^T and take the sign from vee.
  const Mat3 b = 0.5 * (r + r.transpose()) - c * Mat3::Identity();
  Eigen::Index i = 0;
  b.diagonal().maxCoeff(&i);
  Vec3 axis = b.col(i) / std::sqrt(std::max(b(i, i), 1e-300));
  axis.normalize();
  if (s > 1e-12) {
    if (axis.dot(vee) < 0.0) axis = -axis;
  } else {
    for (int k = 0; k < 3; ++k) {
      if (std::abs(axis[k]) > 1e-12) {
        if (axis[k] < 0.0) axis = -axis;
        break;
      }
    }
  }
  return theta * axis;
}

Mat3 so3_right_jacobian(const Vec3& rvec) {
  const double theta2 = rvec.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 k = skew(rvec);
  double a, b;
  if (theta < 1e-5) {
    a = 0.5 - theta2 / 24.0;
    b = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    a = (1.0 - std::cos(theta)) / theta2;
    b = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3::Identity() - a * k + b * k * k;
}

RigidTransform from_twist(const TwistParams& p) {
  return {rodrigues_to_matrix(p.rvec), p.tvec};
}

TwistParams to_twist(const RigidTransform& t) {
  return {matrix_to_rodrigues(t.rotation), t.translation};
}

bool CameraIntrinsics::has_distortion() const {
  return std::any_of(dist.begin(), dist.end(), [](double d) { return d != 0.0; });
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("image size must be positive");
  }
}

Vec2 distort_normalized(const Vec2& xy, const CameraIntrinsics& intr) {
  const auto& [k1, k2, p1, p2, k3] = intr.dist;
  const double x = xy.x(), y = xy.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
  return {x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x),
          y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y};
}

Eigen::Matrix2d distort_jacobian(const Vec2& xy, const CameraIntrinsics& intr) {
  const auto& [k1, k2, p1, p2, k3] = intr.dist;
  const double x = xy.x(), y = xy.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
  const double dradial_dr2 = k1 + r2 * (2.0 * k2 + 3.0 * k3 * r2);
  const double drx = dradial_dr2 * 2.0 * x;
  const double dry = dradial_dr2 * 2.0 * y;
  Eigen::Matrix2d j;
  j(0, 0) = radial + x * drx + 2.0 * p1 * y + 6.0 * p2 * x;
  j(0, 1) = x * dry + 2.0 * p1 * x + 2.0 * p2 * y;
  j(1, 0) = y * drx + 2.0 * p1 * x + 2.0 * p2 * y;
  j(1, 1) = radial + y * dry + 6.0 * p1 * y + 2.0 * p2 * x;
  return j;
}

Vec2 pixel_to_normalized(const Vec2& pixel, const CameraIntrinsics& intr) {
  const Vec2 target((pixel.x() - intr.cx) / intr.fx, (pixel.y() - intr.cy) / intr.fy);
  if (!intr.has_distortion()) return target;
  Vec2 xy = target;
  for (int it = 0; it < 50; ++it) {
    const Vec2 residual = distort_normalized(xy, intr) - target;
    const Vec2 step = distort_jacobian(xy, intr).partialPivLu().solve(residual);
    xy -= step;
    if (step.cwiseAbs().maxCoeff() < 1e-16) break;
  }
  return xy;
}

bool project_with_jacobian(const Vec3& p, const CameraIntrinsics& intr, Vec2& pixel,
                           Eigen::Matrix<double, 2, 3>* jac) {
  if (!(p.z() > kMinDepth)) return false;
  const double inv_z = 1.0 / p.z();
  const Vec2 xy(p.x() * inv_z, p.y() * inv_z);
  const bool distorted = intr.has_distortion();
  const Vec2 d = distorted ? distort_normalized(xy, intr) : xy;
  pixel = {intr.fx * d.x() + intr.cx, intr.fy * d.y() + intr.cy};
  if (jac != nullptr) {
    Eigen::Matrix<double, 2, 3> dxy;
    dxy << inv_z, 0.0, -xy.x() * inv_z,
           0.0, inv_z, -xy.y() * inv_z;
    Eigen::Matrix2d f = Eigen::Vector2d(intr.fx, intr.fy).asDiagonal();
    if (distorted) f = f * distort_jacobian(xy, intr);
    *jac = f * dxy;
  }
  return true;
}

Vec2 project(const Vec3& point_in_camera, const CameraIntrinsics& intr) {
  Vec2 px;
  if (!project_with_jacobian(point_in_camera, intr, px, nullptr)) throw PointBehindCamera();
  return px;
}

MarkerTemplate::MarkerTemplate(double side_length) : side(side_length) {
  if (!(side_length > 0.0)) throw std::invalid_argument("marker side must be positive");
  const double h = side_length / 2.0;
  corners = {Vec3(h, -h, 0.0), Vec3(h, h, 0.0), Vec3(-h, h, 0.0), Vec3(-h, -h, 0.0)};
}

Vec2 project_marker_corner(const RigidTransform& cam_from_ref,
                           const RigidTransform& ref_from_marker,
                           const MarkerTemplate& tmpl, std::size_t corner,
                           const CameraIntrinsics& intr) {
  if (corner >= tmpl.corners.size()) throw std::out_of_range("corner index out of range");
  return project(cam_from_ref * (ref_from_marker * tmpl.corners[corner]), intr);
}

}  // namespace mrig
