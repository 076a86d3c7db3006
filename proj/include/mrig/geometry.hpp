#pragma once

#include <array>
#include <cstddef>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace mrig {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Element of SE(3). Applying it to a point computes R * p + t.
///
/// Naming convention used throughout the library: a transform called
/// `a_from_b` maps coordinates expressed in frame b into frame a.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  RigidTransform() = default;
  RigidTransform(const Mat3& r, const Vec3& t) : rotation(r), translation(t) {}

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }

  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform operator*(const RigidTransform& rhs) const;

  RigidTransform inverse() const;
  Mat4 matrix() const;

  /// Largest entry of |R^T R - I|; zero for a perfectly orthonormal rotation.
  double orthonormality_drift() const;
};

/// Result applies `b` first, then `a`.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);

/// Largest absolute entry-wise difference of the two 3x4 matrices.
double max_abs_diff(const RigidTransform& a, const RigidTransform& b);

/// Geodesic angle (radians) between the rotations of a and b.
double rotation_angle_between(const RigidTransform& a, const RigidTransform& b);

/// Six-parameter form used by the optimizer: a Rodrigues rotation vector
/// (axis times angle, radians) and a translation.
struct TwistParams {
  Vec3 rvec = Vec3::Zero();
  Vec3 tvec = Vec3::Zero();
};

Mat3 rodrigues_to_matrix(const Vec3& rvec);

/// Inverse of rodrigues_to_matrix, returning the rotation vector with angle in
/// [0, pi]. At exactly pi the sign is fixed so the first nonzero component is
/// positive.
Vec3 matrix_to_rodrigues(const Mat3& r);

/// Right Jacobian of SO(3): R(rvec + d) ~= R(rvec) * Exp(Jr(rvec) * d).
Mat3 so3_right_jacobian(const Vec3& rvec);

Mat3 skew(const Vec3& v);

RigidTransform from_twist(const TwistParams& p);
TwistParams to_twist(const RigidTransform& t);

/// Pinhole camera with 5-coefficient Brown-Conrady distortion (k1, k2, p1, p2,
/// k3) applied to normalized coordinates.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  std::array<double, 5> dist{0.0, 0.0, 0.0, 0.0, 0.0};
  int width = 0;
  int height = 0;
  /// Detections for this camera are already undistorted; `dist` is forced to
  /// zero when this is set.
  bool pre_undistorted = false;

  bool has_distortion() const;
  /// Throws std::invalid_argument if focal lengths or image size are not
  /// positive.
  void validate() const;
};

/// Applies the distortion polynomial to normalized coordinates.
Vec2 distort_normalized(const Vec2& xy, const CameraIntrinsics& intr);

/// 2x2 Jacobian of distort_normalized with respect to its input.
Eigen::Matrix2d distort_jacobian(const Vec2& xy, const CameraIntrinsics& intr);

/// Inverts the distortion for a pixel, returning undistorted normalized
/// coordinates (x/z, y/z).
Vec2 pixel_to_normalized(const Vec2& pixel, const CameraIntrinsics& intr);

/// Projects a point given in camera coordinates. Throws PointBehindCamera when
/// z <= 1e-9.
Vec2 project(const Vec3& point_in_camera, const CameraIntrinsics& intr);

/// Non-throwing projection that also fills the 2x3 Jacobian with respect to
/// the camera-frame point. Returns false for points behind the camera.
bool project_with_jacobian(const Vec3& p, const CameraIntrinsics& intr, Vec2& pixel,
                           Eigen::Matrix<double, 2, 3>* jac);

inline constexpr double kMinDepth = 1e-9;

/// Square marker of side `side`. Corner order is fixed:
/// (s/2,-s/2,0), (s/2,s/2,0), (-s/2,s/2,0), (-s/2,-s/2,0).
struct MarkerTemplate {
  double side = 0.0;
  std::array<Vec3, 4> corners;

  explicit MarkerTemplate(double side_length);
};

/// Projects corner `corner` (0-based) of a marker. `cam_from_ref` maps the
/// reference-marker frame into the camera; `ref_from_marker` maps the marker
/// into the reference-marker frame.
Vec2 project_marker_corner(const RigidTransform& cam_from_ref,
                           const RigidTransform& ref_from_marker,
                           const MarkerTemplate& tmpl, std::size_t corner,
                           const CameraIntrinsics& intr);

}  // namespace mrig
