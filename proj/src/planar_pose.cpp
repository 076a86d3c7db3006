#include "mrig/planar_pose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "mrig/errors.hpp"

namespace mrig {

namespace {

double triangle_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 u = b - a, v = c - a;
  return 0.5 * std::abs(u.x() * v.y() - u.y() * v.x());
}

// Similarity transform taking points to zero centroid and mean distance sqrt(2).
Mat3 isotropic_normalization(const std::array<Vec2, 4>& pts) {
  Vec2 centroid = Vec2::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= 4.0;
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= 4.0;
  const double s = std::sqrt(2.0) / mean_dist;
  Mat3 t;
  t << s, 0.0, -s * centroid.x(),
       0.0, s, -s * centroid.y(),
       0.0, 0.0, 1.0;
  return t;
}

// Rotation taking the +z axis onto the direction of (p, q, 1).
Mat3 rotation_z_to(double p, double q) {
  const Vec3 a = Vec3(p, q, 1.0).normalized();
  const double c = a.z();
  const double d = 1.0 / (1.0 + c);
  Mat3 to_z;
  to_z << 1.0 - a.x() * a.x() * d, -a.x() * a.y() * d, -a.x(),
          -a.x() * a.y() * d, 1.0 - a.y() * a.y() * d, -a.y(),
          a.x(), a.y(), 1.0 - (a.x() * a.x() + a.y() * a.y()) * d;
  return to_z.transpose();
}

// The two rotations consistent with the homography's first-order behaviour at
// the marker centre.
std::array<Mat3, 2> ippe_rotations(const Mat3& h) {
  const double p = h(0, 2), q = h(1, 2);
  Eigen::Matrix2d jac;
  jac << h(0, 0) - h(2, 0) * p, h(0, 1) - h(2, 1) * p,
         h(1, 0) - h(2, 0) * q, h(1, 1) - h(2, 1) * q;

  const Mat3 rv = rotation_z_to(p, q);
  Eigen::Matrix2d b;
  b << rv(0, 0) - p * rv(2, 0), rv(0, 1) - p * rv(2, 1),
       rv(1, 0) - q * rv(2, 0), rv(1, 1) - q * rv(2, 1);
  const Eigen::Matrix2d a = b.inverse() * jac;

  const double ata00 = a(0, 0) * a(0, 0) + a(0, 1) * a(0, 1);
  const double ata01 = a(0, 0) * a(1, 0) + a(0, 1) * a(1, 1);
  const double ata11 = a(1, 0) * a(1, 0) + a(1, 1) * a(1, 1);
  const double gamma = std::sqrt(
      0.5 * (ata00 + ata11 + std::sqrt((ata00 - ata11) * (ata00 - ata11) + 4.0 * ata01 * ata01)));
  const Eigen::Matrix2d r = a / gamma;

  const double b0 = std::sqrt(std::max(0.0, 1.0 - r(0, 0) * r(0, 0) - r(1, 0) * r(1, 0)));
  double b1 = std::sqrt(std::max(0.0, 1.0 - r(0, 1) * r(0, 1) - r(1, 1) * r(1, 1)));
  if (-(r(0, 0) * r(0, 1) + r(1, 0) * r(1, 1)) < 0.0) b1 = -b1;

  std::array<Mat3, 2> out;
  for (int k = 0; k < 2; ++k) {
    const double sign = k == 0 ? 1.0 : -1.0;
    const Vec3 c0(r(0, 0), r(1, 0), sign * b0);
    const Vec3 c1(r(0, 1), r(1, 1), sign * b1);
    Mat3 m;
    m.col(0) = c0;
    m.col(1) = c1;
    m.col(2) = c0.cross(c1);
    out[k] = rv * m;
  }
  return out;
}

// Least-squares translation given the rotation, minimizing the algebraic
// projection error in normalized coordinates.
Vec3 recover_translation(const Mat3& rot, const std::array<Vec3, 4>& model,
                         const std::array<Vec2, 4>& image) {
  Eigen::Matrix<double, 8, 3> a;
  Eigen::Matrix<double, 8, 1> rhs;
  for (int i = 0; i < 4; ++i) {
    const Vec3 rp = rot * model[i];
    const double mx = image[i].x(), my = image[i].y();
    a.row(2 * i) << 1.0, 0.0, -mx;
    a.row(2 * i + 1) << 0.0, 1.0, -my;
    rhs(2 * i) = mx * rp.z() - rp.x();
    rhs(2 * i + 1) = my * rp.z() - rp.y();
  }
  return (a.transpose() * a).ldlt().solve(a.transpose() * rhs);
}

}  // namespace

void check_quad(const Detection& d) {
  const auto& c = d.corners;
  for (int i = 0; i < 4; ++i) {
    if (!c[i].allFinite()) throw DegenerateQuad("non-finite corner");
    for (int j = i + 1; j < 4; ++j) {
      if ((c[i] - c[j]).norm() < 1e-9) throw DegenerateQuad("duplicate corners");
    }
  }
  for (int skip = 0; skip < 4; ++skip) {
    std::array<Vec2, 3> tri;
    for (int i = 0, k = 0; i < 4; ++i) {
      if (i != skip) tri[k++] = c[i];
    }
    if (triangle_area(tri[0], tri[1], tri[2]) < 1e-3) {
      throw DegenerateQuad("three corners are collinear");
    }
  }
  double twice_area = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Vec2& p = c[i];
    const Vec2& q = c[(i + 1) % 4];
    twice_area += p.x() * q.y() - q.x() * p.y();
  }
  if (0.5 * std::abs(twice_area) <= 1.0) throw DegenerateQuad("quad area below 1 px^2");
}

double reprojection_rms(const RigidTransform& marker_to_cam, const Detection& d,
                        const CameraIntrinsics& intr, const MarkerTemplate& tmpl) {
  double sse = 0.0;
  for (std::size_t l = 0; l < 4; ++l) {
    Vec2 px;
    if (!project_with_jacobian(marker_to_cam * tmpl.corners[l], intr, px, nullptr)) {
      return std::numeric_limits<double>::infinity();
    }
    sse += (px - d.corners[l]).squaredNorm();
  }
  return std::sqrt(sse / 4.0);
}

Mat3 homography_dlt(const std::array<Vec2, 4>& plane, const std::array<Vec2, 4>& image) {
  const Mat3 tp = isotropic_normalization(plane);
  const Mat3 ti = isotropic_normalization(image);
  Eigen::Matrix<double, 8, 9> a;
  for (int i = 0; i < 4; ++i) {
    const Vec3 x = tp * plane[i].homogeneous();
    const Vec3 y = ti * image[i].homogeneous();
    a.row(2 * i) << 0.0, 0.0, 0.0, -x.x(), -x.y(), -1.0, y.y() * x.x(), y.y() * x.y(), y.y();
    a.row(2 * i + 1) << x.x(), x.y(), 1.0, 0.0, 0.0, 0.0, -y.x() * x.x(), -y.x() * x.y(), -y.x();
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(a, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Mat3 out = ti.inverse() * hn * tp;
  return out / out(2, 2);
}

double ambiguity_ratio(double err_best, double err_alt) {
  return std::max(1.0, err_alt / std::max(err_best, kMinErrorForRatio));
}

PoseHypothesis estimate_two_poses(const Detection& d, const CameraIntrinsics& intr,
                                  const MarkerTemplate& tmpl) {
  check_quad(d);

  std::array<Vec2, 4> plane, image;
  for (int i = 0; i < 4; ++i) {
    plane[i] = tmpl.corners[i].head<2>();
    image[i] = pixel_to_normalized(d.corners[i], intr);
  }
  const Mat3 h = homography_dlt(plane, image);
  if (!h.allFinite()) throw DegenerateQuad("homography is not finite");

  struct Solution {
    RigidTransform pose;
    double err;
  };
  std::vector<Solution> valid;
  for (const Mat3& rot : ippe_rotations(h)) {
    RigidTransform pose(rot, recover_translation(rot, tmpl.corners, image));
    if (!pose.rotation.allFinite() || !pose.translation.allFinite()) continue;
    if (!(pose.translation.z() > kMinDepth)) continue;
    const double err = reprojection_rms(pose, d, intr, tmpl);
    if (std::isfinite(err)) valid.push_back({pose, err});
  }
  if (valid.empty()) {
    throw NoValidPose("both pose solutions place the marker behind the camera");
  }

  PoseHypothesis out;
  if (valid.size() == 1) {
    out.best = out.alt = valid[0].pose;
    out.err_best = valid[0].err;
    out.err_alt = std::numeric_limits<double>::infinity();
    out.ratio = kUnambiguousRatio;
    return out;
  }
  if (valid[1].err < valid[0].err) std::swap(valid[0], valid[1]);
  out.best = valid[0].pose;
  out.alt = valid[1].pose;
  out.err_best = valid[0].err;
  out.err_alt = valid[1].err;
  out.ratio = ambiguity_ratio(out.err_best, out.err_alt);
  return out;
}

CandidateSet candidate_set(const std::optional<PoseHypothesis>& h, double tau_ratio) {
  if (tau_ratio < 1.0) throw std::invalid_argument("tau_ratio must be >= 1");
  CandidateSet set;
  if (!h) return set;
  set.ratio = h->ratio;
  set.transforms.push_back(h->best);
  if (h->ratio < tau_ratio) set.transforms.push_back(h->alt);
  return set;
}

}  // namespace mrig
