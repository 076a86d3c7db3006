#include "mrig/evaluation.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "mrig/errors.hpp"

namespace mrig {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

bool is_degenerate(std::span<const Vec3> pts) {
  if (pts.size() < 3) return true;
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  double extent = 0.0;
  for (const auto& p : pts) {
    cov += (p - mean) * (p - mean).transpose();
    extent = std::max(extent, (p - mean).norm());
  }
  if (extent < 1e-12) return true;
  Eigen::JacobiSVD<Mat3> svd(cov);
  const Vec3 s = svd.singularValues();
  return s(1) <= 1e-12 * s(0);
}

}  // namespace

HornResult align_horn(std::span<const Vec3> est, std::span<const Vec3> gt, bool with_scale) {
  if (est.size() != gt.size()) throw DegenerateConfiguration("point sets differ in size");
  if (is_degenerate(est) || is_degenerate(gt)) {
    throw DegenerateConfiguration("need at least three non-collinear points");
  }
  const double n = static_cast<double>(est.size());
  Vec3 ce = Vec3::Zero(), cg = Vec3::Zero();
  for (std::size_t i = 0; i < est.size(); ++i) {
    ce += est[i];
    cg += gt[i];
  }
  ce /= n;
  cg /= n;

  Mat3 s = Mat3::Zero();
  double se = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const Vec3 a = est[i] - ce, b = gt[i] - cg;
    s += a * b.transpose();
    se += a.squaredNorm();
    sg += b.squaredNorm();
  }
  Eigen::Matrix4d nmat;
  nmat << s(0, 0) + s(1, 1) + s(2, 2), s(1, 2) - s(2, 1), s(2, 0) - s(0, 2), s(0, 1) - s(1, 0),
          s(1, 2) - s(2, 1), s(0, 0) - s(1, 1) - s(2, 2), s(0, 1) + s(1, 0), s(2, 0) + s(0, 2),
          s(2, 0) - s(0, 2), s(0, 1) + s(1, 0), -s(0, 0) + s(1, 1) - s(2, 2), s(1, 2) + s(2, 1),
          s(0, 1) - s(1, 0), s(2, 0) + s(0, 2), s(1, 2) + s(2, 1), -s(0, 0) - s(1, 1) + s(2, 2);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(nmat);
  const Eigen::Vector4d q = eig.eigenvectors().col(3);  // eigenvalues ascend
  const Eigen::Quaterniond quat(q(0), q(1), q(2), q(3));

  HornResult out;
  out.transform.rotation = quat.normalized().toRotationMatrix();
  out.scale = with_scale ? std::sqrt(sg / se) : 1.0;
  out.transform.translation = cg - out.scale * out.transform.rotation * ce;

  double sse = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const Vec3 mapped = out.scale * out.transform.rotation * est[i] + out.transform.translation;
    sse += (mapped - gt[i]).squaredNorm();
  }
  out.rms = std::sqrt(sse / n);
  return out;
}

HornResult align_horn_poses(std::span<const RigidTransform> est,
                            std::span<const RigidTransform> gt, double probe_scale,
                            bool with_scale) {
  if (est.size() != gt.size()) throw DegenerateConfiguration("pose sets differ in size");
  const std::array<Vec3, 4> probes = {Vec3::Zero(), Vec3(probe_scale, 0, 0),
                                      Vec3(0, probe_scale, 0), Vec3(0, 0, probe_scale)};
  std::vector<Vec3> pe, pg;
  pe.reserve(4 * est.size());
  pg.reserve(4 * est.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    for (const auto& v : probes) {
      pe.push_back(est[i] * v);
      pg.push_back(gt[i] * v);
    }
  }
  return align_horn(pe, pg, with_scale);
}

ErrorReport evaluate(const CalibrationResult& result, const GroundTruth& gt) {
  ErrorReport rep;

  // Object trajectory.
  std::vector<RigidTransform> est_traj, gt_traj;
  for (const auto& [t, fp] : result.traj.frames) {
    if (!fp.pose) continue;
    auto it = gt.traj_gt.frames.find(t);
    if (it == gt.traj_gt.frames.end() || !it->second.pose) {
      throw FrameMismatch("frame " + std::to_string(t) + " has no ground truth pose");
    }
    est_traj.push_back(*fp.pose);
    gt_traj.push_back(*it->second.pose);
  }
  rep.frames = est_traj.size();
  if (!est_traj.empty()) {
    const HornResult a = align_horn_poses(est_traj, gt_traj, result.marker_side);
    double trans = 0.0, rot = 0.0;
    for (std::size_t i = 0; i < est_traj.size(); ++i) {
      const RigidTransform aligned = a.transform * est_traj[i];
      trans += (aligned.translation - gt_traj[i].translation).norm();
      rot += rotation_angle_between(aligned, gt_traj[i]);
    }
    rep.obj_trans_err = 1000.0 * trans / static_cast<double>(est_traj.size());
    rep.obj_rot_err = kRadToDeg * rot / static_cast<double>(est_traj.size());
  }

  // Camera centres.
  std::vector<Vec3> est_cams, gt_cams;
  for (const auto& [id, pose] : result.cams.poses) {
    auto it = gt.cams_gt.poses.find(id);
    if (it == gt.cams_gt.poses.end()) {
      throw FrameMismatch("camera " + std::to_string(id) + " has no ground truth");
    }
    est_cams.push_back(pose.translation);
    gt_cams.push_back(it->second.translation);
  }
  if (!est_cams.empty()) {
    RigidTransform align;  // gauge-fixed estimate when too few cameras to align
    if (est_cams.size() >= 3) {
      try {
        align = align_horn(est_cams, gt_cams).transform;
      } catch (const DegenerateConfiguration&) {
      }
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < est_cams.size(); ++i) sum += (align * est_cams[i] - gt_cams[i]).norm();
    rep.cam_trans_err = 1000.0 * sum / static_cast<double>(est_cams.size());
  }

  // Marker configuration, compared through all marker corners at once.
  const MarkerTemplate tmpl(result.marker_side);
  std::vector<Vec3> est_corners, gt_corners;
  for (const auto& [id, pose] : result.markers.poses) {
    auto it = gt.markers_gt.poses.find(id);
    if (it == gt.markers_gt.poses.end()) {
      throw FrameMismatch("marker " + std::to_string(id) + " has no ground truth");
    }
    for (const auto& u : tmpl.corners) {
      est_corners.push_back(pose * u);
      gt_corners.push_back(it->second * u);
    }
  }
  if (!est_corners.empty()) {
    const HornResult a = align_horn(est_corners, gt_corners);
    double sum = 0.0;
    for (std::size_t i = 0; i < est_corners.size(); ++i) {
      sum += (a.transform * est_corners[i] - gt_corners[i]).norm();
    }
    rep.marker_config_err = 1000.0 * sum / static_cast<double>(est_corners.size());
  }
  return rep;
}

}  // namespace mrig
