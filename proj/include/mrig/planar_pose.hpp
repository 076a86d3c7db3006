#pragma once

#include <array>
#include <optional>
#include <vector>

#include "mrig/geometry.hpp"

namespace mrig {

/// One marker observed in one camera at one frame. Corners follow the
/// MarkerTemplate order, in pixels.
struct Detection {
  int t = 0;
  int cam = 0;
  int marker = 0;
  std::array<Vec2, 4> corners;
};

/// The two planar pose solutions of a square marker, marker -> camera.
struct PoseHypothesis {
  RigidTransform best;
  RigidTransform alt;
  double err_best = 0.0;  // RMS reprojection error, pixels
  double err_alt = 0.0;
  double ratio = 1.0;     // err_alt / err_best, >= 1
};

/// Possible marker -> camera transforms for one detection: empty, the best
/// solution only, or both solutions when the detection is ambiguous.
struct CandidateSet {
  std::vector<RigidTransform> transforms;
  std::optional<double> ratio;

  bool empty() const { return transforms.empty(); }
  std::size_t size() const { return transforms.size(); }
  bool ambiguous() const { return transforms.size() == 2; }
};

inline constexpr double kDefaultTauRatio = 2.0;
/// Ratio reported when only one of the two solutions lies in front of the
/// camera.
inline constexpr double kUnambiguousRatio = 1e12;
inline constexpr double kMinErrorForRatio = 1e-12;

/// Throws DegenerateQuad when corners coincide, three are collinear, or the
/// quad area is at most 1 px^2.
void check_quad(const Detection& d);

/// RMS reprojection error (pixels) of the template placed at `marker_to_cam`.
double reprojection_rms(const RigidTransform& marker_to_cam, const Detection& d,
                        const CameraIntrinsics& intr, const MarkerTemplate& tmpl);

/// DLT homography mapping template plane coordinates (x, y) onto `image`
/// (normalized camera coordinates), scaled so that H(2,2) = 1.
Mat3 homography_dlt(const std::array<Vec2, 4>& plane, const std::array<Vec2, 4>& image);

/// Two-fold planar pose from the four corners of a square marker: homography
/// in normalized coordinates, the infinitesimal-plane decomposition into the
/// two rotations, and linear translation recovery for each. Throws
/// DegenerateQuad or NoValidPose.
PoseHypothesis estimate_two_poses(const Detection& d, const CameraIntrinsics& intr,
                                  const MarkerTemplate& tmpl);

double ambiguity_ratio(double err_best, double err_alt);

CandidateSet candidate_set(const std::optional<PoseHypothesis>& h,
                           double tau_ratio = kDefaultTauRatio);

}  // namespace mrig
