#include "mrig/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include <Eigen/SparseCholesky>

#include "mrig/errors.hpp"

namespace mrig {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat23 = Eigen::Matrix<double, 2, 3>;

TwistParams twist_at(const Eigen::VectorXd& x, int offset) {
  return {x.segment<3>(offset), x.segment<3>(offset + 3)};
}

void put_twist(Eigen::VectorXd& x, int offset, const RigidTransform& t) {
  const TwistParams p = to_twist(t);
  x.segment<3>(offset) = p.rvec;
  x.segment<3>(offset + 3) = p.tvec;
}

// Pose of one entity at the current parameter vector.
struct BlockPose {
  RigidTransform pose;
  Mat3 right_jacobian = Mat3::Identity();
  int offset = -1;
};

BlockPose resolve(const Eigen::VectorXd& x, const std::map<int, int>& offsets, int id,
                  const RigidTransform& fixed) {
  BlockPose b;
  auto it = offsets.find(id);
  if (it == offsets.end()) {
    b.pose = fixed;
    return b;
  }
  b.offset = it->second;
  const TwistParams p = twist_at(x, b.offset);
  b.pose = from_twist(p);
  b.right_jacobian = so3_right_jacobian(p.rvec);
  return b;
}

double sum_sq(const Eigen::VectorXd& f) { return f.squaredNorm(); }

double rms_of(double sse, Eigen::Index n_residuals) {
  if (n_residuals == 0) return 0.0;
  return std::sqrt(sse / (static_cast<double>(n_residuals) / 2.0));
}

double mean_abs(const Eigen::VectorXd& f) {
  return f.size() == 0 ? 0.0 : f.cwiseAbs().sum() / static_cast<double>(f.size());
}

}  // namespace

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::SmallImprovement: return "small_improvement";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::LambdaLimit: return "lambda_limit";
  }
  return "unknown";
}

void canonicalize_twists(Eigen::VectorXd& x) {
  for (Eigen::Index off = 0; off + 6 <= x.size(); off += 6) {
    Vec3 r = x.segment<3>(off);
    const double angle = r.norm();
    if (angle > std::numbers::pi) {
      x.segment<3>(off) = matrix_to_rodrigues(rodrigues_to_matrix(r));
    }
  }
}

LmResult lm_minimize(Eigen::VectorXd x0, const SystemBuilder& builder, const SolverOptions& opts,
                     const std::function<void(Eigen::VectorXd&)>& normalize) {
  LmResult out;
  Eigen::VectorXd x = std::move(x0);
  if (!x.allFinite()) throw NumericalFailure("initial parameters are not finite");

  ResidualSystem sys = builder(x, true);
  double cost = sum_sq(sys.residuals);
  if (!std::isfinite(cost)) throw NumericalFailure("initial cost is not finite");
  const Eigen::Index n_res = sys.residuals.size();

  LmReport& rep = out.report;
  rep.initial_rms = rms_of(cost, n_res);
  rep.cost_history.push_back(cost);
  double lambda = opts.lambda_init;

  auto finish = [&](Termination why) {
    rep.termination = why;
    rep.final_rms = rms_of(cost, n_res);
    out.params = x;
    return out;
  };

  if (x.size() == 0 || rep.initial_rms < kExactFitRms) return finish(Termination::Converged);

  Eigen::SparseMatrix<double> identity(x.size(), x.size());
  identity.setIdentity();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;

  while (rep.iterations < opts.max_iters) {
    const Eigen::SparseMatrix<double> jt = sys.jacobian.transpose();
    const Eigen::SparseMatrix<double> jtj = jt * sys.jacobian;
    const Eigen::VectorXd gradient = jt * sys.residuals;
    if (gradient.cwiseAbs().maxCoeff() == 0.0) return finish(Termination::Converged);

    ++rep.iterations;
    const Eigen::SparseMatrix<double> damped = jtj + lambda * identity;
    solver.compute(damped);
    Eigen::VectorXd step;
    bool solved = solver.info() == Eigen::Success;
    if (solved) {
      step = solver.solve(-gradient);
      solved = solver.info() == Eigen::Success && step.allFinite();
    }
    if (!solved) {
      lambda *= opts.lambda_up;
      if (lambda > opts.max_lambda) {
        throw NumericalFailure("normal equations singular up to the damping limit");
      }
      continue;
    }

    Eigen::VectorXd trial = x + step;
    if (normalize) normalize(trial);
    ResidualSystem trial_sys = builder(trial, false);
    const double trial_cost = sum_sq(trial_sys.residuals);

    if (std::isfinite(trial_cost) && trial_cost < cost) {
      const double improvement = mean_abs(sys.residuals) - mean_abs(trial_sys.residuals);
      x = std::move(trial);
      cost = trial_cost;
      ++rep.accepted;
      rep.cost_history.push_back(cost);
      lambda *= opts.lambda_down;
      if (rms_of(cost, n_res) < kExactFitRms) return finish(Termination::Converged);
      // A lower cost can still raise the mean absolute residual; that is not convergence.
      if (improvement >= 0.0 && improvement < opts.min_improve) {
        return finish(Termination::SmallImprovement);
      }
      sys = builder(x, true);
    } else {
      lambda *= opts.lambda_up;
      if (lambda > opts.max_lambda) return finish(Termination::LambdaLimit);
    }
  }
  return finish(Termination::MaxIterations);
}

ParamLayout ParamLayout::full(const StructureEstimate& cams, const StructureEstimate& markers,
                              const Trajectory& traj) {
  ParamLayout l;
  for (const auto& [id, pose] : cams.poses) {
    if (id == cams.reference) continue;
    l.camera_offset[id] = l.total;
    l.total += 6;
  }
  for (const auto& [id, pose] : markers.poses) {
    if (id == markers.reference) continue;
    l.marker_offset[id] = l.total;
    l.total += 6;
  }
  for (const auto& [t, fp] : traj.frames) {
    if (!fp.tracked()) continue;
    l.frame_offset[t] = l.total;
    l.total += 6;
  }
  return l;
}

ParamLayout ParamLayout::frame_only(int t) {
  ParamLayout l;
  l.frame_offset[t] = 0;
  l.total = 6;
  return l;
}

ReprojectionProblem::ReprojectionProblem(std::vector<Detection> detections,
                                         const std::map<int, CameraIntrinsics>& intrinsics,
                                         MarkerTemplate tmpl, ParamLayout layout,
                                         StructureEstimate cams, StructureEstimate markers,
                                         Trajectory traj)
    : intrinsics_(intrinsics),
      tmpl_(std::move(tmpl)),
      layout_(std::move(layout)),
      cams_(std::move(cams)),
      markers_(std::move(markers)),
      traj_(std::move(traj)) {
  for (auto& d : detections) {
    if (!cams_.poses.count(d.cam) || !markers_.poses.count(d.marker)) continue;
    if (!intrinsics_.count(d.cam)) throw MissingIntrinsics(d.cam);
    auto f = traj_.frames.find(d.t);
    const bool has_pose = f != traj_.frames.end() && f->second.tracked();
    if (!has_pose && !layout_.frame_offset.count(d.t)) continue;
    if (!has_pose) traj_.frames[d.t].pose = RigidTransform::identity();
    detections_.push_back(d);
  }
}

Eigen::VectorXd ReprojectionProblem::initial_params() const {
  Eigen::VectorXd x(layout_.total);
  for (const auto& [id, off] : layout_.camera_offset) put_twist(x, off, cams_.poses.at(id));
  for (const auto& [id, off] : layout_.marker_offset) put_twist(x, off, markers_.poses.at(id));
  for (const auto& [t, off] : layout_.frame_offset) {
    auto it = traj_.frames.find(t);
    const RigidTransform pose = it != traj_.frames.end() && it->second.pose
                                    ? *it->second.pose
                                    : RigidTransform::identity();
    put_twist(x, off, pose);
  }
  return x;
}

ResidualSystem ReprojectionProblem::build(const Eigen::VectorXd& x, bool with_jacobian,
                                          int threads) const {
  std::map<int, BlockPose> cam_blocks, marker_blocks, frame_blocks;
  for (const auto& [id, pose] : cams_.poses) {
    cam_blocks[id] = resolve(x, layout_.camera_offset, id, pose);
  }
  for (const auto& [id, pose] : markers_.poses) {
    marker_blocks[id] = resolve(x, layout_.marker_offset, id, pose);
  }
  for (const auto& [t, fp] : traj_.frames) {
    if (fp.pose) frame_blocks[t] = resolve(x, layout_.frame_offset, t, *fp.pose);
  }

  const std::size_t n = detections_.size();
  ResidualSystem sys;
  sys.residuals.resize(static_cast<Eigen::Index>(8 * n));

  using Triplet = Eigen::Triplet<double>;
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const std::size_t n_chunks = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
  std::vector<std::vector<Triplet>> triplets(n_chunks);
  std::vector<std::size_t> behind(n_chunks, 0);

  auto work = [&](std::size_t chunk) {
    const std::size_t begin = n * chunk / n_chunks;
    const std::size_t end = n * (chunk + 1) / n_chunks;
    auto& trip = triplets[chunk];
    if (with_jacobian) trip.reserve((end - begin) * 8 * 18);
    for (std::size_t i = begin; i < end; ++i) {
      const Detection& d = detections_[i];
      const CameraIntrinsics& intr = intrinsics_.at(d.cam);
      const BlockPose& cb = cam_blocks.at(d.cam);
      const BlockPose& mb = marker_blocks.at(d.marker);
      const BlockPose& fb = frame_blocks.at(d.t);
      const Mat3 rc_t = cb.pose.rotation.transpose();
      const Mat3& rg = fb.pose.rotation;
      const Mat3& rm = mb.pose.rotation;

      for (int l = 0; l < 4; ++l) {
        const int row = static_cast<int>(8 * i) + 2 * l;
        const Vec3& u = tmpl_.corners[l];
        const Vec3 q = mb.pose * u;
        const Vec3 w = fb.pose * q;
        const Vec3 p = rc_t * (w - cb.pose.translation);
        Vec2 px;
        Mat23 jp;
        if (!project_with_jacobian(p, intr, px, with_jacobian ? &jp : nullptr)) {
          sys.residuals.segment<2>(row).setConstant(kBehindCameraResidual);
          ++behind[chunk];
          continue;
        }
        sys.residuals.segment<2>(row) = px - d.corners[l];
        if (!with_jacobian) continue;

        auto emit = [&](int col0, const Mat23& block) {
          for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 3; ++c) trip.emplace_back(row + r, col0 + c, block(r, c));
          }
        };
        if (cb.offset >= 0) {
          emit(cb.offset, jp * skew(p) * cb.right_jacobian);
          emit(cb.offset + 3, -jp * rc_t);
        }
        const Mat23 jw = jp * rc_t;
        if (fb.offset >= 0) {
          emit(fb.offset, -jw * rg * skew(q) * fb.right_jacobian);
          emit(fb.offset + 3, jw);
        }
        if (mb.offset >= 0) {
          const Mat23 jq = jw * rg;
          emit(mb.offset, -jq * rm * skew(u) * mb.right_jacobian);
          emit(mb.offset + 3, jq);
        }
      }
    }
  };

  if (n_chunks == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_chunks);
    for (std::size_t c = 0; c < n_chunks; ++c) pool.emplace_back(work, c);
    for (auto& th : pool) th.join();
  }

  for (auto b : behind) sys.behind_camera += b;
  if (with_jacobian) {
    std::vector<Triplet> all;
    std::size_t total = 0;
    for (const auto& t : triplets) total += t.size();
    all.reserve(total);
    for (const auto& t : triplets) all.insert(all.end(), t.begin(), t.end());
    sys.jacobian.resize(sys.residuals.size(), layout_.total);
    sys.jacobian.setFromTriplets(all.begin(), all.end());
  }
  return sys;
}

void ReprojectionProblem::write_back(const Eigen::VectorXd& x, StructureEstimate& cams,
                                     StructureEstimate& markers, Trajectory& traj) const {
  for (const auto& [id, off] : layout_.camera_offset) cams.poses[id] = from_twist(twist_at(x, off));
  for (const auto& [id, off] : layout_.marker_offset) {
    markers.poses[id] = from_twist(twist_at(x, off));
  }
  for (const auto& [t, off] : layout_.frame_offset) {
    traj.frames[t].pose = from_twist(twist_at(x, off));
  }
}

std::map<int, double> ReprojectionProblem::frame_rms(const Eigen::VectorXd& residuals) const {
  std::map<int, std::pair<double, int>> acc;
  for (std::size_t i = 0; i < detections_.size(); ++i) {
    auto& [sse, corners] = acc[detections_[i].t];
    sse += residuals.segment<8>(static_cast<Eigen::Index>(8 * i)).squaredNorm();
    corners += 4;
  }
  std::map<int, double> out;
  for (const auto& [t, v] : acc) out[t] = std::sqrt(v.first / v.second);
  return out;
}

CostSummary global_cost(const StructureEstimate& cams, const StructureEstimate& markers,
                        const Trajectory& traj, std::span<const Detection> detections,
                        const std::map<int, CameraIntrinsics>& intrinsics,
                        const MarkerTemplate& tmpl) {
  CostSummary out;
  std::size_t corners = 0;
  for (const auto& d : detections) {
    auto c = cams.poses.find(d.cam);
    auto m = markers.poses.find(d.marker);
    auto f = traj.frames.find(d.t);
    if (c == cams.poses.end() || m == markers.poses.end() || f == traj.frames.end() ||
        !f->second.pose) {
      continue;
    }
    const RigidTransform cam_from_ref = c->second.inverse() * *f->second.pose;
    const CameraIntrinsics& intr = intrinsics.at(d.cam);
    for (std::size_t l = 0; l < 4; ++l) {
      Vec2 px;
      Vec2 r;
      if (project_with_jacobian(cam_from_ref * (m->second * tmpl.corners[l]), intr, px, nullptr)) {
        r = px - d.corners[l];
      } else {
        r.setConstant(kBehindCameraResidual);
        ++out.behind_camera;
      }
      out.sse += r.squaredNorm();
      ++corners;
    }
  }
  out.rms = corners == 0 ? 0.0 : std::sqrt(out.sse / static_cast<double>(corners));
  return out;
}

CalibrationResult refine_all(const CalibrationResult& init, const Dataset& data,
                             const SolverOptions& opts) {
  const ParamLayout layout = ParamLayout::full(init.cams, init.markers, init.traj);
  const ReprojectionProblem problem(data.detections, data.intrinsics,
                                    MarkerTemplate(data.marker_side), layout, init.cams,
                                    init.markers, init.traj);
  const SystemBuilder builder = [&](const Eigen::VectorXd& x, bool jac) {
    return problem.build(x, jac, opts.threads);
  };
  const LmResult lm = lm_minimize(problem.initial_params(), builder, opts, canonicalize_twists);

  CalibrationResult out = init;
  problem.write_back(lm.params, out.cams, out.markers, out.traj);
  out.cams.poses[out.cams.reference] = RigidTransform::identity();
  out.markers.poses[out.markers.reference] = RigidTransform::identity();
  for (auto& [t, fp] : out.traj.frames) {
    if (fp.tracked()) fp.source = PoseSource::Refined;
  }
  out.report.initial_rms = lm.report.initial_rms;
  out.report.final_rms = lm.report.final_rms;
  out.report.iterations = lm.report.iterations;
  out.report.termination = to_string(lm.report.termination);
  out.report.frame_rms = problem.frame_rms(builder(lm.params, false).residuals);
  return out;
}

TrackResult track_frame(std::span<const Detection> dets, const StructureEstimate& cams,
                        const StructureEstimate& markers,
                        const std::map<int, CameraIntrinsics>& intrinsics,
                        const MarkerTemplate& tmpl, const std::optional<RigidTransform>& warm,
                        const SolverOptions& opts) {
  TrackResult out;
  std::vector<Detection> usable;
  for (const auto& d : dets) {
    if (cams.poses.count(d.cam) && markers.poses.count(d.marker) && intrinsics.count(d.cam)) {
      usable.push_back(d);
    }
  }
  if (usable.empty()) return out;
  const int t = usable.front().t;

  std::optional<RigidTransform> start = warm;
  if (!start) {
    double best_ratio = -1.0;
    for (const auto& d : usable) {
      try {
        const PoseHypothesis h = estimate_two_poses(d, intrinsics.at(d.cam), tmpl);
        if (h.ratio > best_ratio) {
          best_ratio = h.ratio;
          start = cams.poses.at(d.cam) * h.best * markers.poses.at(d.marker).inverse();
        }
      } catch (const DegenerateQuad&) {
      } catch (const NoValidPose&) {
      }
    }
    if (!start) return out;
  }

  Trajectory traj;
  traj.frames[t].pose = *start;
  for (auto& d : usable) d.t = t;
  const ReprojectionProblem problem(std::move(usable), intrinsics, tmpl, ParamLayout::frame_only(t),
                                    cams, markers, std::move(traj));
  const SystemBuilder builder = [&](const Eigen::VectorXd& x, bool jac) {
    return problem.build(x, jac, 1);
  };
  const LmResult lm = lm_minimize(problem.initial_params(), builder, opts, canonicalize_twists);
  out.pose = from_twist(twist_at(lm.params, 0));
  out.rms = lm.report.final_rms;
  out.report = lm.report;
  return out;
}

}  // namespace mrig
