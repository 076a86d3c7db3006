#include "mrig/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <Eigen/Geometry>
#include <json.hpp>

#include "mrig/errors.hpp"

namespace mrig {

using json = nlohmann::ordered_json;

void Dataset::validate() const {
  if (!(marker_side > 0.0) || !std::isfinite(marker_side)) {
    throw ValidationError("marker side must be positive");
  }
  for (const auto& [cam, intr] : intrinsics) {
    try {
      intr.validate();
    } catch (const std::invalid_argument& e) {
      throw ValidationError("camera " + std::to_string(cam) + ": " + e.what());
    }
  }
  std::set<std::tuple<int, int, int>> seen;
  for (const auto& d : detections) {
    if (!intrinsics.count(d.cam)) throw MissingIntrinsics(d.cam);
    if (d.t < 0 || d.t >= n_frames) {
      throw ValidationError("frame index " + std::to_string(d.t) + " outside [0, " +
                            std::to_string(n_frames) + ")");
    }
    if (!seen.emplace(d.t, d.cam, d.marker).second) {
      throw ValidationError("duplicate detection t=" + std::to_string(d.t) + " cam=" +
                            std::to_string(d.cam) + " marker=" + std::to_string(d.marker));
    }
  }
}

void Dataset::sort_detections() {
  std::stable_sort(detections.begin(), detections.end(), [](const auto& a, const auto& b) {
    return std::tie(a.t, a.cam, a.marker) < std::tie(b.t, b.cam, b.marker);
  });
}

std::set<int> Dataset::camera_ids() const {
  std::set<int> ids;
  for (const auto& d : detections) ids.insert(d.cam);
  return ids;
}

std::set<int> Dataset::marker_ids() const {
  std::set<int> ids;
  for (const auto& d : detections) ids.insert(d.marker);
  return ids;
}

namespace io {

namespace {

json vec_json(const auto& v) {
  json a = json::array();
  for (int i = 0; i < static_cast<int>(v.size()); ++i) a.push_back(v[i]);
  return a;
}

json transform_json(const RigidTransform& t) {
  const TwistParams p = to_twist(t);
  json j;
  j["rvec"] = vec_json(p.rvec);
  j["tvec"] = vec_json(p.tvec);
  const Mat4 m = t.matrix();
  json rows = json::array();
  for (int r = 0; r < 4; ++r) {
    json row = json::array();
    for (int c = 0; c < 4; ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  j["matrix"] = rows;
  return j;
}

Vec3 read_vec3(const json& j, const char* key) {
  const json& a = j.at(key);
  if (!a.is_array() || a.size() != 3) {
    throw ValidationError(std::string("'") + key + "' must be an array of 3 numbers");
  }
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

// The matrix is printed losslessly, so it wins over the twist when present.
RigidTransform read_transform(const json& j) {
  if (!j.contains("matrix")) return from_twist(TwistParams{read_vec3(j, "rvec"), read_vec3(j, "tvec")});
  const json& rows = j.at("matrix");
  if (!rows.is_array() || rows.size() != 4) throw ValidationError("'matrix' must be 4x4");
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    if (!rows[r].is_array() || rows[r].size() != 4) throw ValidationError("'matrix' must be 4x4");
    for (int c = 0; c < 4; ++c) m(r, c) = rows[r][c].get<double>();
  }
  RigidTransform t(m.block<3, 3>(0, 0), m.block<3, 1>(0, 3));
  if ((t.rotation.transpose() * t.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      t.rotation.determinant() < 0.0) {
    throw ValidationError("'matrix' rotation block is not a rotation");
  }
  return t;
}

json structure_json(const StructureEstimate& s) {
  json poses = json::object();
  for (const auto& [id, pose] : s.poses) poses[std::to_string(id)] = transform_json(pose);
  json tree = json::array();
  for (const auto& k : s.tree_edges) tree.push_back({k.a, k.b});
  return {{"reference", s.reference}, {"poses", poses}, {"tree", tree}};
}

StructureEstimate read_structure(const json& j, PairKind kind) {
  StructureEstimate s;
  s.reference = j.at("reference").get<int>();
  for (const auto& [key, val] : j.at("poses").items()) {
    s.poses[std::stoi(key)] = read_transform(val);
  }
  if (j.contains("tree")) {
    for (const auto& e : j.at("tree")) {
      s.tree_edges.push_back(PairKey::make(e.at(0).get<int>(), e.at(1).get<int>(), kind));
    }
  }
  return s;
}

std::string to_string(PoseSource s) {
  switch (s) {
    case PoseSource::Init: return "init";
    case PoseSource::Refined: return "refined";
    case PoseSource::Tracked: return "tracked";
  }
  return "init";
}

PoseSource pose_source_from_string(const std::string& s) {
  if (s == "init") return PoseSource::Init;
  if (s == "refined") return PoseSource::Refined;
  if (s == "tracked") return PoseSource::Tracked;
  throw ValidationError("unknown frame status '" + s + "'");
}

json trajectory_json(const Trajectory& traj) {
  json frames = json::array();
  for (const auto& [t, fp] : traj.frames) {
    json f;
    f["t"] = t;
    if (fp.pose) {
      f["status"] = to_string(fp.source);
      const json tj = transform_json(*fp.pose);
      for (const auto& [k, v] : tj.items()) f[k] = v;
    } else {
      f["status"] = "untracked";
    }
    frames.push_back(f);
  }
  return frames;
}

Trajectory read_trajectory(const json& frames) {
  Trajectory traj;
  for (const auto& f : frames) {
    FramePose fp;
    const std::string status = f.at("status").get<std::string>();
    if (status != "untracked") {
      fp.source = pose_source_from_string(status);
      fp.pose = read_transform(f);
    }
    traj.frames[f.at("t").get<int>()] = fp;
  }
  return traj;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed ") + what + ": " + e.what());
  }
}

// Wraps nlohmann type and key errors into ValidationError.
template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid ") + what + ": " + e.what());
  }
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Detection parse_detection(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line_no, "expected a JSON object");
  Detection d;
  auto get_int = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer()) {
      throw ParseError(line_no, std::string("missing or non-integer '") + key + "'");
    }
    return j[key].get<int>();
  };
  d.t = get_int("t");
  d.cam = get_int("cam");
  d.marker = get_int("marker");
  if (d.t < 0) throw ParseError(line_no, "negative frame index");
  if (!j.contains("corners") || !j["corners"].is_array() || j["corners"].size() != 4) {
    throw ParseError(line_no, "'corners' must hold 4 points");
  }
  for (std::size_t k = 0; k < 4; ++k) {
    const json& c = j["corners"][k];
    if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number()) {
      throw ParseError(line_no, "corner " + std::to_string(k) + " must be [x, y]");
    }
    d.corners[k] = Vec2(c[0].get<double>(), c[1].get<double>());
    if (!d.corners[k].allFinite()) throw ParseError(line_no, "non-finite corner");
  }
  return d;
}

std::string format_detection(const Detection& d) {
  json corners = json::array();
  for (const auto& c : d.corners) corners.push_back({c.x(), c.y()});
  json j{{"t", d.t}, {"cam", d.cam}, {"marker", d.marker}, {"corners", corners}};
  return j.dump();
}

std::vector<Detection> parse_detections(std::istream& in, std::vector<std::size_t>* line_numbers) {
  std::vector<Detection> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_detection(line, line_no));
    if (line_numbers != nullptr) line_numbers->push_back(line_no);
  }
  return out;
}

std::string format_detections(const std::vector<Detection>& dets) {
  std::string out;
  for (const auto& d : dets) {
    out += format_detection(d);
    out += '\n';
  }
  return out;
}

std::map<int, CameraIntrinsics> parse_intrinsics(const std::string& text) {
  const json j = parse_json(text, "intrinsics");
  return guarded("intrinsics", [&] {
    if (!j.is_object()) throw ValidationError("intrinsics must be a JSON object");
    std::map<int, CameraIntrinsics> out;
    for (const auto& [key, v] : j.items()) {
      int cam = 0;
      try {
        std::size_t used = 0;
        cam = std::stoi(key, &used);
        if (used != key.size()) throw std::invalid_argument(key);
      } catch (const std::exception&) {
        throw ValidationError("intrinsics key '" + key + "' is not a camera id");
      }
      CameraIntrinsics c;
      c.fx = v.at("fx").get<double>();
      c.fy = v.at("fy").get<double>();
      c.cx = v.at("cx").get<double>();
      c.cy = v.at("cy").get<double>();
      c.width = v.at("width").get<int>();
      c.height = v.at("height").get<int>();
      c.pre_undistorted = v.value("pre_undistorted", false);
      if (v.contains("dist")) {
        const json& dist = v.at("dist");
        if (!dist.is_array() || dist.size() != 5) {
          throw ValidationError("camera " + key + ": 'dist' must hold 5 coefficients");
        }
        for (std::size_t k = 0; k < 5; ++k) c.dist[k] = dist[k].get<double>();
      }
      if (c.pre_undistorted) c.dist.fill(0.0);
      try {
        c.validate();
      } catch (const std::invalid_argument& e) {
        throw ValidationError("camera " + key + ": " + e.what());
      }
      out[cam] = c;
    }
    return out;
  });
}

std::string format_intrinsics(const std::map<int, CameraIntrinsics>& intr) {
  json j = json::object();
  for (const auto& [cam, c] : intr) {
    j[std::to_string(cam)] = {{"fx", c.fx},         {"fy", c.fy},
                              {"cx", c.cx},         {"cy", c.cy},
                              {"dist", c.dist},     {"width", c.width},
                              {"height", c.height}, {"pre_undistorted", c.pre_undistorted}};
  }
  return dump(j);
}

Dataset load_dataset(const fs::path& detections, const fs::path& intrinsics,
                     double marker_side) {
  Dataset data;
  data.marker_side = marker_side;
  data.intrinsics = parse_intrinsics(read_file(intrinsics));

  std::ifstream in(detections);
  if (!in) throw ValidationError("cannot open " + detections.string());
  std::vector<std::size_t> lines;
  data.detections = parse_detections(in, &lines);

  std::map<std::tuple<int, int, int>, std::size_t> first_line;
  int max_t = -1;
  for (std::size_t i = 0; i < data.detections.size(); ++i) {
    const Detection& d = data.detections[i];
    const auto [it, inserted] = first_line.emplace(std::tuple{d.t, d.cam, d.marker}, lines[i]);
    if (!inserted) {
      throw ValidationError("duplicate detection (t=" + std::to_string(d.t) + ", cam=" +
                            std::to_string(d.cam) + ", marker=" + std::to_string(d.marker) +
                            ") on lines " + std::to_string(it->second) + " and " +
                            std::to_string(lines[i]));
    }
    max_t = std::max(max_t, d.t);
  }
  data.n_frames = max_t + 1;
  data.sort_detections();
  data.validate();
  return data;
}

void save_dataset(const Dataset& data, const fs::path& detections, const fs::path& intrinsics) {
  write_file_atomic(detections, format_detections(data.detections));
  write_file_atomic(intrinsics, format_intrinsics(data.intrinsics));
}

std::string format_calibration(const CalibrationResult& r) {
  json j;
  j["marker_side"] = r.marker_side;
  j["cameras"] = structure_json(r.cams);
  j["markers"] = structure_json(r.markers);
  j["frames"] = trajectory_json(r.traj);
  json frame_rms = json::object();
  for (const auto& [t, v] : r.report.frame_rms) frame_rms[std::to_string(t)] = v;
  j["report"] = {{"initial_rms", r.report.initial_rms},
                 {"final_rms", r.report.final_rms},
                 {"iterations", r.report.iterations},
                 {"termination", r.report.termination},
                 {"frame_rms", frame_rms}};
  return dump(j);
}

CalibrationResult parse_calibration(const std::string& text) {
  const json j = parse_json(text, "calibration");
  return guarded("calibration", [&] {
    CalibrationResult r;
    r.marker_side = j.at("marker_side").get<double>();
    r.cams = read_structure(j.at("cameras"), PairKind::Camera);
    r.markers = read_structure(j.at("markers"), PairKind::Marker);
    r.traj = read_trajectory(j.at("frames"));
    if (j.contains("report")) {
      const json& rep = j.at("report");
      r.report.initial_rms = rep.value("initial_rms", 0.0);
      r.report.final_rms = rep.value("final_rms", 0.0);
      r.report.iterations = rep.value("iterations", 0);
      r.report.termination = rep.value("termination", std::string());
      if (rep.contains("frame_rms")) {
        for (const auto& [k, v] : rep.at("frame_rms").items()) {
          if (v.is_number()) r.report.frame_rms[std::stoi(k)] = v.get<double>();
        }
      }
    }
    return r;
  });
}

std::string format_trajectory_csv(const Trajectory& traj) {
  std::ostringstream out;
  out.precision(17);
  out << "t,tx,ty,tz,qx,qy,qz,qw\n";
  for (const auto& [t, fp] : traj.frames) {
    if (!fp.pose) continue;
    Eigen::Quaterniond q(fp.pose->rotation);
    q.normalize();
    if (q.w() < 0) q.coeffs() *= -1.0;
    const Vec3& p = fp.pose->translation;
    out << t << ',' << p.x() << ',' << p.y() << ',' << p.z() << ',' << q.x() << ',' << q.y()
        << ',' << q.z() << ',' << q.w() << '\n';
  }
  return out.str();
}

std::string format_ground_truth(const GroundTruth& gt) {
  json j;
  j["marker_side"] = gt.marker_side;
  j["cameras"] = structure_json(gt.cams_gt);
  j["markers"] = structure_json(gt.markers_gt);
  j["frames"] = trajectory_json(gt.traj_gt);
  return dump(j);
}

GroundTruth parse_ground_truth(const std::string& text) {
  const json j = parse_json(text, "ground truth");
  return guarded("ground truth", [&] {
    GroundTruth gt;
    gt.marker_side = j.at("marker_side").get<double>();
    gt.cams_gt = read_structure(j.at("cameras"), PairKind::Camera);
    gt.markers_gt = read_structure(j.at("markers"), PairKind::Marker);
    gt.traj_gt = read_trajectory(j.at("frames"));
    return gt;
  });
}

SceneSpec parse_scene_spec(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidSpec(std::string("malformed scene spec: ") + e.what());
  }
  if (!j.is_object()) throw InvalidSpec("scene spec must be a JSON object");
  SceneSpec s;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "n_cameras") s.n_cameras = v.get<int>();
      else if (key == "circle_radius") s.circle_radius = v.get<double>();
      else if (key == "camera_height") s.camera_height = v.get<double>();
      else if (key == "object") s.object = object_kind_from_string(v.get<std::string>());
      else if (key == "object_size") s.object_size = v.get<double>();
      else if (key == "marker_side") s.marker_side = v.get<double>();
      else if (key == "n_frames") s.n_frames = v.get<int>();
      else if (key == "trajectory") s.trajectory = trajectory_profile_from_string(v.get<std::string>());
      else if (key == "noise_sigma") s.noise_sigma = v.get<double>();
      else if (key == "ambiguity_stress") s.ambiguity_stress = v.get<bool>();
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else if (key == "intrinsics") {
        auto m = parse_intrinsics(json{{"0", v}}.dump());
        s.intrinsics = m.at(0);
      } else if (key == "explicit_markers") {
        for (const auto& m : v) s.explicit_markers.push_back(read_transform(m));
      } else {
        throw InvalidSpec("unknown scene spec key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw InvalidSpec(std::string("invalid scene spec: ") + e.what());
  } catch (const ValidationError& e) {
    throw InvalidSpec(e.what());
  }
  s.validate();
  return s;
}

std::string format_scene_spec(const SceneSpec& s) {
  const CameraIntrinsics& c = s.intrinsics;
  json j;
  j["n_cameras"] = s.n_cameras;
  j["circle_radius"] = s.circle_radius;
  j["camera_height"] = s.camera_height;
  j["intrinsics"] = {{"fx", c.fx},         {"fy", c.fy},
                     {"cx", c.cx},         {"cy", c.cy},
                     {"dist", c.dist},     {"width", c.width},
                     {"height", c.height}, {"pre_undistorted", c.pre_undistorted}};
  j["object"] = to_string(s.object);
  j["object_size"] = s.object_size;
  if (!s.explicit_markers.empty()) {
    json m = json::array();
    for (const auto& t : s.explicit_markers) m.push_back(transform_json(t));
    j["explicit_markers"] = m;
  }
  j["marker_side"] = s.marker_side;
  j["n_frames"] = s.n_frames;
  j["trajectory"] = to_string(s.trajectory);
  j["noise_sigma"] = s.noise_sigma;
  j["ambiguity_stress"] = s.ambiguity_stress;
  j["seed"] = s.seed;
  return dump(j);
}

std::string format_error_report(const ErrorReport& e) {
  json j{{"frames", e.frames},
         {"obj_trans_err_mm", e.obj_trans_err},
         {"obj_rot_err_deg", e.obj_rot_err},
         {"cam_trans_err_mm", e.cam_trans_err},
         {"marker_config_err_mm", e.marker_config_err}};
  return dump(j);
}

}  // namespace io
}  // namespace mrig
