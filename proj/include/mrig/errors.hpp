#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrig {

// Base class for every error raised by the library. The CLI maps subclasses
// onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PointBehindCamera : public Error {
 public:
  PointBehindCamera() : Error("point lies behind the camera") {}
};

class DegenerateQuad : public Error {
 public:
  using Error::Error;
};

class NoValidPose : public Error {
 public:
  using Error::Error;
};

class EmptyCandidateSet : public Error {
 public:
  EmptyCandidateSet() : Error("candidate set is empty") {}
};

class NoDetectionsInFrame : public Error {
 public:
  explicit NoDetectionsInFrame(int t)
      : Error("no detections in frame " + std::to_string(t)), frame(t) {}
  int frame;
};

/// Raised when the co-observation graph does not connect every camera (or
/// every marker). `components` lists the vertex ids of each connected piece.
class DisconnectedGraph : public Error {
 public:
  DisconnectedGraph(std::string what, std::vector<std::vector<int>> comps)
      : Error(std::move(what)), components(std::move(comps)) {}
  std::vector<std::vector<int>> components;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

class DegenerateConfiguration : public Error {
 public:
  using Error::Error;
};

class FrameMismatch : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line_no, const std::string& msg)
      : Error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
  std::size_t line;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class MissingIntrinsics : public ValidationError {
 public:
  explicit MissingIntrinsics(int cam_id)
      : ValidationError("no intrinsics for camera " + std::to_string(cam_id)),
        cam(cam_id) {}
  int cam;
};

}  // namespace mrig
