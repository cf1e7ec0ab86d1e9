#include "masklift/geometry.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "masklift/error.h"

namespace masklift {

Pose Pose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.cross(Vec3::UnitY());
  right.normalize();
  const Vec3 down = forward.cross(right);
  Pose pose;
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = forward;
  pose.translation = eye;
  return pose;
}

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

Pose Pose::operator*(const Pose& rhs) const {
  Pose out;
  out.rotation = rotation * rhs.rotation;
  out.translation = rotation * rhs.translation + translation;
  return out;
}

Intrinsics Intrinsics::from_fov(int width, int height, double horizontal_fov_deg) {
  Intrinsics k;
  k.width = width;
  k.height = height;
  k.fx = 0.5 * width / std::tan(0.5 * horizontal_fov_deg * std::numbers::pi / 180.0);
  k.fy = k.fx;
  k.cx = 0.5 * (width - 1);
  k.cy = 0.5 * (height - 1);
  return k;
}

Intrinsics Intrinsics::downsampled(int factor) const {
  if (factor < 1) fail(ErrorCode::kBadParams, "downsample factor must be >= 1");
  const double f = factor;
  const double shift = 0.5 * (f - 1.0);
  Intrinsics k;
  k.fx = fx / f;
  k.fy = fy / f;
  k.cx = (cx - shift) / f;
  k.cy = (cy - shift) / f;
  k.width = width / factor;
  k.height = height / factor;
  return k;
}

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) fail(ErrorCode::kBadParams, "focal lengths must be positive");
  if (width < 1 || height < 1) fail(ErrorCode::kBadParams, "image size must be positive");
}

Projection project(const Vec3& point, const Pose& pose, const Intrinsics& k) {
  const Vec3 c = pose.rotation.transpose() * (point - pose.translation);
  if (c.z() <= 1e-9) fail(ErrorCode::kBehindCamera, "point is behind the camera");
  return {Vec2(k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy), c.z()};
}

Vec3 backproject(const Vec2& pixel, double depth, const Pose& pose, const Intrinsics& k) {
  if (!(depth > 0.0)) fail(ErrorCode::kNonPositiveDepth, "depth must be positive");
  const Vec3 c((pixel.x() - k.cx) / k.fx * depth, (pixel.y() - k.cy) / k.fy * depth, depth);
  return pose.apply(c);
}

Ray pixel_ray(const Vec2& pixel, const Pose& pose, const Intrinsics& k) {
  if (!(pixel.x() >= -0.5 && pixel.x() < k.width - 0.5 && pixel.y() >= -0.5 &&
        pixel.y() < k.height - 0.5)) {
    fail(ErrorCode::kOutOfBounds, "pixel outside the image");
  }
  const Vec3 c((pixel.x() - k.cx) / k.fx, (pixel.y() - k.cy) / k.fy, 1.0);
  return {pose.translation, (pose.rotation * c).normalized()};
}

std::vector<Camera> read_cameras(std::istream& in) {
  std::vector<Camera> cameras;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::vector<double> values;
    double v;
    while (ss >> v) values.push_back(v);
    if (!ss.eof()) {
      fail(ErrorCode::kParseError, "camera line " + std::to_string(line_no) + ": bad number");
    }
    if (values.empty()) continue;
    if (values.size() != 19) {
      fail(ErrorCode::kParseError, "camera line " + std::to_string(line_no) +
                                       ": expected 19 values, got " +
                                       std::to_string(values.size()));
    }
    Camera cam;
    cam.intrinsics.fx = values[1];
    cam.intrinsics.fy = values[2];
    cam.intrinsics.cx = values[3];
    cam.intrinsics.cy = values[4];
    cam.intrinsics.width = static_cast<int>(values[5]);
    cam.intrinsics.height = static_cast<int>(values[6]);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) cam.pose.rotation(r, c) = values[7 + 3 * r + c];
    cam.pose.translation = Vec3(values[16], values[17], values[18]);
    cam.intrinsics.validate();
    cameras.push_back(cam);
  }
  return cameras;
}

std::vector<Camera> read_cameras_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path);
  return read_cameras(in);
}

void write_cameras(std::ostream& out, const std::vector<Camera>& cameras) {
  out << std::setprecision(17);
  for (std::size_t id = 0; id < cameras.size(); ++id) {
    const auto& k = cameras[id].intrinsics;
    const auto& p = cameras[id].pose;
    out << id << ' ' << k.fx << ' ' << k.fy << ' ' << k.cx << ' ' << k.cy << ' ' << k.width
        << ' ' << k.height;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out << ' ' << p.rotation(r, c);
    out << ' ' << p.translation.x() << ' ' << p.translation.y() << ' ' << p.translation.z()
        << '\n';
  }
}

void write_cameras_file(const std::string& path, const std::vector<Camera>& cameras) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path);
  write_cameras(out, cameras);
  if (!out) fail(ErrorCode::kIoError, "write failed: " + path);
}

}  // namespace masklift
