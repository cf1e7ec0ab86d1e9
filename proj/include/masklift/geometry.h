#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <iosfwd>
#include <string>
#include <vector>

namespace masklift {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Rigid transform mapping camera coordinates to world coordinates.
// Camera frame: +X right, +Y down, +Z forward.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  // Camera at `eye` looking at `target`; `up` is the world up direction.
  static Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;  // (this * rhs).apply(p) == apply(rhs.apply(p))
  const Vec3& center() const { return translation; }
};

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  // Pinhole with the principal point at the image center.
  static Intrinsics from_fov(int width, int height, double horizontal_fov_deg);
  // Intrinsics of the image obtained by keeping every factor-th pixel block;
  // coarse pixel centers map to the centers of the fine blocks.
  Intrinsics downsampled(int factor) const;
  void validate() const;
};

struct Camera {
  Pose pose;
  Intrinsics intrinsics;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
  Vec3 at(double t) const { return origin + t * direction; }
};

struct Projection {
  Vec2 pixel;  // (u, v) = (col, row)
  double depth = 0.0;
};

// Throws kBehindCamera when the camera-frame depth is <= 1e-9.
Projection project(const Vec3& point, const Pose& pose, const Intrinsics& k);
// Throws kNonPositiveDepth for depth <= 0.
Vec3 backproject(const Vec2& pixel, double depth, const Pose& pose, const Intrinsics& k);
// Ray through the pixel; throws kOutOfBounds outside [-0.5, w - 0.5) x [-0.5, h - 0.5).
Ray pixel_ray(const Vec2& pixel, const Pose& pose, const Intrinsics& k);

// Camera trajectory text: one camera per line,
// `id fx fy cx cy w h r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz`.
std::vector<Camera> read_cameras(std::istream& in);
std::vector<Camera> read_cameras_file(const std::string& path);
void write_cameras(std::ostream& out, const std::vector<Camera>& cameras);
void write_cameras_file(const std::string& path, const std::vector<Camera>& cameras);

}  // namespace masklift
