#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "masklift/error.h"
#include "masklift/geometry.h"
#include "masklift/image.h"
#include "masklift/scene.h"

namespace masklift::testing {

// Two unit-ish spheres side by side along x.
inline Scene two_spheres() {
  return build_scene({Primitive{1, Sphere{Vec3(-0.6, 0, 0), 0.45}},
                      Primitive{2, Sphere{Vec3(0.6, 0, 0), 0.45}}});
}

inline Camera orbit_camera(double azimuth_deg, int size = 64, double radius = 3.0,
                           double height = 1.0) {
  OrbitParams p;
  p.radius = radius;
  p.height = height;
  p.start_azimuth_deg = azimuth_deg;
  const auto poses = generate_orbit(2, p);
  return Camera{poses[0], Intrinsics::from_fov(size, size, 60.0)};
}

inline LabelImage image_from(int w, int h, const std::vector<Label>& v) {
  LabelImage img(w, h, 0);
  img.data = v;
  return img;
}

// Code of the Error raised by f; records a failure when nothing is thrown.
inline ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kInvariantViolation;
}

// Fresh scratch directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("masklift_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace masklift::testing
