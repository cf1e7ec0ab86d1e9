#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "masklift/geometry.h"
#include "masklift/image.h"

namespace masklift {

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  bool contains(const Vec3& p) const;
  Aabb padded(double margin) const;
  // Parametric entry/exit of the ray through the box, clipped to t >= 0.
  std::optional<std::pair<double, double>> intersect(const Ray& ray) const;

  bool operator==(const Aabb& o) const { return min == o.min && max == o.max; }
};

struct Sphere {
  Vec3 center;
  double radius = 0.0;
};

struct Box {
  Vec3 min;
  Vec3 max;
};

struct Primitive {
  Label id = 0;
  std::variant<Sphere, Box> shape;
};

struct Scene {
  std::vector<Primitive> primitives;
  Aabb bounds;
};

struct GroundTruthFrame {
  Camera camera;
  LabelImage instance_image;  // 0 = background
  DepthImage depth_image;     // camera-frame Z; +inf on background
};

// Validates ids (unique, > 0) and shapes, then computes bounds.
Scene build_scene(std::vector<Primitive> primitives);

// Nearest forward hit distance t > 1e-9 along the ray.
std::optional<double> intersect(const Ray& ray, const Primitive& primitive);
bool contains(const Primitive& primitive, const Vec3& point);

GroundTruthFrame ray_cast(const Scene& scene, const Camera& camera);

struct OrbitParams {
  Vec3 center = Vec3::Zero();
  double radius = 3.0;
  double height = 1.0;          // offset along world +Z from center
  double start_azimuth_deg = 0.0;
  double sweep_deg = 360.0;     // azimuth step is sweep / n_frames
};

struct LineParams {
  Vec3 start = Vec3::Zero();
  Vec3 end = Vec3::Zero();
  Vec3 target = Vec3::Zero();
};

std::vector<Pose> generate_orbit(int n_frames, const OrbitParams& params);
std::vector<Pose> generate_line(int n_frames, const LineParams& params);

// Voxel-center instance classification. Voxel (i, j, k) has center
// bounds.min + (idx + 0.5) * extent / resolution; x varies fastest.
struct VoxelLabels {
  Aabb bounds;
  std::array<int, 3> resolution{};
  std::vector<Label> labels;

  Label at(int i, int j, int k) const {
    return labels[(static_cast<std::size_t>(k) * resolution[1] + j) * resolution[0] + i];
  }
};

VoxelLabels voxel_instance_oracle(const Scene& scene, const Aabb& bounds,
                                  std::array<int, 3> resolution);

// Scene text: `sphere id cx cy cz r` / `box id x0 y0 z0 x1 y1 z1`, `#` comments.
Scene parse_scene(std::istream& in);
Scene read_scene_file(const std::string& path);
void write_scene(std::ostream& out, const Scene& scene);

// Random non-overlapping layout of `count` primitives inside a cube of side
// `extent` centered at the origin. Used for seeded regression scenes.
Scene random_scene(std::uint64_t seed, int count, double extent = 2.0);

}  // namespace masklift
