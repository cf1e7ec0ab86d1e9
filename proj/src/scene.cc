#include "masklift/scene.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "masklift/error.h"
#include "masklift/parallel.h"
#include "masklift/rng.h"

namespace masklift {
namespace {

constexpr double kMinHit = 1e-9;

Aabb primitive_bounds(const Primitive& p) {
  if (const auto* s = std::get_if<Sphere>(&p.shape)) {
    const Vec3 r = Vec3::Constant(s->radius);
    return {s->center - r, s->center + r};
  }
  const auto& b = std::get<Box>(p.shape);
  return {b.min, b.max};
}

// Bounding radius used only for random layouts.
double bounding_radius(const Primitive& p) {
  if (const auto* s = std::get_if<Sphere>(&p.shape)) return s->radius;
  const auto& b = std::get<Box>(p.shape);
  return 0.5 * (b.max - b.min).norm();
}

}  // namespace

bool Aabb::contains(const Vec3& p) const {
  return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

Aabb Aabb::padded(double margin) const {
  const Vec3 m = Vec3::Constant(margin);
  return {min - m, max + m};
}

std::optional<std::pair<double, double>> Aabb::intersect(const Ray& ray) const {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double o = ray.origin[a];
    const double d = ray.direction[a];
    if (std::abs(d) < 1e-15) {
      if (o < min[a] || o > max[a]) return std::nullopt;
      continue;
    }
    double ta = (min[a] - o) / d;
    double tb = (max[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return std::make_pair(t0, t1);
}

Scene build_scene(std::vector<Primitive> primitives) {
  std::set<Label> ids;
  for (const auto& p : primitives) {
    if (p.id == 0) fail(ErrorCode::kBadParams, "instance id 0 is reserved for background");
    if (!ids.insert(p.id).second) {
      fail(ErrorCode::kDuplicateId, "duplicate instance id " + std::to_string(p.id));
    }
    if (const auto* s = std::get_if<Sphere>(&p.shape)) {
      if (!(s->radius > 0.0) || !s->center.allFinite()) {
        fail(ErrorCode::kDegeneratePrimitive, "sphere " + std::to_string(p.id));
      }
    } else {
      const auto& b = std::get<Box>(p.shape);
      if (!((b.min.array() < b.max.array()).all()) || !b.min.allFinite() ||
          !b.max.allFinite()) {
        fail(ErrorCode::kDegeneratePrimitive, "box " + std::to_string(p.id));
      }
    }
  }
  Scene scene;
  scene.primitives = std::move(primitives);
  if (!scene.primitives.empty()) {
    scene.bounds = primitive_bounds(scene.primitives.front());
    for (const auto& p : scene.primitives) {
      const Aabb b = primitive_bounds(p);
      scene.bounds.min = scene.bounds.min.cwiseMin(b.min);
      scene.bounds.max = scene.bounds.max.cwiseMax(b.max);
    }
  }
  return scene;
}

std::optional<double> intersect(const Ray& ray, const Primitive& primitive) {
  if (const auto* s = std::get_if<Sphere>(&primitive.shape)) {
    const Vec3 oc = ray.origin - s->center;
    const double b = oc.dot(ray.direction);
    const double c = oc.squaredNorm() - s->radius * s->radius;
    const double disc = b * b - c;
    if (disc < 0.0) return std::nullopt;
    const double root = std::sqrt(disc);
    if (const double t = -b - root; t > kMinHit) return t;
    if (const double t = -b + root; t > kMinHit) return t;
    return std::nullopt;
  }
  const auto& box = std::get<Box>(primitive.shape);
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double o = ray.origin[a];
    const double d = ray.direction[a];
    if (std::abs(d) < 1e-15) {
      if (o < box.min[a] || o > box.max[a]) return std::nullopt;
      continue;
    }
    double ta = (box.min[a] - o) / d;
    double tb = (box.max[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1) return std::nullopt;
  if (t0 > kMinHit) return t0;
  if (t1 > kMinHit) return t1;
  return std::nullopt;
}

bool contains(const Primitive& primitive, const Vec3& point) {
  if (const auto* s = std::get_if<Sphere>(&primitive.shape)) {
    return (point - s->center).squaredNorm() <= s->radius * s->radius;
  }
  const auto& b = std::get<Box>(primitive.shape);
  return (point.array() >= b.min.array()).all() && (point.array() <= b.max.array()).all();
}

GroundTruthFrame ray_cast(const Scene& scene, const Camera& camera) {
  const auto& k = camera.intrinsics;
  GroundTruthFrame frame;
  frame.camera = camera;
  frame.instance_image = LabelImage(k.width, k.height, 0);
  frame.depth_image = DepthImage(k.width, k.height, kNoDepth);
  const Vec3 forward = camera.pose.rotation.col(2);
  parallel_for(static_cast<std::size_t>(k.height), [&](std::size_t row) {
    for (int col = 0; col < k.width; ++col) {
      const Ray ray = pixel_ray(Vec2(col, static_cast<double>(row)), camera.pose, k);
      double best_t = std::numeric_limits<double>::infinity();
      Label best_id = 0;
      for (const auto& p : scene.primitives) {
        const auto t = intersect(ray, p);
        if (!t) continue;
        if (*t < best_t || (*t == best_t && p.id < best_id)) {
          best_t = *t;
          best_id = p.id;
        }
      }
      if (best_id != 0) {
        frame.instance_image.at(static_cast<int>(row), col) = best_id;
        frame.depth_image.at(static_cast<int>(row), col) =
            static_cast<float>(best_t * ray.direction.dot(forward));
      }
    }
  });
  return frame;
}

std::vector<Pose> generate_orbit(int n_frames, const OrbitParams& params) {
  if (n_frames < 2) fail(ErrorCode::kBadParams, "trajectory needs at least 2 frames");
  if (!(params.radius > 0.0)) fail(ErrorCode::kBadParams, "orbit radius must be positive");
  std::vector<Pose> poses;
  poses.reserve(n_frames);
  const double step = params.sweep_deg / n_frames;
  for (int f = 0; f < n_frames; ++f) {
    const double az = (params.start_azimuth_deg + step * f) * std::numbers::pi / 180.0;
    const Vec3 eye = params.center + Vec3(params.radius * std::cos(az),
                                          params.radius * std::sin(az), params.height);
    poses.push_back(Pose::look_at(eye, params.center));
  }
  return poses;
}

std::vector<Pose> generate_line(int n_frames, const LineParams& params) {
  if (n_frames < 2) fail(ErrorCode::kBadParams, "trajectory needs at least 2 frames");
  std::vector<Pose> poses;
  poses.reserve(n_frames);
  for (int f = 0; f < n_frames; ++f) {
    const double s = static_cast<double>(f) / (n_frames - 1);
    const Vec3 eye = (1.0 - s) * params.start + s * params.end;
    if ((params.target - eye).norm() < 1e-9) {
      fail(ErrorCode::kBadParams, "line trajectory passes through its look-at target");
    }
    poses.push_back(Pose::look_at(eye, params.target));
  }
  return poses;
}

VoxelLabels voxel_instance_oracle(const Scene& scene, const Aabb& bounds,
                                  std::array<int, 3> resolution) {
  for (int r : resolution) {
    if (r < 2) fail(ErrorCode::kBadParams, "voxel resolution must be >= 2 per axis");
  }
  VoxelLabels out;
  out.bounds = bounds;
  out.resolution = resolution;
  out.labels.assign(static_cast<std::size_t>(resolution[0]) * resolution[1] * resolution[2], 0);
  const Vec3 cell = bounds.extent().cwiseQuotient(
      Vec3(resolution[0], resolution[1], resolution[2]));
  parallel_for(static_cast<std::size_t>(resolution[2]), [&](std::size_t kz) {
    for (int j = 0; j < resolution[1]; ++j) {
      for (int i = 0; i < resolution[0]; ++i) {
        const Vec3 p = bounds.min + cell.cwiseProduct(Vec3(i + 0.5, j + 0.5, kz + 0.5));
        Label best = 0;
        for (const auto& prim : scene.primitives) {
          if ((best == 0 || prim.id < best) && contains(prim, p)) best = prim.id;
        }
        out.labels[(kz * resolution[1] + j) * resolution[0] + i] = best;
      }
    }
  });
  return out;
}

Scene parse_scene(std::istream& in) {
  std::vector<Primitive> prims;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string kind;
    if (!(ss >> kind)) continue;
    const std::string where = "scene line " + std::to_string(line_no);
    std::vector<double> v;
    double x;
    while (ss >> x) v.push_back(x);
    if (!ss.eof()) fail(ErrorCode::kParseError, where + ": bad number");
    Primitive p;
    if (kind == "sphere" && v.size() == 5) {
      p.shape = Sphere{Vec3(v[1], v[2], v[3]), v[4]};
    } else if (kind == "box" && v.size() == 7) {
      p.shape = Box{Vec3(v[1], v[2], v[3]), Vec3(v[4], v[5], v[6])};
    } else {
      fail(ErrorCode::kParseError, where + ": expected `sphere id cx cy cz r` or "
                                           "`box id x0 y0 z0 x1 y1 z1`");
    }
    if (v[0] < 1 || v[0] != std::floor(v[0]) || v[0] > 65535) {
      fail(ErrorCode::kParseError, where + ": id must be an integer in [1, 65535]");
    }
    p.id = static_cast<Label>(v[0]);
    prims.push_back(std::move(p));
  }
  return build_scene(std::move(prims));
}

Scene read_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path);
  return parse_scene(in);
}

void write_scene(std::ostream& out, const Scene& scene) {
  out << std::setprecision(17);
  for (const auto& p : scene.primitives) {
    if (const auto* s = std::get_if<Sphere>(&p.shape)) {
      out << "sphere " << p.id << ' ' << s->center.x() << ' ' << s->center.y() << ' '
          << s->center.z() << ' ' << s->radius << '\n';
    } else {
      const auto& b = std::get<Box>(p.shape);
      out << "box " << p.id << ' ' << b.min.x() << ' ' << b.min.y() << ' ' << b.min.z() << ' '
          << b.max.x() << ' ' << b.max.y() << ' ' << b.max.z() << '\n';
    }
  }
}

Scene random_scene(std::uint64_t seed, int count, double extent) {
  if (count < 0) fail(ErrorCode::kBadParams, "negative primitive count");
  CounterRng rng({seed, static_cast<std::uint64_t>(Stream::kSceneGen)});
  const double half = 0.5 * extent;
  std::vector<Primitive> prims;
  for (int attempt = 0; static_cast<int>(prims.size()) < count; ++attempt) {
    if (attempt > 10000) fail(ErrorCode::kBadParams, "cannot place primitives without overlap");
    Primitive p;
    p.id = static_cast<Label>(prims.size() + 1);
    const double scale = extent / 2.0;
    if (prims.size() % 2 == 0) {
      const double r = scale * rng.uniform(0.2, 0.35);
      const Vec3 c(rng.uniform(-half + r, half - r), rng.uniform(-half + r, half - r),
                   rng.uniform(-0.3 * half, 0.3 * half));
      p.shape = Sphere{c, r};
    } else {
      const Vec3 h(scale * rng.uniform(0.12, 0.3), scale * rng.uniform(0.12, 0.3),
                   scale * rng.uniform(0.12, 0.3));
      const Vec3 c(rng.uniform(-half + h.x(), half - h.x()),
                   rng.uniform(-half + h.y(), half - h.y()),
                   rng.uniform(-0.3 * half, 0.3 * half));
      p.shape = Box{c - h, c + h};
    }
    const Aabb pb = primitive_bounds(p);
    const double pr = bounding_radius(p);
    bool clear = true;
    for (const auto& q : prims) {
      const Aabb qb = primitive_bounds(q);
      if ((pb.center() - qb.center()).norm() < pr + bounding_radius(q) + 0.1 * scale) {
        clear = false;
        break;
      }
    }
    if (clear) prims.push_back(std::move(p));
  }
  return build_scene(std::move(prims));
}

}  // namespace masklift
