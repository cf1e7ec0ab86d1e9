#include "masklift/geometry.h"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "masklift/error.h"
#include "masklift/rng.h"
#include "masklift/scene.h"
#include "test_util.h"

namespace masklift {
namespace {

using testing::code_of;

TEST(Geometry, PrincipalPointRayIsForward) {
  const Intrinsics k = Intrinsics::from_fov(65, 33, 60.0);
  const Ray r = pixel_ray(Vec2(k.cx, k.cy), Pose::identity(), k);
  EXPECT_NEAR(r.direction.x(), 0.0, 1e-15);
  EXPECT_NEAR(r.direction.y(), 0.0, 1e-15);
  EXPECT_NEAR(r.direction.z(), 1.0, 1e-15);
}

TEST(Geometry, ProjectBackprojectRoundTrip) {
  CounterRng rng(99);
  const Intrinsics k = Intrinsics::from_fov(128, 96, 70.0);
  for (int n = 0; n < 200; ++n) {
    const Pose pose = Pose::look_at(Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), 2.0),
                                    Vec3(rng.uniform(-.5, .5), rng.uniform(-.5, .5), 0.0));
    const Vec2 px(rng.uniform(0, 127), rng.uniform(0, 95));
    const double depth = rng.uniform(0.1, 10.0);
    const Vec3 world = backproject(px, depth, pose, k);
    const Projection p = project(world, pose, k);
    EXPECT_NEAR(p.pixel.x(), px.x(), 1e-9);
    EXPECT_NEAR(p.pixel.y(), px.y(), 1e-9);
    EXPECT_NEAR(p.depth, depth, 1e-9);
  }
}

TEST(Geometry, PixelRayPassesThroughBackprojection) {
  const Intrinsics k = Intrinsics::from_fov(64, 64, 60.0);
  const Pose pose = Pose::look_at(Vec3(2, 1, 1), Vec3::Zero());
  const Vec2 px(10.25, 40.5);
  const Ray r = pixel_ray(px, pose, k);
  const Vec3 x = backproject(px, 2.0, pose, k);
  EXPECT_NEAR(r.direction.norm(), 1.0, 1e-12);
  EXPECT_NEAR((r.origin - pose.center()).norm(), 0.0, 1e-12);
  const Vec3 d = (x - r.origin).normalized();
  EXPECT_NEAR((d - r.direction).norm(), 0.0, 1e-12);
}

TEST(Geometry, Errors) {
  const Intrinsics k = Intrinsics::from_fov(16, 16, 60.0);
  EXPECT_EQ(code_of([&] { backproject(Vec2(1, 1), 0.0, Pose::identity(), k); }),
            ErrorCode::kNonPositiveDepth);
  EXPECT_EQ(code_of([&] { project(Vec3(0, 0, -1), Pose::identity(), k); }),
            ErrorCode::kBehindCamera);
  EXPECT_EQ(code_of([&] { pixel_ray(Vec2(-1, 0), Pose::identity(), k); }),
            ErrorCode::kOutOfBounds);
  EXPECT_EQ(code_of([&] { pixel_ray(Vec2(0, 15.5), Pose::identity(), k); }),
            ErrorCode::kOutOfBounds);
}

TEST(Geometry, LookAtConvention) {
  // World up is +Z; the camera's +Y (down) must point against it.
  const Pose p = Pose::look_at(Vec3(3, 0, 0), Vec3::Zero());
  EXPECT_NEAR((p.rotation.col(2) - Vec3(-1, 0, 0)).norm(), 0.0, 1e-12);
  EXPECT_LT(p.rotation.col(1).z(), 0.0);
  EXPECT_NEAR(p.rotation.determinant(), 1.0, 1e-12);
}

TEST(Geometry, PoseComposition) {
  const Pose a = Pose::look_at(Vec3(1, 2, 3), Vec3::Zero());
  const Pose b = Pose::look_at(Vec3(-1, 0, 2), Vec3(0, 1, 0));
  const Vec3 p(0.3, -0.2, 1.7);
  EXPECT_NEAR(((a * b).apply(p) - a.apply(b.apply(p))).norm(), 0.0, 1e-12);
  EXPECT_NEAR((a.inverse().apply(a.apply(p)) - p).norm(), 0.0, 1e-12);
}

TEST(Geometry, DownsampledCentersMapToBlockCenters) {
  const Intrinsics k = Intrinsics::from_fov(64, 48, 60.0);
  const Intrinsics c = k.downsampled(2);
  EXPECT_EQ(c.width, 32);
  EXPECT_EQ(c.height, 24);
  // Coarse pixel (3, 5) covers fine pixels 6..7 x 10..11.
  const Ray rc = pixel_ray(Vec2(3, 5), Pose::identity(), c);
  const Ray rf = pixel_ray(Vec2(6.5, 10.5), Pose::identity(), k);
  EXPECT_NEAR((rc.direction - rf.direction).norm(), 0.0, 1e-12);
}

TEST(Geometry, CameraTextRoundTrip) {
  std::vector<Camera> cams;
  for (const Pose& p : generate_orbit(3, OrbitParams{})) {
    cams.push_back({p, Intrinsics::from_fov(40, 30, 55.0)});
  }
  std::stringstream ss;
  write_cameras(ss, cams);
  const auto back = read_cameras(ss);
  ASSERT_EQ(back.size(), cams.size());
  for (std::size_t i = 0; i < cams.size(); ++i) {
    EXPECT_EQ(back[i].pose.rotation, cams[i].pose.rotation);
    EXPECT_EQ(back[i].pose.translation, cams[i].pose.translation);
    EXPECT_EQ(back[i].intrinsics.fx, cams[i].intrinsics.fx);
    EXPECT_EQ(back[i].intrinsics.width, 40);
  }
}

TEST(Geometry, MalformedCameraLine) {
  std::istringstream in("0 1 1 0 0 4 4 1 0 0\n");
  EXPECT_EQ(code_of([&] { read_cameras(in); }), ErrorCode::kParseError);
}

TEST(Trajectory, OrbitSpacingAndTarget) {
  OrbitParams p;
  p.center = Vec3(0.5, -0.5, 0.2);
  p.radius = 2.0;
  p.height = 0.5;
  const auto poses = generate_orbit(8, p);
  ASSERT_EQ(poses.size(), 8u);
  for (const Pose& pose : poses) {
    const Vec3 off = pose.center() - p.center;
    EXPECT_NEAR(std::hypot(off.x(), off.y()), 2.0, 1e-12);
    EXPECT_NEAR(off.z(), 0.5, 1e-12);
    EXPECT_NEAR((pose.rotation.col(2) - (-off).normalized()).norm(), 0.0, 1e-12);
  }
}

TEST(Trajectory, LineWithEqualEndpointsRepeatsPose) {
  const auto poses = generate_line(4, LineParams{Vec3(3, 0, 1), Vec3(3, 0, 1), Vec3::Zero()});
  for (const Pose& p : poses) {
    EXPECT_EQ(p.rotation, poses[0].rotation);
    EXPECT_EQ(p.translation, poses[0].translation);
  }
}

TEST(Trajectory, SingleFrameRejected) {
  EXPECT_EQ(code_of([] { generate_orbit(1, OrbitParams{}); }), ErrorCode::kBadParams);
  EXPECT_EQ(code_of([] { generate_line(1, LineParams{Vec3(1, 0, 0), Vec3(2, 0, 0)}); }),
            ErrorCode::kBadParams);
}

}  // namespace
}  // namespace masklift
