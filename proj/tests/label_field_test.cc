#include "masklift/label_field.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "test_util.h"

namespace masklift {
namespace {

using testing::code_of;

const Aabb kUnitBox{Vec3(-1, -1, -1), Vec3(1, 1, 1)};

LabelField random_field(std::uint64_t seed, Resolution res, Label labels, double max_sigma) {
  LabelField f(kUnitBox, {res}, labels);
  CounterRng rng(seed);
  // Multiples of 1/64 keep finite-difference steps exact in float.
  for (auto& d : f.density(0)) d = static_cast<float>(std::floor(rng.uniform(0, max_sigma) * 64) / 64);
  for (auto& l : f.logits(0)) l = static_cast<float>(std::floor(rng.uniform(-2, 2) * 64) / 64);
  return f;
}

Ray random_ray(CounterRng& rng) {
  const Vec3 o(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
  const Vec3 target(rng.uniform(-.8, .8), rng.uniform(-.8, .8), rng.uniform(-.8, .8));
  return Ray{o, (target - o).normalized()};
}

TEST(LabelField, MidpointInterpolatesLinearly) {
  LabelField f(kUnitBox, {{4, 4, 4}}, 1);
  // Nodes along x at centers -0.75, -0.25, 0.25, 0.75.
  f.density(0)[f.node_index(0, 1, 2, 2)] = 3.0f;
  f.density(0)[f.node_index(0, 2, 2, 2)] = 5.0f;
  f.logits(0)[f.node_index(0, 1, 2, 2) * 2 + 1] = 1.0f;
  f.logits(0)[f.node_index(0, 2, 2, 2) * 2 + 1] = -3.0f;
  const Vec3 mid(0.0, f.node_position(0, 1, 2, 2).y(), f.node_position(0, 1, 2, 2).z());
  const FieldSample s = sample_field(f, mid);
  EXPECT_NEAR(s.sigma, 4.0, 1e-12);
  EXPECT_NEAR(s.logits[1], -1.0, 1e-12);
}

TEST(LabelField, LevelsSum) {
  LabelField f(kUnitBox, {{2, 2, 2}, {4, 4, 4}}, 1);
  std::fill(f.density(0).begin(), f.density(0).end(), 1.5f);
  std::fill(f.density(1).begin(), f.density(1).end(), 2.0f);
  EXPECT_NEAR(f.density_at(Vec3(0.1, -0.3, 0.2)), 3.5, 1e-12);
  EXPECT_EQ(f.density_at(Vec3(1.5, 0, 0)), 0.0);
}

TEST(Render, ZeroDensityIsBackground) {
  LabelField f(kUnitBox, {{4, 4, 4}}, 3);
  RenderConfig cfg;
  const RayRender r = render_ray(f, Ray{Vec3(0, 0, -3), Vec3(0, 0, 1)}, cfg);
  EXPECT_EQ(r.weight_sum, 0.0);
  Eigen::Index best;
  r.distribution.maxCoeff(&best);
  EXPECT_EQ(best, 0);
  const auto view = render_view(f, testing::orbit_camera(20, 16), cfg);
  for (Label l : view.labels.data) EXPECT_EQ(l, 0u);
}

TEST(Render, CompositingMatchesDirectRecursion) {
  // Two slabs along z: near slab with label 1, far slab with label 2.
  LabelField f(kUnitBox, {{2, 2, 8}}, 2);
  for (int k = 0; k < 8; ++k) {
    for (int j = 0; j < 2; ++j) {
      for (int i = 0; i < 2; ++i) {
        const std::size_t n = f.node_index(0, i, j, k);
        const bool near = k == 2 || k == 3;
        const bool far = k == 5 || k == 6;
        f.density(0)[n] = near ? 2.0f : far ? 20.0f : 0.0f;
        f.logits(0)[n * 3 + 1] = near ? 6.0f : 0.0f;
        f.logits(0)[n * 3 + 2] = far ? 6.0f : 0.0f;
      }
    }
  }
  RenderConfig cfg;
  cfg.samples_per_ray = 40;
  const Ray ray{Vec3(0.1, -0.2, -4), Vec3(0, 0, 1)};
  const CompositeTrace tr = trace_ray(f, ray, cfg);
  ASSERT_EQ(tr.t.size(), 40u);

  // Straight-line recursion: T_0 = 1, w_s = T_s (1 - exp(-sigma delta)).
  double T = 1.0, wsum = 0.0;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(3);
  for (std::size_t s = 0; s < tr.t.size(); ++s) {
    const FieldSample fs = sample_field(f, ray.at(tr.t[s]), cfg.background_logit);
    const double a = 1.0 - std::exp(-fs.sigma * tr.delta[s]);
    const double w = T * a;
    EXPECT_NEAR(tr.weight[s], w, 1e-9);
    EXPECT_NEAR(tr.transmittance[s], T, 1e-9);
    z += w * fs.logits;
    wsum += w;
    T *= 1.0 - a;
  }
  z[0] += (1.0 - wsum) * cfg.background_logit;
  const Eigen::VectorXd p = (z.array() - z.maxCoeff()).exp();
  const Eigen::VectorXd dist = p / p.sum();
  const RayRender r = render_ray(f, ray, cfg);
  EXPECT_NEAR(r.weight_sum, wsum, 1e-9);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(r.distribution[c], dist[c], 1e-9);
  Eigen::Index a, b;
  r.distribution.maxCoeff(&a);
  dist.maxCoeff(&b);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, 1);  // the near slab occludes the far one
}

TEST(Render, InvariantsOnRandomRays) {
  const LabelField f = random_field(3, {6, 5, 7}, 4, 30.0);
  RenderConfig cfg;
  cfg.samples_per_ray = 32;
  CounterRng rng(8);
  for (int n = 0; n < 2000; ++n) {
    const Ray ray = random_ray(rng);
    const CompositeTrace tr = trace_ray(f, ray, cfg);
    double sum = 0;
    for (double w : tr.weight) {
      EXPECT_GE(w, 0.0);
      EXPECT_LE(w, 1.0);
      sum += w;
    }
    EXPECT_LE(sum, 1.0 + 1e-9);
    const RayRender r = render_ray(f, ray, cfg);
    EXPECT_NEAR(r.distribution.sum(), 1.0, 1e-9);
    EXPECT_GE(r.distribution.minCoeff(), 0.0);
  }
}

TEST(Render, DownsampleHalvesSize) {
  LabelField f(kUnitBox, {{4, 4, 4}}, 1);
  const Camera cam{Pose::look_at(Vec3(0, -3, 0), Vec3::Zero()), Intrinsics::from_fov(17, 12, 60)};
  const auto v = render_view(f, cam, RenderConfig{}, 2);
  EXPECT_EQ(v.labels.width, 8);
  EXPECT_EQ(v.labels.height, 6);
}

std::vector<SupervisedRay> three_rays() {
  return {{Ray{Vec3(-3, 0.1, 0.2), Vec3(1, 0, 0)}, 1, {}},
          {Ray{Vec3(0.3, -3, -0.1), Vec3(0, 1, 0)}, 2, {}},
          {Ray{Vec3(0.2, 0.1, 3), Vec3(0, 0, -1)}, 0, {}}};
}

TEST(Gradient, LabelGridMatchesFiniteDifferences) {
  LabelField f = random_field(11, {4, 4, 4}, 2, 3.0);
  RenderConfig cfg;
  cfg.samples_per_ray = 24;
  const auto rays = three_rays();
  std::vector<GradEntry> grad;
  label_loss(f, rays, cfg, &grad);
  std::vector<double> analytic(f.logits(0).size(), 0.0);
  for (const auto& g : grad) analytic[g.index] += g.value;

  const float h = 1.0f / 1024;
  double worst = 0.0, scale = 0.0;
  for (double a : analytic) scale = std::max(scale, std::abs(a));
  ASSERT_GT(scale, 1e-3);
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const float x = f.logits(0)[i];
    f.logits(0)[i] = x + h;
    const double up = label_loss(f, rays, cfg);
    f.logits(0)[i] = x - h;
    const double down = label_loss(f, rays, cfg);
    f.logits(0)[i] = x;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-3 * scale});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Gradient, DensityIsBlockedInOracleMode) {
  const Scene s = build_scene({Primitive{1, Sphere{Vec3::Zero(), 0.6}}});
  LabelField f(kUnitBox, {{8, 8, 8}, {16, 16, 16}}, 1);
  paint_density_from_oracle(f, voxel_instance_oracle(s, kUnitBox, {16, 16, 16}));
  const LabelField before = f;
  const auto gt = ray_cast(s, testing::orbit_camera(0, 24));
  TrainConfig tc;
  tc.iterations = 20;
  tc.rays_per_batch = 64;
  train(f, {TrainingView{gt.camera, gt.instance_image, {}}}, tc, RenderConfig{});
  for (std::size_t l = 0; l < f.level_count(); ++l) {
    EXPECT_EQ(f.density(l), before.density(l));
  }
  EXPECT_NE(f.logits(1), before.logits(1));
}

TEST(Train, SingleLabelConverges) {
  const Scene s = build_scene({Primitive{1, Sphere{Vec3(0.1, 0, 0), 0.6}}});
  LabelField f(kUnitBox, {{8, 8, 8}, {16, 16, 16}, {32, 32, 32}}, 1);
  paint_density_from_oracle(f, voxel_instance_oracle(s, kUnitBox, {32, 32, 32}));
  std::vector<TrainingView> views;
  OrbitParams op;
  op.radius = 3.0;
  for (const Pose& p : generate_orbit(6, op)) {
    const auto gt = ray_cast(s, Camera{p, Intrinsics::from_fov(32, 32, 60)});
    views.push_back({gt.camera, gt.instance_image, {}});
  }
  TrainConfig tc;
  tc.iterations = 500;
  tc.rays_per_batch = 128;
  tc.seed = 1;
  const auto trace = train(f, views, tc, RenderConfig{});
  ASSERT_EQ(trace.size(), 500u);
  double tail = 0;
  for (std::size_t i = trace.size() - 50; i < trace.size(); ++i) tail += trace[i].ce_loss;
  EXPECT_LT(tail / 50, 0.01);
  EXPECT_LT(trace.back().ce_loss, trace.front().ce_loss);
}

TEST(Train, RejectsLabelsBeyondField) {
  LabelField f(kUnitBox, {{4, 4, 4}}, 1);
  const Camera cam = testing::orbit_camera(0, 8);
  TrainingView v{cam, LabelImage(8, 8, 2), {}};
  EXPECT_EQ(code_of([&] { train(f, {v}, TrainConfig{}, RenderConfig{}); }),
            ErrorCode::kLabelOutOfRange);
  TrainingView wrong{cam, LabelImage(4, 8, 1), {}};
  EXPECT_EQ(code_of([&] { train(f, {wrong}, TrainConfig{}, RenderConfig{}); }),
            ErrorCode::kShapeMismatch);
}

TEST(Oracle, PaintedFieldReproducesRayCast) {
  const Scene s = testing::two_spheres();
  const Aabb b = s.bounds.padded(0.1);
  const Vec3 e = b.extent();
  const Resolution res{64, static_cast<int>(std::ceil(64 * e.y() / e.x())),
                       static_cast<int>(std::ceil(64 * e.z() / e.x()))};
  LabelField f(b, {res}, 2);
  paint_from_oracle(f, voxel_instance_oracle(s, b, res), {{1, 1}, {2, 2}});
  const Camera cam = testing::orbit_camera(35, 64);
  const auto gt = ray_cast(s, cam);
  const auto view = render_view(f, cam, RenderConfig{});
  std::size_t agree = 0;
  for (std::size_t i = 0; i < gt.instance_image.size(); ++i) {
    agree += view.labels.data[i] == gt.instance_image.data[i];
  }
  EXPECT_GE(static_cast<double>(agree) / gt.instance_image.size(), 0.97);
}

TEST(Oracle, EdgeCases) {
  const Scene one = build_scene({Primitive{1, Sphere{Vec3::Zero(), 0.5}}});
  LabelField f(kUnitBox, {{16, 16, 16}}, 1);
  paint_from_oracle(f, voxel_instance_oracle(one, kUnitBox, {16, 16, 16}), {{1, 1}});
  const RayRender center = render_ray(f, Ray{Vec3(0, -3, 0.01), Vec3(0, 1, 0)}, RenderConfig{});
  Eigen::Index best;
  center.distribution.maxCoeff(&best);
  EXPECT_EQ(best, 1);

  EXPECT_EQ(code_of([&] {
              paint_from_oracle(f, voxel_instance_oracle(one, kUnitBox, {16, 16, 16}), {});
            }),
            ErrorCode::kUnmappedId);
  EXPECT_EQ(code_of([&] {
              paint_from_oracle(f, voxel_instance_oracle(one, kUnitBox, {8, 8, 8}), {{1, 1}});
            }),
            ErrorCode::kShapeMismatch);

  const Scene empty = build_scene({});
  paint_from_oracle(f, voxel_instance_oracle(empty, kUnitBox, {16, 16, 16}), {});
  for (float d : f.density(0)) EXPECT_EQ(d, 0.0f);
  for (float g : f.logits(0)) EXPECT_EQ(g, 0.0f);
  const auto view = render_view(f, testing::orbit_camera(0, 12), RenderConfig{});
  for (Label l : view.labels.data) EXPECT_EQ(l, 0u);
}

TEST(Checkpoint, RoundTripAndCorruption) {
  const std::string dir = testing::scratch_dir("checkpoint");
  LabelField f(Aabb{Vec3(-1, -2, 0), Vec3(1, 0.5, 1.5)}, {{3, 4, 5}, {6, 8, 10}}, 3);
  CounterRng rng(4);
  for (std::size_t l = 0; l < 2; ++l) {
    for (auto& d : f.density(l)) d = static_cast<float>(rng.uniform());
    for (auto& g : f.logits(l)) g = static_cast<float>(rng.normal());
  }
  save_field(dir + "/f.lf", f);
  EXPECT_EQ(load_field(dir + "/f.lf"), f);

  {
    std::fstream io(dir + "/f.lf", std::ios::in | std::ios::out | std::ios::binary);
    io.seekp(0);
    io.write("XXXX", 4);
  }
  EXPECT_EQ(code_of([&] { load_field(dir + "/f.lf"); }), ErrorCode::kFormatError);

  save_field(dir + "/g.lf", f);
  std::filesystem::resize_file(dir + "/g.lf", std::filesystem::file_size(dir + "/g.lf") - 3);
  EXPECT_EQ(code_of([&] { load_field(dir + "/g.lf"); }), ErrorCode::kFormatError);
}

}  // namespace
}  // namespace masklift
