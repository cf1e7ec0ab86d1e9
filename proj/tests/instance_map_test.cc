#include "masklift/instance_map.h"

#include <gtest/gtest.h>

#include <sstream>

#include "test_util.h"

namespace masklift {
namespace {

InstanceMask full_mask(int w) { return InstanceMask(LabelImage(w, 1, 1)); }

// ku keypoints in frame 0, kv in frame 1, the first m of each matched.
MatchSet counted_set(int ku, int kv, int m) {
  MatchSet s;
  s.pair = {0, 1, 1.0};
  for (int n = 0; n < ku; ++n) s.keypoints_i.push_back({n, 0});
  for (int n = 0; n < kv; ++n) s.keypoints_j.push_back({n, 0});
  for (int n = 0; n < m; ++n) s.matches.emplace_back(n, n);
  return s;
}

AssociationGraph graph_for(int ku, int kv, int m) {
  return build_association_graph({full_mask(20), full_mask(20)}, {counted_set(ku, kv, m)}, 0.8);
}

TEST(MatchingScore, MinRatioRule) {
  EXPECT_DOUBLE_EQ(matching_score(8, 10, 16), 0.5);
  EXPECT_TRUE(graph_for(10, 16, 8).edges.empty());
  EXPECT_TRUE(graph_for(10, 10, 8).edges.empty());  // 0.8 is not above 0.8
  const auto g = graph_for(10, 10, 9);
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_DOUBLE_EQ(g.edges[0].weight, 0.9);
}

TEST(AssociationGraph, BestMatchOnly) {
  // Frame 1 has two regions; region 1 of frame 0 matches both, one better.
  LabelImage right(20, 1, 1);
  for (int c = 10; c < 20; ++c) right.at(0, c) = 2;
  MatchSet s;
  s.pair = {0, 1, 1.0};
  for (int n = 0; n < 10; ++n) s.keypoints_i.push_back({n, 0});
  for (int n = 0; n < 10; ++n) s.keypoints_j.push_back({n < 9 ? n : 15, 0});
  for (int n = 0; n < 10; ++n) s.matches.emplace_back(n, n);
  const auto g = build_association_graph({full_mask(20), InstanceMask(right)}, {s}, 0.8);
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.nodes[g.edges[0].b].key, (RegionKey{1, 1}));
  EXPECT_DOUBLE_EQ(g.edges[0].weight, 0.9);
}

TEST(AssociationGraph, MissingFrameIsInconsistent) {
  MatchSet s = counted_set(2, 2, 2);
  s.pair = {0, 3, 1.0};
  EXPECT_EQ(testing::code_of([&] { build_association_graph({full_mask(4)}, {s}, 0.8); }),
            ErrorCode::kInconsistentInput);
}

TEST(AssociationGraph, EdgesStayWithinInstances) {
  // Permutation-only frontend, exact matches: every edge links the same object.
  const Scene scene = testing::two_spheres();
  std::vector<GroundTruthFrame> frames;
  std::vector<InstanceMask> masks;
  OrbitParams op;
  op.radius = 3.0;
  CorruptionParams cp;
  cp.seed = 5;
  for (const Pose& p : generate_orbit(8, op)) {
    frames.push_back(ray_cast(scene, Camera{p, Intrinsics::from_fov(48, 48, 60.0)}));
    masks.push_back(corrupt(frames.back(), cp, frames.size() - 1));
  }
  std::vector<MatchSet> sets;
  MatchParams mp;
  mp.n_keypoints = 800;
  for (const auto& pair : select_pairs(frames, 0.25, 2)) {
    sets.push_back(generate_matches(pair, frames, mp));
  }
  const auto g = build_association_graph(masks, sets, 0.8);
  ASSERT_FALSE(g.edges.empty());
  auto gt_of = [&](const RegionNode& n) {
    const auto& lab = masks[n.key.frame].labels();
    for (std::size_t i = 0; i < lab.size(); ++i)
      if (lab.data[i] == n.key.region) return frames[n.key.frame].instance_image.data[i];
    return Label{0};
  };
  for (const auto& e : g.edges) {
    EXPECT_EQ(gt_of(g.nodes[e.a]), gt_of(g.nodes[e.b]));
    EXPECT_NE(g.nodes[e.a].key.frame, g.nodes[e.b].key.frame);
    EXPECT_GT(e.weight, 0.8);
  }
}

// Graph with the given node frames and no edges; the partition is supplied.
AssociationGraph nodes_in_frames(const std::vector<int>& frames) {
  AssociationGraph g;
  Label region = 1;
  for (int f : frames) g.nodes.push_back(RegionNode{{f, region++}, 10, {}});
  return g;
}

TEST(AssignLabels, CommunityAndFrameFilters) {
  {
    const auto g = nodes_in_frames({0});
    EXPECT_EQ(assign_labels(g, {0}, 2, 2).label_count(), 0u);
  }
  {
    const auto g = nodes_in_frames({0, 1, 2, 3, 4});
    const auto a = assign_labels(g, {0, 0, 0, 0, 0}, 2, 3);
    ASSERT_EQ(a.label_count(), 1u);
    EXPECT_EQ(a.frames_per_label.at(1), 5);
  }
  {
    const auto g = nodes_in_frames({2, 2, 2, 2});
    EXPECT_EQ(assign_labels(g, {0, 0, 0, 0}, 2, 2).label_count(), 0u);
  }
  {
    EXPECT_EQ(testing::code_of([] { assign_labels(nodes_in_frames({0, 1}), {0}, 2, 2); }),
              ErrorCode::kInconsistentInput);
  }
}

TEST(AssignLabels, DenseIdsAndAverageArea) {
  AssociationGraph g = nodes_in_frames({0, 1, 0, 1, 2});
  g.nodes[0].pixel_count = 100;
  g.nodes[1].pixel_count = 300;
  g.nodes[2].pixel_count = 40;
  g.nodes[3].pixel_count = 60;
  g.nodes[4].pixel_count = 20;
  const auto a = assign_labels(g, {7, 7, 3, 3, 3}, 2, 2);
  ASSERT_EQ(a.label_count(), 2u);
  // Larger community first.
  EXPECT_EQ(a.lookup({0, 3}), Label{1});
  EXPECT_EQ(a.lookup({0, 1}), Label{2});
  EXPECT_DOUBLE_EQ(a.avg_area.at(2), 200.0);
  EXPECT_DOUBLE_EQ(a.avg_area.at(1), 40.0);
}

TEST(RasterizationOrder, LargestFirstTiesById) {
  LabelAssignment a;
  a.avg_area = {{1, 50.0}, {2, 100.0}, {3, 50.0}};
  a.frames_per_label = {{1, 2}, {2, 2}, {3, 2}};
  EXPECT_EQ(rasterization_order(a), (std::vector<Label>{2, 1, 3}));
  LabelAssignment one;
  one.avg_area = {{4, 1.0}};
  EXPECT_EQ(rasterization_order(one), (std::vector<Label>{4}));
}

TEST(RenderPseudolabels, PaintsAssignedRegions) {
  const LabelImage img = testing::image_from(4, 2, {1, 1, 2, 2, 1, 1, 2, 3});
  const InstanceMask m(img);
  LabelAssignment a;
  a.mapping = {{{0, 1}, 5}, {{0, 2}, 6}};
  a.frames_per_label = {{5, 2}, {6, 2}};
  a.avg_area = {{5, 4.0}, {6, 3.0}};
  const auto out = render_pseudolabels({m}, a, rasterization_order(a));
  EXPECT_EQ(out[0].data, (std::vector<Label>{5, 5, 6, 6, 5, 5, 6, 0}));

  LabelAssignment none;
  const auto blank = render_pseudolabels({m}, none, {});
  for (Label l : blank[0].data) EXPECT_EQ(l, 0u);
  EXPECT_EQ(testing::code_of([&] { render_pseudolabels({m}, a, {5}); }),
            ErrorCode::kInconsistentInput);
}

TEST(AssignmentText, RoundTrip) {
  const LabelImage img = testing::image_from(3, 1, {1, 2, 2});
  const std::vector<InstanceMask> masks{InstanceMask(img), InstanceMask(img)};
  AssociationGraph g;
  g.nodes = {RegionNode{{0, 1}, 1, {}}, RegionNode{{0, 2}, 2, {}}, RegionNode{{1, 1}, 1, {}},
             RegionNode{{1, 2}, 2, {}}};
  const auto a = assign_labels(g, {0, 1, 0, 1}, 2, 2);
  std::stringstream ss;
  write_assignment(ss, a);
  const auto back = read_assignment(ss, masks);
  EXPECT_EQ(back.mapping, a.mapping);
  EXPECT_EQ(back.frames_per_label, a.frames_per_label);
  EXPECT_EQ(back.avg_area, a.avg_area);
}

}  // namespace
}  // namespace masklift
