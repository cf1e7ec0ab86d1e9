#include "masklift/frontend.h"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "masklift/rng.h"
#include "test_util.h"

namespace masklift {
namespace {

// True when a and b induce the same partition of pixels (labels may differ).
bool same_partition(const LabelImage& a, const LabelImage& b) {
  if (!a.same_shape(b)) return false;
  std::map<Label, Label> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Label x = a.data[i], y = b.data[i];
    if ((x == 0) != (y == 0)) return false;
    if (x == 0) continue;
    if (ab.try_emplace(x, y).first->second != y) return false;
    if (ba.try_emplace(y, x).first->second != x) return false;
  }
  return true;
}

LabelImage square_frame(int size, int margin) {
  LabelImage img(size, size, 0);
  for (int r = margin; r < size - margin; ++r)
    for (int c = margin; c < size - margin; ++c) img.at(r, c) = 1;
  return img;
}

LabelImage random_blocks(std::uint64_t seed, int w, int h) {
  CounterRng rng(seed);
  LabelImage img(w, h, 0);
  for (int n = 1; n <= 5; ++n) {
    const int r0 = static_cast<int>(rng.below(h - 6)), c0 = static_cast<int>(rng.below(w - 6));
    const int rh = 3 + static_cast<int>(rng.below(h - r0 - 3));
    const int cw = 3 + static_cast<int>(rng.below(w - c0 - 3));
    for (int r = r0; r < std::min(h, r0 + rh); ++r)
      for (int c = c0; c < std::min(w, c0 + cw); ++c) img.at(r, c) = n;
  }
  return img;
}

TEST(Frontend, DropoutOneClearsEverything) {
  CorruptionParams p;
  p.dropout_prob = 1.0;
  const auto m = corrupt(random_blocks(3, 30, 20), p, 0);
  for (Label l : m.labels().data) EXPECT_EQ(l, 0u);
  EXPECT_TRUE(m.regions().empty());
}

TEST(Frontend, AllZeroInput) {
  const auto m = corrupt(LabelImage(12, 9, 0), CorruptionParams{}, 4);
  for (Label l : m.labels().data) EXPECT_EQ(l, 0u);
}

TEST(Frontend, NoOpMatchesConnectedComponents) {
  // Disjoint blobs, one label each, so label sets are connected.
  LabelImage img(20, 20, 0);
  for (int r = 1; r < 6; ++r)
    for (int c = 1; c < 8; ++c) img.at(r, c) = 9;
  for (int r = 10; r < 18; ++r)
    for (int c = 3; c < 6; ++c) img.at(r, c) = 2;
  for (int r = 12; r < 19; ++r)
    for (int c = 12; c < 19; ++c) img.at(r, c) = 5;
  CorruptionParams p;
  p.seed = 11;
  const auto m = corrupt(img, p, 2);
  EXPECT_TRUE(same_partition(m.labels(), connected_components(img)));
  EXPECT_EQ(m.regions().size(), 3u);
}

TEST(Frontend, SeededSplitMatchesIndependentRule) {
  const LabelImage img = square_frame(40, 0);
  CorruptionParams p;
  p.split_prob = 1.0;
  p.max_splits = 1;
  p.permute = false;
  p.seed = 7;
  const auto m = corrupt(img, p, 0);

  // Re-derive the split: one dropout draw, one split draw, then the line.
  CounterRng rng({7, static_cast<std::uint64_t>(Stream::kCorrupt), 0, 1});
  rng.uniform();
  ASSERT_LT(rng.uniform(), 1.0);
  const double ac = rng.uniform() * 39.0;
  const double ar = rng.uniform() * 39.0;
  const double th = rng.uniform() * std::numbers::pi;
  const Vec2 dir(std::cos(th), std::sin(th));  // (col, row)
  std::size_t na = 0;
  for (int r = 0; r < 40; ++r) {
    for (int c = 0; c < 40; ++c) {
      const Vec2 rel(c - ac, r - ar);
      const bool a = dir.x() * rel.y() - dir.y() * rel.x() >= 0.0;
      na += a;
      // Pieces are numbered in split order with side A first.
      EXPECT_EQ(m.labels().at(r, c), a ? 1u : 2u);
    }
  }
  const std::size_t expected_regions = (na > 0 && na < 1600) ? 2 : 1;
  EXPECT_EQ(m.regions().size(), expected_regions);
  EXPECT_EQ(expected_regions, 2u);  // recorded from the seeded run
}

TEST(Frontend, ErosionPeelsBoundary) {
  CorruptionParams p;
  p.erosion_radius = 1;
  p.permute = false;
  const auto m = corrupt(square_frame(10, 2), p, 0);
  // 6x6 square loses its outer ring.
  EXPECT_EQ(m.regions().at(1).pixel_count, 16u);
  EXPECT_EQ(m.labels().at(2, 2), 0u);
  EXPECT_EQ(m.labels().at(3, 3), 1u);
}

TEST(Frontend, InvariantsOnRandomInputs) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    CorruptionParams p;
    p.seed = seed;
    p.split_prob = 0.6;
    p.max_splits = 2;
    p.dropout_prob = 0.2;
    p.erosion_radius = static_cast<int>(seed % 2);
    p.min_region_px = 4;
    const LabelImage img = random_blocks(seed + 100, 32, 24);
    const auto m = corrupt(img, p, seed);
    // Every region big enough, labels dense 1..n, each region inside one input label.
    std::set<Label> seen;
    std::map<Label, std::set<Label>> source;
    for (std::size_t i = 0; i < img.size(); ++i) {
      const Label l = m.labels().data[i];
      if (l == 0) continue;
      seen.insert(l);
      source[l].insert(img.data[i]);
      EXPECT_NE(img.data[i], 0u);
    }
    for (const auto& [l, info] : m.regions()) EXPECT_GE(info.pixel_count, 4u);
    if (!seen.empty()) {
      EXPECT_EQ(*seen.begin(), 1u);
      EXPECT_EQ(*seen.rbegin(), seen.size());
    }
    for (const auto& [l, s] : source) EXPECT_EQ(s.size(), 1u);
    EXPECT_EQ(m, corrupt(img, p, seed));
  }
}

TEST(Frontend, PermutationIsABijectionOfUnpermuted) {
  const LabelImage img = random_blocks(8, 40, 30);
  CorruptionParams p;
  p.seed = 3;
  p.split_prob = 0.5;
  p.max_splits = 1;
  CorruptionParams q = p;
  q.permute = false;
  EXPECT_TRUE(same_partition(corrupt(img, p, 5).labels(), corrupt(img, q, 5).labels()));
}

TEST(Frontend, FastRegionsAreConnectedPieces) {
  LabelImage img(16, 8, 0);
  for (int c = 0; c < 5; ++c) img.at(2, c) = 1;
  for (int c = 9; c < 14; ++c) img.at(2, c) = 1;  // same label, second component
  const auto m = fast_regions(img, CorruptionParams{}, 0);
  EXPECT_EQ(m.regions().size(), 2u);
}

TEST(Frontend, MaskFileRoundTrip) {
  const std::string dir = testing::scratch_dir("frontend_mask");
  CorruptionParams p;
  p.seed = 1;
  const auto m = corrupt(random_blocks(2, 25, 17), p, 0);
  write_mask(dir + "/m.pgm", m);
  const auto back = read_mask(dir + "/m.pgm");
  EXPECT_EQ(back, m);
  EXPECT_EQ(back.regions().size(), m.regions().size());
}

TEST(Frontend, BadParams) {
  CorruptionParams p;
  p.split_prob = 1.5;
  EXPECT_EQ(testing::code_of([&] { corrupt(LabelImage(4, 4, 0), p, 0); }),
            ErrorCode::kBadParams);
  p = CorruptionParams{};
  p.min_region_px = 0;
  EXPECT_EQ(testing::code_of([&] { corrupt(LabelImage(4, 4, 0), p, 0); }),
            ErrorCode::kBadParams);
}

}  // namespace
}  // namespace masklift
