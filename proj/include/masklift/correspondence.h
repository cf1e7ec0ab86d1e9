#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "masklift/scene.h"

namespace masklift {

struct VisualPair {
  int i = 0;
  int j = 0;  // i < j
  double similarity = 0.0;
  bool operator==(const VisualPair&) const = default;
};

struct PixelCoord {
  int u = 0;  // col
  int v = 0;  // row
  bool operator==(const PixelCoord&) const = default;
  auto operator<=>(const PixelCoord&) const = default;
};

// Keypoints and one-to-one matches for a single visual pair. Keypoints are
// scoped to the pair.
struct MatchSet {
  VisualPair pair;
  std::vector<PixelCoord> keypoints_i;
  std::vector<PixelCoord> keypoints_j;
  std::vector<std::pair<std::size_t, std::size_t>> matches;

  // Throws kIndexOutOfRange when an index is out of range or repeated.
  void validate() const;
  bool operator==(const MatchSet&) const = default;
};

// Depth-checked covisibility of two frames, in [0, 1], symmetrized.
double covisibility_score(const GroundTruthFrame& a, const GroundTruthFrame& b, int stride);

// All pairs with score strictly above tau_global.
std::vector<VisualPair> select_pairs(const std::vector<GroundTruthFrame>& frames,
                                     double tau_global, int stride);

struct MatchParams {
  int n_keypoints = 2000;
  double noise_sigma_px = 0.0;
  double outlier_rate = 0.0;
  std::uint64_t seed = 0;
};

// Geometric stand-in for a dense matcher: sample foreground pixels of i,
// reproject through ground-truth depth, keep visible ones.
MatchSet generate_matches(const VisualPair& pair, const std::vector<GroundTruthFrame>& frames,
                          const MatchParams& params);

// Match text: `i j ui vi uj vj` per line, `#` comments. Lines are grouped by
// frame pair in order of first appearance; pairs given as j < i are flipped.
// A line repeating an already-used endpoint within its pair is dropped.
// frame_count, when set, bounds the frame indices (kIndexOutOfRange).
std::vector<MatchSet> parse_matches(std::istream& in, std::optional<int> frame_count = {});
std::vector<MatchSet> load_matches(const std::string& path,
                                   std::optional<int> frame_count = {});
void write_matches(std::ostream& out, const std::vector<MatchSet>& sets);
void write_matches_file(const std::string& path, const std::vector<MatchSet>& sets);

}  // namespace masklift
