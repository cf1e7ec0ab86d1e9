#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "masklift/image.h"
#include "masklift/scene.h"

namespace masklift {

struct PixelBox {
  int min_row = 0;
  int min_col = 0;
  int max_row = -1;  // inclusive
  int max_col = -1;
};

struct RegionInfo {
  std::size_t pixel_count = 0;
  PixelBox bbox;
};

// A per-frame partition into frame-local regions; label 0 is unlabeled.
class InstanceMask {
 public:
  InstanceMask() = default;
  explicit InstanceMask(LabelImage labels);

  const LabelImage& labels() const { return labels_; }
  const std::map<Label, RegionInfo>& regions() const { return regions_; }
  int width() const { return labels_.width; }
  int height() const { return labels_.height; }

  bool operator==(const InstanceMask& o) const { return labels_ == o.labels_; }

 private:
  LabelImage labels_;
  std::map<Label, RegionInfo> regions_;
};

struct CorruptionParams {
  bool permute = true;
  double split_prob = 0.0;
  int max_splits = 0;
  double dropout_prob = 0.0;
  int erosion_radius = 0;
  int min_region_px = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

// Simulated segmentation frontend. Regions are the input's label sets. Each
// region draws from its own stream keyed by (seed, frame_index, label):
//   1. drop with dropout_prob
//   2. recursive straight-line split (split_prob per piece, depth max_splits)
//   3. square erosion by erosion_radius
//   4. pieces under min_region_px are cleared
// Surviving pieces are numbered 1..n in (input label, piece) order, then
// shuffled by a bijection keyed by (seed, frame_index) when permute is set.
InstanceMask corrupt(const LabelImage& input, const CorruptionParams& params,
                     std::uint64_t frame_index);
inline InstanceMask corrupt(const GroundTruthFrame& gt, const CorruptionParams& params,
                            std::uint64_t frame_index) {
  return corrupt(gt.instance_image, params, frame_index);
}

// Fast frontend stand-in: 4-connected components of the input labels are the
// regions, then the corrupt() pipeline with permute forced on.
InstanceMask fast_regions(const LabelImage& input, CorruptionParams params,
                          std::uint64_t frame_index = 0);

// 4-connected components of nonzero labels, numbered 1.. in raster order.
LabelImage connected_components(const LabelImage& input);

// One piece split of a region by a line through its bounding box. The line
// passes through (col0 + a * w, row0 + b * h) at angle theta; a pixel is on
// side A when cross(direction, pixel - anchor) >= 0. Exposed for tests.
struct SplitLine {
  double anchor_col = 0.0;
  double anchor_row = 0.0;
  double theta = 0.0;
  bool side_a(int row, int col) const;
};

// Mask persistence: 16-bit PGM plus a sidecar listing `label pixel_count`.
void write_mask(const std::string& pgm_path, const InstanceMask& mask);
InstanceMask read_mask(const std::string& pgm_path);

}  // namespace masklift
