#pragma once

#include <iosfwd>
#include <vector>

#include "masklift/image.h"

namespace masklift {

struct MatchedPair {
  Label pred = 0;
  Label gt = 0;
  double iou = 0.0;
};

struct PQReport {
  double pq = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double miou_tp = 0.0;  // 0 when tp == 0
  std::vector<MatchedPair> matched;  // sorted by gt label
  std::size_t total_reference = 0;
};

// Panoptic quality over the concatenation of all frames, single thing class.
// Label 0 is not an instance on either side; a prediction's area includes
// pixels over reference background. Throws kShapeMismatch.
PQReport scene_pq(const std::vector<LabelImage>& pred, const std::vector<LabelImage>& gt);

struct MatchedMiou {
  double miou_tp = 0.0;
  std::size_t tp = 0;
  std::size_t total_reference = 0;
};

MatchedMiou matched_miou(const std::vector<LabelImage>& pred, const std::vector<LabelImage>& gt);

// `pq=`, `tp=`, `fp=`, `fn=`, `miou_tp=`, `total_reference=` lines, then one
// `match pred gt iou` line per true positive.
void write_report(std::ostream& out, const PQReport& report);

}  // namespace masklift
