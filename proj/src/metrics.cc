#include "masklift/metrics.h"

#include <algorithm>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>

#include "masklift/error.h"

namespace masklift {

PQReport scene_pq(const std::vector<LabelImage>& pred, const std::vector<LabelImage>& gt) {
  if (pred.size() != gt.size()) fail(ErrorCode::kShapeMismatch, "frame counts differ");
  std::map<Label, std::size_t> pred_area, gt_area;
  std::map<std::pair<Label, Label>, std::size_t> inter;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    if (!pred[f].same_shape(gt[f])) {
      fail(ErrorCode::kShapeMismatch, "frame " + std::to_string(f) + " sizes differ");
    }
    for (std::size_t p = 0; p < pred[f].size(); ++p) {
      const Label a = pred[f].data[p];
      const Label b = gt[f].data[p];
      if (a != 0) ++pred_area[a];
      if (b != 0) ++gt_area[b];
      if (a != 0 && b != 0) ++inter[{a, b}];
    }
  }

  PQReport report;
  report.total_reference = gt_area.size();
  std::set<Label> matched_pred, matched_gt;
  for (const auto& [key, n] : inter) {
    const double uni = static_cast<double>(pred_area[key.first] + gt_area[key.second] - n);
    const double iou = static_cast<double>(n) / uni;
    if (iou > 0.5) {
      if (!matched_pred.insert(key.first).second || !matched_gt.insert(key.second).second) {
        fail(ErrorCode::kInvariantViolation, "IoU > 0.5 matched a label twice");
      }
      report.matched.push_back({key.first, key.second, iou});
    }
  }
  // Summing in reference order keeps pq bit-identical under prediction relabeling.
  std::sort(report.matched.begin(), report.matched.end(),
            [](const MatchedPair& a, const MatchedPair& b) { return a.gt < b.gt; });
  double iou_sum = 0.0;
  for (const auto& m : report.matched) iou_sum += m.iou;
  report.tp = report.matched.size();
  report.fp = pred_area.size() - matched_pred.size();
  report.fn = gt_area.size() - matched_gt.size();
  const double denom = static_cast<double>(report.tp) + 0.5 * static_cast<double>(report.fp) +
                       0.5 * static_cast<double>(report.fn);
  report.pq = denom > 0.0 ? iou_sum / denom : 0.0;
  report.miou_tp = report.tp > 0 ? iou_sum / static_cast<double>(report.tp) : 0.0;
  return report;
}

MatchedMiou matched_miou(const std::vector<LabelImage>& pred, const std::vector<LabelImage>& gt) {
  const PQReport r = scene_pq(pred, gt);
  return {r.miou_tp, r.tp, r.total_reference};
}

void write_report(std::ostream& out, const PQReport& report) {
  out << std::setprecision(9);
  out << "pq=" << report.pq << '\n'
      << "tp=" << report.tp << '\n'
      << "fp=" << report.fp << '\n'
      << "fn=" << report.fn << '\n'
      << "miou_tp=" << report.miou_tp << '\n'
      << "total_reference=" << report.total_reference << '\n';
  for (const auto& m : report.matched) {
    out << "match " << m.pred << ' ' << m.gt << ' ' << m.iou << '\n';
  }
}

}  // namespace masklift
