#include "masklift/frontend.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "masklift/error.h"
#include "masklift/io.h"
#include "masklift/rng.h"

namespace masklift {
namespace {

using Pixels = std::vector<std::size_t>;  // flat indices, ascending

struct Piece {
  Label source = 0;
  Pixels pixels;
};

class Splitter {
 public:
  Splitter(const CorruptionParams& params, int width, CounterRng& rng)
      : params_(params), width_(width), rng_(rng) {}

  void split(Pixels pixels, int depth, std::vector<Pixels>& out) {
    if (depth >= params_.max_splits || rng_.uniform() >= params_.split_prob) {
      out.push_back(std::move(pixels));
      return;
    }
    PixelBox box{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), -1, -1};
    for (std::size_t idx : pixels) {
      const int row = static_cast<int>(idx / width_);
      const int col = static_cast<int>(idx % width_);
      box.min_row = std::min(box.min_row, row);
      box.max_row = std::max(box.max_row, row);
      box.min_col = std::min(box.min_col, col);
      box.max_col = std::max(box.max_col, col);
    }
    SplitLine line;
    line.anchor_col = box.min_col + rng_.uniform() * (box.max_col - box.min_col);
    line.anchor_row = box.min_row + rng_.uniform() * (box.max_row - box.min_row);
    line.theta = rng_.uniform() * std::numbers::pi;
    Pixels a, b;
    for (std::size_t idx : pixels) {
      const int row = static_cast<int>(idx / width_);
      const int col = static_cast<int>(idx % width_);
      (line.side_a(row, col) ? a : b).push_back(idx);
    }
    const auto min_px = static_cast<std::size_t>(params_.min_region_px);
    if (a.size() < min_px || b.size() < min_px) {
      out.push_back(std::move(pixels));
      return;
    }
    split(std::move(a), depth + 1, out);
    split(std::move(b), depth + 1, out);
  }

 private:
  const CorruptionParams& params_;
  int width_;
  CounterRng& rng_;
};

InstanceMask corrupt_impl(const LabelImage& input, const CorruptionParams& params,
                          std::uint64_t frame_index, Stream region_stream) {
  params.validate();
  const int w = input.width;
  const int h = input.height;

  std::map<Label, Pixels> regions;
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (input.data[i] != 0) regions[input.data[i]].push_back(i);
  }

  std::vector<Piece> pieces;
  for (auto& [label, pixels] : regions) {
    CounterRng rng({params.seed, static_cast<std::uint64_t>(region_stream), frame_index, label});
    if (rng.uniform() < params.dropout_prob) continue;
    std::vector<Pixels> parts;
    Splitter(params, w, rng).split(std::move(pixels), 0, parts);
    for (auto& part : parts) pieces.push_back({label, std::move(part)});
  }

  // Piece raster: piece index + 1, 0 for background.
  std::vector<std::uint32_t> owner(input.size(), 0);
  for (std::size_t p = 0; p < pieces.size(); ++p) {
    for (std::size_t idx : pieces[p].pixels) owner[idx] = static_cast<std::uint32_t>(p + 1);
  }

  const int r = params.erosion_radius;
  std::vector<std::size_t> survivors(pieces.size(), 0);
  std::vector<std::uint32_t> eroded(input.size(), 0);
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      const std::size_t idx = static_cast<std::size_t>(row) * w + col;
      const std::uint32_t id = owner[idx];
      if (id == 0) continue;
      bool keep = true;
      for (int dr = -r; dr <= r && keep; ++dr) {
        for (int dc = -r; dc <= r; ++dc) {
          const int rr = row + dr;
          const int cc = col + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          if (owner[static_cast<std::size_t>(rr) * w + cc] != id) {
            keep = false;
            break;
          }
        }
      }
      if (keep) {
        eroded[idx] = id;
        ++survivors[id - 1];
      }
    }
  }

  std::vector<Label> piece_label(pieces.size(), 0);
  Label next = 0;
  for (std::size_t p = 0; p < pieces.size(); ++p) {
    if (survivors[p] >= static_cast<std::size_t>(params.min_region_px)) piece_label[p] = ++next;
  }
  if (params.permute && next > 1) {
    std::vector<Label> perm(next);
    std::iota(perm.begin(), perm.end(), Label{1});
    CounterRng rng({params.seed, static_cast<std::uint64_t>(Stream::kPermute), frame_index,
                    static_cast<std::uint64_t>(region_stream)});
    for (std::size_t i = perm.size() - 1; i > 0; --i) {
      std::swap(perm[i], perm[rng.below(i + 1)]);
    }
    for (auto& l : piece_label) {
      if (l != 0) l = perm[l - 1];
    }
  }

  LabelImage out(w, h, 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (eroded[i] != 0) out.data[i] = piece_label[eroded[i] - 1];
  }
  return InstanceMask(std::move(out));
}

}  // namespace

InstanceMask::InstanceMask(LabelImage labels) : labels_(std::move(labels)) {
  for (int row = 0; row < labels_.height; ++row) {
    for (int col = 0; col < labels_.width; ++col) {
      const Label l = labels_.at(row, col);
      if (l == 0) continue;
      auto [it, inserted] = regions_.try_emplace(l);
      RegionInfo& info = it->second;
      if (inserted) info.bbox = {row, col, row, col};
      ++info.pixel_count;
      info.bbox.min_row = std::min(info.bbox.min_row, row);
      info.bbox.max_row = std::max(info.bbox.max_row, row);
      info.bbox.min_col = std::min(info.bbox.min_col, col);
      info.bbox.max_col = std::max(info.bbox.max_col, col);
    }
  }
}

void CorruptionParams::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(split_prob) || !prob(dropout_prob)) {
    fail(ErrorCode::kBadParams, "corruption probabilities must lie in [0, 1]");
  }
  if (max_splits < 0 || erosion_radius < 0) {
    fail(ErrorCode::kBadParams, "max_splits and erosion_radius must be >= 0");
  }
  if (min_region_px < 1) fail(ErrorCode::kBadParams, "min_region_px must be >= 1");
}

bool SplitLine::side_a(int row, int col) const {
  const double dx = std::cos(theta);
  const double dy = std::sin(theta);
  return dx * (row - anchor_row) - dy * (col - anchor_col) >= 0.0;
}

InstanceMask corrupt(const LabelImage& input, const CorruptionParams& params,
                     std::uint64_t frame_index) {
  return corrupt_impl(input, params, frame_index, Stream::kCorrupt);
}

InstanceMask fast_regions(const LabelImage& input, CorruptionParams params,
                          std::uint64_t frame_index) {
  params.permute = true;
  return corrupt_impl(connected_components(input), params, frame_index, Stream::kFastRegions);
}

LabelImage connected_components(const LabelImage& input) {
  const int w = input.width;
  const int h = input.height;
  LabelImage out(w, h, 0);
  Label next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < input.size(); ++start) {
    if (input.data[start] == 0 || out.data[start] != 0) continue;
    const Label src = input.data[start];
    out.data[start] = ++next;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t idx = stack.back();
      stack.pop_back();
      const int row = static_cast<int>(idx / w);
      const int col = static_cast<int>(idx % w);
      const int nbr[4][2] = {{row - 1, col}, {row + 1, col}, {row, col - 1}, {row, col + 1}};
      for (const auto& n : nbr) {
        if (!input.contains(n[0], n[1])) continue;
        const std::size_t j = static_cast<std::size_t>(n[0]) * w + n[1];
        if (input.data[j] == src && out.data[j] == 0) {
          out.data[j] = next;
          stack.push_back(j);
        }
      }
    }
  }
  return out;
}

void write_mask(const std::string& pgm_path, const InstanceMask& mask) {
  write_pgm16(pgm_path, mask.labels());
  std::ostringstream ss;
  ss << "# label pixel_count\n";
  for (const auto& [label, info] : mask.regions()) ss << label << ' ' << info.pixel_count << '\n';
  write_text_file(pgm_path + ".labels", ss.str());
}

InstanceMask read_mask(const std::string& pgm_path) {
  InstanceMask mask(read_pgm16(pgm_path));
  const std::string sidecar = pgm_path + ".labels";
  if (!std::filesystem::exists(sidecar)) return mask;
  std::istringstream in(read_text_file(sidecar));
  std::string line;
  std::size_t listed = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Label label = 0;
    std::size_t count = 0;
    if (!(ls >> label >> count)) fail(ErrorCode::kFormatError, sidecar + ": bad line");
    const auto it = mask.regions().find(label);
    if (it == mask.regions().end() || it->second.pixel_count != count) {
      fail(ErrorCode::kFormatError, sidecar + ": disagrees with raster for label " +
                                        std::to_string(label));
    }
    ++listed;
  }
  if (listed != mask.regions().size()) {
    fail(ErrorCode::kFormatError, sidecar + ": label list incomplete");
  }
  return mask;
}

}  // namespace masklift
