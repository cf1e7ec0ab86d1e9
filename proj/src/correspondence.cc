#include "masklift/correspondence.h"

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "masklift/error.h"
#include "masklift/parallel.h"
#include "masklift/rng.h"

namespace masklift {
namespace {

constexpr double kDepthTolerance = 0.01;

// Reprojects pixel (row, col) of `from` into `to`. Returns the continuous
// projected pixel when it lands in bounds on a surface at consistent depth.
std::optional<Vec2> reproject(const GroundTruthFrame& from, const GroundTruthFrame& to, int row,
                              int col) {
  const float d = from.depth_image.at(row, col);
  if (!std::isfinite(d)) return std::nullopt;
  const Vec3 world = backproject(Vec2(col, row), d, from.camera.pose, from.camera.intrinsics);
  const Vec3 c = to.camera.pose.rotation.transpose() * (world - to.camera.pose.translation);
  if (c.z() <= 1e-9) return std::nullopt;
  const auto& k = to.camera.intrinsics;
  const Vec2 px(k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy);
  const long u = std::lround(px.x());
  const long v = std::lround(px.y());
  if (u < 0 || v < 0 || u >= k.width || v >= k.height) return std::nullopt;
  const float dt = to.depth_image.at(static_cast<int>(v), static_cast<int>(u));
  if (!std::isfinite(dt) || std::abs(c.z() - dt) > kDepthTolerance * dt) return std::nullopt;
  return px;
}

double directional_covisibility(const GroundTruthFrame& a, const GroundTruthFrame& b,
                                int stride) {
  std::size_t total = 0;
  std::size_t visible = 0;
  for (int row = 0; row < a.instance_image.height; row += stride) {
    for (int col = 0; col < a.instance_image.width; col += stride) {
      if (a.instance_image.at(row, col) == 0) continue;
      ++total;
      if (reproject(a, b, row, col)) ++visible;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(visible) / static_cast<double>(total);
}

}  // namespace

void MatchSet::validate() const {
  std::set<std::size_t> used_i, used_j;
  for (const auto& [a, b] : matches) {
    if (a >= keypoints_i.size() || b >= keypoints_j.size()) {
      fail(ErrorCode::kIndexOutOfRange, "match index out of range");
    }
    if (!used_i.insert(a).second || !used_j.insert(b).second) {
      fail(ErrorCode::kIndexOutOfRange, "keypoint matched twice");
    }
  }
}

double covisibility_score(const GroundTruthFrame& a, const GroundTruthFrame& b, int stride) {
  if (stride < 1) fail(ErrorCode::kBadParams, "stride must be >= 1");
  return 0.5 * (directional_covisibility(a, b, stride) + directional_covisibility(b, a, stride));
}

std::vector<VisualPair> select_pairs(const std::vector<GroundTruthFrame>& frames,
                                     double tau_global, int stride) {
  const std::size_t n = frames.size();
  std::vector<VisualPair> candidates;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      candidates.push_back({static_cast<int>(i), static_cast<int>(j), 0.0});
  parallel_for(candidates.size(), [&](std::size_t c) {
    auto& p = candidates[c];
    p.similarity = covisibility_score(frames[p.i], frames[p.j], stride);
  });
  std::vector<VisualPair> pairs;
  for (const auto& p : candidates) {
    if (p.similarity > tau_global) pairs.push_back(p);
  }
  return pairs;
}

MatchSet generate_matches(const VisualPair& pair, const std::vector<GroundTruthFrame>& frames,
                          const MatchParams& params) {
  if (pair.i < 0 || pair.j < 0 || static_cast<std::size_t>(pair.i) >= frames.size() ||
      static_cast<std::size_t>(pair.j) >= frames.size()) {
    fail(ErrorCode::kIndexOutOfRange, "pair references a missing frame");
  }
  const auto& fi = frames[pair.i];
  const auto& fj = frames[pair.j];
  std::vector<std::size_t> fg;
  for (std::size_t p = 0; p < fi.instance_image.size(); ++p) {
    if (fi.instance_image.data[p] != 0) fg.push_back(p);
  }
  if (fg.empty()) fail(ErrorCode::kNoForeground, "frame " + std::to_string(pair.i));

  CounterRng rng({params.seed, static_cast<std::uint64_t>(Stream::kMatches),
                  static_cast<std::uint64_t>(pair.i), static_cast<std::uint64_t>(pair.j)});
  const std::size_t n = std::min<std::size_t>(std::max(params.n_keypoints, 0), fg.size());
  for (std::size_t s = 0; s < n; ++s) std::swap(fg[s], fg[s + rng.below(fg.size() - s)]);

  const int w = fi.instance_image.width;
  const auto& kj = fj.camera.intrinsics;
  std::vector<std::pair<PixelCoord, PixelCoord>> kept;
  for (std::size_t s = 0; s < n; ++s) {
    const int row = static_cast<int>(fg[s] / w);
    const int col = static_cast<int>(fg[s] % w);
    auto px = reproject(fi, fj, row, col);
    if (!px) continue;
    if (params.noise_sigma_px > 0.0) {
      px->x() += params.noise_sigma_px * rng.normal();
      px->y() += params.noise_sigma_px * rng.normal();
    }
    const long u = std::lround(px->x());
    const long v = std::lround(px->y());
    if (u < 0 || v < 0 || u >= kj.width || v >= kj.height) continue;
    kept.push_back({{col, row}, {static_cast<int>(u), static_cast<int>(v)}});
  }

  const auto outliers = static_cast<std::size_t>(
      std::llround(std::clamp(params.outlier_rate, 0.0, 1.0) * static_cast<double>(kept.size())));
  std::vector<std::size_t> order(kept.size());
  for (std::size_t s = 0; s < order.size(); ++s) order[s] = s;
  for (std::size_t s = 0; s < outliers; ++s) {
    std::swap(order[s], order[s + rng.below(order.size() - s)]);
    auto& endpoint = kept[order[s]].second;
    endpoint.u = static_cast<int>(rng.below(static_cast<std::uint64_t>(kj.width)));
    endpoint.v = static_cast<int>(rng.below(static_cast<std::uint64_t>(kj.height)));
  }

  MatchSet set;
  set.pair = pair;
  std::set<PixelCoord> used_j;
  for (const auto& [a, b] : kept) {
    if (!used_j.insert(b).second) continue;
    set.matches.emplace_back(set.keypoints_i.size(), set.keypoints_j.size());
    set.keypoints_i.push_back(a);
    set.keypoints_j.push_back(b);
  }
  return set;
}

std::vector<MatchSet> parse_matches(std::istream& in, std::optional<int> frame_count) {
  struct Builder {
    MatchSet set;
    std::map<PixelCoord, std::size_t> index_i, index_j;
  };
  std::vector<Builder> builders;
  std::map<std::pair<int, int>, std::size_t> by_pair;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::vector<long long> v;
    std::string tok;
    while (ss >> tok) {
      std::size_t used = 0;
      long long x = 0;
      try {
        x = std::stoll(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) {
        fail(ErrorCode::kParseError, "match line " + std::to_string(line_no) +
                                         ": not an integer: " + tok);
      }
      v.push_back(x);
    }
    if (v.empty()) continue;
    if (v.size() != 6) {
      fail(ErrorCode::kParseError, "match line " + std::to_string(line_no) +
                                       ": expected 6 integers, got " + std::to_string(v.size()));
    }
    const std::string where = "match line " + std::to_string(line_no);
    if (v[0] < 0 || v[1] < 0 || v[0] == v[1] ||
        (frame_count && (v[0] >= *frame_count || v[1] >= *frame_count))) {
      fail(ErrorCode::kIndexOutOfRange, where + ": bad frame index");
    }
    for (int c = 2; c < 6; ++c) {
      if (v[c] < 0 || v[c] > 1 << 20) {
        fail(ErrorCode::kIndexOutOfRange, where + ": pixel coordinate out of range");
      }
    }
    PixelCoord a{static_cast<int>(v[2]), static_cast<int>(v[3])};
    PixelCoord b{static_cast<int>(v[4]), static_cast<int>(v[5])};
    int fi = static_cast<int>(v[0]);
    int fj = static_cast<int>(v[1]);
    if (fi > fj) {
      std::swap(fi, fj);
      std::swap(a, b);
    }
    auto [it, inserted] = by_pair.try_emplace({fi, fj}, builders.size());
    if (inserted) {
      builders.emplace_back();
      builders.back().set.pair = {fi, fj, 1.0};
    }
    Builder& bld = builders[it->second];
    if (bld.index_i.count(a) || bld.index_j.count(b)) continue;
    bld.index_i[a] = bld.set.keypoints_i.size();
    bld.index_j[b] = bld.set.keypoints_j.size();
    bld.set.matches.emplace_back(bld.set.keypoints_i.size(), bld.set.keypoints_j.size());
    bld.set.keypoints_i.push_back(a);
    bld.set.keypoints_j.push_back(b);
  }
  std::vector<MatchSet> sets;
  sets.reserve(builders.size());
  for (auto& b : builders) sets.push_back(std::move(b.set));
  return sets;
}

std::vector<MatchSet> load_matches(const std::string& path, std::optional<int> frame_count) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path);
  return parse_matches(in, frame_count);
}

void write_matches(std::ostream& out, const std::vector<MatchSet>& sets) {
  out << "# i j ui vi uj vj\n";
  for (const auto& set : sets) {
    for (const auto& [a, b] : set.matches) {
      const auto& p = set.keypoints_i[a];
      const auto& q = set.keypoints_j[b];
      out << set.pair.i << ' ' << set.pair.j << ' ' << p.u << ' ' << p.v << ' ' << q.u << ' '
          << q.v << '\n';
    }
  }
}

void write_matches_file(const std::string& path, const std::vector<MatchSet>& sets) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path);
  write_matches(out, sets);
  if (!out) fail(ErrorCode::kIoError, "write failed: " + path);
}

}  // namespace masklift
