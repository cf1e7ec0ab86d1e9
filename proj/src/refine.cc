#include "masklift/refine.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "masklift/error.h"
#include "masklift/parallel.h"
#include "masklift/rng.h"
#include "masklift/union_find.h"

namespace masklift {

void RedundancyGraph::add_node(Label label) { nodes_.insert(label); }

void RedundancyGraph::add_edge(Label a, Label b, std::size_t count) {
  if (a == b) fail(ErrorCode::kInvariantViolation, "redundancy graph self edge");
  if (count == 0) return;
  nodes_.insert(a);
  nodes_.insert(b);
  edges_[{std::min(a, b), std::max(a, b)}] += count;
  degree_[a] += count;
  degree_[b] += count;
}

std::size_t RedundancyGraph::edge_count(Label a, Label b) const {
  const auto it = edges_.find({std::min(a, b), std::max(a, b)});
  return it == edges_.end() ? 0 : it->second;
}

std::size_t RedundancyGraph::degree(Label label) const {
  const auto it = degree_.find(label);
  return it == degree_.end() ? 0 : it->second;
}

void add_region_edges(RedundancyGraph& graph, const LabelImage& rendered,
                      const InstanceMask& regions, double tau_area) {
  if (!rendered.same_shape(regions.labels())) {
    fail(ErrorCode::kShapeMismatch, "rendered view and region mask differ in size");
  }
  std::map<Label, std::map<Label, std::size_t>> counts;
  const auto& reg = regions.labels();
  for (std::size_t p = 0; p < reg.size(); ++p) {
    if (reg.data[p] != 0) ++counts[reg.data[p]][rendered.data[p]];
  }
  for (const auto& [region, hist] : counts) {
    const double size = static_cast<double>(regions.regions().at(region).pixel_count);
    std::vector<Label> present;
    for (const auto& [label, n] : hist) {
      if (label != 0 && static_cast<double>(n) / size > tau_area) present.push_back(label);
    }
    for (std::size_t a = 0; a < present.size(); ++a)
      for (std::size_t b = a + 1; b < present.size(); ++b) graph.add_edge(present[a], present[b]);
  }
}

RedundancyGraph build_redundancy_graph(const LabelField& field,
                                       const std::vector<Camera>& cameras,
                                       const RedundancyParams& params,
                                       const CorruptionParams& frontend,
                                       const RenderConfig& render_cfg,
                                       const RegionSource& source) {
  if (params.views < 1) fail(ErrorCode::kBadParams, "need at least one redundancy view");
  if (cameras.empty()) fail(ErrorCode::kBadParams, "no cameras to draw redundancy views from");
  RedundancyGraph graph;
  for (Label l = 1; l <= field.label_count(); ++l) graph.add_node(l);

  CounterRng rng({params.seed, static_cast<std::uint64_t>(Stream::kMergeViews)});
  for (int v = 0; v < params.views; ++v) {
    const Camera& base = cameras[rng.below(cameras.size())];
    Camera cam = base;
    for (int a = 0; a < 3; ++a) cam.pose.translation[a] += params.jitter_translation * rng.normal();
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    const double angle = params.jitter_rotation_deg * std::numbers::pi / 180.0 * rng.normal();
    if (axis.norm() > 1e-12) {
      cam.pose.rotation = cam.pose.rotation * Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
    }
    const LabelImage rendered = render_view(field, cam, render_cfg, params.downsample).labels;
    Camera coarse = cam;
    coarse.intrinsics = cam.intrinsics.downsampled(params.downsample);
    const InstanceMask regions =
        fast_regions(source(coarse), frontend, static_cast<std::uint64_t>(v));
    add_region_edges(graph, rendered, regions, params.tau_area);
  }
  return graph;
}

MergeMap::MergeMap(std::map<Label, Label> mapping) : mapping_(std::move(mapping)) {
  for (const auto& [from, to] : mapping_) {
    const auto it = mapping_.find(to);
    if (from == 0 || it == mapping_.end() || it->second != to) {
      fail(ErrorCode::kInvariantViolation, "merge map is not idempotent at " +
                                               std::to_string(from));
    }
  }
}

MergeMap MergeMap::identity(Label label_count) {
  std::map<Label, Label> m;
  for (Label l = 1; l <= label_count; ++l) m[l] = l;
  return MergeMap(std::move(m));
}

Label MergeMap::operator()(Label label) const {
  if (label == 0) return 0;
  const auto it = mapping_.find(label);
  if (it == mapping_.end()) {
    fail(ErrorCode::kUnknownLabel, "label " + std::to_string(label) + " not in merge map");
  }
  return it->second;
}

namespace {

// One frozen-degree pass. Returns canonical label per node.
std::map<Label, Label> merge_pass(const RedundancyGraph& graph, double tau_merge, bool& merged) {
  const std::vector<Label> labels(graph.nodes().begin(), graph.nodes().end());
  std::map<Label, std::size_t> index;
  for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i]] = i;
  UnionFind uf(labels.size());
  merged = false;
  for (const auto& [key, count] : graph.edges()) {
    const double denom = static_cast<double>(graph.degree(key.first) + graph.degree(key.second));
    if (2.0 * static_cast<double>(count) / denom > tau_merge) {
      merged |= uf.unite(index[key.first], index[key.second]);
    }
  }
  std::map<Label, Label> out;
  for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]] = labels[uf.find(i)];
  return out;
}

}  // namespace

MergeMap merge_labels(const RedundancyGraph& graph, double tau_merge, bool iterate) {
  bool merged = false;
  std::map<Label, Label> total = merge_pass(graph, tau_merge, merged);
  while (iterate && merged) {
    RedundancyGraph contracted;
    for (Label l : graph.nodes()) contracted.add_node(total[l]);
    for (const auto& [key, count] : graph.edges()) {
      const Label a = total[key.first];
      const Label b = total[key.second];
      if (a != b) contracted.add_edge(a, b, count);
    }
    const std::map<Label, Label> step = merge_pass(contracted, tau_merge, merged);
    for (auto& [from, to] : total) to = step.at(to);
  }
  return MergeMap(std::move(total));
}

LabelImage apply_merge(const LabelImage& image, const MergeMap& merge) {
  LabelImage out = image;
  for (Label& l : out.data) l = merge(l);
  return out;
}

LabelAssignment apply_merge(const LabelAssignment& assignment, const MergeMap& merge) {
  LabelAssignment out;
  std::map<Label, double> total_area;
  std::map<Label, std::set<int>> frames;
  for (const auto& [key, label] : assignment.mapping) {
    const Label to = merge(label);
    out.mapping[key] = to;
    frames[to].insert(key.frame);
  }
  for (const auto& [label, area] : assignment.avg_area) {
    total_area[merge(label)] += area * assignment.frames_per_label.at(label);
  }
  for (const auto& [label, f] : frames) {
    out.frames_per_label[label] = static_cast<int>(f.size());
    out.avg_area[label] = total_area[label] / static_cast<double>(f.size());
  }
  return out;
}

void write_merge_map(std::ostream& out, const MergeMap& merge) {
  out << "# from to\n";
  for (const auto& [from, to] : merge.mapping()) out << from << ' ' << to << '\n';
}

MergeMap read_merge_map(std::istream& in) {
  std::map<Label, Label> m;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    long long from = 0, to = 0;
    if (!(ss >> from)) continue;
    std::string extra;
    if (!(ss >> to) || (ss >> extra) || from <= 0 || to <= 0) {
      fail(ErrorCode::kParseError, "merge map line " + std::to_string(line_no));
    }
    m[static_cast<Label>(from)] = static_cast<Label>(to);
  }
  return MergeMap(std::move(m));
}

LocResult instance_loc(const LabelField& field, const Camera& camera, const InstanceMask& mask,
                       const LocParams& params, const RenderConfig& render_cfg) {
  render_cfg.validate();
  const auto& k = camera.intrinsics;
  if (mask.width() != k.width || mask.height() != k.height) {
    fail(ErrorCode::kShapeMismatch, "mask size differs from the camera image size");
  }
  if (!params.exhaustive && params.samples_per_region < 1) {
    fail(ErrorCode::kBadParams, "samples_per_region must be >= 1");
  }
  std::map<Label, std::vector<std::size_t>> pixels;
  const auto& labels = mask.labels();
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (labels.data[p] != 0) pixels[labels.data[p]].push_back(p);
  }

  LocResult result;
  result.labels = LabelImage(k.width, k.height, 0);
  for (auto& [region, px] : pixels) {
    std::size_t n = px.size();
    if (!params.exhaustive && static_cast<std::size_t>(params.samples_per_region) < n) {
      n = static_cast<std::size_t>(params.samples_per_region);
      CounterRng rng({params.seed, static_cast<std::uint64_t>(Stream::kLocSamples), region});
      for (std::size_t s = 0; s < n; ++s) std::swap(px[s], px[s + rng.below(px.size() - s)]);
    }
    std::vector<Label> votes(n, 0);
    parallel_for(n, [&](std::size_t s) {
      const Vec2 pix(static_cast<double>(px[s] % k.width), static_cast<double>(px[s] / k.width));
      const RayRender r = render_ray(field, pixel_ray(pix, camera.pose, k), render_cfg);
      Eigen::Index best = 0;
      r.distribution.maxCoeff(&best);
      votes[s] = static_cast<Label>(best);
    });
    result.field_queries += n;
    std::map<Label, std::size_t> tally;
    for (Label v : votes) ++tally[v];
    Label winner = 0;
    std::size_t top = 0;
    for (const auto& [label, count] : tally) {  // ascending: ties keep the lowest label
      if (count > top) {
        top = count;
        winner = label;
      }
    }
    result.region_labels[region] = winner;
    if (winner == 0) continue;
    for (std::size_t p : pixels[region]) result.labels.data[p] = winner;
  }
  return result;
}

}  // namespace masklift
