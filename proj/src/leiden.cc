#include "masklift/leiden.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>

#include "masklift/error.h"
#include "masklift/rng.h"

namespace masklift {
namespace {

struct Adjacent {
  std::size_t node;
  double weight;
};

// Simple graph with node sizes; parallel edges merged, self loops dropped
// (they add a constant to every partition's quality).
struct Graph {
  std::vector<std::vector<Adjacent>> adj;
  std::vector<double> size;

  std::size_t n() const { return size.size(); }
};

Graph from_edges(std::size_t n, const std::vector<WeightedEdge>& edges) {
  std::map<std::pair<std::size_t, std::size_t>, double> merged;
  for (const auto& e : edges) {
    if (e.u >= n || e.v >= n) fail(ErrorCode::kIndexOutOfRange, "edge endpoint out of range");
    if (e.u == e.v || !(e.weight > 0.0)) continue;
    merged[{std::min(e.u, e.v), std::max(e.u, e.v)}] += e.weight;
  }
  Graph g;
  g.adj.resize(n);
  g.size.assign(n, 1.0);
  for (const auto& [key, w] : merged) {
    g.adj[key.first].push_back({key.second, w});
    g.adj[key.second].push_back({key.first, w});
  }
  return g;
}

// Accumulates edge weight from one node towards each neighbouring community.
class CommunityWeights {
 public:
  explicit CommunityWeights(std::size_t n) : weight_(n, 0.0), seen_(n, false) {}

  void add(std::size_t community, double w) {
    if (!seen_[community]) {
      seen_[community] = true;
      touched_.push_back(community);
    }
    weight_[community] += w;
  }
  double get(std::size_t community) const { return weight_[community]; }
  const std::vector<std::size_t>& touched() const { return touched_; }
  void clear() {
    for (std::size_t c : touched_) {
      weight_[c] = 0.0;
      seen_[c] = false;
    }
    touched_.clear();
  }

 private:
  std::vector<double> weight_;
  std::vector<bool> seen_;
  std::vector<std::size_t> touched_;
};

std::vector<std::size_t> shuffled_nodes(std::size_t n, CounterRng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

// Queue-based local moving. Membership ids live in [0, n).
void move_nodes_fast(const Graph& g, std::vector<std::size_t>& memb, double gamma,
                     CounterRng& rng) {
  const std::size_t n = g.n();
  std::vector<double> comm_size(n, 0.0);
  std::vector<std::size_t> comm_count(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    comm_size[memb[v]] += g.size[v];
    ++comm_count[memb[v]];
  }
  std::vector<std::size_t> empty;
  for (std::size_t c = n; c > 0; --c) {
    if (comm_count[c - 1] == 0) empty.push_back(c - 1);
  }

  std::deque<std::size_t> queue;
  std::vector<bool> queued(n, true);
  for (std::size_t v : shuffled_nodes(n, rng)) queue.push_back(v);

  CommunityWeights cw(n);
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    queued[v] = false;

    const std::size_t current = memb[v];
    const double sv = g.size[v];
    for (const auto& a : g.adj[v]) cw.add(memb[a.node], a.weight);
    const double remove_cost = cw.get(current) - gamma * sv * (comm_size[current] - sv);

    std::size_t best = current;
    double best_gain = 0.0;
    for (std::size_t c : cw.touched()) {
      if (c == current) continue;
      const double gain = cw.get(c) - gamma * sv * comm_size[c] - remove_cost;
      if (gain > best_gain) {
        best_gain = gain;
        best = c;
      }
    }
    // Moving to an empty community only helps when staying costs something.
    if (comm_count[current] > 1 && -remove_cost > best_gain && !empty.empty()) {
      best_gain = -remove_cost;
      best = empty.back();
    }
    cw.clear();
    if (best == current) continue;

    if (!empty.empty() && best == empty.back()) empty.pop_back();
    comm_size[current] -= sv;
    --comm_count[current];
    if (comm_count[current] == 0) empty.push_back(current);
    comm_size[best] += sv;
    ++comm_count[best];
    memb[v] = best;
    for (const auto& a : g.adj[v]) {
      if (!queued[a.node] && memb[a.node] != best) {
        queued[a.node] = true;
        queue.push_back(a.node);
      }
    }
  }
}

// Refinement: within each community of `memb`, merge well-connected
// singletons into well-connected refined communities, drawing the target
// with probability proportional to exp(gain / theta).
std::vector<std::size_t> refine_partition(const Graph& g, const std::vector<std::size_t>& memb,
                                          double gamma, double theta, CounterRng& rng,
                                          bool& merged_any) {
  const std::size_t n = g.n();
  std::vector<std::size_t> refined(n);
  std::iota(refined.begin(), refined.end(), std::size_t{0});
  std::vector<double> r_size(g.size);
  std::vector<std::size_t> r_count(n, 1);

  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t v = 0; v < n; ++v) members[memb[v]].push_back(v);

  // Weight from each node (and each refined community) to the rest of its
  // community S.
  std::vector<double> node_ext(n, 0.0);
  std::vector<double> r_ext(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    for (const auto& a : g.adj[v]) {
      if (memb[a.node] == memb[v]) node_ext[v] += a.weight;
    }
    r_ext[v] = node_ext[v];
  }

  merged_any = false;
  CommunityWeights cw(n);
  std::vector<std::size_t> cand;
  std::vector<double> gain;
  for (const auto& s_nodes : members) {
    if (s_nodes.size() < 2) continue;
    double s_size = 0.0;
    for (std::size_t v : s_nodes) s_size += g.size[v];

    std::vector<std::size_t> order = s_nodes;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    for (std::size_t v : order) {
      const double sv = g.size[v];
      if (node_ext[v] < gamma * sv * (s_size - sv)) continue;
      if (r_count[refined[v]] != 1) continue;

      for (const auto& a : g.adj[v]) {
        if (memb[a.node] == memb[v]) cw.add(refined[a.node], a.weight);
      }
      cand.assign(1, refined[v]);
      gain.assign(1, 0.0);
      for (std::size_t c : cw.touched()) {
        if (c == refined[v]) continue;
        if (r_ext[c] < gamma * r_size[c] * (s_size - r_size[c])) continue;
        const double dq = cw.get(c) - gamma * sv * r_size[c];
        if (dq >= 0.0) {
          cand.push_back(c);
          gain.push_back(dq);
        }
      }
      const double top = *std::max_element(gain.begin(), gain.end());
      double total = 0.0;
      for (double& x : gain) {
        x = std::exp((x - top) / theta);
        total += x;
      }
      double pick = rng.uniform() * total;
      std::size_t chosen = cand.back();
      for (std::size_t k = 0; k < cand.size(); ++k) {
        pick -= gain[k];
        if (pick < 0.0) {
          chosen = cand[k];
          break;
        }
      }
      const double w_to_chosen = chosen == refined[v] ? 0.0 : cw.get(chosen);
      cw.clear();
      if (chosen == refined[v]) continue;

      const std::size_t old = refined[v];
      r_size[old] -= sv;
      r_count[old] = 0;
      r_ext[old] = 0.0;
      refined[v] = chosen;
      r_size[chosen] += sv;
      ++r_count[chosen];
      r_ext[chosen] += node_ext[v] - 2.0 * w_to_chosen;
      merged_any = true;
    }
  }
  return refined;
}

// Renumbers ids densely in order of first appearance.
std::size_t densify(std::vector<std::size_t>& ids) {
  std::map<std::size_t, std::size_t> remap;
  for (auto& id : ids) {
    auto [it, inserted] = remap.try_emplace(id, remap.size());
    id = it->second;
  }
  return remap.size();
}

Graph aggregate(const Graph& g, const std::vector<std::size_t>& dense_refined,
                std::size_t count) {
  Graph out;
  out.size.assign(count, 0.0);
  out.adj.resize(count);
  std::vector<std::map<std::size_t, double>> acc(count);
  for (std::size_t v = 0; v < g.n(); ++v) {
    const std::size_t cv = dense_refined[v];
    out.size[cv] += g.size[v];
    for (const auto& a : g.adj[v]) {
      const std::size_t cu = dense_refined[a.node];
      if (cu != cv) acc[cv][cu] += a.weight;
    }
  }
  for (std::size_t c = 0; c < count; ++c) {
    for (const auto& [d, w] : acc[c]) out.adj[c].push_back({d, w});
  }
  return out;
}

}  // namespace

double cpm_quality(const WeightedGraph& graph, const std::vector<std::size_t>& membership,
                   double resolution) {
  if (membership.size() != graph.node_count) {
    fail(ErrorCode::kInconsistentInput, "membership size differs from node count");
  }
  std::map<std::size_t, double> internal;
  std::map<std::size_t, double> count;
  for (std::size_t v = 0; v < graph.node_count; ++v) count[membership[v]] += 1.0;
  for (const auto& e : graph.edges) {
    if (membership[e.u] == membership[e.v]) internal[membership[e.u]] += e.weight;
  }
  double q = 0.0;
  for (const auto& [c, n] : count) q += internal[c] - resolution * n * (n - 1.0) / 2.0;
  return q;
}

std::vector<std::size_t> leiden_communities(const WeightedGraph& graph,
                                            const LeidenParams& params) {
  const std::size_t n = graph.node_count;
  if (n == 0) return {};
  if (!(params.randomness > 0.0)) fail(ErrorCode::kBadParams, "randomness must be positive");
  CounterRng rng({params.seed, static_cast<std::uint64_t>(Stream::kLeiden)});

  Graph g = from_edges(n, graph.edges);
  std::vector<std::size_t> to_current(n);
  std::iota(to_current.begin(), to_current.end(), std::size_t{0});
  std::vector<std::size_t> memb = to_current;

  for (int round = 0; round < params.max_rounds; ++round) {
    move_nodes_fast(g, memb, params.resolution, rng);
    std::vector<std::size_t> dense = memb;
    const std::size_t communities = densify(dense);
    if (communities == g.n()) break;

    bool merged_any = false;
    std::vector<std::size_t> refined =
        refine_partition(g, memb, params.resolution, params.randomness, rng, merged_any);
    // A refinement that merged nothing would aggregate to the same graph;
    // fall back to the unrefined partition to guarantee progress.
    if (!merged_any) refined = memb;
    const std::size_t count = densify(refined);

    std::vector<std::size_t> next_memb(count);
    for (std::size_t v = 0; v < g.n(); ++v) next_memb[refined[v]] = memb[v];
    densify(next_memb);
    for (auto& c : to_current) c = refined[c];
    g = aggregate(g, refined, count);
    memb = std::move(next_memb);
  }

  std::vector<std::size_t> out(n);
  for (std::size_t v = 0; v < n; ++v) out[v] = memb[to_current[v]];
  densify(out);
  return out;
}

}  // namespace masklift
