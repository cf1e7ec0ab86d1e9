#pragma once

#include <cstdint>
#include <vector>

namespace masklift {

struct WeightedEdge {
  std::size_t u = 0;
  std::size_t v = 0;
  double weight = 0.0;
};

// Undirected weighted graph with node sizes (1 for leaf nodes).
struct WeightedGraph {
  std::size_t node_count = 0;
  std::vector<WeightedEdge> edges;
};

// Constant Potts model quality: sum over communities c of
// E_c - resolution * n_c * (n_c - 1) / 2, with E_c the internal edge weight
// and n_c the node count.
double cpm_quality(const WeightedGraph& graph, const std::vector<std::size_t>& membership,
                   double resolution);

struct LeidenParams {
  double resolution = 0.0;
  double randomness = 0.01;  // refinement temperature
  std::uint64_t seed = 0;
  int max_rounds = 64;
};

// Leiden community detection under CPM. Returns a dense community id per
// node; ids are numbered by first appearance in node order.
std::vector<std::size_t> leiden_communities(const WeightedGraph& graph,
                                            const LeidenParams& params);

}  // namespace masklift
