#pragma once

// Cross-snapshot dynamics: node alignment between adjacent snapshots, the
// cluster graph of token flows, the family graph and cluster families.

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "legisnet/cluster.hpp"
#include "legisnet/graphs.hpp"

namespace legisnet {

/// Jaro similarity over Unicode code points.
double jaro(std::string_view a, std::string_view b);
/// Jaro-Winkler with a common prefix of at most 4 and scaling 0.1.
double jaro_winkler(std::string_view a, std::string_view b);

enum class AlignPass { none = 0, exact_text = 1, key_text = 2, containment = 3, neighborhood = 4 };

std::string_view to_string(AlignPass pass);

struct AlignParams {
  /// Minimum text length (code points) for pass 1.
  std::size_t min_unique_length = 50;
  int hops = 5;
  double min_similarity = 0.9;
};

/// Partial injective map from nodes of one graph to nodes of the next.
struct NodeAlignment {
  std::vector<std::string> source_ids;
  std::vector<std::string> target_ids;
  /// Target index per source node, or -1.
  std::vector<int> target;
  std::vector<AlignPass> pass;

  std::size_t matched() const;
  /// Matched share of source nodes (1 for an empty source).
  double coverage() const;
  std::vector<int> unmatched_sources() const;
  std::vector<int> unmatched_targets() const;
  /// "source_id,target_id,pass" lines with a header.
  std::string to_csv() const;
};

/// Four passes over two maximal-granularity (sub)sequence graphs: unique
/// long identical text, identical key and text, unique containment, and
/// Jaro-Winkler similarity within hop neighbourhoods of matched nodes.
NodeAlignment align_nodes(const LegalGraph& from, const LegalGraph& to, const AlignParams& params = {});

/// One snapshot as seen by the cluster graph.
struct YearLayer {
  int year = 0;
  /// Tokens per cluster.
  std::vector<std::size_t> cluster_tokens;
  /// Cluster of each alignment node; -1 when it lies outside clustered nodes.
  std::vector<int> node_cluster;
  /// Tokens per alignment node.
  std::vector<std::size_t> node_tokens;
};

/// Joins a clustering of `clustered` (the clustering input graph) with the
/// finer `aligned` graph through shared seqitems. Throws IntegrityError when an
/// aligned node's seqitem is not covered by the clustered graph.
YearLayer make_layer(int year, const LegalGraph& clustered, const Clustering& clustering, const LegalGraph& aligned);

struct ClusterNode {
  int year = 0;
  int cluster = 0;
  std::size_t tokens = 0;
  std::string id() const { return std::to_string(year) + ":" + std::to_string(cluster); }
};

struct ClusterArc {
  int source = 0;
  int target = 0;
  std::size_t weight = 0;
};

struct ClusterGraph {
  std::vector<ClusterNode> nodes;
  std::vector<ClusterArc> arcs;
  /// Index of the first node of each layer.
  std::vector<int> layer_offset;

  int node_of(std::size_t layer, int cluster) const { return layer_offset.at(layer) + cluster; }
  std::vector<int> years() const;
  std::string to_csv() const;
  std::string to_graphml() const;
};

/// Arc (c, c') carries the tokens of aligned images in c' whose sources lie in
/// c. `alignments[i]` maps layer i to layer i + 1.
ClusterGraph build_cluster_graph(const std::vector<YearLayer>& layers, const std::vector<NodeAlignment>& alignments);

struct FamilyGraph {
  std::vector<ClusterNode> nodes;
  std::vector<ClusterArc> arcs;
  double gamma = 0.15;
};

/// min(w / |c|, w / |c'|).
double chi(std::size_t w, std::size_t c, std::size_t c_next);

/// Keeps the arcs with chi >= gamma. Throws IntegrityError for empty clusters.
FamilyGraph build_family_graph(const ClusterGraph& graph, double gamma = 0.15);

struct ClusterFamily {
  int index = 0;
  /// Node indices into the family graph, ascending.
  std::vector<int> members;
  int leading = 0;
  std::size_t leading_tokens = 0;
};

/// Connected components of the undirected family graph, largest leading
/// cluster first (ties: earlier year, then lower cluster id).
std::vector<ClusterFamily> cluster_families(const FamilyGraph& graph);

/// Tokens of the family's clusters per year; every year of the graph appears.
std::map<int, std::size_t> family_size_series(const ClusterFamily& family, const FamilyGraph& graph);

/// Members, leading cluster and per-year sizes of every family.
nlohmann::json family_report(const std::vector<ClusterFamily>& families, const FamilyGraph& graph);

}  // namespace legisnet
