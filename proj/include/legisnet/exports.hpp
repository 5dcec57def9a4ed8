#pragma once

// Figure data: alluvial diagrams of cluster families, force-directed quotient
// graph drawings, and per-family composition reports.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "legisnet/cluster.hpp"
#include "legisnet/dynamics.hpp"
#include "legisnet/graphs.hpp"
#include "legisnet/stats.hpp"

namespace legisnet {

struct AlluvialParams {
  std::size_t top_n = 50;
  std::size_t top_families = 20;
  double flow_threshold = 0.15;
};

struct AlluvialBlock {
  /// "<year>:<cluster>" or "<year>:misc".
  std::string id;
  int year = 0;
  int cluster = -1;
  std::size_t tokens = 0;
  /// Family index; -1 for the misc block.
  int family = -1;
  /// "family", "grey-a", "grey-b" or "misc".
  std::string role;
  /// Horizontal extent as a share of the largest year's total.
  double x0 = 0, x1 = 0;
};

struct AlluvialSpline {
  int source = 0;
  int target = 0;
  std::size_t tokens = 0;
  double source_x0 = 0, source_x1 = 0, target_x0 = 0, target_x1 = 0;
};

struct AlluvialData {
  std::vector<int> years;
  /// Blocks of all years, year by year; within a year by decreasing tokens
  /// with the misc block last.
  std::vector<AlluvialBlock> blocks;
  std::vector<AlluvialSpline> splines;
  AlluvialParams params;

  nlohmann::json to_json() const;
  std::string to_svg() const;
};

/// Splines follow cluster-graph arcs with chi >= flow_threshold; clusters
/// beyond the top_n of their year are condensed into one misc block per year,
/// and parallel splines between the same blocks are combined.
AlluvialData alluvial_export(const ClusterGraph& graph, const std::vector<ClusterFamily>& families,
                             const AlluvialParams& params = {});

struct Point {
  double x = 0;
  double y = 0;
};

/// Fruchterman-Reingold layout with ideal distance k over the undirected view
/// of `edges`. The same seed gives the same positions; a single node sits at the
/// origin.
std::vector<Point> fr_layout(std::size_t n, const std::vector<std::pair<int, int>>& edges, double k = 2.2,
                             std::uint64_t seed = 1234, int iterations = 100);

struct QuotientVizParams {
  std::size_t min_tokens = 5000;
  std::size_t degree_label_threshold = 20;
  double k = 2.2;
  std::uint64_t seed = 1234;
  int iterations = 100;
};

struct QuotientVizNode {
  std::string id;
  std::string label;
  std::size_t tokens = 0;
  /// Cluster of most member nodes (lowest id on ties); -1 when unknown.
  int cluster = -1;
  std::size_t degree = 0;
  bool labelled = false;
  double radius = 0;
  Point position;
};

struct QuotientVizEdge {
  int source = 0;
  int target = 0;
  std::size_t multiplicity = 0;
  double opacity = 1.0;
};

struct QuotientViz {
  std::vector<QuotientVizNode> nodes;
  std::vector<QuotientVizEdge> edges;

  nlohmann::json to_json() const;
  std::string to_svg() const;
};

/// Draws the quotient nodes with at least min_tokens tokens. Degree is the
/// number of distinct in- plus out-neighbours in the full quotient (self-loops
/// ignored); edge opacity spans [0.15, 1] over the drawn multiplicities.
/// `cluster_of` maps member node ids of quotient classes to clusters.
QuotientViz quotient_viz_export(const LegalGraph& quotient, const std::map<std::string, int>& cluster_of,
                                const QuotientVizParams& params = {});

struct CompositionRow {
  int family = 0;
  int year = 0;
  int cluster = 0;
  std::string element;
  std::size_t tokens = 0;
  double share = 0;
};

/// Clustered graph and clustering of one year.
struct ClusteredYear {
  int year = 0;
  const LegalGraph* graph = nullptr;
  const Clustering* clustering = nullptr;
};

struct FamilyReport {
  std::vector<CompositionRow> rows;
  std::vector<std::vector<TermScore>> terms;
  std::vector<ClusterFamily> families;

  std::string to_csv() const;
  std::string to_html() const;
};

/// Composition of every member cluster of the first `top_families` families
/// by node label, with shares of the cluster's tokens, and TF-IDF terms per
/// family over the texts of its clusters.
FamilyReport family_report_export(const std::vector<ClusterFamily>& families, const FamilyGraph& fg,
                                  const std::vector<ClusteredYear>& years, std::size_t top_families = 20,
                                  std::size_t top_terms = 10);

/// Twenty distinct family colours.
const std::vector<std::string>& family_palette();

}  // namespace legisnet
