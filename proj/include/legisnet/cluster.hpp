#pragma once

// Two-level map-equation clustering with a preferred module count, and
// consensus clustering over seeded runs.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "legisnet/graphs.hpp"

namespace legisnet {

struct WeightedArc {
  int source = 0;
  int target = 0;
  double weight = 1.0;
};

struct FlowArc {
  int source = 0;
  int target = 0;
  double flow = 0.0;
};

/// Stationary visit rates plus per-arc flow. Teleportation steps are not
/// recorded: arc flows cover link steps only and sum to 1 unless every node
/// is dangling.
struct FlowGraph {
  std::vector<std::string> ids;
  /// Node attribute carried for downstream accounting; unused by the objective.
  std::vector<std::size_t> sizes;
  std::vector<double> rates;
  /// Parallel arcs pooled; self-loops kept.
  std::vector<FlowArc> arcs;
  double tau = 0.15;
  bool converged = false;
  double residual = 0.0;
  int iterations = 0;

  std::size_t size() const noexcept { return rates.size(); }
};

/// Power iteration; dangling nodes teleport uniformly. Stops when the L1
/// change drops below 1e-12 or after 10000 iterations (then `converged` is
/// false). Throws ParameterError for an empty graph, tau outside [0, 1) or
/// negative weights.
FlowGraph visit_rates(std::size_t n, const std::vector<WeightedArc>& arcs, double tau = 0.15);

/// Flow over a graph's arcs (weight x multiplicity), optionally restricted to
/// one edge type. Node sizes are token counts.
FlowGraph visit_rates(const LegalGraph& graph, double tau = 0.15, std::optional<EdgeType> only = std::nullopt);

struct Clustering {
  std::string snapshot_id;
  std::vector<std::string> node_ids;
  /// Dense ids in order of first appearance over the nodes.
  std::vector<int> module;
  std::uint64_t seed = 0;

  int module_count() const;
  /// "node_id,cluster_id,seed" lines with a header.
  std::string to_csv() const;
};

/// Relabels ids densely in order of first appearance.
std::vector<int> canonical_labels(const std::vector<int>& labels);

/// Two-level map equation in bits.
double codelength(const FlowGraph& flow, const std::vector<int>& modules);
double codelength(const FlowGraph& flow, const Clustering& clustering);

struct InfomapParams {
  std::optional<int> preferred_n;
  /// Penalty weight in bits per unit of |ln(m / preferred_n)|.
  double lambda = 1.0;
  std::uint64_t seed = 0;
};

/// L(M) plus the preferred-count penalty.
double augmented_objective(const FlowGraph& flow, const std::vector<int>& modules, const InfomapParams& params);

/// Local minimum of the augmented objective via node moves and aggregation.
/// The same seed gives the same result.
Clustering infomap_run(const FlowGraph& flow, const InfomapParams& params);

struct ConsensusParams {
  int runs = 1000;
  double threshold = 0.95;
  std::optional<int> preferred_n = 100;
  double lambda = 1.0;
  std::uint64_t seed_base = 0;
  unsigned threads = 0;
};

struct ConsensusResult {
  Clustering clustering;
  ConsensusParams params;
  /// Co-occurrence counts for pairs i < j, row-major upper triangle.
  std::vector<std::uint32_t> cooccurrence;
  /// Module count -> number of runs.
  std::map<int, int> module_counts;

  std::uint32_t count(int i, int j) const;
  /// Minimum co-occurrence count for two nodes to be linked.
  std::uint32_t required_count() const;
  nlohmann::json report() const;
};

/// Runs seeds seed_base .. seed_base + runs - 1 and returns the connected
/// components of the thresholded co-occurrence graph.
ConsensusResult consensus(const FlowGraph& flow, const ConsensusParams& params);

/// The co-occurrence and component step alone, over given run labels.
ConsensusResult combine_runs(const std::vector<std::string>& ids, const std::vector<std::vector<int>>& runs,
                             const ConsensusParams& params);

}  // namespace legisnet
