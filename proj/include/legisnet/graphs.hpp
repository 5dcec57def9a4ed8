#pragma once

// Graph views of a snapshot: hierarchy, reference, sequence, subsequence and
// quotient graphs, plus GraphML export.

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "legisnet/corpus.hpp"
#include "legisnet/refextract.hpp"

namespace legisnet {

enum class GraphKind { hierarchy, reference, sequence, subsequence, quotient };
enum class EdgeType { containment, reference, sequence };

std::string_view to_string(GraphKind kind);
std::string_view to_string(EdgeType type);

struct GraphNode {
  std::string id;
  /// "meta", an element kind, "merged" (several seqitems) or "class".
  std::string kind;
  int level = 0;
  /// Qualified cite key; subseqitems use "<seqitem key>#<ordinal>".
  std::string citekey;
  std::size_t tokens = 0;
  /// Aggregated text (sequence and subsequence nodes only).
  std::string text;
  /// Element ids covered by the node (quotient classes: member node ids).
  std::vector<std::string> members;
  /// Seqitem ids covered by the node.
  std::vector<std::string> seqitems;
  std::string label;
};

struct GraphArc {
  int source = 0;
  int target = 0;
  EdgeType type = EdgeType::containment;
  /// Weight of a single occurrence.
  double weight = 1.0;
  std::size_t multiplicity = 1;
};

/// Node/arc storage shared by every graph view. Arcs between the same ordered
/// pair and of the same type are stored once with a multiplicity.
class LegalGraph {
 public:
  GraphKind kind = GraphKind::hierarchy;
  std::vector<GraphNode> nodes;
  std::vector<GraphArc> arcs;
  std::map<std::string, std::string> parameters;
  /// Cross-references the graph was built from (reference graphs onward).
  std::vector<ResolvedReference> references;

  int add_node(GraphNode node);
  /// Node index by id, or -1.
  int find(std::string_view id) const;
  /// Node index of the node covering an element id, or -1.
  int node_of_element(std::string_view element_id) const;

  /// Sum of multiplicities, optionally restricted to one edge type.
  std::size_t total_multiplicity(std::optional<EdgeType> type = std::nullopt) const;

 private:
  std::unordered_map<std::string, int> index_;
  std::unordered_map<std::string, int> element_index_;
};

LegalGraph build_hierarchy(const Snapshot& snapshot);

/// Hierarchy arcs plus one reference arc per (source, target) pair carrying
/// the number of references. Throws IntegrityError for endpoints that are not
/// seqitems of the graph.
LegalGraph build_reference(const LegalGraph& hierarchy, const std::vector<ResolvedReference>& refs);

/// Merge condition: seqitems adjacent in the sequence merge iff they map to
/// the same group. "none" never merges.
class MergeCondition {
 public:
  /// Accepts "none", "chapter-or-title", "book-or-law", "level:<n>",
  /// "heading:<regex>". Throws ConfigError otherwise.
  static MergeCondition parse(std::string_view spec);

  const std::string& name() const noexcept { return name_; }
  bool merges() const noexcept { return mode_ != Mode::none; }
  /// Id of the group element for a seqitem; nullopt when nothing merges.
  std::optional<std::string> group_of(const Snapshot& snapshot, ElementRef seqitem) const;
  /// Index of the group element inside the seqitem's document.
  int group_node(const DocumentTree& doc, int seqitem) const;

 private:
  enum class Mode { none, heading, level };
  Mode mode_ = Mode::none;
  std::string name_ = "none";
  std::regex heading_;
  int level_ = 1;
};

struct WeightFunction {
  std::function<double(int)> fn;
  std::string name;
  double operator()(int d) const { return fn(d); }
  /// w(d) = 2^{-(d-2)/2}: siblings weigh 1, closer nodes weigh more.
  static WeightFunction decay();
};

struct SequenceParams {
  MergeCondition rho = MergeCondition::parse("none");
  WeightFunction w = WeightFunction::decay();
  double alpha = 0.5;
};

/// Seqitems merged under rho, sequence arc pairs between adjacent nodes and
/// reference arcs of weight alpha * w(2) projected onto merged nodes.
LegalGraph build_sequence(const Snapshot& snapshot, const LegalGraph& reference,
                          const SequenceParams& params);

/// As build_sequence, with each seqitem replaced by its subseqitem children
/// when it has any. References to such a seqitem land on its first child.
LegalGraph build_subsequence(const Snapshot& snapshot, const LegalGraph& reference,
                             const SequenceParams& params);

using NodeSelector = std::function<std::optional<std::string>(const GraphNode&)>;

/// Quotient by the equivalence "same selector value". Classes are ordered by
/// first appearance. Throws MappingError when the selector is undefined for a
/// node.
LegalGraph quotient(const LegalGraph& graph, const NodeSelector& selector,
                    std::optional<EdgeType> only = std::nullopt);

/// Selector mapping sequence-graph nodes to the merge group of their first
/// seqitem.
NodeSelector group_selector(const Snapshot& snapshot, const MergeCondition& rho);

std::string to_graphml(const LegalGraph& graph);

}  // namespace legisnet
