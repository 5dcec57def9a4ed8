#pragma once

// Document model for statutory collections: structural element trees, annual
// snapshots, and token/structure accounting.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace legisnet {

enum class ElementKind { document, item, seqitem, subseqitem };

std::string_view to_string(ElementKind kind);
std::optional<ElementKind> element_kind_from(std::string_view name);

struct StructuralElement {
  std::string id;
  ElementKind kind = ElementKind::item;
  int level = 0;
  std::optional<std::string> heading;
  /// Local cite key as written in the source (seqitems only).
  std::optional<std::string> cite_key;
  /// Documents only.
  std::optional<std::string> abbreviation;
  /// Owned text: the element's direct text children, whitespace-collapsed.
  std::string text;
  /// Set when the element itself carries `appendix="true"`.
  bool appendix = false;
  int parent = -1;
  std::vector<int> children;

  friend bool operator==(const StructuralElement&,
                         const StructuralElement&) = default;
};

/// A rooted tree of structural elements stored in document (pre-)order.
/// Index 0 is the root of kind `document`.
class DocumentTree {
 public:
  DocumentTree() = default;

  /// Validates levels, parent links and kinds; throws StructureError.
  DocumentTree(std::string key, std::vector<StructuralElement> nodes);

  const std::string& key() const noexcept { return key_; }
  const StructuralElement& root() const { return nodes_.front(); }
  const StructuralElement& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  std::span<const StructuralElement> nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// True when the node or one of its ancestors is flagged as appendix.
  bool excluded(int i) const { return excluded_.at(static_cast<std::size_t>(i)) != 0; }

  /// Text of the node and all its descendants in document order, joined by
  /// single spaces.
  std::string subtree_text(int i) const;
  /// Token count over the subtree, skipping excluded elements.
  std::size_t subtree_tokens(int i) const;

  /// Nearest seqitem ancestor-or-self, or -1.
  int seqitem_of(int i) const;
  /// Seqitem indices in document order.
  std::vector<int> seqitems() const;
  /// Undirected tree distance between two nodes.
  int distance(int a, int b) const;
  /// Headings from the root down to node i, joined by " / ".
  std::string path(int i) const;

  friend bool operator==(const DocumentTree& a, const DocumentTree& b) {
    return a.key_ == b.key_ && a.nodes_ == b.nodes_;
  }

 private:
  std::string key_;
  std::vector<StructuralElement> nodes_;
  std::vector<char> excluded_;
};

/// Parses one canonical corpus XML document. `fallback_key` names the document
/// when the root has no abbreviation (typically the file stem).
DocumentTree parse_document(std::string_view xml, std::string_view fallback_key = "doc");

/// Serializes a tree back to canonical XML. Reparsing yields an equal tree.
std::string serialize_document(const DocumentTree& tree, std::string_view date = {});

/// Number of maximal runs of non-whitespace characters (Unicode whitespace).
std::size_t count_tokens(std::string_view text);

/// Collapses every whitespace run into one ASCII space and trims both ends.
std::string collapse_ws(std::string_view text);

/// True when the UTF-8 sequence starting at `text[pos]` is Unicode whitespace;
/// `len` receives the sequence length.
bool is_unicode_space(std::string_view text, std::size_t pos, std::size_t& len);

/// Canonical form of a cite key: trimmed, lower-case letters, no leading zeros.
std::string normalize_citekey(std::string_view key);

/// Natural order for mixed alphanumeric keys ("1437" < "1437f" < "1438").
/// Returns <0, 0, >0.
int compare_citekeys(std::string_view a, std::string_view b);

/// Snapshot-wide key of a seqitem: "<document key>/<normalized cite key>".
std::string qualified_key(std::string_view document_key, std::string_view cite_key);

struct ElementRef {
  int document = -1;
  int node = -1;
  friend bool operator==(const ElementRef&, const ElementRef&) = default;
};

/// One collection at one date. Immutable after construction.
class Snapshot {
 public:
  Snapshot() = default;
  /// Builds the indexes; throws IntegrityError on duplicate qualified keys or
  /// duplicate element ids.
  Snapshot(std::string collection_id, std::chrono::year_month_day date,
           std::vector<DocumentTree> documents);

  const std::string& collection_id() const noexcept { return collection_id_; }
  std::chrono::year_month_day date() const noexcept { return date_; }
  int year() const { return static_cast<int>(date_.year()); }
  std::span<const DocumentTree> documents() const noexcept { return documents_; }
  const DocumentTree& document(int i) const { return documents_.at(static_cast<std::size_t>(i)); }

  const std::map<std::string, ElementRef>& citekey_index() const noexcept { return citekey_index_; }
  std::optional<ElementRef> find_key(std::string_view qualified) const;
  std::optional<ElementRef> find_id(std::string_view id) const;
  const StructuralElement& element(ElementRef ref) const {
    return document(ref.document).node(ref.node);
  }
  /// Document index by document key.
  std::optional<int> find_document(std::string_view key) const;

 private:
  std::string collection_id_;
  std::chrono::year_month_day date_{};
  std::vector<DocumentTree> documents_;
  std::map<std::string, ElementRef> citekey_index_;
  std::unordered_map<std::string, ElementRef> by_id_;
  std::map<std::string, int, std::less<>> by_document_key_;
};

/// Parses "YYYY-MM-DD" (or a bare year, read as January 1).
std::chrono::year_month_day parse_date(std::string_view text);
std::string format_date(std::chrono::year_month_day date);

/// Loads a snapshot manifest: {"collection_id", "date", "documents": [paths]}.
/// Document paths are resolved relative to the manifest.
Snapshot load_snapshot(const std::filesystem::path& manifest);

struct SnapshotStats {
  std::size_t tokens = 0;
  std::size_t structures = 1;
  /// Absent until references are resolved.
  std::optional<std::size_t> references;

  /// Throws StateError when references were not resolved.
  std::size_t require_references() const;
};

/// Tokens (appendix subtrees excluded) and hierarchy node count.
SnapshotStats snapshot_stats(const Snapshot& snapshot);
/// As above, with the number of resolved cross-references attached.
SnapshotStats snapshot_stats(const Snapshot& snapshot, std::size_t resolved_references);

/// Pairs of adjacent seqitems (qualified keys) whose document order disagrees
/// with the natural key order. Empty for a well-formed collection.
std::vector<std::pair<std::string, std::string>> key_order_violations(const Snapshot& snapshot);

}  // namespace legisnet
