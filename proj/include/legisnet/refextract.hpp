#pragma once

// Cross-reference extraction in three steps: find candidate spans in element
// text, parse them into cite keys, and align the keys with seqitems of the
// same snapshot.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "legisnet/corpus.hpp"

namespace legisnet {

/// How the tail of a citation span determines the cited document.
enum class ScopeKind {
  same,      ///< the source document ("of this title", no law name)
  document,  ///< captured group is a document key ("of title 42")
  law        ///< captured group is a law name looked up in the law index
};

struct ScopeRule {
  std::string source;
  std::regex pattern;
  ScopeKind kind = ScopeKind::same;
};

/// A country citation grammar. Profiles are data: patterns are written in a
/// small macro language (`{name}` expands to the macro `name`, recursively)
/// and compiled to regular expressions at load time.
class CitationProfile {
 public:
  /// Throws ConfigError on unknown macros, cyclic macros or bad regexes.
  static CitationProfile from_json(const nlohmann::json& j);
  static CitationProfile load(const std::filesystem::path& path);
  /// The shipped "us" and "de" profiles.
  static CitationProfile builtin(std::string_view name);

  /// Copy whose law index also maps every document abbreviation of the
  /// snapshot to its document key, and keeps only aliases whose target exists.
  CitationProfile for_snapshot(const Snapshot& snapshot) const;

  const std::string& name() const noexcept { return name_; }
  const std::vector<std::regex>& find_patterns() const noexcept { return find_; }
  const std::vector<std::string>& pattern_sources() const noexcept { return find_sources_; }
  const std::vector<ScopeRule>& scope_rules() const noexcept { return scope_; }
  const std::map<std::string, std::string>& law_name_index() const noexcept { return laws_; }

  bool is_marker(std::string_view token) const;
  bool is_unit(std::string_view token) const;
  bool is_list_connector(std::string_view token) const;
  bool is_range_connector(std::string_view token) const;

  /// Expands macros in `pattern` without compiling.
  std::string expand(std::string_view pattern) const;

 private:
  std::string name_;
  bool icase_ = false;
  std::map<std::string, std::string> macros_;
  std::vector<std::string> find_sources_;
  std::vector<std::regex> find_;
  std::vector<std::string> markers_, units_, list_connectors_, range_connectors_;
  std::vector<ScopeRule> scope_;
  std::map<std::string, std::string> laws_;
};

struct ReferenceSpan {
  std::string element_id;
  std::size_t begin = 0;  ///< byte offsets into the element text
  std::size_t end = 0;
  std::string raw;
  friend bool operator==(const ReferenceSpan&, const ReferenceSpan&) = default;
};

struct CiteKey {
  std::string document;  ///< document key (title number, law abbreviation)
  std::string number;    ///< normalized seqitem number
  std::string qualified() const { return qualified_key(document, number); }
  friend bool operator==(const CiteKey&, const CiteKey&) = default;
  friend auto operator<=>(const CiteKey&, const CiteKey&) = default;
};

struct CiteKeySet {
  ReferenceSpan span;
  std::vector<CiteKey> keys;
};

struct ResolvedReference {
  std::string source_id;  ///< seqitem containing the citing text
  std::string target_id;  ///< cited seqitem
  std::string origin_id;  ///< element whose own text holds the citation
  friend bool operator==(const ResolvedReference&, const ResolvedReference&) = default;
};

enum class DiagnosticKind { unresolvable_law, malformed_numeral, missing_target };

std::string_view to_string(DiagnosticKind kind);

struct Diagnostic {
  DiagnosticKind kind;
  std::string element_id;
  std::string detail;
};

struct ParseOutcome {
  std::optional<CiteKeySet> keys;
  std::optional<Diagnostic> diagnostic;
};

struct AlignOutcome {
  std::vector<ResolvedReference> references;
  std::vector<Diagnostic> unresolved;
};

struct ExtractionReport {
  std::size_t elements = 0;
  std::size_t spans = 0;
  std::size_t keys = 0;
  std::size_t resolved = 0;
  std::map<DiagnosticKind, std::size_t> unresolved;

  std::size_t unresolved_total() const;
  ExtractionReport& operator+=(const ExtractionReport& other);
  nlohmann::json to_json() const;
};

struct ExtractionResult {
  std::vector<ResolvedReference> references;
  ExtractionReport report;
  std::vector<Diagnostic> diagnostics;
};

/// Maximal non-overlapping citation spans in the element text, left to right.
std::vector<ReferenceSpan> find_references(const StructuralElement& element,
                                           const CitationProfile& profile);

/// Expands a span into cite keys. `context_document` is the key of the
/// document holding the span.
ParseOutcome parse_span(const ReferenceSpan& span, const CitationProfile& profile,
                        std::string_view context_document);

/// One resolved reference per key occurrence found in the snapshot.
AlignOutcome align_keys(const CiteKeySet& keys, const Snapshot& snapshot);

/// Runs all three steps over every text-bearing element. Output order follows
/// document order regardless of how the work is scheduled.
ExtractionResult extract_all(const Snapshot& snapshot, const CitationProfile& profile);

/// "source_id,target_id" lines with a header.
std::string references_csv(const std::vector<ResolvedReference>& refs);

}  // namespace legisnet
