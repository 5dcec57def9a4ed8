#include "legisnet/refextract.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "builtin_profiles.hpp"
#include "legisnet/error.hpp"
#include "legisnet/parallel.hpp"

namespace legisnet {

namespace {

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  std::vector<std::string> out;
  if (j.contains(key)) {
    for (const auto& v : j.at(key)) out.push_back(v.get<std::string>());
  }
  return out;
}

bool contains_token(const std::vector<std::string>& list, std::string_view token, bool icase) {
  const auto lower = [](std::string_view s) {
    std::string out(s);
    for (auto& c : out)
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
  };
  if (!icase) return std::find(list.begin(), list.end(), token) != list.end();
  const auto t = lower(token);
  return std::any_of(list.begin(), list.end(), [&](const std::string& s) { return lower(s) == t; });
}

}  // namespace

std::string CitationProfile::expand(std::string_view pattern) const {
  std::string out;
  int depth = 0;
  std::string current(pattern);
  // Repeated substitution until no macro reference is left.
  for (;;) {
    out.clear();
    bool changed = false;
    for (std::size_t i = 0; i < current.size();) {
      if (current[i] == '{') {
        std::size_t j = i + 1;
        while (j < current.size() &&
               ((current[j] >= 'a' && current[j] <= 'z') || current[j] == '_'))
          ++j;
        if (j > i + 1 && j < current.size() && current[j] == '}') {
          const auto name = current.substr(i + 1, j - i - 1);
          const auto it = macros_.find(name);
          if (it == macros_.end())
            throw ConfigError("profile '" + name_ + "': unknown macro {" + name + "}");
          out += it->second;
          i = j + 1;
          changed = true;
          continue;
        }
      }
      out.push_back(current[i]);
      ++i;
    }
    if (!changed) return out;
    if (++depth > 32) throw ConfigError("profile '" + name_ + "': macro expansion too deep");
    current = out;
  }
}

CitationProfile CitationProfile::from_json(const nlohmann::json& j) {
  CitationProfile p;
  try {
    p.name_ = j.at("name").get<std::string>();
    p.icase_ = j.value("case_insensitive", false);
    if (j.contains("macros"))
      for (const auto& [k, v] : j.at("macros").items()) p.macros_[k] = v.get<std::string>();
    p.markers_ = string_list(j, "markers");
    p.units_ = string_list(j, "units");
    p.list_connectors_ = string_list(j, "list_connectors");
    p.range_connectors_ = string_list(j, "range_connectors");
    if (j.contains("laws"))
      for (const auto& [k, v] : j.at("laws").items()) p.laws_[k] = v.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("citation profile: ") + e.what());
  }
  auto flags = std::regex::ECMAScript | std::regex::optimize;
  if (p.icase_) flags |= std::regex::icase;
  const auto compile = [&](const std::string& source) {
    try {
      return std::regex(p.expand(source), flags);
    } catch (const std::regex_error& e) {
      throw ConfigError("profile '" + p.name_ + "': bad pattern '" + source + "': " + e.what());
    }
  };
  for (const auto& src : string_list(j, "find")) {
    p.find_sources_.push_back(src);
    p.find_.push_back(compile(src));
  }
  if (p.find_.empty()) throw ConfigError("profile '" + p.name_ + "' has no find patterns");
  if (j.contains("scope")) {
    for (const auto& rule : j.at("scope")) {
      ScopeRule r;
      r.source = rule.at("match").get<std::string>();
      r.pattern = compile(r.source);
      const auto kind = rule.at("kind").get<std::string>();
      if (kind == "same") {
        r.kind = ScopeKind::same;
      } else if (kind == "document") {
        r.kind = ScopeKind::document;
      } else if (kind == "law") {
        r.kind = ScopeKind::law;
      } else {
        throw ConfigError("profile '" + p.name_ + "': unknown scope kind '" + kind + "'");
      }
      p.scope_.push_back(std::move(r));
    }
  }
  return p;
}

CitationProfile CitationProfile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open citation profile " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("citation profile " + path.string() + ": " + e.what());
  }
}

CitationProfile CitationProfile::builtin(std::string_view name) {
  if (name == "us") return from_json(nlohmann::json::parse(detail::kBuiltinProfileUs));
  if (name == "de") return from_json(nlohmann::json::parse(detail::kBuiltinProfileDe));
  throw ConfigError("unknown builtin citation profile '" + std::string(name) + "'");
}

CitationProfile CitationProfile::for_snapshot(const Snapshot& snapshot) const {
  CitationProfile p = *this;
  p.laws_.clear();
  for (const auto& [alias, target] : laws_)
    if (snapshot.find_document(target)) p.laws_[alias] = target;
  for (const auto& doc : snapshot.documents()) {
    p.laws_[doc.key()] = doc.key();
    if (doc.root().abbreviation) p.laws_[*doc.root().abbreviation] = doc.key();
  }
  return p;
}

bool CitationProfile::is_marker(std::string_view t) const { return contains_token(markers_, t, icase_); }
bool CitationProfile::is_unit(std::string_view t) const { return contains_token(units_, t, icase_); }
bool CitationProfile::is_list_connector(std::string_view t) const {
  return contains_token(list_connectors_, t, icase_);
}
bool CitationProfile::is_range_connector(std::string_view t) const {
  return contains_token(range_connectors_, t, icase_);
}

std::string_view to_string(DiagnosticKind kind) {
  switch (kind) {
    case DiagnosticKind::unresolvable_law: return "unresolvable_law";
    case DiagnosticKind::malformed_numeral: return "malformed_numeral";
    case DiagnosticKind::missing_target: return "missing_target";
  }
  return "unknown";
}

std::size_t ExtractionReport::unresolved_total() const {
  std::size_t total = 0;
  for (const auto& [k, v] : unresolved) total += v;
  return total;
}

ExtractionReport& ExtractionReport::operator+=(const ExtractionReport& o) {
  elements += o.elements;
  spans += o.spans;
  keys += o.keys;
  resolved += o.resolved;
  for (const auto& [k, v] : o.unresolved) unresolved[k] += v;
  return *this;
}

nlohmann::json ExtractionReport::to_json() const {
  nlohmann::json by_reason = nlohmann::json::object();
  for (auto kind : {DiagnosticKind::unresolvable_law, DiagnosticKind::malformed_numeral,
                    DiagnosticKind::missing_target}) {
    const auto it = unresolved.find(kind);
    by_reason[std::string(to_string(kind))] = it == unresolved.end() ? 0 : it->second;
  }
  return {{"elements", elements}, {"spans", spans},          {"keys", keys},
          {"resolved", resolved}, {"unresolved", by_reason}, {"unresolved_total", unresolved_total()}};
}

// ---------------------------------------------------------------------------
// Find

std::vector<ReferenceSpan> find_references(const StructuralElement& element,
                                           const CitationProfile& profile) {
  struct Hit {
    std::size_t begin, end;
  };
  std::vector<Hit> hits;
  const std::string& text = element.text;
  for (const auto& re : profile.find_patterns()) {
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator();
         ++it) {
      const auto pos = static_cast<std::size_t>(it->position(0));
      const auto len = static_cast<std::size_t>(it->length(0));
      if (len > 0) hits.push_back({pos, pos + len});
    }
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    return a.begin != b.begin ? a.begin < b.begin : a.end > b.end;
  });
  std::vector<ReferenceSpan> spans;
  std::size_t covered = 0;
  for (const auto& h : hits) {
    if (!spans.empty() && h.begin < covered) continue;
    spans.push_back({element.id, h.begin, h.end, text.substr(h.begin, h.end - h.begin)});
    covered = h.end;
  }
  return spans;
}

// ---------------------------------------------------------------------------
// Parse

namespace {

const std::regex& token_regex() {
  static const std::regex re(
      "§§|§|\\(\\s*[0-9A-Za-z]+\\s*\\)|[0-9]+[A-Za-z]*(?:-[0-9]+[A-Za-z]*)*|"
      "(?:[A-Za-z]|Ä|Ö|Ü|ä|ö|ü|ß)+\\.?|,|;",
      std::regex::ECMAScript | std::regex::optimize);
  return re;
}

bool is_numeral(std::string_view t) { return !t.empty() && t.front() >= '0' && t.front() <= '9'; }

// Splits "1437f" into (1437, "f"); nullopt for hyphenated or oversized keys.
std::optional<std::pair<long, std::string>> split_numeral(const std::string& key) {
  std::size_t i = 0;
  while (i < key.size() && key[i] >= '0' && key[i] <= '9') ++i;
  if (i == 0 || i > 9) return std::nullopt;
  const std::string suffix = key.substr(i);
  if (suffix.find('-') != std::string::npos) return std::nullopt;
  return std::pair{std::stol(key.substr(0, i)), suffix};
}

constexpr long kMaxRange = 5000;

}  // namespace

ParseOutcome parse_span(const ReferenceSpan& span, const CitationProfile& profile,
                        std::string_view context_document) {
  ParseOutcome out;
  std::string body = span.raw;
  std::string document(context_document);

  for (const auto& rule : profile.scope_rules()) {
    std::smatch m;
    if (!std::regex_search(body, m, rule.pattern)) continue;
    if (rule.kind == ScopeKind::document) {
      document = normalize_citekey(m.str(1));
    } else if (rule.kind == ScopeKind::law) {
      const auto name = m.str(1);
      const auto it = profile.law_name_index().find(name);
      if (it == profile.law_name_index().end()) {
        out.diagnostic = Diagnostic{DiagnosticKind::unresolvable_law, span.element_id,
                                    "law '" + name + "' not in collection: " + span.raw};
        return out;
      }
      document = it->second;
    }
    body = body.substr(0, static_cast<std::size_t>(m.position(0)));
    break;
  }

  std::vector<CiteKey> keys;
  bool seen_marker = false, unit_pending = false, unit_mode = false;
  bool after_list = false, range_pending = false;
  std::optional<std::string> last_key;
  for (auto it = std::sregex_iterator(body.begin(), body.end(), token_regex());
       it != std::sregex_iterator(); ++it) {
    const std::string tok = it->str(0);
    if (profile.is_marker(tok)) {
      seen_marker = true;
      unit_pending = unit_mode = after_list = range_pending = false;
      continue;
    }
    if (tok.front() == '(') continue;
    if (is_numeral(tok)) {
      if (!seen_marker) continue;
      if (unit_pending) {
        unit_pending = false;
        unit_mode = true;
        after_list = false;
        continue;
      }
      if (unit_mode && after_list) {
        after_list = false;
        continue;
      }
      const std::string key = normalize_citekey(tok);
      if (range_pending && last_key) {
        const auto lo = split_numeral(*last_key);
        const auto hi = split_numeral(key);
        if (lo && hi && lo->second == hi->second && lo->first < hi->first &&
            hi->first - lo->first <= kMaxRange) {
          for (long n = lo->first + 1; n < hi->first; ++n)
            keys.push_back({document, std::to_string(n) + lo->second});
        }
      }
      keys.push_back({document, key});
      last_key = key;
      range_pending = unit_mode = after_list = false;
      continue;
    }
    if (profile.is_unit(tok)) {
      unit_pending = true;
      continue;
    }
    if (profile.is_list_connector(tok)) {
      after_list = true;
      continue;
    }
    if (profile.is_range_connector(tok)) {
      if (unit_mode) {
        after_list = true;
      } else if (last_key) {
        range_pending = true;
      }
      continue;
    }
  }

  if (keys.empty()) {
    out.diagnostic = Diagnostic{DiagnosticKind::malformed_numeral, span.element_id,
                                "no cite key in '" + span.raw + "'"};
    return out;
  }
  out.keys = CiteKeySet{span, std::move(keys)};
  return out;
}

// ---------------------------------------------------------------------------
// Align

AlignOutcome align_keys(const CiteKeySet& keys, const Snapshot& snapshot) {
  AlignOutcome out;
  std::string source_id = keys.span.element_id;
  if (const auto ref = snapshot.find_id(keys.span.element_id)) {
    const auto& doc = snapshot.document(ref->document);
    const int seq = doc.seqitem_of(ref->node);
    if (seq >= 0) source_id = doc.node(seq).id;
  }
  for (const auto& key : keys.keys) {
    const auto target = snapshot.find_key(key.qualified());
    if (!target) {
      out.unresolved.push_back(
          {DiagnosticKind::missing_target, keys.span.element_id, key.qualified()});
      continue;
    }
    out.references.push_back({source_id, snapshot.element(*target).id, keys.span.element_id});
  }
  return out;
}

ExtractionResult extract_all(const Snapshot& snapshot, const CitationProfile& base_profile) {
  const CitationProfile profile = base_profile.for_snapshot(snapshot);
  const auto docs = snapshot.documents();
  std::vector<ExtractionResult> partial(docs.size());
  parallel_for(docs.size(), [&](std::size_t d) {
    auto& res = partial[d];
    const auto& doc = docs[d];
    for (const auto& el : doc.nodes()) {
      if (el.text.empty()) continue;
      ++res.report.elements;
      for (const auto& span : find_references(el, profile)) {
        ++res.report.spans;
        auto parsed = parse_span(span, profile, doc.key());
        if (parsed.diagnostic) {
          ++res.report.unresolved[parsed.diagnostic->kind];
          res.diagnostics.push_back(std::move(*parsed.diagnostic));
        }
        if (!parsed.keys) continue;
        res.report.keys += parsed.keys->keys.size();
        auto aligned = align_keys(*parsed.keys, snapshot);
        res.report.resolved += aligned.references.size();
        for (auto& diag : aligned.unresolved) {
          ++res.report.unresolved[diag.kind];
          res.diagnostics.push_back(std::move(diag));
        }
        for (auto& r : aligned.references) res.references.push_back(std::move(r));
      }
    }
  });
  ExtractionResult out;
  for (auto& p : partial) {
    out.report += p.report;
    for (auto& r : p.references) out.references.push_back(std::move(r));
    for (auto& d : p.diagnostics) out.diagnostics.push_back(std::move(d));
  }
  return out;
}

std::string references_csv(const std::vector<ResolvedReference>& refs) {
  std::ostringstream out;
  out << "source_id,target_id\n";
  for (const auto& r : refs) out << r.source_id << ',' << r.target_id << '\n';
  return out.str();
}

}  // namespace legisnet
