#include "legisnet/corpus.hpp"

#include <expat.h>

#include <algorithm>
#include <cstdio>
#include <memory>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "legisnet/error.hpp"

namespace legisnet {

std::string_view to_string(ElementKind kind) {
  switch (kind) {
    case ElementKind::document: return "document";
    case ElementKind::item: return "item";
    case ElementKind::seqitem: return "seqitem";
    case ElementKind::subseqitem: return "subseqitem";
  }
  return "item";
}

std::optional<ElementKind> element_kind_from(std::string_view name) {
  if (name == "document") return ElementKind::document;
  if (name == "item") return ElementKind::item;
  if (name == "seqitem") return ElementKind::seqitem;
  if (name == "subseqitem") return ElementKind::subseqitem;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Whitespace and tokens

bool is_unicode_space(std::string_view s, std::size_t pos, std::size_t& len) {
  const auto byte = [&](std::size_t k) -> unsigned {
    return pos + k < s.size() ? static_cast<unsigned char>(s[pos + k]) : 0u;
  };
  const unsigned b0 = byte(0);
  len = 1;
  if (b0 == 0x20 || (b0 >= 0x09 && b0 <= 0x0D)) return true;
  if (b0 < 0x80) return false;
  if (b0 == 0xC2) {
    len = 2;
    const unsigned b1 = byte(1);
    return b1 == 0x85 || b1 == 0xA0;
  }
  if (b0 == 0xE1 && byte(1) == 0x9A && byte(2) == 0x80) {
    len = 3;
    return true;
  }
  if (b0 == 0xE2) {
    const unsigned b1 = byte(1), b2 = byte(2);
    if (b1 == 0x80 && ((b2 >= 0x80 && b2 <= 0x8A) || b2 == 0xA8 || b2 == 0xA9 || b2 == 0xAF)) {
      len = 3;
      return true;
    }
    if (b1 == 0x81 && b2 == 0x9F) {
      len = 3;
      return true;
    }
  }
  if (b0 == 0xE3 && byte(1) == 0x80 && byte(2) == 0x80) {
    len = 3;
    return true;
  }
  return false;
}

std::size_t count_tokens(std::string_view text) {
  std::size_t tokens = 0;
  bool in_token = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t len = 1;
    if (is_unicode_space(text, pos, len)) {
      in_token = false;
    } else {
      if (!in_token) ++tokens;
      in_token = true;
      len = 1;
    }
    pos += len;
  }
  return tokens;
}

std::string collapse_ws(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t len = 1;
    if (is_unicode_space(text, pos, len)) {
      pending_space = !out.empty();
      pos += len;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(text[pos]);
    ++pos;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cite keys

std::string normalize_citekey(std::string_view key) {
  std::string out;
  for (char c : key) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') continue;
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(c);
  }
  // Strip leading zeros of the leading digit run.
  std::size_t digits = 0;
  while (digits < out.size() && out[digits] >= '0' && out[digits] <= '9') ++digits;
  std::size_t zeros = 0;
  while (zeros + 1 < digits && out[zeros] == '0') ++zeros;
  out.erase(0, zeros);
  return out;
}

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

int compare_citekeys(std::string_view a, std::string_view b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = is_digit(a[i]), db = is_digit(b[j]);
    if (da != db) return da ? -1 : 1;
    std::size_t ie = i, je = j;
    while (ie < a.size() && is_digit(a[ie]) == da) ++ie;
    while (je < b.size() && is_digit(b[je]) == db) ++je;
    std::string_view ra = a.substr(i, ie - i), rb = b.substr(j, je - j);
    if (da) {
      while (ra.size() > 1 && ra.front() == '0') ra.remove_prefix(1);
      while (rb.size() > 1 && rb.front() == '0') rb.remove_prefix(1);
      if (ra.size() != rb.size()) return ra.size() < rb.size() ? -1 : 1;
    }
    if (const int c = ra.compare(rb); c != 0) return c < 0 ? -1 : 1;
    i = ie;
    j = je;
  }
  if (i < a.size()) return 1;
  if (j < b.size()) return -1;
  return 0;
}

std::string qualified_key(std::string_view document_key, std::string_view cite_key) {
  std::string out(document_key);
  out.push_back('/');
  out += normalize_citekey(cite_key);
  return out;
}

// ---------------------------------------------------------------------------
// DocumentTree

DocumentTree::DocumentTree(std::string key, std::vector<StructuralElement> nodes)
    : key_(std::move(key)), nodes_(std::move(nodes)) {
  if (nodes_.empty() || nodes_.front().kind != ElementKind::document)
    throw StructureError("document tree must have a document root");
  excluded_.assign(nodes_.size(), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (i == 0) {
      if (n.parent != -1 || n.level != 0) throw StructureError("root must have level 0");
    } else {
      if (n.parent < 0 || static_cast<std::size_t>(n.parent) >= i)
        throw StructureError("element " + n.id + " is not in document order");
      const auto& p = nodes_[static_cast<std::size_t>(n.parent)];
      if (n.level != p.level + 1) throw StructureError("level mismatch at " + n.id);
      if (n.kind == ElementKind::document) throw StructureError("nested document at " + n.id);
      // Preorder: the parent lies on the path from the root to the previous node.
      int k = static_cast<int>(i) - 1;
      while (k >= 0 && k != n.parent) k = nodes_[static_cast<std::size_t>(k)].parent;
      if (k != n.parent) throw StructureError("element " + n.id + " is not in document order");
    }
    const bool parent_excluded = n.parent >= 0 && excluded_[static_cast<std::size_t>(n.parent)];
    excluded_[i] = (n.appendix || parent_excluded) ? 1 : 0;
  }
}

std::string DocumentTree::subtree_text(int i) const {
  std::string out;
  // Preorder storage: the subtree of i is a contiguous range.
  const int level = node(i).level;
  for (std::size_t k = static_cast<std::size_t>(i); k < nodes_.size(); ++k) {
    if (k != static_cast<std::size_t>(i) && nodes_[k].level <= level) break;
    if (nodes_[k].text.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out += nodes_[k].text;
  }
  return out;
}

std::size_t DocumentTree::subtree_tokens(int i) const {
  std::size_t tokens = 0;
  const int level = node(i).level;
  for (std::size_t k = static_cast<std::size_t>(i); k < nodes_.size(); ++k) {
    if (k != static_cast<std::size_t>(i) && nodes_[k].level <= level) break;
    if (!excluded_[k]) tokens += count_tokens(nodes_[k].text);
  }
  return tokens;
}

int DocumentTree::seqitem_of(int i) const {
  while (i >= 0) {
    if (node(i).kind == ElementKind::seqitem) return i;
    i = node(i).parent;
  }
  return -1;
}

std::vector<int> DocumentTree::seqitems() const {
  std::vector<int> out;
  for (std::size_t k = 0; k < nodes_.size(); ++k)
    if (nodes_[k].kind == ElementKind::seqitem) out.push_back(static_cast<int>(k));
  return out;
}

int DocumentTree::distance(int a, int b) const {
  int d = 0;
  while (a != b) {
    if (node(a).level >= node(b).level) {
      a = node(a).parent;
    } else {
      b = node(b).parent;
    }
    ++d;
  }
  return d;
}

std::string DocumentTree::path(int i) const {
  std::vector<std::string> parts;
  for (int k = i; k >= 0; k = node(k).parent) {
    const auto& n = node(k);
    if (n.heading) {
      parts.push_back(*n.heading);
    } else if (n.cite_key) {
      parts.push_back(*n.cite_key);
    } else if (n.kind == ElementKind::document) {
      parts.push_back(n.abbreviation.value_or(key_));
    }
  }
  std::string out;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    if (!out.empty()) out += " / ";
    out += *it;
  }
  return out;
}

// ---------------------------------------------------------------------------
// XML parsing

namespace {

struct ParseContext {
  XML_Parser parser = nullptr;
  std::string fallback_key;
  std::vector<StructuralElement> nodes;
  std::vector<std::string> raw_text;  // per node, before collapsing
  std::vector<int> stack;
  std::set<std::string> seen_keys;
  bool saw_root = false;
  // Deferred error; expat frames must not be unwound by exceptions.
  enum class Failure { none, schema, structure, integrity } failure = Failure::none;
  std::string message;

  void fail(Failure kind, std::string msg) {
    if (failure != Failure::none) return;
    failure = kind;
    message = std::move(msg);
    XML_StopParser(parser, XML_FALSE);
  }
};

void XMLCALL on_start(void* user, const XML_Char* name, const XML_Char** attrs) {
  auto& ctx = *static_cast<ParseContext*>(user);
  if (ctx.failure != ParseContext::Failure::none) return;
  const auto kind = element_kind_from(name);
  if (!kind) {
    ctx.fail(ParseContext::Failure::schema, std::string("unknown element kind <") + name + ">");
    return;
  }
  const int parent = ctx.stack.empty() ? -1 : ctx.stack.back();
  if (parent < 0) {
    if (*kind != ElementKind::document || ctx.saw_root) {
      ctx.fail(ParseContext::Failure::schema, "root element must be <document>");
      return;
    }
    ctx.saw_root = true;
  } else if (*kind == ElementKind::document) {
    ctx.fail(ParseContext::Failure::schema, "nested <document>");
    return;
  }

  StructuralElement el;
  el.kind = *kind;
  el.parent = parent;
  el.level = parent < 0 ? 0 : ctx.nodes[static_cast<std::size_t>(parent)].level + 1;
  for (std::size_t i = 0; attrs[i] != nullptr; i += 2) {
    const std::string_view key = attrs[i];
    const std::string value = attrs[i + 1];
    if (key == "heading") {
      el.heading = collapse_ws(value);
    } else if (key == "citekey") {
      el.cite_key = collapse_ws(value);
    } else if (key == "abbreviation" && *kind == ElementKind::document) {
      el.abbreviation = collapse_ws(value);
    } else if (key == "appendix") {
      el.appendix = (value == "true" || value == "1");
    }
  }

  // Ancestry constraints.
  bool inside_seqitem = false;
  for (int k = parent; k >= 0; k = ctx.nodes[static_cast<std::size_t>(k)].parent)
    if (ctx.nodes[static_cast<std::size_t>(k)].kind == ElementKind::seqitem) inside_seqitem = true;
  if (*kind == ElementKind::subseqitem && !inside_seqitem) {
    ctx.fail(ParseContext::Failure::structure, "subseqitem outside of a seqitem");
    return;
  }
  if ((*kind == ElementKind::seqitem || *kind == ElementKind::item) && inside_seqitem) {
    ctx.fail(ParseContext::Failure::structure,
             std::string("<") + name + "> nested inside a seqitem");
    return;
  }
  if (*kind == ElementKind::seqitem) {
    if (!el.cite_key || el.cite_key->empty()) {
      ctx.fail(ParseContext::Failure::schema, "seqitem without citekey");
      return;
    }
    auto normalized = normalize_citekey(*el.cite_key);
    if (!ctx.seen_keys.insert(normalized).second) {
      ctx.fail(ParseContext::Failure::integrity, "duplicate cite key '" + *el.cite_key + "'");
      return;
    }
  }

  const int index = static_cast<int>(ctx.nodes.size());
  if (parent >= 0) {
    ctx.nodes[static_cast<std::size_t>(parent)].children.push_back(index);
    ctx.raw_text[static_cast<std::size_t>(parent)].push_back(' ');
  }
  ctx.nodes.push_back(std::move(el));
  ctx.raw_text.emplace_back();
  ctx.stack.push_back(index);
}

void XMLCALL on_end(void* user, const XML_Char*) {
  auto& ctx = *static_cast<ParseContext*>(user);
  if (ctx.failure != ParseContext::Failure::none) return;
  if (!ctx.stack.empty()) ctx.stack.pop_back();
}

void XMLCALL on_text(void* user, const XML_Char* s, int len) {
  auto& ctx = *static_cast<ParseContext*>(user);
  if (ctx.failure != ParseContext::Failure::none || ctx.stack.empty()) return;
  const std::string_view chunk(s, static_cast<std::size_t>(len));
  const int top = ctx.stack.back();
  const auto kind = ctx.nodes[static_cast<std::size_t>(top)].kind;
  if (kind != ElementKind::seqitem && kind != ElementKind::subseqitem) {
    if (!collapse_ws(chunk).empty())
      ctx.fail(ParseContext::Failure::schema,
               "text content inside <" + std::string(to_string(kind)) + ">");
    return;
  }
  ctx.raw_text[static_cast<std::size_t>(top)] += chunk;
}

}  // namespace

DocumentTree parse_document(std::string_view xml, std::string_view fallback_key) {
  ParseContext ctx;
  ctx.fallback_key = std::string(fallback_key);
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
      XML_ParserCreate("UTF-8"), &XML_ParserFree);
  if (!parser) throw Error("cannot allocate XML parser");
  ctx.parser = parser.get();
  XML_SetUserData(parser.get(), &ctx);
  XML_SetElementHandler(parser.get(), on_start, on_end);
  XML_SetCharacterDataHandler(parser.get(), on_text);

  const auto status =
      XML_Parse(parser.get(), xml.data(), static_cast<int>(xml.size()), XML_TRUE);
  switch (ctx.failure) {
    case ParseContext::Failure::schema: throw SchemaError(ctx.message);
    case ParseContext::Failure::structure: throw StructureError(ctx.message);
    case ParseContext::Failure::integrity: throw IntegrityError(ctx.message);
    case ParseContext::Failure::none: break;
  }
  if (status != XML_STATUS_OK) {
    const auto offset = XML_GetCurrentByteIndex(parser.get());
    throw ParseError(XML_ErrorString(XML_GetErrorCode(parser.get())),
                     offset < 0 ? xml.size() : static_cast<std::size_t>(offset));
  }
  if (ctx.nodes.empty()) throw SchemaError("no <document> element");

  for (std::size_t i = 0; i < ctx.nodes.size(); ++i) ctx.nodes[i].text = collapse_ws(ctx.raw_text[i]);
  std::string key = ctx.nodes.front().abbreviation.value_or(ctx.fallback_key);
  for (std::size_t i = 0; i < ctx.nodes.size(); ++i) ctx.nodes[i].id = key + ":" + std::to_string(i);
  return DocumentTree(std::move(key), std::move(ctx.nodes));
}

namespace {

void xml_escape(std::string& out, std::string_view s, bool attribute) {
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"':
        if (attribute) {
          out += "&quot;";
          break;
        }
        [[fallthrough]];
      default: out.push_back(c);
    }
  }
}

void write_element(const DocumentTree& tree, int i, std::string& out, std::string_view date = {}) {
  const auto& n = tree.node(i);
  out.append(static_cast<std::size_t>(n.level) * 2, ' ');
  out += '<';
  out += to_string(n.kind);
  const auto attr = [&](std::string_view name, std::string_view value) {
    out += ' ';
    out += name;
    out += "=\"";
    xml_escape(out, value, true);
    out += '"';
  };
  if (n.abbreviation) attr("abbreviation", *n.abbreviation);
  if (!date.empty()) attr("date", date);
  if (n.cite_key) attr("citekey", *n.cite_key);
  if (n.heading) attr("heading", *n.heading);
  if (n.appendix) attr("appendix", "true");
  if (n.children.empty() && n.text.empty()) {
    out += "/>\n";
    return;
  }
  out += '>';
  xml_escape(out, n.text, false);
  if (!n.children.empty()) {
    out += '\n';
    for (int c : n.children) write_element(tree, c, out);
    out.append(static_cast<std::size_t>(n.level) * 2, ' ');
  }
  out += "</";
  out += to_string(n.kind);
  out += ">\n";
}

}  // namespace

std::string serialize_document(const DocumentTree& tree, std::string_view date) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  if (tree.size() == 0) return out;
  write_element(tree, 0, out, date);
  return out;
}

// ---------------------------------------------------------------------------
// Snapshot

Snapshot::Snapshot(std::string collection_id, std::chrono::year_month_day date,
                   std::vector<DocumentTree> documents)
    : collection_id_(std::move(collection_id)), date_(date), documents_(std::move(documents)) {
  for (std::size_t d = 0; d < documents_.size(); ++d) {
    const auto& doc = documents_[d];
    if (!by_document_key_.emplace(doc.key(), static_cast<int>(d)).second)
      throw IntegrityError("duplicate document key '" + doc.key() + "'");
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const auto& n = doc.nodes()[i];
      const ElementRef ref{static_cast<int>(d), static_cast<int>(i)};
      if (!by_id_.emplace(n.id, ref).second)
        throw IntegrityError("duplicate element id '" + n.id + "'");
      if (n.kind == ElementKind::seqitem && n.cite_key) {
        if (!citekey_index_.emplace(qualified_key(doc.key(), *n.cite_key), ref).second)
          throw IntegrityError("duplicate cite key '" + *n.cite_key + "' in " + doc.key());
      }
    }
  }
}

std::optional<ElementRef> Snapshot::find_key(std::string_view qualified) const {
  const auto it = citekey_index_.find(std::string(qualified));
  if (it == citekey_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<ElementRef> Snapshot::find_id(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> Snapshot::find_document(std::string_view key) const {
  const auto it = by_document_key_.find(key);
  if (it == by_document_key_.end()) return std::nullopt;
  return it->second;
}

std::chrono::year_month_day parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 1, d = 1;
  char sep1 = 0, sep2 = 0;
  std::istringstream in{std::string(text)};
  in >> y;
  if (!in) throw ConfigError("invalid date '" + std::string(text) + "'");
  if (in >> sep1) {
    in >> m >> sep2 >> d;
    if (!in || sep1 != '-' || sep2 != '-') throw ConfigError("invalid date '" + std::string(text) + "'");
  }
  const std::chrono::year_month_day date{std::chrono::year{y}, std::chrono::month{m},
                                         std::chrono::day{d}};
  if (!date.ok()) throw ConfigError("invalid date '" + std::string(text) + "'");
  return date;
}

std::string format_date(std::chrono::year_month_day date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

Snapshot load_snapshot(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw ConfigError("cannot open manifest " + manifest.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest " + manifest.string() + ": " + e.what());
  }
  if (!j.contains("collection_id") || !j.contains("date") || !j.contains("documents"))
    throw ConfigError("manifest " + manifest.string() +
                      " needs collection_id, date and documents");
  std::vector<DocumentTree> docs;
  for (const auto& entry : j.at("documents")) {
    const auto path = manifest.parent_path() / entry.get<std::string>();
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open document " + path.string());
    std::ostringstream buf;
    buf << f.rdbuf();
    try {
      docs.push_back(parse_document(buf.str(), path.stem().string()));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what(), e.byte_offset());
    }
  }
  return Snapshot(j.at("collection_id").get<std::string>(),
                  parse_date(j.at("date").get<std::string>()), std::move(docs));
}

std::size_t SnapshotStats::require_references() const {
  if (!references) throw StateError("references requested before resolution");
  return *references;
}

SnapshotStats snapshot_stats(const Snapshot& snapshot) {
  SnapshotStats stats;
  for (const auto& doc : snapshot.documents()) {
    stats.structures += doc.size();
    for (std::size_t i = 0; i < doc.size(); ++i)
      if (!doc.excluded(static_cast<int>(i))) stats.tokens += count_tokens(doc.nodes()[i].text);
  }
  return stats;
}

SnapshotStats snapshot_stats(const Snapshot& snapshot, std::size_t resolved_references) {
  auto stats = snapshot_stats(snapshot);
  stats.references = resolved_references;
  return stats;
}

std::vector<std::pair<std::string, std::string>> key_order_violations(const Snapshot& snapshot) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& doc : snapshot.documents()) {
    const auto seq = doc.seqitems();
    for (std::size_t k = 1; k < seq.size(); ++k) {
      const auto& a = *doc.node(seq[k - 1]).cite_key;
      const auto& b = *doc.node(seq[k]).cite_key;
      if (compare_citekeys(normalize_citekey(a), normalize_citekey(b)) >= 0)
        out.emplace_back(qualified_key(doc.key(), a), qualified_key(doc.key(), b));
    }
  }
  return out;
}

}  // namespace legisnet
