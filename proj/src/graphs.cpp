#include "legisnet/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "legisnet/error.hpp"

namespace legisnet {

std::string_view to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::hierarchy: return "hierarchy";
    case GraphKind::reference: return "reference";
    case GraphKind::sequence: return "sequence";
    case GraphKind::subsequence: return "subsequence";
    case GraphKind::quotient: return "quotient";
  }
  return "?";
}

std::string_view to_string(EdgeType type) {
  switch (type) {
    case EdgeType::containment: return "containment";
    case EdgeType::reference: return "reference";
    case EdgeType::sequence: return "sequence";
  }
  return "?";
}

int LegalGraph::add_node(GraphNode node) {
  const int i = static_cast<int>(nodes.size());
  if (!index_.emplace(node.id, i).second) throw IntegrityError("duplicate graph node id " + node.id);
  for (const auto& m : node.members) element_index_.emplace(m, i);
  nodes.push_back(std::move(node));
  return i;
}

int LegalGraph::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  return it == index_.end() ? -1 : it->second;
}

int LegalGraph::node_of_element(std::string_view element_id) const {
  const auto it = element_index_.find(std::string(element_id));
  return it == element_index_.end() ? -1 : it->second;
}

std::size_t LegalGraph::total_multiplicity(std::optional<EdgeType> type) const {
  std::size_t n = 0;
  for (const auto& a : arcs)
    if (!type || a.type == *type) n += a.multiplicity;
  return n;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Arcs keyed by (source, target, type) in insertion order.
class ArcAccumulator {
 public:
  void add(int s, int t, EdgeType type, double weight, std::size_t mult) {
    const auto key = std::make_tuple(s, t, static_cast<int>(type));
    const auto it = slot_.find(key);
    if (it == slot_.end()) {
      slot_.emplace(key, arcs_.size());
      arcs_.push_back({s, t, type, weight, mult});
    } else {
      auto& a = arcs_[it->second];
      const double total = a.weight * static_cast<double>(a.multiplicity) + weight * static_cast<double>(mult);
      a.multiplicity += mult;
      a.weight = total / static_cast<double>(a.multiplicity);
    }
  }
  std::vector<GraphArc> take() { return std::move(arcs_); }

 private:
  std::map<std::tuple<int, int, int>, std::size_t> slot_;
  std::vector<GraphArc> arcs_;
};

}  // namespace

LegalGraph build_hierarchy(const Snapshot& snapshot) {
  LegalGraph g;
  g.kind = GraphKind::hierarchy;
  GraphNode meta;
  meta.id = snapshot.collection_id() + ":meta";
  meta.kind = "meta";
  meta.level = -1;
  meta.label = snapshot.collection_id();
  const int root = g.add_node(std::move(meta));
  std::size_t total = 0;
  for (const auto& doc : snapshot.documents()) {
    const int base = static_cast<int>(g.nodes.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const auto& el = doc.node(static_cast<int>(i));
      GraphNode n;
      n.id = el.id;
      n.kind = std::string(to_string(el.kind));
      n.level = el.level;
      if (el.cite_key) n.citekey = qualified_key(doc.key(), *el.cite_key);
      n.tokens = doc.subtree_tokens(static_cast<int>(i));
      n.members = {el.id};
      n.label = el.heading ? *el.heading : el.id;
      g.add_node(std::move(n));
      if (el.parent >= 0) g.arcs.push_back({base + el.parent, base + static_cast<int>(i), EdgeType::containment, 1.0, 1});
      else g.arcs.push_back({root, base, EdgeType::containment, 1.0, 1});
    }
    total += doc.subtree_tokens(0);
  }
  g.nodes[static_cast<std::size_t>(root)].tokens = total;
  return g;
}

LegalGraph build_reference(const LegalGraph& hierarchy, const std::vector<ResolvedReference>& refs) {
  LegalGraph g = hierarchy;
  g.kind = GraphKind::reference;
  ArcAccumulator acc;
  for (const auto& r : refs) {
    const int s = g.find(r.source_id);
    const int t = g.find(r.target_id);
    if (s < 0 || t < 0) throw IntegrityError("reference endpoint not in graph: " + (s < 0 ? r.source_id : r.target_id));
    if (g.nodes[static_cast<std::size_t>(s)].kind != "seqitem" || g.nodes[static_cast<std::size_t>(t)].kind != "seqitem")
      throw IntegrityError("reference endpoint is not a seqitem: " + r.source_id + " -> " + r.target_id);
    acc.add(s, t, EdgeType::reference, 1.0, 1);
  }
  for (auto& a : acc.take()) g.arcs.push_back(a);
  g.references = refs;
  return g;
}

MergeCondition MergeCondition::parse(std::string_view spec) {
  MergeCondition m;
  m.name_ = std::string(spec);
  const auto icase = std::regex::ECMAScript | std::regex::icase;
  if (spec == "none") {
    m.mode_ = Mode::none;
  } else if (spec == "chapter-or-title") {
    m.mode_ = Mode::heading;
    m.heading_ = std::regex(R"(^\s*chapter\b)", icase);
  } else if (spec == "book-or-law") {
    m.mode_ = Mode::heading;
    m.heading_ = std::regex(R"(^\s*(?:buch|book)\b)", icase);
  } else if (spec.starts_with("level:")) {
    m.mode_ = Mode::level;
    try {
      m.level_ = std::stoi(std::string(spec.substr(6)));
    } catch (const std::exception&) {
      throw ConfigError("bad merge level in '" + std::string(spec) + "'");
    }
    if (m.level_ < 0) throw ConfigError("merge level must be non-negative");
  } else if (spec.starts_with("heading:")) {
    m.mode_ = Mode::heading;
    try {
      m.heading_ = std::regex(std::string(spec.substr(8)), icase);
    } catch (const std::regex_error& e) {
      throw ConfigError("bad merge heading regex: " + std::string(e.what()));
    }
  } else {
    throw ConfigError("unknown merge condition '" + std::string(spec) + "'");
  }
  return m;
}

int MergeCondition::group_node(const DocumentTree& doc, int seqitem) const {
  switch (mode_) {
    case Mode::none:
      return seqitem;
    case Mode::level: {
      int i = seqitem;
      while (doc.node(i).level > level_) i = doc.node(i).parent;
      return i;
    }
    case Mode::heading: {
      for (int i = doc.node(seqitem).parent; i > 0; i = doc.node(i).parent) {
        const auto& h = doc.node(i).heading;
        if (h && std::regex_search(*h, heading_)) return i;
      }
      return 0;
    }
  }
  return seqitem;
}

std::optional<std::string> MergeCondition::group_of(const Snapshot& snapshot, ElementRef seqitem) const {
  if (mode_ == Mode::none) return std::nullopt;
  const auto& doc = snapshot.document(seqitem.document);
  return doc.node(group_node(doc, seqitem.node)).id;
}

WeightFunction WeightFunction::decay() {
  return {[](int d) { return std::pow(2.0, -(static_cast<double>(d) - 2.0) / 2.0); }, "2^(-(d-2)/2)"};
}

namespace {

// One unit of the sequence: a seqitem, or a subseqitem standing in for it.
struct Unit {
  int doc = 0;
  int node = 0;     // element index in the document
  int seqitem = 0;  // enclosing seqitem index
  std::string text;
  std::size_t tokens = 0;
};

std::vector<int> seqitems_in_key_order(const DocumentTree& doc) {
  auto s = doc.seqitems();
  std::stable_sort(s.begin(), s.end(), [&](int a, int b) {
    return compare_citekeys(*doc.node(a).cite_key, *doc.node(b).cite_key) < 0;
  });
  return s;
}

std::size_t own_tokens(const DocumentTree& doc, int i) {
  return doc.excluded(i) ? 0 : count_tokens(doc.node(i).text);
}

std::vector<Unit> sequence_units(const Snapshot& snapshot, bool split) {
  std::vector<Unit> units;
  for (int d = 0; d < static_cast<int>(snapshot.documents().size()); ++d) {
    const auto& doc = snapshot.document(d);
    for (int s : seqitems_in_key_order(doc)) {
      std::vector<int> subs;
      if (split)
        for (int c : doc.node(s).children)
          if (doc.node(c).kind == ElementKind::subseqitem) subs.push_back(c);
      if (subs.empty()) {
        units.push_back({d, s, s, doc.subtree_text(s), doc.subtree_tokens(s)});
        continue;
      }
      // The seqitem's own text (its lead-in) travels with the first child.
      for (std::size_t k = 0; k < subs.size(); ++k) {
        Unit u{d, subs[k], s, doc.subtree_text(subs[k]), doc.subtree_tokens(subs[k])};
        if (k == 0 && !doc.node(s).text.empty()) {
          u.text = u.text.empty() ? doc.node(s).text : doc.node(s).text + " " + u.text;
          u.tokens += own_tokens(doc, s);
        }
        units.push_back(std::move(u));
      }
    }
  }
  return units;
}

int hierarchy_distance(const Snapshot& snapshot, const Unit& a, const Unit& b) {
  if (a.doc == b.doc) return snapshot.document(a.doc).distance(a.node, b.node);
  // Paths meet at the meta root one level above the document roots.
  return snapshot.document(a.doc).node(a.node).level + snapshot.document(b.doc).node(b.node).level + 2;
}

double checked_weight(const WeightFunction& w, int d) {
  const double v = w(d);
  if (!(v > 0.0) || !std::isfinite(v))
    throw ParameterError("weight function must be positive; w(" + std::to_string(d) + ") = " + format_double(v));
  return v;
}

LegalGraph build_sequence_like(const Snapshot& snapshot, const LegalGraph& reference,
                               const SequenceParams& params, bool split) {
  if (!(params.alpha > 0.0) || params.alpha > 1.0)
    throw ParameterError("alpha must lie in (0, 1], got " + format_double(params.alpha));
  const double ref_weight = params.alpha * checked_weight(params.w, 2);

  const auto units = sequence_units(snapshot, split);
  LegalGraph g;
  g.kind = split ? GraphKind::subsequence : GraphKind::sequence;
  g.parameters = {{"rho", params.rho.name()}, {"w", params.w.name}, {"alpha", format_double(params.alpha)}};

  // Runs of adjacent units in the same merge group become one node.
  std::vector<int> unit_node(units.size(), -1);
  std::vector<std::pair<std::size_t, std::size_t>> runs;  // [first, last] unit
  std::map<std::string, int> group_uses;
  for (std::size_t i = 0; i < units.size();) {
    const auto& doc = snapshot.document(units[i].doc);
    const int group = params.rho.group_node(doc, units[i].seqitem);
    std::size_t j = i + 1;
    if (params.rho.merges())
      while (j < units.size() && units[j].doc == units[i].doc &&
             params.rho.group_node(doc, units[j].seqitem) == group)
        ++j;
    const int node_index = static_cast<int>(g.nodes.size());
    GraphNode n;
    const bool merged = params.rho.merges() && group != units[i].node;
    const auto& anchor = doc.node(merged ? group : units[i].node);
    n.id = anchor.id;
    if (merged) {
      const int use = ++group_uses[anchor.id];
      if (use > 1) n.id += "~" + std::to_string(use);
    }
    n.kind = merged ? "merged" : std::string(to_string(anchor.kind));
    n.level = anchor.level;
    n.label = merged ? doc.path(group) : doc.path(units[i].node);
    std::vector<std::string> texts;
    for (std::size_t k = i; k < j; ++k) {
      const auto& u = units[k];
      const auto& el = doc.node(u.node);
      n.members.push_back(el.id);
      const auto& sid = doc.node(u.seqitem).id;
      if (n.seqitems.empty() || n.seqitems.back() != sid) n.seqitems.push_back(sid);
      n.tokens += u.tokens;
      if (!u.text.empty()) texts.push_back(u.text);
      unit_node[k] = node_index;
    }
    for (std::size_t k = 0; k < texts.size(); ++k) n.text += (k ? " " : "") + texts[k];
    if (!merged) {
      const auto& seq = doc.node(units[i].seqitem);
      n.citekey = qualified_key(doc.key(), *seq.cite_key);
      if (units[i].node != units[i].seqitem) {
        std::size_t ordinal = 1;
        for (std::size_t k = i; k > 0 && units[k - 1].doc == units[i].doc && units[k - 1].seqitem == units[i].seqitem; --k)
          ++ordinal;
        n.citekey += "#" + std::to_string(ordinal);
      }
    }
    g.add_node(std::move(n));
    runs.emplace_back(i, j - 1);
    i = j;
  }

  // Seqitem (and lead-in) aliases so references can be projected.
  std::unordered_map<std::string, int> seqitem_node;
  std::unordered_map<std::string, int> unit_of_element;
  for (std::size_t k = 0; k < units.size(); ++k) {
    const auto& doc = snapshot.document(units[k].doc);
    seqitem_node.emplace(doc.node(units[k].seqitem).id, unit_node[k]);
    unit_of_element.emplace(doc.node(units[k].node).id, unit_node[k]);
  }
  const auto origin_node = [&](const std::string& origin, const std::string& source) {
    const auto ref = snapshot.find_id(origin);
    if (ref) {
      const auto& doc = snapshot.document(ref->document);
      for (int i = ref->node; i >= 0; i = doc.node(i).parent) {
        const auto it = unit_of_element.find(doc.node(i).id);
        if (it != unit_of_element.end()) return it->second;
        if (doc.node(i).kind == ElementKind::seqitem) break;
      }
    }
    const auto it = seqitem_node.find(source);
    if (it == seqitem_node.end()) throw IntegrityError("reference source is not a seqitem: " + source);
    return it->second;
  };

  ArcAccumulator acc;
  for (std::size_t r = 0; r + 1 < runs.size(); ++r) {
    const int d = hierarchy_distance(snapshot, units[runs[r].second], units[runs[r + 1].first]);
    const double w = checked_weight(params.w, d);
    const int a = unit_node[runs[r].second];
    const int b = unit_node[runs[r + 1].first];
    acc.add(a, b, EdgeType::sequence, w, 1);
    acc.add(b, a, EdgeType::sequence, w, 1);
  }
  for (const auto& ref : reference.references) {
    const int s = origin_node(ref.origin_id, ref.source_id);
    const auto t = seqitem_node.find(ref.target_id);
    if (t == seqitem_node.end()) throw IntegrityError("reference target is not a seqitem: " + ref.target_id);
    acc.add(s, t->second, EdgeType::reference, ref_weight, 1);
  }
  g.arcs = acc.take();
  g.references = reference.references;
  return g;
}

}  // namespace

LegalGraph build_sequence(const Snapshot& snapshot, const LegalGraph& reference, const SequenceParams& params) {
  return build_sequence_like(snapshot, reference, params, false);
}

LegalGraph build_subsequence(const Snapshot& snapshot, const LegalGraph& reference,
                             const SequenceParams& params) {
  return build_sequence_like(snapshot, reference, params, true);
}

LegalGraph quotient(const LegalGraph& graph, const NodeSelector& selector, std::optional<EdgeType> only) {
  LegalGraph q;
  q.kind = GraphKind::quotient;
  q.parameters = graph.parameters;
  q.parameters["quotient_of"] = std::string(to_string(graph.kind));
  std::vector<int> cls(graph.nodes.size());
  std::unordered_map<std::string, int> class_of;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& n = graph.nodes[i];
    const auto value = selector(n);
    if (!value) throw MappingError("selector undefined for node " + n.id);
    auto it = class_of.find(*value);
    if (it == class_of.end()) {
      GraphNode c;
      c.id = *value;
      c.kind = "class";
      c.level = n.level;
      c.citekey = n.citekey;
      c.label = *value;
      it = class_of.emplace(*value, static_cast<int>(q.nodes.size())).first;
      q.nodes.push_back(std::move(c));
    }
    auto& c = q.nodes[static_cast<std::size_t>(it->second)];
    c.members.push_back(n.id);
    c.tokens += n.tokens;
    c.seqitems.insert(c.seqitems.end(), n.seqitems.begin(), n.seqitems.end());
    if (!n.text.empty()) c.text += (c.text.empty() ? "" : " ") + n.text;
    cls[i] = it->second;
  }
  // Rebuild through add_node so lookups work.
  auto nodes = std::move(q.nodes);
  q.nodes.clear();
  for (auto& n : nodes) q.add_node(std::move(n));

  // One arc per class pair; the type is the strongest contributing kind.
  struct Agg {
    double weight = 0;
    std::size_t mult = 0;
    int type = 0;
  };
  std::map<std::pair<int, int>, Agg> agg;
  std::vector<std::pair<int, int>> order;
  for (const auto& a : graph.arcs) {
    if (only && a.type != *only) continue;
    const std::pair<int, int> key{cls[static_cast<std::size_t>(a.source)], cls[static_cast<std::size_t>(a.target)]};
    auto [it, fresh] = agg.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.weight += a.weight * static_cast<double>(a.multiplicity);
    it->second.mult += a.multiplicity;
    const int rank = a.type == EdgeType::reference ? 2 : a.type == EdgeType::sequence ? 1 : 0;
    it->second.type = std::max(it->second.type, rank);
  }
  for (const auto& key : order) {
    const auto& v = agg.at(key);
    const EdgeType type = v.type == 2 ? EdgeType::reference : v.type == 1 ? EdgeType::sequence : EdgeType::containment;
    q.arcs.push_back({key.first, key.second, type, v.weight / static_cast<double>(v.mult), v.mult});
  }
  return q;
}

NodeSelector group_selector(const Snapshot& snapshot, const MergeCondition& rho) {
  return [&snapshot, rho](const GraphNode& n) -> std::optional<std::string> {
    if (n.seqitems.empty()) return std::nullopt;
    const auto ref = snapshot.find_id(n.seqitems.front());
    if (!ref) return std::nullopt;
    const auto& doc = snapshot.document(ref->document);
    return doc.node(rho.group_node(doc, ref->node)).id;
  };
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string to_graphml(const LegalGraph& graph) {
  std::string x;
  x += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  x += "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n";
  x += "  <key id=\"kind\" for=\"node\" attr.name=\"kind\" attr.type=\"string\"/>\n";
  x += "  <key id=\"level\" for=\"node\" attr.name=\"level\" attr.type=\"int\"/>\n";
  x += "  <key id=\"citekey\" for=\"node\" attr.name=\"citekey\" attr.type=\"string\"/>\n";
  x += "  <key id=\"tokens\" for=\"node\" attr.name=\"tokens\" attr.type=\"long\"/>\n";
  x += "  <key id=\"edge_type\" for=\"edge\" attr.name=\"edge_type\" attr.type=\"string\"/>\n";
  x += "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n";
  x += "  <key id=\"multiplicity\" for=\"edge\" attr.name=\"multiplicity\" attr.type=\"long\"/>\n";
  x += "  <graph id=\"" + std::string(to_string(graph.kind)) + "\" edgedefault=\"directed\">\n";
  for (const auto& n : graph.nodes) {
    x += "    <node id=\"" + xml_escape(n.id) + "\">";
    x += "<data key=\"kind\">" + xml_escape(n.kind) + "</data>";
    x += "<data key=\"level\">" + std::to_string(n.level) + "</data>";
    x += "<data key=\"citekey\">" + xml_escape(n.citekey) + "</data>";
    x += "<data key=\"tokens\">" + std::to_string(n.tokens) + "</data>";
    x += "</node>\n";
  }
  for (const auto& a : graph.arcs) {
    x += "    <edge source=\"" + xml_escape(graph.nodes[static_cast<std::size_t>(a.source)].id) + "\" target=\"" +
         xml_escape(graph.nodes[static_cast<std::size_t>(a.target)].id) + "\">";
    x += "<data key=\"edge_type\">" + std::string(to_string(a.type)) + "</data>";
    x += "<data key=\"weight\">" + format_double(a.weight) + "</data>";
    x += "<data key=\"multiplicity\">" + std::to_string(a.multiplicity) + "</data>";
    x += "</edge>\n";
  }
  x += "  </graph>\n</graphml>\n";
  return x;
}

}  // namespace legisnet
