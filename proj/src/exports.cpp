#include "legisnet/exports.hpp"

#include <algorithm>
#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/fruchterman_reingold.hpp>
#include <boost/graph/random_layout.hpp>
#include <boost/graph/topology.hpp>
#include <boost/random/linear_congruential.hpp>
#include <cmath>
#include <cstdio>
#include <set>

#include "legisnet/error.hpp"

namespace legisnet {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string esc(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

const std::vector<std::string>& family_palette() {
  static const std::vector<std::string> p = {
      "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#393b79",
      "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2", "#9edae5", "#dbdb8d", "#637939"};
  return p;
}

AlluvialData alluvial_export(const ClusterGraph& graph, const std::vector<ClusterFamily>& families,
                             const AlluvialParams& params) {
  AlluvialData out;
  out.params = params;
  out.years = graph.years();
  std::vector<int> family_of(graph.nodes.size(), -1);
  for (const auto& f : families)
    for (int m : f.members) family_of[static_cast<std::size_t>(m)] = f.index;

  // Block index of each cluster node.
  std::vector<int> block_of(graph.nodes.size(), -1);
  std::map<int, std::size_t> year_total;
  std::size_t widest = 0;
  for (const auto& n : graph.nodes) year_total[n.year] += n.tokens;
  for (const auto& [y, t] : year_total) widest = std::max(widest, t);
  const double scale = widest == 0 ? 0.0 : 1.0 / static_cast<double>(widest);

  for (int year : out.years) {
    std::vector<int> members;
    for (std::size_t i = 0; i < graph.nodes.size(); ++i)
      if (graph.nodes[i].year == year) members.push_back(static_cast<int>(i));
    std::stable_sort(members.begin(), members.end(), [&](int a, int b) {
      const auto& x = graph.nodes[static_cast<std::size_t>(a)];
      const auto& y = graph.nodes[static_cast<std::size_t>(b)];
      return x.tokens != y.tokens ? x.tokens > y.tokens : x.cluster < y.cluster;
    });
    double x = 0;
    std::size_t greys = 0;
    std::optional<AlluvialBlock> misc;
    for (std::size_t r = 0; r < members.size(); ++r) {
      const auto& n = graph.nodes[static_cast<std::size_t>(members[r])];
      if (r >= params.top_n) {
        if (!misc) {
          misc = AlluvialBlock{std::to_string(year) + ":misc", year, -1, 0, -1, "misc"};
        }
        misc->tokens += n.tokens;
        block_of[static_cast<std::size_t>(members[r])] = -2;
        continue;
      }
      AlluvialBlock b;
      b.id = n.id();
      b.year = year;
      b.cluster = n.cluster;
      b.tokens = n.tokens;
      b.family = family_of[static_cast<std::size_t>(members[r])];
      if (b.family >= 0 && static_cast<std::size_t>(b.family) < params.top_families) b.role = "family";
      else b.role = greys++ % 2 ? "grey-b" : "grey-a";
      b.x0 = x;
      x += static_cast<double>(n.tokens) * scale;
      b.x1 = x;
      block_of[static_cast<std::size_t>(members[r])] = static_cast<int>(out.blocks.size());
      out.blocks.push_back(std::move(b));
    }
    if (misc) {
      misc->x0 = x;
      misc->x1 = x + static_cast<double>(misc->tokens) * scale;
      const int idx = static_cast<int>(out.blocks.size());
      for (auto& b : block_of)
        if (b == -2) b = idx;
      out.blocks.push_back(std::move(*misc));
    }
  }

  std::map<std::pair<int, int>, std::size_t> merged;
  for (const auto& a : graph.arcs) {
    const auto& s = graph.nodes[static_cast<std::size_t>(a.source)];
    const auto& t = graph.nodes[static_cast<std::size_t>(a.target)];
    if (s.tokens == 0 || t.tokens == 0 || chi(a.weight, s.tokens, t.tokens) < params.flow_threshold) continue;
    merged[{block_of[static_cast<std::size_t>(a.source)], block_of[static_cast<std::size_t>(a.target)]}] += a.weight;
  }
  // Band offsets: outgoing bands in target order, incoming in source order.
  // Weights count tokens in the later year, so a block's bands can exceed it
  // when its text grew; such bands are narrowed to fit.
  std::vector<double> out_used(out.blocks.size(), 0), in_used(out.blocks.size(), 0);
  std::vector<std::size_t> out_sum(out.blocks.size(), 0), in_sum(out.blocks.size(), 0);
  for (const auto& [k, w] : merged) {
    out.splines.push_back({k.first, k.second, w});
    out_sum[static_cast<std::size_t>(k.first)] += w;
    in_sum[static_cast<std::size_t>(k.second)] += w;
  }
  const auto fit = [&](const std::vector<std::size_t>& sum, int block) {
    const auto b = static_cast<std::size_t>(block);
    return sum[b] > out.blocks[b].tokens ? static_cast<double>(out.blocks[b].tokens) / static_cast<double>(sum[b]) : 1.0;
  };
  for (auto& sp : out.splines) {
    const double width = static_cast<double>(sp.tokens) * scale * fit(out_sum, sp.source);
    const auto& s = out.blocks[static_cast<std::size_t>(sp.source)];
    sp.source_x0 = s.x0 + out_used[static_cast<std::size_t>(sp.source)];
    sp.source_x1 = sp.source_x0 + width;
    out_used[static_cast<std::size_t>(sp.source)] += width;
  }
  std::vector<std::size_t> by_target(out.splines.size());
  for (std::size_t i = 0; i < by_target.size(); ++i) by_target[i] = i;
  std::stable_sort(by_target.begin(), by_target.end(), [&](std::size_t a, std::size_t b) {
    return std::pair(out.splines[a].target, out.splines[a].source) < std::pair(out.splines[b].target, out.splines[b].source);
  });
  for (std::size_t i : by_target) {
    auto& sp = out.splines[i];
    const double width = static_cast<double>(sp.tokens) * scale * fit(in_sum, sp.target);
    const auto& t = out.blocks[static_cast<std::size_t>(sp.target)];
    sp.target_x0 = t.x0 + in_used[static_cast<std::size_t>(sp.target)];
    sp.target_x1 = sp.target_x0 + width;
    in_used[static_cast<std::size_t>(sp.target)] += width;
  }
  return out;
}

nlohmann::json AlluvialData::to_json() const {
  nlohmann::json blocks_j = nlohmann::json::array(), splines_j = nlohmann::json::array();
  for (const auto& b : blocks)
    blocks_j.push_back({{"id", b.id},
                        {"year", b.year},
                        {"cluster", b.cluster >= 0 ? nlohmann::json(b.cluster) : nlohmann::json(nullptr)},
                        {"tokens", b.tokens},
                        {"family", b.family >= 0 ? nlohmann::json(b.family) : nlohmann::json(nullptr)},
                        {"role", b.role},
                        {"x0", b.x0},
                        {"x1", b.x1}});
  for (const auto& s : splines)
    splines_j.push_back({{"source", blocks[static_cast<std::size_t>(s.source)].id},
                         {"target", blocks[static_cast<std::size_t>(s.target)].id},
                         {"tokens", s.tokens},
                         {"source_x", {s.source_x0, s.source_x1}},
                         {"target_x", {s.target_x0, s.target_x1}}});
  return {{"years", years},
          {"top_n", params.top_n},
          {"top_families", params.top_families},
          {"flow_threshold", params.flow_threshold},
          {"blocks", blocks_j},
          {"splines", splines_j}};
}

std::string AlluvialData::to_svg() const {
  constexpr double width = 1000, margin = 60, row = 40, bar = 10;
  const auto row_of = [&](int year) {
    return static_cast<double>(std::find(years.begin(), years.end(), year) - years.begin());
  };
  const auto colour = [&](const AlluvialBlock& b) -> std::string {
    if (b.role == "family") return family_palette()[static_cast<std::size_t>(b.family) % family_palette().size()];
    if (b.role == "grey-a") return "#8c8c8c";
    if (b.role == "grey-b") return "#b4b4b4";
    return "#dcdcdc";
  };
  const double height = 2 * 20 + row * static_cast<double>(years.size());
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width + margin + 10) + "\" height=\"" +
                  num(height) + "\">\n";
  for (const auto& sp : splines) {
    const auto& a = blocks[static_cast<std::size_t>(sp.source)];
    const auto& b = blocks[static_cast<std::size_t>(sp.target)];
    const double y0 = 20 + row * row_of(a.year) + bar, y1 = 20 + row * row_of(b.year), ym = (y0 + y1) / 2;
    const double sx0 = margin + sp.source_x0 * width, sx1 = margin + sp.source_x1 * width;
    const double tx0 = margin + sp.target_x0 * width, tx1 = margin + sp.target_x1 * width;
    s += "  <path d=\"M" + num(sx0) + "," + num(y0) + " C" + num(sx0) + "," + num(ym) + " " + num(tx0) + "," + num(ym) +
         " " + num(tx0) + "," + num(y1) + " L" + num(tx1) + "," + num(y1) + " C" + num(tx1) + "," + num(ym) + " " +
         num(sx1) + "," + num(ym) + " " + num(sx1) + "," + num(y0) + " Z\" fill=\"" + colour(a) +
         "\" fill-opacity=\"0.35\"/>\n";
  }
  for (int y : years)
    s += "  <text x=\"4\" y=\"" + num(20 + row * row_of(y) + bar) + "\" font-size=\"10\">" + std::to_string(y) +
         "</text>\n";
  for (const auto& b : blocks)
    s += "  <rect x=\"" + num(margin + b.x0 * width) + "\" y=\"" + num(20 + row * row_of(b.year)) + "\" width=\"" +
         num((b.x1 - b.x0) * width) + "\" height=\"" + num(bar) + "\" fill=\"" + colour(b) + "\"><title>" + esc(b.id) +
         " (" + std::to_string(b.tokens) + " tokens)</title></rect>\n";
  return s + "</svg>\n";
}

namespace {

using LayoutGraph = boost::adjacency_list<boost::vecS, boost::vecS, boost::undirectedS>;
using Topology = boost::rectangle_topology<boost::minstd_rand>;

struct Attractive {
  double k;
  template <typename E, typename G>
  double operator()(E, double, double d, const G&) const {
    return d * d / k;
  }
};

struct Repulsive {
  double k;
  template <typename V, typename G>
  double operator()(V, V, double, double d, const G&) const {
    return k * k / d;
  }
};

}  // namespace

std::vector<Point> fr_layout(std::size_t n, const std::vector<std::pair<int, int>>& edges, double k,
                             std::uint64_t seed, int iterations) {
  if (n == 0) return {};
  if (n == 1) return {Point{}};
  if (!(k > 0) || iterations < 1) throw ParameterError("fr_layout: k and iterations must be positive");
  LayoutGraph g(n);
  std::set<std::pair<int, int>> seen;
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n || static_cast<std::size_t>(b) >= n)
      throw ParameterError("fr_layout: edge endpoint out of range");
    if (a == b || !seen.insert(std::minmax(a, b)).second) continue;
    boost::add_edge(static_cast<std::size_t>(a), static_cast<std::size_t>(b), g);
  }
  const double side = k * std::max(4.0, 3.0 * std::sqrt(static_cast<double>(n)));
  boost::minstd_rand gen(static_cast<std::uint32_t>(seed % 2147483646u + 1u));
  Topology topology(gen, -side / 2, -side / 2, side / 2, side / 2);
  std::vector<Topology::point_type> pos(n);
  auto map = boost::make_iterator_property_map(pos.begin(), boost::get(boost::vertex_index, g));
  boost::random_graph_layout(g, map, topology);
  boost::fruchterman_reingold_force_directed_layout(
      g, map, topology,
      boost::attractive_force(Attractive{k})
          .repulsive_force(Repulsive{k})
          .force_pairs(boost::all_force_pairs())
          .cooling(boost::linear_cooling<double>(static_cast<std::size_t>(iterations), side / 10)));
  std::vector<Point> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {pos[i][0], pos[i][1]};
  return out;
}

QuotientViz quotient_viz_export(const LegalGraph& quotient, const std::map<std::string, int>& cluster_of,
                                const QuotientVizParams& params) {
  QuotientViz viz;
  std::vector<std::set<int>> in(quotient.nodes.size()), out(quotient.nodes.size());
  for (const auto& a : quotient.arcs) {
    if (a.source == a.target) continue;
    out[static_cast<std::size_t>(a.source)].insert(a.target);
    in[static_cast<std::size_t>(a.target)].insert(a.source);
  }
  std::vector<int> drawn(quotient.nodes.size(), -1);
  std::size_t max_tokens = 0;
  for (std::size_t i = 0; i < quotient.nodes.size(); ++i) {
    const auto& q = quotient.nodes[i];
    if (q.tokens < params.min_tokens) continue;
    QuotientVizNode v;
    v.id = q.id;
    v.label = q.label.empty() ? q.id : q.label;
    v.tokens = q.tokens;
    v.degree = in[i].size() + out[i].size();
    v.labelled = v.degree >= params.degree_label_threshold;
    // Majority cluster by member count; members of a class are nodes of the
    // clustered graph or finer.
    std::map<int, std::size_t> votes;
    for (const auto& m : q.members)
      if (auto it = cluster_of.find(m); it != cluster_of.end()) ++votes[it->second];
    std::size_t best = 0;
    for (const auto& [c, n] : votes)
      if (n > best) best = n, v.cluster = c;
    drawn[i] = static_cast<int>(viz.nodes.size());
    max_tokens = std::max(max_tokens, q.tokens);
    viz.nodes.push_back(std::move(v));
  }
  std::vector<std::pair<int, int>> layout_edges;
  for (const auto& a : quotient.arcs) {
    const int s = drawn[static_cast<std::size_t>(a.source)], t = drawn[static_cast<std::size_t>(a.target)];
    if (s < 0 || t < 0 || s == t) continue;
    viz.edges.push_back({s, t, a.multiplicity, 1.0});
    layout_edges.emplace_back(s, t);
  }
  if (!viz.edges.empty()) {
    const auto [lo, hi] = std::minmax_element(viz.edges.begin(), viz.edges.end(), [](const auto& a, const auto& b) {
      return a.multiplicity < b.multiplicity;
    });
    const double mn = static_cast<double>(lo->multiplicity), mx = static_cast<double>(hi->multiplicity);
    for (auto& e : viz.edges)
      e.opacity = mx > mn ? 0.15 + 0.85 * (static_cast<double>(e.multiplicity) - mn) / (mx - mn) : 1.0;
  }
  const auto pos = fr_layout(viz.nodes.size(), layout_edges, params.k, params.seed, params.iterations);
  for (std::size_t i = 0; i < viz.nodes.size(); ++i) {
    viz.nodes[i].position = pos[i];
    viz.nodes[i].radius = std::sqrt(static_cast<double>(viz.nodes[i].tokens) / static_cast<double>(max_tokens)) * params.k / 2;
  }
  return viz;
}

nlohmann::json QuotientViz::to_json() const {
  nlohmann::json n = nlohmann::json::array(), e = nlohmann::json::array();
  for (const auto& v : nodes)
    n.push_back({{"id", v.id},
                 {"label", v.label},
                 {"tokens", v.tokens},
                 {"cluster", v.cluster >= 0 ? nlohmann::json(v.cluster) : nlohmann::json(nullptr)},
                 {"degree", v.degree},
                 {"labelled", v.labelled},
                 {"radius", v.radius},
                 {"x", v.position.x},
                 {"y", v.position.y}});
  for (const auto& a : edges)
    e.push_back({{"source", nodes[static_cast<std::size_t>(a.source)].id},
                 {"target", nodes[static_cast<std::size_t>(a.target)].id},
                 {"multiplicity", a.multiplicity},
                 {"opacity", a.opacity}});
  return {{"nodes", n}, {"edges", e}};
}

std::string QuotientViz::to_svg() const {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!nodes.empty()) {
    x0 = y0 = 1e300;
    x1 = y1 = -1e300;
    for (const auto& v : nodes) {
      x0 = std::min(x0, v.position.x - v.radius);
      x1 = std::max(x1, v.position.x + v.radius);
      y0 = std::min(y0, v.position.y - v.radius);
      y1 = std::max(y1, v.position.y + v.radius);
    }
  }
  const double pad = 1;
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" + num(x0 - pad) + " " + num(y0 - pad) + " " +
                  num(x1 - x0 + 2 * pad) + " " + num(y1 - y0 + 2 * pad) + "\" width=\"800\" height=\"800\">\n";
  for (const auto& e : edges) {
    const auto& a = nodes[static_cast<std::size_t>(e.source)].position;
    const auto& b = nodes[static_cast<std::size_t>(e.target)].position;
    s += "  <line x1=\"" + num(a.x) + "\" y1=\"" + num(a.y) + "\" x2=\"" + num(b.x) + "\" y2=\"" + num(b.y) +
         "\" stroke=\"#444444\" stroke-width=\"0.03\" stroke-opacity=\"" + num(e.opacity) + "\"/>\n";
  }
  for (const auto& v : nodes) {
    const std::string fill =
        v.cluster >= 0 ? family_palette()[static_cast<std::size_t>(v.cluster) % family_palette().size()] : "#dcdcdc";
    s += "  <circle cx=\"" + num(v.position.x) + "\" cy=\"" + num(v.position.y) + "\" r=\"" + num(v.radius) +
         "\" fill=\"" + fill + "\"><title>" + esc(v.label) + "</title></circle>\n";
    if (v.labelled)
      s += "  <text x=\"" + num(v.position.x) + "\" y=\"" + num(v.position.y) + "\" font-size=\"0.4\">" + esc(v.label) +
           "</text>\n";
  }
  return s + "</svg>\n";
}

FamilyReport family_report_export(const std::vector<ClusterFamily>& families, const FamilyGraph& fg,
                                  const std::vector<ClusteredYear>& years, std::size_t top_families,
                                  std::size_t top_terms) {
  FamilyReport report;
  std::map<int, const ClusteredYear*> by_year;
  for (const auto& y : years) by_year[y.year] = &y;
  std::vector<std::string> texts;
  for (const auto& f : families) {
    if (static_cast<std::size_t>(f.index) >= top_families) break;
    report.families.push_back(f);
    std::string text;
    for (int m : f.members) {
      const auto& c = fg.nodes[static_cast<std::size_t>(m)];
      const auto it = by_year.find(c.year);
      if (it == by_year.end()) throw IntegrityError("no clustering for year " + std::to_string(c.year));
      const auto& g = *it->second->graph;
      const auto& module = it->second->clustering->module;
      std::map<std::string, std::size_t> parts;
      std::size_t total = 0;
      for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (module[i] != c.cluster) continue;
        const auto& n = g.nodes[i];
        parts[n.label.empty() ? n.id : n.label] += n.tokens;
        total += n.tokens;
        if (!n.text.empty()) text += (text.empty() ? "" : " ") + n.text;
      }
      std::vector<std::pair<std::string, std::size_t>> ordered(parts.begin(), parts.end());
      std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
      for (const auto& [label, tokens] : ordered)
        report.rows.push_back({f.index, c.year, c.cluster, label, tokens,
                               total == 0 ? 0.0 : static_cast<double>(tokens) / static_cast<double>(total)});
    }
    texts.push_back(std::move(text));
  }
  report.terms = tfidf_top_terms(texts, top_terms);
  return report;
}

std::string FamilyReport::to_csv() const {
  std::string out = "family,year,cluster,element,tokens,share\n";
  for (const auto& r : rows)
    out += std::to_string(r.family) + "," + std::to_string(r.year) + "," + std::to_string(r.cluster) + "," +
           csv_field(r.element) + "," + std::to_string(r.tokens) + "," + num(r.share) + "\n";
  return out;
}

std::string FamilyReport::to_html() const {
  std::string h = "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Cluster families</title></head><body>\n";
  for (std::size_t j = 0; j < families.size(); ++j) {
    const auto& f = families[j];
    h += "<h2 style=\"color:" + family_palette()[static_cast<std::size_t>(f.index) % family_palette().size()] +
         "\">Family " + std::to_string(f.index) + "</h2>\n<table>\n<tr><th>year</th><th>cluster</th><th>element</th><th>tokens</th><th>share</th></tr>\n";
    for (const auto& r : rows) {
      if (r.family != f.index) continue;
      char pct[32];
      std::snprintf(pct, sizeof pct, "%.1f%%", 100 * r.share);
      h += "<tr><td>" + std::to_string(r.year) + "</td><td>" + std::to_string(r.cluster) + "</td><td>" + esc(r.element) +
           "</td><td>" + std::to_string(r.tokens) + "</td><td>" + pct + "</td></tr>\n";
    }
    h += "</table>\n<p>Top terms:";
    for (const auto& t : terms[j]) h += " " + esc(t.term);
    h += "</p>\n";
  }
  return h + "</body></html>\n";
}

}  // namespace legisnet
