#include "legisnet/dynamics.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <numeric>
#include <unordered_map>

#include "legisnet/error.hpp"
#include "utf8.hpp"

namespace legisnet {

namespace {

using detail::code_points;

double jaro_cp(const std::u32string& a, const std::u32string& b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  const std::size_t window = std::max<std::size_t>(std::max(a.size(), b.size()) / 2, 1) - 1;
  std::vector<char> ma(a.size(), 0), mb(b.size(), 0);
  std::size_t m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::size_t lo = i > window ? i - window : 0;
    const std::size_t hi = std::min(b.size(), i + window + 1);
    for (std::size_t j = lo; j < hi; ++j)
      if (!mb[j] && a[i] == b[j]) {
        ma[i] = mb[j] = 1;
        ++m;
        break;
      }
  }
  if (m == 0) return 0.0;
  std::size_t t = 0;
  for (std::size_t i = 0, j = 0; i < a.size(); ++i) {
    if (!ma[i]) continue;
    while (!mb[j]) ++j;
    if (a[i] != b[j]) ++t;
    ++j;
  }
  const double md = static_cast<double>(m);
  return (md / static_cast<double>(a.size()) + md / static_cast<double>(b.size()) + (md - static_cast<double>(t) / 2.0) / md) / 3.0;
}

double jaro_winkler_cp(const std::u32string& a, const std::u32string& b) {
  const double j = jaro_cp(a, b);
  std::size_t prefix = 0;
  while (prefix < 4 && prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix]) ++prefix;
  return j + static_cast<double>(prefix) * 0.1 * (1.0 - j);
}

std::vector<std::vector<int>> undirected_adjacency(const LegalGraph& g) {
  std::vector<std::vector<int>> adj(g.nodes.size());
  for (const auto& a : g.arcs) {
    if (a.source == a.target) continue;
    adj[static_cast<std::size_t>(a.source)].push_back(a.target);
    adj[static_cast<std::size_t>(a.target)].push_back(a.source);
  }
  for (auto& list : adj) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return adj;
}

// Nodes within `hops` of `start` (excluding start) in breadth-first order,
// neighbours visited in ascending index order.
std::vector<std::pair<int, int>> neighbourhood(const std::vector<std::vector<int>>& adj, int start, int hops) {
  std::vector<std::pair<int, int>> out;
  std::unordered_map<int, int> dist{{start, 0}};
  std::deque<int> queue{start};
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    const int d = dist[u];
    if (d == hops) continue;
    for (int v : adj[static_cast<std::size_t>(u)])
      if (dist.emplace(v, d + 1).second) {
        out.emplace_back(v, d + 1);
        queue.push_back(v);
      }
  }
  return out;
}

}  // namespace

double jaro(std::string_view a, std::string_view b) { return jaro_cp(code_points(a), code_points(b)); }

double jaro_winkler(std::string_view a, std::string_view b) {
  return jaro_winkler_cp(code_points(a), code_points(b));
}

std::string_view to_string(AlignPass pass) {
  switch (pass) {
    case AlignPass::none: return "none";
    case AlignPass::exact_text: return "exact-text";
    case AlignPass::key_text: return "key+text";
    case AlignPass::containment: return "containment";
    case AlignPass::neighborhood: return "neighborhood-similarity";
  }
  return "?";
}

std::size_t NodeAlignment::matched() const {
  return static_cast<std::size_t>(std::count_if(target.begin(), target.end(), [](int t) { return t >= 0; }));
}

double NodeAlignment::coverage() const {
  return target.empty() ? 1.0 : static_cast<double>(matched()) / static_cast<double>(target.size());
}

std::vector<int> NodeAlignment::unmatched_sources() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < target.size(); ++i)
    if (target[i] < 0) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> NodeAlignment::unmatched_targets() const {
  std::vector<char> used(target_ids.size(), 0);
  for (int t : target)
    if (t >= 0) used[static_cast<std::size_t>(t)] = 1;
  std::vector<int> out;
  for (std::size_t i = 0; i < used.size(); ++i)
    if (!used[i]) out.push_back(static_cast<int>(i));
  return out;
}

std::string NodeAlignment::to_csv() const {
  std::string out = "source_id,target_id,pass\n";
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] < 0) continue;
    out += source_ids[i] + "," + target_ids[static_cast<std::size_t>(target[i])] + "," +
           std::to_string(static_cast<int>(pass[i])) + "\n";
  }
  return out;
}

NodeAlignment align_nodes(const LegalGraph& from, const LegalGraph& to, const AlignParams& params) {
  const auto n = from.nodes.size(), m = to.nodes.size();
  NodeAlignment al;
  for (const auto& v : from.nodes) al.source_ids.push_back(v.id);
  for (const auto& w : to.nodes) al.target_ids.push_back(w.id);
  al.target.assign(n, -1);
  al.pass.assign(n, AlignPass::none);
  std::vector<char> taken(m, 0);
  const auto match = [&](std::size_t v, int w, AlignPass p) {
    al.target[v] = w;
    al.pass[v] = p;
    taken[static_cast<std::size_t>(w)] = 1;
  };
  std::vector<std::u32string> cp_from(n), cp_to(m);
  for (std::size_t i = 0; i < n; ++i) cp_from[i] = code_points(from.nodes[i].text);
  for (std::size_t j = 0; j < m; ++j) cp_to[j] = code_points(to.nodes[j].text);

  // Pass 1: long text occurring exactly once on each side.
  {
    std::unordered_map<std::string_view, std::pair<int, int>> seen_from, seen_to;  // count, index
    for (std::size_t i = 0; i < n; ++i)
      if (cp_from[i].size() >= params.min_unique_length) {
        auto& e = seen_from[from.nodes[i].text];
        ++e.first, e.second = static_cast<int>(i);
      }
    for (std::size_t j = 0; j < m; ++j)
      if (cp_to[j].size() >= params.min_unique_length) {
        auto& e = seen_to[to.nodes[j].text];
        ++e.first, e.second = static_cast<int>(j);
      }
    for (std::size_t i = 0; i < n; ++i) {
      if (cp_from[i].size() < params.min_unique_length) continue;
      const auto it = seen_to.find(from.nodes[i].text);
      if (it == seen_to.end() || it->second.first != 1 || seen_from[from.nodes[i].text].first != 1) continue;
      match(i, it->second.second, AlignPass::exact_text);
    }
  }

  // Pass 2: identical key and identical text.
  {
    std::unordered_map<std::string_view, int> by_key;
    for (std::size_t j = 0; j < m; ++j)
      if (!taken[j] && !to.nodes[j].citekey.empty()) by_key.emplace(to.nodes[j].citekey, static_cast<int>(j));
    for (std::size_t i = 0; i < n; ++i) {
      if (al.target[i] >= 0 || from.nodes[i].citekey.empty()) continue;
      const auto it = by_key.find(from.nodes[i].citekey);
      if (it == by_key.end() || taken[static_cast<std::size_t>(it->second)]) continue;
      if (to.nodes[static_cast<std::size_t>(it->second)].text == from.nodes[i].text) match(i, it->second, AlignPass::key_text);
    }
  }

  // Pass 3: exactly one unmatched candidate by containment, with the
  // unmatched remainder shorter than the matched part.
  for (std::size_t i = 0; i < n; ++i) {
    if (al.target[i] >= 0 || cp_from[i].empty()) continue;
    const auto& tv = from.nodes[i].text;
    int found = -1, count = 0;
    for (std::size_t j = 0; j < m && count < 2; ++j) {
      if (taken[j] || cp_to[j].empty()) continue;
      const auto& tw = to.nodes[j].text;
      const std::size_t lv = cp_from[i].size(), lw = cp_to[j].size();
      bool ok = false;
      if (lv >= lw && tv.find(tw) != std::string::npos) ok = lv - lw < lw;
      else if (lw > lv && tw.find(tv) != std::string::npos) ok = lw - lv < lv;
      if (ok) {
        found = static_cast<int>(j);
        ++count;
      }
    }
    if (count == 1) match(i, found, AlignPass::containment);
  }

  // Pass 4: similarity search around the images of nearby matched nodes,
  // repeated until a sweep adds nothing.
  const auto adj_from = undirected_adjacency(from);
  const auto adj_to = undirected_adjacency(to);
  for (bool added = true; added;) {
    added = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (al.target[i] >= 0) continue;
      int anchor = -1;
      for (const auto& [v, d] : neighbourhood(adj_from, static_cast<int>(i), params.hops)) {
        (void)d;
        if (al.target[static_cast<std::size_t>(v)] >= 0) {
          anchor = v;
          break;
        }
      }
      if (anchor < 0) continue;
      const int image = al.target[static_cast<std::size_t>(anchor)];
      auto around = neighbourhood(adj_to, image, params.hops);
      std::sort(around.begin(), around.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
      double best = -1.0;
      int best_w = -1;
      for (const auto& [w, d] : around) {
        (void)d;
        if (taken[static_cast<std::size_t>(w)]) continue;
        const double s = jaro_winkler_cp(cp_from[i], cp_to[static_cast<std::size_t>(w)]);
        if (s > best) {
          best = s;
          best_w = w;
        }
      }
      if (best_w >= 0 && best > params.min_similarity) {
        match(i, best_w, AlignPass::neighborhood);
        added = true;
      }
    }
  }
  return al;
}

YearLayer make_layer(int year, const LegalGraph& clustered, const Clustering& clustering, const LegalGraph& aligned) {
  if (clustering.module.size() != clustered.nodes.size())
    throw IntegrityError("clustering does not cover the clustered graph");
  YearLayer layer;
  layer.year = year;
  layer.cluster_tokens.assign(static_cast<std::size_t>(clustering.module_count()), 0);
  std::unordered_map<std::string, int> seqitem_cluster;
  for (std::size_t i = 0; i < clustered.nodes.size(); ++i) {
    const int c = clustering.module[i];
    layer.cluster_tokens[static_cast<std::size_t>(c)] += clustered.nodes[i].tokens;
    for (const auto& s : clustered.nodes[i].seqitems) seqitem_cluster.emplace(s, c);
  }
  for (const auto& v : aligned.nodes) {
    if (v.seqitems.empty()) throw IntegrityError("aligned node without seqitem: " + v.id);
    const auto it = seqitem_cluster.find(v.seqitems.front());
    if (it == seqitem_cluster.end()) throw IntegrityError("aligned node outside the clustered graph: " + v.id);
    layer.node_cluster.push_back(it->second);
    layer.node_tokens.push_back(v.tokens);
  }
  return layer;
}

std::vector<int> ClusterGraph::years() const {
  std::vector<int> out;
  for (const auto& n : nodes)
    if (out.empty() || out.back() != n.year) out.push_back(n.year);
  return out;
}

std::string ClusterGraph::to_csv() const {
  std::string out = "source,target,weight\n";
  for (const auto& a : arcs)
    out += nodes[static_cast<std::size_t>(a.source)].id() + "," + nodes[static_cast<std::size_t>(a.target)].id() + "," +
           std::to_string(a.weight) + "\n";
  return out;
}

std::string ClusterGraph::to_graphml() const {
  std::string x = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n";
  x += "  <key id=\"year\" for=\"node\" attr.name=\"year\" attr.type=\"int\"/>\n";
  x += "  <key id=\"tokens\" for=\"node\" attr.name=\"tokens\" attr.type=\"long\"/>\n";
  x += "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"long\"/>\n";
  x += "  <graph id=\"clusters\" edgedefault=\"directed\">\n";
  for (const auto& n : nodes)
    x += "    <node id=\"" + n.id() + "\"><data key=\"year\">" + std::to_string(n.year) + "</data><data key=\"tokens\">" +
         std::to_string(n.tokens) + "</data></node>\n";
  for (const auto& a : arcs)
    x += "    <edge source=\"" + nodes[static_cast<std::size_t>(a.source)].id() + "\" target=\"" +
         nodes[static_cast<std::size_t>(a.target)].id() + "\"><data key=\"weight\">" + std::to_string(a.weight) +
         "</data></edge>\n";
  x += "  </graph>\n</graphml>\n";
  return x;
}

ClusterGraph build_cluster_graph(const std::vector<YearLayer>& layers, const std::vector<NodeAlignment>& alignments) {
  if (!layers.empty() && alignments.size() + 1 != layers.size())
    throw IntegrityError("need one alignment per adjacent pair of layers");
  ClusterGraph g;
  for (const auto& layer : layers) {
    g.layer_offset.push_back(static_cast<int>(g.nodes.size()));
    for (std::size_t c = 0; c < layer.cluster_tokens.size(); ++c)
      g.nodes.push_back({layer.year, static_cast<int>(c), layer.cluster_tokens[c]});
  }
  for (std::size_t t = 0; t + 1 < layers.size(); ++t) {
    const auto& a = alignments[t];
    const auto& from = layers[t];
    const auto& to = layers[t + 1];
    if (a.target.size() != from.node_cluster.size())
      throw IntegrityError("alignment source size differs from layer " + std::to_string(from.year));
    std::map<std::pair<int, int>, std::size_t> flow;
    for (std::size_t v = 0; v < a.target.size(); ++v) {
      const int w = a.target[v];
      if (w < 0) continue;
      if (static_cast<std::size_t>(w) >= to.node_cluster.size())
        throw IntegrityError("alignment references unknown node in layer " + std::to_string(to.year));
      const int c = from.node_cluster[v];
      const int c2 = to.node_cluster[static_cast<std::size_t>(w)];
      if (c < 0 || c2 < 0) continue;
      flow[{c, c2}] += to.node_tokens[static_cast<std::size_t>(w)];
    }
    for (const auto& [k, w] : flow)
      if (w > 0) g.arcs.push_back({g.node_of(t, k.first), g.node_of(t + 1, k.second), w});
  }
  return g;
}

double chi(std::size_t w, std::size_t c, std::size_t c_next) {
  if (c == 0 || c_next == 0) throw IntegrityError("chi: empty cluster");
  const double wd = static_cast<double>(w);
  return std::min(wd / static_cast<double>(c), wd / static_cast<double>(c_next));
}

FamilyGraph build_family_graph(const ClusterGraph& graph, double gamma) {
  FamilyGraph f;
  f.nodes = graph.nodes;
  f.gamma = gamma;
  for (const auto& n : graph.nodes)
    if (n.tokens == 0) throw IntegrityError("empty cluster " + n.id());
  for (const auto& a : graph.arcs)
    if (chi(a.weight, graph.nodes[static_cast<std::size_t>(a.source)].tokens,
            graph.nodes[static_cast<std::size_t>(a.target)].tokens) >= gamma)
      f.arcs.push_back(a);
  return f;
}

namespace {

// Larger tokens first, then earlier year, then lower cluster id.
bool leads(const ClusterNode& a, const ClusterNode& b) {
  if (a.tokens != b.tokens) return a.tokens > b.tokens;
  if (a.year != b.year) return a.year < b.year;
  return a.cluster < b.cluster;
}

}  // namespace

std::vector<ClusterFamily> cluster_families(const FamilyGraph& graph) {
  const auto n = graph.nodes.size();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  };
  for (const auto& a : graph.arcs) {
    const int r1 = find(a.source), r2 = find(a.target);
    if (r1 != r2) parent[static_cast<std::size_t>(std::max(r1, r2))] = std::min(r1, r2);
  }
  std::map<int, ClusterFamily> by_root;
  for (std::size_t i = 0; i < n; ++i) {
    auto& fam = by_root[find(static_cast<int>(i))];
    fam.members.push_back(static_cast<int>(i));
    if (fam.members.size() == 1 || leads(graph.nodes[i], graph.nodes[static_cast<std::size_t>(fam.leading)]))
      fam.leading = static_cast<int>(i);
  }
  std::vector<ClusterFamily> out;
  for (auto& [root, fam] : by_root) {
    fam.leading_tokens = graph.nodes[static_cast<std::size_t>(fam.leading)].tokens;
    out.push_back(std::move(fam));
  }
  std::sort(out.begin(), out.end(), [&](const ClusterFamily& a, const ClusterFamily& b) {
    return leads(graph.nodes[static_cast<std::size_t>(a.leading)], graph.nodes[static_cast<std::size_t>(b.leading)]);
  });
  for (std::size_t j = 0; j < out.size(); ++j) out[j].index = static_cast<int>(j);
  return out;
}

std::map<int, std::size_t> family_size_series(const ClusterFamily& family, const FamilyGraph& graph) {
  std::map<int, std::size_t> out;
  for (const auto& n : graph.nodes) out.emplace(n.year, 0);
  for (int m : family.members) {
    const auto& n = graph.nodes[static_cast<std::size_t>(m)];
    out[n.year] += n.tokens;
  }
  return out;
}

nlohmann::json family_report(const std::vector<ClusterFamily>& families, const FamilyGraph& graph) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& f : families) {
    nlohmann::json members = nlohmann::json::array();
    for (int m : f.members) members.push_back(graph.nodes[static_cast<std::size_t>(m)].id());
    nlohmann::json sizes = nlohmann::json::object();
    for (const auto& [year, tokens] : family_size_series(f, graph)) sizes[std::to_string(year)] = tokens;
    out.push_back({{"family", f.index},
                   {"leading_cluster", graph.nodes[static_cast<std::size_t>(f.leading)].id()},
                   {"leading_tokens", f.leading_tokens},
                   {"members", members},
                   {"sizes", sizes}});
  }
  return {{"gamma", graph.gamma}, {"families", out}};
}

}  // namespace legisnet
