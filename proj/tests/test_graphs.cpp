#include <cmath>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "legisnet/error.hpp"
#include "legisnet/graphs.hpp"
#include "test_util.hpp"

using namespace legisnet;
using legisnet::testing::random_document;

namespace {

Snapshot snapshot_of(std::vector<std::string> xmls) {
  std::vector<DocumentTree> docs;
  for (std::size_t i = 0; i < xmls.size(); ++i) docs.push_back(parse_document(xmls[i], "d" + std::to_string(i)));
  return Snapshot("c", parse_date("2000"), std::move(docs));
}

const char* kTwoChapters = R"(<document abbreviation="T">
  <item heading="Chapter 1">
    <seqitem citekey="1">one</seqitem><seqitem citekey="2">two</seqitem><seqitem citekey="3">three</seqitem>
  </item>
  <item heading="Chapter 2">
    <seqitem citekey="4">four</seqitem><seqitem citekey="5">five</seqitem><seqitem citekey="6">six</seqitem>
  </item>
</document>)";

std::string id_of(const Snapshot& s, const std::string& key) { return s.element(*s.find_key(key)).id; }

ResolvedReference ref(const Snapshot& s, const std::string& from, const std::string& to) {
  return {id_of(s, from), id_of(s, to), id_of(s, from)};
}

std::map<std::tuple<int, int, EdgeType>, std::size_t> arc_map(const LegalGraph& g) {
  std::map<std::tuple<int, int, EdgeType>, std::size_t> m;
  for (const auto& a : g.arcs) m[{a.source, a.target, a.type}] += a.multiplicity;
  return m;
}

// Multiplicity per ordered node pair, edge types pooled.
std::map<std::pair<int, int>, std::size_t> pair_map(const LegalGraph& g) {
  std::map<std::pair<int, int>, std::size_t> m;
  for (const auto& a : g.arcs) m[{a.source, a.target}] += a.multiplicity;
  return m;
}

Snapshot random_snapshot(std::mt19937_64& rng) {
  std::vector<std::string> xmls;
  const int n = static_cast<int>(rng() % 3) + 1;
  for (int i = 0; i < n; ++i) xmls.push_back(random_document(rng, i));
  return snapshot_of(xmls);
}

std::vector<ResolvedReference> random_refs(std::mt19937_64& rng, const Snapshot& s) {
  std::vector<std::string> seqs;
  for (const auto& [k, r] : s.citekey_index()) seqs.push_back(s.element(r).id);
  std::vector<ResolvedReference> refs;
  if (seqs.empty()) return refs;
  const int n = static_cast<int>(rng() % 12);
  for (int i = 0; i < n; ++i) {
    const auto& src = seqs[rng() % seqs.size()];
    // Origin: the seqitem or any element below it.
    const auto sref = *s.find_id(src);
    const auto& doc = s.document(sref.document);
    int origin = sref.node;
    for (int c = sref.node + 1; c < static_cast<int>(doc.size()) && doc.seqitem_of(c) == sref.node; ++c)
      if (rng() % 3 == 0) origin = c;
    refs.push_back({src, seqs[rng() % seqs.size()], doc.node(origin).id});
  }
  return refs;
}

}  // namespace

TEST_SUITE_BEGIN("graphs");

TEST_CASE("build_hierarchy: tree arithmetic") {
  const auto s = snapshot_of({R"(<document><item><seqitem citekey="1">a</seqitem></item></document>)",
                              R"(<document><seqitem citekey="1">b</seqitem></document>)"});
  const auto h = build_hierarchy(s);
  CHECK(h.nodes.size() == 6);
  CHECK(h.arcs.size() == 5);
  CHECK(h.nodes[0].level == -1);

  const auto empty = build_hierarchy(Snapshot("c", parse_date("2000"), {}));
  CHECK(empty.nodes.size() == 1);
  CHECK(empty.arcs.empty());
}

TEST_CASE("build_hierarchy: arcs equal a parent-pointer walk") {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 50; ++round) {
    const auto s = random_snapshot(rng);
    const auto h = build_hierarchy(s);
    std::set<std::pair<std::string, std::string>> expected;
    for (const auto& doc : s.documents())
      for (const auto& el : doc.nodes())
        expected.emplace(el.parent < 0 ? "c:meta" : doc.node(el.parent).id, el.id);
    std::set<std::pair<std::string, std::string>> got;
    for (const auto& a : h.arcs) {
      CHECK(a.type == EdgeType::containment);
      got.emplace(h.nodes[static_cast<std::size_t>(a.source)].id, h.nodes[static_cast<std::size_t>(a.target)].id);
    }
    CHECK(got == expected);
    CHECK(h.arcs.size() + 1 == h.nodes.size());
    // Arborescence: one level -1 node, every other node has exactly one parent.
    std::vector<int> indegree(h.nodes.size(), 0);
    for (const auto& a : h.arcs) ++indegree[static_cast<std::size_t>(a.target)];
    int roots = 0;
    for (std::size_t i = 0; i < h.nodes.size(); ++i) {
      if (h.nodes[i].level == -1) {
        ++roots;
        CHECK(indegree[i] == 0);
      } else {
        CHECK(indegree[i] == 1);
      }
    }
    CHECK(roots == 1);
  }
}

TEST_CASE("build_reference") {
  const auto s = snapshot_of({kTwoChapters});
  const auto h = build_hierarchy(s);
  SUBCASE("identical references keep their multiplicity") {
    const auto r = build_reference(h, {ref(s, "T/1", "T/5"), ref(s, "T/1", "T/5")});
    REQUIRE(r.arcs.size() == h.arcs.size() + 1);
    CHECK(r.arcs.back().multiplicity == 2);
    CHECK(r.arcs.back().type == EdgeType::reference);
    CHECK(r.total_multiplicity(EdgeType::reference) == 2);
  }
  SUBCASE("no references") {
    const auto r = build_reference(h, {});
    CHECK(arc_map(r) == arc_map(h));
    CHECK(r.nodes.size() == h.nodes.size());
  }
  SUBCASE("endpoints must be seqitems in the graph") {
    CHECK_THROWS_AS(build_reference(h, {{"T:0", id_of(s, "T/1"), "T:0"}}), IntegrityError);
    CHECK_THROWS_AS(build_reference(h, {{"nope", id_of(s, "T/1"), "nope"}}), IntegrityError);
  }
  SUBCASE("edge count equals hierarchy arcs plus references") {
    std::mt19937_64 rng(5);
    for (int round = 0; round < 50; ++round) {
      const auto rs = random_snapshot(rng);
      const auto refs = random_refs(rng, rs);
      const auto hg = build_hierarchy(rs);
      const auto rg = build_reference(hg, refs);
      CHECK(rg.total_multiplicity() == hg.arcs.size() + refs.size());
      auto without = rg;
      std::erase_if(without.arcs, [](const GraphArc& a) { return a.type == EdgeType::reference; });
      CHECK(arc_map(without) == arc_map(hg));
    }
  }
}

TEST_CASE("build_sequence: weights") {
  SUBCASE("siblings in one chapter") {
    const auto s = snapshot_of({R"(<document abbreviation="T"><item heading="Chapter 1">
      <seqitem citekey="1">a</seqitem><seqitem citekey="2">b</seqitem><seqitem citekey="3">c</seqitem>
    </item></document>)"});
    const auto g = build_sequence(s, build_reference(build_hierarchy(s), {}), {});
    CHECK(g.nodes.size() == 3);
    REQUIRE(g.arcs.size() == 4);
    for (const auto& a : g.arcs) {
      CHECK(a.type == EdgeType::sequence);
      CHECK(a.weight == 1.0);
    }
  }
  SUBCASE("chapter boundary is lighter") {
    const auto s = snapshot_of({kTwoChapters});
    const auto g = build_sequence(s, build_reference(build_hierarchy(s), {}), {});
    const int n3 = g.find(id_of(s, "T/3"));
    const int n4 = g.find(id_of(s, "T/4"));
    bool seen = false;
    for (const auto& a : g.arcs)
      if (a.source == n3 && a.target == n4) {
        seen = true;
        CHECK(a.weight == 0.5);
      }
    CHECK(seen);
  }
  SUBCASE("across documents the meta root joins the paths") {
    const auto s = snapshot_of({R"(<document abbreviation="A"><seqitem citekey="1">a</seqitem></document>)",
                                R"(<document abbreviation="B"><item><seqitem citekey="1">b</seqitem></item></document>)"});
    const auto g = build_sequence(s, build_reference(build_hierarchy(s), {}), {});
    REQUIRE(g.arcs.size() == 2);
    CHECK(g.arcs[0].weight == doctest::Approx(std::pow(2.0, -1.5)));  // d = 1 + 2 + 2 = 5
  }
  SUBCASE("reference arcs weigh alpha * w(2)") {
    const auto s = snapshot_of({kTwoChapters});
    SequenceParams p;
    p.alpha = 0.25;
    const auto g = build_sequence(s, build_reference(build_hierarchy(s), {ref(s, "T/1", "T/6")}), p);
    CHECK(g.total_multiplicity(EdgeType::reference) == 1);
    for (const auto& a : g.arcs)
      if (a.type == EdgeType::reference) CHECK(a.weight == 0.25);
  }
}

TEST_CASE("build_sequence: chapter merge") {
  const auto s = snapshot_of({kTwoChapters});
  const auto r = build_reference(build_hierarchy(s), {ref(s, "T/1", "T/2"), ref(s, "T/2", "T/3"),
                                                       ref(s, "T/4", "T/6"), ref(s, "T/1", "T/6")});
  SequenceParams p;
  p.rho = MergeCondition::parse("chapter-or-title");
  const auto g = build_sequence(s, r, p);
  REQUIRE(g.nodes.size() == 2);
  CHECK(g.nodes[0].kind == "merged");
  CHECK(g.nodes[0].seqitems.size() == 3);
  CHECK(g.nodes[0].text == "one two three");
  CHECK(g.nodes[0].tokens == 3);
  const auto arcs = arc_map(g);
  CHECK(arcs.at({0, 0, EdgeType::reference}) == 2);
  CHECK(arcs.at({1, 1, EdgeType::reference}) == 1);
  CHECK(arcs.at({0, 1, EdgeType::reference}) == 1);
  CHECK(arcs.at({0, 1, EdgeType::sequence}) == 1);
  CHECK(arcs.at({1, 0, EdgeType::sequence}) == 1);
  CHECK(g.parameters.at("rho") == "chapter-or-title");

  SUBCASE("a title without chapters merges into the document") {
    const auto t = snapshot_of({R"(<document abbreviation="X"><item heading="Part A"><seqitem citekey="1">a</seqitem></item>
                                   <seqitem citekey="2">b</seqitem></document>)"});
    const auto gt = build_sequence(t, build_reference(build_hierarchy(t), {}), p);
    REQUIRE(gt.nodes.size() == 1);
    CHECK(gt.nodes[0].id == "X:0");
  }
}

TEST_CASE("build_sequence: parameter errors") {
  const auto s = snapshot_of({kTwoChapters});
  const auto r = build_reference(build_hierarchy(s), {});
  SequenceParams p;
  p.w = {[](int d) { return d > 2 ? 0.0 : 1.0; }, "step"};
  CHECK_THROWS_AS(build_sequence(s, r, p), ParameterError);
  p.w = WeightFunction::decay();
  p.alpha = 0.0;
  CHECK_THROWS_AS(build_sequence(s, r, p), ParameterError);
  p.alpha = 1.5;
  CHECK_THROWS_AS(build_sequence(s, r, p), ParameterError);
  CHECK_THROWS_AS(MergeCondition::parse("section"), ConfigError);
  CHECK_THROWS_AS(MergeCondition::parse("level:x"), ConfigError);
  CHECK_THROWS_AS(MergeCondition::parse("heading:("), ConfigError);
}

TEST_CASE("sequence graphs: symmetry and projection conservation") {
  std::mt19937_64 rng(17);
  const std::vector<std::string> rhos = {"none", "chapter-or-title", "level:1", "heading:^Part 1"};
  for (int round = 0; round < 100; ++round) {
    const auto s = random_snapshot(rng);
    const auto refs = random_refs(rng, s);
    const auto r = build_reference(build_hierarchy(s), refs);
    SequenceParams p;
    p.rho = MergeCondition::parse(rhos[static_cast<std::size_t>(round) % rhos.size()]);
    for (const bool split : {false, true}) {
      const auto g = split ? build_subsequence(s, r, p) : build_sequence(s, r, p);
      CHECK(g.total_multiplicity(EdgeType::reference) == refs.size());
      std::map<std::pair<int, int>, double> seq;
      for (const auto& a : g.arcs) {
        CHECK(a.weight > 0.0);
        if (a.type == EdgeType::sequence) seq[{a.source, a.target}] = a.weight;
      }
      for (const auto& [k, w] : seq) {
        const auto back = seq.find({k.second, k.first});
        REQUIRE(back != seq.end());
        CHECK(back->second == w);
      }
      // Token conservation: merged nodes partition the text.
      std::size_t tokens = 0;
      for (const auto& n : g.nodes) tokens += n.tokens;
      CHECK(tokens == snapshot_stats(s).tokens);
    }
  }
}

TEST_CASE("build_subsequence") {
  const auto s = snapshot_of({R"(<document abbreviation="T">
    <seqitem citekey="1">lead<subseqitem>a</subseqitem><subseqitem>b</subseqitem><subseqitem>c</subseqitem></seqitem>
    <seqitem citekey="2">whole</seqitem>
  </document>)"});
  const auto seq1 = id_of(s, "T/1");
  const auto r = build_reference(build_hierarchy(s), {{id_of(s, "T/2"), seq1, id_of(s, "T/2")}, {seq1, id_of(s, "T/2"), "T:4"}});
  const auto g = build_subsequence(s, r, {});
  REQUIRE(g.nodes.size() == 4);
  CHECK(g.nodes[0].kind == "subseqitem");
  CHECK(g.nodes[0].citekey == "T/1#1");
  CHECK(g.nodes[2].citekey == "T/1#3");
  CHECK(g.nodes[0].text == "lead a");
  CHECK(g.nodes[3].kind == "seqitem");
  CHECK(g.nodes[3].citekey == "T/2");
  const auto arcs = arc_map(g);
  CHECK(arcs.count({3, 0, EdgeType::reference}) == 1);  // lands on the first child
  CHECK(arcs.count({2, 3, EdgeType::reference}) == 1);  // leaves from the citing child

  std::mt19937_64 rng(23);
  for (int round = 0; round < 50; ++round) {
    const auto rs = random_snapshot(rng);
    std::size_t expected = 0;
    for (const auto& doc : rs.documents())
      for (int si : doc.seqitems()) {
        std::size_t subs = 0;
        for (int c : doc.node(si).children) subs += doc.node(c).kind == ElementKind::subseqitem;
        expected += std::max<std::size_t>(1, subs);
      }
    CHECK(build_subsequence(rs, build_reference(build_hierarchy(rs), {}), {}).nodes.size() == expected);
  }
}

TEST_CASE("quotient") {
  const auto s = snapshot_of({kTwoChapters});
  const auto r = build_reference(build_hierarchy(s), {ref(s, "T/1", "T/5"), ref(s, "T/2", "T/3")});
  const auto g = build_sequence(s, r, {});

  SUBCASE("identity") {
    const auto q = quotient(g, [](const GraphNode& n) { return std::optional<std::string>(n.id); });
    CHECK(q.nodes.size() == g.nodes.size());
    CHECK(pair_map(q) == pair_map(g));
  }
  SUBCASE("constant") {
    const auto q = quotient(g, [](const GraphNode&) { return std::optional<std::string>("all"); });
    REQUIRE(q.nodes.size() == 1);
    REQUIRE(q.arcs.size() == 1);
    CHECK(q.arcs[0].multiplicity == g.total_multiplicity());
    CHECK(q.nodes[0].tokens == 6);
    CHECK(q.nodes[0].members.size() == 6);
  }
  SUBCASE("chapter classes") {
    const auto q = quotient(g, group_selector(s, MergeCondition::parse("chapter-or-title")), EdgeType::reference);
    REQUIRE(q.nodes.size() == 2);
    const auto arcs = arc_map(q);
    CHECK(arcs.at({0, 1, EdgeType::reference}) == 1);
    CHECK(arcs.at({0, 0, EdgeType::reference}) == 1);
  }
  SUBCASE("undefined selector") {
    CHECK_THROWS_AS(quotient(g, [](const GraphNode&) { return std::optional<std::string>(); }), MappingError);
    CHECK_THROWS_AS(quotient(r, group_selector(s, MergeCondition::parse("none"))), MappingError);
  }
}

TEST_CASE("quotient conservation on random graphs") {
  std::mt19937_64 rng(29);
  for (int round = 0; round < 200; ++round) {
    LegalGraph g;
    const int n = static_cast<int>(rng() % 12) + 1;
    const int classes = static_cast<int>(rng() % 4) + 1;
    std::vector<std::string> label(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      label[static_cast<std::size_t>(i)] = "k" + std::to_string(rng() % static_cast<unsigned>(classes));
      g.add_node({"n" + std::to_string(i), "seqitem", 1, "", static_cast<std::size_t>(rng() % 5), "", {}, {}, ""});
    }
    const int m = static_cast<int>(rng() % 30);
    for (int e = 0; e < m; ++e)
      g.arcs.push_back({static_cast<int>(rng() % static_cast<unsigned>(n)), static_cast<int>(rng() % static_cast<unsigned>(n)),
                        rng() % 2 ? EdgeType::reference : EdgeType::sequence, 1.0 + static_cast<double>(rng() % 3),
                        static_cast<std::size_t>(rng() % 3) + 1});
    const auto q = quotient(g, [&](const GraphNode& node) {
      return std::optional<std::string>(label[static_cast<std::size_t>(std::stoi(node.id.substr(1)))]);
    });
    // Brute-force pair counting.
    std::map<std::pair<std::string, std::string>, std::size_t> brute;
    std::map<std::pair<std::string, std::string>, double> brute_weight;
    for (const auto& a : g.arcs) {
      const std::pair key{label[static_cast<std::size_t>(a.source)], label[static_cast<std::size_t>(a.target)]};
      brute[key] += a.multiplicity;
      brute_weight[key] += a.weight * static_cast<double>(a.multiplicity);
    }
    std::map<std::pair<std::string, std::string>, std::size_t> got;
    for (const auto& a : q.arcs) {
      const std::pair key{q.nodes[static_cast<std::size_t>(a.source)].id, q.nodes[static_cast<std::size_t>(a.target)].id};
      got[key] += a.multiplicity;
      CHECK(a.weight * static_cast<double>(a.multiplicity) == doctest::Approx(brute_weight[key]));
    }
    CHECK(got == brute);
    CHECK(q.arcs.size() == brute.size());
    std::size_t members = 0, tokens = 0, tokens_in = 0;
    for (const auto& c : q.nodes) members += c.members.size(), tokens += c.tokens;
    for (const auto& v : g.nodes) tokens_in += v.tokens;
    CHECK(members == g.nodes.size());
    CHECK(tokens == tokens_in);
  }
}

TEST_CASE("GraphML export") {
  const auto s = load_snapshot(LEGISNET_TEST_DATA "/citation_samples/us/manifest.json");
  const auto r = build_reference(build_hierarchy(s), {});
  const auto x = to_graphml(r);
  std::size_t nodes = 0, edges = 0;
  for (std::size_t p = 0; (p = x.find("<node ", p)) != std::string::npos; ++p) ++nodes;
  for (std::size_t p = 0; (p = x.find("<edge ", p)) != std::string::npos; ++p) ++edges;
  CHECK(nodes == r.nodes.size());
  CHECK(edges == r.arcs.size());
  CHECK(x.find("attr.name=\"multiplicity\"") != std::string::npos);
  CHECK(x.find("<data key=\"citekey\">12/4101</data>") != std::string::npos);
  CHECK(x.find("edgedefault=\"directed\"") != std::string::npos);
}

TEST_SUITE_END();
