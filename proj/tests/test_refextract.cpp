#include <random>
#include <set>

#include "doctest.h"
#include "legisnet/error.hpp"
#include "legisnet/refextract.hpp"

using namespace legisnet;

namespace {

StructuralElement text_element(std::string text, std::string id = "T:1") {
  StructuralElement el;
  el.id = std::move(id);
  el.kind = ElementKind::seqitem;
  el.text = std::move(text);
  return el;
}

std::vector<CiteKey> keys_of(const std::string& raw, const CitationProfile& profile,
                             std::string_view context) {
  const auto out = parse_span({"T:1", 0, raw.size(), raw}, profile, context);
  REQUIRE(out.keys.has_value());
  return out.keys->keys;
}

const CitationProfile& us() {
  static const auto p = CitationProfile::builtin("us");
  return p;
}
const CitationProfile& de() {
  static const auto p = CitationProfile::builtin("de");
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("refextract");

TEST_CASE("find_references: US sample") {
  const auto spans = find_references(
      text_element("... only in accordance with a plan of action approved by the Secretary under "
                   "this subchapter or in accordance with section 4114 of this title."),
      us());
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].raw == "section 4114 of this title");
}

TEST_CASE("find_references: no citation markers") {
  CHECK(find_references(text_element("The legal capacity of a human being begins on the completion of birth."), de())
            .empty());
  CHECK(find_references(text_element("The legal capacity of a human being begins on the completion of birth."), us())
            .empty());
}

TEST_CASE("find_references: German sample spans") {
  const auto spans =
      find_references(text_element("The provisions of § 26 (2) sentence 1, § 27 (1) and (3) ..."), de());
  REQUIRE(spans.size() == 2);
  CHECK(spans[0].raw == "§ 26 (2) sentence 1");
  CHECK(spans[1].raw == "§ 27 (1) and (3)");

  const auto full = find_references(
      text_element("The provisions of section 26 (2) sentence 1, section 27 (1) and (3), sections 28 and 31a "
                   "(1) sentence 2, as well as sections 32, 33 and 38, do not apply where otherwise provided "
                   "by the articles of association. It is not possible to derogate from section 34 through "
                   "the articles of association, even for the passing of resolutions by the board."),
      de());
  std::vector<std::string> raws;
  for (const auto& s : full) raws.push_back(s.raw);
  CHECK(raws == std::vector<std::string>{"section 26 (2) sentence 1", "section 27 (1) and (3)",
                                         "sections 28 and 31a (1) sentence 2", "sections 32, 33 and 38",
                                         "section 34"});
}

TEST_CASE("parse_span") {
  SUBCASE("explicit title") {
    CHECK(keys_of("section 1437f(c) of title 42", us(), "12") == std::vector<CiteKey>{{"42", "1437f"}});
  }
  SUBCASE("enumeration inside the same law") {
    CHECK(keys_of("sections 32, 33 and 38", de(), "BGB") ==
          std::vector<CiteKey>{{"BGB", "32"}, {"BGB", "33"}, {"BGB", "38"}});
  }
  SUBCASE("sub-section locators are discarded") {
    CHECK(keys_of("paragraph (1) or (2) of section 4104(b) of this title", us(), "12") ==
          std::vector<CiteKey>{{"12", "4104"}});
    CHECK(keys_of("section 26 (2) sentence 1", de(), "BGB") == std::vector<CiteKey>{{"BGB", "26"}});
    CHECK(keys_of("sections 28 and 31a (1) sentence 2", de(), "BGB") ==
          std::vector<CiteKey>{{"BGB", "28"}, {"BGB", "31a"}});
    CHECK(keys_of("§ 27 Abs. 1 und 3", de(), "BGB") == std::vector<CiteKey>{{"BGB", "27"}});
  }
  SUBCASE("numeric ranges") {
    CHECK(keys_of("sections 4101 through 4104 of this title", us(), "12") ==
          std::vector<CiteKey>{{"12", "4101"}, {"12", "4102"}, {"12", "4103"}, {"12", "4104"}});
    CHECK(keys_of("§§ 5 bis 7", de(), "BGB") ==
          std::vector<CiteKey>{{"BGB", "5"}, {"BGB", "6"}, {"BGB", "7"}});
    // Different suffixes: endpoints only.
    CHECK(keys_of("§§ 5a bis 7", de(), "BGB") == std::vector<CiteKey>{{"BGB", "5a"}, {"BGB", "7"}});
  }
  SUBCASE("law names go through the law index") {
    auto bgb = parse_document(R"(<document abbreviation="BGB"><seqitem citekey="823">x</seqitem></document>)");
    auto zpo = parse_document(R"(<document abbreviation="ZPO"><seqitem citekey="1">§ 823 BGB und § 5 EUV</seqitem></document>)");
    const Snapshot s("de", parse_date("2018"), {bgb, zpo});
    const auto profile = de().for_snapshot(s);
    const auto spans = find_references(s.document(1).node(1), profile);
    REQUIRE(spans.size() == 2);
    CHECK(parse_span(spans[0], profile, "ZPO").keys->keys == std::vector<CiteKey>{{"BGB", "823"}});
    const auto dropped = parse_span(spans[1], profile, "ZPO");
    CHECK_FALSE(dropped.keys.has_value());
    REQUIRE(dropped.diagnostic.has_value());
    CHECK(dropped.diagnostic->kind == DiagnosticKind::unresolvable_law);
  }
}

TEST_CASE("align_keys") {
  const auto s = load_snapshot(LEGISNET_TEST_DATA "/citation_samples/us/manifest.json");
  const auto source = s.element(*s.find_key("12/4101"));
  const ReferenceSpan span{source.id, 0, 0, ""};
  SUBCASE("present key") {
    const auto out = align_keys({span, {{"12", "4114"}}}, s);
    REQUIRE(out.references.size() == 1);
    CHECK(out.references[0].target_id == s.element(*s.find_key("12/4114")).id);
    CHECK(out.unresolved.empty());
  }
  SUBCASE("absent key") {
    const auto out = align_keys({span, {{"12", "9999"}}}, s);
    CHECK(out.references.empty());
    REQUIRE(out.unresolved.size() == 1);
    CHECK(out.unresolved[0].kind == DiagnosticKind::missing_target);
  }
  SUBCASE("multiplicity is preserved") {
    const auto out = align_keys({span, {{"12", "4114"}, {"12", "4114"}}}, s);
    CHECK(out.references.size() == 2);
  }
}

TEST_CASE("extract_all: sample US and German texts") {
  SUBCASE("US") {
    const auto s = load_snapshot(LEGISNET_TEST_DATA "/citation_samples/us/manifest.json");
    const auto res = extract_all(s, us());
    std::vector<std::pair<std::string, std::string>> edges;
    for (const auto& r : res.references)
      edges.emplace_back(*s.element(*s.find_id(r.source_id)).cite_key,
                         *s.element(*s.find_id(r.target_id)).cite_key);
    const std::vector<std::pair<std::string, std::string>> expected = {
        {"4101", "4114"}, {"4101", "1715t"}, {"4101", "4114"},
        {"4105", "4103"}, {"4105", "4104"},  {"4105", "1437f"}};
    CHECK(edges == expected);
    CHECK(res.report.spans == 6);
    CHECK(res.report.resolved == 6);
    CHECK(res.report.unresolved_total() == 0);
  }
  SUBCASE("DE") {
    const auto s = load_snapshot(LEGISNET_TEST_DATA "/citation_samples/de/manifest.json");
    const auto res = extract_all(s, de());
    std::vector<std::string> targets;
    for (const auto& r : res.references) {
      CHECK(*s.element(*s.find_id(r.source_id)).cite_key == "40");
      targets.push_back(*s.element(*s.find_id(r.target_id)).cite_key);
    }
    CHECK(targets == std::vector<std::string>{"26", "27", "28", "31a", "32", "33", "38", "34"});
    CHECK(res.report.unresolved_total() == 0);
  }
  SUBCASE("empty snapshot") {
    const Snapshot s("us", parse_date("2018"), {});
    const auto res = extract_all(s, us());
    CHECK(res.references.empty());
    CHECK(res.report.spans == 0);
    CHECK(res.report.keys == 0);
    CHECK(res.report.to_json()["unresolved_total"] == 0);
  }
}

TEST_CASE("planted citations are found exactly once") {
  std::mt19937_64 rng(2024);
  const std::vector<std::string> filler = {"the", "Secretary", "shall", "approve", "a", "plan", "of",
                                           "action", "under", "this", "subchapter", "and", "or",
                                           "housing", "120", "percent", "(b)", "title", "with"};
  for (int round = 0; round < 200; ++round) {
    const int k = static_cast<int>(rng() % 6);
    std::string text;
    std::vector<std::string> planted;
    for (int i = 0; i < k; ++i) {
      const int n = static_cast<int>(rng() % 8) + 1;
      for (int w = 0; w < n; ++w) text += filler[rng() % filler.size()] + " ";
      std::string cite = (rng() % 2 ? "section " : "sections ") + std::to_string(100 + rng() % 900);
      if (rng() % 3 == 0) cite += "(a)";
      if (rng() % 3 == 0) cite += " and " + std::to_string(100 + rng() % 900);
      cite += rng() % 2 ? " of this title" : " of title 42";
      planted.push_back(cite);
      text += cite + (rng() % 2 ? ". " : " ");
    }
    text += "end";
    const auto el = text_element(text);
    const auto spans = find_references(el, us());
    REQUIRE(spans.size() == planted.size());
    std::size_t prev_end = 0;
    for (std::size_t i = 0; i < spans.size(); ++i) {
      CHECK(spans[i].raw == planted[i]);
      CHECK(spans[i].begin >= prev_end);
      CHECK(spans[i].end <= text.size());
      CHECK(text.substr(spans[i].begin, spans[i].end - spans[i].begin) == spans[i].raw);
      prev_end = spans[i].end;
    }
  }
}

TEST_CASE("extraction is deterministic and sound") {
  const auto s = load_snapshot(LEGISNET_TEST_DATA "/citation_samples/us/manifest.json");
  const auto a = extract_all(s, us());
  const auto b = extract_all(s, us());
  CHECK(a.references == b.references);
  std::set<std::string> seqitem_ids;
  for (const auto& [key, ref] : s.citekey_index()) seqitem_ids.insert(s.element(ref).id);
  for (const auto& r : a.references) CHECK(seqitem_ids.count(r.target_id) == 1);
  CHECK(references_csv(a.references).rfind("source_id,target_id\n", 0) == 0);
}

TEST_CASE("profile loading errors") {
  CHECK_THROWS_AS(CitationProfile::from_json({{"name", "x"}, {"find", {"{nope}"}}}), ConfigError);
  CHECK_THROWS_AS(CitationProfile::from_json({{"name", "x"}, {"find", {"("}}}), ConfigError);
  CHECK_THROWS_AS(CitationProfile::builtin("fr"), ConfigError);
  const auto p = CitationProfile::load(LEGISNET_SOURCE_DIR "/data/profiles/de.json");
  CHECK(p.name() == "de");
  CHECK(p.is_marker("§"));
  CHECK(p.is_unit("Abs."));
}

TEST_SUITE_END();
