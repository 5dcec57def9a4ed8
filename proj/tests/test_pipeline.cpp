#include <unistd.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "legisnet/pipeline.hpp"

using namespace legisnet;
namespace fs = std::filesystem;

namespace {

const fs::path kMini = fs::path(LEGISNET_SOURCE_DIR) / "data" / "mini";
const fs::path kGolden = fs::path(LEGISNET_SOURCE_DIR) / "tests" / "golden" / "mini";

// Scratch directory removed on scope exit.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name)
      : dir(fs::temp_directory_path() / ("legisnet-" + name + "-" + std::to_string(::getpid()))) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
  return out;
}

PipelineConfig mini_config(const fs::path& out) {
  auto c = PipelineConfig::load(kMini / "config.json");
  c.output_dir = out.string();
  return c;
}

}  // namespace

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("PipelineConfig: JSON round trip") {
  auto c = PipelineConfig::load(kMini / "config.json");
  c.alpha = 0.25;
  c.clustering.preferred_n = 7;
  c.alignment.hops = 3;
  const auto j = c.to_json();
  const auto back = PipelineConfig::from_json(j, c.base_dir);
  CHECK(back.to_json() == j);
  CHECK(back.base_dir == c.base_dir);
  c.clustering.preferred_n.reset();
  CHECK(PipelineConfig::from_json(c.to_json()).to_json() == c.to_json());
  CHECK(c.to_json().at("clustering").at("preferred_n") == "auto");
}

TEST_CASE("PipelineConfig: invalid configs") {
  const auto base = PipelineConfig::load(kMini / "config.json").to_json();
  SUBCASE("empty year list") {
    auto j = base;
    j["years"] = nlohmann::json::array();
    CHECK_THROWS_AS(PipelineConfig::from_json(j), ConfigError);
  }
  SUBCASE("unknown key") {
    auto j = base;
    j["colour"] = "blue";
    CHECK_THROWS_AS(PipelineConfig::from_json(j), ConfigError);
    j = base;
    j["clustering"]["rounds"] = 3;
    CHECK_THROWS_AS(PipelineConfig::from_json(j), ConfigError);
  }
  SUBCASE("out of range") {
    for (const auto& [path, value] : std::vector<std::pair<std::string, nlohmann::json>>{
             {"/gamma", 1.5}, {"/alpha", 0.0}, {"/clustering/runs", 0}, {"/clustering/threshold", 1.2},
             {"/clustering/tau", -0.1}, {"/clustering/edges", "both"}, {"/rho", "galaxy"}}) {
      auto j = base;
      j[nlohmann::json::json_pointer(path)] = value;
      CAPTURE(path);
      CHECK_THROWS_AS(PipelineConfig::from_json(j), ConfigError);
    }
  }
  SUBCASE("wrong type") {
    auto j = base;
    j["top_n"] = "fifty";
    CHECK_THROWS_AS(PipelineConfig::from_json(j), ConfigError);
  }
}

TEST_CASE("parse_stage") {
  CHECK(parse_stage("export") == Stage::exports);
  CHECK(parse_stage("all") == Stage::exports);
  CHECK(parse_stage("align") == Stage::align);
  CHECK_THROWS_AS(parse_stage("render"), ConfigError);
}

TEST_CASE("run_pipeline: mini corpus matches the golden bundle") {
  Scratch s("golden");
  const auto a = run_pipeline(mini_config(s.dir / "a"));
  auto second = mini_config(s.dir / "b");
  second.threads = 1;
  run_pipeline(second);
  const auto got = tree_contents(s.dir / "a");
  CHECK(got == tree_contents(s.dir / "b"));

  const auto golden = tree_contents(kGolden);
  REQUIRE_FALSE(golden.empty());
  std::vector<std::string> names, golden_names;
  for (const auto& [k, v] : got) names.push_back(k);
  for (const auto& [k, v] : golden) golden_names.push_back(k);
  CHECK(names == golden_names);
  for (const auto& [name, content] : golden) {
    CAPTURE(name);
    const auto it = got.find(name);
    REQUIRE(it != got.end());
    CHECK(it->second == content);
  }

  // The manifest lists every other file with its digest.
  const auto manifest = nlohmann::json::parse(got.at("manifest.json"));
  CHECK(manifest.at("files").size() + 1 == got.size());
  CHECK(a.files.size() + 1 == got.size());
  for (const auto& f : manifest.at("files")) {
    const auto& content = got.at(f.at("path").get<std::string>());
    CHECK(f.at("bytes") == content.size());
    CHECK(f.at("sha256") == sha256_hex(content));
  }
}

TEST_CASE("run_pipeline: alluvial blocks conserve each year's tokens") {
  Scratch s("conserve");
  run_pipeline(mini_config(s.dir / "out"));
  const auto alluvial = nlohmann::json::parse(slurp(s.dir / "out" / "alluvial.json"));
  std::map<int, std::size_t> blocks;
  for (const auto& b : alluvial.at("blocks")) blocks[b.at("year").get<int>()] += b.at("tokens").get<std::size_t>();
  for (int year : {2016, 2017, 2018}) {
    const auto snap = nlohmann::json::parse(slurp(s.dir / "out" / std::to_string(year) / "snapshot.json"));
    CAPTURE(year);
    CHECK(blocks[year] == snap.at("tokens").get<std::size_t>());
  }
}

TEST_CASE("run_pipeline: partial runs stop after the requested stage") {
  Scratch s("partial");
  const auto b = run_pipeline(mini_config(s.dir / "out"), Stage::graph);
  std::set<std::string> files;
  for (const auto& f : b.files) files.insert(f.path);
  CHECK(files.count("2016/reference.graphml") == 1);
  CHECK(files.count("2016/references.csv") == 1);
  CHECK(files.count("2016/clusters.csv") == 0);
  CHECK(files.count("alluvial.json") == 0);
}

TEST_CASE("run_pipeline: failures leave nothing behind") {
  Scratch s("failure");
  fs::create_directories(s.dir / "bad");
  std::ofstream(s.dir / "bad" / "title1.xml") << "<document><seqitem citekey=\"1\">x</document>";
  std::ofstream(s.dir / "bad" / "manifest.json")
      << R"({"collection_id": "bad", "date": "2019-01-01", "documents": ["title1.xml"]})";
  auto c = mini_config(s.dir / "out");
  c.years.push_back({2019, (s.dir / "bad" / "manifest.json").string()});
  try {
    run_pipeline(c);
    FAIL("expected PipelineError");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == Stage::ingest);
    CHECK_THROWS_AS(std::rethrow_exception(e.cause()), ParseError);
    CHECK(std::string(e.what()).find("stage ingest") == 0);
  }
  std::vector<fs::path> left;
  for (const auto& e : fs::directory_iterator(s.dir)) left.push_back(e.path().filename());
  CHECK(left == std::vector<fs::path>{"bad"});

  SUBCASE("an earlier bundle survives a failed rerun") {
    run_pipeline(mini_config(s.dir / "out"));
    const auto before = tree_contents(s.dir / "out");
    CHECK_THROWS_AS(run_pipeline(c), PipelineError);
    CHECK(tree_contents(s.dir / "out") == before);
  }
}

TEST_CASE("run_pipeline: refuses to replace a directory that is not a bundle") {
  Scratch s("guard");
  fs::create_directories(s.dir / "out");
  std::ofstream(s.dir / "out" / "notes.txt") << "keep me";
  CHECK_THROWS_AS(run_pipeline(mini_config(s.dir / "out")), ConfigError);
  CHECK(slurp(s.dir / "out" / "notes.txt") == "keep me");
}

TEST_CASE("run_sweeps on the mini corpus") {
  auto c = PipelineConfig::load(kMini / "config.json");
  c.clustering.runs = 5;
  SweepOptions o;
  o.sensitivity = true;
  o.baseline = 2;
  o.settings = {1, 2, 3, std::nullopt};
  o.robustness_sizes = {1, 5};
  o.repeats = 3;
  const auto a = run_sweeps(c, o);
  REQUIRE(a.size() == 3);
  CHECK(a[0].at("year") == 2016);
  CHECK(a[0].at("sensitivity").size() == 4);
  CHECK(a[0].at("robustness").size() == 2);
  CHECK(run_sweeps(c, o) == a);
}

TEST_CASE("sha256_hex") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("fetch_uscode: validation and cache") {
  Scratch s("fetch");
  FetchParams p;
  p.cache_dir = s.dir;
  p.years = {1850};
  CHECK_THROWS_AS(fetch_uscode(p), ConfigError);
  p.years = {2018};
  p.retries = 0;
  CHECK_THROWS_AS(fetch_uscode(p), ConfigError);

  // A cached archive is used as is; the unroutable URL proves no request is made.
  p.retries = 1;
  p.url_template = "http://127.0.0.1:9/{year}.zip";
  std::ofstream(s.dir / "2018.zip", std::ios::binary) << "archive bytes";
  const auto got = fetch_uscode(p);
  REQUIRE(got.size() == 1);
  CHECK(got[0].from_cache);
  CHECK(got[0].bytes == 13);
  CHECK(got[0].sha256 == sha256_hex("archive bytes"));
  const auto manifest = nlohmann::json::parse(slurp(s.dir / "manifest.json"));
  CHECK(manifest.at("archives").at("2018").at("sha256") == got[0].sha256);

  std::ofstream(s.dir / "2018.zip", std::ios::binary) << "tampered";
  CHECK_THROWS_AS(fetch_uscode(p), IntegrityError);

  p.years = {2017};
  CHECK_THROWS_AS(fetch_uscode(p), NetworkError);
  CHECK_FALSE(fs::exists(s.dir / "2017.zip"));
}
