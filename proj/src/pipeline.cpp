#include "legisnet/pipeline.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "legisnet/cluster.hpp"
#include "legisnet/corpus.hpp"
#include "legisnet/exports.hpp"
#include "legisnet/graphs.hpp"
#include "legisnet/parallel.hpp"
#include "legisnet/refextract.hpp"
#include "legisnet/stats.hpp"

namespace legisnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("unknown config key '" + k + "' in " + where);
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
  reject_unknown(j, {"years", "profile", "rho", "viz_rho", "weight", "alpha", "clustering", "alignment", "gamma", "top_n",
                     "top_families", "viz_min_tokens", "degree_label_threshold", "tfidf_terms", "output_dir", "threads"},
                 "config");
  PipelineConfig c;
  c.base_dir = base_dir;
  if (!j.contains("years") || !j.at("years").is_array()) throw ConfigError("config needs a 'years' list");
  for (const auto& y : j.at("years")) {
    reject_unknown(y, {"year", "manifest"}, "years entry");
    YearInput in;
    take(y, "year", in.year);
    take(y, "manifest", in.manifest);
    c.years.push_back(in);
  }
  take(j, "profile", c.profile);
  take(j, "rho", c.rho);
  take(j, "viz_rho", c.viz_rho);
  take(j, "weight", c.weight);
  take(j, "alpha", c.alpha);
  take(j, "gamma", c.gamma);
  take(j, "top_n", c.top_n);
  take(j, "top_families", c.top_families);
  take(j, "viz_min_tokens", c.viz_min_tokens);
  take(j, "degree_label_threshold", c.degree_label_threshold);
  take(j, "tfidf_terms", c.tfidf_terms);
  take(j, "output_dir", c.output_dir);
  take(j, "threads", c.threads);
  if (j.contains("clustering")) {
    const auto& cl = j.at("clustering");
    reject_unknown(cl, {"runs", "threshold", "preferred_n", "seed_base", "tau", "lambda", "edges"}, "clustering");
    take(cl, "runs", c.clustering.runs);
    take(cl, "threshold", c.clustering.threshold);
    if (cl.contains("preferred_n")) {
      const auto& p = cl.at("preferred_n");
      if (p.is_null() || p == "auto") c.clustering.preferred_n.reset();
      else take(cl, "preferred_n", *(c.clustering.preferred_n = 0));
    }
    take(cl, "seed_base", c.clustering.seed_base);
    take(cl, "tau", c.clustering.tau);
    take(cl, "lambda", c.clustering.lambda);
    take(cl, "edges", c.clustering.edges);
  }
  if (j.contains("alignment")) {
    const auto& al = j.at("alignment");
    reject_unknown(al, {"min_unique_length", "hops", "min_similarity"}, "alignment");
    take(al, "min_unique_length", c.alignment.min_unique_length);
    take(al, "hops", c.alignment.hops);
    take(al, "min_similarity", c.alignment.min_similarity);
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

json PipelineConfig::to_json() const {
  json years_j = json::array();
  for (const auto& y : years) years_j.push_back({{"year", y.year}, {"manifest", y.manifest}});
  return {{"years", years_j},
          {"profile", profile},
          {"rho", rho},
          {"viz_rho", viz_rho},
          {"weight", weight},
          {"alpha", alpha},
          {"clustering",
           {{"runs", clustering.runs},
            {"threshold", clustering.threshold},
            {"preferred_n", clustering.preferred_n ? json(*clustering.preferred_n) : json("auto")},
            {"seed_base", clustering.seed_base},
            {"tau", clustering.tau},
            {"lambda", clustering.lambda},
            {"edges", clustering.edges}}},
          {"alignment",
           {{"min_unique_length", alignment.min_unique_length},
            {"hops", alignment.hops},
            {"min_similarity", alignment.min_similarity}}},
          {"gamma", gamma},
          {"top_n", top_n},
          {"top_families", top_families},
          {"viz_min_tokens", viz_min_tokens},
          {"degree_label_threshold", degree_label_threshold},
          {"tfidf_terms", tfidf_terms},
          {"output_dir", output_dir},
          {"threads", threads}};
}

void PipelineConfig::validate() const {
  const auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (years.empty()) fail("no years configured");
  for (std::size_t i = 0; i < years.size(); ++i) {
    if (years[i].manifest.empty()) fail("year " + std::to_string(years[i].year) + " has no manifest");
    if (i > 0 && years[i].year <= years[i - 1].year) fail("years must be strictly increasing");
  }
  if (profile.empty()) fail("profile must not be empty");
  MergeCondition::parse(rho);
  MergeCondition::parse(viz_rho);
  if (weight != "decay") fail("unknown weight function '" + weight + "'");
  if (!(alpha > 0 && alpha <= 1)) fail("alpha must lie in (0, 1]");
  if (clustering.runs < 1) fail("clustering.runs must be positive");
  if (!(clustering.threshold > 0 && clustering.threshold <= 1)) fail("clustering.threshold must lie in (0, 1]");
  if (clustering.preferred_n && *clustering.preferred_n < 1) fail("clustering.preferred_n must be positive");
  if (!(clustering.tau >= 0 && clustering.tau < 1)) fail("clustering.tau must lie in [0, 1)");
  if (!(clustering.lambda >= 0)) fail("clustering.lambda must be non-negative");
  if (clustering.edges != "all" && clustering.edges != "reference" && clustering.edges != "sequence")
    fail("clustering.edges must be all, reference or sequence");
  if (alignment.hops < 0) fail("alignment.hops must be non-negative");
  if (!(alignment.min_similarity >= 0 && alignment.min_similarity <= 1)) fail("alignment.min_similarity must lie in [0, 1]");
  if (!(gamma >= 0 && gamma <= 1)) fail("gamma must lie in [0, 1]");
  if (top_n < 1) fail("top_n must be positive");
  if (output_dir.empty()) fail("output_dir must not be empty");
}

fs::path PipelineConfig::resolve(const std::string& path) const {
  const fs::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::ingest: return "ingest";
    case Stage::extract: return "extract";
    case Stage::graph: return "graph";
    case Stage::cluster: return "cluster";
    case Stage::align: return "align";
    case Stage::dynamics: return "dynamics";
    case Stage::stats: return "stats";
    case Stage::exports: return "export";
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  for (auto s : {Stage::ingest, Stage::extract, Stage::graph, Stage::cluster, Stage::align, Stage::dynamics,
                 Stage::stats, Stage::exports})
    if (to_string(s) == name) return s;
  if (name == "all") return Stage::exports;
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw StateError("sha256 failed");
  std::string out;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    out += buf;
  }
  return out;
}

namespace {

struct YearState {
  int year = 0;
  Snapshot snapshot;
  ExtractionResult extraction;
  SnapshotStats stats;
  LegalGraph hierarchy, reference, sequence, subsequence;
  ConsensusResult consensus;
};

class BundleWriter {
 public:
  explicit BundleWriter(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& rel, const std::string& content) {
    const auto path = dir_ / rel;
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw StateError("cannot write " + path.string());
    files_.push_back({rel, content.size(), sha256_hex(content)});
  }
  void write_json(const std::string& rel, const json& j) { write(rel, j.dump(2) + "\n"); }

  std::vector<BundleFile> finish() {
    std::sort(files_.begin(), files_.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    json m = json::array();
    for (const auto& f : files_) m.push_back({{"path", f.path}, {"bytes", f.bytes}, {"sha256", f.sha256}});
    auto files = files_;
    write_json("manifest.json", {{"files", m}});
    return files;
  }

 private:
  fs::path dir_;
  std::vector<BundleFile> files_;
};

// Runs one stage, converting any failure into a PipelineError.
template <typename Fn>
void stage(Stage s, Fn&& fn) {
  try {
    fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(s, std::current_exception(), e.what());
  }
}

std::optional<EdgeType> flow_edges(const std::string& edges) {
  if (edges == "reference") return EdgeType::reference;
  if (edges == "sequence") return EdgeType::sequence;
  return std::nullopt;
}

std::string alignment_name(int a, int b) { return "alignments/" + std::to_string(a) + "-" + std::to_string(b) + ".csv"; }

void produce(const PipelineConfig& cfg, Stage until, BundleWriter& out) {
  const auto reached = [&](Stage s) { return static_cast<int>(until) >= static_cast<int>(s); };
  const auto n = cfg.years.size();
  std::vector<YearState> years(n);
  // Output location and thread count do not affect results; leaving them out
  // keeps bundles comparable across machines.
  auto recorded = cfg.to_json();
  recorded.erase("output_dir");
  recorded.erase("threads");
  out.write_json("config.json", recorded);

  stage(Stage::ingest, [&] {
    parallel_for(n, [&](std::size_t i) {
      years[i].year = cfg.years[i].year;
      years[i].snapshot = load_snapshot(cfg.resolve(cfg.years[i].manifest));
      years[i].stats = snapshot_stats(years[i].snapshot);
    }, cfg.threads);
    for (const auto& y : years) {
      const auto st = snapshot_stats(y.snapshot);
      out.write_json(std::to_string(y.year) + "/snapshot.json",
                     {{"collection_id", y.snapshot.collection_id()},
                      {"date", format_date(y.snapshot.date())},
                      {"documents", y.snapshot.documents().size()},
                      {"tokens", st.tokens},
                      {"structures", st.structures}});
    }
  });
  if (!reached(Stage::extract)) return;

  stage(Stage::extract, [&] {
    const bool builtin = cfg.profile == "us" || cfg.profile == "de";
    const auto base = builtin ? CitationProfile::builtin(cfg.profile) : CitationProfile::load(cfg.resolve(cfg.profile));
    parallel_for(n, [&](std::size_t i) {
      auto& y = years[i];
      y.extraction = extract_all(y.snapshot, base.for_snapshot(y.snapshot));
      y.stats = snapshot_stats(y.snapshot, y.extraction.references.size());
    }, cfg.threads);
    for (const auto& y : years) {
      const auto dir = std::to_string(y.year) + "/";
      out.write(dir + "references.csv", references_csv(y.extraction.references));
      out.write_json(dir + "extraction.json", y.extraction.report.to_json());
    }
  });
  if (!reached(Stage::graph)) return;

  stage(Stage::graph, [&] {
    SequenceParams clustered;
    clustered.rho = MergeCondition::parse(cfg.rho);
    clustered.alpha = cfg.alpha;
    SequenceParams finest;
    finest.alpha = cfg.alpha;
    parallel_for(n, [&](std::size_t i) {
      auto& y = years[i];
      y.hierarchy = build_hierarchy(y.snapshot);
      y.reference = build_reference(y.hierarchy, y.extraction.references);
      y.sequence = build_sequence(y.snapshot, y.reference, clustered);
      y.subsequence = build_subsequence(y.snapshot, y.reference, finest);
    }, cfg.threads);
    for (const auto& y : years) {
      const auto dir = std::to_string(y.year) + "/";
      out.write(dir + "reference.graphml", to_graphml(y.reference));
      out.write(dir + "sequence.graphml", to_graphml(y.sequence));
      out.write(dir + "subsequence.graphml", to_graphml(y.subsequence));
    }
  });
  if (!reached(Stage::cluster)) return;

  stage(Stage::cluster, [&] {
    for (auto& y : years) {
      const auto flow = visit_rates(y.sequence, cfg.clustering.tau, flow_edges(cfg.clustering.edges));
      ConsensusParams p;
      p.runs = cfg.clustering.runs;
      p.threshold = cfg.clustering.threshold;
      p.preferred_n = cfg.clustering.preferred_n;
      p.lambda = cfg.clustering.preferred_n ? cfg.clustering.lambda : 0.0;
      p.seed_base = cfg.clustering.seed_base;
      p.threads = cfg.threads;
      y.consensus = consensus(flow, p);
      y.consensus.clustering.snapshot_id = y.snapshot.collection_id() + ":" + format_date(y.snapshot.date());
      const auto dir = std::to_string(y.year) + "/";
      out.write(dir + "clusters.csv", y.consensus.clustering.to_csv());
      out.write_json(dir + "consensus.json", y.consensus.report());
    }
  });
  if (!reached(Stage::align)) return;

  std::vector<NodeAlignment> alignments(n > 0 ? n - 1 : 0);
  stage(Stage::align, [&] {
    parallel_for(alignments.size(), [&](std::size_t i) {
      alignments[i] = align_nodes(years[i].subsequence, years[i + 1].subsequence, cfg.alignment);
    }, cfg.threads);
    json summary = json::array();
    for (std::size_t i = 0; i < alignments.size(); ++i) {
      const auto& a = alignments[i];
      out.write(alignment_name(years[i].year, years[i + 1].year), a.to_csv());
      std::map<std::string, std::size_t> passes;
      for (auto p : a.pass)
        if (p != AlignPass::none) ++passes[std::string(to_string(p))];
      summary.push_back({{"from", years[i].year},
                         {"to", years[i + 1].year},
                         {"source_nodes", a.source_ids.size()},
                         {"target_nodes", a.target_ids.size()},
                         {"matched", a.matched()},
                         {"coverage", a.coverage()},
                         {"passes", passes}});
    }
    out.write_json("alignments/summary.json", summary);
  });
  if (!reached(Stage::dynamics)) return;

  ClusterGraph cg;
  FamilyGraph fg;
  std::vector<ClusterFamily> families;
  stage(Stage::dynamics, [&] {
    std::vector<YearLayer> layers;
    for (const auto& y : years) layers.push_back(make_layer(y.year, y.sequence, y.consensus.clustering, y.subsequence));
    cg = build_cluster_graph(layers, alignments);
    fg = build_family_graph(cg, cfg.gamma);
    families = cluster_families(fg);
    out.write("cluster_graph.csv", cg.to_csv());
    out.write("cluster_graph.graphml", cg.to_graphml());
    std::string fcsv = "source,target,weight\n";
    for (const auto& a : fg.arcs)
      fcsv += fg.nodes[static_cast<std::size_t>(a.source)].id() + "," + fg.nodes[static_cast<std::size_t>(a.target)].id() +
              "," + std::to_string(a.weight) + "\n";
    out.write("family_graph.csv", fcsv);
    out.write_json("families.json", family_report(families, fg));
  });
  if (!reached(Stage::stats)) return;

  stage(Stage::stats, [&] {
    std::map<int, SnapshotStats> per_year;
    for (const auto& y : years) {
      per_year[y.year] = y.stats;
      out.write(std::to_string(y.year) + "/units.csv", breakdown_csv(per_unit_breakdown(y.snapshot, y.extraction.references)));
    }
    out.write("growth.csv", growth_series(per_year).to_csv());
    std::vector<std::pair<std::string, RegressionResult>> rows;
    if (years.size() >= 2)
      for (const auto& f : families) {
        if (static_cast<std::size_t>(f.index) >= cfg.top_families) break;
        std::map<int, double> series;
        for (const auto& [year, tokens] : family_size_series(f, fg)) series[year] = static_cast<double>(tokens);
        rows.emplace_back(std::to_string(f.index), ols_slope(series));
      }
    out.write("regression.csv", regression_csv(rows));
  });
  if (!reached(Stage::exports)) return;

  stage(Stage::exports, [&] {
    const auto alluvial = alluvial_export(cg, families, {cfg.top_n, cfg.top_families, cfg.gamma});
    out.write_json("alluvial.json", alluvial.to_json());
    out.write("alluvial.svg", alluvial.to_svg());
    std::vector<ClusteredYear> clustered;
    for (const auto& y : years) {
      clustered.push_back({y.year, &y.sequence, &y.consensus.clustering});
      std::map<std::string, int> cluster_of;
      for (std::size_t i = 0; i < y.sequence.nodes.size(); ++i)
        cluster_of[y.sequence.nodes[i].id] = y.consensus.clustering.module[i];
      auto q = quotient(y.sequence, group_selector(y.snapshot, MergeCondition::parse(cfg.viz_rho)));
      for (auto& n : q.nodes)
        if (const auto ref = y.snapshot.find_id(n.id)) n.label = y.snapshot.document(ref->document).path(ref->node);
      QuotientVizParams vp;
      vp.min_tokens = cfg.viz_min_tokens;
      vp.degree_label_threshold = cfg.degree_label_threshold;
      const auto viz = quotient_viz_export(q, cluster_of, vp);
      out.write_json(std::to_string(y.year) + "/quotient.json", viz.to_json());
      out.write(std::to_string(y.year) + "/quotient.svg", viz.to_svg());
    }
    const auto report = family_report_export(families, fg, clustered, cfg.top_families, cfg.tfidf_terms);
    out.write("family_report.csv", report.to_csv());
    out.write("family_report.html", report.to_html());
    std::string tf = "family,rank,term,tf,idf,score\n";
    for (std::size_t j = 0; j < report.terms.size(); ++j)
      for (std::size_t r = 0; r < report.terms[j].size(); ++r) {
        const auto& t = report.terms[j][r];
        char buf[96];
        std::snprintf(buf, sizeof buf, ",%zu,%.17g,%.17g", t.tf, t.idf, t.score);
        tf += std::to_string(report.families[j].index) + "," + std::to_string(r + 1) + "," + t.term + buf + "\n";
      }
    out.write("tfidf.csv", tf);
  });
}

}  // namespace

nlohmann::json run_sweeps(const PipelineConfig& config, const SweepOptions& options) {
  config.validate();
  const bool builtin = config.profile == "us" || config.profile == "de";
  const auto base = builtin ? CitationProfile::builtin(config.profile) : CitationProfile::load(config.resolve(config.profile));
  SequenceParams sp;
  sp.rho = MergeCondition::parse(config.rho);
  sp.alpha = config.alpha;
  ConsensusParams cp;
  cp.runs = config.clustering.runs;
  cp.threshold = config.clustering.threshold;
  cp.lambda = config.clustering.lambda;
  cp.seed_base = config.clustering.seed_base;
  cp.threads = config.threads;
  json out = json::array();
  for (const auto& in : config.years) {
    FlowGraph flow;
    stage(Stage::cluster, [&] {
      const auto snapshot = load_snapshot(config.resolve(in.manifest));
      const auto refs = extract_all(snapshot, base.for_snapshot(snapshot)).references;
      const auto seq = build_sequence(snapshot, build_reference(build_hierarchy(snapshot), refs), sp);
      flow = visit_rates(seq, config.clustering.tau, flow_edges(config.clustering.edges));
    });
    json year = {{"year", in.year}};
    stage(Stage::stats, [&] {
      if (options.sensitivity) {
        const auto settings = options.settings.empty() ? default_sensitivity_settings() : options.settings;
        year["sensitivity"] = sweep_json(sensitivity_sweep(flow, settings, options.baseline, cp));
      }
      if (!options.robustness_sizes.empty()) {
        ConsensusParams rp = cp;
        rp.preferred_n = config.clustering.preferred_n;
        if (!rp.preferred_n) rp.lambda = 0;
        year["robustness"] = robustness_json(robustness_sweep(flow, options.robustness_sizes, options.repeats, rp));
      }
    });
    out.push_back(year);
  }
  return out;
}

Bundle run_pipeline(const PipelineConfig& config, Stage until) {
  config.validate();
  const fs::path target = config.resolve(config.output_dir);
  const fs::path parent = target.parent_path().empty() ? fs::path(".") : target.parent_path();
  // Only earlier bundles are replaced; anything else is left alone.
  if (fs::exists(target) && !(fs::is_directory(target) && (fs::is_empty(target) || fs::exists(target / "manifest.json"))))
    throw ConfigError("output " + target.string() + " exists and is not a bundle");
  fs::create_directories(parent);
  const fs::path tmp = parent / ("." + target.filename().string() + ".tmp-" + std::to_string(::getpid()));
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  Bundle bundle;
  try {
    BundleWriter writer(tmp);
    produce(config, until, writer);
    bundle.files = writer.finish();
    fs::remove_all(target);
    fs::rename(tmp, target);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
  bundle.directory = target;
  return bundle;
}

}  // namespace legisnet
