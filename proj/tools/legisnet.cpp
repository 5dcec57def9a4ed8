// Command-line front end. Exit codes: 0 success, 1 configuration error,
// 2 data error, 3 internal error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "legisnet/importers.hpp"
#include "legisnet/pipeline.hpp"

namespace {

using namespace legisnet;

enum Exit { ok = 0, config_error = 1, data_error = 2, internal_error = 3 };

int classify(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const PipelineError& p) {
    return p.cause() ? classify(p.cause()) : internal_error;
  } catch (const ConfigError&) {
    return config_error;
  } catch (const ParameterError&) {
    return config_error;
  } catch (const ParseError&) {
    return data_error;
  } catch (const SchemaError&) {
    return data_error;
  } catch (const StructureError&) {
    return data_error;
  } catch (const IntegrityError&) {
    return data_error;
  } catch (const MappingError&) {
    return data_error;
  } catch (const NetworkError&) {
    return data_error;
  } catch (...) {
    return internal_error;
  }
}

// Flags that override the config file when given.
struct Overrides {
  std::optional<std::string> output, profile, rho, edges;
  std::optional<double> alpha, threshold, tau, lambda, gamma;
  std::optional<int> runs;
  std::optional<std::string> preferred_n;
  std::optional<std::uint64_t> seed_base;
  std::optional<std::size_t> top_n, top_families;
  std::optional<unsigned> threads;

  void add(CLI::App* app) {
    app->add_option("-o,--output", output, "Output directory");
    app->add_option("--profile", profile, "Citation profile: us, de or a profile file");
    app->add_option("--rho", rho, "Merge condition of the clustered graph");
    app->add_option("--alpha", alpha, "Reference weight factor");
    app->add_option("--runs", runs, "Clustering runs per consensus");
    app->add_option("--threshold", threshold, "Consensus co-occurrence threshold");
    app->add_option("--preferred-n", preferred_n, "Preferred cluster count or 'auto'");
    app->add_option("--seed-base", seed_base, "First clustering seed");
    app->add_option("--tau", tau, "Teleportation probability");
    app->add_option("--lambda", lambda, "Preferred-count penalty weight");
    app->add_option("--edges", edges, "Flow-carrying arcs: all, reference, sequence");
    app->add_option("--gamma", gamma, "Family graph threshold");
    app->add_option("--top-n", top_n, "Clusters drawn per year");
    app->add_option("--top-families", top_families, "Families coloured");
    app->add_option("--threads", threads, "Worker threads (0: all cores)");
  }

  void apply(PipelineConfig& c) const {
    if (output) c.output_dir = *output;
    if (profile) c.profile = *profile;
    if (rho) c.rho = *rho;
    if (alpha) c.alpha = *alpha;
    if (runs) c.clustering.runs = *runs;
    if (threshold) c.clustering.threshold = *threshold;
    if (preferred_n) {
      if (*preferred_n == "auto") {
        c.clustering.preferred_n.reset();
      } else {
        try {
          c.clustering.preferred_n = std::stoi(*preferred_n);
        } catch (const std::exception&) {
          throw ConfigError("--preferred-n expects a number or 'auto'");
        }
      }
    }
    if (seed_base) c.clustering.seed_base = *seed_base;
    if (tau) c.clustering.tau = *tau;
    if (lambda) c.clustering.lambda = *lambda;
    if (edges) c.clustering.edges = *edges;
    if (gamma) c.gamma = *gamma;
    if (top_n) c.top_n = *top_n;
    if (top_families) c.top_families = *top_families;
    if (threads) c.threads = *threads;
    c.validate();
  }
};

PipelineConfig load_config(const std::string& path, const Overrides& o) {
  auto c = PipelineConfig::load(path);
  o.apply(c);
  // A command-line output directory is relative to the working directory.
  if (o.output) c.output_dir = std::filesystem::absolute(*o.output).string();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Legal network analysis: snapshots, graphs, clusters and their evolution"};
  app.require_subcommand(1);
  std::string config_path;
  Overrides overrides;
  std::function<void()> action;
  SweepOptions sweeps;
  std::string sweeps_out;

  const std::vector<std::pair<std::string, std::string>> stages = {
      {"ingest", "Parse snapshots and write their statistics"},
      {"extract", "Extract and resolve cross-references"},
      {"graph", "Build hierarchy, reference and sequence graphs"},
      {"cluster", "Consensus clustering per year"},
      {"align", "Align nodes of adjacent years"},
      {"dynamics", "Cluster graph, family graph and cluster families"},
      {"stats", "Growth, per-unit breakdown and family regressions"},
      {"export", "Alluvial, quotient and family report exports"},
      {"all", "Run every stage"}};
  for (const auto& [name, help] : stages) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    overrides.add(sub);
    if (name == "stats") {
      auto* sens = sub->add_flag("--sensitivity", sweeps.sensitivity, "Run the preferred-count sensitivity sweep");
      sub->add_option("--baseline", sweeps.baseline, "Sensitivity baseline count")->needs(sens);
      sub->add_option("--robustness", sweeps.robustness_sizes, "Consensus sizes for the robustness sweep")->delimiter(',');
      sub->add_option("--repeats", sweeps.repeats, "Consensus repeats per robustness size");
      sub->add_option("--sweeps-out", sweeps_out, "Sweep results file (default: <output>/sweeps.json)");
      sub->callback([&, name] {
        action = [&, name] {
          const auto cfg = load_config(config_path, overrides);
          const auto bundle = run_pipeline(cfg, parse_stage(name));
          std::cout << bundle.directory.string() << ": " << bundle.files.size() << " files\n";
          if (sweeps.sensitivity || !sweeps.robustness_sizes.empty()) {
            const auto path = sweeps_out.empty() ? bundle.directory / "sweeps.json" : std::filesystem::path(sweeps_out);
            std::ofstream f(path);
            f << run_sweeps(cfg, sweeps).dump(2) << "\n";
            if (!f) throw std::runtime_error("cannot write " + path.string());
            std::cout << path.string() << "\n";
          }
        };
      });
      continue;
    }
    sub->callback([&, name] {
      action = [&, name] {
        const auto bundle = run_pipeline(load_config(config_path, overrides), parse_stage(name));
        std::cout << bundle.directory.string() << ": " << bundle.files.size() << " files\n";
      };
    });
  }

  FetchParams fetch;
  auto* fetch_cmd = app.add_subcommand("fetch", "Download annual archives into the cache");
  fetch_cmd->add_option("years", fetch.years, "Years to fetch")->required();
  fetch_cmd->add_option("--cache", fetch.cache_dir, "Cache directory (default: $LEGISNET_CACHE)");
  fetch_cmd->add_option("--url", fetch.url_template, "URL template with {year}");
  fetch_cmd->add_option("--retries", fetch.retries, "Attempts per archive");
  std::string import_dir;
  std::vector<std::string> titles;
  fetch_cmd->add_option("--import", import_dir, "Convert each archive into a snapshot under DIR/<year>");
  fetch_cmd->add_option("--titles", titles, "Only these Titles (e.g. 1,42,5a)")->delimiter(',');
  fetch_cmd->callback([&] {
    action = [&] {
      for (const auto& a : fetch_uscode(fetch)) {
        std::cout << a.year << " " << a.path.string() << " " << a.sha256 << (a.from_cache ? " (cached)" : "") << "\n";
        if (import_dir.empty()) continue;
        const auto date = std::chrono::year_month_day{std::chrono::year{a.year}, std::chrono::January, std::chrono::day{1}};
        const auto r = import_archive(a.path, UscXhtmlImporter{}, std::filesystem::path(import_dir) / std::to_string(a.year),
                                      "us", date, titles);
        std::cout << "  " << r.manifest.string() << ": " << r.documents.size() << " documents\n";
      }
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }
  try {
    if (action) action();
    return ok;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return classify(std::current_exception());
  }
}
