#pragma once

// End-to-end pipeline: configuration, stage orchestration and the output
// bundle, plus the archive fetcher.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "legisnet/dynamics.hpp"
#include "legisnet/error.hpp"

namespace legisnet {

struct YearInput {
  int year = 0;
  /// Snapshot manifest; relative paths resolve against the config file.
  std::string manifest;
};

struct ClusteringConfig {
  int runs = 1000;
  double threshold = 0.95;
  /// nullopt: no preferred count and no penalty.
  std::optional<int> preferred_n = 100;
  std::uint64_t seed_base = 0;
  double tau = 0.15;
  double lambda = 1.0;
  /// "all", "reference" or "sequence": arcs that carry flow.
  std::string edges = "all";
};

struct PipelineConfig {
  std::vector<YearInput> years;
  /// Built-in profile name ("us", "de") or a path to a profile file.
  std::string profile = "us";
  /// Merge condition of the clustered graph.
  std::string rho = "chapter-or-title";
  /// Grouping of the drawn quotient graph.
  std::string viz_rho = "chapter-or-title";
  std::string weight = "decay";
  double alpha = 0.5;
  ClusteringConfig clustering;
  AlignParams alignment;
  double gamma = 0.15;
  std::size_t top_n = 50;
  std::size_t top_families = 20;
  std::size_t viz_min_tokens = 5000;
  std::size_t degree_label_threshold = 20;
  std::size_t tfidf_terms = 10;
  std::string output_dir = "out";
  /// Worker threads; 0 picks the hardware concurrency.
  unsigned threads = 0;
  /// Directory relative paths resolve against; not serialized.
  std::filesystem::path base_dir = ".";

  /// Unknown keys and out-of-range values throw ConfigError.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
  static PipelineConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void validate() const;

  std::filesystem::path resolve(const std::string& path) const;
};

enum class Stage { ingest, extract, graph, cluster, align, dynamics, stats, exports };

std::string_view to_string(Stage stage);
/// Throws ConfigError for unknown names.
Stage parse_stage(std::string_view name);

/// A stage failed; `cause` holds the original exception.
class PipelineError : public Error {
 public:
  PipelineError(Stage stage, std::exception_ptr cause, const std::string& what)
      : Error("stage " + std::string(to_string(stage)) + ": " + what), stage_(stage), cause_(std::move(cause)) {}
  Stage stage() const noexcept { return stage_; }
  const std::exception_ptr& cause() const noexcept { return cause_; }

 private:
  Stage stage_;
  std::exception_ptr cause_;
};

struct BundleFile {
  std::string path;
  std::size_t bytes = 0;
  std::string sha256;
};

struct Bundle {
  std::filesystem::path directory;
  std::vector<BundleFile> files;
};

/// Runs every stage up to and including `until` and writes their outputs.
/// The bundle is assembled in a sibling temporary directory and renamed over
/// the output directory on success; on failure nothing is left behind. The
/// same config gives byte-identical files. An existing output directory is
/// replaced only when it is empty or holds a bundle (ConfigError otherwise).
Bundle run_pipeline(const PipelineConfig& config, Stage until = Stage::exports);

struct SweepOptions {
  bool sensitivity = false;
  int baseline = 100;
  /// Empty: the default settings.
  std::vector<std::optional<int>> settings;
  /// Consensus sizes for the robustness sweep; empty skips it.
  std::vector<int> robustness_sizes;
  int repeats = 100;
};

/// Sensitivity and robustness sweeps per configured year, over the clustered
/// graph and clustering parameters of the config.
nlohmann::json run_sweeps(const PipelineConfig& config, const SweepOptions& options);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);

struct FetchParams {
  std::vector<int> years;
  std::filesystem::path cache_dir;
  /// "{year}" is replaced by the year; "{yy}" by its last two digits.
  std::string url_template = "https://uscode.house.gov/download/annualhistoricalarchives/XHTML/{year}.zip";
  int retries = 3;
};

struct FetchedArchive {
  int year = 0;
  std::filesystem::path path;
  std::string sha256;
  std::size_t bytes = 0;
  bool from_cache = false;
};

/// Default cache: $LEGISNET_CACHE, else ~/.cache/legisnet.
std::filesystem::path default_cache_dir();

/// Downloads missing archives into the cache and records them in
/// manifest.json there. Cached archives are verified against the recorded
/// checksum (IntegrityError on mismatch) and not downloaded again. Years
/// outside 1994..2100 throw ConfigError; HTTP failures throw NetworkError
/// after the retries.
std::vector<FetchedArchive> fetch_uscode(const FetchParams& params);

}  // namespace legisnet
