#pragma once

// Growth accounting, growth regression, clustering comparison, TF-IDF term
// summaries, and the sensitivity and robustness sweeps.

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "legisnet/cluster.hpp"
#include "legisnet/corpus.hpp"
#include "legisnet/refextract.hpp"

namespace legisnet {

struct GrowthPoint {
  int year = 0;
  std::size_t tokens = 0;
  std::size_t structures = 0;
  std::size_t references = 0;
  /// Values divided by the first year's.
  double rel_tokens = 1.0;
  double rel_structures = 1.0;
  double rel_references = 1.0;
};

struct GrowthSeries {
  std::vector<GrowthPoint> points;

  std::string to_csv() const;
};

/// Points ordered by year. Snapshots without resolved references count 0
/// references; a zero first-year value makes the relative series NaN.
GrowthSeries growth_series(const std::map<int, SnapshotStats>& per_year);

struct UnitCounts {
  std::size_t tokens = 0;
  std::size_t structures = 0;
  std::size_t out_refs = 0;
  std::size_t in_refs = 0;
  std::size_t internal_refs = 0;
};

using UnitSelector = std::function<std::optional<std::string>(const Snapshot&, ElementRef)>;

/// Unit = document key (a Title or a statute).
UnitSelector document_unit();

/// Per-unit tokens, element counts and references, split into outgoing,
/// incoming and internal by the units of both endpoints. Throws MappingError
/// when the selector is undefined for an element or a reference endpoint is
/// unknown.
std::map<std::string, UnitCounts> per_unit_breakdown(const Snapshot& snapshot,
                                                     const std::vector<ResolvedReference>& references,
                                                     const UnitSelector& unit = document_unit());

std::string breakdown_csv(const std::map<std::string, UnitCounts>& table);

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);
/// CDF of Student's t with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t n = 0;
  /// Absent for n < 3.
  std::optional<double> std_error;
  std::optional<double> t_statistic;
  /// Two-sided; absent for n < 3.
  std::optional<double> p_value;
  /// Residuals vanish: the p-value is reported as exactly 0.
  bool degenerate = false;
};

/// Simple least squares of value on year. Throws ParameterError when fewer
/// than two distinct years are given.
RegressionResult ols_slope(const std::map<int, double>& series);

/// "family,slope,intercept,stderr,p_value" with one line per family.
std::string regression_csv(const std::vector<std::pair<std::string, RegressionResult>>& rows);

/// I(X;Y) / sqrt(H(X) H(Y)) with natural logarithms. When either entropy is
/// zero, 1 for identical partitions and 0 otherwise. Throws ParameterError
/// for different sizes.
double nmi(const std::vector<int>& x, const std::vector<int>& y);

/// Pair-counting adjusted Rand index. When the expected and maximal index
/// coincide, 1 for identical partitions and 0 otherwise. Throws
/// ParameterError for different sizes or fewer than two elements.
double ari(const std::vector<int>& x, const std::vector<int>& y);

struct TermScore {
  std::string term;
  std::size_t tf = 0;
  double idf = 0.0;
  double score = 0.0;
};

/// Structural nouns left out of term rankings.
const std::vector<std::string>& default_term_exclusions();

/// Lower-cased word terms of a text; terms without letters are dropped.
std::vector<std::string> terms_of(std::string_view text);

/// One document per family. tf is the raw count, idf = ln(N / df); terms with
/// a zero score are never ranked. Ties go to the lexicographically smaller term.
std::vector<std::vector<TermScore>> tfidf_top_terms(const std::vector<std::string>& family_texts, std::size_t k = 10,
                                                    const std::vector<std::string>& exclusions = default_term_exclusions());

struct Similarity {
  double nmi = 0.0;
  double ari = 0.0;
};

Similarity compare_partitions(const std::vector<int>& x, const std::vector<int>& y);

struct SweepPoint {
  /// nullopt: no preferred count and no penalty.
  std::optional<int> preferred_n;
  Similarity vs_baseline;
  int clusters = 0;
};

/// 10, 20, ..., 150, 200 and the unpenalized setting.
std::vector<std::optional<int>> default_sensitivity_settings();

/// Consensus per setting compared with the consensus at `baseline`; all runs
/// share `base.seed_base`. Settings run in order; each consensus parallelizes
/// internally.
std::vector<SweepPoint> sensitivity_sweep(const FlowGraph& flow, const std::vector<std::optional<int>>& settings,
                                          int baseline, const ConsensusParams& base);

nlohmann::json sweep_json(const std::vector<SweepPoint>& points);

struct Summary {
  std::size_t count = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
};

/// Linear-interpolation quantiles. Empty input gives a zero summary.
Summary summarize(std::vector<double> values);

struct RobustnessPoint {
  int consensus_runs = 0;
  std::vector<std::vector<int>> partitions;
  /// All unordered pairs of partitions, in (i, j) order with i < j.
  std::vector<Similarity> pairs;
  Summary nmi;
  Summary ari;
};

/// For every consensus size, `repeats` consensus clusterings with seed bases
/// seed_base + r * size (or all equal to seed_base when `same_seeds`) and
/// their pairwise similarities.
std::vector<RobustnessPoint> robustness_sweep(const FlowGraph& flow, const std::vector<int>& consensus_sizes,
                                              int repeats, const ConsensusParams& base, bool same_seeds = false);

nlohmann::json robustness_json(const std::vector<RobustnessPoint>& points);

}  // namespace legisnet
