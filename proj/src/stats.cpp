#include "legisnet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

#include "legisnet/error.hpp"
#include "utf8.hpp"

namespace legisnet {

namespace {

double ratio(std::size_t v, std::size_t first) {
  return first == 0 ? std::numeric_limits<double>::quiet_NaN() : static_cast<double>(v) / static_cast<double>(first);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

GrowthSeries growth_series(const std::map<int, SnapshotStats>& per_year) {
  GrowthSeries s;
  for (const auto& [year, st] : per_year) {
    GrowthPoint p;
    p.year = year;
    p.tokens = st.tokens;
    p.structures = st.structures;
    p.references = st.references.value_or(0);
    s.points.push_back(p);
  }
  if (s.points.empty()) return s;
  const auto first = s.points.front();
  for (auto& p : s.points) {
    p.rel_tokens = ratio(p.tokens, first.tokens);
    p.rel_structures = ratio(p.structures, first.structures);
    p.rel_references = ratio(p.references, first.references);
  }
  return s;
}

std::string GrowthSeries::to_csv() const {
  std::string out = "year,tokens,structures,references,rel_tokens,rel_structures,rel_references\n";
  for (const auto& p : points)
    out += std::to_string(p.year) + "," + std::to_string(p.tokens) + "," + std::to_string(p.structures) + "," +
           std::to_string(p.references) + "," + fmt(p.rel_tokens) + "," + fmt(p.rel_structures) + "," +
           fmt(p.rel_references) + "\n";
  return out;
}

UnitSelector document_unit() {
  return [](const Snapshot& s, ElementRef r) -> std::optional<std::string> {
    return s.document(static_cast<std::size_t>(r.document)).key();
  };
}

std::map<std::string, UnitCounts> per_unit_breakdown(const Snapshot& snapshot,
                                                     const std::vector<ResolvedReference>& references,
                                                     const UnitSelector& unit) {
  std::map<std::string, UnitCounts> table;
  const auto unit_of = [&](ElementRef r) {
    auto u = unit(snapshot, r);
    if (!u) throw MappingError("no unit for element " + snapshot.element(r).id);
    return *u;
  };
  for (std::size_t d = 0; d < snapshot.documents().size(); ++d) {
    const auto& doc = snapshot.document(d);
    for (std::size_t i = 0; i < doc.size(); ++i) {
      auto& row = table[unit_of({static_cast<int>(d), static_cast<int>(i)})];
      ++row.structures;
      if (!doc.excluded(static_cast<int>(i))) row.tokens += count_tokens(doc.nodes()[i].text);
    }
  }
  const auto endpoint = [&](const std::string& id) {
    const auto r = snapshot.find_id(id);
    if (!r) throw MappingError("unknown reference endpoint " + id);
    return unit_of(*r);
  };
  for (const auto& ref : references) {
    const auto from = endpoint(ref.source_id), to = endpoint(ref.target_id);
    if (from == to) {
      ++table[from].internal_refs;
    } else {
      ++table[from].out_refs;
      ++table[to].in_refs;
    }
  }
  return table;
}

std::string breakdown_csv(const std::map<std::string, UnitCounts>& table) {
  std::string out = "unit,tokens,structures,out_refs,in_refs,internal_refs\n";
  for (const auto& [u, c] : table)
    out += u + "," + std::to_string(c.tokens) + "," + std::to_string(c.structures) + "," + std::to_string(c.out_refs) +
           "," + std::to_string(c.in_refs) + "," + std::to_string(c.internal_refs) + "\n";
  return out;
}

namespace {

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double beta_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300, eps = 1e-16;
  double c = 1.0, d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 100000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < eps) return h;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0) || !(b > 0) || !(x >= 0) || !(x <= 1)) throw ParameterError("incomplete_beta: argument out of range");
  if (x == 0 || x == 1) return x;
  const double front =
      std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
  return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

namespace {

// P(|T| > |t|) without cancellation in the tails.
double two_sided_tail(double t, double dof) {
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

}  // namespace

double student_t_cdf(double t, double dof) {
  if (!(dof > 0)) throw ParameterError("student_t_cdf: dof must be positive");
  const double tail = 0.5 * two_sided_tail(t, dof);
  return t > 0 ? 1.0 - tail : tail;
}

RegressionResult ols_slope(const std::map<int, double>& series) {
  if (series.size() < 2) throw ParameterError("ols_slope: need at least two distinct years");
  RegressionResult r;
  r.n = series.size();
  const double n = static_cast<double>(r.n);
  double mx = 0, my = 0;
  for (const auto& [x, y] : series) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [x, y] : series) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double sse = 0;
  for (const auto& [x, y] : series) {
    const double e = (y - my) - r.slope * (x - mx);
    sse += e * e;
  }
  // Rounding leaves residuals of order eps * |y| on exact lines.
  r.degenerate = syy == 0 || sse <= 1e-24 * syy;
  if (r.n < 3) return r;
  if (r.degenerate) {
    r.std_error = 0.0;
    r.t_statistic = r.slope == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.slope);
    r.p_value = 0.0;
    return r;
  }
  const double se = std::sqrt(sse / (n - 2) / sxx);
  r.std_error = se;
  r.t_statistic = r.slope / se;
  r.p_value = std::clamp(two_sided_tail(*r.t_statistic, n - 2), 0.0, 1.0);
  return r;
}

std::string regression_csv(const std::vector<std::pair<std::string, RegressionResult>>& rows) {
  std::string out = "family,slope,intercept,stderr,p_value\n";
  const auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
  for (const auto& [name, r] : rows)
    out += name + "," + fmt(r.slope) + "," + fmt(r.intercept) + "," + opt(r.std_error) + "," + opt(r.p_value) + "\n";
  return out;
}

namespace {

struct Contingency {
  std::size_t n = 0;
  std::map<int, std::size_t> rows, cols;
  std::map<std::pair<int, int>, std::size_t> cells;
};

Contingency contingency(const std::vector<int>& x, const std::vector<int>& y) {
  if (x.size() != y.size()) throw ParameterError("partitions differ in size");
  Contingency c;
  c.n = x.size();
  for (std::size_t i = 0; i < x.size(); ++i) {
    ++c.rows[x[i]];
    ++c.cols[y[i]];
    ++c.cells[{x[i], y[i]}];
  }
  return c;
}

bool same_partition(const std::vector<int>& x, const std::vector<int>& y) {
  return canonical_labels(x) == canonical_labels(y);
}

double entropy(const std::map<int, std::size_t>& counts, double n) {
  double h = 0;
  for (const auto& [k, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

__int128 pairs(std::size_t k) { return static_cast<__int128>(k) * (static_cast<__int128>(k) - 1) / 2; }

}  // namespace

double nmi(const std::vector<int>& x, const std::vector<int>& y) {
  const auto c = contingency(x, y);
  if (same_partition(x, y)) return 1.0;
  const double n = static_cast<double>(c.n);
  const double hx = entropy(c.rows, n), hy = entropy(c.cols, n);
  if (hx == 0 || hy == 0) return 0.0;
  double mi = 0;
  for (const auto& [k, nij] : c.cells) {
    const double a = static_cast<double>(c.rows.at(k.first)), b = static_cast<double>(c.cols.at(k.second));
    const double v = static_cast<double>(nij);
    mi += v / n * std::log(n * v / (a * b));
  }
  return std::clamp(mi / std::sqrt(hx * hy), 0.0, 1.0);
}

double ari(const std::vector<int>& x, const std::vector<int>& y) {
  const auto c = contingency(x, y);
  if (c.n < 2) throw ParameterError("ari: need at least two elements");
  __int128 index = 0, a = 0, b = 0;
  for (const auto& [k, v] : c.cells) index += pairs(v);
  for (const auto& [k, v] : c.rows) a += pairs(v);
  for (const auto& [k, v] : c.cols) b += pairs(v);
  const __int128 total = pairs(c.n);
  // ARI = (index - ab/N) / ((a+b)/2 - ab/N), scaled by 2N.
  const __int128 num = 2 * (index * total - a * b);
  const __int128 den = (a + b) * total - 2 * a * b;
  if (den == 0) return same_partition(x, y) ? 1.0 : 0.0;
  return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
}

Similarity compare_partitions(const std::vector<int>& x, const std::vector<int>& y) { return {nmi(x, y), ari(x, y)}; }

const std::vector<std::string>& default_term_exclusions() {
  static const std::vector<std::string> terms = {
      "section", "sections",  "subsection", "subsections", "title",   "titles",   "subtitle",  "subtitles",
      "chapter", "chapters",  "subchapter", "subchapters", "part",    "parts",    "subpart",   "subparts",
      "paragraph", "paragraphs", "subparagraph", "subparagraphs", "clause", "clauses", "subclause", "article",
      "articles", "absatz",   "absätze",    "absatzes",    "satz",    "sätze",    "satzes",    "abschnitt",
      "abschnitts", "abschnitte", "kapitel", "titel",     "teil",    "teile",    "buch",      "artikel",
      "paragraf", "paragrafen", "paragraphen", "nummer",   "nummern", "unterabschnitt", "unterabschnitts"};
  return terms;
}

namespace {

bool word_char(char32_t c) {
  if (c < 0x80) return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
  if (c < 0xC0 || c == 0xD7 || c == 0xF7) return false;
  if (c >= 0x2000 && c <= 0x2BFF) return false;  // punctuation, symbols, arrows
  if (c >= 0x3000 && c <= 0x303F) return false;
  return true;
}

char32_t lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  return c;
}

}  // namespace

std::vector<std::string> terms_of(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  bool letter = false;
  const auto flush = [&] {
    if (letter) out.push_back(cur);
    cur.clear();
    letter = false;
  };
  for (char32_t c : detail::code_points(text)) {
    if (!word_char(c)) {
      flush();
      continue;
    }
    if (c < '0' || c > '9') letter = true;
    detail::append_utf8(cur, lower(c));
  }
  flush();
  return out;
}

std::vector<std::vector<TermScore>> tfidf_top_terms(const std::vector<std::string>& family_texts, std::size_t k,
                                                    const std::vector<std::string>& exclusions) {
  const std::set<std::string> excluded(exclusions.begin(), exclusions.end());
  std::vector<std::unordered_map<std::string, std::size_t>> tf(family_texts.size());
  std::unordered_map<std::string, std::size_t> df;
  for (std::size_t f = 0; f < family_texts.size(); ++f) {
    for (auto& t : terms_of(family_texts[f]))
      if (!excluded.count(t)) ++tf[f][t];
    for (const auto& [t, c] : tf[f]) ++df[t];
  }
  const double n = static_cast<double>(family_texts.size());
  std::vector<std::vector<TermScore>> out(family_texts.size());
  for (std::size_t f = 0; f < family_texts.size(); ++f) {
    auto& ranked = out[f];
    for (const auto& [t, c] : tf[f]) {
      const double idf = std::log(n / static_cast<double>(df.at(t)));
      const double score = static_cast<double>(c) * idf;
      if (score > 0) ranked.push_back({t, c, idf, score});
    }
    std::sort(ranked.begin(), ranked.end(), [](const TermScore& a, const TermScore& b) {
      return a.score != b.score ? a.score > b.score : a.term < b.term;
    });
    if (ranked.size() > k) ranked.resize(k);
  }
  return out;
}

std::vector<std::optional<int>> default_sensitivity_settings() {
  std::vector<std::optional<int>> s;
  for (int m = 10; m <= 150; m += 10) s.emplace_back(m);
  s.emplace_back(200);
  s.emplace_back(std::nullopt);
  return s;
}

namespace {

ConsensusResult consensus_at(const FlowGraph& flow, std::optional<int> preferred, const ConsensusParams& base) {
  ConsensusParams p = base;
  p.preferred_n = preferred;
  if (!preferred) p.lambda = 0.0;
  return consensus(flow, p);
}

}  // namespace

std::vector<SweepPoint> sensitivity_sweep(const FlowGraph& flow, const std::vector<std::optional<int>>& settings,
                                          int baseline, const ConsensusParams& base) {
  const auto reference = consensus_at(flow, baseline, base).clustering.module;
  std::vector<SweepPoint> out;
  for (const auto& s : settings) {
    const auto m = s == baseline ? reference : consensus_at(flow, s, base).clustering.module;
    out.push_back({s, compare_partitions(reference, m), *std::max_element(m.begin(), m.end()) + 1});
  }
  return out;
}

nlohmann::json sweep_json(const std::vector<SweepPoint>& points) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : points)
    out.push_back({{"preferred_n", p.preferred_n ? nlohmann::json(*p.preferred_n) : nlohmann::json("auto")},
                   {"nmi", p.vs_baseline.nmi},
                   {"ari", p.vs_baseline.ari},
                   {"clusters", p.clusters}});
  return out;
}

Summary summarize(std::vector<double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  const auto q = [&](double f) {
    const double pos = f * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  s.min = values.front();
  s.max = values.back();
  s.q1 = q(0.25);
  s.median = q(0.5);
  s.q3 = q(0.75);
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  return s;
}

std::vector<RobustnessPoint> robustness_sweep(const FlowGraph& flow, const std::vector<int>& consensus_sizes,
                                              int repeats, const ConsensusParams& base, bool same_seeds) {
  if (repeats < 1) throw ParameterError("robustness_sweep: repeats must be positive");
  std::vector<RobustnessPoint> out;
  for (int size : consensus_sizes) {
    RobustnessPoint pt;
    pt.consensus_runs = size;
    for (int r = 0; r < repeats; ++r) {
      ConsensusParams p = base;
      p.runs = size;
      if (!same_seeds) p.seed_base = base.seed_base + static_cast<std::uint64_t>(r) * static_cast<std::uint64_t>(size);
      pt.partitions.push_back(consensus(flow, p).clustering.module);
    }
    std::vector<double> n, a;
    for (std::size_t i = 0; i < pt.partitions.size(); ++i)
      for (std::size_t j = i + 1; j < pt.partitions.size(); ++j) {
        const auto s = compare_partitions(pt.partitions[i], pt.partitions[j]);
        pt.pairs.push_back(s);
        n.push_back(s.nmi);
        a.push_back(s.ari);
      }
    pt.nmi = summarize(n);
    pt.ari = summarize(a);
    out.push_back(std::move(pt));
  }
  return out;
}

namespace {

nlohmann::json summary_json(const Summary& s) {
  return {{"count", s.count}, {"min", s.min},       {"q1", s.q1},  {"median", s.median},
          {"q3", s.q3},       {"max", s.max},       {"mean", s.mean}};
}

}  // namespace

nlohmann::json robustness_json(const std::vector<RobustnessPoint>& points) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : points)
    out.push_back({{"consensus_runs", p.consensus_runs},
                   {"repeats", p.partitions.size()},
                   {"nmi", summary_json(p.nmi)},
                   {"ari", summary_json(p.ari)}});
  return out;
}

}  // namespace legisnet
