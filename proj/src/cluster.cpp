#include "legisnet/cluster.hpp"

#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "legisnet/error.hpp"
#include "legisnet/parallel.hpp"

namespace legisnet {

namespace {

constexpr double kTolerance = 1e-12;
constexpr int kMaxIterations = 10000;

double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

}  // namespace

FlowGraph visit_rates(std::size_t n, const std::vector<WeightedArc>& arcs, double tau) {
  if (n == 0) throw ParameterError("visit_rates: empty graph");
  if (!(tau >= 0.0 && tau < 1.0)) throw ParameterError("visit_rates: tau must lie in [0, 1)");

  std::map<std::pair<int, int>, double> pooled;
  for (const auto& a : arcs) {
    if (a.source < 0 || a.target < 0 || static_cast<std::size_t>(a.source) >= n || static_cast<std::size_t>(a.target) >= n)
      throw ParameterError("visit_rates: arc endpoint out of range");
    if (!(a.weight >= 0.0) || !std::isfinite(a.weight)) throw ParameterError("visit_rates: negative or non-finite weight");
    if (a.weight > 0.0) pooled[{a.source, a.target}] += a.weight;
  }
  std::vector<double> out_weight(n, 0.0);
  for (const auto& [k, w] : pooled) out_weight[static_cast<std::size_t>(k.first)] += w;

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(pooled.size());
  for (const auto& [k, w] : pooled)
    triplets.emplace_back(k.second, k.first, w / out_weight[static_cast<std::size_t>(k.first)]);
  Eigen::SparseMatrix<double> transition(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  transition.setFromTriplets(triplets.begin(), triplets.end());

  const auto N = static_cast<Eigen::Index>(n);
  Eigen::VectorXd p = Eigen::VectorXd::Constant(N, 1.0 / static_cast<double>(n));
  Eigen::VectorXd next(N);
  FlowGraph g;
  g.tau = tau;
  for (g.iterations = 1; g.iterations <= kMaxIterations; ++g.iterations) {
    double dangling = 0.0;
    for (std::size_t u = 0; u < n; ++u)
      if (out_weight[u] == 0.0) dangling += p[static_cast<Eigen::Index>(u)];
    next = (1.0 - tau) * (transition * p);
    next.array() += ((1.0 - tau) * dangling + tau) / static_cast<double>(n);
    next /= next.sum();
    g.residual = (next - p).lpNorm<1>();
    p.swap(next);
    if (g.residual < kTolerance) {
      g.converged = true;
      break;
    }
  }
  g.iterations = std::min(g.iterations, kMaxIterations);

  g.rates.assign(p.data(), p.data() + n);
  g.sizes.assign(n, 0);
  g.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.ids[i] = std::to_string(i);

  // Link steps only; teleportation is not encoded.
  double total = 0.0;
  for (const auto& [k, w] : pooled) {
    const double f = g.rates[static_cast<std::size_t>(k.first)] * w / out_weight[static_cast<std::size_t>(k.first)];
    g.arcs.push_back({k.first, k.second, f});
    total += f;
  }
  if (total > 0.0)
    for (auto& a : g.arcs) a.flow /= total;
  return g;
}

FlowGraph visit_rates(const LegalGraph& graph, double tau, std::optional<EdgeType> only) {
  std::vector<WeightedArc> arcs;
  for (const auto& a : graph.arcs)
    if (!only || a.type == *only) arcs.push_back({a.source, a.target, a.weight * static_cast<double>(a.multiplicity)});
  auto g = visit_rates(graph.nodes.size(), arcs, tau);
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    g.ids[i] = graph.nodes[i].id;
    g.sizes[i] = graph.nodes[i].tokens;
  }
  return g;
}

int Clustering::module_count() const {
  return module.empty() ? 0 : *std::max_element(module.begin(), module.end()) + 1;
}

std::string Clustering::to_csv() const {
  std::string out = "node_id,cluster_id,seed\n";
  for (std::size_t i = 0; i < module.size(); ++i) {
    std::string id = i < node_ids.size() ? node_ids[i] : std::to_string(i);
    if (id.find_first_of(",\"\n") != std::string::npos) {
      std::string q = "\"";
      for (char c : id) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      id = q + "\"";
    }
    out += id + "," + std::to_string(module[i]) + "," + std::to_string(seed) + "\n";
  }
  return out;
}

std::vector<int> canonical_labels(const std::vector<int>& labels) {
  std::map<int, int> seen;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    out[i] = seen.try_emplace(labels[i], static_cast<int>(seen.size())).first->second;
  return out;
}

double codelength(const FlowGraph& flow, const std::vector<int>& modules) {
  if (modules.size() != flow.size()) throw ParameterError("codelength: partition size differs from node count");
  const auto m = canonical_labels(modules);
  const auto k = static_cast<std::size_t>(m.empty() ? 0 : *std::max_element(m.begin(), m.end()) + 1);
  std::vector<double> enter(k, 0.0), exit(k, 0.0), volume(k, 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) volume[static_cast<std::size_t>(m[i])] += flow.rates[i];
  for (const auto& a : flow.arcs) {
    const int ms = m[static_cast<std::size_t>(a.source)];
    const int mt = m[static_cast<std::size_t>(a.target)];
    if (ms == mt) continue;
    exit[static_cast<std::size_t>(ms)] += a.flow;
    enter[static_cast<std::size_t>(mt)] += a.flow;
  }
  double sum_enter = 0.0, L = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    sum_enter += enter[j];
    L += -plogp(enter[j]) - plogp(exit[j]) + plogp(exit[j] + volume[j]);
  }
  for (double p : flow.rates) L -= plogp(p);
  L += plogp(sum_enter);
  return L < 0.0 && L > -1e-12 ? 0.0 : L;
}

double codelength(const FlowGraph& flow, const Clustering& clustering) { return codelength(flow, clustering.module); }

namespace {

double penalty(int modules, const InfomapParams& params) {
  if (!params.preferred_n) return 0.0;
  return params.lambda * std::abs(std::log(static_cast<double>(modules) / static_cast<double>(*params.preferred_n)));
}

// One level of the optimization: original nodes or modules of a previous level.
struct Level {
  std::vector<double> volume;
  std::vector<std::vector<std::pair<int, double>>> out, in;  // self-loops dropped
  std::vector<double> out_total, in_total;

  std::size_t size() const { return volume.size(); }
};

Level base_level(const FlowGraph& flow) {
  Level L;
  const auto n = flow.size();
  L.volume = flow.rates;
  L.out.resize(n);
  L.in.resize(n);
  L.out_total.assign(n, 0.0);
  L.in_total.assign(n, 0.0);
  for (const auto& a : flow.arcs) {
    if (a.source == a.target || a.flow == 0.0) continue;
    L.out[static_cast<std::size_t>(a.source)].emplace_back(a.target, a.flow);
    L.in[static_cast<std::size_t>(a.target)].emplace_back(a.source, a.flow);
    L.out_total[static_cast<std::size_t>(a.source)] += a.flow;
    L.in_total[static_cast<std::size_t>(a.target)] += a.flow;
  }
  return L;
}

// Collapses dense module ids into nodes of the next level.
Level aggregate(const Level& L, const std::vector<int>& module, int k) {
  Level A;
  const auto K = static_cast<std::size_t>(k);
  A.volume.assign(K, 0.0);
  A.out.resize(K);
  A.in.resize(K);
  A.out_total.assign(K, 0.0);
  A.in_total.assign(K, 0.0);
  std::map<std::pair<int, int>, double> arcs;
  for (std::size_t u = 0; u < L.size(); ++u) {
    A.volume[static_cast<std::size_t>(module[u])] += L.volume[u];
    for (const auto& [v, f] : L.out[u]) {
      const int a = module[u], b = module[static_cast<std::size_t>(v)];
      if (a != b) arcs[{a, b}] += f;
    }
  }
  for (const auto& [k2, f] : arcs) {
    A.out[static_cast<std::size_t>(k2.first)].emplace_back(k2.second, f);
    A.in[static_cast<std::size_t>(k2.second)].emplace_back(k2.first, f);
    A.out_total[static_cast<std::size_t>(k2.first)] += f;
    A.in_total[static_cast<std::size_t>(k2.second)] += f;
  }
  return A;
}

class MoveState {
 public:
  MoveState(const Level& L, std::vector<int> module, const InfomapParams& params)
      : L_(L), module_(std::move(module)), params_(params) {
    recompute();
  }

  // Sweeps of single-node moves until no move improves the objective.
  // Returns true when at least one node moved.
  bool optimize(std::mt19937_64& rng) {
    const auto n = L_.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> out_to(n, 0.0), in_from(n, 0.0);
    std::vector<int> touched;
    bool any = false;
    for (int sweep = 0; sweep < 1000; ++sweep) {
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
      recompute();
      int moves = 0;
      for (int u : order) {
        const auto U = static_cast<std::size_t>(u);
        const int a = module_[U];
        touched.clear();
        const auto touch = [&](int m) {
          if (out_to[static_cast<std::size_t>(m)] == 0.0 && in_from[static_cast<std::size_t>(m)] == 0.0 &&
              std::find(touched.begin(), touched.end(), m) == touched.end())
            touched.push_back(m);
        };
        for (const auto& [v, f] : L_.out[U]) {
          const int m = module_[static_cast<std::size_t>(v)];
          touch(m);
          out_to[static_cast<std::size_t>(m)] += f;
        }
        for (const auto& [v, f] : L_.in[U]) {
          const int m = module_[static_cast<std::size_t>(v)];
          touch(m);
          in_from[static_cast<std::size_t>(m)] += f;
        }
        const double out_a = out_to[static_cast<std::size_t>(a)];
        const double in_a = in_from[static_cast<std::size_t>(a)];
        double best = -kTolerance;
        int best_module = -1;
        const auto consider = [&](int b) {
          if (b == a) return;
          const double d = delta(u, a, b, out_a, in_a, out_to[static_cast<std::size_t>(b)], in_from[static_cast<std::size_t>(b)]);
          if (d < best - 1e-15 || (best_module >= 0 && std::abs(d - best) <= 1e-15 && b < best_module)) {
            best = d;
            best_module = b;
          }
        };
        for (int b : touched) consider(b);
        if (size_[static_cast<std::size_t>(a)] > 1 && !empty_.empty()) consider(*std::min_element(empty_.begin(), empty_.end()));
        for (int m : touched) out_to[static_cast<std::size_t>(m)] = in_from[static_cast<std::size_t>(m)] = 0.0;
        if (best_module >= 0) {
          move(u, a, best_module, out_a, in_a, [&] {
            double o = 0, i = 0;
            for (const auto& [v, f] : L_.out[U]) if (module_[static_cast<std::size_t>(v)] == best_module) o += f;
            for (const auto& [v, f] : L_.in[U]) if (module_[static_cast<std::size_t>(v)] == best_module) i += f;
            return std::pair{o, i};
          }());
          ++moves;
        }
      }
      if (moves == 0) break;
      any = true;
    }
    return any;
  }

  // Dense labels in order of first appearance.
  std::vector<int> labels() const { return canonical_labels(module_); }
  int modules() const { return active_; }

 private:
  double term(double enter, double exit, double volume) const {
    return -plogp(enter) - plogp(exit) + plogp(exit + volume);
  }

  void recompute() {
    const auto n = L_.size();
    volume_.assign(n, 0.0);
    enter_.assign(n, 0.0);
    exit_.assign(n, 0.0);
    size_.assign(n, 0);
    for (std::size_t u = 0; u < n; ++u) {
      const auto m = static_cast<std::size_t>(module_[u]);
      volume_[m] += L_.volume[u];
      ++size_[m];
      for (const auto& [v, f] : L_.out[u]) {
        const auto mv = static_cast<std::size_t>(module_[static_cast<std::size_t>(v)]);
        if (mv == m) continue;
        exit_[m] += f;
        enter_[mv] += f;
      }
    }
    empty_.clear();
    active_ = 0;
    sum_enter_ = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      if (size_[m] == 0) {
        empty_.push_back(static_cast<int>(m));
        continue;
      }
      ++active_;
      sum_enter_ += enter_[m];
    }
  }

  struct After {
    double enter_a, exit_a, vol_a, enter_b, exit_b, vol_b;
  };

  After after(int u, int a, int b, double out_a, double in_a, double out_b, double in_b) const {
    const auto U = static_cast<std::size_t>(u);
    const auto A = static_cast<std::size_t>(a), B = static_cast<std::size_t>(b);
    const double out_u = L_.out_total[U], in_u = L_.in_total[U], p = L_.volume[U];
    return {enter_[A] - (in_u - in_a) + out_a, exit_[A] - (out_u - out_a) + in_a, volume_[A] - p,
            enter_[B] + (in_u - in_b) - out_b, exit_[B] + (out_u - out_b) - in_b, volume_[B] + p};
  }

  double delta(int u, int a, int b, double out_a, double in_a, double out_b, double in_b) const {
    const auto A = static_cast<std::size_t>(a), B = static_cast<std::size_t>(b);
    const auto x = after(u, a, b, out_a, in_a, out_b, in_b);
    const double sum_enter = sum_enter_ - enter_[A] - enter_[B] + x.enter_a + x.enter_b;
    const double old_terms = term(enter_[A], exit_[A], volume_[A]) + (size_[B] ? term(enter_[B], exit_[B], volume_[B]) : 0.0);
    const double new_terms = (size_[A] > 1 ? term(x.enter_a, x.exit_a, x.vol_a) : 0.0) + term(x.enter_b, x.exit_b, x.vol_b);
    const int m = active_ - (size_[A] == 1 ? 1 : 0) + (size_[B] == 0 ? 1 : 0);
    return plogp(sum_enter) - plogp(sum_enter_) + new_terms - old_terms + penalty(m, params_) -
           penalty(active_, params_);
  }

  void move(int u, int a, int b, double out_a, double in_a, std::pair<double, double> to_b) {
    const auto A = static_cast<std::size_t>(a), B = static_cast<std::size_t>(b);
    const auto x = after(u, a, b, out_a, in_a, to_b.first, to_b.second);
    sum_enter_ += x.enter_a + x.enter_b - enter_[A] - enter_[B];
    enter_[A] = x.enter_a, exit_[A] = x.exit_a, volume_[A] = x.vol_a;
    enter_[B] = x.enter_b, exit_[B] = x.exit_b, volume_[B] = x.vol_b;
    if (size_[B] == 0) {
      ++active_;
      empty_.erase(std::find(empty_.begin(), empty_.end(), b));
    }
    if (--size_[A] == 0) {
      --active_;
      empty_.push_back(a);
      enter_[A] = exit_[A] = volume_[A] = 0.0;
    }
    ++size_[B];
    module_[static_cast<std::size_t>(u)] = b;
  }

  const Level& L_;
  std::vector<int> module_;
  const InfomapParams& params_;
  std::vector<double> volume_, enter_, exit_;
  std::vector<int> size_;
  std::vector<int> empty_;
  int active_ = 0;
  double sum_enter_ = 0.0;
};

// Repeated move + aggregate starting from `assignment` on the base level.
std::vector<int> coarsen(const Level& base, std::vector<int> assignment, const InfomapParams& params,
                         std::mt19937_64& rng) {
  assignment = canonical_labels(assignment);
  int k = assignment.empty() ? 0 : *std::max_element(assignment.begin(), assignment.end()) + 1;
  Level current = aggregate(base, assignment, k);
  for (;;) {
    std::vector<int> single(current.size());
    std::iota(single.begin(), single.end(), 0);
    MoveState state(current, single, params);
    if (!state.optimize(rng)) break;
    const auto merged = state.labels();
    for (auto& m : assignment) m = merged[static_cast<std::size_t>(m)];
    k = state.modules();
    if (static_cast<std::size_t>(k) == current.size()) break;
    current = aggregate(current, merged, k);
  }
  return assignment;
}

// Reassigns every node of module m to the other module it exchanges the most
// flow with (lowest id on ties). Nodes without such a neighbour stay.
std::vector<int> dissolve(const Level& base, const std::vector<int>& labels, int m) {
  auto out = labels;
  std::map<int, double> strength;
  for (std::size_t u = 0; u < base.size(); ++u) {
    if (labels[u] != m) continue;
    strength.clear();
    for (const auto& [v, f] : base.out[u]) strength[out[static_cast<std::size_t>(v)]] += f;
    for (const auto& [v, f] : base.in[u]) strength[out[static_cast<std::size_t>(v)]] += f;
    strength.erase(m);
    int target = -1;
    double best = 0.0;
    for (const auto& [c, f] : strength)
      if (f > best) best = f, target = c;
    if (target >= 0) out[u] = target;
  }
  return canonical_labels(out);
}

}  // namespace

double augmented_objective(const FlowGraph& flow, const std::vector<int>& modules, const InfomapParams& params) {
  const auto m = canonical_labels(modules);
  const int k = m.empty() ? 0 : *std::max_element(m.begin(), m.end()) + 1;
  return codelength(flow, m) + penalty(std::max(k, 1), params);
}

Clustering infomap_run(const FlowGraph& flow, const InfomapParams& params) {
  if (params.preferred_n && *params.preferred_n < 1) throw ParameterError("preferred_n must be positive");
  const auto n = flow.size();
  Clustering result;
  result.node_ids = flow.ids;
  result.seed = params.seed;
  if (n == 0) return result;

  std::mt19937_64 rng(params.seed);
  const Level base = base_level(flow);

  std::vector<int> singletons(n);
  std::iota(singletons.begin(), singletons.end(), 0);
  auto best = coarsen(base, singletons, params, rng);
  double best_value = augmented_objective(flow, best, params);
  for (int round = 0; round < 20; ++round) {
    bool improved = false;
    // Fine-tune single nodes against the current modules, then coarsen again.
    MoveState fine(base, best, params);
    fine.optimize(rng);
    auto candidate = coarsen(base, fine.labels(), params, rng);
    double value = augmented_objective(flow, candidate, params);
    if (value < best_value - 1e-10) {
      best = std::move(candidate);
      best_value = value;
      improved = true;
    }
    // Escapes that need several coordinated node moves: dissolve one module
    // into its neighbours.
    const int k = *std::max_element(best.begin(), best.end()) + 1;
    for (int m = 0; m < k && k > 1; ++m) {
      candidate = dissolve(base, best, m);
      if (candidate == best) continue;
      value = augmented_objective(flow, candidate, params);
      if (value < best_value - 1e-10) {
        best = std::move(candidate);
        best_value = value;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }

  // Baselines are candidate states too.
  const std::vector<int> one(n, 0);
  if (augmented_objective(flow, singletons, params) < best_value - 1e-12) {
    best = singletons;
    best_value = augmented_objective(flow, singletons, params);
  }
  if (augmented_objective(flow, one, params) < best_value - 1e-12) best = one;
  result.module = canonical_labels(best);
  return result;
}

std::uint32_t ConsensusResult::count(int i, int j) const {
  if (i == j) return static_cast<std::uint32_t>(params.runs);
  if (i > j) std::swap(i, j);
  const auto n = clustering.module.size();
  const auto I = static_cast<std::size_t>(i), J = static_cast<std::size_t>(j);
  return cooccurrence[I * (2 * n - I - 1) / 2 + (J - I - 1)];
}

std::uint32_t ConsensusResult::required_count() const {
  const double need = std::ceil(params.threshold * static_cast<double>(params.runs) - 1e-9);
  return static_cast<std::uint32_t>(std::max(1.0, need));
}

nlohmann::json ConsensusResult::report() const {
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [m, c] : module_counts) hist[std::to_string(m)] = c;
  return {{"runs", params.runs},
          {"threshold", params.threshold},
          {"preferred_n", params.preferred_n ? nlohmann::json(*params.preferred_n) : nlohmann::json(nullptr)},
          {"lambda", params.lambda},
          {"seed_base", params.seed_base},
          {"required_count", required_count()},
          {"clusters", clustering.module_count()},
          {"module_count_histogram", hist}};
}

ConsensusResult consensus(const FlowGraph& flow, const ConsensusParams& params) {
  if (params.runs < 1) throw ParameterError("consensus: runs must be at least 1");
  if (!(params.threshold > 0.0 && params.threshold <= 1.0)) throw ParameterError("consensus: threshold must lie in (0, 1]");
  std::vector<std::vector<int>> runs(static_cast<std::size_t>(params.runs));
  parallel_for(
      runs.size(),
      [&](std::size_t r) {
        runs[r] = infomap_run(flow, {params.preferred_n, params.lambda, params.seed_base + r}).module;
      },
      params.threads);
  return combine_runs(flow.ids, runs, params);
}

ConsensusResult combine_runs(const std::vector<std::string>& ids, const std::vector<std::vector<int>>& runs,
                             const ConsensusParams& in) {
  if (runs.empty()) throw ParameterError("consensus: no runs");
  if (!(in.threshold > 0.0 && in.threshold <= 1.0)) throw ParameterError("consensus: threshold must lie in (0, 1]");
  const auto n = ids.size();
  ConsensusResult out;
  out.params = in;
  out.params.runs = static_cast<int>(runs.size());
  out.cooccurrence.assign(n < 2 ? 0 : n * (n - 1) / 2, 0);
  std::vector<std::vector<std::size_t>> members;
  for (const auto& run : runs) {
    if (run.size() != n) throw ParameterError("consensus: run size differs from node count");
    const auto labels = canonical_labels(run);
    const int k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    ++out.module_counts[k];
    members.assign(static_cast<std::size_t>(k), {});
    for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
    for (const auto& group : members)
      for (std::size_t x = 0; x < group.size(); ++x)
        for (std::size_t y = x + 1; y < group.size(); ++y) {
          const auto I = group[x], J = group[y];
          ++out.cooccurrence[I * (2 * n - I - 1) / 2 + (J - I - 1)];
        }
  }

  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  const auto need = out.required_count();
  std::size_t slot = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j, ++slot)
      if (out.cooccurrence[slot] >= need) {
        const int a = find(static_cast<int>(i)), b = find(static_cast<int>(j));
        if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
      }
  std::vector<int> roots(n);
  for (std::size_t i = 0; i < n; ++i) roots[i] = find(static_cast<int>(i));
  out.clustering.node_ids = ids;
  out.clustering.seed = in.seed_base;
  out.clustering.module = canonical_labels(roots);
  return out;
}

}  // namespace legisnet
