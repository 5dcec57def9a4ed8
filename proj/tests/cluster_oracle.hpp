#pragma once

// Independent reference computations for the cluster module: dense flow
// iteration, the map equation in entropy form, and exhaustive partitions.

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "legisnet/cluster.hpp"

namespace legisnet::oracle {

/// Dense power iteration in long double.
inline std::vector<long double> stationary(int n, const std::vector<WeightedArc>& arcs, long double tau) {
  std::vector<std::vector<long double>> w(static_cast<std::size_t>(n), std::vector<long double>(static_cast<std::size_t>(n), 0));
  for (const auto& a : arcs) w[static_cast<std::size_t>(a.source)][static_cast<std::size_t>(a.target)] += a.weight;
  std::vector<long double> out(static_cast<std::size_t>(n), 0), p(static_cast<std::size_t>(n), 1.0L / n);
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v) out[static_cast<std::size_t>(u)] += w[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)];
  for (int it = 0; it < 100000; ++it) {
    std::vector<long double> next(static_cast<std::size_t>(n), 0);
    for (int u = 0; u < n; ++u) {
      const auto U = static_cast<std::size_t>(u);
      if (out[U] == 0) {
        for (auto& x : next) x += p[U] / n;
        continue;
      }
      for (int v = 0; v < n; ++v) next[static_cast<std::size_t>(v)] += (1 - tau) * p[U] * w[U][static_cast<std::size_t>(v)] / out[U] + tau * p[U] / n;
    }
    long double diff = 0;
    for (int v = 0; v < n; ++v) diff += std::fabs(next[static_cast<std::size_t>(v)] - p[static_cast<std::size_t>(v)]);
    p = next;
    if (diff < 1e-18L) break;
  }
  return p;
}

/// L = q H(Q) + sum_m p_m H(P_m), evaluated literally.
inline double map_equation(const FlowGraph& flow, const std::vector<int>& modules) {
  int k = 0;
  for (int m : modules) k = std::max(k, m + 1);
  std::vector<long double> enter(static_cast<std::size_t>(k), 0), exit(static_cast<std::size_t>(k), 0);
  for (const auto& a : flow.arcs) {
    const int ms = modules[static_cast<std::size_t>(a.source)], mt = modules[static_cast<std::size_t>(a.target)];
    if (ms != mt) {
      exit[static_cast<std::size_t>(ms)] += a.flow;
      enter[static_cast<std::size_t>(mt)] += a.flow;
    }
  }
  const auto h = [](long double x, long double total) { return x > 0 ? -(x / total) * std::log2(x / total) : 0.0L; };
  long double q = 0;
  for (auto e : enter) q += e;
  long double index = 0;
  for (auto e : enter) index += h(e, q);
  long double L = q > 0 ? q * index : 0;
  for (int m = 0; m < k; ++m) {
    long double within = exit[static_cast<std::size_t>(m)];
    for (std::size_t i = 0; i < modules.size(); ++i)
      if (modules[i] == m) within += flow.rates[i];
    if (within <= 0) continue;
    long double H = h(exit[static_cast<std::size_t>(m)], within);
    for (std::size_t i = 0; i < modules.size(); ++i)
      if (modules[i] == m) H += h(flow.rates[i], within);
    L += within * H;
  }
  return static_cast<double>(L);
}

/// Calls fn for every set partition of n nodes as a restricted growth string.
inline void for_each_partition(int n, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> a(static_cast<std::size_t>(n), 0);
  std::function<void(int, int)> rec = [&](int i, int max) {
    if (i == n) {
      fn(a);
      return;
    }
    for (int v = 0; v <= max + 1; ++v) {
      a[static_cast<std::size_t>(i)] = v;
      rec(i + 1, std::max(max, v));
    }
  };
  if (n == 0) fn(a);
  else rec(1, 0);
}

struct Minimum {
  double value = std::numeric_limits<double>::infinity();
  std::vector<int> partition;
};

inline Minimum global_minimum(const FlowGraph& flow, const InfomapParams& params = {}) {
  Minimum best;
  for_each_partition(static_cast<int>(flow.size()), [&](const std::vector<int>& p) {
    const double v = augmented_objective(flow, p, params);
    if (v < best.value) best = {v, p};
  });
  return best;
}

inline std::vector<WeightedArc> undirected(const std::vector<std::pair<int, int>>& edges, double w = 1.0) {
  std::vector<WeightedArc> arcs;
  for (const auto& [a, b] : edges) {
    arcs.push_back({a, b, w});
    arcs.push_back({b, a, w});
  }
  return arcs;
}

inline std::vector<std::pair<int, int>> clique(int first, int size) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < size; ++i)
    for (int j = i + 1; j < size; ++j) e.emplace_back(first + i, first + j);
  return e;
}

/// `count` cliques of `size` nodes; clique c links to clique c+1 by one edge.
inline std::vector<WeightedArc> clique_ring(int count, int size) {
  std::vector<std::pair<int, int>> e;
  for (int c = 0; c < count; ++c) {
    const auto k = clique(c * size, size);
    e.insert(e.end(), k.begin(), k.end());
    e.emplace_back(c * size + size - 1, ((c + 1) % count) * size);
  }
  return undirected(e);
}

struct Fixture {
  std::string name;
  int n;
  std::vector<WeightedArc> arcs;
};

inline std::vector<Fixture> small_fixtures() {
  std::vector<Fixture> f;
  {
    auto e = clique(0, 3);
    const auto b = clique(3, 3);
    e.insert(e.end(), b.begin(), b.end());
    e.emplace_back(2, 3);
    f.push_back({"two triangles", 6, undirected(e)});
  }
  {
    auto e = clique(0, 4);
    const auto b = clique(4, 4);
    e.insert(e.end(), b.begin(), b.end());
    e.emplace_back(3, 4);
    f.push_back({"two 4-cliques", 8, undirected(e)});
  }
  {
    auto e = clique(0, 3);
    for (const auto& x : clique(3, 3)) e.push_back(x);
    e.emplace_back(6, 7);
    e.emplace_back(2, 3);
    e.emplace_back(5, 6);
    f.push_back({"triangles with tail", 8, undirected(e)});
  }
  f.push_back({"star", 7, undirected({{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}, {0, 6}})});
  f.push_back({"path", 8, undirected({{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}})});
  {
    std::vector<WeightedArc> a;
    for (int i = 0; i < 6; ++i) a.push_back({i, (i + 1) % 6, 1.0});
    a.push_back({0, 3, 0.5});
    a.push_back({4, 1, 0.5});
    f.push_back({"directed cycle with chords", 6, a});
  }
  for (int s = 0; s < 4; ++s) {
    std::mt19937_64 rng(100 + static_cast<unsigned>(s));
    const int n = 7 + s % 2;
    std::vector<WeightedArc> a;
    for (int u = 0; u < n; ++u)
      for (int v = 0; v < n; ++v)
        if (u != v && rng() % 100 < (u / 4 == v / 4 ? 70u : 12u)) a.push_back({u, v, 1.0 + static_cast<double>(rng() % 4)});
    f.push_back({"random " + std::to_string(s), n, a});
  }
  return f;
}

}  // namespace legisnet::oracle
