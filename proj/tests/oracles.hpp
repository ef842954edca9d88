#pragma once

// Reference implementations written independently of the library code, used
// only to check it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline Vec mean(const std::vector<Vec>& vs) {
  Vec out(vs.front().size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    long double s = 0;
    for (const auto& v : vs) s += v[j];
    out[j] = static_cast<double>(s / vs.size());
  }
  return out;
}

inline double sqdist(const Vec& a, const Vec& b) {
  long double s = 0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (long double)(a[j] - b[j]) * (a[j] - b[j]);
  return static_cast<double>(s);
}

// Score of i: sum of squared distances to its n - f - 2 closest others.
// Lowest score wins, ties go to the lowest index.
inline std::size_t krum_index(const std::vector<Vec>& vs, std::size_t f) {
  const std::size_t n = vs.size(), m = n - f - 2;
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> d;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) d.push_back(sqdist(vs[i], vs[k]));
    std::sort(d.begin(), d.end());
    double score = 0;
    for (std::size_t k = 0; k < m; ++k) score += d[k];
    if (score < best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

inline Vec column(const std::vector<Vec>& vs, std::size_t j) {
  Vec c;
  for (const auto& v : vs) c.push_back(v[j]);
  std::sort(c.begin(), c.end());
  return c;
}

inline Vec trimmed_mean(const std::vector<Vec>& vs, std::size_t k) {
  Vec out(vs.front().size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    const Vec c = column(vs, j);
    long double s = 0;
    for (std::size_t i = k; i < c.size() - k; ++i) s += c[i];
    out[j] = static_cast<double>(s / (c.size() - 2 * k));
  }
  return out;
}

inline Vec median(const std::vector<Vec>& vs) {
  Vec out(vs.front().size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    const Vec c = column(vs, j);
    const std::size_t n = c.size();
    out[j] = n % 2 ? c[n / 2] : (c[n / 2 - 1] + c[n / 2]) / 2.0;
  }
  return out;
}

// Type-7 sample quantile in 1-based rank form: h = (n - 1) q + 1.
inline double percentile(Vec v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q / 100.0 + 1.0;
  const double fl = std::floor(h);
  const auto k = static_cast<std::size_t>(fl);  // 1-based
  if (k >= v.size()) return v.back();
  return v[k - 1] + (h - fl) * (v[k] - v[k - 1]);
}

// BFS hop counts from `src`; unreachable nodes get SIZE_MAX.
inline std::vector<std::size_t> bfs(const std::vector<std::vector<int>>& adj, std::size_t src) {
  std::vector<std::size_t> depth(adj.size(), SIZE_MAX);
  std::queue<std::size_t> q;
  depth[src] = 0;
  q.push(src);
  while (!q.empty()) {
    auto u = q.front();
    q.pop();
    for (std::size_t v = 0; v < adj.size(); ++v)
      if (adj[u][v] && depth[v] == SIZE_MAX) {
        depth[v] = depth[u] + 1;
        q.push(v);
      }
  }
  return depth;
}

// Central differences of f at x.
inline Vec numeric_gradient(const std::function<double(const Vec&)>& f, Vec x, double h = 1e-6) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

inline std::vector<Vec> random_vectors(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> N(0.0, 3.0);
  std::vector<Vec> vs(n, Vec(d));
  for (auto& v : vs)
    for (auto& x : v) x = N(rng);
  return vs;
}

}  // namespace oracle
