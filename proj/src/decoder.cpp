#include "tlp/decoder.hpp"

#include <limits>
#include <string>
#include <utility>

namespace tlp {

void validate_heads(const std::vector<int>& heads) {
  const int w = static_cast<int>(heads.size());
  if (w == 0) throw ValidityError("empty head list");
  for (int i = 0; i < w; ++i) {
    if (heads[static_cast<size_t>(i)] < 0 || heads[static_cast<size_t>(i)] > w)
      throw ValidityError("token " + std::to_string(i + 1) + ": head out of range");
    if (heads[static_cast<size_t>(i)] == i + 1)
      throw ValidityError("token " + std::to_string(i + 1) + ": token heads itself");
  }
  // Every token must reach the root; a chain longer than w tokens is a cycle.
  for (int i = 1; i <= w; ++i) {
    int node = i, steps = 0;
    while (node != 0) {
      node = heads[static_cast<size_t>(node - 1)];
      if (++steps > w) throw ValidityError("cycle through token " + std::to_string(i));
    }
  }
}

Tensord heads_to_matrix(const std::vector<int>& heads) {
  validate_heads(heads);
  const Index w = static_cast<Index>(heads.size());
  Tensord m({w, w + 1});
  for (Index i = 0; i < w; ++i) m(i, heads[static_cast<size_t>(i)]) = 1.0;
  return m;
}

std::vector<int> matrix_to_heads(const Tensord& m) {
  m.require_rank(2, "parse matrix");
  const Index w = m.dim(0);
  if (m.dim(1) != w + 1) throw ShapeError("parse matrix must be w x (w+1)");
  std::vector<int> heads(static_cast<size_t>(w));
  for (Index i = 0; i < w; ++i) {
    int hot = -1;
    for (Index j = 0; j <= w; ++j) {
      const double v = m(i, j);
      if (v != 0.0 && v != 1.0)
        throw ValidityError("row " + std::to_string(i + 1) + ": entries must be 0 or 1");
      if (v == 1.0) {
        if (hot >= 0) throw ValidityError("row " + std::to_string(i + 1) + ": not one-hot");
        hot = static_cast<int>(j);
      }
    }
    if (hot < 0) throw ValidityError("row " + std::to_string(i + 1) + ": not one-hot");
    heads[static_cast<size_t>(i)] = hot;
  }
  validate_heads(heads);
  return heads;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using EdgeMatrix = std::vector<std::vector<double>>;
using OriginMatrix = std::vector<std::vector<std::pair<int, int>>>;

// Solves the current graph; node 0 is the root. adj[u][v] is the weight of
// head u -> dependent v (kNegInf where absent); origin[u][v] names the
// top-level edge the entry stands for. Returns the chosen top-level edge
// into each non-root node of this graph.
std::vector<std::pair<int, int>> solve(const EdgeMatrix& adj, const OriginMatrix& origin) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> best_in(static_cast<size_t>(n), -1);
  for (int v = 1; v < n; ++v) {
    double best = kNegInf;
    for (int u = 0; u < n; ++u) {
      if (u == v) continue;
      if (adj[static_cast<size_t>(u)][static_cast<size_t>(v)] > best) {
        best = adj[static_cast<size_t>(u)][static_cast<size_t>(v)];
        best_in[static_cast<size_t>(v)] = u;
      }
    }
  }

  // Look for a cycle among the greedy choices.
  std::vector<int> color(static_cast<size_t>(n), 0);  // 0 unseen, 1 active, 2 done
  std::vector<int> cycle;
  color[0] = 2;
  for (int start = 1; start < n && cycle.empty(); ++start) {
    if (color[static_cast<size_t>(start)] != 0) continue;
    int v = start;
    std::vector<int> path;
    while (v != 0 && color[static_cast<size_t>(v)] == 0) {
      color[static_cast<size_t>(v)] = 1;
      path.push_back(v);
      v = best_in[static_cast<size_t>(v)];
    }
    if (v != 0 && color[static_cast<size_t>(v)] == 1) {
      // Walk the tail of the path back to v: that's the cycle.
      size_t at = path.size();
      while (at > 0 && path[at - 1] != v) --at;
      cycle.assign(path.begin() + static_cast<std::ptrdiff_t>(at) - 1, path.end());
    }
    for (int node : path) color[static_cast<size_t>(node)] = 2;
  }

  if (cycle.empty()) {
    std::vector<std::pair<int, int>> chosen;
    for (int v = 1; v < n; ++v)
      chosen.push_back(origin[static_cast<size_t>(best_in[static_cast<size_t>(v)])][static_cast<size_t>(v)]);
    return chosen;
  }

  std::vector<bool> in_cycle(static_cast<size_t>(n), false);
  for (int v : cycle) in_cycle[static_cast<size_t>(v)] = true;

  // Contracted graph: surviving nodes in original order, supernode last.
  std::vector<int> old_of;
  std::vector<int> new_of(static_cast<size_t>(n), -1);
  for (int v = 0; v < n; ++v) {
    if (!in_cycle[static_cast<size_t>(v)]) {
      new_of[static_cast<size_t>(v)] = static_cast<int>(old_of.size());
      old_of.push_back(v);
    }
  }
  const int super = static_cast<int>(old_of.size());
  const int m = super + 1;

  EdgeMatrix c_adj(static_cast<size_t>(m),
                   std::vector<double>(static_cast<size_t>(m), kNegInf));
  OriginMatrix c_origin(static_cast<size_t>(m),
                        std::vector<std::pair<int, int>>(static_cast<size_t>(m), {-1, -1}));
  // For each entering edge u -> supernode, the cycle vertex it attaches to.
  std::vector<int> entry_vertex(static_cast<size_t>(m), -1);

  for (int u = 0; u < n; ++u) {
    for (int v = 1; v < n; ++v) {
      if (u == v || adj[static_cast<size_t>(u)][static_cast<size_t>(v)] == kNegInf) continue;
      const bool uc = in_cycle[static_cast<size_t>(u)];
      const bool vc = in_cycle[static_cast<size_t>(v)];
      if (!uc && !vc) {
        const int nu = new_of[static_cast<size_t>(u)], nv = new_of[static_cast<size_t>(v)];
        if (adj[static_cast<size_t>(u)][static_cast<size_t>(v)] > c_adj[static_cast<size_t>(nu)][static_cast<size_t>(nv)]) {
          c_adj[static_cast<size_t>(nu)][static_cast<size_t>(nv)] = adj[static_cast<size_t>(u)][static_cast<size_t>(v)];
          c_origin[static_cast<size_t>(nu)][static_cast<size_t>(nv)] = origin[static_cast<size_t>(u)][static_cast<size_t>(v)];
        }
      } else if (!uc && vc) {
        // Entering the cycle: charge the replaced cycle edge.
        const int nu = new_of[static_cast<size_t>(u)];
        const double gain = adj[static_cast<size_t>(u)][static_cast<size_t>(v)] -
                            adj[static_cast<size_t>(best_in[static_cast<size_t>(v)])][static_cast<size_t>(v)];
        if (gain > c_adj[static_cast<size_t>(nu)][static_cast<size_t>(super)]) {
          c_adj[static_cast<size_t>(nu)][static_cast<size_t>(super)] = gain;
          c_origin[static_cast<size_t>(nu)][static_cast<size_t>(super)] = origin[static_cast<size_t>(u)][static_cast<size_t>(v)];
          entry_vertex[static_cast<size_t>(nu)] = v;
        }
      } else if (uc && !vc) {
        const int nv = new_of[static_cast<size_t>(v)];
        if (adj[static_cast<size_t>(u)][static_cast<size_t>(v)] > c_adj[static_cast<size_t>(super)][static_cast<size_t>(nv)]) {
          c_adj[static_cast<size_t>(super)][static_cast<size_t>(nv)] = adj[static_cast<size_t>(u)][static_cast<size_t>(v)];
          c_origin[static_cast<size_t>(super)][static_cast<size_t>(nv)] = origin[static_cast<size_t>(u)][static_cast<size_t>(v)];
        }
      }
    }
  }

  std::vector<std::pair<int, int>> sub = solve(c_adj, c_origin);

  // Identify the edge chosen into the supernode and the cycle vertex where it
  // lands; all other cycle edges stay.
  int landing = -1;
  for (int nu = 0; nu < m; ++nu) {
    if (entry_vertex[static_cast<size_t>(nu)] < 0) continue;
    const auto enter = c_origin[static_cast<size_t>(nu)][static_cast<size_t>(super)];
    for (const auto& e : sub)
      if (e == enter) {
        landing = entry_vertex[static_cast<size_t>(nu)];
        break;
      }
    if (landing >= 0) break;
  }
  if (landing < 0) throw ValidityError("arborescence search failed to enter a cycle");

  for (int v : cycle)
    if (v != landing)
      sub.push_back(origin[static_cast<size_t>(best_in[static_cast<size_t>(v)])][static_cast<size_t>(v)]);
  return sub;
}

}  // namespace

std::vector<int> decode(const ScoreMatrix& scores) {
  scores.values.require_rank(2, "score matrix");
  const Index w = scores.tokens();
  if (scores.values.dim(1) != w + 1) throw ShapeError("score matrix must be w x (w+1)");
  const int n = static_cast<int>(w) + 1;

  EdgeMatrix adj(static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(n), kNegInf));
  OriginMatrix origin(static_cast<size_t>(n),
                      std::vector<std::pair<int, int>>(static_cast<size_t>(n), {-1, -1}));
  for (Index dep = 1; dep <= w; ++dep) {
    for (Index head = 0; head <= w; ++head) {
      if (head == dep) continue;  // masked self-arc
      adj[static_cast<size_t>(head)][static_cast<size_t>(dep)] = scores.values(dep - 1, head);
      origin[static_cast<size_t>(head)][static_cast<size_t>(dep)] = {static_cast<int>(head),
                                                                     static_cast<int>(dep)};
    }
  }

  std::vector<int> heads(static_cast<size_t>(w), -1);
  for (const auto& [head, dep] : solve(adj, origin)) heads[static_cast<size_t>(dep - 1)] = head;
  validate_heads(heads);
  return heads;
}

}  // namespace tlp
