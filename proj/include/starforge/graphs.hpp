#pragma once

#include <algorithm>
#include <iterator>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "starforge/polydiff.hpp"
#include "starforge/polyvector.hpp"

namespace starforge {

// ground slots of a graph edge; aerial targets are 0-based vertex indices
inline constexpr int kGroundL = -1;
inline constexpr int kGroundR = -2;

// Directed graph on aerial vertices over two ground slots. The admissible
// class has exactly two ordered out-edges per aerial vertex and no self-loops;
// parallel edges are allowed. The evaluator additionally tolerates vertices
// with a single out-edge (a vector-field slot used by side-condition checks);
// enumeration and canonical form reject them.
struct Graph {
  int n_aerial = 0;
  std::vector<std::vector<int>> edges;

  bool operator==(const Graph& o) const { return n_aerial == o.n_aerial && edges == o.edges; }
  bool operator!=(const Graph& o) const { return !(*this == o); }
  bool operator<(const Graph& o) const {
    if (n_aerial != o.n_aerial) return n_aerial < o.n_aerial;
    return edges < o.edges;
  }
};

inline void validate_graph_shape(const Graph& g, bool strict_arity, const std::string& loc) {
  if (g.n_aerial < 0) fail("E_BAD_GRAPH", "negative aerial vertex count", loc);
  if (static_cast<int>(g.edges.size()) != g.n_aerial)
    fail("E_BAD_GRAPH", "edge list must have one entry per aerial vertex", loc);
  for (int v = 0; v < g.n_aerial; ++v) {
    const std::vector<int>& out = g.edges[v];
    if (strict_arity ? out.size() != 2 : (out.empty() || out.size() > 2))
      fail("E_BAD_GRAPH", "aerial vertices carry two ordered out-edges", loc);
    for (int t : out) {
      if (t == v) fail("E_BAD_GRAPH", "self-loops are not admissible", loc);
      if (t != kGroundL && t != kGroundR && (t < 0 || t >= g.n_aerial))
        fail("E_BAD_GRAPH", "edge target out of range", loc);
    }
  }
}

inline void validate_graph(const Graph& g, const std::string& loc = "validate_graph") {
  validate_graph_shape(g, true, loc);
}

// lexicographically smallest edge list over relabelings of the aerial vertices
inline Graph canonical_form(const Graph& g) {
  validate_graph(g, "canonical_form");
  std::vector<int> perm(static_cast<std::size_t>(g.n_aerial));
  std::iota(perm.begin(), perm.end(), 0);
  Graph best = g;
  bool first = true;
  do {
    Graph cand;
    cand.n_aerial = g.n_aerial;
    cand.edges.assign(g.edges.size(), {});
    for (int v = 0; v < g.n_aerial; ++v) {
      std::vector<int> out = g.edges[v];
      for (int& t : out)
        if (t >= 0) t = perm[t];
      cand.edges[perm[v]] = std::move(out);
    }
    if (first || cand.edges < best.edges) best = std::move(cand);
    first = false;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline bool is_canonical(const Graph& g) { return canonical_form(g) == g; }

// all canonical admissible graphs with the given aerial vertex count,
// duplicate-free and deterministically ordered
inline std::vector<Graph> enumerate_graphs(int n_aerial) {
  if (n_aerial < 0) fail("E_BAD_ARG", "aerial count must be nonnegative", "enumerate_graphs");
  {
    // raw generation size fuse: (n_aerial + 1)^(2 n_aerial) assignments
    std::size_t raw = 1;
    for (int i = 0; i < 2 * n_aerial && raw <= term_limit(); ++i)
      raw *= static_cast<std::size_t>(n_aerial) + 1;
    check_term_limit(raw, "enumerate_graphs");
  }
  std::set<Graph> out;
  if (n_aerial == 0) {
    out.insert(Graph{0, {}});
  } else {
    std::vector<int> targets;
    targets.push_back(kGroundR);
    targets.push_back(kGroundL);
    for (int v = 0; v < n_aerial; ++v) targets.push_back(v);
    std::vector<int> choice(static_cast<std::size_t>(2 * n_aerial), 0);
    const int base = static_cast<int>(targets.size());
    while (true) {
      Graph g;
      g.n_aerial = n_aerial;
      g.edges.assign(static_cast<std::size_t>(n_aerial), {});
      bool ok = true;
      for (int v = 0; v < n_aerial && ok; ++v) {
        for (int s = 0; s < 2; ++s) {
          int t = targets[choice[2 * v + s]];
          if (t == v) {
            ok = false;
            break;
          }
          g.edges[v].push_back(t);
        }
      }
      if (ok) out.insert(canonical_form(g));
      int pos = 0;
      while (pos < 2 * n_aerial && ++choice[pos] == base) choice[pos++] = 0;
      if (pos == 2 * n_aerial) break;
    }
  }
  return std::vector<Graph>(out.begin(), out.end());
}

namespace detail {

// ordered-index tensor view of a polyvector: tuple -> coefficient with the
// sign of sorting the tuple into the stored frame; repeated indices vanish
inline std::map<std::vector<int>, Poly> polyvector_tensor(const PolyVector& v) {
  std::map<std::vector<int>, Poly> out;
  std::vector<int> frame_sorted;
  for (const auto& [frame, coeff] : v.components()) {
    std::vector<int> tuple(frame.begin(), frame.end());
    std::sort(tuple.begin(), tuple.end());
    do {
      // sign of the permutation taking the stored ascending frame to `tuple`
      int sign = 1;
      std::vector<int> work = tuple;
      for (std::size_t i = 0; i < work.size(); ++i) {
        std::size_t j = i;
        while (work[j] != frame[i]) ++j;
        while (j > i) {
          std::swap(work[j], work[j - 1]);
          --j;
          sign = -sign;
        }
      }
      Poly& slot = out.emplace(tuple, Poly(v.nvars())).first->second;
      if (sign > 0)
        slot += coeff;
      else
        slot -= coeff;
    } while (std::next_permutation(tuple.begin(), tuple.end()));
  }
  for (auto it = out.begin(); it != out.end();)
    it = it->second.is_zero() ? out.erase(it) : std::next(it);
  return out;
}

}  // namespace detail

// Evaluate a graph with one polyvector per aerial vertex: each vertex carries
// the ordered-index tensor of its polyvector (arity = out-degree), each edge
// differentiates its target by the edge's index, and everything is summed
// over index assignments. Bilinear in the ground arguments by construction.
// Frames must live in the first geom_nvars variables, so trailing variables
// can hold symbolic coefficients that are never contracted or differentiated.
inline PolyDiffOp graph_evaluate_multi(const Graph& g, const std::vector<PolyVector>& at_vertex,
                                       int geom_nvars = -1) {
  validate_graph_shape(g, false, "graph_evaluate");
  if (g.n_aerial == 0)
    fail("E_BAD_ARG", "empty graph carries no nvars; use PolyDiffOp::multiplication",
         "graph_evaluate");
  if (at_vertex.size() != static_cast<std::size_t>(g.n_aerial))
    fail("E_BAD_ARG", "one polyvector per aerial vertex required", "graph_evaluate");
  int nv = at_vertex[0].nvars();
  for (int v = 0; v < g.n_aerial; ++v) {
    if (at_vertex[v].degree() != static_cast<int>(g.edges[v].size()))
      fail("E_DEGREE_MISMATCH", "polyvector degree must match vertex out-degree",
           "graph_evaluate");
    if (at_vertex[v].nvars() != nv)
      fail("E_NVARS_MISMATCH", "vertex polyvectors disagree on nvars", "graph_evaluate");
  }
  if (geom_nvars < 0) geom_nvars = nv;
  if (geom_nvars > nv)
    fail("E_BAD_ARG", "geometric variable count exceeds nvars", "graph_evaluate");

  std::vector<std::map<std::vector<int>, Poly>> tensor;
  tensor.reserve(static_cast<std::size_t>(g.n_aerial));
  for (int v = 0; v < g.n_aerial; ++v) {
    auto t = detail::polyvector_tensor(at_vertex[v]);
    for (const auto& [tuple, coeff] : t)
      for (int idx : tuple)
        if (idx >= geom_nvars)
          fail("E_BAD_ARG", "polyvector frame outside the geometric variables",
               "graph_evaluate");
    tensor.push_back(std::move(t));
  }

  PolyDiffOp result(1, nv);
  // current index tuple choice per vertex, iterated over nonzero tensor entries
  std::vector<std::map<std::vector<int>, Poly>::const_iterator> pick(
      static_cast<std::size_t>(g.n_aerial));
  for (int v = 0; v < g.n_aerial; ++v) {
    if (tensor[v].empty()) return result;
    pick[v] = tensor[v].begin();
  }
  while (true) {
    // derivative multi-indices accumulated on each target
    Exps dl(nv, 0), dr(nv, 0);
    std::vector<Exps> dv(static_cast<std::size_t>(g.n_aerial), Exps(nv, 0));
    for (int v = 0; v < g.n_aerial; ++v) {
      const std::vector<int>& tuple = pick[v]->first;
      for (std::size_t s = 0; s < tuple.size(); ++s) {
        int target = g.edges[v][s];
        int idx = tuple[s];
        if (target == kGroundL)
          ++dl[idx];
        else if (target == kGroundR)
          ++dr[idx];
        else
          ++dv[target][idx];
      }
    }
    Poly coeff = Poly::constant(nv, Rational(1));
    for (int v = 0; v < g.n_aerial && !coeff.is_zero(); ++v)
      coeff = coeff * pick[v]->second.derive(dv[v]);
    if (!coeff.is_zero()) result.add_term({dl, dr}, coeff);

    int v = 0;
    while (v < g.n_aerial) {
      if (++pick[v] != tensor[v].end()) break;
      pick[v] = tensor[v].begin();
      ++v;
    }
    if (v == g.n_aerial) break;
  }
  return result;
}

// same bivector at every aerial vertex, the U_j building block
inline PolyDiffOp graph_evaluate(const Graph& g, const PolyVector& alpha, int geom_nvars = -1) {
  if (alpha.degree() != 2)
    fail("E_DEGREE_MISMATCH", "graph evaluation places a bivector at each vertex",
         "graph_evaluate");
  if (g.n_aerial == 0) return PolyDiffOp::multiplication(alpha.nvars());
  return graph_evaluate_multi(g, std::vector<PolyVector>(static_cast<std::size_t>(g.n_aerial),
                                                         alpha),
                              geom_nvars);
}

}  // namespace starforge
