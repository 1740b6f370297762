#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "starforge/coboundary.hpp"
#include "starforge/deformation.hpp"
#include "starforge/graphs.hpp"
#include "starforge/linfty.hpp"
#include "starforge/linsolve.hpp"

namespace starforge {

// Weight solving is desk scale: the associator layer at order k runs over all
// graphs with k aerial vertices, and both the graph count and the symbolic
// probe algebra grow quickly past this point.
inline constexpr unsigned kMaxWeightOrder = 3;

// Affine family of graph weights at one hbar order: a particular assignment
// plus a basis of homogeneous directions, both indexed against `graphs`.
struct WeightFamily {
  unsigned order = 1;
  std::vector<Graph> graphs;
  std::vector<Rational> weights;
  std::vector<std::vector<Rational>> free_basis;
};

struct WeightSolveReport {
  bool found = false;
  WeightFamily family;
};

// x(y(f,g),h) - x(f,y(g,h)): one cross layer of the associator of a product
// built from arity-2 stages
inline PolyDiffOp associator_pairing(const PolyDiffOp& x, const PolyDiffOp& y) {
  return compose_at(x, 0, y) - compose_at(x, 1, y);
}

// weight 1 on the single left-to-right contraction; this is the first-order
// normalization that doubles the antisymmetrization map on bivectors
inline WeightFamily hkr_weight_family() {
  WeightFamily fam;
  fam.order = 1;
  fam.graphs = enumerate_graphs(1);
  fam.weights.assign(fam.graphs.size(), Rational(0));
  Graph lr{1, {{kGroundL, kGroundR}}};
  bool hit = false;
  for (std::size_t i = 0; i < fam.graphs.size(); ++i) {
    if (fam.graphs[i] == lr) {
      fam.weights[i] = Rational(1);
      hit = true;
    }
  }
  if (!hit) fail("E_INTERNAL", "contraction graph missing from enumeration", "hkr_weight_family");
  return fam;
}

// weighted sum of graph evaluations against a single bivector, with an
// explicit weight vector (a point of the affine family)
inline PolyDiffOp weighted_graph_sum(const WeightFamily& fam, const std::vector<Rational>& weights,
                                     const PolyVector& alpha, int geom_nvars = -1) {
  if (weights.size() != fam.graphs.size())
    fail("E_BAD_ARG", "one weight per graph required", "weighted_graph_sum");
  if (alpha.degree() != 2)
    fail("E_DEGREE_MISMATCH", "graph weights pair with a bivector", "weighted_graph_sum");
  PolyDiffOp acc(1, alpha.nvars());
  for (std::size_t i = 0; i < fam.graphs.size(); ++i) {
    if (weights[i].is_zero()) continue;
    acc += weights[i] * graph_evaluate(fam.graphs[i], alpha, geom_nvars);
  }
  return acc;
}

inline PolyDiffOp weighted_graph_sum(const WeightFamily& fam, const PolyVector& alpha,
                                     int geom_nvars = -1) {
  return weighted_graph_sum(fam, fam.weights, alpha, geom_nvars);
}

// star tail from one family per order: tail[k] is the order-k weighted sum.
// The result is a candidate; callers check flatness where they rely on it.
inline StarProduct assemble_star(const std::vector<WeightFamily>& families,
                                 const PolyVector& alpha) {
  if (families.empty()) fail("E_BAD_ARG", "at least one family required", "assemble_star");
  for (std::size_t i = 0; i < families.size(); ++i)
    if (families[i].order != i + 1)
      fail("E_BAD_ARG", "families must cover orders 1..N in order", "assemble_star");
  unsigned n = static_cast<unsigned>(families.size());
  PolyDiffOpSeries tail = op_series_zero(1, alpha.nvars(), n);
  for (unsigned k = 1; k <= n; ++k) tail[k] = weighted_graph_sum(families[k - 1], alpha);
  return StarProduct{tail};
}

struct WeightSystemOptions {
  int alpha_nvars = 4;       // dimension of the constant symbolic probe
  int alpha_degree_cap = 1;  // 0: constant probe only; 1: add the affine probes
  bool gl_side_conditions = false;
};

// Linear system in the unknown order-k weights. Unknowns are ordered as
// `graphs` then `gl_graphs`; the latter carry the vector-field-slot variants
// used by the side conditions and do not appear in the associator rows.
struct WeightSystem {
  unsigned order;
  std::vector<Graph> graphs;
  std::vector<Graph> gl_graphs;
  LinearSystem<std::string> system;
};

namespace detail {

// Symbolic probe: a bivector whose coefficients are linear in extra symbol
// variables placed after the `geom` geometric ones. Derivatives and frames
// stay inside the geometric block, so collecting rows over full monomials
// enforces the constraint for every specialization of the symbols.
struct WeightProbe {
  PolyVector alpha;
  int geom;
};

inline std::vector<WeightProbe> weight_probes(const WeightSystemOptions& opt) {
  std::vector<WeightProbe> out;
  int gn = opt.alpha_nvars;
  if (gn < 2)
    fail("E_BAD_ARG", "constant probe needs at least two variables", "weight_constraint_system");
  {
    int nsym = gn * (gn - 1) / 2;
    int nv = gn + nsym;
    PolyVector a(2, nv);
    int s = gn;
    for (int i = 0; i < gn; ++i)
      for (int j = i + 1; j < gn; ++j) {
        a.add_component({i, j}, Poly::variable(s, nv));
        ++s;
      }
    out.push_back({a, gn});
  }
  if (opt.alpha_degree_cap >= 1) {
    // every bivector on two variables is flat, so a fully symbolic affine
    // coefficient stays inside the admissible class
    int nv = 5;
    Poly c = Poly::variable(2, nv) + Poly::variable(3, nv) * Poly::variable(0, nv) +
             Poly::variable(4, nv) * Poly::variable(1, nv);
    PolyVector a(2, nv);
    a.add_component({0, 1}, c);
    out.push_back({a, 2});
    // rotation-algebra probe: linear coefficients on three variables
    PolyVector r(2, 3);
    r.add_component({0, 1}, Poly::variable(2, 3));
    r.add_component({1, 2}, Poly::variable(0, 3));
    r.add_component({2, 0}, Poly::variable(1, 3));
    out.push_back({r, 3});
  }
  return out;
}

// graphs with a single-edge first vertex (a vector-field slot) and two-edge
// others; canonical under relabelings that fix the first vertex
inline std::vector<Graph> enumerate_field_slot_graphs(unsigned order) {
  int n = static_cast<int>(order);
  std::vector<int> targets;
  targets.push_back(kGroundR);
  targets.push_back(kGroundL);
  for (int v = 0; v < n; ++v) targets.push_back(v);
  const int base = static_cast<int>(targets.size());
  std::vector<int> degree(static_cast<std::size_t>(n), 2);
  degree[0] = 1;
  int slots = 2 * n - 1;

  std::set<Graph> out;
  std::vector<int> choice(static_cast<std::size_t>(slots), 0);
  while (true) {
    Graph g;
    g.n_aerial = n;
    g.edges.assign(static_cast<std::size_t>(n), {});
    bool ok = true;
    int pos = 0;
    for (int v = 0; v < n && ok; ++v)
      for (int s = 0; s < degree[static_cast<std::size_t>(v)]; ++s) {
        int t = targets[static_cast<std::size_t>(choice[static_cast<std::size_t>(pos++)])];
        if (t == v) {
          ok = false;
          break;
        }
        g.edges[static_cast<std::size_t>(v)].push_back(t);
      }
    if (ok) {
      std::vector<int> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      Graph best = g;
      do {
        Graph cand;
        cand.n_aerial = n;
        cand.edges.assign(g.edges.size(), {});
        for (int v = 0; v < n; ++v) {
          std::vector<int> e = g.edges[static_cast<std::size_t>(v)];
          for (int& t : e)
            if (t >= 0) t = perm[static_cast<std::size_t>(t)];
          cand.edges[static_cast<std::size_t>(perm[static_cast<std::size_t>(v)])] = std::move(e);
        }
        if (cand.edges < best.edges) best = std::move(cand);
      } while (std::next_permutation(perm.begin() + 1, perm.end()));
      out.insert(std::move(best));
    }
    int p = 0;
    while (p < slots && ++choice[static_cast<std::size_t>(p)] == base)
      choice[static_cast<std::size_t>(p++)] = 0;
    if (p == slots) break;
  }
  return std::vector<Graph>(out.begin(), out.end());
}

// rows demanding that every vector-field-slot operator vanishes on a symbolic
// linear field paired with a symbolic constant bivector
inline void add_gl_rows(LinearSystem<std::string>& sys, const std::vector<Graph>& gl_graphs,
                        std::size_t col_base, unsigned order) {
  const int geom = 2;
  const int nv = geom + geom * geom + 1;
  PolyVector xi(1, nv);
  for (int a = 0; a < geom; ++a)
    for (int b = 0; b < geom; ++b)
      xi.add_component({b}, Poly::variable(a, nv) * Poly::variable(geom + a * geom + b, nv));
  PolyVector alpha(2, nv);
  alpha.add_component({0, 1}, Poly::variable(geom + geom * geom, nv));

  for (std::size_t c = 0; c < gl_graphs.size(); ++c) {
    std::vector<PolyVector> at;
    at.push_back(xi);
    for (unsigned v = 1; v < order; ++v) at.push_back(alpha);
    PolyDiffOp op = graph_evaluate_multi(gl_graphs[c], at, geom);
    op_rows(op, [&](const std::string& row, const Rational& v) {
      sys.add_entry(col_base + c, "gl#" + row, v);
    });
  }
}

}  // namespace detail

// Associativity constraints on the order-k weights, given pinned families for
// every lower order. Expanding the order-k associator layer over the symbolic
// probes and collecting operator rows per full monomial yields equations that
// hold for every specialization, so solutions work for any probe-shaped input.
inline WeightSystem weight_constraint_system(unsigned k, const std::vector<WeightFamily>& lower,
                                             const WeightSystemOptions& opt = {}) {
  if (k < 1)
    fail("E_BAD_ARG", "weight systems start at the first order", "weight_constraint_system");
  if (k > kMaxWeightOrder)
    fail("E_CAP_EXCEEDED", "weight order cap is 3", "weight_constraint_system");
  if (opt.alpha_degree_cap < 0 || opt.alpha_degree_cap > 1)
    fail("E_CAP_EXCEEDED", "probe coefficient degree cap is 1", "weight_constraint_system");
  if (lower.size() != static_cast<std::size_t>(k) - 1)
    fail("E_BAD_ARG", "one pinned family per lower order required", "weight_constraint_system");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (lower[i].order != i + 1)
      fail("E_BAD_ARG", "pinned families must be sorted by order", "weight_constraint_system");
    if (lower[i].weights.size() != lower[i].graphs.size())
      fail("E_BAD_ARG", "pinned family weight vector malformed", "weight_constraint_system");
  }

  std::vector<Graph> graphs = enumerate_graphs(static_cast<int>(k));
  std::vector<Graph> gl_graphs;
  if (opt.gl_side_conditions && k >= 2) gl_graphs = detail::enumerate_field_slot_graphs(k);

  LinearSystem<std::string> sys(graphs.size() + gl_graphs.size());
  std::vector<detail::WeightProbe> probes = detail::weight_probes(opt);
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const detail::WeightProbe& probe = probes[p];
    std::string pfx = "p" + std::to_string(p) + "#";
    PolyDiffOp mu = PolyDiffOp::multiplication(probe.alpha.nvars());
    for (std::size_t c = 0; c < graphs.size(); ++c) {
      PolyDiffOp b = graph_evaluate(graphs[c], probe.alpha, probe.geom);
      PolyDiffOp col = associator_pairing(mu, b) + associator_pairing(b, mu);
      detail::op_rows(col, [&](const std::string& row, const Rational& v) {
        sys.add_entry(c, pfx + row, v);
      });
    }
    if (k >= 2) {
      std::vector<PolyDiffOp> beta;
      for (const WeightFamily& f : lower)
        beta.push_back(weighted_graph_sum(f, probe.alpha, probe.geom));
      PolyDiffOp cross(2, probe.alpha.nvars());
      for (unsigned i = 1; i < k; ++i)
        cross += associator_pairing(beta[i - 1], beta[k - i - 1]);
      detail::op_rows(cross, [&](const std::string& row, const Rational& v) {
        sys.add_rhs(pfx + row, -v);
      });
    }
  }
  if (!gl_graphs.empty()) detail::add_gl_rows(sys, gl_graphs, graphs.size(), k);
  return WeightSystem{k, std::move(graphs), std::move(gl_graphs), std::move(sys)};
}

// exact affine solve; inconsistent systems report "no weight family"
inline WeightSolveReport solve_weights(const WeightSystem& sys) {
  LinearSolution sol = sys.system.solve();
  WeightSolveReport out;
  if (!sol.solvable) return out;
  out.found = true;
  out.family.order = sys.order;
  out.family.graphs = sys.graphs;
  std::size_t np = sys.graphs.size();
  out.family.weights.assign(sol.particular.begin(),
                            sol.particular.begin() + static_cast<std::ptrdiff_t>(np));
  for (const std::vector<Rational>& vec : sol.nullspace) {
    std::vector<Rational> r(vec.begin(), vec.begin() + static_cast<std::ptrdiff_t>(np));
    bool nonzero = false;
    for (const Rational& x : r) nonzero = nonzero || !x.is_zero();
    if (nonzero) out.family.free_basis.push_back(std::move(r));
  }
  return out;
}

// Solve for two-vertex graph weights that repair the arity-2 defect of the
// doubled antisymmetrization morphism on the given bivector pairs. The defect
// is affine in the weights, so unit-weight responses give the columns; the
// result plugs into make_hkr_morphism as its graph list.
inline WeightSolveReport solve_bracket_homotopy(
    const std::vector<std::pair<PolyVector, PolyVector>>& probes, int nvars, unsigned order) {
  if (probes.empty()) fail("E_BAD_ARG", "at least one probe pair required",
                           "solve_bracket_homotopy");
  for (const auto& [x, y] : probes) {
    if (x.degree() != 2 || y.degree() != 2)
      fail("E_DEGREE_MISMATCH", "probes must be bivector pairs", "solve_bracket_homotopy");
    if (x.nvars() != nvars || y.nvars() != nvars)
      fail("E_NVARS_MISMATCH", "probe nvars disagree", "solve_bracket_homotopy");
  }
  std::vector<Graph> graphs = enumerate_graphs(2);
  LinearSystem<std::string> sys(graphs.size());

  auto lift = [&](const PolyVector& v) {
    PolyVectorSeries s = polyvector_series_zero(2, nvars, order);
    s[0] = v;
    return tv_elt(s, 0);
  };
  auto defect_rows = [&](const LInftyMorphism& m, const std::pair<PolyVector, PolyVector>& pr,
                         const std::string& pfx,
                         const std::function<void(const std::string&, const Rational&)>& sink) {
    LinftyElt d = linfty_identity_defect(m, {lift(pr.first), lift(pr.second)});
    for (unsigned j = 0; j <= d.dop.order(); ++j) {
      std::string jp = pfx + std::to_string(j) + '#';
      detail::op_rows(d.dop[j],
                      [&](const std::string& row, const Rational& v) { sink(jp + row, v); });
    }
  };

  LInftyMorphism base = make_hkr_morphism(nvars, order, 2);
  for (std::size_t p = 0; p < probes.size(); ++p) {
    std::string pfx = "p" + std::to_string(p) + '#';
    std::map<std::string, Rational> base_rows;
    defect_rows(base, probes[p], pfx, [&](const std::string& row, const Rational& v) {
      base_rows[row] += v;
    });
    for (const auto& [row, v] : base_rows)
      if (!v.is_zero()) sys.add_rhs(row, -v);
    for (std::size_t c = 0; c < graphs.size(); ++c) {
      LInftyMorphism unit = make_hkr_morphism(nvars, order, 2, {{graphs[c], Rational(1)}});
      defect_rows(unit, probes[p], pfx, [&](const std::string& row, const Rational& v) {
        sys.add_entry(c, row, v);
      });
      for (const auto& [row, v] : base_rows)
        if (!v.is_zero()) sys.add_entry(c, row, -v);
    }
  }

  LinearSolution sol = sys.solve();
  WeightSolveReport out;
  if (!sol.solvable) return out;
  out.found = true;
  out.family.order = 2;
  out.family.graphs = std::move(graphs);
  out.family.weights = sol.particular;
  for (std::vector<Rational>& vec : sol.nullspace) {
    bool nonzero = false;
    for (const Rational& x : vec) nonzero = nonzero || !x.is_zero();
    if (nonzero) out.family.free_basis.push_back(std::move(vec));
  }
  return out;
}

}  // namespace starforge
