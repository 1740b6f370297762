#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "starforge/deformation.hpp"
#include "starforge/graphs.hpp"
#include "starforge/polyvector.hpp"

namespace starforge {

enum class Flavor { kPolyVector, kPolyDiffOp };

// Series-valued element of one of the two graded Lie algebra flavors, tagged
// with its degree in the suspended grading. Bivectors and bidifferential
// operators both sit in shifted degree 0; the suspended differential and
// bracket below raise shifted degree by exactly 1.
struct LinftyElt {
  Flavor flavor = Flavor::kPolyVector;
  int shifted_degree = 0;
  PolyVectorSeries tv;
  PolyDiffOpSeries dop;
};

namespace detail {

// payload degree carried by each flavor at a given shifted degree
inline int tv_payload_degree(int shifted) { return shifted + 2; }
inline int dop_payload_degree(int shifted) { return shifted + 1; }

inline PolyVectorSeries normalize_tv(PolyVectorSeries s, int degree, const std::string& loc) {
  for (unsigned k = 0; k <= s.order(); ++k) {
    if (s[k].is_zero())
      s[k] = PolyVector(degree, s[k].nvars());
    else if (s[k].degree() != degree)
      fail("E_DEGREE_MISMATCH", "payload degree disagrees with element grading", loc);
  }
  return s;
}

inline PolyDiffOpSeries normalize_dop(PolyDiffOpSeries s, int degree, const std::string& loc) {
  for (unsigned k = 0; k <= s.order(); ++k) {
    if (s[k].is_zero())
      s[k] = PolyDiffOp(degree, s[k].nvars());
    else if (s[k].degree() != degree)
      fail("E_DEGREE_MISMATCH", "payload degree disagrees with element grading", loc);
  }
  return s;
}

}  // namespace detail

inline LinftyElt linfty_zero_elt(Flavor flavor, int shifted, int nvars, unsigned order) {
  LinftyElt e;
  e.flavor = flavor;
  e.shifted_degree = shifted;
  e.tv = polyvector_series_zero(std::max(0, detail::tv_payload_degree(shifted)), nvars, order);
  e.dop = op_series_zero(std::max(-1, detail::dop_payload_degree(shifted)), nvars, order);
  return e;
}

inline LinftyElt tv_elt(PolyVectorSeries s, int shifted) {
  LinftyElt e = linfty_zero_elt(Flavor::kPolyVector, shifted, s[0].nvars(), s.order());
  e.tv = detail::normalize_tv(std::move(s), detail::tv_payload_degree(shifted), "tv_elt");
  return e;
}

inline LinftyElt tv_elt(const PolyVectorSeries& s) {
  return tv_elt(s, s[0].degree() - 2);
}

inline LinftyElt dop_elt(PolyDiffOpSeries s, int shifted) {
  LinftyElt e = linfty_zero_elt(Flavor::kPolyDiffOp, shifted, s[0].nvars(), s.order());
  e.dop = detail::normalize_dop(std::move(s), detail::dop_payload_degree(shifted), "dop_elt");
  return e;
}

inline LinftyElt dop_elt(const PolyDiffOpSeries& s) {
  return dop_elt(s, s[0].degree() - 1);
}

inline int elt_nvars(const LinftyElt& e) {
  return e.flavor == Flavor::kPolyVector ? e.tv[0].nvars() : e.dop[0].nvars();
}

inline unsigned elt_order(const LinftyElt& e) {
  return e.flavor == Flavor::kPolyVector ? e.tv.order() : e.dop.order();
}

inline bool elt_is_zero(const LinftyElt& e) {
  return e.flavor == Flavor::kPolyVector ? e.tv.is_zero() : e.dop.is_zero();
}

inline bool elt_is_plus(const LinftyElt& e) {
  return e.flavor == Flavor::kPolyVector ? e.tv.is_plus() : e.dop.is_plus();
}

// total count of nonzero canonical coordinates; the exact "violation size"
inline long elt_coordinate_count(const LinftyElt& e) {
  long n = 0;
  if (e.flavor == Flavor::kPolyVector) {
    for (unsigned k = 0; k <= e.tv.order(); ++k)
      for (const auto& [frame, coeff] : e.tv[k].components())
        n += static_cast<long>(coeff.terms().size());
  } else {
    for (unsigned k = 0; k <= e.dop.order(); ++k)
      for (const auto& [derivs, coeff] : e.dop[k].terms())
        n += static_cast<long>(coeff.terms().size());
  }
  return n;
}

inline LinftyElt elt_add(const LinftyElt& a, const LinftyElt& b) {
  if (elt_is_zero(a)) return b;
  if (elt_is_zero(b)) return a;
  if (a.flavor != b.flavor) fail("E_FLAVOR_MISMATCH", "flavors differ", "elt_add");
  if (a.shifted_degree != b.shifted_degree)
    fail("E_DEGREE_MISMATCH", "shifted degrees differ", "elt_add");
  LinftyElt r = a;
  if (a.flavor == Flavor::kPolyVector)
    r.tv += b.tv;
  else
    r.dop += b.dop;
  return r;
}

inline LinftyElt elt_sub(const LinftyElt& a, const LinftyElt& b) {
  LinftyElt nb = b;
  if (b.flavor == Flavor::kPolyVector)
    nb.tv = -b.tv;
  else
    nb.dop = -b.dop;
  return elt_add(a, nb);
}

inline LinftyElt elt_scale(const Rational& s, LinftyElt e) {
  if (e.flavor == Flavor::kPolyVector)
    e.tv = s * e.tv;
  else
    e.dop = s * e.dop;
  return e;
}

inline bool elt_equal(const LinftyElt& a, const LinftyElt& b) {
  return elt_is_zero(elt_sub(a, b));
}

// graded Lie bracket, flavor-wise, extended to series by the Cauchy rule
inline LinftyElt elt_bracket(const LinftyElt& a, const LinftyElt& b) {
  if (a.flavor != b.flavor) fail("E_FLAVOR_MISMATCH", "flavors differ", "elt_bracket");
  int shifted = a.shifted_degree + b.shifted_degree + 1;
  LinftyElt r = linfty_zero_elt(a.flavor, shifted, elt_nvars(a), elt_order(a));
  if (a.flavor == Flavor::kPolyVector)
    r.tv = detail::normalize_tv(schouten_series(a.tv, b.tv), detail::tv_payload_degree(shifted),
                                "elt_bracket");
  else
    r.dop = detail::normalize_dop(gerstenhaber_series(a.dop, b.dop),
                                  detail::dop_payload_degree(shifted), "elt_bracket");
  return r;
}

// suspended binary operation Q2(x, y) = (-1)^{deg x} [x, y]
inline LinftyElt elt_q2(const LinftyElt& a, const LinftyElt& b) {
  LinftyElt r = elt_bracket(a, b);
  if ((a.shifted_degree % 2 + 2) % 2 == 1) r = elt_scale(Rational(-1), r);
  return r;
}

// flavor differential: zero on polyvectors, the Hochschild differential on
// operators
inline LinftyElt elt_d(const LinftyElt& x) {
  LinftyElt r = linfty_zero_elt(x.flavor, x.shifted_degree + 1, elt_nvars(x), elt_order(x));
  if (x.flavor == Flavor::kPolyDiffOp)
    for (unsigned k = 0; k <= x.dop.order(); ++k) {
      PolyDiffOp dk = hochschild_d(x.dop[k]);
      if (!dk.is_zero()) r.dop[k] = std::move(dk);
    }
  return r;
}

// twisted differential Q1 = d + [theta, .]; theta is the flavor's MC twist
// (plus-series of shifted degree 0), zero for the untwisted complex
inline LinftyElt elt_q1(const LinftyElt& x, const LinftyElt& theta) {
  LinftyElt r = elt_d(x);
  if (!elt_is_zero(theta)) r = elt_add(r, elt_bracket(theta, x));
  return r;
}

namespace detail {

// Koszul sign of reordering graded arguments into (perm[0], perm[1], ...):
// each time an element moves left past another, the sign picks up
// (-1)^{product of their shifted degrees}.
inline int koszul_sign(const std::vector<int>& shifted, const std::vector<int>& perm) {
  std::vector<int> cur(shifted.size());
  std::iota(cur.begin(), cur.end(), 0);
  int sign = 1;
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    std::size_t j = pos;
    while (cur[j] != perm[pos]) ++j;
    for (; j > pos; --j) {
      long e = static_cast<long>(shifted[cur[j - 1]]) * shifted[perm[pos]];
      if ((e % 2 + 2) % 2 == 1) sign = -sign;
      std::swap(cur[j], cur[j - 1]);
    }
  }
  return sign;
}

// all splits m_0 + ... + m_{parts-1} = total over nonnegative integers
template <class F>
inline void for_each_split(unsigned total, int parts, std::vector<unsigned>& scratch, F&& fn) {
  if (parts == 1) {
    scratch.push_back(total);
    fn(scratch);
    scratch.pop_back();
    return;
  }
  for (unsigned take = 0; take <= total; ++take) {
    scratch.push_back(take);
    for_each_split(total - take, parts - 1, scratch, fn);
    scratch.pop_back();
  }
}

// Gauss-Jordan inverse over Q
inline std::vector<std::vector<Rational>> matrix_inverse(std::vector<std::vector<Rational>> m,
                                                         const std::string& loc) {
  const std::size_t n = m.size();
  for (const auto& row : m)
    if (row.size() != n) fail("E_BAD_ARG", "matrix must be square", loc);
  std::vector<std::vector<Rational>> inv(n, std::vector<Rational>(n, Rational(0)));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = Rational(1);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    while (pivot < n && m[pivot][col].is_zero()) ++pivot;
    if (pivot == n) fail("E_BAD_ARG", "matrix is singular", loc);
    std::swap(m[pivot], m[col]);
    std::swap(inv[pivot], inv[col]);
    Rational lead = m[col][col];
    for (std::size_t j = 0; j < n; ++j) {
      m[col][j] /= lead;
      inv[col][j] /= lead;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || m[r][col].is_zero()) continue;
      Rational f = m[r][col];
      for (std::size_t j = 0; j < n; ++j) {
        m[r][j] -= f * m[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

// f(A t): substitute the linear form sum_j A[i][j] t_j for each variable
inline Poly linear_substitute(const Poly& f, const std::vector<std::vector<Rational>>& a) {
  int nv = f.nvars();
  if (static_cast<int>(a.size()) != nv)
    fail("E_BAD_ARG", "matrix size must equal nvars", "linear_substitute");
  std::vector<Poly> rows;
  rows.reserve(static_cast<std::size_t>(nv));
  for (int i = 0; i < nv; ++i) {
    Poly row(nv);
    for (int j = 0; j < nv; ++j) row += Poly::variable(j, nv) * a[i][j];
    rows.push_back(std::move(row));
  }
  Poly out(nv);
  for (const auto& [e, c] : f.terms()) {
    Poly term = Poly::constant(nv, c);
    for (int i = 0; i < nv; ++i)
      for (int k = 0; k < e[i]; ++k) term = term * rows[i];
    out += term;
  }
  return out;
}

// pushforward of a polyvector along t -> A t: frame indices transform with A,
// coefficients with the inverse substitution
inline PolyVector polyvector_pushforward(const PolyVector& v,
                                         const std::vector<std::vector<Rational>>& a,
                                         const std::vector<std::vector<Rational>>& a_inv) {
  int nv = v.nvars();
  PolyVector out(v.degree(), nv);
  for (const auto& [frame, coeff] : v.components()) {
    Poly moved = linear_substitute(coeff, a_inv);
    std::vector<int> target(frame.size(), 0);
    std::function<void(std::size_t, Rational)> rec = [&](std::size_t pos, Rational factor) {
      if (factor.is_zero()) return;
      if (pos == frame.size()) {
        out.add_component(PolyVector::Frame(target.begin(), target.end()), moved * factor);
        return;
      }
      for (int j = 0; j < nv; ++j) {
        target[pos] = j;
        rec(pos + 1, factor * a[j][frame[pos]]);
      }
    };
    rec(0, Rational(1));
  }
  return out;
}

}  // namespace detail

// Morphism descriptor tree. Kinds:
//   zero          every Taylor coefficient vanishes
//   identity      psi_1 = id within one flavor
//   scale         multiply every Taylor coefficient of `base` by `factor`
//   pushforward   psi_1 = polyvector pushforward along the invertible `matrix`
//   conjugation   psi_1 = exp(ad log) on operators; `log` is a closed
//                 plus-series of arity-1 operators
//   hkr           psi_1 = the antisymmetrization embedding; optional weighted
//                 graphs supply psi_i for i >= 2 (n_aerial = i), evaluated
//                 with Koszul symmetrization
//   twisted       `base` with every coefficient contracted against the Maurer-
//                 Cartan element `twist`
struct MorphismDesc {
  std::string kind;
  Rational factor;
  std::vector<std::vector<Rational>> matrix;
  PolyDiffOpSeries conj_log;
  std::vector<std::pair<Graph, Rational>> graphs;
  std::shared_ptr<const MorphismDesc> base;
  std::shared_ptr<const LinftyElt> twist;
};

struct LInftyMorphism {
  Flavor source = Flavor::kPolyVector;
  Flavor target = Flavor::kPolyDiffOp;
  int nvars = 0;
  unsigned order = 0;
  int arity_cap = 1;
  LinftyElt source_twist;  // shifted-degree-0 plus-series, zero when untwisted
  LinftyElt target_twist;
  MorphismDesc desc;
};

namespace detail {

// weighted graph sum on one payload tuple, graded-symmetrized with 1/arity!;
// tuples whose degrees do not match a graph's out-degrees contribute zero
inline PolyDiffOp graph_kernel(const std::vector<std::pair<Graph, Rational>>& graphs,
                               const std::vector<PolyVector>& xs, int nvars) {
  const int arity = static_cast<int>(xs.size());
  PolyDiffOp acc(1, nvars);
  std::vector<int> shifted;
  shifted.reserve(xs.size());
  for (const PolyVector& x : xs) shifted.push_back(x.degree() - 2);
  std::vector<int> perm(xs.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rational norm = Rational::factorial(static_cast<unsigned>(arity)).inv();
  do {
    Rational sign(koszul_sign(shifted, perm));
    std::vector<PolyVector> ordered;
    ordered.reserve(xs.size());
    for (int idx : perm) ordered.push_back(xs[idx]);
    for (const auto& [g, w] : graphs) {
      if (g.n_aerial != arity || w.is_zero()) continue;
      bool degrees_fit = true;
      for (int v = 0; v < arity && degrees_fit; ++v)
        degrees_fit = ordered[v].degree() == static_cast<int>(g.edges[v].size());
      if (!degrees_fit) continue;
      acc += (w * sign * norm) * graph_evaluate_multi(g, ordered);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return acc;
}

inline LinftyElt apply_desc(const MorphismDesc& desc, const LInftyMorphism& psi,
                            const std::vector<LinftyElt>& args);

}  // namespace detail

// Taylor coefficient psi_i applied to i arguments (series-multilinear).
inline LinftyElt linfty_psi(const LInftyMorphism& psi, const std::vector<LinftyElt>& args) {
  if (args.empty()) fail("E_BAD_ARG", "Taylor coefficients start at arity 1", "linfty_psi");
  if (static_cast<int>(args.size()) > psi.arity_cap)
    fail("E_BAD_ARG", "arity exceeds the morphism's cap", "linfty_psi");
  for (const LinftyElt& x : args) {
    if (x.flavor != psi.source) fail("E_FLAVOR_MISMATCH", "argument flavor", "linfty_psi");
    if (elt_order(x) != psi.order) fail("E_ORDER_MISMATCH", "argument order", "linfty_psi");
    if (elt_nvars(x) != psi.nvars) fail("E_NVARS_MISMATCH", "argument nvars", "linfty_psi");
  }
  return detail::apply_desc(psi.desc, psi, args);
}

namespace detail {

inline int args_shifted_degree(const std::vector<LinftyElt>& args) {
  int s = 0;
  for (const LinftyElt& x : args) s += x.shifted_degree;
  return s;
}

inline LinftyElt apply_desc(const MorphismDesc& desc, const LInftyMorphism& psi,
                            const std::vector<LinftyElt>& args) {
  const int n = static_cast<int>(args.size());
  const int out_shifted = args_shifted_degree(args);
  LinftyElt zero = linfty_zero_elt(psi.target, out_shifted, psi.nvars, psi.order);

  if (desc.kind == "zero") return zero;

  if (desc.kind == "identity") {
    if (n != 1) return zero;
    return args[0];
  }

  if (desc.kind == "scale") {
    if (!desc.base) fail("E_BAD_ARG", "scale descriptor needs a base", "linfty_psi");
    return elt_scale(desc.factor, apply_desc(*desc.base, psi, args));
  }

  if (desc.kind == "pushforward") {
    if (n != 1) return zero;
    auto inv = matrix_inverse(desc.matrix, "linfty_psi.pushforward");
    LinftyElt r = zero;
    for (unsigned k = 0; k <= psi.order; ++k) {
      PolyVector moved = polyvector_pushforward(args[0].tv[k], desc.matrix, inv);
      if (!moved.is_zero()) r.tv[k] = std::move(moved);
    }
    return r;
  }

  if (desc.kind == "conjugation") {
    if (n != 1) return zero;
    // exp(ad log): terminates because log is a plus-series
    LinftyElt r = args[0];
    PolyDiffOpSeries term = args[0].dop;
    for (unsigned m = 1; m <= psi.order; ++m) {
      term = Rational(1, static_cast<long>(m)) * gerstenhaber_series(desc.conj_log, term);
      r.dop += term;
    }
    return r;
  }

  if (desc.kind == "hkr") {
    if (n == 1) {
      LinftyElt r = zero;
      for (unsigned k = 0; k <= psi.order; ++k) {
        PolyDiffOp image = hkr_u1(args[0].tv[k]);
        if (!image.is_zero()) r.dop[k] = std::move(image);
      }
      return r;
    }
    // weighted graph coefficients, extended to series multilinearly
    LinftyElt r = zero;
    std::vector<unsigned> scratch;
    for (unsigned m = 0; m <= psi.order; ++m) {
      for_each_split(m, n, scratch, [&](const std::vector<unsigned>& split) {
        std::vector<PolyVector> payloads;
        payloads.reserve(args.size());
        for (int i = 0; i < n; ++i) payloads.push_back(args[i].tv[split[i]]);
        PolyDiffOp val = graph_kernel(desc.graphs, payloads, psi.nvars);
        if (!val.is_zero()) r.dop[m] += val;
      });
    }
    return r;
  }

  if (desc.kind == "twisted") {
    if (!desc.base || !desc.twist) fail("E_BAD_ARG", "twisted descriptor incomplete", "linfty_psi");
    // sum_k (1/k!) base_{n+k}(twist^k, args); each twist insertion raises the
    // minimum hbar order by 1, so k <= order, and base coefficients vanish
    // beyond the arity cap, so k <= cap - n: the bound is exact
    LinftyElt acc = zero;
    const unsigned kmax =
        std::min(psi.order, static_cast<unsigned>(std::max(0, psi.arity_cap - n)));
    std::vector<LinftyElt> extended = args;
    Rational inv_fact(1);
    for (unsigned k = 0; k <= kmax; ++k) {
      if (k > 0) {
        extended.insert(extended.begin(), *desc.twist);
        inv_fact /= Rational(static_cast<long>(k));
      }
      acc = elt_add(acc, elt_scale(inv_fact, apply_desc(*desc.base, psi, extended)));
    }
    return acc;
  }

  fail("E_BAD_ARG", "unknown morphism descriptor kind: " + desc.kind, "linfty_psi");
}

}  // namespace detail

inline LInftyMorphism make_identity_morphism(Flavor flavor, int nvars, unsigned order,
                                             int arity_cap) {
  LInftyMorphism m;
  m.source = m.target = flavor;
  m.nvars = nvars;
  m.order = order;
  m.arity_cap = arity_cap;
  m.source_twist = linfty_zero_elt(flavor, 0, nvars, order);
  m.target_twist = m.source_twist;
  m.desc.kind = "identity";
  return m;
}

inline LInftyMorphism make_zero_morphism(Flavor source, Flavor target, int nvars, unsigned order,
                                         int arity_cap) {
  LInftyMorphism m;
  m.source = source;
  m.target = target;
  m.nvars = nvars;
  m.order = order;
  m.arity_cap = arity_cap;
  m.source_twist = linfty_zero_elt(source, 0, nvars, order);
  m.target_twist = linfty_zero_elt(target, 0, nvars, order);
  m.desc.kind = "zero";
  return m;
}

inline LInftyMorphism make_pushforward_morphism(std::vector<std::vector<Rational>> matrix,
                                                int nvars, unsigned order, int arity_cap) {
  if (static_cast<int>(matrix.size()) != nvars)
    fail("E_BAD_ARG", "matrix size must equal nvars", "make_pushforward_morphism");
  detail::matrix_inverse(matrix, "make_pushforward_morphism");  // reject singular input
  LInftyMorphism m = make_identity_morphism(Flavor::kPolyVector, nvars, order, arity_cap);
  m.desc.kind = "pushforward";
  m.desc.matrix = std::move(matrix);
  return m;
}

inline LInftyMorphism make_conjugation_morphism(PolyDiffOpSeries log, int nvars, unsigned order,
                                                int arity_cap) {
  if (log.order() != order)
    fail("E_ORDER_MISMATCH", "log order differs", "make_conjugation_morphism");
  if (!log.is_plus())
    fail("E_BAD_ARG", "conjugation log must be a plus-series", "make_conjugation_morphism");
  for (unsigned k = 1; k <= order; ++k) {
    if (!log[k].is_zero() && log[k].degree() != 0)
      fail("E_BAD_ARG", "conjugation log must hold arity-1 operators",
           "make_conjugation_morphism");
    if (!hochschild_d(log[k]).is_zero())
      fail("E_BAD_ARG", "conjugation log must be closed so the differential survives",
           "make_conjugation_morphism");
  }
  LInftyMorphism m = make_identity_morphism(Flavor::kPolyDiffOp, nvars, order, arity_cap);
  m.desc.kind = "conjugation";
  m.desc.conj_log = std::move(log);
  return m;
}

inline LInftyMorphism make_hkr_morphism(int nvars, unsigned order, int arity_cap,
                                        std::vector<std::pair<Graph, Rational>> graphs = {}) {
  for (const auto& [g, w] : graphs) {
    validate_graph(g, "make_hkr_morphism");
    if (g.n_aerial < 2 || g.n_aerial > arity_cap)
      fail("E_BAD_ARG", "graph coefficients cover arities 2..cap", "make_hkr_morphism");
  }
  LInftyMorphism m;
  m.source = Flavor::kPolyVector;
  m.target = Flavor::kPolyDiffOp;
  m.nvars = nvars;
  m.order = order;
  m.arity_cap = arity_cap;
  m.source_twist = linfty_zero_elt(Flavor::kPolyVector, 0, nvars, order);
  m.target_twist = linfty_zero_elt(Flavor::kPolyDiffOp, 0, nvars, order);
  m.desc.kind = "hkr";
  m.desc.graphs = std::move(graphs);
  return m;
}

inline LInftyMorphism scale_morphism(const Rational& factor, const LInftyMorphism& base) {
  LInftyMorphism m = base;
  MorphismDesc d;
  d.kind = "scale";
  d.factor = factor;
  d.base = std::make_shared<const MorphismDesc>(base.desc);
  m.desc = std::move(d);
  return m;
}

// Def-6.2-style identity defect for one argument tuple; zero iff the identity
// holds on it. Source/target twists supply the differentials.
inline LinftyElt linfty_identity_defect(const LInftyMorphism& psi,
                                        const std::vector<LinftyElt>& xs) {
  const int n = static_cast<int>(xs.size());
  if (n < 1) fail("E_BAD_ARG", "identity needs at least one argument", "linfty_identity_defect");
  if (n > psi.arity_cap) fail("E_BAD_ARG", "tuple longer than arity cap", "linfty_identity_defect");

  std::vector<int> shifted;
  shifted.reserve(xs.size());
  for (const LinftyElt& x : xs) shifted.push_back(x.shifted_degree);

  LinftyElt acc = linfty_zero_elt(psi.target, detail::args_shifted_degree(xs) + 1, psi.nvars,
                                  psi.order);

  std::vector<int> perm(xs.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rational pre1 = Rational::factorial(static_cast<unsigned>(n - 1)).inv();
  Rational pre2 = n >= 2
                      ? (Rational(2) * Rational::factorial(static_cast<unsigned>(n - 2))).inv()
                      : Rational(0);
  do {
    Rational sign(detail::koszul_sign(shifted, perm));

    // psi_n(Q1 x_{s(1)}, x_{s(2)}, ...)
    std::vector<LinftyElt> rot;
    rot.reserve(xs.size());
    for (int idx : perm) rot.push_back(xs[idx]);
    std::vector<LinftyElt> with_d = rot;
    with_d[0] = elt_q1(rot[0], psi.source_twist);
    acc = elt_add(acc, elt_scale(sign * pre1, linfty_psi(psi, with_d)));

    if (n >= 2) {
      // psi_{n-1}(Q2(x_{s(1)}, x_{s(2)}), x_{s(3)}, ...)
      std::vector<LinftyElt> merged;
      merged.reserve(xs.size() - 1);
      merged.push_back(elt_q2(rot[0], rot[1]));
      for (std::size_t i = 2; i < rot.size(); ++i) merged.push_back(rot[i]);
      acc = elt_add(acc, elt_scale(sign * pre2, linfty_psi(psi, merged)));

      // Q2(psi_k(x_{s(1..k)}), psi_{n-k}(x_{s(k+1..n)}))
      for (int k = 1; k <= n - 1; ++k) {
        Rational pre4 = (Rational(2) * Rational::factorial(static_cast<unsigned>(k)) *
                         Rational::factorial(static_cast<unsigned>(n - k)))
                            .inv();
        std::vector<LinftyElt> left(rot.begin(), rot.begin() + k);
        std::vector<LinftyElt> right(rot.begin() + k, rot.end());
        LinftyElt pair = elt_q2(linfty_psi(psi, left), linfty_psi(psi, right));
        acc = elt_sub(acc, elt_scale(sign * pre4, pair));
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  // Q1(psi_n(x))
  acc = elt_sub(acc, elt_q1(linfty_psi(psi, xs), psi.target_twist));
  return acc;
}

struct LinftyCheckReport {
  bool passed = true;
  long max_violation = 0;  // largest nonzero-coordinate count of any defect
  int first_failure_arity = -1;
  std::size_t tuples_checked = 0;
};

inline LinftyCheckReport linfty_check(const LInftyMorphism& psi,
                                      const std::vector<std::vector<LinftyElt>>& samples) {
  LinftyCheckReport report;
  for (const auto& tuple : samples) {
    LinftyElt defect = linfty_identity_defect(psi, tuple);
    ++report.tuples_checked;
    long violation = elt_coordinate_count(defect);
    if (violation > 0) {
      report.passed = false;
      report.max_violation = std::max(report.max_violation, violation);
      if (report.first_failure_arity < 0)
        report.first_failure_arity = static_cast<int>(tuple.size());
    }
  }
  return report;
}

namespace detail {

inline void validate_twist_shape(const LInftyMorphism& psi, const LinftyElt& omega,
                                 const std::string& loc) {
  if (omega.flavor != psi.source) fail("E_FLAVOR_MISMATCH", "twist flavor", loc);
  if (elt_order(omega) != psi.order) fail("E_ORDER_MISMATCH", "twist order", loc);
  if (elt_nvars(omega) != psi.nvars) fail("E_NVARS_MISMATCH", "twist nvars", loc);
  if (omega.shifted_degree != 0)
    fail("E_DEGREE_MISMATCH", "twist must have shifted degree 0", loc);
  if (!elt_is_plus(omega)) fail("E_BAD_ARG", "twist must be a plus-series", loc);
}

inline void validate_mc_elt(const LinftyElt& omega, const std::string& loc) {
  if (omega.flavor == Flavor::kPolyVector) {
    if (!formal_poisson_check(omega.tv).ok)
      fail("E_NOT_MC", "bivector series fails the flatness equation", loc);
  } else {
    if (!is_mc(omega.dop)) fail("E_NOT_MC", "operator series fails the flatness equation", loc);
  }
}

}  // namespace detail

// omega' = sum_{j>=1} (1/j!) psi_j(omega, ..., omega). Each insertion of the
// plus-series omega raises the minimum hbar order by 1, so the sum terminates
// exactly at j = min(arity_cap, order).
inline LinftyElt linfty_mc_push(const LInftyMorphism& psi, const LinftyElt& omega) {
  detail::validate_twist_shape(psi, omega, "linfty_mc_push");
  LinftyElt acc = linfty_zero_elt(psi.target, 0, psi.nvars, psi.order);
  const unsigned jmax = std::min(psi.order, static_cast<unsigned>(psi.arity_cap));
  std::vector<LinftyElt> repeated;
  Rational inv_fact(1);
  for (unsigned j = 1; j <= jmax; ++j) {
    repeated.push_back(omega);
    inv_fact /= Rational(static_cast<long>(j));
    acc = elt_add(acc, elt_scale(inv_fact, linfty_psi(psi, repeated)));
  }
  return acc;
}

// Contract every Taylor coefficient against the MC element omega. The result
// is a morphism between the twisted complexes: source differential
// d + [omega, .], target differential d + [push(omega), .].
inline LInftyMorphism linfty_twist(const LInftyMorphism& psi, const LinftyElt& omega) {
  detail::validate_twist_shape(psi, omega, "linfty_twist");
  detail::validate_mc_elt(omega, "linfty_twist");
  if (!elt_is_zero(psi.source_twist) || !elt_is_zero(psi.target_twist))
    fail("E_BAD_ARG", "morphism is already twisted", "linfty_twist");
  LInftyMorphism out = psi;
  MorphismDesc d;
  d.kind = "twisted";
  d.base = std::make_shared<const MorphismDesc>(psi.desc);
  d.twist = std::make_shared<const LinftyElt>(omega);
  out.desc = std::move(d);
  out.source_twist = omega;
  out.target_twist = linfty_mc_push(psi, omega);
  return out;
}

}  // namespace starforge
