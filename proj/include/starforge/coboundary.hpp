#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "starforge/linsolve.hpp"
#include "starforge/polydiff.hpp"

namespace starforge {

// Search window for linear solves in the operator complex. Defaults chosen so
// the window is complete for exact inputs: the differential preserves both the
// coefficient degree and the total derivative order, so a preimage (when one
// exists at all) never needs to leave the window spanned by the input itself.
struct SolveWindow {
  int coeff_degree_cap;  // max total degree of coefficient monomials
  int slot_order_cap;    // max derivative order per argument slot
};

namespace detail {

inline int op_coeff_degree(const PolyDiffOp& op) {
  int d = 0;
  for (const auto& [derivs, coeff] : op.terms()) d = std::max(d, coeff.degree());
  return d;
}

inline int op_total_order(const PolyDiffOp& op) {
  int d = 0;
  for (const auto& [derivs, coeff] : op.terms()) {
    int s = 0;
    for (const Exps& m : derivs) s += total_degree(m);
    d = std::max(d, s);
  }
  return d;
}

inline SolveWindow default_window(const PolyDiffOp& z) {
  return {op_coeff_degree(z) + 2, op_total_order(z)};
}

inline std::string row_key(const Derivs& derivs, const Exps& monomial) {
  std::ostringstream os;
  for (const Exps& d : derivs) {
    for (int x : d) os << x << ',';
    os << ';';
  }
  os << '|';
  for (int x : monomial) os << x << ',';
  return os.str();
}

// canonical coordinates of an operator: one row per (derivative tuple, monomial)
inline void op_rows(const PolyDiffOp& op,
                    const std::function<void(const std::string&, const Rational&)>& sink) {
  for (const auto& [derivs, coeff] : op.terms())
    for (const auto& [exps, c] : coeff.terms()) sink(row_key(derivs, exps), c);
}

inline void enumerate_exact_degree(int nvars, int degree, Exps& scratch, int var,
                                   const std::function<void(const Exps&)>& sink) {
  if (var == nvars - 1) {
    scratch[var] = degree;
    sink(scratch);
    return;
  }
  for (int take = degree; take >= 0; --take) {
    scratch[var] = take;
    enumerate_exact_degree(nvars, degree - take, scratch, var + 1, sink);
  }
}

inline std::vector<Exps> monomials_of_degree(int nvars, int degree) {
  std::vector<Exps> out;
  if (nvars == 0) {
    if (degree == 0) out.push_back({});
    return out;
  }
  Exps scratch(nvars, 0);
  enumerate_exact_degree(nvars, degree, scratch, 0, [&](const Exps& e) { out.push_back(e); });
  std::sort(out.begin(), out.end(), GradedLexLess{});
  return out;
}

// multi-indices over the first geom_nvars variables with 1 <= |d| <= cap
inline std::vector<Exps> slot_indices(int nvars, int geom_nvars, int cap) {
  std::vector<Exps> out;
  for (int total = 1; total <= cap; ++total)
    for (const Exps& g : monomials_of_degree(geom_nvars, total)) {
      Exps e(nvars, 0);
      std::copy(g.begin(), g.end(), e.begin());
      out.push_back(std::move(e));
    }
  std::sort(out.begin(), out.end(), GradedLexLess{});
  return out;
}

// normalized derivative tuples: `slots` multi-indices, each nonzero,
// per-slot order <= slot_cap, total order exactly `total`
inline void enumerate_deriv_tuples(const std::vector<Exps>& pool, int slots, int total,
                                   Derivs& scratch, int acc,
                                   const std::function<void(const Derivs&)>& sink) {
  if (static_cast<int>(scratch.size()) == slots) {
    if (acc == total) sink(scratch);
    return;
  }
  for (const Exps& d : pool) {
    int t = total_degree(d);
    if (acc + t > total) continue;
    scratch.push_back(d);
    enumerate_deriv_tuples(pool, slots, total, scratch, acc + t, sink);
    scratch.pop_back();
  }
}

}  // namespace detail

struct CoboundaryResult {
  bool found = false;
  PolyDiffOp eta;
};

// Solve d(eta) = z for a normalized operator eta one degree below z, searching
// the window's finite normalized basis. The solve splits z by (coefficient
// degree, total derivative order), which the differential preserves, and
// handles each homogeneous component in its own small exact system. A miss is
// reported as not-found; it means no solution exists inside the window, which
// for the default window means no polynomial solution exists at all.
inline CoboundaryResult coboundary_solve(const PolyDiffOp& z,
                                         std::optional<SolveWindow> window = std::nullopt,
                                         int geom_nvars = -1) {
  if (!is_normalized(z)) fail("E_NOT_NORMALIZED", "input operator is not normalized", "coboundary_solve");
  if (!hochschild_d(z).is_zero())
    fail("E_NOT_COCYCLE", "input operator is not closed", "coboundary_solve");
  if (z.arity() < 2) {
    // the differential vanishes on functions, so only z = 0 is a coboundary
    CoboundaryResult r;
    r.found = z.is_zero();
    r.eta = PolyDiffOp(-1, z.nvars());
    return r;
  }

  const int nv = z.nvars();
  const int geom = geom_nvars < 0 ? nv : geom_nvars;
  const SolveWindow win = window ? *window : detail::default_window(z);
  const int eta_arity = z.arity() - 1;

  CoboundaryResult out;
  out.eta = PolyDiffOp(z.degree() - 1, nv);
  if (z.is_zero()) {
    out.found = true;
    return out;
  }

  // split z into bigraded components
  std::map<std::pair<int, int>, PolyDiffOp> components;
  for (const auto& [derivs, coeff] : z.terms()) {
    int td = 0;
    for (const Exps& m : derivs) td += total_degree(m);
    for (const auto& [exps, c] : coeff.terms()) {
      auto key = std::make_pair(total_degree(exps), td);
      auto [it, fresh] = components.emplace(key, PolyDiffOp(z.degree(), nv));
      it->second.add_term(derivs, Poly::monomial(exps, c, nv));
    }
  }

  for (const auto& [grade, zc] : components) {
    auto [cd, td] = grade;
    if (cd > win.coeff_degree_cap) return {};  // outside the window
    std::vector<Exps> monos = detail::monomials_of_degree(nv, cd);
    std::vector<Exps> pool = detail::slot_indices(nv, geom, std::min(win.slot_order_cap, td));

    // basis elements: (deriv tuple, monomial) pairs in deterministic order
    std::vector<std::pair<Derivs, Exps>> basis;
    Derivs scratch;
    detail::enumerate_deriv_tuples(pool, eta_arity, td, scratch, 0, [&](const Derivs& d) {
      for (const Exps& m : monos) basis.emplace_back(d, m);
    });
    if (basis.empty()) return {};

    LinearSystem<std::string> sys(basis.size());
    for (std::size_t j = 0; j < basis.size(); ++j) {
      PolyDiffOp elt(eta_arity - 1, nv);
      elt.add_term(basis[j].first, Poly::monomial(basis[j].second, Rational(1), nv));
      detail::op_rows(hochschild_d(elt),
                      [&](const std::string& row, const Rational& v) { sys.add_entry(j, row, v); });
    }
    detail::op_rows(zc, [&](const std::string& row, const Rational& v) { sys.add_rhs(row, v); });

    LinearSolution sol = sys.solve();
    if (!sol.solvable) return {};
    for (std::size_t j = 0; j < basis.size(); ++j) {
      if (sol.particular[j].is_zero()) continue;
      out.eta.add_term(basis[j].first,
                       Poly::monomial(basis[j].second, sol.particular[j], nv));
    }
  }
  out.found = true;
  return out;
}

}  // namespace starforge
