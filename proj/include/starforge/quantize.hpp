#pragma once

#include <optional>
#include <string>
#include <vector>

#include "starforge/coboundary.hpp"
#include "starforge/deformation.hpp"
#include "starforge/polydiff.hpp"
#include "starforge/polyvector.hpp"

namespace starforge {

namespace detail {

// slot-wise product of two-argument operators with constant coefficients;
// the factors act through disjoint derivative batches, so no Leibniz
// cross-terms arise and multi-indices simply add
inline PolyDiffOp parallel_product(const PolyDiffOp& a, const PolyDiffOp& b) {
  PolyDiffOp r(1, a.nvars());
  for (const auto& [da, ca] : a.terms())
    for (const auto& [db, cb] : b.terms()) {
      Exps l = da[0], rr = da[1];
      for (int i = 0; i < a.nvars(); ++i) {
        l[i] += db[0][i];
        rr[i] += db[1][i];
      }
      r.add_term({l, rr}, ca * cb);
    }
  return r;
}

inline std::size_t op_support(const PolyDiffOp& op) {
  std::size_t n = 0;
  for (const auto& [derivs, coeff] : op.terms()) n += coeff.terms().size();
  return n;
}

}  // namespace detail

// Closed-form product for a constant-coefficient bivector: the first-order
// term pairs every ordered index pair of the bivector, which doubles the
// antisymmetrization map, and order j is its j-th slot-wise power over j!.
// Associative at every truncation order.
inline StarProduct moyal_star(const PolyVector& alpha, unsigned order) {
  if (alpha.degree() != 2)
    fail("E_DEGREE_MISMATCH", "closed-form product needs a bivector", "moyal_star");
  int nv = alpha.nvars();
  PolyDiffOp p(1, nv);
  for (const auto& [frame, coeff] : alpha.components()) {
    if (coeff.degree() > 0)
      fail("E_BAD_ARG", "closed-form product needs constant coefficients", "moyal_star");
    Rational c = coeff.constant_term();
    Exps ei(nv, 0), ej(nv, 0);
    ei[frame[0]] = 1;
    ej[frame[1]] = 1;
    p.add_term({ei, ej}, Poly::constant(nv, c));
    p.add_term({ej, ei}, Poly::constant(nv, -c));
  }
  PolyDiffOpSeries tail = op_series_zero(1, nv, order);
  PolyDiffOp power = p;
  Rational inv_factorial(1);
  for (unsigned j = 1; j <= order; ++j) {
    if (j > 1) {
      power = detail::parallel_product(power, p);
      inv_factorial /= Rational(static_cast<long>(j));
    }
    tail[j] = inv_factorial * power;
  }
  return StarProduct{tail};
}

struct QuantizeLogEntry {
  unsigned order = 0;
  SolveWindow window{0, 0};
  std::size_t obstruction_terms = 0;
  std::size_t correction_terms = 0;
};

struct QuantizationRun {
  PolyVectorSeries alpha;
  StarProduct star;
  std::vector<QuantizeLogEntry> log;
};

// Order-by-order construction of an associative product from a flat bivector
// series. Each order is seeded with twice the antisymmetrization of the input
// layer (fixing the first-order bracket to twice the input bracket); the
// remaining obstruction is verified closed and absorbed by a coboundary
// solve. The default window grows with the input coefficient degree; a miss
// inside the window is reported as window exhaustion with the failing order.
inline QuantizationRun quantize(const PolyVectorSeries& alpha,
                                std::optional<SolveWindow> window = std::nullopt) {
  FormalPoissonCheckResult flat = formal_poisson_check(alpha);
  if (!flat.ok)
    fail("E_NOT_POISSON", "quantization input must be a flat bivector series", "quantize");

  const unsigned n = alpha.order();
  const int nv = alpha[0].nvars();
  int alpha_degree = 0;
  for (unsigned k = 0; k <= n; ++k)
    for (const auto& [frame, coeff] : alpha[k].components())
      alpha_degree = std::max(alpha_degree, coeff.degree());

  QuantizationRun run;
  run.alpha = alpha;
  PolyDiffOpSeries tail = op_series_zero(1, nv, n);
  for (unsigned k = 1; k <= n; ++k) {
    tail[k] = Rational(2) * hkr_u1(alpha[k]);
    PolyDiffOp obstruction = mc_residual(tail)[k];
    if (!hochschild_d(obstruction).is_zero())
      fail("E_INTERNAL", "open obstruction at order " + std::to_string(k), "quantize");
    SolveWindow win = window ? *window
                             : SolveWindow{alpha_degree * static_cast<int>(k) + 2,
                                           static_cast<int>(k) + 1};
    CoboundaryResult sol = coboundary_solve(-obstruction, win);
    if (!sol.found)
      fail("E_WINDOW_EXHAUSTED", "no correction within caps at order " + std::to_string(k),
           "quantize");
    tail[k] += sol.eta;
    run.log.push_back({k, win, detail::op_support(obstruction), detail::op_support(sol.eta)});
  }
  if (!is_mc(tail))
    fail("E_INTERNAL", "constructed product fails flatness", "quantize");
  run.star = StarProduct{tail};
  return run;
}

}  // namespace starforge
