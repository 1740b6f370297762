#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "starforge/error.hpp"
#include "starforge/hbar_series.hpp"
#include "starforge/rational.hpp"

namespace starforge {

// Laurent polynomial in one variable: exponent -> coefficient, exponents of
// either sign. The overlap rings of the chart cover live here.
class LaurentPoly {
 public:
  LaurentPoly() = default;

  static LaurentPoly constant(const Rational& c) { return monomial(0, c); }
  static LaurentPoly monomial(int e, const Rational& c) {
    LaurentPoly p;
    p.add_term(e, c);
    return p;
  }

  void add_term(int e, const Rational& c) {
    if (c.is_zero()) return;
    auto [it, fresh] = terms_.emplace(e, c);
    if (!fresh) {
      it->second += c;
      if (it->second.is_zero()) terms_.erase(it);
    }
  }

  const std::map<int, Rational>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  Rational coeff(int e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? Rational(0) : it->second;
  }

  LaurentPoly& operator+=(const LaurentPoly& o) {
    for (const auto& [e, c] : o.terms_) add_term(e, c);
    return *this;
  }
  LaurentPoly& operator-=(const LaurentPoly& o) {
    for (const auto& [e, c] : o.terms_) add_term(e, -c);
    return *this;
  }
  friend LaurentPoly operator+(LaurentPoly a, const LaurentPoly& b) { return a += b; }
  friend LaurentPoly operator-(LaurentPoly a, const LaurentPoly& b) { return a -= b; }
  LaurentPoly operator-() const {
    LaurentPoly r;
    for (const auto& [e, c] : terms_) r.terms_.emplace(e, -c);
    return r;
  }
  friend LaurentPoly operator*(const LaurentPoly& a, const LaurentPoly& b) {
    LaurentPoly r;
    for (const auto& [ea, ca] : a.terms_)
      for (const auto& [eb, cb] : b.terms_) r.add_term(ea + eb, ca * cb);
    return r;
  }
  LaurentPoly operator*(const Rational& s) const {
    LaurentPoly r;
    if (s.is_zero()) return r;
    for (const auto& [e, c] : terms_) r.terms_.emplace(e, c * s);
    return r;
  }
  friend LaurentPoly operator*(const Rational& s, const LaurentPoly& p) { return p * s; }

  LaurentPoly derivative() const {
    LaurentPoly r;
    for (const auto& [e, c] : terms_)
      if (e != 0) r.add_term(e - 1, Rational(static_cast<long>(e)) * c);
    return r;
  }

  friend bool operator==(const LaurentPoly& a, const LaurentPoly& b) { return a.terms_ == b.terms_; }
  friend bool operator!=(const LaurentPoly& a, const LaurentPoly& b) { return !(a == b); }

 private:
  std::map<int, Rational> terms_;
};

// One-argument differential operator with Laurent coefficients:
// sum_d c_d(t) D^d where D = d/dt.
class LaurentOp {
 public:
  LaurentOp() = default;

  static LaurentOp identity() { return multiplication(LaurentPoly::constant(Rational(1))); }
  static LaurentOp multiplication(const LaurentPoly& c) {
    LaurentOp r;
    r.add_term(0, c);
    return r;
  }

  void add_term(int d, const LaurentPoly& c) {
    if (d < 0) fail("E_BAD_ARG", "negative derivative order", "LaurentOp.add_term");
    if (c.is_zero()) return;
    auto [it, fresh] = terms_.emplace(d, c);
    if (!fresh) {
      it->second += c;
      if (it->second.is_zero()) terms_.erase(it);
    }
  }

  const std::map<int, LaurentPoly>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  // gamma(1) = 0: no pure multiplication part
  bool kills_constants() const { return terms_.find(0) == terms_.end(); }

  LaurentOp& operator+=(const LaurentOp& o) {
    for (const auto& [d, c] : o.terms_) add_term(d, c);
    return *this;
  }
  LaurentOp& operator-=(const LaurentOp& o) {
    for (const auto& [d, c] : o.terms_) add_term(d, -c);
    return *this;
  }
  friend LaurentOp operator+(LaurentOp a, const LaurentOp& b) { return a += b; }
  friend LaurentOp operator-(LaurentOp a, const LaurentOp& b) { return a -= b; }
  LaurentOp operator-() const {
    LaurentOp r;
    for (const auto& [d, c] : terms_) r.terms_.emplace(d, -c);
    return r;
  }
  LaurentOp operator*(const Rational& s) const {
    LaurentOp r;
    if (s.is_zero()) return r;
    for (const auto& [d, c] : terms_) r.terms_.emplace(d, c * s);
    return r;
  }
  friend LaurentOp operator*(const Rational& s, const LaurentOp& op) { return op * s; }

  LaurentPoly apply(const LaurentPoly& f) const {
    LaurentPoly r;
    for (const auto& [d, c] : terms_) {
      LaurentPoly g = f;
      for (int s = 0; s < d; ++s) g = g.derivative();
      r += c * g;
    }
    return r;
  }

  friend bool operator==(const LaurentOp& a, const LaurentOp& b) { return a.terms_ == b.terms_; }
  friend bool operator!=(const LaurentOp& a, const LaurentOp& b) { return !(a == b); }

 private:
  std::map<int, LaurentPoly> terms_;
};

// a after b, expanded by the Leibniz rule over b's coefficient:
//   c D^d (e D^f .) = sum_m binom(d, m) c e^(m) D^{d-m+f}.
inline LaurentOp compose(const LaurentOp& a, const LaurentOp& b) {
  LaurentOp r;
  for (const auto& [d, c] : a.terms())
    for (const auto& [f, e] : b.terms()) {
      LaurentPoly em = e;
      for (int m = 0; m <= d; ++m) {
        if (!em.is_zero())
          r.add_term(d - m + f,
                     Rational::binomial(static_cast<unsigned>(d), static_cast<unsigned>(m)) * (c * em));
        em = em.derivative();
      }
    }
  return r;
}

// Gauge equivalence of the overlap: hbar-series of operators with unit
// leading term and coefficients that kill constants.
using LaurentGauge = HbarSeries<LaurentOp>;

inline LaurentGauge laurent_gauge_identity(unsigned order) {
  LaurentGauge g = LaurentGauge::zero(LaurentOp(), order);
  g[0] = LaurentOp::identity();
  return g;
}

inline void validate_laurent_gauge(const LaurentGauge& g, const std::string& loc) {
  if (!(g[0] == LaurentOp::identity()))
    fail("E_BAD_ARG", "leading term must be the identity", loc);
  for (unsigned k = 1; k <= g.order(); ++k)
    if (!g[k].kills_constants())
      fail("E_NOT_NORMALIZED", "gauge coefficients must kill constants", loc);
}

inline LaurentGauge gauge_compose(const LaurentGauge& a, const LaurentGauge& b) {
  return cauchy(a, b, LaurentOp(),
                [](const LaurentOp& x, const LaurentOp& y) { return compose(x, y); });
}

// Geometric series (1 + tau)^{-1} = sum (-tau)^{compose s}; terminates because
// tau is an hbar-plus series.
inline LaurentGauge gauge_inverse(const LaurentGauge& a) {
  validate_laurent_gauge(a, "gauge_inverse");
  unsigned n = a.order();
  LaurentGauge tau = a;
  tau[0] = LaurentOp();
  LaurentGauge neg = -tau;
  LaurentGauge acc = laurent_gauge_identity(n);
  LaurentGauge term = laurent_gauge_identity(n);
  for (unsigned s = 1; s <= n; ++s) {
    term = gauge_compose(neg, term);
    if (term.is_zero()) break;
    acc += term;
  }
  return acc;
}

inline LaurentGauge gauge_truncate(const LaurentGauge& g, unsigned order) {
  if (order > g.order()) fail("E_ORDER_MISMATCH", "cannot extend a series", "gauge_truncate");
  LaurentGauge r = LaurentGauge::zero(LaurentOp(), order);
  for (unsigned k = 0; k <= order; ++k) r[k] = g[k];
  return r;
}

// Which Laurent exponents are regular on a chart: a closed exponent interval,
// unbounded where a bound is absent.
struct ChartRange {
  std::optional<int> lo;
  std::optional<int> hi;

  bool contains(int e) const { return (!lo || e >= *lo) && (!hi || e <= *hi); }
};

// Finite cover with a one-variable Laurent overlap window. Coboundary
// solvability enters only through the split of exponents between chart
// ranges; nothing here certifies that a user-supplied split is sound, the
// gluing recursion just fails when it is not applicable.
struct CoverModel {
  int charts = 2;
  int window = 0;  // overlap data carries exponents in [-window, window]
  std::vector<ChartRange> regular;
};

inline void validate_cover_model(const CoverModel& m, const std::string& loc) {
  if (m.charts < 1) fail("E_BAD_ARG", "cover needs at least one chart", loc);
  if (m.window < 0) fail("E_BAD_ARG", "window must be nonnegative", loc);
  if (static_cast<int>(m.regular.size()) != m.charts)
    fail("E_BAD_ARG", "one regularity range per chart required", loc);
}

// Default cover: chart 0 keeps the nonnegative exponents, chart 1 the
// strictly negative ones. Half-lines are closed under products and
// derivatives, so glued chart gauges stay regular.
inline CoverModel two_chart_model(int window) {
  CoverModel m;
  m.charts = 2;
  m.window = window;
  m.regular = {ChartRange{0, std::nullopt}, ChartRange{std::nullopt, -1}};
  return m;
}

// One gauge equivalence per ordered chart pair; the diagonal is the identity.
struct GaugeCocycle {
  std::vector<std::vector<LaurentGauge>> rho;

  int charts() const { return static_cast<int>(rho.size()); }
  unsigned order() const { return rho.at(0).at(0).order(); }
};

inline void validate_cocycle(const GaugeCocycle& c, const std::string& loc) {
  int m = c.charts();
  if (m < 1) fail("E_BAD_ARG", "cocycle needs at least one chart", loc);
  for (const auto& row : c.rho)
    if (static_cast<int>(row.size()) != m)
      fail("E_BAD_ARG", "square chart-pair table required", loc);
  unsigned n = c.order();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (c.rho[i][j].order() != n) fail("E_ORDER_MISMATCH", "all pairs need the same order", loc);
      validate_laurent_gauge(c.rho[i][j], loc);
    }
  LaurentGauge id = laurent_gauge_identity(n);
  for (int i = 0; i < m; ++i)
    if (!(c.rho[i][i] == id)) fail("E_BAD_ARG", "diagonal entries must be the identity", loc);
}

inline GaugeCocycle identity_cocycle(int charts, unsigned order) {
  GaugeCocycle c;
  c.rho.assign(charts, std::vector<LaurentGauge>(charts, laurent_gauge_identity(order)));
  return c;
}

// The coboundary of per-chart gauges: rho[i][j] = g_j o g_i^{-1}.
inline GaugeCocycle cocycle_from_charts(const std::vector<LaurentGauge>& gs) {
  if (gs.empty()) fail("E_BAD_ARG", "need at least one chart", "cocycle_from_charts");
  int m = static_cast<int>(gs.size());
  unsigned n = gs[0].order();
  std::vector<LaurentGauge> inv;
  inv.reserve(gs.size());
  for (const LaurentGauge& g : gs) {
    if (g.order() != n) fail("E_ORDER_MISMATCH", "all charts need the same order", "cocycle_from_charts");
    validate_laurent_gauge(g, "cocycle_from_charts");
    inv.push_back(gauge_inverse(g));
  }
  GaugeCocycle c = identity_cocycle(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      c.rho[i][j] = gauge_compose(gs[j], inv[i]);
    }
  return c;
}

struct CocycleCheckResult {
  bool ok = true;
  std::array<int, 3> triple{0, 0, 0};  // first failing (i,j,k) when !ok
};

// rho_{(j,k)} o rho_{(i,j)} = rho_{(i,k)} on every ordered triple, mod
// hbar^{upto+1}. Repeated indices included: (i,j,i) is the inverse-pair check.
inline CocycleCheckResult cocycle_check(const GaugeCocycle& c, unsigned upto) {
  validate_cocycle(c, "cocycle_check");
  if (upto > c.order())
    fail("E_ORDER_MISMATCH", "check order exceeds the stored order", "cocycle_check");
  int m = c.charts();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k) {
        LaurentGauge lhs = gauge_compose(c.rho[j][k], c.rho[i][j]);
        for (unsigned s = 0; s <= upto; ++s)
          if (!(lhs[s] == c.rho[i][k][s])) return {false, {i, j, k}};
      }
  return {};
}

namespace detail {

inline LaurentOp range_part(const LaurentOp& op, const ChartRange& r) {
  LaurentOp out;
  for (const auto& [d, coeff] : op.terms()) {
    LaurentPoly kept;
    for (const auto& [e, v] : coeff.terms())
      if (r.contains(e)) kept.add_term(e, v);
    out.add_term(d, kept);
  }
  return out;
}

inline bool op_in_range(const LaurentOp& op, const ChartRange& r) {
  for (const auto& [d, coeff] : op.terms())
    for (const auto& [e, v] : coeff.terms())
      if (!r.contains(e)) return false;
  return true;
}

inline bool op_in_window(const LaurentOp& op, int w) {
  return op_in_range(op, ChartRange{-w, w});
}

}  // namespace detail

struct TrivializeResult {
  std::vector<LaurentGauge> charts;  // rho_i with rho_{(i,j)} = rho_j o rho_i^{-1}
};

// Successive approximation through hbar orders. At stage k the anchored pair
// defect rho_j o rho_0^{-1} o rho_{(0,j)}^{-1} equals 1 + c_{0j} hbar^{k+1}
// up to higher order; c_{01} splits along chart 0's range to fix the anchor
// b_0, after which b_j = c_{0j} + b_0 is forced for every other chart and
// must land inside chart j's range. Each update multiplies 1 - b_i hbar^{k+1}
// onto rho_i. Only the output pair relation is certified; whether a
// user-supplied model's split was cohomologically sound is not.
inline TrivializeResult trivialize(const GaugeCocycle& rho, const CoverModel& model,
                                   unsigned upto) {
  validate_cover_model(model, "trivialize");
  validate_cocycle(rho, "trivialize");
  if (model.charts != rho.charts()) fail("E_BAD_ARG", "chart counts differ", "trivialize");
  if (upto > rho.order())
    fail("E_ORDER_MISMATCH", "target order exceeds the stored order", "trivialize");

  CocycleCheckResult chk = cocycle_check(rho, upto);
  if (!chk.ok)
    fail("E_NOT_COCYCLE",
         "cocycle condition fails on triple (" + std::to_string(chk.triple[0]) + "," +
             std::to_string(chk.triple[1]) + "," + std::to_string(chk.triple[2]) + ")",
         "trivialize");

  const int m = model.charts;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (unsigned k = 1; k <= upto; ++k)
        if (!detail::op_in_window(rho.rho[i][j][k], model.window))
          fail("E_WINDOW_EXHAUSTED", "cocycle coefficient outside the overlap window",
               "trivialize");

  std::vector<LaurentGauge> pair0_inv;
  pair0_inv.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j)
    pair0_inv.push_back(gauge_inverse(gauge_truncate(rho.rho[0][j], upto)));

  std::vector<LaurentGauge> g(static_cast<std::size_t>(m), laurent_gauge_identity(upto));
  for (unsigned k = 0; m > 1 && k < upto; ++k) {
    LaurentGauge g0_inv = gauge_inverse(g[0]);
    std::vector<LaurentOp> c(static_cast<std::size_t>(m));
    for (int j = 1; j < m; ++j) {
      LaurentGauge delta = gauge_compose(g[j], gauge_compose(g0_inv, pair0_inv[j]));
      for (unsigned s = 1; s <= k; ++s)
        if (!delta[s].is_zero())
          fail("E_NOT_COCYCLE", "stage defect escapes the filtration at order " + std::to_string(s),
               "trivialize");
      c[j] = delta[k + 1];
    }

    std::vector<LaurentOp> b(static_cast<std::size_t>(m));
    b[0] = -detail::range_part(c[1], model.regular[0]);
    for (int j = 1; j < m; ++j) {
      b[j] = c[j] + b[0];
      if (!detail::op_in_range(b[j], model.regular[j]))
        fail("E_WINDOW_EXHAUSTED",
             "splitting rule not applicable: defect term outside chart " + std::to_string(j) +
                 "'s range",
             "trivialize");
    }
    for (int i = 0; i < m; ++i) {
      if (b[i].is_zero()) continue;
      LaurentGauge u = laurent_gauge_identity(upto);
      u[k + 1] = -b[i];
      g[i] = gauge_compose(u, g[i]);
    }
  }

  // certify the defining relation on every ordered pair
  std::vector<LaurentGauge> ginv;
  ginv.reserve(g.size());
  for (const LaurentGauge& gi : g) ginv.push_back(gauge_inverse(gi));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (!(gauge_compose(g[j], ginv[i]) == gauge_truncate(rho.rho[i][j], upto)))
        fail("E_INTERNAL", "glued gauges miss the pair relation", "trivialize");
  return {std::move(g)};
}

// Two-argument operator on the overlap ring: terms c(t) (D^a x D^b), the
// shape of a chart star product's coefficients.
class LaurentBiOp {
 public:
  using Key = std::pair<int, int>;

  LaurentBiOp() = default;

  static LaurentBiOp multiplication() {
    LaurentBiOp r;
    r.add_term({0, 0}, LaurentPoly::constant(Rational(1)));
    return r;
  }

  void add_term(const Key& k, const LaurentPoly& c) {
    if (k.first < 0 || k.second < 0)
      fail("E_BAD_ARG", "negative derivative order", "LaurentBiOp.add_term");
    if (c.is_zero()) return;
    auto [it, fresh] = terms_.emplace(k, c);
    if (!fresh) {
      it->second += c;
      if (it->second.is_zero()) terms_.erase(it);
    }
  }

  const std::map<Key, LaurentPoly>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  LaurentBiOp& operator+=(const LaurentBiOp& o) {
    for (const auto& [k, c] : o.terms_) add_term(k, c);
    return *this;
  }
  LaurentBiOp& operator-=(const LaurentBiOp& o) {
    for (const auto& [k, c] : o.terms_) add_term(k, -c);
    return *this;
  }
  friend LaurentBiOp operator+(LaurentBiOp a, const LaurentBiOp& b) { return a += b; }
  friend LaurentBiOp operator-(LaurentBiOp a, const LaurentBiOp& b) { return a -= b; }
  LaurentBiOp operator-() const {
    LaurentBiOp r;
    for (const auto& [k, c] : terms_) r.terms_.emplace(k, -c);
    return r;
  }
  LaurentBiOp operator*(const Rational& s) const {
    LaurentBiOp r;
    if (s.is_zero()) return r;
    for (const auto& [k, c] : terms_) r.terms_.emplace(k, c * s);
    return r;
  }
  friend LaurentBiOp operator*(const Rational& s, const LaurentBiOp& op) { return op * s; }

  LaurentPoly apply(const LaurentPoly& f, const LaurentPoly& g) const {
    LaurentPoly r;
    for (const auto& [k, c] : terms_) {
      LaurentPoly u = f, v = g;
      for (int s = 0; s < k.first; ++s) u = u.derivative();
      for (int s = 0; s < k.second; ++s) v = v.derivative();
      r += c * (u * v);
    }
    return r;
  }

  friend bool operator==(const LaurentBiOp& a, const LaurentBiOp& b) { return a.terms_ == b.terms_; }
  friend bool operator!=(const LaurentBiOp& a, const LaurentBiOp& b) { return !(a == b); }

 private:
  std::map<Key, LaurentPoly> terms_;
};

using LaurentBiOpSeries = HbarSeries<LaurentBiOp>;

namespace detail {

inline Rational trinomial(int d, int p, int q) {
  return Rational::factorial(static_cast<unsigned>(d)) *
         (Rational::factorial(static_cast<unsigned>(p)) *
          Rational::factorial(static_cast<unsigned>(q)) *
          Rational::factorial(static_cast<unsigned>(d - p - q)))
             .inv();
}

}  // namespace detail

// a after S: the Leibniz rule splits D^d across the coefficient and the two
// argument streams, D^d (e u v) = sum_{p+q+r=d} d!/(p!q!r!) e^(p) u^(q) v^(r).
inline LaurentBiOp compose_out(const LaurentOp& a, const LaurentBiOp& s) {
  LaurentBiOp r;
  for (const auto& [d, c] : a.terms())
    for (const auto& [key, e] : s.terms()) {
      LaurentPoly ep = e;
      for (int p = 0; p <= d; ++p) {
        if (!ep.is_zero())
          for (int q = 0; p + q <= d; ++q)
            r.add_term({key.first + q, key.second + (d - p - q)},
                       detail::trinomial(d, p, q) * (c * ep));
        ep = ep.derivative();
      }
    }
  return r;
}

// S with one argument stream precomposed by a:
//   D^f (c w) = sum_m binom(f, m) c^(m) w^(f-m).
inline LaurentBiOp compose_in(const LaurentBiOp& s, int slot, const LaurentOp& a) {
  if (slot != 0 && slot != 1) fail("E_BAD_ARG", "slot must be 0 or 1", "compose_in");
  LaurentBiOp r;
  for (const auto& [key, e] : s.terms()) {
    int f = slot == 0 ? key.first : key.second;
    for (const auto& [d, c] : a.terms()) {
      LaurentPoly cm = c;
      for (int m = 0; m <= f; ++m) {
        if (!cm.is_zero()) {
          int ord = f - m + d;
          LaurentBiOp::Key nk = slot == 0 ? LaurentBiOp::Key{ord, key.second}
                                          : LaurentBiOp::Key{key.first, ord};
          r.add_term(nk, Rational::binomial(static_cast<unsigned>(f), static_cast<unsigned>(m)) *
                             (e * cm));
        }
        cm = cm.derivative();
      }
    }
  }
  return r;
}

// Conjugation action on two-argument series: (rho . S)(f, g) =
// rho(S(rho^{-1} f, rho^{-1} g)). Transporting a chart product along a gauge.
inline LaurentBiOpSeries gauge_conjugate_biop(const LaurentGauge& rho, const LaurentBiOpSeries& s) {
  validate_laurent_gauge(rho, "gauge_conjugate_biop");
  if (rho.order() != s.order())
    fail("E_ORDER_MISMATCH", "series orders differ", "gauge_conjugate_biop");
  LaurentGauge inv = gauge_inverse(rho);
  unsigned n = s.order();
  LaurentBiOpSeries out = LaurentBiOpSeries::zero(LaurentBiOp(), n);
  for (unsigned a = 0; a <= n; ++a)
    for (unsigned b = 0; a + b <= n; ++b) {
      if (s[b].is_zero()) continue;
      LaurentBiOp outer = compose_out(rho[a], s[b]);
      for (unsigned c = 0; a + b + c <= n; ++c) {
        LaurentBiOp left = compose_in(outer, 0, inv[c]);
        if (left.is_zero()) continue;
        for (unsigned d = 0; a + b + c + d <= n; ++d)
          out[a + b + c + d] += compose_in(left, 1, inv[d]);
      }
    }
  return out;
}

}  // namespace starforge
