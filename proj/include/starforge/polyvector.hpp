#pragma once

#include <map>
#include <vector>

#include "starforge/error.hpp"
#include "starforge/hbar_series.hpp"
#include "starforge/poly.hpp"

namespace starforge {

// Polyvector field on affine space: polynomial-coefficient sections of the
// exterior powers of the tangent bundle. A component maps a strictly
// increasing frame [i1 < ... < id] (indices of wedged coordinate derivations)
// to its polynomial coefficient. degree() is the number of wedge factors, so
// functions are degree 0 and the graded Lie degree is degree() - 1.
class PolyVector {
 public:
  using Frame = std::vector<int>;
  using CompMap = std::map<Frame, Poly>;

  PolyVector() : degree_(0), nvars_(0) {}
  PolyVector(int degree, int nvars) : degree_(degree), nvars_(nvars) {
    if (degree < 0 || nvars < 0) fail("E_BAD_ARG", "negative degree or nvars", "PolyVector");
  }

  static PolyVector function(const Poly& f) {
    PolyVector v(0, f.nvars());
    v.add_component({}, f);
    return v;
  }

  int degree() const { return degree_; }
  int nvars() const { return nvars_; }
  bool is_zero() const { return comps_.empty(); }
  const CompMap& components() const { return comps_; }

  Poly component(const Frame& frame) const {
    auto it = comps_.find(frame);
    return it == comps_.end() ? Poly(nvars_) : it->second;
  }

  // Accepts an arbitrary index tuple; sorts it and folds the permutation sign
  // into the coefficient. Tuples with a repeated index contribute nothing.
  void add_component(Frame frame, Poly coeff) {
    if (static_cast<int>(frame.size()) != degree_)
      fail("E_BAD_ARG", "frame length != degree", "PolyVector.add_component");
    if (coeff.nvars() != nvars_)
      fail("E_NVARS_MISMATCH", "coefficient nvars != polyvector nvars", "PolyVector.add_component");
    if (coeff.is_zero()) return;
    int sign = 1;
    for (std::size_t a = 0; a < frame.size(); ++a) {
      for (std::size_t b = a + 1; b < frame.size(); ++b) {
        if (frame[a] == frame[b]) return;
        if (frame[a] > frame[b]) {
          std::swap(frame[a], frame[b]);
          sign = -sign;
        }
      }
      if (frame[a] < 0 || frame[a] >= nvars_)
        fail("E_BAD_ARG", "frame index out of range", "PolyVector.add_component");
    }
    if (sign < 0) coeff = -coeff;
    auto [it, fresh] = comps_.emplace(std::move(frame), coeff);
    if (!fresh) {
      it->second += coeff;
      if (it->second.is_zero()) comps_.erase(it);
    }
    check_term_limit(comps_.size(), "PolyVector");
  }

  // The zero polyvector is degree-polymorphic: brackets that collapse to zero
  // may carry mismatched nominal degrees, so zero combines with anything.
  PolyVector& operator+=(const PolyVector& o) {
    if (o.is_zero()) return *this;
    if (is_zero()) degree_ = o.degree_;
    require_compatible(o, "PolyVector.add");
    for (const auto& [f, c] : o.comps_) add_component(f, c);
    return *this;
  }
  PolyVector& operator-=(const PolyVector& o) {
    if (o.is_zero()) return *this;
    if (is_zero()) degree_ = o.degree_;
    require_compatible(o, "PolyVector.sub");
    for (const auto& [f, c] : o.comps_) add_component(f, -c);
    return *this;
  }
  friend PolyVector operator+(PolyVector a, const PolyVector& b) { return a += b; }
  friend PolyVector operator-(PolyVector a, const PolyVector& b) { return a -= b; }
  PolyVector operator-() const {
    PolyVector r(degree_, nvars_);
    for (const auto& [f, c] : comps_) r.comps_.emplace(f, -c);
    return r;
  }
  friend PolyVector operator*(const Rational& s, PolyVector a) {
    if (s.is_zero()) return PolyVector(a.degree_, a.nvars_);
    for (auto& [f, c] : a.comps_) c *= s;
    return a;
  }
  PolyVector operator*(const Rational& s) const { return s * *this; }

  friend bool operator==(const PolyVector& a, const PolyVector& b) {
    if (a.nvars_ != b.nvars_) return false;
    if (a.is_zero() && b.is_zero()) return true;
    return a.degree_ == b.degree_ && a.comps_ == b.comps_;
  }
  friend bool operator!=(const PolyVector& a, const PolyVector& b) { return !(a == b); }

 private:
  void require_compatible(const PolyVector& o, const std::string& loc) const {
    if (nvars_ != o.nvars_) fail("E_NVARS_MISMATCH", "nvars differ", loc);
    if (degree_ != o.degree_) fail("E_DEGREE_MISMATCH", "degrees differ", loc);
  }

  int degree_;
  int nvars_;
  CompMap comps_;
};

inline PolyVector wedge(const PolyVector& a, const PolyVector& b) {
  if (a.nvars() != b.nvars()) fail("E_NVARS_MISMATCH", "nvars differ", "wedge");
  PolyVector r(a.degree() + b.degree(), a.nvars());
  for (const auto& [fa, ca] : a.components())
    for (const auto& [fb, cb] : b.components()) {
      PolyVector::Frame merged = fa;
      merged.insert(merged.end(), fb.begin(), fb.end());
      r.add_component(std::move(merged), ca * cb);
    }
  return r;
}

namespace detail {

// Right derivative with respect to the odd coordinate theta_i: drops i from
// each frame containing it, with sign (-1)^{#(frame entries > i)}.
inline PolyVector odd_right_derivative(const PolyVector& a, int i) {
  PolyVector r(a.degree() - 1, a.nvars());
  for (const auto& [f, c] : a.components()) {
    PolyVector::Frame rest;
    int above = 0;
    bool found = false;
    for (int s : f) {
      if (s == i) {
        found = true;
      } else {
        if (s > i) ++above;
        rest.push_back(s);
      }
    }
    if (!found) continue;
    Poly coeff = (above % 2 == 0) ? c : -c;
    r.add_component(std::move(rest), std::move(coeff));
  }
  return r;
}

inline PolyVector coeff_partial(const PolyVector& a, int i) {
  PolyVector r(a.degree(), a.nvars());
  for (const auto& [f, c] : a.components()) r.add_component(f, c.partial(i));
  return r;
}

inline PolyVector odd_dot(const PolyVector& a, const PolyVector& b) {
  PolyVector r(a.degree() + b.degree() - 1, a.nvars());
  if (a.degree() == 0) return r;  // no odd coordinates to strip
  for (int i = 0; i < a.nvars(); ++i)
    r += wedge(odd_right_derivative(a, i), coeff_partial(b, i));
  return r;
}

}  // namespace detail

// Schouten bracket via odd-coordinate calculus. Normalization is pinned by
// [xi, f] = xi(f) and [xi, eta] = Lie bracket for vector fields.
inline PolyVector schouten_bracket(const PolyVector& a, const PolyVector& b) {
  if (a.nvars() != b.nvars()) fail("E_NVARS_MISMATCH", "nvars differ", "schouten_bracket");
  if (a.degree() + b.degree() == 0)
    return PolyVector(0, a.nvars());  // two functions commute
  PolyVector r = detail::odd_dot(a, b);
  PolyVector s = detail::odd_dot(b, a);
  int sign = ((a.degree() - 1) * (b.degree() - 1)) % 2 == 0 ? 1 : -1;
  return sign > 0 ? r - s : r + s;
}

// Pairing with a tuple of functions: sum over frames of coeff * det[d_{s_r} f_c].
inline Poly apply_polyvector(const PolyVector& a, const std::vector<Poly>& fs) {
  if (static_cast<int>(fs.size()) != a.degree())
    fail("E_BAD_ARG", "argument count != degree", "apply_polyvector");
  Poly out(a.nvars());
  for (const auto& [frame, coeff] : a.components()) {
    // Leibniz expansion of det via permutations; degree is small here.
    std::vector<int> perm(frame.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    Poly det(a.nvars());
    do {
      int sign = 1;
      for (std::size_t x = 0; x < perm.size(); ++x)
        for (std::size_t y = x + 1; y < perm.size(); ++y)
          if (perm[x] > perm[y]) sign = -sign;
      Poly prod = Poly::constant(a.nvars(), Rational(sign));
      for (std::size_t r = 0; r < frame.size(); ++r)
        prod = prod * fs[perm[r]].partial(frame[r]);
      det += prod;
    } while (std::next_permutation(perm.begin(), perm.end()));
    out += coeff * det;
  }
  return out;
}

// {f,g} = sum_{i<j} alpha^{ij} (d_i f d_j g - d_j f d_i g).
inline Poly poisson_bracket(const PolyVector& alpha, const Poly& f, const Poly& g) {
  if (alpha.degree() != 2) fail("E_DEGREE_MISMATCH", "bivector required", "poisson_bracket");
  if (f.nvars() != alpha.nvars() || g.nvars() != alpha.nvars())
    fail("E_NVARS_MISMATCH", "nvars differ", "poisson_bracket");
  Poly out(alpha.nvars());
  for (const auto& [frame, c] : alpha.components()) {
    int i = frame[0], j = frame[1];
    out += c * (f.partial(i) * g.partial(j) - f.partial(j) * g.partial(i));
  }
  return out;
}

struct PoissonCheckResult {
  bool ok;
  PolyVector defect;  // [alpha, alpha], zero iff ok
};

inline PoissonCheckResult poisson_check(const PolyVector& alpha) {
  if (alpha.degree() != 2) fail("E_DEGREE_MISMATCH", "bivector required", "poisson_check");
  PolyVector defect = schouten_bracket(alpha, alpha);
  return {defect.is_zero(), defect};
}

using PolyVectorSeries = HbarSeries<PolyVector>;

inline PolyVectorSeries polyvector_series_zero(int degree, int nvars, unsigned order) {
  return PolyVectorSeries::zero(PolyVector(degree, nvars), order);
}

inline PolyVectorSeries schouten_series(const PolyVectorSeries& a, const PolyVectorSeries& b) {
  int degree = std::max(0, a[0].degree() + b[0].degree() - 1);
  return cauchy(a, b, PolyVector(degree, a[0].nvars()),
                [](const PolyVector& x, const PolyVector& y) { return schouten_bracket(x, y); });
}

// Formal Poisson structure: plus-series of bivectors with [omega, omega] = 0
// through the truncation order.
struct FormalPoissonCheckResult {
  bool ok;
  PolyVectorSeries defect;
};

inline FormalPoissonCheckResult formal_poisson_check(const PolyVectorSeries& omega) {
  if (omega[0].degree() != 2)
    fail("E_DEGREE_MISMATCH", "bivector series required", "formal_poisson_check");
  if (!omega.is_plus())
    fail("E_NOT_PLUS", "formal Poisson series must vanish at hbar^0", "formal_poisson_check");
  PolyVectorSeries defect = schouten_series(omega, omega);
  return {defect.is_zero(), defect};
}

// exp(ad_gamma) applied to a polyvector series. gamma must be a plus-series of
// vector fields, so each ad application raises the minimum hbar order and the
// exponential terminates within the truncation window.
inline PolyVectorSeries gauge_act_formal_poisson(const PolyVectorSeries& gamma,
                                                 const PolyVectorSeries& omega) {
  if (gamma[0].degree() != 1)
    fail("E_DEGREE_MISMATCH", "vector-field series required", "gauge_act_formal_poisson");
  if (!gamma.is_plus())
    fail("E_NOT_PLUS", "gauge series must vanish at hbar^0", "gauge_act_formal_poisson");
  gamma.require_same_order(omega, "gauge_act_formal_poisson");
  PolyVectorSeries acc = omega;
  PolyVectorSeries term = omega;
  Rational factorial(1);
  for (unsigned m = 1; m <= omega.order() && !term.is_zero(); ++m) {
    term = schouten_series(gamma, term);
    factorial *= Rational(static_cast<long>(m));
    acc += factorial.inv() * term;
  }
  return acc;
}

}  // namespace starforge
