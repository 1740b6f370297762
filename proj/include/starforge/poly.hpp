#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "starforge/error.hpp"
#include "starforge/rational.hpp"

namespace starforge {

// Exponent vector of a monomial; length always equals the owning poly's nvars.
using Exps = std::vector<int>;

inline int total_degree(const Exps& e) { return std::accumulate(e.begin(), e.end(), 0); }

// Canonical term order: ascending total degree, ties broken lexicographically
// by exponent vector. Map iteration order is therefore the serialization order.
struct GradedLexLess {
  bool operator()(const Exps& a, const Exps& b) const {
    int da = total_degree(a), db = total_degree(b);
    if (da != db) return da < db;
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  }
};

// Multivariate polynomial over Q. Invariants: every stored coefficient is
// nonzero, every exponent vector has length nvars() and nonnegative entries.
class Poly {
 public:
  using TermMap = std::map<Exps, Rational, GradedLexLess>;

  Poly() : nvars_(0) {}
  explicit Poly(int nvars) : nvars_(nvars) {
    if (nvars < 0) fail("E_BAD_ARG", "negative nvars", "Poly");
  }

  static Poly constant(int nvars, const Rational& c) {
    Poly p(nvars);
    p.add_term(Exps(nvars, 0), c);
    return p;
  }

  static Poly variable(int i, int nvars) {
    if (i < 0 || i >= nvars) fail("E_BAD_ARG", "variable index out of range", "Poly.variable");
    Poly p(nvars);
    Exps e(nvars, 0);
    e[i] = 1;
    p.add_term(e, Rational(1));
    return p;
  }

  static Poly monomial(Exps e, const Rational& c, int nvars) {
    if (static_cast<int>(e.size()) != nvars)
      fail("E_BAD_ARG", "exponent length != nvars", "Poly.monomial");
    Poly p(nvars);
    p.add_term(std::move(e), c);
    return p;
  }

  int nvars() const { return nvars_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t term_count() const { return terms_.size(); }
  const TermMap& terms() const { return terms_; }

  int degree() const {  // max total degree; -1 for the zero poly
    if (terms_.empty()) return -1;
    return total_degree(std::prev(terms_.end())->first);
  }

  Rational coeff(const Exps& e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? Rational(0) : it->second;
  }

  Rational constant_term() const { return coeff(Exps(nvars_, 0)); }

  void add_term(Exps e, const Rational& c) {
    if (static_cast<int>(e.size()) != nvars_)
      fail("E_BAD_ARG", "exponent length != nvars", "Poly.add_term");
    for (int x : e)
      if (x < 0) fail("E_BAD_ARG", "negative exponent", "Poly.add_term");
    if (c.is_zero()) return;
    auto [it, fresh] = terms_.emplace(std::move(e), c);
    if (!fresh) {
      it->second += c;
      if (it->second.is_zero()) terms_.erase(it);
    }
    check_term_limit(terms_.size(), "Poly");
  }

  Poly& operator+=(const Poly& o) {
    require_same_vars(o, "Poly.add");
    for (const auto& [e, c] : o.terms_) add_term(e, c);
    return *this;
  }
  Poly& operator-=(const Poly& o) {
    require_same_vars(o, "Poly.sub");
    for (const auto& [e, c] : o.terms_) add_term(e, -c);
    return *this;
  }
  friend Poly operator+(Poly a, const Poly& b) { return a += b; }
  friend Poly operator-(Poly a, const Poly& b) { return a -= b; }
  Poly operator-() const {
    Poly r(nvars_);
    for (const auto& [e, c] : terms_) r.terms_.emplace(e, -c);
    return r;
  }

  Poly& operator*=(const Rational& s) {
    if (s.is_zero()) {
      terms_.clear();
      return *this;
    }
    for (auto& [e, c] : terms_) c *= s;
    return *this;
  }
  friend Poly operator*(Poly a, const Rational& s) { return a *= s; }
  friend Poly operator*(const Rational& s, Poly a) { return a *= s; }

  friend Poly operator*(const Poly& a, const Poly& b) {
    a.require_same_vars(b, "Poly.mul");
    Poly r(a.nvars_);
    for (const auto& [ea, ca] : a.terms_)
      for (const auto& [eb, cb] : b.terms_) {
        Exps e(a.nvars_);
        for (int i = 0; i < a.nvars_; ++i) e[i] = ea[i] + eb[i];
        r.add_term(std::move(e), ca * cb);
      }
    return r;
  }

  Poly pow(unsigned k) const {
    Poly r = constant(nvars_, Rational(1));
    for (unsigned i = 0; i < k; ++i) r = r * *this;
    return r;
  }

  // d/dt_i with the usual power rule; exponent 0 terms drop out.
  Poly partial(int i) const {
    if (i < 0 || i >= nvars_) fail("E_BAD_ARG", "variable index out of range", "Poly.partial");
    Poly r(nvars_);
    for (const auto& [e, c] : terms_) {
      if (e[i] == 0) continue;
      Exps d = e;
      d[i] -= 1;
      r.add_term(std::move(d), c * Rational(e[i]));
    }
    return r;
  }

  // Iterated partials by multi-index; d.size() == nvars().
  Poly derive(const Exps& d) const {
    if (static_cast<int>(d.size()) != nvars_)
      fail("E_BAD_ARG", "multi-index length != nvars", "Poly.derive");
    Poly r = *this;
    for (int i = 0; i < nvars_; ++i)
      for (int k = 0; k < d[i]; ++k) r = r.partial(i);
    return r;
  }

  // Reinterpret in a larger variable set; new variables get exponent 0.
  Poly padded(int new_nvars) const {
    if (new_nvars < nvars_) fail("E_BAD_ARG", "padded() cannot drop variables", "Poly.padded");
    Poly r(new_nvars);
    for (const auto& [e, c] : terms_) {
      Exps w(new_nvars, 0);
      std::copy(e.begin(), e.end(), w.begin());
      r.terms_.emplace(std::move(w), c);
    }
    return r;
  }

  // Replace t_i by q (q may have more variables). Result lives in
  // max(nvars, q.nvars) variables.
  Poly substituted(int i, const Poly& q) const {
    if (i < 0 || i >= nvars_) fail("E_BAD_ARG", "variable index out of range", "Poly.substituted");
    int nv = std::max(nvars_, q.nvars());
    Poly qp = q.padded(nv);
    // Bucket by the exponent of t_i, then assemble with iterated powers of q.
    std::map<int, Poly> buckets;
    for (const auto& [e, c] : terms_) {
      Exps w(nv, 0);
      std::copy(e.begin(), e.end(), w.begin());
      int k = w[i];
      w[i] = 0;
      auto [it, fresh] = buckets.emplace(k, Poly(nv));
      it->second.add_term(std::move(w), c);
    }
    Poly r(nv), qpow = constant(nv, Rational(1));
    int prev = 0;
    for (const auto& [k, part] : buckets) {
      for (int j = prev; j < k; ++j) qpow = qpow * qp;
      prev = k;
      r += part * qpow;
    }
    return r;
  }

  // Coefficient of t_i^k viewed as a poly in the remaining variables
  // (the t_i slot of the result is identically 0).
  Poly coeff_of_power(int i, int k) const {
    Poly r(nvars_);
    for (const auto& [e, c] : terms_) {
      if (e[i] != k) continue;
      Exps w = e;
      w[i] = 0;
      r.add_term(std::move(w), c);
    }
    return r;
  }

  int max_power(int i) const {
    int m = 0;
    for (const auto& [e, c] : terms_) m = std::max(m, e[i]);
    return m;
  }

  friend bool operator==(const Poly& a, const Poly& b) {
    return a.nvars_ == b.nvars_ && a.terms_ == b.terms_;
  }
  friend bool operator!=(const Poly& a, const Poly& b) { return !(a == b); }
  friend bool operator<(const Poly& a, const Poly& b) {  // arbitrary total order for containers
    if (a.nvars_ != b.nvars_) return a.nvars_ < b.nvars_;
    auto ia = a.terms_.begin(), ib = b.terms_.begin();
    GradedLexLess less;
    for (; ia != a.terms_.end() && ib != b.terms_.end(); ++ia, ++ib) {
      if (less(ia->first, ib->first)) return true;
      if (less(ib->first, ia->first)) return false;
      if (ia->second != ib->second) return ia->second < ib->second;
    }
    return ia == a.terms_.end() && ib != b.terms_.end();
  }

  std::string str() const {
    if (terms_.empty()) return "0";
    std::string out;
    bool first = true;
    for (const auto& [e, c] : terms_) {
      if (!first) out += " + ";
      first = false;
      out += c.str();
      for (int i = 0; i < nvars_; ++i) {
        if (e[i] == 0) continue;
        out += "*t" + std::to_string(i + 1);
        if (e[i] > 1) out += "^" + std::to_string(e[i]);
      }
    }
    return out;
  }

 private:
  void require_same_vars(const Poly& o, const std::string& loc) const {
    if (nvars_ != o.nvars_) fail("E_NVARS_MISMATCH", "operand nvars differ", loc);
  }

  int nvars_;
  TermMap terms_;
};

// Full expansion around a shifted copy of the variables: coefficient a_m at
// multi-index m equals (1/m!) d^m f, so f(s + u) = sum_m a_m(s) u^m with
// finitely many nonzero entries.
struct TaylorExpansion {
  int nvars = 0;
  std::map<Exps, Poly, GradedLexLess> coeffs;
};

inline TaylorExpansion taylor_shift(const Poly& f) {
  int nv = f.nvars();
  TaylorExpansion out;
  out.nvars = nv;
  for (const auto& [e, c] : f.terms()) {
    // t^e pushed through the shift: sum over componentwise m <= e of
    // binom(e, m) s^{e-m} u^m, walked with an odometer
    Exps m(nv, 0);
    for (;;) {
      Rational w = c;
      Exps rest(nv);
      for (int v = 0; v < nv; ++v) {
        w *= Rational::binomial(static_cast<unsigned>(e[v]), static_cast<unsigned>(m[v]));
        rest[v] = e[v] - m[v];
      }
      auto it = out.coeffs.emplace(m, Poly(nv)).first;
      it->second.add_term(std::move(rest), w);
      int v = 0;
      while (v < nv && m[v] == e[v]) m[v++] = 0;
      if (v == nv) break;
      ++m[v];
    }
  }
  for (auto it = out.coeffs.begin(); it != out.coeffs.end();)
    it = it->second.is_zero() ? out.coeffs.erase(it) : std::next(it);
  return out;
}

// Taylor shift: substitute t_i -> t_i + s where s is a fresh variable appended
// at index nvars. The k-th coefficient in t_i of the result is the k-th Taylor
// coefficient of p at t_i = s.
inline Poly taylor_shift(const Poly& p, int i) {
  if (i < 0 || i >= p.nvars()) fail("E_BAD_ARG", "variable index out of range", "taylor_shift");
  int nv = p.nvars() + 1;
  Poly shifted = Poly::variable(i, nv) + Poly::variable(nv - 1, nv);
  return p.padded(nv).substituted(i, shifted);
}

}  // namespace starforge
