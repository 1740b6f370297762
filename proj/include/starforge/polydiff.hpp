#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <vector>

#include "starforge/error.hpp"
#include "starforge/hbar_series.hpp"
#include "starforge/poly.hpp"
#include "starforge/polyvector.hpp"

namespace starforge {

// Tuple of derivative multi-indices, one per operator argument.
using Derivs = std::vector<Exps>;

struct DerivsLess {
  bool operator()(const Derivs& a, const Derivs& b) const {
    GradedLexLess less;
    for (std::size_t k = 0; k < a.size() && k < b.size(); ++k) {
      if (less(a[k], b[k])) return true;
      if (less(b[k], a[k])) return false;
    }
    return a.size() < b.size();
  }
};

// Polydifferential operator with polynomial coefficients. An operator of
// degree d takes d+1 function arguments; degree -1 elements are functions
// themselves (no arguments). Terms map a derivative tuple to its coefficient.
class PolyDiffOp {
 public:
  using TermMap = std::map<Derivs, Poly, DerivsLess>;

  PolyDiffOp() : degree_(-1), nvars_(0) {}
  PolyDiffOp(int degree, int nvars) : degree_(degree), nvars_(nvars) {
    if (degree < -1 || nvars < 0) fail("E_BAD_ARG", "degree below -1 or negative nvars", "PolyDiffOp");
  }

  // A function viewed as an arity-0 element of the operator complex.
  static PolyDiffOp from_function(const Poly& f) {
    PolyDiffOp op(-1, f.nvars());
    op.add_term({}, f);
    return op;
  }

  // The commutative product mu(f, g) = f g.
  static PolyDiffOp multiplication(int nvars) {
    PolyDiffOp op(1, nvars);
    op.add_term({Exps(nvars, 0), Exps(nvars, 0)}, Poly::constant(nvars, Rational(1)));
    return op;
  }

  int degree() const { return degree_; }
  int arity() const { return degree_ + 1; }
  int nvars() const { return nvars_; }
  bool is_zero() const { return terms_.empty(); }
  const TermMap& terms() const { return terms_; }

  void add_term(Derivs derivs, const Poly& coeff) {
    if (static_cast<int>(derivs.size()) != arity())
      fail("E_BAD_ARG", "derivative tuple length != arity", "PolyDiffOp.add_term");
    for (const Exps& d : derivs) {
      if (static_cast<int>(d.size()) != nvars_)
        fail("E_BAD_ARG", "multi-index length != nvars", "PolyDiffOp.add_term");
      for (int x : d)
        if (x < 0) fail("E_BAD_ARG", "negative derivative order", "PolyDiffOp.add_term");
    }
    if (coeff.nvars() != nvars_)
      fail("E_NVARS_MISMATCH", "coefficient nvars != operator nvars", "PolyDiffOp.add_term");
    if (coeff.is_zero()) return;
    auto [it, fresh] = terms_.emplace(std::move(derivs), coeff);
    if (!fresh) {
      it->second += coeff;
      if (it->second.is_zero()) terms_.erase(it);
    }
    check_term_limit(terms_.size(), "PolyDiffOp");
  }

  // Zero operators are degree-polymorphic, mirroring PolyVector.
  PolyDiffOp& operator+=(const PolyDiffOp& o) {
    if (o.is_zero()) return *this;
    if (is_zero()) degree_ = o.degree_;
    require_compatible(o, "PolyDiffOp.add");
    for (const auto& [d, c] : o.terms_) add_term(d, c);
    return *this;
  }
  PolyDiffOp& operator-=(const PolyDiffOp& o) {
    if (o.is_zero()) return *this;
    if (is_zero()) degree_ = o.degree_;
    require_compatible(o, "PolyDiffOp.sub");
    for (const auto& [d, c] : o.terms_) add_term(d, -c);
    return *this;
  }
  friend PolyDiffOp operator+(PolyDiffOp a, const PolyDiffOp& b) { return a += b; }
  friend PolyDiffOp operator-(PolyDiffOp a, const PolyDiffOp& b) { return a -= b; }
  PolyDiffOp operator-() const {
    PolyDiffOp r(degree_, nvars_);
    for (const auto& [d, c] : terms_) r.terms_.emplace(d, -c);
    return r;
  }
  friend PolyDiffOp operator*(const Rational& s, PolyDiffOp a) {
    if (s.is_zero()) return PolyDiffOp(a.degree_, a.nvars_);
    for (auto& [d, c] : a.terms_) c *= s;
    return a;
  }
  PolyDiffOp operator*(const Rational& s) const { return s * *this; }

  friend bool operator==(const PolyDiffOp& a, const PolyDiffOp& b) {
    if (a.nvars_ != b.nvars_) return false;
    if (a.is_zero() && b.is_zero()) return true;
    return a.degree_ == b.degree_ && a.terms_ == b.terms_;
  }
  friend bool operator!=(const PolyDiffOp& a, const PolyDiffOp& b) { return !(a == b); }

 private:
  void require_compatible(const PolyDiffOp& o, const std::string& loc) const {
    if (nvars_ != o.nvars_) fail("E_NVARS_MISMATCH", "nvars differ", loc);
    if (degree_ != o.degree_) fail("E_DEGREE_MISMATCH", "degrees differ", loc);
  }

  int degree_;
  int nvars_;
  TermMap terms_;
};

inline Poly apply_op(const PolyDiffOp& op, const std::vector<Poly>& args) {
  if (static_cast<int>(args.size()) != op.arity())
    fail("E_BAD_ARG", "argument count != arity", "apply_op");
  Poly out(op.nvars());
  for (const auto& [derivs, coeff] : op.terms()) {
    Poly prod = coeff;
    for (std::size_t k = 0; k < derivs.size(); ++k) {
      if (prod.is_zero()) break;
      prod = prod * args[k].derive(derivs[k]);
    }
    out += prod;
  }
  return out;
}

namespace detail {

// All ways to split a multi-index into `parts` componentwise pieces, with the
// multinomial multiplicity of each split.
inline void enumerate_splits(const Exps& d, int parts,
                             std::vector<std::pair<std::vector<Exps>, Rational>>& out) {
  int n = static_cast<int>(d.size());
  std::vector<Exps> current(parts, Exps(n, 0));
  Rational mult(1);
  // recurse over variables, distributing d[v] among the parts
  std::function<void(int, Rational)> rec = [&](int v, Rational acc) {
    if (v == n) {
      out.emplace_back(current, acc);
      return;
    }
    // compositions of d[v] into `parts` nonnegative integers
    std::vector<int> comp(parts, 0);
    std::function<void(int, int)> comp_rec = [&](int idx, int remaining) {
      if (idx == parts - 1) {
        comp[idx] = remaining;
        Rational m = Rational::factorial(d[v]);
        for (int p = 0; p < parts; ++p) {
          m /= Rational::factorial(comp[p]);
          current[p][v] = comp[p];
        }
        rec(v + 1, acc * m);
        return;
      }
      for (int take = 0; take <= remaining; ++take) {
        comp[idx] = take;
        comp_rec(idx + 1, remaining - take);
      }
    };
    if (parts == 0) {
      if (d[v] != 0) return;  // nothing can absorb the derivative
      rec(v + 1, acc);
      return;
    }
    comp_rec(0, d[v]);
  };
  rec(0, mult);
}

}  // namespace detail

// Insertion D o_i E: compose E into the i-th argument slot of D. The slot's
// multi-index distributes over E's coefficient and each of E's argument
// factors by the Leibniz rule with componentwise multinomial multiplicities.
inline PolyDiffOp compose_at(const PolyDiffOp& d_op, int slot, const PolyDiffOp& e_op) {
  if (d_op.nvars() != e_op.nvars()) fail("E_NVARS_MISMATCH", "nvars differ", "compose_at");
  if (slot < 0 || slot >= d_op.arity()) fail("E_BAD_ARG", "slot out of range", "compose_at");
  int nv = d_op.nvars();
  int q_arity = e_op.arity();
  PolyDiffOp r(d_op.degree() + e_op.degree(), nv);
  for (const auto& [dd, dc] : d_op.terms()) {
    std::vector<std::pair<std::vector<Exps>, Rational>> splits;
    splits.clear();
    detail::enumerate_splits(dd[slot], q_arity + 1, splits);
    for (const auto& [ed, ec] : e_op.terms()) {
      for (const auto& [parts, mult] : splits) {
        // parts[0] differentiates E's coefficient, parts[1..] its arguments
        Poly coeff = dc * ec.derive(parts[0]) * mult;
        if (coeff.is_zero()) continue;
        Derivs out;
        out.reserve(d_op.arity() + q_arity - 1);
        for (int k = 0; k < slot; ++k) out.push_back(dd[k]);
        for (int j = 0; j < q_arity; ++j) {
          Exps m = ed[j];
          for (int v = 0; v < nv; ++v) m[v] += parts[j + 1][v];
          out.push_back(std::move(m));
        }
        for (int k = slot + 1; k < d_op.arity(); ++k) out.push_back(dd[k]);
        r.add_term(std::move(out), coeff);
      }
    }
  }
  return r;
}

namespace detail {
inline int parity_sign(long e) { return (e % 2 + 2) % 2 == 0 ? 1 : -1; }
}  // namespace detail

// Brace-style total composition with right-indexed signs:
//   D obar E = sum_i (-1)^{deg E * (deg D - i)} D o_i E.
inline PolyDiffOp obar(const PolyDiffOp& d_op, const PolyDiffOp& e_op) {
  PolyDiffOp r(std::max(-1, d_op.degree() + e_op.degree()), d_op.nvars());
  for (int i = 0; i <= d_op.degree(); ++i) {
    long e = static_cast<long>(e_op.degree()) * (d_op.degree() - i);
    r += Rational(detail::parity_sign(e)) * compose_at(d_op, i, e_op);
  }
  return r;
}

inline PolyDiffOp gerstenhaber_bracket(const PolyDiffOp& a, const PolyDiffOp& b) {
  PolyDiffOp r = obar(a, b);
  long e = static_cast<long>(a.degree()) * b.degree();
  PolyDiffOp s = obar(b, a);
  return detail::parity_sign(e) > 0 ? r - s : r + s;
}

inline PolyDiffOp hochschild_d(const PolyDiffOp& d_op) {
  return gerstenhaber_bracket(PolyDiffOp::multiplication(d_op.nvars()), d_op);
}

// Every term differentiates every argument: the operators that kill constants
// in each slot separately.
inline bool is_normalized(const PolyDiffOp& op) {
  for (const auto& [derivs, coeff] : op.terms())
    for (const Exps& d : derivs)
      if (total_degree(d) == 0) return false;
  return true;
}

// Antisymmetrization embedding of polyvectors into the operator complex:
// a degree-d polyvector becomes the d-argument operator
//   (1/d!) sum_{sigma} sgn(sigma) prod_k d_{s_sigma(k)}.
// Functions (d = 0) map to themselves.
inline PolyDiffOp hkr_u1(const PolyVector& a) {
  int d = a.degree();
  int nv = a.nvars();
  PolyDiffOp r(d - 1, nv);
  Rational norm = Rational::factorial(static_cast<unsigned>(d)).inv();
  for (const auto& [frame, coeff] : a.components()) {
    std::vector<int> perm(frame.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    do {
      int sign = 1;
      for (std::size_t x = 0; x < perm.size(); ++x)
        for (std::size_t y = x + 1; y < perm.size(); ++y)
          if (perm[x] > perm[y]) sign = -sign;
      Derivs derivs(d, Exps(nv, 0));
      for (int k = 0; k < d; ++k) derivs[k][frame[perm[k]]] += 1;
      r.add_term(std::move(derivs), Rational(sign) * norm * coeff);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return r;
}

using PolyDiffOpSeries = HbarSeries<PolyDiffOp>;

inline PolyDiffOpSeries op_series_zero(int degree, int nvars, unsigned order) {
  return PolyDiffOpSeries::zero(PolyDiffOp(degree, nvars), order);
}

inline PolyDiffOpSeries gerstenhaber_series(const PolyDiffOpSeries& a, const PolyDiffOpSeries& b) {
  return cauchy(a, b, PolyDiffOp(std::max(-1, a[0].degree() + b[0].degree()), a[0].nvars()),
                [](const PolyDiffOp& x, const PolyDiffOp& y) { return gerstenhaber_bracket(x, y); });
}

inline PolyDiffOpSeries hochschild_d_series(const PolyDiffOpSeries& a) {
  PolyDiffOpSeries r = op_series_zero(a[0].degree() + 1, a[0].nvars(), a.order());
  for (unsigned k = 0; k <= a.order(); ++k) r[k] = hochschild_d(a[k]);
  return r;
}

}  // namespace starforge
