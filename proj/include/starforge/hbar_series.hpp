#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "starforge/error.hpp"
#include "starforge/poly.hpp"

namespace starforge {

// Shared truncation context: every formal-series operation happens at a fixed
// hbar order N, optionally with a hard cap on polynomial total degree.
// Exceeding the cap is an error, never a silent truncation.
struct Context {
  unsigned order = 0;
  std::optional<int> degree_cap;
};

inline void check_degree_cap(const Poly& p, const Context& ctx, const std::string& loc) {
  if (ctx.degree_cap && p.degree() > *ctx.degree_cap)
    fail("E_DEGREE_CAP",
         "polynomial degree " + std::to_string(p.degree()) + " exceeds cap " +
             std::to_string(*ctx.degree_cap),
         loc);
}

// Truncated power series in hbar with payload coefficients. coeffs[k] is the
// hbar^k coefficient; the length is always order+1.
template <class T>
class HbarSeries {
 public:
  HbarSeries() = default;
  HbarSeries(std::vector<T> coeffs) : c_(std::move(coeffs)) {
    if (c_.empty()) fail("E_BAD_ARG", "series needs at least the hbar^0 slot", "HbarSeries");
  }
  static HbarSeries zero(const T& zero_elt, unsigned order) {
    return HbarSeries(std::vector<T>(order + 1, zero_elt));
  }

  unsigned order() const { return static_cast<unsigned>(c_.size()) - 1; }
  const T& operator[](unsigned k) const { return c_.at(k); }
  T& operator[](unsigned k) { return c_.at(k); }
  const std::vector<T>& coeffs() const { return c_; }

  bool is_zero() const {
    for (const T& x : c_)
      if (!x.is_zero()) return false;
    return true;
  }

  // hbar^0 slot vanishes: the shape of deformation tails and gauge logs.
  bool is_plus() const { return c_.front().is_zero(); }

  HbarSeries& operator+=(const HbarSeries& o) {
    require_same_order(o, "HbarSeries.add");
    for (std::size_t k = 0; k < c_.size(); ++k) c_[k] += o.c_[k];
    return *this;
  }
  HbarSeries& operator-=(const HbarSeries& o) {
    require_same_order(o, "HbarSeries.sub");
    for (std::size_t k = 0; k < c_.size(); ++k) c_[k] -= o.c_[k];
    return *this;
  }
  friend HbarSeries operator+(HbarSeries a, const HbarSeries& b) { return a += b; }
  friend HbarSeries operator-(HbarSeries a, const HbarSeries& b) { return a -= b; }
  HbarSeries operator-() const {
    HbarSeries r = *this;
    for (T& x : r.c_) x = -x;
    return r;
  }
  friend HbarSeries operator*(const Rational& s, HbarSeries a) {
    for (T& x : a.c_) x = x * s;
    return a;
  }

  // Multiply by hbar^k, dropping coefficients pushed past the truncation order.
  HbarSeries shifted(unsigned k, const T& zero_elt) const {
    HbarSeries r = zero(zero_elt, order());
    for (std::size_t j = 0; j + k < c_.size(); ++j) r.c_[j + k] = c_[j];
    return r;
  }

  friend bool operator==(const HbarSeries& a, const HbarSeries& b) { return a.c_ == b.c_; }
  friend bool operator!=(const HbarSeries& a, const HbarSeries& b) { return !(a == b); }

  void require_same_order(const HbarSeries& o, const std::string& loc) const {
    if (c_.size() != o.c_.size()) fail("E_ORDER_MISMATCH", "series orders differ", loc);
  }

 private:
  std::vector<T> c_;
};

// Cauchy product truncated at the common order, with a caller-supplied
// bilinear combiner (polynomial product, operator composition, ...).
template <class T, class U, class V, class F>
HbarSeries<V> cauchy(const HbarSeries<T>& a, const HbarSeries<U>& b, const V& zero_elt, F&& bilinear) {
  if (a.order() != b.order()) fail("E_ORDER_MISMATCH", "series orders differ", "cauchy");
  HbarSeries<V> r = HbarSeries<V>::zero(zero_elt, a.order());
  for (unsigned i = 0; i <= a.order(); ++i)
    for (unsigned j = 0; i + j <= a.order(); ++j) r[i + j] += bilinear(a[i], b[j]);
  return r;
}

using PolySeries = HbarSeries<Poly>;

inline PolySeries poly_series_zero(int nvars, unsigned order) {
  return PolySeries::zero(Poly(nvars), order);
}

inline PolySeries poly_series_constant(const Poly& p, unsigned order) {
  PolySeries r = poly_series_zero(p.nvars(), order);
  r[0] = p;
  return r;
}

enum class CombineOp { Add, Sub, Mul };

// Series arithmetic under a context: orders must match the context order and
// every resulting coefficient must respect the degree cap.
inline PolySeries hbar_combine(const PolySeries& a, const PolySeries& b, CombineOp op,
                               const Context& ctx) {
  if (a.order() != ctx.order || b.order() != ctx.order)
    fail("E_ORDER_MISMATCH", "series order differs from context order", "hbar_combine");
  for (unsigned k = 0; k <= ctx.order; ++k) {
    check_degree_cap(a[k], ctx, "hbar_combine");
    check_degree_cap(b[k], ctx, "hbar_combine");
  }
  PolySeries r = [&] {
    switch (op) {
      case CombineOp::Add: return a + b;
      case CombineOp::Sub: return a - b;
      case CombineOp::Mul:
        return cauchy(a, b, Poly(a[0].nvars()), [](const Poly& x, const Poly& y) { return x * y; });
    }
    fail("E_BAD_ARG", "unknown combine op", "hbar_combine");
  }();
  for (unsigned k = 0; k <= ctx.order; ++k) check_degree_cap(r[k], ctx, "hbar_combine");
  return r;
}

}  // namespace starforge
