#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <string>

#include "starforge/error.hpp"

namespace starforge {

// Exact rational scalar. Thin wrapper over GMP's mpq_class so the rest of the
// library never touches GMP types directly and canonicalization is guaranteed.
class Rational {
 public:
  Rational() : v_(0) {}
  Rational(long n) : v_(n) {}  // NOLINT: implicit by design
  Rational(long n, long d) : v_(n, d) {
    if (d == 0) fail("E_DIV_ZERO", "rational with zero denominator", "Rational");
    v_.canonicalize();
  }
  explicit Rational(const mpq_class& v) : v_(v) { v_.canonicalize(); }

  // Accepts "p" or "p/q" with optional leading '-'. Anything else is rejected.
  static Rational parse(const std::string& s, const std::string& location = "Rational.parse") {
    if (s.empty()) fail("E_PARSE", "empty rational literal", location);
    std::size_t slash = s.find('/');
    std::string num = s.substr(0, slash == std::string::npos ? s.size() : slash);
    std::string den = slash == std::string::npos ? "1" : s.substr(slash + 1);
    auto digits_ok = [](const std::string& t, bool sign_ok) {
      if (t.empty()) return false;
      std::size_t i = (sign_ok && (t[0] == '-' || t[0] == '+')) ? 1 : 0;
      if (i == t.size()) return false;
      for (; i < t.size(); ++i)
        if (t[i] < '0' || t[i] > '9') return false;
      return true;
    };
    if (!digits_ok(num, true) || !digits_ok(den, false))
      fail("E_PARSE", "malformed rational literal '" + s + "'", location);
    mpq_class q(num + "/" + den);
    if (q.get_den() == 0) fail("E_DIV_ZERO", "zero denominator in '" + s + "'", location);
    q.canonicalize();
    return Rational(q);
  }

  bool is_zero() const { return v_ == 0; }
  int sign() const { return sgn(v_); }

  Rational operator-() const { return Rational(mpq_class(-v_)); }
  Rational& operator+=(const Rational& o) { v_ += o.v_; return *this; }
  Rational& operator-=(const Rational& o) { v_ -= o.v_; return *this; }
  Rational& operator*=(const Rational& o) { v_ *= o.v_; return *this; }
  Rational& operator/=(const Rational& o) {
    if (o.is_zero()) fail("E_DIV_ZERO", "division by zero", "Rational");
    v_ /= o.v_;
    return *this;
  }

  friend Rational operator+(Rational a, const Rational& b) { return a += b; }
  friend Rational operator-(Rational a, const Rational& b) { return a -= b; }
  friend Rational operator*(Rational a, const Rational& b) { return a *= b; }
  friend Rational operator/(Rational a, const Rational& b) { return a /= b; }
  friend bool operator==(const Rational& a, const Rational& b) { return a.v_ == b.v_; }
  friend bool operator!=(const Rational& a, const Rational& b) { return a.v_ != b.v_; }
  friend bool operator<(const Rational& a, const Rational& b) { return a.v_ < b.v_; }

  Rational inv() const {
    if (is_zero()) fail("E_DIV_ZERO", "inverse of zero", "Rational");
    return Rational(mpq_class(1) / v_);
  }

  // "p" when the denominator is 1, otherwise "p/q"; q > 0 always.
  std::string str() const {
    if (v_.get_den() == 1) return v_.get_num().get_str();
    return v_.get_num().get_str() + "/" + v_.get_den().get_str();
  }

  // n! as an exact rational, for series and antisymmetrization factors.
  static Rational factorial(unsigned n) {
    mpz_class f;
    mpz_fac_ui(f.get_mpz_t(), n);
    return Rational(mpq_class(f));
  }

  static Rational binomial(unsigned n, unsigned k) {
    if (k > n) return Rational(0);
    mpz_class b;
    mpz_bin_uiui(b.get_mpz_t(), n, k);
    return Rational(mpq_class(b));
  }

 private:
  mpq_class v_;
};

}  // namespace starforge
