#include <catch2/catch_amalgamated.hpp>

#include "starforge/hbar_series.hpp"
#include "starforge/poly.hpp"
#include "starforge/rational.hpp"
#include "test_support.hpp"

using namespace starforge;
using starforge::testing::Rng;

namespace {
Poly t(int i, int nvars) { return Poly::variable(i, nvars); }
}  // namespace

TEST_CASE("rational parsing and arithmetic") {
  CHECK(Rational::parse("3/6").str() == "1/2");
  CHECK(Rational::parse("-4/2").str() == "-2");
  CHECK(Rational::parse("7").str() == "7");
  CHECK((Rational(1, 3) + Rational(1, 6)).str() == "1/2");
  CHECK((Rational(2, 3) * Rational(3, 2)).str() == "1");
  CHECK_THROWS_AS(Rational::parse("1/0"), Error);
  CHECK_THROWS_AS(Rational::parse("a/3"), Error);
  CHECK_THROWS_AS(Rational::parse("1.5"), Error);
  CHECK_THROWS_AS(Rational(1) / Rational(0), Error);
  CHECK(Rational::factorial(5).str() == "120");
  CHECK(Rational::binomial(7, 3).str() == "35");
}

TEST_CASE("polynomial ring basics") {
  Poly t1 = t(0, 2), t2 = t(1, 2);

  SECTION("difference of squares") {
    CHECK((t1 - t2) * (t1 + t2) == t1 * t1 - t2 * t2);
  }
  SECTION("additive identity and cancellation") {
    Poly p = t1 * t1 + Rational(3) * t2;
    CHECK(p + Poly(2) == p);
    CHECK((p - p).is_zero());
  }
  SECTION("rational coefficient cancellation") {
    CHECK(Rational(3, 2) * (Rational(2, 3) * t1) == t1);
  }
  SECTION("nvars mismatch is an error") {
    CHECK_THROWS_AS(t(0, 2) + t(0, 3), Error);
  }
}

TEST_CASE("canonical term order is graded lex") {
  Poly t1 = t(0, 2), t2 = t(1, 2);
  Poly p = t1 * t1 + t1 * t2 + t2 * t2 + t1 + t2 + Poly::constant(2, Rational(1));
  std::vector<Exps> seen;
  for (const auto& [e, c] : p.terms()) seen.push_back(e);
  std::vector<Exps> want = {{0, 0}, {0, 1}, {1, 0}, {0, 2}, {1, 1}, {2, 0}};
  CHECK(seen == want);
  CHECK(p.degree() == 2);
  CHECK(Poly(3).degree() == -1);
}

TEST_CASE("partial derivatives") {
  Poly t1 = t(0, 2), t2 = t(1, 2);
  SECTION("power rule") {
    CHECK(t1.pow(3).partial(0) == Rational(3) * t1.pow(2));
  }
  SECTION("mixed term") {
    Poly p = t1.pow(2) * t2;
    CHECK(p.partial(0) == Rational(2) * t1 * t2);
    CHECK(p.partial(1) == t1.pow(2));
    CHECK(p.partial(1).partial(1).is_zero());
  }
  SECTION("multi-index derive") {
    Poly p = t1.pow(3) * t2.pow(2);
    CHECK(p.derive({2, 1}) == Rational(12) * t1 * t2);
  }
}

TEST_CASE("taylor shift") {
  SECTION("square expands around fresh symbol") {
    Poly p = t(0, 1).pow(2);
    Poly sh = taylor_shift(p, 0);  // vars: t1, s
    REQUIRE(sh.nvars() == 2);
    Poly s = t(1, 2);
    CHECK(sh.coeff_of_power(0, 0) == s.pow(2));
    CHECK(sh.coeff_of_power(0, 1) == Rational(2) * s);
    CHECK(sh.coeff_of_power(0, 2) == Poly::constant(2, Rational(1)));
  }
  SECTION("setting the symbol to zero recovers the input") {
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
      int nv = 1 + static_cast<int>(rng() % 3);
      Poly p = testing::random_poly(rng, nv, 5, 6);
      int i = static_cast<int>(rng() % nv);
      Poly sh = taylor_shift(p, i);
      Poly back = sh.substituted(nv, Poly(nv + 1));  // s -> 0
      CHECK(back == p.padded(nv + 1));
    }
  }
  SECTION("binomial identity at degree five") {
    Poly sh = taylor_shift(t(0, 1).pow(5), 0);
    for (int k = 0; k <= 5; ++k)
      CHECK(sh.coeff_of_power(0, k) == Rational::binomial(5, k) * t(1, 2).pow(5 - k));
  }
}

namespace {

// reassemble sum_m a_m(s) (s'-s)^m as a polynomial in (s, s') and compare
// against f evaluated on the primed block
Poly reassembled(const TaylorExpansion& tx) {
  int nv = tx.nvars;
  Poly acc(2 * nv);
  for (const auto& [m, a] : tx.coeffs) {
    Poly term = a.padded(2 * nv);
    for (int v = 0; v < nv; ++v) {
      Poly diff = t(nv + v, 2 * nv) - t(v, 2 * nv);
      for (int rep = 0; rep < m[v]; ++rep) term = term * diff;
    }
    acc += term;
  }
  return acc;
}

Poly on_primed_block(const Poly& f) {
  int nv = f.nvars();
  Poly r = f.padded(2 * nv);
  for (int v = 0; v < nv; ++v) r = r.substituted(v, t(nv + v, 2 * nv));
  return r;
}

}  // namespace

TEST_CASE("full taylor expansion") {
  SECTION("square") {
    TaylorExpansion tx = taylor_shift(t(0, 1).pow(2));
    REQUIRE(tx.coeffs.size() == 3);
    CHECK(tx.coeffs.at({0}) == t(0, 1).pow(2));
    CHECK(tx.coeffs.at({1}) == Rational(2) * t(0, 1));
    CHECK(tx.coeffs.at({2}) == Poly::constant(1, Rational(1)));
  }
  SECTION("constant") {
    TaylorExpansion tx = taylor_shift(Poly::constant(2, Rational(7)));
    REQUIRE(tx.coeffs.size() == 1);
    CHECK(tx.coeffs.at({0, 0}) == Poly::constant(2, Rational(7)));
  }
  SECTION("bilinear") {
    TaylorExpansion tx = taylor_shift(t(0, 2) * t(1, 2));
    REQUIRE(tx.coeffs.size() == 4);
    CHECK(tx.coeffs.at({0, 0}) == t(0, 2) * t(1, 2));
    CHECK(tx.coeffs.at({1, 0}) == t(1, 2));
    CHECK(tx.coeffs.at({0, 1}) == t(0, 2));
    CHECK(tx.coeffs.at({1, 1}) == Poly::constant(2, Rational(1)));
  }
  SECTION("coefficients are scaled derivatives") {
    Rng rng(99);
    Poly f = testing::random_nonzero_poly(rng, 2, 4, 6);
    TaylorExpansion tx = taylor_shift(f);
    for (const auto& [m, a] : tx.coeffs) {
      Rational mfact(1);
      for (int v = 0; v < 2; ++v) mfact *= Rational::factorial(static_cast<unsigned>(m[v]));
      CHECK(mfact * a == f.derive(m));
    }
  }
  SECTION("symbolic round-trip on random samples") {
    Rng rng(43);
    for (int trial = 0; trial < 100; ++trial) {
      int nv = 1 + static_cast<int>(rng() % 3);
      Poly f = testing::random_poly(rng, nv, 5, 6);
      CHECK(reassembled(taylor_shift(f)) == on_primed_block(f));
    }
  }
}

TEST_CASE("polynomial ring axioms hold on random samples") {
  Rng rng(7);
  for (int trial = 0; trial < 120; ++trial) {
    int nv = 1 + static_cast<int>(rng() % 3);
    Poly a = testing::random_poly(rng, nv, 5, 5);
    Poly b = testing::random_poly(rng, nv, 5, 5);
    Poly c = testing::random_poly(rng, nv, 5, 5);
    CHECK(a * b == b * a);
    CHECK((a * b) * c == a * (b * c));
    CHECK(a * (b + c) == a * b + a * c);
    int i = static_cast<int>(rng() % nv);
    CHECK((a * b).partial(i) == a.partial(i) * b + a * b.partial(i));
    if (nv >= 2) CHECK(a.partial(0).partial(1) == a.partial(1).partial(0));
  }
}

TEST_CASE("substitution composes") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Poly p = testing::random_poly(rng, 2, 4, 5);
    Poly q = testing::random_poly(rng, 2, 2, 3);
    // (p with t1 -> q) evaluated at a point equals p evaluated at (q(point), t2).
    Poly sub = p.substituted(0, q);
    Poly point1 = Poly::constant(2, Rational(2, 3));
    Poly point2 = Poly::constant(2, Rational(-1, 2));
    Poly lhs = sub.substituted(0, point1).substituted(1, point2);
    Poly qv = q.substituted(0, point1).substituted(1, point2);
    Poly rhs = p.substituted(0, qv).substituted(1, point2);
    CHECK(lhs == rhs);
  }
}

TEST_CASE("hbar series combine") {
  Context ctx{3, std::nullopt};
  int nv = 1;
  SECTION("unit element") {
    PolySeries one = poly_series_constant(Poly::constant(nv, Rational(1)), 3);
    Rng rng(5);
    PolySeries x = testing::random_poly_series(rng, nv, 3, 3, 4);
    CHECK(hbar_combine(one, x, CombineOp::Mul, ctx) == x);
  }
  SECTION("truncation drops crossing terms") {
    Context c1{1, std::nullopt};
    PolySeries a = poly_series_constant(Poly::constant(nv, Rational(1)), 1);
    a[1] = Poly::constant(nv, Rational(1));
    PolySeries b = poly_series_constant(Poly::constant(nv, Rational(1)), 1);
    b[1] = Poly::constant(nv, Rational(-1));
    PolySeries prod = hbar_combine(a, b, CombineOp::Mul, c1);
    CHECK(prod == poly_series_constant(Poly::constant(nv, Rational(1)), 1));
  }
  SECTION("geometric inverse") {
    PolySeries a = poly_series_constant(Poly::constant(nv, Rational(1)), 3);
    a[1] = Poly::constant(nv, Rational(-1));
    PolySeries geo = poly_series_zero(nv, 3);
    for (unsigned k = 0; k <= 3; ++k) geo[k] = Poly::constant(nv, Rational(1));
    CHECK(hbar_combine(a, geo, CombineOp::Mul, ctx) ==
          poly_series_constant(Poly::constant(nv, Rational(1)), 3));
  }
  SECTION("degree cap is enforced, never silently applied") {
    Context capped{1, 2};
    PolySeries a = poly_series_constant(t(0, 1).pow(2), 1);
    CHECK_THROWS_AS(hbar_combine(a, a, CombineOp::Mul, capped), Error);
    try {
      hbar_combine(a, a, CombineOp::Mul, capped);
    } catch (const Error& e) {
      CHECK(e.code == "E_DEGREE_CAP");
    }
    CHECK(hbar_combine(a, a, CombineOp::Add, capped)[0] == Rational(2) * t(0, 1).pow(2));
  }
  SECTION("order mismatch is an error") {
    PolySeries a = poly_series_zero(nv, 2);
    PolySeries b = poly_series_zero(nv, 3);
    CHECK_THROWS_AS(a + b, Error);
    CHECK_THROWS_AS(hbar_combine(a, b, CombineOp::Add, ctx), Error);
  }
  SECTION("plus series flag") {
    PolySeries a = poly_series_zero(nv, 2);
    CHECK(a.is_plus());
    a[1] = t(0, 1);
    CHECK(a.is_plus());
    a[0] = Poly::constant(1, Rational(1));
    CHECK(!a.is_plus());
  }
}

TEST_CASE("term limit fuse trips instead of truncating") {
  // The fuse reads STARFORGE_MAX_TERMS once per process; here we only check
  // the guard function itself.
  CHECK_THROWS_AS(check_term_limit(term_limit() + 1, "test"), Error);
  CHECK_NOTHROW(check_term_limit(1, "test"));
}
