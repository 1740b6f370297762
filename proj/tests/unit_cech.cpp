#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "starforge/cech.hpp"
#include "test_support.hpp"

using namespace starforge;
using starforge::testing::Rng;

namespace {

LaurentPoly random_laurent(Rng& rng, int exp_range = 2, int max_terms = 3) {
  LaurentPoly p;
  int n = 1 + static_cast<int>(rng() % max_terms);
  for (int t = 0; t < n; ++t) {
    int e = static_cast<int>(rng() % (2 * exp_range + 1)) - exp_range;
    p.add_term(e, testing::random_rational(rng));
  }
  return p;
}

// normalized: derivative orders start at one
LaurentOp random_normalized_op(Rng& rng, int max_order = 2) {
  LaurentOp op;
  int n = 1 + static_cast<int>(rng() % 2);
  for (int t = 0; t < n; ++t)
    op.add_term(1 + static_cast<int>(rng() % max_order), random_laurent(rng));
  return op;
}

LaurentGauge random_gauge(Rng& rng, unsigned order) {
  LaurentGauge g = laurent_gauge_identity(order);
  for (unsigned k = 1; k <= order; ++k) g[k] = random_normalized_op(rng);
  return g;
}

LaurentOp d_op(const LaurentPoly& c) {
  LaurentOp op;
  op.add_term(1, c);
  return op;
}

}  // namespace

TEST_CASE("laurent coefficient operator algebra") {
  Rng rng(2026'08'01);

  SECTION("negative exponents differentiate through") {
    LaurentPoly f = LaurentPoly::monomial(-1, Rational(1));
    CHECK(f.derivative() == LaurentPoly::monomial(-2, Rational(-1)));
    CHECK(LaurentPoly::constant(Rational(5)).derivative().is_zero());
  }

  SECTION("composition matches application") {
    for (int trial = 0; trial < 20; ++trial) {
      LaurentOp a = random_normalized_op(rng);
      LaurentOp b = random_normalized_op(rng);
      LaurentPoly f = random_laurent(rng, 3, 4);
      CHECK(compose(a, b).apply(f) == a.apply(b.apply(f)));
    }
  }

  SECTION("composition is associative") {
    for (int trial = 0; trial < 10; ++trial) {
      LaurentOp a = random_normalized_op(rng);
      LaurentOp b = random_normalized_op(rng);
      LaurentOp c = random_normalized_op(rng);
      CHECK(compose(compose(a, b), c) == compose(a, compose(b, c)));
    }
  }

  SECTION("leibniz coefficients") {
    // D^2 (t^2 f) = 2 f + 4 t f' + t^2 f''
    LaurentOp d2;
    d2.add_term(2, LaurentPoly::constant(Rational(1)));
    LaurentOp mul_t2 = LaurentOp::multiplication(LaurentPoly::monomial(2, Rational(1)));
    LaurentOp got = compose(d2, mul_t2);
    LaurentOp want;
    want.add_term(0, LaurentPoly::constant(Rational(2)));
    want.add_term(1, LaurentPoly::monomial(1, Rational(4)));
    want.add_term(2, LaurentPoly::monomial(2, Rational(1)));
    CHECK(got == want);
  }
}

TEST_CASE("overlap gauge group") {
  Rng rng(2026'08'02);
  const unsigned order = 3;

  SECTION("inverse composes to the identity on both sides") {
    for (int trial = 0; trial < 10; ++trial) {
      LaurentGauge g = random_gauge(rng, order);
      LaurentGauge inv = gauge_inverse(g);
      CHECK(gauge_compose(g, inv) == laurent_gauge_identity(order));
      CHECK(gauge_compose(inv, g) == laurent_gauge_identity(order));
    }
  }

  SECTION("validation rejects bad leading and unnormalized coefficients") {
    LaurentGauge g = laurent_gauge_identity(order);
    g[0] = LaurentOp();
    CHECK_THROWS_AS(validate_laurent_gauge(g, "test"), Error);

    LaurentGauge h = laurent_gauge_identity(order);
    h[1] = LaurentOp::multiplication(LaurentPoly::constant(Rational(1)));
    CHECK_THROWS_AS(validate_laurent_gauge(h, "test"), Error);
  }
}

TEST_CASE("cocycle condition") {
  Rng rng(2026'08'03);
  const unsigned order = 3;

  SECTION("identity cocycle passes") {
    CHECK(cocycle_check(identity_cocycle(3, order), order).ok);
  }

  SECTION("coboundaries of arbitrary chart gauges pass") {
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<LaurentGauge> gs = {random_gauge(rng, order), random_gauge(rng, order),
                                      random_gauge(rng, order)};
      CHECK(cocycle_check(cocycle_from_charts(gs), order).ok);
    }
  }

  SECTION("pair consistency is the two-chart content") {
    GaugeCocycle c = identity_cocycle(2, order);
    LaurentGauge rho = laurent_gauge_identity(order);
    rho[1] = d_op(LaurentPoly::constant(Rational(1)));
    c.rho[0][1] = rho;
    CocycleCheckResult broken = cocycle_check(c, order);  // rho10 still identity
    CHECK(!broken.ok);
    CHECK(broken.triple == std::array<int, 3>{0, 1, 0});

    c.rho[1][0] = gauge_inverse(rho);
    CHECK(cocycle_check(c, order).ok);
  }

  SECTION("truncation order is respected") {
    GaugeCocycle c = identity_cocycle(2, order);
    LaurentGauge rho = random_gauge(rng, order);
    c.rho[0][1] = rho;
    c.rho[1][0] = gauge_inverse(rho);
    c.rho[1][0][2] += d_op(LaurentPoly::constant(Rational(1)));  // break only at hbar^2
    CHECK(cocycle_check(c, 1).ok);
    CHECK(!cocycle_check(c, 2).ok);
    CHECK_THROWS_AS(cocycle_check(c, order + 1), Error);
  }

  SECTION("malformed tables are rejected") {
    GaugeCocycle c = identity_cocycle(2, order);
    c.rho[0][0][1] = d_op(LaurentPoly::constant(Rational(1)));
    CHECK_THROWS_AS(cocycle_check(c, order), Error);  // diagonal not identity

    GaugeCocycle ragged = identity_cocycle(2, order);
    ragged.rho[1].pop_back();
    CHECK_THROWS_AS(cocycle_check(ragged, order), Error);
  }
}

TEST_CASE("two-chart trivialization") {
  Rng rng(2026'08'04);

  SECTION("identity cocycle trivializes to identities") {
    TrivializeResult r = trivialize(identity_cocycle(2, 2), two_chart_model(1), 2);
    REQUIRE(r.charts.size() == 2);
    CHECK(r.charts[0] == laurent_gauge_identity(2));
    CHECK(r.charts[1] == laurent_gauge_identity(2));
  }

  SECTION("first-order split lands on the expected sides") {
    // rho01 = 1 + hbar (t^2 + t^{-1}) D: the nonnegative part belongs to
    // chart 0 with a minus sign, the negative part to chart 1 with a plus
    const unsigned order = 1;
    LaurentPoly dplus = LaurentPoly::monomial(2, Rational(1));
    LaurentPoly dminus = LaurentPoly::monomial(-1, Rational(1));
    LaurentGauge rho = laurent_gauge_identity(order);
    rho[1] = d_op(dplus + dminus);
    GaugeCocycle c = identity_cocycle(2, order);
    c.rho[0][1] = rho;
    c.rho[1][0] = gauge_inverse(rho);

    TrivializeResult r = trivialize(c, two_chart_model(2), order);
    LaurentGauge want0 = laurent_gauge_identity(order);
    want0[1] = -d_op(dplus);
    LaurentGauge want1 = laurent_gauge_identity(order);
    want1[1] = d_op(dminus);
    CHECK(r.charts[0] == want0);
    CHECK(r.charts[1] == want1);
  }

  SECTION("higher orders satisfy the pair relation and chart regularity") {
    const unsigned order = 3;
    for (int trial = 0; trial < 5; ++trial) {
      LaurentGauge rho = random_gauge(rng, order);
      GaugeCocycle c = identity_cocycle(2, order);
      c.rho[0][1] = rho;
      c.rho[1][0] = gauge_inverse(rho);

      CoverModel model = two_chart_model(24);
      TrivializeResult r = trivialize(c, model, order);
      LaurentGauge relation = gauge_compose(r.charts[1], gauge_inverse(r.charts[0]));
      CHECK(relation == rho);
      for (unsigned k = 1; k <= order; ++k) {
        CHECK(detail::op_in_range(r.charts[0][k], model.regular[0]));
        CHECK(detail::op_in_range(r.charts[1][k], model.regular[1]));
      }
    }
  }

  SECTION("window and cocycle violations are reported") {
    const unsigned order = 1;
    LaurentGauge rho = laurent_gauge_identity(order);
    rho[1] = d_op(LaurentPoly::monomial(2, Rational(1)));
    GaugeCocycle c = identity_cocycle(2, order);
    c.rho[0][1] = rho;
    c.rho[1][0] = gauge_inverse(rho);
    CHECK_THROWS_AS(trivialize(c, two_chart_model(1), order), Error);  // exponent 2 > window

    GaugeCocycle bad = identity_cocycle(2, order);
    bad.rho[0][1] = rho;  // rho10 left at identity: not a cocycle
    CHECK_THROWS_AS(trivialize(bad, two_chart_model(2), order), Error);

    CHECK_THROWS_AS(trivialize(c, two_chart_model(2), order + 1), Error);
    CoverModel mismatched = two_chart_model(2);
    mismatched.charts = 3;
    mismatched.regular.push_back(ChartRange{});
    CHECK_THROWS_AS(trivialize(c, mismatched, order), Error);
  }
}

TEST_CASE("many-chart trivialization") {
  Rng rng(2026'08'05);
  const unsigned order = 2;

  SECTION("single chart is trivial") {
    TrivializeResult r = trivialize(identity_cocycle(1, order),
                                    CoverModel{1, 0, {ChartRange{}}}, order);
    CHECK(r.charts[0] == laurent_gauge_identity(order));
  }

  SECTION("three charts glue when the third range is unconstrained") {
    CoverModel model = two_chart_model(24);
    model.charts = 3;
    model.regular.push_back(ChartRange{});  // chart 2 accepts everything

    for (int trial = 0; trial < 3; ++trial) {
      std::vector<LaurentGauge> gs = {random_gauge(rng, order), random_gauge(rng, order),
                                      random_gauge(rng, order)};
      GaugeCocycle c = cocycle_from_charts(gs);
      TrivializeResult r = trivialize(c, model, order);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          CHECK(gauge_compose(r.charts[j], gauge_inverse(r.charts[i])) == c.rho[i][j]);
    }
  }

  SECTION("a range too small for the forced cochain fails the split") {
    CoverModel model = two_chart_model(4);
    model.charts = 3;
    model.regular.push_back(ChartRange{0, 0});  // chart 2 takes constants only

    GaugeCocycle c = identity_cocycle(3, 1);
    LaurentGauge rho = laurent_gauge_identity(1);
    rho[1] = d_op(LaurentPoly::monomial(-1, Rational(1)));
    c.rho[0][2] = rho;
    c.rho[2][0] = gauge_inverse(rho);
    c.rho[1][2] = rho;  // rho01 = id forces rho12 = rho02
    c.rho[2][1] = gauge_inverse(rho);
    REQUIRE(cocycle_check(c, 1).ok);
    CHECK_THROWS_AS(trivialize(c, model, 1), Error);
  }
}

TEST_CASE("defects are central modulo the next filtration step") {
  Rng rng(2026'08'06);
  const unsigned order = 4;
  for (unsigned k = 1; k + 1 <= order; ++k) {
    // delta in G^k: identity up to hbar^k, content from hbar^{k+1} on
    LaurentGauge delta = laurent_gauge_identity(order);
    for (unsigned s = k + 1; s <= order; ++s) delta[s] = random_normalized_op(rng);
    LaurentGauge g = random_gauge(rng, order);
    LaurentGauge lhs = gauge_compose(g, delta);
    LaurentGauge rhs = gauge_compose(delta, g);
    for (unsigned s = 0; s <= k + 1; ++s) CHECK(lhs[s] == rhs[s]);
  }

  // the bound is tight: conjugation does act one step further up
  LaurentGauge delta = laurent_gauge_identity(order);
  delta[2] = d_op(LaurentPoly::monomial(1, Rational(1)));
  LaurentGauge g = laurent_gauge_identity(order);
  g[1] = d_op(LaurentPoly::constant(Rational(1)));
  CHECK(gauge_compose(g, delta)[3] != gauge_compose(delta, g)[3]);
}

TEST_CASE("transported products glue along the trivialization") {
  Rng rng(2026'08'07);
  const unsigned order = 2;

  SECTION("two-argument composition matches application") {
    for (int trial = 0; trial < 10; ++trial) {
      LaurentBiOp s;
      s.add_term({1 + static_cast<int>(rng() % 2), 1 + static_cast<int>(rng() % 2)},
                 random_laurent(rng));
      LaurentOp a = random_normalized_op(rng);
      LaurentPoly f = random_laurent(rng, 3, 3);
      LaurentPoly g = random_laurent(rng, 3, 3);
      CHECK(compose_out(a, s).apply(f, g) == a.apply(s.apply(f, g)));
      CHECK(compose_in(s, 0, a).apply(f, g) == s.apply(a.apply(f), g));
      CHECK(compose_in(s, 1, a).apply(f, g) == s.apply(f, a.apply(g)));
    }
  }

  SECTION("conjugation is functorial") {
    LaurentBiOpSeries star = LaurentBiOpSeries::zero(LaurentBiOp(), order);
    star[0] = LaurentBiOp::multiplication();
    LaurentBiOp dd;
    dd.add_term({1, 1}, LaurentPoly::constant(Rational(1)));
    star[1] = dd;

    LaurentGauge a = random_gauge(rng, order);
    LaurentGauge b = random_gauge(rng, order);
    CHECK(gauge_conjugate_biop(gauge_compose(a, b), star) ==
          gauge_conjugate_biop(a, gauge_conjugate_biop(b, star)));
  }

  SECTION("chart products agree after trivialization") {
    LaurentBiOpSeries star0 = LaurentBiOpSeries::zero(LaurentBiOp(), order);
    star0[0] = LaurentBiOp::multiplication();
    LaurentBiOp dd;
    dd.add_term({1, 1}, LaurentPoly::constant(Rational(1)));
    star0[1] = dd;

    for (int trial = 0; trial < 3; ++trial) {
      LaurentGauge rho = random_gauge(rng, order);
      GaugeCocycle c = identity_cocycle(2, order);
      c.rho[0][1] = rho;
      c.rho[1][0] = gauge_inverse(rho);
      LaurentBiOpSeries star1 = gauge_conjugate_biop(rho, star0);

      TrivializeResult r = trivialize(c, two_chart_model(24), order);
      LaurentBiOpSeries glued0 = gauge_conjugate_biop(gauge_inverse(r.charts[0]), star0);
      LaurentBiOpSeries glued1 = gauge_conjugate_biop(gauge_inverse(r.charts[1]), star1);
      CHECK(glued0 == glued1);
    }
  }
}
