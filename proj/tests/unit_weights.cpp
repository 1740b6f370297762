#include <utility>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "starforge/weights.hpp"
#include "test_support.hpp"

using namespace starforge;
using starforge::testing::Rng;

namespace {

PolyVector random_constant_bivector(Rng& rng, int nvars) {
  PolyVector v(2, nvars);
  for (int i = 0; i < nvars; ++i)
    for (int j = i + 1; j < nvars; ++j) {
      Rational c = testing::random_rational(rng);
      if (!c.is_zero()) v.add_component({i, j}, Poly::constant(nvars, c));
    }
  return v;
}

PolyVector random_affine_bivector_2d(Rng& rng) {
  Poly c = Poly::constant(2, testing::random_rational(rng)) +
           Poly::variable(0, 2) * Poly::constant(2, testing::random_rational(rng)) +
           Poly::variable(1, 2) * Poly::constant(2, testing::random_rational(rng));
  PolyVector v(2, 2);
  v.add_component({0, 1}, c);
  return v;
}

std::size_t graph_index(const std::vector<Graph>& graphs, const Graph& g) {
  for (std::size_t i = 0; i < graphs.size(); ++i)
    if (graphs[i] == g) return i;
  FAIL("graph not found in enumeration");
  return 0;
}

std::vector<std::pair<Graph, Rational>> graph_list(const WeightFamily& fam) {
  std::vector<std::pair<Graph, Rational>> out;
  for (std::size_t i = 0; i < fam.graphs.size(); ++i)
    if (!fam.weights[i].is_zero()) out.push_back({fam.graphs[i], fam.weights[i]});
  return out;
}

}  // namespace

TEST_CASE("first-order weight constraints leave a single effective scale") {
  Rng rng(2026'07'11);
  WeightSystem sys = weight_constraint_system(1, {});
  REQUIRE(sys.order == 1);
  REQUIRE(sys.graphs.size() == 4);
  CHECK(sys.gl_graphs.empty());

  WeightSolveReport rep = solve_weights(sys);
  REQUIRE(rep.found);
  for (const Rational& w : rep.family.weights) CHECK(w.is_zero());
  // no equation touches the weights; all four directions are free
  REQUIRE(rep.family.free_basis.size() == 4);

  // yet only the left-right contraction acts: its mirror is the negative and
  // the two same-slot graphs vanish on antisymmetric tensors
  PolyVector alpha = random_constant_bivector(rng, 3);
  PolyDiffOp lr_op = graph_evaluate(Graph{1, {{kGroundL, kGroundR}}}, alpha);
  REQUIRE(!lr_op.is_zero());
  std::size_t lr = graph_index(sys.graphs, Graph{1, {{kGroundL, kGroundR}}});
  std::size_t rl = graph_index(sys.graphs, Graph{1, {{kGroundR, kGroundL}}});
  for (const std::vector<Rational>& dir : rep.family.free_basis) {
    PolyDiffOp op = weighted_graph_sum(rep.family, dir, alpha);
    CHECK(op == (dir[lr] - dir[rl]) * lr_op);
  }
}

TEST_CASE("second-order weight families assemble into flat star products") {
  Rng rng(2026'07'12);
  WeightFamily fam1 = hkr_weight_family();
  WeightSystem sys = weight_constraint_system(2, {fam1});
  REQUIRE(sys.graphs.size() == 45);

  WeightSolveReport rep = solve_weights(sys);
  REQUIRE(rep.found);
  REQUIRE(!rep.family.free_basis.empty());

  // move off the particular solution to cover the whole affine family
  std::vector<Rational> point = rep.family.weights;
  for (const std::vector<Rational>& dir : rep.family.free_basis) {
    Rational c = testing::random_rational(rng, 3, 2);
    for (std::size_t i = 0; i < point.size(); ++i) point[i] += c * dir[i];
  }
  WeightFamily fam2 = rep.family;
  fam2.weights = point;

  std::vector<PolyVector> alphas;
  alphas.push_back(random_constant_bivector(rng, 3));
  alphas.push_back(random_affine_bivector_2d(rng));
  alphas.push_back(testing::so3_bivector());
  for (const PolyVector& alpha : alphas) {
    StarProduct star = assemble_star({fam1, fam2}, alpha);
    CHECK(is_mc(star.tail));
    PolySeries f = poly_series_constant(testing::random_poly(rng, alpha.nvars(), 2, 3), 2);
    PolySeries g = poly_series_constant(testing::random_poly(rng, alpha.nvars(), 2, 3), 2);
    PolySeries h = poly_series_constant(testing::random_poly(rng, alpha.nvars(), 2, 3), 2);
    CHECK(star_associator(star, f, g, h, Context{2, std::nullopt}).is_zero());
  }
}

TEST_CASE("the half-weight double contraction matches the constant-coefficient pattern") {
  Rng rng(2026'07'13);
  WeightFamily fam1 = hkr_weight_family();
  WeightFamily moyal2;
  moyal2.order = 2;
  moyal2.graphs = enumerate_graphs(2);
  moyal2.weights.assign(moyal2.graphs.size(), Rational(0));
  Graph dd{2, {{kGroundL, kGroundR}, {kGroundL, kGroundR}}};
  moyal2.weights[graph_index(moyal2.graphs, dd)] = Rational(1, 2);

  for (int nv = 2; nv <= 4; ++nv) {
    StarProduct star = assemble_star({fam1, moyal2}, random_constant_bivector(rng, nv));
    CHECK(is_mc(star.tail));
  }

  // the pattern lies on the affine solution set of the constant-probe system
  WeightSystemOptions constant_only;
  constant_only.alpha_degree_cap = 0;
  WeightSolveReport rep = solve_weights(weight_constraint_system(2, {fam1}, constant_only));
  REQUIRE(rep.found);
  LinearSystem<std::string> member(rep.family.free_basis.size());
  for (std::size_t c = 0; c < rep.family.free_basis.size(); ++c)
    for (std::size_t i = 0; i < moyal2.weights.size(); ++i)
      member.add_entry(c, std::to_string(i), rep.family.free_basis[c][i]);
  for (std::size_t i = 0; i < moyal2.weights.size(); ++i)
    member.add_rhs(std::to_string(i), moyal2.weights[i] - rep.family.weights[i]);
  CHECK(member.solve().solvable);
}

TEST_CASE("field-slot side conditions extend the system consistently") {
  WeightFamily fam1 = hkr_weight_family();
  WeightSystemOptions with_gl;
  with_gl.gl_side_conditions = true;
  WeightSystem sys = weight_constraint_system(2, {fam1}, with_gl);
  REQUIRE(!sys.gl_graphs.empty());
  for (const Graph& g : sys.gl_graphs) {
    REQUIRE(g.edges[0].size() == 1);
    for (std::size_t v = 1; v < g.edges.size(); ++v) REQUIRE(g.edges[v].size() == 2);
  }

  WeightSolveReport augmented = solve_weights(sys);
  REQUIRE(augmented.found);
  WeightSolveReport plain = solve_weights(weight_constraint_system(2, {fam1}));
  CHECK(augmented.family.weights == plain.family.weights);

  // first order has no field-slot layer to constrain
  CHECK(weight_constraint_system(1, {}, with_gl).gl_graphs.empty());

  WeightSystem broken = weight_constraint_system(2, {fam1}, with_gl);
  broken.system.add_rhs("contradiction", Rational(1));
  CHECK(!solve_weights(broken).found);
}

TEST_CASE("third-order weights extend a solved second order") {
  Rng rng(2026'07'16);
  WeightFamily fam1 = hkr_weight_family();
  WeightSolveReport r2 = solve_weights(weight_constraint_system(2, {fam1}));
  REQUIRE(r2.found);
  WeightSolveReport r3 = solve_weights(weight_constraint_system(3, {fam1, r2.family}));
  REQUIRE(r3.found);
  REQUIRE(r3.family.graphs.size() == 720);

  std::vector<PolyVector> alphas;
  alphas.push_back(random_constant_bivector(rng, 3));
  alphas.push_back(random_affine_bivector_2d(rng));
  alphas.push_back(Rational(5, 3) * testing::so3_bivector());
  for (const PolyVector& alpha : alphas) {
    StarProduct star = assemble_star({fam1, r2.family, r3.family}, alpha);
    CHECK(is_mc(star.tail));
  }

  // an order-2 choice tuned only to constant coefficients leaves a
  // third-order obstruction that no weight assignment can absorb
  WeightFamily moyal2;
  moyal2.order = 2;
  moyal2.graphs = enumerate_graphs(2);
  moyal2.weights.assign(moyal2.graphs.size(), Rational(0));
  Graph dd{2, {{kGroundL, kGroundR}, {kGroundL, kGroundR}}};
  moyal2.weights[graph_index(moyal2.graphs, dd)] = Rational(1, 2);
  CHECK(!solve_weights(weight_constraint_system(3, {fam1, moyal2})).found);
}

TEST_CASE("weight solving validates its inputs") {
  WeightFamily fam1 = hkr_weight_family();
  CHECK_THROWS_AS(weight_constraint_system(0, {}), Error);
  CHECK_THROWS_AS(weight_constraint_system(4, {fam1, fam1, fam1}), Error);
  CHECK_THROWS_AS(weight_constraint_system(2, {}), Error);
  WeightFamily reordered = fam1;
  reordered.order = 2;
  CHECK_THROWS_AS(weight_constraint_system(2, {reordered}), Error);
  WeightSystemOptions deep;
  deep.alpha_degree_cap = 2;
  CHECK_THROWS_AS(weight_constraint_system(1, {}, deep), Error);

  Rng rng(2026'07'14);
  PolyVector alpha = random_constant_bivector(rng, 2);
  CHECK_THROWS_AS(weighted_graph_sum(fam1, {Rational(1)}, alpha), Error);
  CHECK_THROWS_AS(assemble_star({}, alpha), Error);
  WeightFamily wrong = fam1;
  wrong.order = 2;
  CHECK_THROWS_AS(assemble_star({wrong}, alpha), Error);
  CHECK_THROWS_AS(solve_bracket_homotopy({}, 2, 1), Error);
  CHECK_THROWS_AS(
      solve_bracket_homotopy({{PolyVector(1, 2), PolyVector(2, 2)}}, 2, 1), Error);
}

TEST_CASE("bracket defect correction exists and sign flips are caught") {
  Rng rng(2026'07'15);
  const int nv = 2;
  const unsigned order = 1;

  std::vector<std::pair<PolyVector, PolyVector>> probes;
  probes.push_back({testing::constant_bivector_2d(), random_affine_bivector_2d(rng)});
  probes.push_back({random_affine_bivector_2d(rng), random_affine_bivector_2d(rng)});
  probes.push_back({testing::random_polyvector(rng, 2, nv, 2, 2),
                    testing::random_polyvector(rng, 2, nv, 2, 2)});

  WeightSolveReport rep = solve_bracket_homotopy(probes, nv, order);
  REQUIRE(rep.found);

  LInftyMorphism fixed = make_hkr_morphism(nv, order, 2, graph_list(rep.family));
  auto lift = [&](const PolyVector& v) {
    PolyVectorSeries s = polyvector_series_zero(2, nv, order);
    s[0] = v;
    return tv_elt(s, 0);
  };
  std::vector<std::vector<LinftyElt>> samples;
  for (const auto& [x, y] : probes) {
    samples.push_back({lift(x)});
    samples.push_back({lift(x), lift(y)});
  }
  CHECK(linfty_check(fixed, samples).passed);

  // the correction layer actually acts on the probes
  REQUIRE(!elt_is_zero(linfty_psi(fixed, samples[1])));

  WeightFamily flipped = rep.family;
  for (Rational& w : flipped.weights) w = -w;
  LInftyMorphism broken = make_hkr_morphism(nv, order, 2, graph_list(flipped));
  LinftyCheckReport bad = linfty_check(broken, samples);
  CHECK(!bad.passed);
  CHECK(bad.first_failure_arity == 2);
}
