#include <catch2/catch_amalgamated.hpp>

#include "morita/condexp.hpp"

using namespace morita;

namespace {

matrix_algebra diagonal_algebra(long d) {
  std::vector<cmat> gens;
  for (long i = 0; i < d; ++i) gens.push_back(munit(d, i, i));
  return make_algebra(d, gens);
}

cond_expectation scalars_in_m2() {
  return trace_expectation(full_algebra(2), scalar_algebra(2));
}

cond_expectation pinching_d2() {
  return trace_expectation(full_algebra(2), diagonal_algebra(2));
}

}  // namespace

TEST_CASE("trace expectation onto the scalars is the normalized trace") {
  auto e = scalars_in_m2();
  CHECK(hs_norm(e.apply(munit(2, 0, 0)) - 0.5 * identity(2)) < 1e-12);
  CHECK(hs_norm(e.apply(munit(2, 0, 1))) < 1e-12);
  CHECK(hs_norm(e.apply(identity(2)) - identity(2)) < 1e-12);
}

TEST_CASE("trace expectation onto the diagonal pinches") {
  auto e = pinching_d2();
  cmat x(2, 2);
  x << 1, 2, 3, 4;
  cmat want = cmat::Zero(2, 2);
  want(0, 0) = 1;
  want(1, 1) = 4;
  CHECK(hs_norm(e.apply(x) - want) < 1e-12);
}

TEST_CASE("trace expectation of an algebra onto itself is the identity") {
  auto m2 = full_algebra(2);
  auto e = trace_expectation(m2, m2);
  rng gen(4);
  cmat x = gen.gauss_matrix(2, 2);
  CHECK(hs_norm(e.apply(x) - x) < 1e-12);
  CHECK(verify_expectation(e).worst() < 1e-12);
}

TEST_CASE("verify_expectation passes the canonical examples") {
  CHECK(verify_expectation(scalars_in_m2()).passes(1e-10));
  CHECK(verify_expectation(pinching_d2()).passes(1e-10));
}

TEST_CASE("the transpose map is not a conditional expectation") {
  auto m2 = full_algebra(2);
  // action of x -> x^T in span coordinates
  cmat action(4, 4);
  for (long i = 0; i < 4; ++i)
    action.col(i) = m2.span().coords(m2.basis(i).transpose());
  cond_expectation t(m2, m2, action);
  auto rep = verify_expectation(t);
  CHECK(rep.bimodule > 0.5);
}

TEST_CASE("quasi-basis identity for the trace onto the scalars") {
  auto e = scalars_in_m2();
  auto qb = quasi_basis(e);
  REQUIRE(qb.size() == 4);
  CHECK(quasi_basis_defect(e, qb) < 1e-9);
  // oracle: evaluate the reconstruction directly on the matrix units
  for (long i = 0; i < 2; ++i)
    for (long j = 0; j < 2; ++j) {
      cmat x = munit(2, i, j);
      cmat rec = cmat::Zero(2, 2);
      for (const auto& [u, v] : qb) rec += u * e.apply(v * x);
      CHECK(hs_norm(rec - x) < 1e-9);
    }
}

TEST_CASE("quasi-basis identity for the pinching expectation") {
  auto e = pinching_d2();
  auto qb = quasi_basis(e);
  CHECK(quasi_basis_defect(e, qb) < 1e-9);
}

TEST_CASE("identity expectation has a trivial quasi-basis") {
  auto m2 = full_algebra(2);
  auto e = trace_expectation(m2, m2);
  auto qb = quasi_basis(e);
  cmat ind = cmat::Zero(2, 2);
  for (const auto& [u, v] : qb) ind += u * v;
  CHECK(hs_norm(ind - identity(2)) < 1e-9);
}

TEST_CASE("Watatani index of the scalar inclusion is 4") {
  cmat ind = watatani_index(scalars_in_m2());
  CHECK(hs_norm(ind - 4.0 * identity(2)) < 1e-8);
}

TEST_CASE("Watatani index of the pinching is 2") {
  cmat ind = watatani_index(pinching_d2());
  CHECK(hs_norm(ind - 2.0 * identity(2)) < 1e-8);
}

TEST_CASE("with_index_data attaches verified data") {
  auto e = with_index_data(scalars_in_m2());
  REQUIRE(e.quasi.has_value());
  REQUIRE(e.index.has_value());
  CHECK(quasi_basis_defect(e, *e.quasi) < 1e-8);
}

TEST_CASE("quasi-basis fails for a non-faithful expectation") {
  // on C + C, send (x1, x2) to (x1, x1): an expectation that kills a summand
  auto d2 = diagonal_algebra(2);
  auto sc = scalar_algebra(2);
  cmat action(2, 2);
  for (long i = 0; i < 2; ++i) {
    cmat b = d2.basis(i);
    cmat img = b(0, 0) * identity(2);
    action.col(i) = d2.span().coords(img);
  }
  cond_expectation e(d2, sc, action);
  CHECK(verify_expectation(e).passes(1e-10));
  CHECK_THROWS_AS(quasi_basis(e), near_singular_error);
}

TEST_CASE("compression by the identity is the expectation itself") {
  auto e = with_index_data(scalars_in_m2());
  auto comp = compress_expectation(e, 1, identity(2));
  CHECK(expectation_distance(comp.exp, e) < 1e-9);
  CHECK(hs_norm(comp.index_formula - *e.index) < 1e-8);
}

TEST_CASE("compression index formula for the corner of the scalar inclusion") {
  auto e = with_index_data(scalars_in_m2());
  cmat p = kron(munit(2, 0, 0), identity(2));
  auto comp = compress_expectation(e, 2, p);
  // (Ind (x) I_2) p cut to the range of p is 4 * I_2
  CHECK(hs_norm(comp.index_formula - 4.0 * identity(2)) < 1e-8);
  // second route: fresh frame algorithm on the compressed inclusion
  cmat ind2 = watatani_index(comp.exp);
  CHECK(hs_norm(ind2 - comp.index_formula) < 1e-8);
  CHECK(verify_expectation(comp.exp).passes(1e-9));
  CHECK(quasi_basis_defect(comp.exp, *comp.exp.quasi) < 1e-8);
}

TEST_CASE("basic construction of the scalar inclusion is M4") {
  auto e = with_index_data(scalars_in_m2());
  auto bc = basic_construction(e);
  CHECK(bc.module_dim == 4);
  CHECK(bc.tower.dim() == 16);
  auto bs = block_structure(bc.tower);
  REQUIRE(bs.blocks.size() == 1);
  CHECK(bs.blocks[0].k == 4);
}

TEST_CASE("basic construction of the diagonal inclusion has dimension 8") {
  // path-counting oracle: the ladder [1 1]^T doubles each diagonal block
  auto e = with_index_data(pinching_d2());
  auto bc = basic_construction(e);
  CHECK(bc.tower.dim() == 8);
  auto bs = block_structure(bc.tower);
  REQUIRE(bs.blocks.size() == 2);
  CHECK(bs.blocks[0].k == 2);
  CHECK(bs.blocks[1].k == 2);
}

TEST_CASE("basic construction of the identity inclusion is the algebra itself") {
  auto m2 = full_algebra(2);
  auto e = with_index_data(trace_expectation(m2, m2));
  auto bc = basic_construction(e);
  CHECK(bc.tower.dim() == 4);
  CHECK(hs_norm(bc.jones - identity(4)) < 1e-9);
}

TEST_CASE("basic construction agrees with generating from lambda and e") {
  auto e = with_index_data(pinching_d2());
  auto bc = basic_construction(e);
  std::vector<cmat> gens;
  for (long i = 0; i < 4; ++i) gens.push_back(bc.embed.apply(full_algebra(2).basis(i)));
  gens.push_back(bc.jones);
  auto generated = generate_algebra(4, gens);
  CHECK(generated.dim() == bc.tower.dim());
  CHECK(generated.span().same_space_as(bc.tower.span(), 1e-8));
}

TEST_CASE("dual expectation maps the Jones projection to the inverse index") {
  auto e = with_index_data(scalars_in_m2());
  auto bc = basic_construction(e);
  auto dual = dual_expectation(bc, e);
  cmat want = bc.embed.apply(0.25 * identity(2));
  CHECK(hs_norm(dual.apply(bc.jones) - want) < 1e-8);
}

TEST_CASE("dual expectation restricts to the identity on the embedded algebra") {
  auto e = with_index_data(scalars_in_m2());
  auto bc = basic_construction(e);
  auto dual = dual_expectation(bc, e);
  rng gen(12);
  cmat c = gen.gauss_matrix(2, 2);
  cmat lc = bc.embed.apply(c);
  CHECK(hs_norm(dual.apply(lc) - lc) < 1e-8);
  CHECK(verify_expectation(dual).passes(1e-8));
}

TEST_CASE("dual expectation has the same index") {
  auto e = with_index_data(scalars_in_m2());
  auto bc = basic_construction(e);
  auto dual = dual_expectation(bc, e);
  cmat ind = watatani_index(dual);
  CHECK(hs_norm(ind - bc.embed.apply(*e.index)) < 1e-7);
}

TEST_CASE("downward data from the tower recovers the scalars") {
  auto e = with_index_data(scalars_in_m2());
  auto bc = basic_construction(e);
  auto dual = with_index_data(dual_expectation(bc, e));
  auto down = downward_data(dual, bc.jones);
  // P = {e_A}' intersect lambda(M2) is the embedded scalars
  CHECK(down.p_algebra.dim() == 1);
  // recovered expectation is the embedded original
  for (long i = 0; i < 4; ++i) {
    cmat x = full_algebra(2).basis(i);
    CHECK(hs_norm(down.expectation.apply(bc.embed.apply(x)) -
                  bc.embed.apply(e.apply(x))) < 1e-7);
  }
}

TEST_CASE("downward data with a central projection returns the algebra") {
  auto m2 = full_algebra(2);
  auto e = with_index_data(trace_expectation(m2, m2));
  auto down = downward_data(e, identity(2));
  CHECK(down.p_algebra.dim() == 4);
  CHECK(expectation_distance(down.expectation, e) < 1e-9);
}

TEST_CASE("downward data rejects a projection with the wrong expectation value") {
  auto e = with_index_data(scalars_in_m2());
  // E(e11) = 1/2 but Ind^-1 = 1/4
  CHECK_THROWS_AS(downward_data(e, munit(2, 0, 0)), bad_projection_error);
}
