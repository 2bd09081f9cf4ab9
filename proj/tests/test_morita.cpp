#include <catch2/catch_amalgamated.hpp>

#include "morita/morita.hpp"

using namespace morita;

namespace {

std::vector<cmat> matrix_units2() {
  return {munit(2, 0, 0), munit(2, 0, 1), munit(2, 1, 0), munit(2, 1, 1)};
}

cond_expectation scalars_in_m2() {
  return with_index_data(trace_expectation(full_algebra(2), scalar_algebra(2)));
}

// the corner-compressed partner of the scalar inclusion, n = 2, p = f11 (x) 1
compression_pair s3_pair() {
  return pair_from_compression(scalars_in_m2(), 2, kron(munit(2, 0, 0), identity(2)));
}

morita_pair trivial_m2_pair() {
  auto m2 = full_algebra(2);
  return make_morita_pair(m2, m2, m2, m2, matrix_units2(), matrix_units2(), default_tol,
                          {identity(2)});
}

}  // namespace

TEST_CASE("the identity pair accepts the singleton frame") {
  auto m = trivial_m2_pair();
  CHECK(m.frame.size() == 1);
  CHECK(morita_pair_defect(m) < 1e-9);
}

TEST_CASE("standard form of the identity pair is one-dimensional") {
  auto m = trivial_m2_pair();
  auto sf = standard_form(m);
  CHECK(sf.n == 1);
  CHECK(hs_norm(sf.p - identity(2)) < 1e-9);
  // all maps act as the identity here
  rng gen(5);
  cmat d = gen.gauss_matrix(2, 2);
  CHECK(hs_norm(sf.psi_D.apply(d) - d) < 1e-9);
}

TEST_CASE("compression pair of the scalar inclusion is a valid Morita pair") {
  auto cp = s3_pair();
  CHECK(morita_pair_defect(cp.pair) < 1e-7);
  CHECK(cp.pair.B.dim() == 1);
  CHECK(cp.pair.D.dim() == 4);
  CHECK(cp.pair.X.dim() == 1);
  CHECK(cp.pair.Y.dim() == 4);
}

TEST_CASE("standard form maps intertwine actions and inner products") {
  auto cp = s3_pair();
  const auto& m = cp.pair;
  auto sf = standard_form(m);
  rng gen(9);
  for (int trial = 0; trial < 5; ++trial) {
    cmat a = gen.gauss_cplx() * identity(2);  // random element of the scalars
    cmat x = m.X.from_coords(gen.gauss_matrix(m.X.dim(), 1).col(0));
    cmat b = m.B.project(gen.gauss_matrix(2, 2));
    cmat lhs = sf.psi_X.apply(a * x * b);
    cmat rhs = amplify_element(a, sf.n) * sf.psi_X.apply(x) * sf.psi_B.apply(b);
    CHECK(hs_norm(lhs - rhs) < 1e-8);
  }
}

TEST_CASE("standard form of the mirrored compression pair exists") {
  auto cp = s3_pair();
  auto mir = mirror_pair(cp.pair);
  CHECK(morita_pair_defect(mir) < 1e-7);
  CHECK_NOTHROW(standard_form(mir));
}

TEST_CASE("transport across the identity pair gives back the identity maps") {
  auto m = trivial_m2_pair();
  auto ea = with_index_data(trace_expectation(full_algebra(2), full_algebra(2)));
  auto tr = transport_expectation(m, ea);
  rng gen(3);
  cmat d = gen.gauss_matrix(2, 2);
  CHECK(hs_norm(tr.eb.apply(d) - d) < 1e-8);
  CHECK(hs_norm(tr.ex.ex.apply(d) - d) < 1e-8);
}

TEST_CASE("transported expectation passes all axioms on the compression pair") {
  auto cp = s3_pair();
  auto ea = scalars_in_m2();
  auto tr = transport_expectation(cp.pair, ea);
  CHECK(verify_expectation(tr.eb).passes(1e-8));
  CHECK(check_bimodule_expectation(tr.ex).passes(1e-8));
}

TEST_CASE("transported index matches the compression formula") {
  auto cp = s3_pair();
  auto tr = transport_expectation(cp.pair, scalars_in_m2());
  CHECK(hs_norm(tr.index_b - tr.index_b_formula) < 1e-8);
  // Ind in A implies the transported index lies in B
  CHECK(cp.pair.B.contains(tr.index_b, 1e-7));
}

TEST_CASE("transporting back through the mirror reproduces the expectation") {
  auto cp = s3_pair();
  auto ea = scalars_in_m2();
  auto tr = transport_expectation(cp.pair, ea);
  auto mir = mirror_pair(cp.pair);
  auto back = transport_expectation(mir, tr.eb);
  CHECK(expectation_distance(back.eb, ea) < 1e-8);
}

TEST_CASE("linking algebra of the identity pair is a 2x2 matrix amplification") {
  auto m = trivial_m2_pair();
  auto link = linking_algebra(m);
  CHECK(link.l_lower.dim() == 16);
  auto want = amplify(full_algebra(2), 2);
  CHECK(link.l_lower.span().same_space_as(want.span(), 1e-8));
}

TEST_CASE("linking algebra corner and fullness conditions hold") {
  auto cp = s3_pair();
  auto link = linking_algebra(cp.pair);
  CHECK(link.l_upper.dim() ==
        cp.pair.C.dim() + cp.pair.D.dim() + 2 * cp.pair.Y.dim());
  CHECK(hs_norm(link.p + link.q - identity(4)) < 1e-12);
}

TEST_CASE("linking expectation is blockwise with a block-diagonal index") {
  auto cp = s3_pair();
  auto ea = scalars_in_m2();
  auto tr = transport_expectation(cp.pair, ea);
  auto link = linking_algebra(cp.pair);
  auto el = linking_expectation(cp.pair, link, ea, tr.eb, tr.ex.ex);
  REQUIRE(el.quasi.has_value());
  std::size_t k = std::max(ea.quasi->size(), tr.eb.quasi->size());
  CHECK(el.quasi->size() == k * k);
  // restricted to the upper corner it is E^A
  cmat c = munit(2, 0, 1);
  cmat big = detail::link_block(2, 2, c, cmat(), cmat(), cmat());
  cmat img = el.apply(big);
  CHECK(hs_norm(img.topLeftCorner(2, 2) - ea.apply(c)) < 1e-9);
  CHECK(hs_norm(cmat(img.bottomRightCorner(2, 2))) < 1e-9);
}

TEST_CASE("exchange identities hold on the compression pair") {
  auto cp = s3_pair();
  auto ea = scalars_in_m2();
  auto tr = transport_expectation(cp.pair, ea);
  auto rep = exchange_identities_check(cp.pair, ea, tr.eb, tr.ex.ex);
  CHECK(rep.worst() < 1e-8);
  // scalar case: the two indices carry the same scalar
  CHECK(std::abs((*ea.index)(0, 0) - (*tr.eb.index)(0, 0)) < 1e-8);
}

TEST_CASE("exchange identities reduce to the quasi-basis identity on X") {
  auto cp = s3_pair();
  auto ea = scalars_in_m2();
  auto tr = transport_expectation(cp.pair, ea);
  // elements of X are fixed by E^X, so reconstruction is the plain identity
  cmat x = cp.pair.X.element(0);
  cmat rec = cmat::Zero(2, 2);
  for (const auto& [u, us] : *ea.quasi) rec += u * tr.ex.ex.apply(us * x);
  CHECK(hs_norm(rec - x) < 1e-8);
}

TEST_CASE("composing a pair with its mirror stays a Morita pair") {
  auto cp = s3_pair();
  auto mir = mirror_pair(cp.pair);
  auto composed = compose_pairs(cp.pair, mir);
  CHECK(morita_pair_defect(composed) < 1e-7);
  CHECK(composed.C.span().same_space_as(cp.pair.C.span(), 1e-8));
}
