#include <catch2/catch_amalgamated.hpp>

#include "morita/fdalg.hpp"

using namespace morita;

namespace {

matrix_algebra diagonal_algebra(long d) {
  std::vector<cmat> gens;
  for (long i = 0; i < d; ++i) gens.push_back(munit(d, i, i));
  return make_algebra(d, gens);
}

}  // namespace

TEST_CASE("generate_algebra with no generators gives the scalars") {
  auto a = generate_algebra(2, {});
  CHECK(a.dim() == 1);
  CHECK(a.contains(identity(2)));
}

TEST_CASE("generate_algebra from a single matrix unit fills M2") {
  auto a = generate_algebra(2, {munit(2, 0, 1)});
  CHECK(a.dim() == 4);
}

TEST_CASE("generate_algebra from diag(1,-1) gives the diagonal algebra") {
  cmat g = cmat::Zero(2, 2);
  g(0, 0) = 1;
  g(1, 1) = -1;
  auto a = generate_algebra(2, {g});
  CHECK(a.dim() == 2);
  CHECK(a.contains(munit(2, 0, 0)));
  CHECK_FALSE(a.contains(munit(2, 0, 1)));
}

TEST_CASE("commutant of a simple algebra is the scalars") {
  auto m2 = full_algebra(2);
  auto c = commutant(m2, m2);
  CHECK(c.dim() == 1);
}

TEST_CASE("commutant of the scalars is everything") {
  auto c = commutant(scalar_algebra(2), full_algebra(2));
  CHECK(c.dim() == 4);
}

TEST_CASE("diagonal algebra is its own commutant in M2") {
  auto d2 = diagonal_algebra(2);
  auto c = commutant(d2, full_algebra(2));
  CHECK(c.dim() == 2);
  CHECK(c.contains(munit(2, 0, 0)));
}

TEST_CASE("commutant requires containment") {
  CHECK_THROWS_AS(commutant(full_algebra(2), diagonal_algebra(2)), not_subalgebra_error);
}

TEST_CASE("double commutant recovers the algebra") {
  auto d2 = diagonal_algebra(2);
  auto m2 = full_algebra(2);
  auto cc = commutant(commutant(d2, m2), m2);
  CHECK(cc.span().same_space_as(d2.span(), 1e-8));
}

TEST_CASE("block structure of a full matrix algebra") {
  auto bs = block_structure(full_algebra(2));
  REQUIRE(bs.blocks.size() == 1);
  CHECK(bs.blocks[0].k == 2);
  CHECK(bs.blocks[0].m == 1);
}

TEST_CASE("block structure of the diagonal algebra in M2") {
  auto bs = block_structure(diagonal_algebra(2));
  REQUIRE(bs.blocks.size() == 2);
  for (const auto& b : bs.blocks) {
    CHECK(b.k == 1);
    CHECK(b.m == 1);
  }
  CHECK(bs.total_dim() == 2);
}

TEST_CASE("block structure of the scalars in M4") {
  auto bs = block_structure(scalar_algebra(4));
  REQUIRE(bs.blocks.size() == 1);
  CHECK(bs.blocks[0].k == 1);
  CHECK(bs.blocks[0].m == 4);
}

TEST_CASE("dim(A) equals the sum of squared block dimensions") {
  auto alg = generate_algebra(3, {munit(3, 0, 1)});  // M2 + C inside M3
  auto bs = block_structure(alg);
  CHECK(bs.total_dim() == alg.dim());
}

TEST_CASE("inclusion matrix of equal algebras is [1]") {
  auto m2 = full_algebra(2);
  auto im = inclusion_matrix(m2, m2);
  REQUIRE(im.entries.rows() == 1);
  REQUIRE(im.entries.cols() == 1);
  CHECK(im.entries(0, 0) == 1);
}

TEST_CASE("scalars in M2 have inclusion multiplicity 2") {
  auto im = inclusion_matrix(scalar_algebra(2), full_algebra(2));
  CHECK(im.entries(0, 0) == 2);
}

TEST_CASE("diagonal algebra in M2 gives a 2x1 ladder") {
  auto im = inclusion_matrix(diagonal_algebra(2), full_algebra(2));
  REQUIRE(im.entries.rows() == 2);
  REQUIRE(im.entries.cols() == 1);
  CHECK(im.entries(0, 0) == 1);
  CHECK(im.entries(1, 0) == 1);
}

TEST_CASE("identity is a full projection in any algebra") {
  CHECK(is_full_projection(identity(2), full_algebra(2)));
  CHECK(is_full_projection(identity(2), diagonal_algebra(2)));
}

TEST_CASE("rank-one projection is full in a simple algebra") {
  CHECK(is_full_projection(munit(2, 0, 0), full_algebra(2)));
}

TEST_CASE("a summand projection is not full in a direct sum") {
  CHECK_FALSE(is_full_projection(munit(2, 0, 0), diagonal_algebra(2)));
}

TEST_CASE("is_full_projection rejects non-projections") {
  CHECK_THROWS_AS(is_full_projection(munit(2, 0, 1), full_algebra(2)), not_projection_error);
}

TEST_CASE("amplify by one returns the same algebra") {
  auto a = diagonal_algebra(2);
  auto b = amplify(a, 1);
  CHECK(b.dim() == a.dim());
  CHECK(b.span().same_space_as(a.span()));
}

TEST_CASE("amplified scalars have dimension n squared") {
  auto a = amplify(scalar_algebra(2), 2);
  CHECK(a.ambient() == 4);
  CHECK(a.dim() == 4);
}

TEST_CASE("amplified M2 has dimension 16") {
  CHECK(amplify(full_algebra(2), 2).dim() == 16);
}

TEST_CASE("cut_corner re-represents a corner unitally") {
  auto m2a = amplify(full_algebra(2), 2);  // M2(M2) = M4
  cmat p = kron(munit(2, 0, 0), identity(2));
  auto corner = cut_corner(m2a, p);
  CHECK(corner.ambient() == 2);
  CHECK(corner.dim() == 4);
  CHECK(corner.contains(identity(2)));
}
