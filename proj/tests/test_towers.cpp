#include <catch2/catch_amalgamated.hpp>

#include "morita/towers.hpp"

using namespace morita;

namespace {

cond_expectation scalars_in_m2() {
  return with_index_data(trace_expectation(full_algebra(2), scalar_algebra(2)));
}

struct fixture {
  morita_pair pair;
  cond_expectation ea, eb;
  linear_map ex;
};

// the compression pair of the scalar inclusion with its transported data
fixture s3_fixture() {
  fixture f;
  f.ea = scalars_in_m2();
  auto cp = pair_from_compression(f.ea, 2, kron(munit(2, 0, 0), identity(2)));
  auto tr = transport_expectation(cp.pair, f.ea);
  f.pair = cp.pair;
  f.eb = tr.eb;
  f.ex = tr.ex.ex;
  return f;
}

matrix_algebra diagonal_algebra(long d) {
  std::vector<cmat> gens;
  for (long i = 0; i < d; ++i) gens.push_back(munit(d, i, i));
  return make_algebra(d, gens);
}

// the diagonal inclusion paired with itself through the trivial bimodule
fixture s2_fixture() {
  fixture f;
  auto d2 = diagonal_algebra(2);
  auto m2 = full_algebra(2);
  f.ea = with_index_data(trace_expectation(m2, d2));
  f.eb = f.ea;
  std::vector<cmat> yspan, xspan;
  for (long i = 0; i < 4; ++i) yspan.push_back(m2.basis(i));
  for (long i = 0; i < 2; ++i) xspan.push_back(d2.basis(i));
  f.pair = make_morita_pair(d2, m2, d2, m2, yspan, xspan);
  f.ex = f.ea.ambient_map();
  return f;
}

}  // namespace

TEST_CASE("upward construction of the compression pair has the tower dimension") {
  auto f = s3_fixture();
  auto u = upward(f.pair, f.ea, f.eb, f.ex);
  // C_1 for the scalar inclusion is M_4, so Y_1 is 16-dimensional
  CHECK(u.y1.dim() == 16);
  CHECK(u.y1.left.dim() == 16);
  CHECK(u.phi_image.dim() == 4);
}

TEST_CASE("dual bimodule expectation maps the middle copy by the inverse index") {
  auto f = s3_fixture();
  auto u = upward(f.pair, f.ea, f.eb, f.ex);
  cmat ind_inv = psd_inverse(u.ind_a);
  for (long t = 0; t < f.pair.X.dim(); ++t) {
    cmat x = f.pair.X.element(t);
    cmat lhs = u.ey.ex.apply(u.embed_triple(identity(2), x, identity(2)));
    cmat rhs = u.phi.apply(ind_inv * x);
    CHECK(hs_norm(lhs - rhs) < 1e-8);
  }
}

TEST_CASE("phi does not depend on the quasi-basis choice") {
  auto f = s3_fixture();
  auto u = upward(f.pair, f.ea, f.eb, f.ex);
  auto qa2 = quasi_basis(f.ea, default_tol, 5);
  auto qb2 = quasi_basis(f.eb, default_tol, 9);
  auto phi2 = make_phi(f.pair, f.ex, qa2, qb2, u.cmod.embed_space, u.dmod.embed_space);
  for (long t = 0; t < f.pair.Y.dim(); ++t) {
    cmat y = f.pair.Y.element(t);
    CHECK(hs_norm(u.phi.apply(y) - phi2.apply(y)) < 1e-8);
  }
}

TEST_CASE("Jones compression identity holds") {
  auto f = s3_fixture();
  auto u = upward(f.pair, f.ea, f.eb, f.ex);
  CHECK(jones_compression_defect(u) < 1e-8);
}

TEST_CASE("upward construction works for the diagonal inclusion") {
  auto f = s2_fixture();
  auto u = upward(f.pair, f.ea, f.eb, f.ex);
  // C_1 of the pinching has dimension 8
  CHECK(u.y1.left.dim() == 8);
  CHECK(check_bimodule_expectation(u.ey).passes(1e-7));
  CHECK(jones_compression_defect(u) < 1e-8);
}

TEST_CASE("uniqueness applied to the construction itself gives the identity") {
  auto f = s3_fixture();
  auto u = upward(f.pair, f.ea, f.eb, f.ex);
  auto res = uniqueness_iso(u, u.y1.space, u.phi, u.ey.ex);
  CHECK(res.star_violation < 1e-8);
  double id_defect = 0.0;
  for (long t = 0; t < u.y1.dim(); ++t) {
    cmat w = u.y1.basis(t);
    id_defect = std::max(id_defect, hs_norm(res.theta.apply(w) - w));
  }
  CHECK(id_defect < 1e-8);
  CHECK(res.bimodule_defect < 1e-8);
  CHECK(res.inner_defect < 1e-8);
  CHECK(res.compose_defect < 1e-8);
}

TEST_CASE("the second level is again a Morita pair") {
  auto f = s3_fixture();
  auto u = upward(f.pair, f.ea, f.eb, f.ex);
  auto lvl2 = make_second_level(u);
  CHECK(morita_pair_defect(lvl2.pair) < 1e-6);
  CHECK(verify_expectation(lvl2.ec).passes(1e-7));
}

TEST_CASE("duality: the two column maps exchange the expectations") {
  auto f = s3_fixture();
  auto u = upward(f.pair, f.ea, f.eb, f.ex);
  auto lvl2 = make_second_level(u);
  auto u2 = upward(lvl2.pair, lvl2.ec, lvl2.ed, u.ey.ex);
  auto rep = duality_check(u, u2);
  INFO("commuting " << rep.commuting << " psi defects " << rep.psi_c1_defect << " "
                    << rep.psi_c2_defect << " " << rep.psi_d1_defect << " "
                    << rep.psi_d2_defect << " module " << rep.module_map_defect);
  CHECK(rep.p_projection_defect < 1e-8);
  CHECK(rep.p_full);
  CHECK(rep.q_full);
  CHECK(rep.dim_y2 == rep.dim_compressed);
  CHECK(rep.dim_y1 == rep.dim_compressed_small);
  CHECK(rep.commuting < 1e-8);
  CHECK(rep.passes(1e-7));
}

TEST_CASE("downward recovers the sub-inclusion at the tower level") {
  auto f = s3_fixture();
  auto u = upward(f.pair, f.ea, f.eb, f.ex);
  auto rep = updown_relation_check(u);
  INFO("z=x " << rep.z_equals_x << " commutant " << rep.a_is_commutant << " jones "
              << rep.jones_value << " predual " << rep.predual_matches << " roundtrip "
              << rep.roundtrip_theta);
  CHECK(rep.z_equals_x < 1e-8);
  CHECK(rep.a_is_commutant < 1e-8);
  CHECK(rep.jones_value < 1e-8);
  CHECK(rep.predual_matches < 1e-8);
  CHECK(rep.roundtrip_theta < 1e-7);
  CHECK(rep.roundtrip_blocks_match);
  CHECK(rep.rebuilt_y_dim == rep.original_y_dim);
}

TEST_CASE("updown relation holds for the diagonal inclusion") {
  auto f = s2_fixture();
  auto u = upward(f.pair, f.ea, f.eb, f.ex);
  auto rep = updown_relation_check(u);
  CHECK(rep.z_equals_x < 1e-8);
  CHECK(rep.predual_matches < 1e-8);
  CHECK(rep.roundtrip_blocks_match);
}
