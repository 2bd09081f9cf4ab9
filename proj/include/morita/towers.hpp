#pragma once

#include "morita/morita.hpp"

namespace morita {

// ---------------------------------------------------------------------------
// the upward basic construction
// ---------------------------------------------------------------------------

/// Y_1 = C (x)_A X (x)_B D~ together with the towers it lives over, the
/// embedding phi of Y, and the dual bimodule expectation E^Y. The tower
/// algebras act on Y_1 through the concretizations of the two base modules;
/// embed_c and embed_d carry C and D into those copies.
struct upward_data {
  morita_pair base;
  cond_expectation ea, eb;  ///< base expectations, index data attached
  linear_map ex;            ///< base bimodule expectation Y -> X

  basic_construction_t bc_a, bc_b;
  cond_expectation ec_gns, ed_gns;  ///< dual expectations on the towers

  realized_module cmod;  ///< C as a (C_1, A) bimodule
  realized_module dmod;  ///< D as a (D_1, B) bimodule

  corner_bimodule y1;    ///< left algebra: tower copy of C_1; right: of D_1
  subspace phi_image;    ///< phi(Y) inside y1
  linear_map phi;        ///< Y -> y1 space
  linear_map embed_c, embed_d;
  cmat jones_a, jones_b;
  cmat ind_a, ind_b;
  cond_expectation ec, ed;  ///< duals transported onto the y1 algebras
  bimodule_expectation ey;

  cmat embed_triple(const cmat& c, const cmat& x, const cmat& d) const {
    return cmod.embed_space.apply(c) * x * dmod.embed_space.apply(d).adjoint();
  }
};

/// phi(y) = sum_ij u_i (x) E^X(u_i^* y v_j) (x) v_j~ for the given
/// quasi-bases, as a map into the concrete Y_1.
inline linear_map make_phi(const morita_pair& m, const linear_map& ex,
                           const std::vector<std::pair<cmat, cmat>>& qa,
                           const std::vector<std::pair<cmat, cmat>>& qb,
                           const linear_map& cspace, const linear_map& dspace,
                           double tol = default_tol) {
  std::vector<cmat> ins, outs;
  for (long t = 0; t < m.Y.dim(); ++t) {
    cmat y = m.Y.element(t);
    cmat img;
    bool first = true;
    for (const auto& [u, us] : qa)
      for (const auto& [v, vs] : qb) {
        cmat mid = ex.apply(us * y * v);
        cmat term = cspace.apply(u) * mid * dspace.apply(v).adjoint();
        if (first) {
          img = term;
          first = false;
        } else {
          img += term;
        }
      }
    ins.push_back(y);
    outs.push_back(img);
  }
  double resid = 0.0;
  linear_map phi = linear_map::from_samples(ins, outs, tol, &resid);
  if (resid > 1e-7) throw inconsistent_span_error("phi is not linear on Y");
  return phi;
}

namespace detail {

/// Transport an expectation through an injective algebra map: the result
/// acts on the image algebra.
inline cond_expectation transport_through(const cond_expectation& e,
                                          const linear_map& embed,
                                          const matrix_algebra& new_source,
                                          const matrix_algebra& new_target,
                                          double tol = default_tol) {
  linear_map inv = embed.pseudo_inverse(tol);
  cmat action(new_source.dim(), new_source.dim());
  for (long i = 0; i < new_source.dim(); ++i) {
    cmat img = embed.apply(e.apply(inv.apply(new_source.basis(i))));
    action.col(i) = new_source.span().coords(img);
  }
  return cond_expectation(new_source, new_target, std::move(action));
}

}  // namespace detail

inline upward_data upward(const morita_pair& m, const cond_expectation& ea,
                          const cond_expectation& eb, const linear_map& ex,
                          double tol = default_tol) {
  if (!ea.quasi || !ea.index || !eb.quasi || !eb.index)
    throw axiom_violation_error("upward needs expectations with index data attached");
  upward_data u;
  u.base = m;
  u.ea = ea;
  u.eb = eb;
  u.ex = ex;
  u.ind_a = *ea.index;
  u.ind_b = *eb.index;
  u.bc_a = basic_construction(ea, tol);
  u.bc_b = basic_construction(eb, tol);
  u.ec_gns = dual_expectation(u.bc_a, ea, tol);
  u.ed_gns = dual_expectation(u.bc_b, eb, tol);
  u.cmod = realize_base_module(u.bc_a, ea, tol);
  u.dmod = realize_base_module(u.bc_b, eb, tol);
  u.embed_c = u.cmod.embed_left.compose(u.bc_a.embed);
  u.embed_d = u.dmod.embed_left.compose(u.bc_b.embed);
  u.jones_a = u.cmod.embed_left.apply(u.bc_a.jones);
  u.jones_b = u.dmod.embed_left.apply(u.bc_b.jones);

  // Y_1 spanned by the concrete triples c x d~
  std::vector<cmat> triples;
  triples.reserve(m.C.dim() * m.X.dim() * m.D.dim());
  for (long i = 0; i < m.C.dim(); ++i) {
    cmat lc = u.cmod.embed_space.apply(m.C.basis(i));
    for (long j = 0; j < m.X.dim(); ++j) {
      cmat lcx = lc * m.X.element(j);
      for (long k = 0; k < m.D.dim(); ++k)
        triples.push_back(lcx * u.dmod.embed_space.apply(m.D.basis(k)).adjoint());
    }
  }
  u.y1 = make_bimodule(u.cmod.module.left, u.dmod.module.left, triples, tol);

  u.phi = make_phi(m, ex, *ea.quasi, *eb.quasi, u.cmod.embed_space, u.dmod.embed_space, tol);
  {
    std::vector<cmat> imgs;
    for (long t = 0; t < m.Y.dim(); ++t) imgs.push_back(u.phi.apply(m.Y.element(t)));
    u.phi_image = orthonormalize(imgs, tol, u.y1.rows(), u.y1.cols());
    if (u.phi_image.dim() != m.Y.dim())
      throw axiom_violation_error("phi is not injective on Y");
  }

  // phi intertwines the actions and both inner products
  double worst = 0.0;
  for (long i = 0; i < m.Y.dim(); ++i) {
    cmat y = m.Y.element(i);
    cmat py = u.phi.apply(y);
    for (long t = 0; t < m.C.dim(); ++t) {
      cmat c = m.C.basis(t);
      worst = std::max(worst, hs_norm(u.phi.apply(c * y) - u.embed_c.apply(c) * py));
    }
    for (long t = 0; t < m.D.dim(); ++t) {
      cmat d = m.D.basis(t);
      worst = std::max(worst, hs_norm(u.phi.apply(y * d) - py * u.embed_d.apply(d)));
    }
    for (long j = 0; j < m.Y.dim(); ++j) {
      cmat z = m.Y.element(j);
      cmat pz = u.phi.apply(z);
      worst = std::max(worst, hs_norm(py * pz.adjoint() -
                                      u.embed_c.apply(y * z.adjoint())));
      worst = std::max(worst, hs_norm(py.adjoint() * pz -
                                      u.embed_d.apply(y.adjoint() * z)));
    }
  }
  if (worst > 1e-6)
    throw axiom_violation_error("phi fails to intertwine the bimodule structure (defect " +
                                std::to_string(worst) + ")");

  // fullness at the new level: span{ <Y1, phi(Y)> } has the tower dimensions
  {
    std::vector<cmat> lspan, rspan;
    for (long i = 0; i < u.y1.dim(); ++i)
      for (long t = 0; t < m.Y.dim(); ++t) {
        cmat py = u.phi.apply(m.Y.element(t));
        lspan.push_back(u.y1.basis(i) * py.adjoint());
        rspan.push_back(u.y1.basis(i).adjoint() * py);
      }
    if (orthonormalize(lspan, tol, u.y1.rows(), u.y1.rows()).dim() != u.y1.left.dim() ||
        orthonormalize(rspan, tol, u.y1.cols(), u.y1.cols()).dim() != u.y1.right.dim())
      throw axiom_violation_error("Y_1 is not full over the towers");
  }

  u.ec = detail::transport_through(u.ec_gns, u.cmod.embed_left, u.y1.left,
                                   u.cmod.embedded_base, tol);
  u.ed = detail::transport_through(u.ed_gns, u.dmod.embed_left, u.y1.right,
                                   u.dmod.embedded_base, tol);

  // E^Y on the spanning triples: c (x) x (x) d~ -> Ind^-1 c x d^*
  cmat ind_a_inv = psd_inverse(0.5 * (u.ind_a + u.ind_a.adjoint()), tol);
  {
    std::vector<cmat> ins, outs;
    for (long i = 0; i < m.C.dim(); ++i)
      for (long j = 0; j < m.X.dim(); ++j)
        for (long k = 0; k < m.D.dim(); ++k) {
          cmat c = m.C.basis(i);
          cmat x = m.X.element(j);
          cmat d = m.D.basis(k);
          ins.push_back(u.embed_triple(c, x, d));
          outs.push_back(u.phi.apply(ind_a_inv * c * x * d.adjoint()));
        }
    double resid = 0.0;
    linear_map eymap = linear_map::from_samples(ins, outs, tol, &resid);
    if (resid > 1e-6)
      throw inconsistent_span_error("dual bimodule expectation is ill-defined");
    u.ey.ex = std::move(eymap);
  }
  u.ey.big = u.y1;
  u.ey.small = corner_bimodule{u.cmod.embedded_base, u.dmod.embedded_base, u.phi_image};
  u.ey.ea = u.ec;
  u.ey.eb = u.ed;
  auto rep = check_bimodule_expectation(u.ey);
  if (!rep.passes(1e-6))
    throw axiom_violation_error("E^Y fails the bimodule expectation axioms (worst " +
                                std::to_string(rep.worst()) + ")");
  return u;
}

/// The Jones compression identity e_A phi(y) e_B = 1 (x) E^X(y) (x) 1~,
/// returned as the worst violation over the basis of Y.
inline double jones_compression_defect(const upward_data& u) {
  double worst = 0.0;
  const auto& m = u.base;
  for (long t = 0; t < m.Y.dim(); ++t) {
    cmat y = m.Y.element(t);
    cmat lhs = u.jones_a * u.phi.apply(y) * u.jones_b;
    cmat rhs = u.embed_triple(identity(m.dc()), u.ex.apply(y), identity(m.dd()));
    worst = std::max(worst, hs_norm(lhs - rhs));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// uniqueness of the upward basic construction
// ---------------------------------------------------------------------------

struct uniqueness_result {
  linear_map theta;        ///< W -> Y_1
  double star_violation = 0;
  double bimodule_defect = 0;
  double inner_defect = 0;
  double compose_defect = 0;  ///< F^Y = E^Y after theta, and theta phi_W = phi
};

/// theta(w) = Ind sum_ij u_i (x) E^X(F^Y(e_A u_i^* w v_j e_B)) (x) v_j~ for a
/// candidate bimodule W over the same tower algebras, with embedding phi_W of
/// Y and candidate expectation F^Y satisfying the compression condition.
inline uniqueness_result uniqueness_iso(const upward_data& u, const subspace& wspace,
                                        const linear_map& phi_w, const linear_map& fy,
                                        double tol = default_tol) {
  const auto& m = u.base;
  if (!m.A.contains(u.ind_a, 1e-7))
    throw index_not_in_subalgebra_error("uniqueness needs Ind_W(E^A) in A");
  cmat ind_a_inv = psd_inverse(0.5 * (u.ind_a + u.ind_a.adjoint()), tol);

  uniqueness_result out;
  for (long t = 0; t < m.Y.dim(); ++t) {
    cmat y = m.Y.element(t);
    cmat lhs = fy.apply(u.jones_a * phi_w.apply(y) * u.jones_b);
    cmat rhs = phi_w.apply(ind_a_inv * u.ex.apply(y));
    out.star_violation = std::max(out.star_violation, hs_norm(lhs - rhs));
  }
  if (out.star_violation > 1e-6)
    throw star_condition_error("candidate expectation violates the compression condition");

  linear_map phi_w_inv = phi_w.pseudo_inverse(tol);
  const auto& qa = *u.ea.quasi;
  const auto& qb = *u.eb.quasi;
  std::vector<cmat> ins, outs;
  for (long t = 0; t < wspace.dim(); ++t) {
    cmat w = wspace.element(t);
    cmat img = cmat::Zero(u.y1.rows(), u.y1.cols());
    for (const auto& [ui, uis] : qa)
      for (const auto& [vj, vjs] : qb) {
        cmat inner = fy.apply(u.jones_a * u.embed_c.apply(uis) * w *
                              u.embed_d.apply(vj) * u.jones_b);
        cmat x = u.ex.apply(phi_w_inv.apply(inner));
        img += u.embed_triple(u.ind_a * ui, x, vj);
      }
    ins.push_back(w);
    outs.push_back(img);
  }
  double resid = 0.0;
  out.theta = linear_map::from_samples(ins, outs, tol, &resid);
  if (resid > 1e-6) throw inconsistent_span_error("theta is not linear");

  // bijectivity and inner products
  {
    std::vector<cmat> imgs;
    for (const auto& o : outs) imgs.push_back(o);
    subspace img_span = orthonormalize(imgs, tol, u.y1.rows(), u.y1.cols());
    if (img_span.dim() != wspace.dim() || img_span.dim() != u.y1.dim())
      throw axiom_violation_error("theta is not a bijection onto Y_1");
  }
  for (std::size_t i = 0; i < ins.size(); ++i)
    for (std::size_t j = 0; j < ins.size(); ++j) {
      out.inner_defect = std::max(
          out.inner_defect, hs_norm(outs[i] * outs[j].adjoint() -
                                    ins[i] * ins[j].adjoint()));
      out.inner_defect = std::max(
          out.inner_defect, hs_norm(outs[i].adjoint() * outs[j] -
                                    ins[i].adjoint() * ins[j]));
    }

  // bimodule property against spanning elements c_1 e_A c_2 and d_1 e_B d_2
  rng gen(23);
  auto random_in = [&gen](const matrix_algebra& alg) {
    cmat m_ = cmat::Zero(alg.ambient(), alg.ambient());
    for (long i = 0; i < alg.dim(); ++i) m_ += gen.gauss_cplx() * alg.basis(i);
    return m_;
  };
  for (int s = 0; s < 10; ++s) {
    cmat z = u.embed_c.apply(random_in(m.C)) * u.jones_a * u.embed_c.apply(random_in(m.C));
    cmat zd = u.embed_d.apply(random_in(m.D)) * u.jones_b * u.embed_d.apply(random_in(m.D));
    cmat w = wspace.from_coords(gen.gauss_matrix(wspace.dim(), 1).col(0));
    double scale = std::max(1.0, op_norm(z) * hs_norm(w));
    out.bimodule_defect = std::max(
        out.bimodule_defect, hs_norm(out.theta.apply(z * w) - z * out.theta.apply(w)) / scale);
    double scale_d = std::max(1.0, op_norm(zd) * hs_norm(w));
    out.bimodule_defect = std::max(
        out.bimodule_defect,
        hs_norm(out.theta.apply(w * zd) - out.theta.apply(w) * zd) / scale_d);
  }

  // F^Y = E^Y after theta, and theta carries the Y-copy of W onto phi(Y)
  for (long t = 0; t < m.Y.dim(); ++t) {
    cmat y = m.Y.element(t);
    out.compose_defect = std::max(
        out.compose_defect, hs_norm(out.theta.apply(phi_w.apply(y)) - u.phi.apply(y)));
  }
  for (long t = 0; t < wspace.dim(); ++t) {
    cmat w = wspace.element(t);
    out.compose_defect = std::max(
        out.compose_defect,
        hs_norm(u.ey.ex.apply(out.theta.apply(w)) - out.theta.apply(fy.apply(w))));
  }
  return out;
}

// ---------------------------------------------------------------------------
// the second level
// ---------------------------------------------------------------------------

struct second_level {
  morita_pair pair;        ///< (C in C_1) ~ (D in D_1) via Y_1 and phi(Y)
  cond_expectation ec, ed; ///< with index data
};

/// The tower pair one level up, ready to be fed back into upward.
inline second_level make_second_level(const upward_data& u, double tol = default_tol) {
  second_level out;
  std::vector<cmat> yspan, xspan;
  for (long i = 0; i < u.y1.dim(); ++i) yspan.push_back(u.y1.basis(i));
  for (long i = 0; i < u.phi_image.dim(); ++i) xspan.push_back(u.phi_image.element(i));
  out.pair = make_morita_pair(u.cmod.embedded_base, u.y1.left, u.dmod.embedded_base,
                              u.y1.right, yspan, xspan, tol);
  out.ec = with_index_data(u.ec, tol);
  out.ed = with_index_data(u.ed, tol);
  return out;
}

// ---------------------------------------------------------------------------
// duality
// ---------------------------------------------------------------------------

struct duality_report {
  double p_projection_defect = 0;
  double q_projection_defect = 0;
  bool p_full = false, q_full = false;
  long dim_y2 = 0;
  long dim_compressed = 0;      ///< dim p M_k(Y) q
  long dim_y1 = 0;
  long dim_compressed_small = 0;  ///< dim p M_k(X) q
  double psi_c1_defect = 0;     ///< C_1 onto p M_k(A) p
  double psi_c2_defect = 0;     ///< C_2 onto p M_k(C) p
  double psi_d1_defect = 0;
  double psi_d2_defect = 0;
  double module_map_defect = 0;  ///< the column maps intertwine actions/inner products
  double commuting = 0;          ///< E o Phibar_1 = Phibar o E^{Y_1} on random elements

  bool passes(double threshold) const {
    return p_full && q_full && dim_y2 == dim_compressed && dim_y1 == dim_compressed_small &&
           std::max({p_projection_defect, q_projection_defect, psi_c1_defect, psi_c2_defect,
                     psi_d1_defect, psi_d2_defect, module_map_defect, commuting}) <= threshold;
  }
};

namespace detail {

/// Verify a map between algebras is a *-isomorphism onto the target span;
/// returns the worst defect. The spanning sets may be redundant, so
/// injectivity is read off the two span dimensions. Product pairs are
/// strided once the spanning set gets large.
inline double iso_defect(const std::vector<cmat>& src, const std::vector<cmat>& img,
                         const linear_map& map, const subspace& target_span, double tol) {
  double worst = 0.0;
  subspace src_span = orthonormalize(src, tol, src.front().rows(), src.front().cols());
  subspace img_span = orthonormalize(img, tol, target_span.rows(), target_span.cols());
  if (img_span.dim() != src_span.dim() || !img_span.same_space_as(target_span, 1e-6))
    return 1.0;
  const std::size_t n = src.size();
  const std::size_t stride = std::max<std::size_t>(1, (n * n) / 4096);
  for (std::size_t i = 0; i < n; ++i)
    worst = std::max(worst, hs_norm(map.apply(src[i].adjoint()) - img[i].adjoint()));
  for (std::size_t t = 0; t < n * n; t += stride) {
    std::size_t i = t / n, j = t % n;
    worst = std::max(worst, hs_norm(map.apply(src[i] * src[j]) - img[i] * img[j]));
  }
  return worst;
}

}  // namespace detail

/// The duality data: p = [E^A(u_i^* u_j)], q = [E^B(v_i^* v_j)] with the two
/// quasi-bases padded to a common size k, the block-column isomorphisms, and
/// the commuting square E o Phibar_1 = Phibar o E^{Y_1} checked on random
/// elements of Y_2.
inline duality_report duality_check(const upward_data& u, const upward_data& u2,
                                    long samples = 20, std::uint64_t seed = 17,
                                    double tol = default_tol) {
  const auto& m = u.base;
  if (!m.A.contains(u.ind_a, 1e-7))
    throw index_not_in_subalgebra_error("duality needs Ind_W(E^A) in A");
  duality_report rep;
  const long dc = m.dc(), dd = m.dd();

  auto qa = *u.ea.quasi;
  auto qb = *u.eb.quasi;
  const long k = static_cast<long>(std::max(qa.size(), qb.size()));
  while (static_cast<long>(qa.size()) < k)
    qa.emplace_back(cmat::Zero(dc, dc), cmat::Zero(dc, dc));
  while (static_cast<long>(qb.size()) < k)
    qb.emplace_back(cmat::Zero(dd, dd), cmat::Zero(dd, dd));

  // the frame projections
  cmat p = cmat::Zero(k * dc, k * dc), q = cmat::Zero(k * dd, k * dd);
  for (long i = 0; i < k; ++i)
    for (long j = 0; j < k; ++j) {
      p.block(i * dc, j * dc, dc, dc) = u.ea.apply(qa[i].first.adjoint() * qa[j].first);
      q.block(i * dd, j * dd, dd, dd) = u.eb.apply(qb[i].first.adjoint() * qb[j].first);
    }
  rep.p_projection_defect = std::max(hs_norm(p * p - p), hs_norm(p - p.adjoint()));
  rep.q_projection_defect = std::max(hs_norm(q * q - q), hs_norm(q - q.adjoint()));
  matrix_algebra mka = amplify(m.A, k, tol);
  matrix_algebra mkb = amplify(m.B, k, tol);
  rep.p_full = is_full_projection(p, mka, tol);
  rep.q_full = is_full_projection(q, mkb, tol);

  // compressed strips p M_k(X) q and p M_k(Y) q
  auto block_lift = [&](const cmat& x, long i, long j) {
    cmat out = cmat::Zero(k * dc, k * dd);
    out.block(i * dc, j * dd, dc, dd) = x;
    return out;
  };
  auto compress = [&](const subspace& sp) {
    std::vector<cmat> gens;
    for (long i = 0; i < k; ++i)
      for (long j = 0; j < k; ++j)
        for (long t = 0; t < sp.dim(); ++t)
          gens.push_back(p * block_lift(sp.element(t), i, j) * q);
    return orthonormalize(gens, tol, k * dc, k * dd);
  };
  subspace pxq = compress(m.X);
  subspace pyq = compress(m.Y);
  rep.dim_y1 = u.y1.dim();
  rep.dim_compressed_small = pxq.dim();
  rep.dim_y2 = u2.y1.dim();
  rep.dim_compressed = pyq.dim();

  // Phibar : Y_1 -> p M_k(X) q on the spanning triples
  linear_map phibar;
  {
    std::vector<cmat> ins, outs;
    for (long a = 0; a < m.C.dim(); ++a)
      for (long b = 0; b < m.X.dim(); ++b)
        for (long c = 0; c < m.D.dim(); ++c) {
          cmat cc = m.C.basis(a), xx = m.X.element(b), dd_ = m.D.basis(c);
          ins.push_back(u.embed_triple(cc, xx, dd_));
          cmat img = cmat::Zero(k * dc, k * dd);
          for (long i = 0; i < k; ++i)
            for (long j = 0; j < k; ++j)
              img.block(i * dc, j * dd, dc, dd) =
                  u.ea.apply(qa[i].first.adjoint() * cc) * xx *
                  u.eb.apply(dd_.adjoint() * qb[j].first);
          outs.push_back(img);
        }
    double resid = 0.0;
    phibar = linear_map::from_samples(ins, outs, tol, &resid);
    if (resid > 1e-6) throw inconsistent_span_error("the level-one column map is not linear");
    std::vector<cmat> imgs = outs;
    subspace img_span = orthonormalize(imgs, tol, k * dc, k * dd);
    if (img_span.dim() != u.y1.dim() || !img_span.same_space_as(pxq, 1e-6))
      rep.module_map_defect = std::max(rep.module_map_defect, 1.0);
  }

  // dual quasi-basis elements w_i = u_i e_A Ind^(1/2), z_j = v_j e_B Ind^(1/2)
  cmat ind_a_sqrt = psd_sqrt(0.5 * (u.ind_a + u.ind_a.adjoint()), tol);
  cmat ind_b_sqrt = psd_sqrt(0.5 * (u.ind_b + u.ind_b.adjoint()), tol);
  std::vector<cmat> w(k), z(k);
  for (long i = 0; i < k; ++i) {
    w[i] = u.embed_c.apply(qa[i].first) * u.jones_a * u.embed_c.apply(ind_a_sqrt);
    z[i] = u.embed_d.apply(qb[i].first) * u.jones_b * u.embed_d.apply(ind_b_sqrt);
  }
  linear_map unembed_c = u.embed_c.pseudo_inverse(tol);
  linear_map unembed_d = u.embed_d.pseudo_inverse(tol);
  auto ec_pull = [&](const cmat& z1) { return unembed_c.apply(u.ec.apply(z1)); };
  auto ed_pull = [&](const cmat& z1) { return unembed_d.apply(u.ed.apply(z1)); };

  // Psi_{C_1} : C_1 -> p M_k(A) p and Psi_{D_1}
  auto corner_span = [&](const matrix_algebra& alg, const cmat& unit) {
    std::vector<cmat> gens;
    for (long i = 0; i < alg.dim(); ++i) gens.push_back(unit * alg.basis(i) * unit);
    return orthonormalize(gens, tol, unit.rows(), unit.rows());
  };
  {
    std::vector<cmat> src, img;
    for (long a = 0; a < m.C.dim(); ++a)
      for (long b = 0; b < m.C.dim(); ++b) {
        cmat c1 = m.C.basis(a), c2 = m.C.basis(b);
        src.push_back(u.embed_c.apply(c1) * u.jones_a * u.embed_c.apply(c2));
        cmat blockm = cmat::Zero(k * dc, k * dc);
        for (long i = 0; i < k; ++i)
          for (long j = 0; j < k; ++j)
            blockm.block(i * dc, j * dc, dc, dc) =
                u.ea.apply(qa[i].first.adjoint() * c1) * u.ea.apply(c2 * qa[j].first);
        img.push_back(blockm);
      }
    double resid = 0.0;
    linear_map psi = linear_map::from_samples(src, img, tol, &resid);
    rep.psi_c1_defect =
        std::max(resid, detail::iso_defect(src, img, psi, corner_span(mka, p), tol));
  }
  {
    std::vector<cmat> src, img;
    for (long a = 0; a < m.D.dim(); ++a)
      for (long b = 0; b < m.D.dim(); ++b) {
        cmat d1 = m.D.basis(a), d2 = m.D.basis(b);
        src.push_back(u.embed_d.apply(d1) * u.jones_b * u.embed_d.apply(d2));
        cmat blockm = cmat::Zero(k * dd, k * dd);
        for (long i = 0; i < k; ++i)
          for (long j = 0; j < k; ++j)
            blockm.block(i * dd, j * dd, dd, dd) =
                u.eb.apply(qb[i].first.adjoint() * d1) * u.eb.apply(d2 * qb[j].first);
        img.push_back(blockm);
      }
    double resid = 0.0;
    linear_map psi = linear_map::from_samples(src, img, tol, &resid);
    rep.psi_d1_defect =
        std::max(resid, detail::iso_defect(src, img, psi, corner_span(mkb, q), tol));
  }

  // Psi_{C_2} : C_2 -> p M_k(C) p via the dual quasi-basis, and the D side
  matrix_algebra mkc = amplify(m.C, k, tol);
  matrix_algebra mkd = amplify(m.D, k, tol);
  {
    std::vector<cmat> src, img;
    for (long a = 0; a < u.y1.left.dim(); ++a)
      for (long b = 0; b < u.y1.left.dim(); ++b) {
        if (u.y1.left.dim() > 16 && (a * u.y1.left.dim() + b) % 7 != 0)
          continue;  // sampled pairs keep the check affordable on big towers
        cmat z1 = u.y1.left.basis(a), z2 = u.y1.left.basis(b);
        src.push_back(u2.embed_c.apply(z1) * u2.jones_a * u2.embed_c.apply(z2));
        cmat blockm = cmat::Zero(k * dc, k * dc);
        for (long i = 0; i < k; ++i)
          for (long j = 0; j < k; ++j)
            blockm.block(i * dc, j * dc, dc, dc) =
                ec_pull(w[i].adjoint() * z1) * ec_pull(z2 * w[j]);
        img.push_back(blockm);
      }
    double resid = 0.0;
    linear_map psi = linear_map::from_samples(src, img, tol, &resid);
    rep.psi_c2_defect =
        std::max(resid, detail::iso_defect(src, img, psi, corner_span(mkc, p), tol));
  }
  {
    std::vector<cmat> src, img;
    for (long a = 0; a < u.y1.right.dim(); ++a)
      for (long b = 0; b < u.y1.right.dim(); ++b) {
        if (u.y1.right.dim() > 16 && (a * u.y1.right.dim() + b) % 7 != 0) continue;
        cmat z1 = u.y1.right.basis(a), z2 = u.y1.right.basis(b);
        src.push_back(u2.embed_d.apply(z1) * u2.jones_b * u2.embed_d.apply(z2));
        cmat blockm = cmat::Zero(k * dd, k * dd);
        for (long i = 0; i < k; ++i)
          for (long j = 0; j < k; ++j)
            blockm.block(i * dd, j * dd, dd, dd) =
                ed_pull(z[i].adjoint() * z1) * ed_pull(z2 * z[j]);
        img.push_back(blockm);
      }
    double resid = 0.0;
    linear_map psi = linear_map::from_samples(src, img, tol, &resid);
    rep.psi_d2_defect =
        std::max(resid, detail::iso_defect(src, img, psi, corner_span(mkd, q), tol));
  }

  // the column module maps: Phi_C(c) = [E^A(u_i^* c)]_i intertwines the inner
  // products, sampled against the base expectation
  {
    rng gen(seed ^ 0x5bd1u);
    for (int s = 0; s < 10; ++s) {
      cmat c1 = cmat::Zero(dc, dc), c2 = cmat::Zero(dc, dc);
      for (long i = 0; i < m.C.dim(); ++i) {
        c1 += gen.gauss_cplx() * m.C.basis(i);
        c2 += gen.gauss_cplx() * m.C.basis(i);
      }
      cmat col1(k * dc, dc), col2(k * dc, dc);
      for (long i = 0; i < k; ++i) {
        col1.middleRows(i * dc, dc) = u.ea.apply(qa[i].first.adjoint() * c1);
        col2.middleRows(i * dc, dc) = u.ea.apply(qa[i].first.adjoint() * c2);
      }
      double scale = std::max(1.0, hs_norm(c1) * hs_norm(c2));
      rep.module_map_defect =
          std::max(rep.module_map_defect,
                   hs_norm(col1.adjoint() * col2 - u.ea.apply(c1.adjoint() * c2)) / scale);
    }
  }

  // Phibar_1 : Y_2 -> p M_k(Y) q on the level-two spanning triples
  linear_map phibar1;
  {
    const auto& m2 = u2.base;
    linear_map phi_inv = u.phi.pseudo_inverse(tol);
    std::vector<cmat> ins, outs;
    for (long a = 0; a < m2.C.dim(); ++a)
      for (long b = 0; b < m2.X.dim(); ++b)
        for (long c = 0; c < m2.D.dim(); ++c) {
          cmat c1 = m2.C.basis(a);           // element of C_1 (concretized)
          cmat ymid = m2.X.element(b);       // element of phi(Y)
          cmat d1 = m2.D.basis(c);           // element of D_1
          ins.push_back(u2.embed_triple(c1, ymid, d1));
          cmat ybase = phi_inv.apply(ymid);  // back in Y
          cmat img = cmat::Zero(k * dc, k * dd);
          for (long i = 0; i < k; ++i)
            for (long j = 0; j < k; ++j)
              img.block(i * dc, j * dd, dc, dd) = ec_pull(w[i].adjoint() * c1) * ybase *
                                                  ed_pull(d1.adjoint() * z[j]);
          outs.push_back(img);
        }
    double resid = 0.0;
    phibar1 = linear_map::from_samples(ins, outs, tol, &resid);
    if (resid > 1e-6) throw inconsistent_span_error("the level-two column map is not linear");
    subspace img_span = orthonormalize(outs, tol, k * dc, k * dd);
    if (img_span.dim() != u2.y1.dim() || !img_span.same_space_as(pyq, 1e-6))
      rep.module_map_defect = std::max(rep.module_map_defect, 1.0);
  }

  // the commuting square on random elements of Y_2
  {
    rng gen(seed);
    linear_map phi2_inv = u2.phi.pseudo_inverse(tol);
    for (long s = 0; s < samples; ++s) {
      cmat wel = u2.y1.space.from_coords(gen.gauss_matrix(u2.y1.dim(), 1).col(0));
      // left route: compress then apply E^X blockwise
      cmat left = phibar1.apply(wel);
      cmat left_img(k * dc, k * dd);
      for (long i = 0; i < k; ++i)
        for (long j = 0; j < k; ++j)
          left_img.block(i * dc, j * dd, dc, dd) =
              u.ex.apply(left.block(i * dc, j * dd, dc, dd));
      // right route: E^{Y_1} then compress
      cmat right = phibar.apply(phi2_inv.apply(u2.ey.ex.apply(wel)));
      double scale = std::max(1.0, hs_norm(wel));
      rep.commuting = std::max(rep.commuting, hs_norm(left_img - right) / scale);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// the downward basic construction
// ---------------------------------------------------------------------------

struct downward_t {
  matrix_algebra P, Q;
  cond_expectation ep, eq;  ///< A -> P and B -> Q, index data attached
  subspace Z;               ///< { x in X : p x = x q }
  linear_map ez;            ///< E^Z(x) = Ind E^X(p x q)
  morita_pair pair;         ///< (P in A) ~ (Q in B) via X and Z
};

inline downward_t downward(const morita_pair& m, const cond_expectation& ea,
                           const cond_expectation& eb, const linear_map& ex, const cmat& p,
                           const cmat& q, double tol = default_tol) {
  if (!ea.index || !eb.index)
    throw axiom_violation_error("downward needs expectations with index data");
  if (!m.A.contains(*ea.index, 1e-7))
    throw index_not_in_subalgebra_error("downward needs Ind_W(E^A) in A");
  downward_t out;
  auto da = downward_data(ea, p, tol);
  auto db = downward_data(eb, q, tol);
  out.P = da.p_algebra;
  out.Q = db.p_algebra;
  out.ep = with_index_data(da.expectation, tol);
  out.eq = with_index_data(db.expectation, tol);

  // Z from the linear membership condition
  {
    cmat sys(m.dc() * m.dd(), m.X.dim());
    for (long t = 0; t < m.X.dim(); ++t)
      sys.col(t) = vec(cmat(p * m.X.element(t) - m.X.element(t) * q));
    subspace null = null_space(sys, tol);
    std::vector<cmat> zgens;
    for (long i = 0; i < null.dim(); ++i)
      zgens.push_back(m.X.from_coords(null.basis_matrix().col(i)));
    out.Z = orthonormalize(zgens, tol, m.dc(), m.dd());
  }

  cmat ind_a = *ea.index;
  cmat ind_b = *eb.index;
  out.ez = linear_map::left_mult(ind_a, m.dc(), m.dd())
               .compose(ex)
               .compose(linear_map::sandwich(p, q, m.dc(), m.dd()));

  // E^Z(x) = E^X(p x q) Ind_W(E^B) as well, and E^Z fixes Z
  double worst = 0.0;
  for (long t = 0; t < m.X.dim(); ++t) {
    cmat x = m.X.element(t);
    worst = std::max(worst, hs_norm(out.ez.apply(x) - ex.apply(p * x * q) * ind_b));
  }
  for (long i = 0; i < out.Z.dim(); ++i) {
    cmat zel = out.Z.element(i);
    worst = std::max(worst, hs_norm(out.ez.apply(zel) - zel));
  }
  if (worst > 1e-6)
    throw axiom_violation_error("pre-dual expectation identities fail (defect " +
                                std::to_string(worst) + ")");

  std::vector<cmat> xspan, zspan;
  for (long i = 0; i < m.X.dim(); ++i) xspan.push_back(m.X.element(i));
  for (long i = 0; i < out.Z.dim(); ++i) zspan.push_back(out.Z.element(i));
  out.pair = make_morita_pair(out.P, m.A, out.Q, m.B, xspan, zspan, tol);

  bimodule_expectation be;
  be.big = corner_bimodule{m.A, m.B, m.X};
  be.small = corner_bimodule{out.P, out.Q, out.Z};
  be.ex = out.ez;
  be.ea = out.ep;
  be.eb = out.eq;
  auto rep = check_bimodule_expectation(be);
  if (!rep.passes(1e-6))
    throw axiom_violation_error("pre-dual expectation fails the bimodule axioms (worst " +
                                std::to_string(rep.worst()) + ")");
  return out;
}

// ---------------------------------------------------------------------------
// relation between the two constructions
// ---------------------------------------------------------------------------

struct updown_report {
  double z_equals_x = 0;        ///< subspace distance between the Jones fixed space and X
  double a_is_commutant = 0;    ///< A = { a in C : e_A a = a e_A }
  double jones_value = 0;       ///< E^C(e_A) = Ind^-1
  double predual_matches = 0;   ///< recovered pre-dual equals E^X
  double roundtrip_theta = 0;   ///< uniqueness map defects for the rebuilt level
  bool roundtrip_blocks_match = false;
  long rebuilt_y_dim = 0, original_y_dim = 0;

  double worst() const {
    return std::max({z_equals_x, a_is_commutant, jones_value, predual_matches,
                     roundtrip_theta});
  }
};

inline updown_report updown_relation_check(const upward_data& u, double tol = default_tol) {
  const auto& m = u.base;
  updown_report rep;

  // (a) Z' = { y : e_A phi(y) = phi(y) e_B } equals X
  {
    cmat sys(u.y1.rows() * u.y1.cols(), m.Y.dim());
    for (long t = 0; t < m.Y.dim(); ++t) {
      cmat py = u.phi.apply(m.Y.element(t));
      sys.col(t) = vec(cmat(u.jones_a * py - py * u.jones_b));
    }
    subspace null = null_space(sys, tol);
    std::vector<cmat> zgens;
    for (long i = 0; i < null.dim(); ++i)
      zgens.push_back(m.Y.from_coords(null.basis_matrix().col(i)));
    subspace zspan = orthonormalize(zgens, tol, m.dc(), m.dd());
    rep.z_equals_x = (zspan.dim() == m.X.dim()) ? zspan.distance(m.X) : 1.0;
  }

  // A = { a in C : e_A a = a e_A } inside the tower copy
  {
    matrix_algebra fixed =
        commutant_of_set({u.jones_a}, u.cmod.embedded_base, tol);
    std::vector<cmat> want;
    for (long i = 0; i < m.A.dim(); ++i) want.push_back(u.embed_c.apply(m.A.basis(i)));
    subspace want_span = orthonormalize(want, tol, u.y1.rows(), u.y1.rows());
    rep.a_is_commutant =
        (fixed.dim() == m.A.dim()) ? fixed.span().distance(want_span) : 1.0;
  }

  // E^C(e_A) = Ind^-1
  {
    cmat ind_a_inv = psd_inverse(0.5 * (u.ind_a + u.ind_a.adjoint()), tol);
    rep.jones_value = hs_norm(u.ec.apply(u.jones_a) - u.embed_c.apply(ind_a_inv));
  }

  // (b) downward at the tower level with p = e_A, q = e_B recovers E^X
  second_level lvl2 = make_second_level(u, tol);
  auto down = downward(lvl2.pair, lvl2.ec, lvl2.ed, u.ey.ex, u.jones_a, u.jones_b, tol);
  {
    // the fixed subspace is phi(X) and the pre-dual is phi E^X phi^{-1}
    std::vector<cmat> want;
    for (long i = 0; i < m.X.dim(); ++i) want.push_back(u.phi.apply(m.X.element(i)));
    subspace want_span = orthonormalize(want, tol, u.y1.rows(), u.y1.cols());
    double dz = (down.Z.dim() == want_span.dim()) ? down.Z.distance(want_span) : 1.0;
    linear_map phi_inv = u.phi.pseudo_inverse(tol);
    double de = 0.0;
    for (long t = 0; t < m.Y.dim(); ++t) {
      cmat y = m.Y.element(t);
      de = std::max(de, hs_norm(phi_inv.apply(down.ez.apply(u.phi.apply(y))) -
                                u.ex.apply(y)));
    }
    rep.predual_matches = std::max(dz, de);
  }

  // (c) rebuild the upward construction from the recovered data and compare
  {
    upward_data rebuilt = upward(down.pair, down.ep, down.eq, down.ez, tol);
    rep.rebuilt_y_dim = rebuilt.y1.dim();
    rep.original_y_dim = u.y1.dim();

    auto blocks_equal = [&](const matrix_algebra& x, const matrix_algebra& y) {
      auto bx = block_structure(x, tol);
      auto by = block_structure(y, tol);
      if (bx.blocks.size() != by.blocks.size()) return false;
      for (std::size_t i = 0; i < bx.blocks.size(); ++i)
        if (bx.blocks[i].k != by.blocks[i].k) return false;
      return true;
    };
    rep.roundtrip_blocks_match = rebuilt.y1.dim() == u.y1.dim() &&
                                 blocks_equal(rebuilt.y1.left, u.y1.left) &&
                                 blocks_equal(rebuilt.y1.right, u.y1.right);

    // theta: Y_1 -> rebuilt Y_1 by the uniqueness formula with F^Y = E^Y.
    // Here the base data of the rebuilt level are P in embedded-C with
    // Jones projection e_A, so every ingredient lives at tower scale.
    cmat ind_p = *down.ep.index;
    const auto& qp = *down.ep.quasi;
    const auto& qq = *down.eq.quasi;
    std::vector<cmat> ins, outs;
    for (long t = 0; t < u.y1.dim(); ++t) {
      cmat wel = u.y1.basis(t);
      cmat img;
      bool first = true;
      for (const auto& [ui, uis] : qp)
        for (const auto& [vj, vjs] : qq) {
          cmat inner = u.ey.ex.apply(u.jones_a * uis * wel * vj * u.jones_b);
          cmat x = down.ez.apply(inner);
          cmat term = rebuilt.embed_triple(ind_p * ui, x, vj);
          if (first) {
            img = term;
            first = false;
          } else {
            img += term;
          }
        }
      ins.push_back(wel);
      outs.push_back(img);
    }
    double resid = 0.0;
    linear_map theta = linear_map::from_samples(ins, outs, tol, &resid);
    rep.roundtrip_theta = resid;
    subspace img_span = orthonormalize(outs, tol, rebuilt.y1.rows(), rebuilt.y1.cols());
    if (img_span.dim() != u.y1.dim()) rep.roundtrip_theta = std::max(rep.roundtrip_theta, 1.0);
    // theta carries the Y-copy onto the rebuilt one and exchanges the
    // expectations
    for (long t = 0; t < m.Y.dim(); ++t) {
      cmat py = u.phi.apply(m.Y.element(t));
      rep.roundtrip_theta = std::max(
          rep.roundtrip_theta, hs_norm(theta.apply(py) - rebuilt.phi.apply(py)));
    }
    for (long t = 0; t < u.y1.dim(); ++t) {
      cmat wel = u.y1.basis(t);
      rep.roundtrip_theta = std::max(
          rep.roundtrip_theta, hs_norm(rebuilt.ey.ex.apply(theta.apply(wel)) -
                                       theta.apply(u.ey.ex.apply(wel))));
    }
  }
  return rep;
}

}  // namespace morita
