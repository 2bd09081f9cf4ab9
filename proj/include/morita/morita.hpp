#pragma once

#include "morita/bimodule.hpp"

namespace morita {

// ---------------------------------------------------------------------------
// Morita-equivalent inclusions
// ---------------------------------------------------------------------------

/// Strongly Morita equivalent unital inclusions A subset C and B subset D,
/// witnessed by the C-D bimodule Y and its sub-bimodule X, both in corner
/// form, plus a frame x_1..x_n in X with sum x_i^* x_i = 1_B.
struct morita_pair {
  matrix_algebra A, C;  ///< left inclusion, ambient dc
  matrix_algebra B, D;  ///< right inclusion, ambient dd
  subspace Y;           ///< dc x dd matrices
  subspace X;           ///< subspace of Y
  std::vector<cmat> frame;

  long dc() const { return C.ambient(); }
  long dd() const { return D.ambient(); }

  corner_bimodule big_bimodule() const { return corner_bimodule{C, D, Y}; }
  corner_bimodule small_bimodule() const { return corner_bimodule{A, B, X}; }
};

/// Worst violation of the defining conditions: module closures, the four
/// fullness span identities, and the frame identity.
inline double morita_pair_defect(const morita_pair& m, double tol = default_tol) {
  double worst = 0.0;
  auto span_equals = [&](const std::vector<cmat>& gens, const matrix_algebra& alg) {
    subspace sp = orthonormalize(gens, tol, alg.ambient(), alg.ambient());
    if (sp.dim() != alg.dim()) return 1.0;
    double w = 0.0;
    for (long i = 0; i < sp.dim(); ++i) {
      cmat g = sp.element(i);
      w = std::max(w, hs_norm(g - alg.project(g)));
    }
    return w;
  };
  if (!m.C.contains(m.A, 1e-6) || !m.D.contains(m.B, 1e-6)) return 1.0;
  for (long i = 0; i < m.X.dim(); ++i)
    worst = std::max(worst, hs_norm(m.X.element(i) - m.Y.project(m.X.element(i))));
  auto closure = [&](const matrix_algebra& alg, bool left) {
    for (long a = 0; a < alg.dim(); ++a)
      for (long i = 0; i < m.X.dim(); ++i) {
        cmat v = left ? cmat(alg.basis(a) * m.X.element(i))
                      : cmat(m.X.element(i) * alg.basis(a));
        worst = std::max(worst, hs_norm(v - m.X.project(v)));
      }
  };
  closure(m.A, true);
  closure(m.B, false);
  std::vector<cmat> aa, cc, bb, dd_;
  for (long i = 0; i < m.X.dim(); ++i)
    for (long j = 0; j < m.X.dim(); ++j) {
      aa.push_back(m.X.element(i) * m.X.element(j).adjoint());
      bb.push_back(m.X.element(i).adjoint() * m.X.element(j));
    }
  for (long i = 0; i < m.Y.dim(); ++i)
    for (long j = 0; j < m.X.dim(); ++j) {
      cc.push_back(m.Y.element(i) * m.X.element(j).adjoint());
      dd_.push_back(m.Y.element(i).adjoint() * m.X.element(j));
    }
  worst = std::max(worst, span_equals(aa, m.A));
  worst = std::max(worst, span_equals(cc, m.C));
  worst = std::max(worst, span_equals(bb, m.B));
  worst = std::max(worst, span_equals(dd_, m.D));
  cmat fid = cmat::Zero(m.dd(), m.dd());
  for (const auto& x : m.frame) fid += x.adjoint() * x;
  worst = std::max(worst, hs_norm(fid - identity(m.dd())));
  return worst;
}

inline morita_pair make_morita_pair(matrix_algebra a, matrix_algebra c, matrix_algebra b,
                                    matrix_algebra d, const std::vector<cmat>& yspan,
                                    const std::vector<cmat>& xspan,
                                    double tol = default_tol,
                                    std::vector<cmat> frame = {}) {
  morita_pair m;
  m.A = std::move(a);
  m.C = std::move(c);
  m.B = std::move(b);
  m.D = std::move(d);
  m.Y = orthonormalize(yspan, tol, m.C.ambient(), m.D.ambient());
  m.X = orthonormalize(xspan, tol, m.C.ambient(), m.D.ambient());
  m.frame = frame.empty() ? make_frame(m.X, m.B, tol) : std::move(frame);
  double defect = morita_pair_defect(m, tol);
  if (defect > 1e-6)
    throw axiom_violation_error("Morita pair conditions fail (defect " +
                                std::to_string(defect) + ")");
  return m;
}

/// The mirrored pair: (B subset D) equivalent to (A subset C) via the dual
/// bimodule.
inline morita_pair mirror_pair(const morita_pair& m, double tol = default_tol) {
  std::vector<cmat> ys, xs;
  for (long i = 0; i < m.Y.dim(); ++i) ys.push_back(m.Y.element(i).adjoint());
  for (long i = 0; i < m.X.dim(); ++i) xs.push_back(m.X.element(i).adjoint());
  return make_morita_pair(m.B, m.D, m.A, m.C, ys, xs, tol);
}

/// Transitivity: compose (A in C) ~ (B in D) with (B in D) ~ (K in L) along
/// the interior tensor product, realized by matrix products.
inline morita_pair compose_pairs(const morita_pair& m1, const morita_pair& m2,
                                 double tol = default_tol) {
  if (!m1.D.span().same_space_as(m2.C.span(), 1e-6) ||
      !m1.B.span().same_space_as(m2.A.span(), 1e-6))
    throw input_shape_error("compose_pairs: middle inclusions do not match");
  std::vector<cmat> ys, xs;
  for (long i = 0; i < m1.Y.dim(); ++i)
    for (long j = 0; j < m2.Y.dim(); ++j) ys.push_back(m1.Y.element(i) * m2.Y.element(j));
  for (long i = 0; i < m1.X.dim(); ++i)
    for (long j = 0; j < m2.X.dim(); ++j) xs.push_back(m1.X.element(i) * m2.X.element(j));
  return make_morita_pair(m1.A, m1.C, m2.B, m2.D, ys, xs, tol);
}

// ---------------------------------------------------------------------------
// the standard form
// ---------------------------------------------------------------------------

/// The reduction of a Morita pair to the corner picture: with a frame
/// x_1..x_n the stacked column xbar satisfies xbar^* xbar = 1, the frame
/// projection is p = xbar xbar^*, and
///   psi_B(b) = xbar b xbar^*          onto p M_n(A) p
///   psi_D(d) = xbar d xbar^*          onto p M_n(C) p
///   psi_X(x) = iota_1(x) xbar^*       onto (1 (x) f) M_n(A) p
///   psi_Y(y) = iota_1(y) xbar^*       onto (1 (x) f) M_n(C) p
/// where iota_1 places an element in the first block row.
struct standard_form_t {
  long n = 0;
  cmat p;              ///< frame projection in M_n(A)
  cmat f;              ///< 1 (x) f_11
  cmat xbar;           ///< stacked frame column, (n dc) x dd
  linear_map psi_B, psi_D, psi_X, psi_Y;
  subspace corner_lower;  ///< p M_n(A) p
  subspace corner_upper;  ///< p M_n(C) p
  subspace strip_lower;   ///< (1 (x) f) M_n(A) p
  subspace strip_upper;   ///< (1 (x) f) M_n(C) p
  matrix_algebra mna, mnc;
};

inline standard_form_t standard_form(const morita_pair& m, double tol = default_tol) {
  standard_form_t sf;
  const long dc = m.dc(), dd = m.dd();
  sf.n = static_cast<long>(m.frame.size());
  if (sf.n == 0) throw frame_not_found_error("standard_form: pair has no frame");
  sf.xbar.resize(sf.n * dc, dd);
  for (long i = 0; i < sf.n; ++i) sf.xbar.middleRows(i * dc, dc) = m.frame[i];
  sf.p = sf.xbar * sf.xbar.adjoint();
  sf.f = kron(munit(sf.n, 0, 0), identity(dc));
  cmat e1 = cmat::Zero(sf.n * dc, dc);
  e1.topRows(dc) = identity(dc);
  sf.psi_B = linear_map::sandwich(sf.xbar, sf.xbar.adjoint(), dd, dd);
  sf.psi_D = sf.psi_B;
  sf.psi_X = linear_map::sandwich(e1, sf.xbar.adjoint(), dc, dd);
  sf.psi_Y = sf.psi_X;
  sf.mna = amplify(m.A, sf.n, tol);
  sf.mnc = amplify(m.C, sf.n, tol);

  check_projection(sf.p, 1e-7);
  if (!sf.mna.contains(sf.p, 1e-6))
    throw axiom_violation_error("frame projection leaves M_n(A)");
  if (!is_full_projection(sf.p, sf.mna, tol))
    throw not_full_error("frame projection is not full in M_n(A)");

  auto corner_span = [&](const matrix_algebra& alg, const cmat& l, const cmat& r) {
    std::vector<cmat> gens;
    gens.reserve(alg.dim());
    for (long i = 0; i < alg.dim(); ++i) gens.push_back(l * alg.basis(i) * r);
    return orthonormalize(gens, tol, l.rows(), r.cols());
  };
  sf.corner_lower = corner_span(sf.mna, sf.p, sf.p);
  sf.corner_upper = corner_span(sf.mnc, sf.p, sf.p);
  sf.strip_lower = corner_span(sf.mna, sf.f, sf.p);
  sf.strip_upper = corner_span(sf.mnc, sf.f, sf.p);

  // the four maps are bijections onto the corners and strips
  auto check_iso = [&](const linear_map& psi, const subspace& src, const subspace& img,
                       const char* what) {
    std::vector<cmat> images;
    for (long i = 0; i < src.dim(); ++i) images.push_back(psi.apply(src.element(i)));
    subspace sp = orthonormalize(images, tol, img.rows(), img.cols());
    if (sp.dim() != src.dim() || !img.same_space_as(sp, 1e-6))
      throw axiom_violation_error(std::string("standard form map is not a bijection: ") +
                                  what);
  };
  check_iso(sf.psi_B, m.B.span(), sf.corner_lower, "B onto the lower corner");
  check_iso(sf.psi_D, m.D.span(), sf.corner_upper, "D onto the upper corner");
  check_iso(sf.psi_X, m.X, sf.strip_lower, "X onto the lower strip");
  check_iso(sf.psi_Y, m.Y, sf.strip_upper, "Y onto the upper strip");

  // multiplicativity of psi_D and the inner-product intertwining of psi_Y
  double worst = 0.0;
  for (long i = 0; i < m.D.dim(); ++i)
    for (long j = 0; j < m.D.dim(); ++j) {
      cmat di = m.D.basis(i), dj = m.D.basis(j);
      worst = std::max(worst, hs_norm(sf.psi_D.apply(di * dj) -
                                      sf.psi_D.apply(di) * sf.psi_D.apply(dj)));
      worst = std::max(worst,
                       hs_norm(sf.psi_D.apply(di.adjoint()) - sf.psi_D.apply(di).adjoint()));
    }
  for (long i = 0; i < m.Y.dim(); ++i)
    for (long j = 0; j < m.Y.dim(); ++j) {
      cmat yi = m.Y.element(i), yj = m.Y.element(j);
      worst = std::max(worst,
                       hs_norm(sf.psi_Y.apply(yi).adjoint() * sf.psi_Y.apply(yj) -
                               sf.psi_D.apply(yi.adjoint() * yj)));
    }
  if (worst > 1e-7)
    throw axiom_violation_error("standard form maps fail their algebraic identities");
  return sf;
}

// ---------------------------------------------------------------------------
// transport of expectations
// ---------------------------------------------------------------------------

struct transported {
  cond_expectation eb;            ///< D -> B, of index-finite type
  bimodule_expectation ex;        ///< Y -> X with respect to E^A and E^B
  standard_form_t sf;
  cmat index_b;                   ///< Ind_W(E^B) computed by the frame algorithm
  cmat index_b_formula;           ///< pullback of (Ind_W(E^A) (x) I_n) p
};

/// Carry an index-finite expectation across the equivalence: E^B is the
/// pullback of the corner compression of E^A (x) id through psi_D, and E^X
/// is the pullback of the strip compression through psi_Y.
inline transported transport_expectation(const morita_pair& m, const cond_expectation& ea,
                                         double tol = default_tol) {
  transported out;
  out.sf = standard_form(m, tol);
  const long n = out.sf.n;
  cmat base_index = ea.index ? *ea.index : watatani_index(ea, tol);

  linear_map psi_d_inv = out.sf.psi_D.pseudo_inverse(tol);
  linear_map psi_y_inv = out.sf.psi_Y.pseudo_inverse(tol);

  cmat action(m.D.dim(), m.D.dim());
  for (long i = 0; i < m.D.dim(); ++i) {
    cmat img = tensor_id_apply(ea, out.sf.psi_D.apply(m.D.basis(i)), n);
    action.col(i) = m.D.span().coords(psi_d_inv.apply(img));
  }
  out.eb = cond_expectation(m.D, m.B, std::move(action));
  auto rep = verify_expectation(out.eb);
  if (!rep.passes(1e-7))
    throw axiom_violation_error("transported expectation fails the axioms (worst " +
                                std::to_string(rep.worst()) + ")");
  out.eb = with_index_data(out.eb, tol);
  out.index_b = *out.eb.index;
  out.index_b_formula =
      psi_d_inv.apply(amplify_element(base_index, n) * out.sf.p);

  std::vector<cmat> ins, outs;
  for (long i = 0; i < m.Y.dim(); ++i) {
    cmat yi = m.Y.element(i);
    ins.push_back(yi);
    outs.push_back(psi_y_inv.apply(tensor_id_apply(ea, out.sf.psi_Y.apply(yi), n)));
  }
  double resid = 0.0;
  linear_map exmap = linear_map::from_samples(ins, outs, tol, &resid);
  if (resid > 1e-7) throw inconsistent_span_error("transported E^X is not linear");

  out.ex.big = m.big_bimodule();
  out.ex.small = m.small_bimodule();
  out.ex.ex = std::move(exmap);
  out.ex.ea = ea;
  out.ex.eb = out.eb;
  auto brep = check_bimodule_expectation(out.ex);
  if (!brep.passes(1e-7))
    throw axiom_violation_error("transported bimodule expectation fails the axioms (worst " +
                                std::to_string(brep.worst()) + ")");
  return out;
}

// ---------------------------------------------------------------------------
// linking algebras
// ---------------------------------------------------------------------------

struct linking_data {
  matrix_algebra l_upper;  ///< L_Y = [C Y; Y~ D]
  matrix_algebra l_lower;  ///< L_X = [A X; X~ B]
  cmat p;                  ///< upper corner unit
  cmat q;                  ///< lower corner unit, p + q = 1
};

namespace detail {

inline cmat link_block(long dc, long dd, const cmat& c, const cmat& y, const cmat& yt,
                       const cmat& d) {
  cmat out = cmat::Zero(dc + dd, dc + dd);
  if (c.size()) out.topLeftCorner(dc, dc) = c;
  if (y.size()) out.topRightCorner(dc, dd) = y;
  if (yt.size()) out.bottomLeftCorner(dd, dc) = yt;
  if (d.size()) out.bottomRightCorner(dd, dd) = d;
  return out;
}

}  // namespace detail

inline linking_data linking_algebra(const morita_pair& m, double tol = default_tol) {
  const long dc = m.dc(), dd = m.dd();
  cmat none;
  auto assemble = [&](const matrix_algebra& corner_c, const subspace& sp,
                      const matrix_algebra& corner_d) {
    std::vector<cmat> gens;
    for (long i = 0; i < corner_c.dim(); ++i)
      gens.push_back(detail::link_block(dc, dd, corner_c.basis(i), none, none, none));
    for (long i = 0; i < sp.dim(); ++i) {
      gens.push_back(detail::link_block(dc, dd, none, sp.element(i), none, none));
      gens.push_back(detail::link_block(dc, dd, none, none, sp.element(i).adjoint(), none));
    }
    for (long i = 0; i < corner_d.dim(); ++i)
      gens.push_back(detail::link_block(dc, dd, none, none, none, corner_d.basis(i)));
    return make_algebra(dc + dd, gens, tol);
  };
  linking_data out;
  out.l_upper = assemble(m.C, m.Y, m.D);
  out.l_lower = assemble(m.A, m.X, m.B);
  out.p = detail::link_block(dc, dd, identity(dc), none, none, none);
  out.q = detail::link_block(dc, dd, none, none, none, identity(dd));

  if (!out.l_upper.contains(out.l_lower, 1e-6))
    throw not_subalgebra_error("linking algebra of the pair is not nested");
  // corner and fullness conditions
  auto corner_dim = [&](const matrix_algebra& alg, const cmat& unit) {
    std::vector<cmat> gens;
    for (long i = 0; i < alg.dim(); ++i) gens.push_back(unit * alg.basis(i) * unit);
    return orthonormalize(gens, tol, dc + dd, dc + dd).dim();
  };
  if (corner_dim(out.l_lower, out.p) != m.A.dim() ||
      corner_dim(out.l_upper, out.p) != m.C.dim() ||
      corner_dim(out.l_lower, out.q) != m.B.dim() ||
      corner_dim(out.l_upper, out.q) != m.D.dim())
    throw axiom_violation_error("linking corners have wrong dimensions");
  if (!is_full_projection(out.p, out.l_lower, tol) ||
      !is_full_projection(out.q, out.l_lower, tol) ||
      !is_full_projection(out.p, out.l_upper, tol) ||
      !is_full_projection(out.q, out.l_upper, tol))
    throw not_full_error("corner units are not full in the linking algebras");
  if (hs_norm(out.p + out.q - identity(dc + dd)) > 1e-9)
    throw axiom_violation_error("corner units do not sum to the identity");
  // dim L_X = dim A + dim B + 2 dim X
  if (out.l_lower.dim() != m.A.dim() + m.B.dim() + 2 * m.X.dim())
    throw axiom_violation_error("linking algebra dimension bookkeeping fails");
  return out;
}

/// The blockwise expectation [c x; y~ d] -> [E^A(c) E^X(x); E^X(y)~ E^B(d)],
/// with the diagonal quasi-basis and the block-diagonal index attached.
inline cond_expectation linking_expectation(const morita_pair& m, const linking_data& link,
                                            const cond_expectation& ea,
                                            const cond_expectation& eb,
                                            const linear_map& ex,
                                            double tol = default_tol) {
  const long dc = m.dc(), dd = m.dd();
  cmat action(link.l_upper.dim(), link.l_upper.dim());
  for (long i = 0; i < link.l_upper.dim(); ++i) {
    cmat l = link.l_upper.basis(i);
    cmat img = detail::link_block(
        dc, dd, ea.apply(l.topLeftCorner(dc, dc)), ex.apply(l.topRightCorner(dc, dd)),
        ex.apply(l.bottomLeftCorner(dd, dc).adjoint()).adjoint(),
        eb.apply(l.bottomRightCorner(dd, dd)));
    action.col(i) = link.l_upper.span().coords(img);
  }
  cond_expectation el(link.l_upper, link.l_lower, std::move(action));
  auto rep = verify_expectation(el);
  if (!rep.passes(1e-7))
    throw axiom_violation_error("linking expectation fails the axioms (worst " +
                                std::to_string(rep.worst()) + ")");
  // diagonal pairs diag(u_i, v_j): pad both quasi-bases to a common size k
  // and scale by k^(-1/2), which makes the double-indexed set reproduce
  // every element exactly once
  auto qa = ea.quasi ? *ea.quasi : quasi_basis(ea, tol);
  auto qb = eb.quasi ? *eb.quasi : quasi_basis(eb, tol);
  const std::size_t k = std::max(qa.size(), qb.size());
  while (qa.size() < k) qa.emplace_back(cmat::Zero(dc, dc), cmat::Zero(dc, dc));
  while (qb.size() < k) qb.emplace_back(cmat::Zero(dd, dd), cmat::Zero(dd, dd));
  const double scale = 1.0 / std::sqrt(static_cast<double>(k));
  std::vector<std::pair<cmat, cmat>> pairs;
  pairs.reserve(k * k);
  for (const auto& [u, us] : qa)
    for (const auto& [v, vs] : qb)
      pairs.emplace_back(
          detail::link_block(dc, dd, scale * u, cmat(), cmat(), scale * v),
          detail::link_block(dc, dd, scale * us, cmat(), cmat(), scale * vs));
  el.quasi = std::move(pairs);
  cmat ia = ea.index ? *ea.index : watatani_index(ea, tol);
  cmat ib = eb.index ? *eb.index : watatani_index(eb, tol);
  el.index = detail::link_block(dc, dd, ia, cmat(), cmat(), ib);
  if (quasi_basis_defect(el, *el.quasi) > 1e-7)
    throw axiom_violation_error("diagonal quasi-basis fails in the linking algebra");
  cmat direct = cmat::Zero(dc + dd, dc + dd);
  for (const auto& [u, v] : *el.quasi) direct += u * v;
  if (hs_norm(direct - *el.index) > 1e-7)
    throw axiom_violation_error("linking index is not block-diagonal");
  return el;
}

// ---------------------------------------------------------------------------
// exchange identities
// ---------------------------------------------------------------------------

struct exchange_report {
  double left_reconstruction = 0;   ///< y = sum_i u_i E^X(u_i^* y)
  double right_reconstruction = 0;  ///< y = sum_j E^X(y v_j) v_j^*
  double index_exchange = 0;        ///< Ind_W(E^A) y = y Ind_W(E^B)
  double worst() const {
    return std::max({left_reconstruction, right_reconstruction, index_exchange});
  }
};

inline exchange_report exchange_identities_check(const morita_pair& m,
                                                 const cond_expectation& ea,
                                                 const cond_expectation& eb,
                                                 const linear_map& ex,
                                                 double tol = default_tol) {
  exchange_report rep;
  const auto& qa = ea.quasi ? *ea.quasi : quasi_basis(ea, tol);
  const auto& qb = eb.quasi ? *eb.quasi : quasi_basis(eb, tol);
  cmat ia = ea.index ? *ea.index : watatani_index(ea, tol);
  cmat ib = eb.index ? *eb.index : watatani_index(eb, tol);
  for (long t = 0; t < m.Y.dim(); ++t) {
    cmat y = m.Y.element(t);
    cmat left = cmat::Zero(m.dc(), m.dd());
    cmat right = left;
    for (const auto& [u, us] : qa) left += u * ex.apply(us * y);
    for (const auto& [v, vs] : qb) right += ex.apply(y * v) * vs;
    rep.left_reconstruction = std::max(rep.left_reconstruction, hs_norm(left - y));
    rep.right_reconstruction = std::max(rep.right_reconstruction, hs_norm(right - y));
    rep.index_exchange = std::max(rep.index_exchange, hs_norm(ia * y - y * ib));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// pairs from corner compression
// ---------------------------------------------------------------------------

struct compression_pair {
  morita_pair pair;
  compressed_expectation comp;  ///< E_p on the cut corner, quasi-basis attached
};

/// The pair (A subset C) ~ (p M_n(A) p subset p M_n(C) p) along the strips
/// (1 (x) f) M_n(.) p, everything cut to the range of p.
inline compression_pair pair_from_compression(const cond_expectation& ea, long n,
                                              const cmat& p, double tol = default_tol) {
  compression_pair out;
  out.comp = compress_expectation(ea, n, p, tol);
  const long d = ea.ambient();
  const cmat& v = out.comp.isometry;
  std::vector<cmat> yspan, xspan;
  cmat pv = p * v;
  for (long i = 0; i < out.comp.amplified_source.dim(); ++i)
    yspan.push_back(cmat(out.comp.amplified_source.basis(i) * pv).topRows(d));
  for (long i = 0; i < out.comp.amplified_target.dim(); ++i)
    xspan.push_back(cmat(out.comp.amplified_target.basis(i) * pv).topRows(d));
  out.pair = make_morita_pair(ea.target(), ea.source(), out.comp.exp.target(),
                              out.comp.exp.source(), yspan, xspan, tol);
  return out;
}

}  // namespace morita
