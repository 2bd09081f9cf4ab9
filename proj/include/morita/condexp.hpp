#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "morita/fdalg.hpp"

namespace morita {

// ---------------------------------------------------------------------------
// conditional expectations on unital inclusions
// ---------------------------------------------------------------------------

/// A linear idempotent A-bimodule projection E : C -> A for a unital
/// inclusion A subset C. The action is stored as a matrix in the span
/// coordinates of C; outside of C the map is the zero extension.
class cond_expectation {
 public:
  cond_expectation() = default;

  cond_expectation(matrix_algebra source, matrix_algebra target, cmat action_coords)
      : source_(std::move(source)), target_(std::move(target)), action_(std::move(action_coords)) {
    if (action_.rows() != source_.dim() || action_.cols() != source_.dim())
      throw input_shape_error("expectation action must be dim(C) x dim(C)");
    if (source_.ambient() != target_.ambient())
      throw input_shape_error("expectation endpoints live in different ambients");
  }

  /// Ingest an action given as a matrix on vectorized ambient elements.
  static cond_expectation from_ambient_matrix(matrix_algebra source, matrix_algebra target,
                                              const cmat& ambient_action,
                                              double tol = default_tol) {
    long d = source.ambient();
    if (ambient_action.rows() != d * d || ambient_action.cols() != d * d)
      throw input_shape_error("ambient expectation matrix must be d^2 x d^2");
    const cmat& b = source.span().basis_matrix();
    cmat coords = b.adjoint() * ambient_action * b;
    (void)tol;
    return cond_expectation(std::move(source), std::move(target), std::move(coords));
  }

  const matrix_algebra& source() const { return source_; }
  const matrix_algebra& target() const { return target_; }
  const cmat& action_coords() const { return action_; }
  long ambient() const { return source_.ambient(); }

  cmat apply(const cmat& x) const {
    return source_.span().from_coords(action_ * source_.span().coords(x));
  }

  /// The action as a map on ambient matrices (zero on the complement of C).
  linear_map ambient_map() const {
    long d = source_.ambient();
    const cmat& b = source_.span().basis_matrix();
    return linear_map(d, d, d, d, b * action_ * b.adjoint());
  }

  /// Attached quasi-basis pairs (u_i, v_i): sum_i u_i E(v_i x) = x.
  std::optional<std::vector<std::pair<cmat, cmat>>> quasi;
  /// Attached Watatani index sum_i u_i v_i, a central element of C.
  std::optional<cmat> index;

 private:
  matrix_algebra source_;
  matrix_algebra target_;
  cmat action_;
};

/// Orthogonal projection of C onto A with respect to the ambient trace,
/// the canonical trace-preserving conditional expectation.
inline cond_expectation trace_expectation(const matrix_algebra& c, const matrix_algebra& a,
                                          double tol = default_tol) {
  if (!c.contains(a, 100.0 * tol))
    throw not_subalgebra_error("trace_expectation: A is not contained in C");
  const cmat& cb = c.span().basis_matrix();
  const cmat& ab = a.span().basis_matrix();
  cmat action = (cb.adjoint() * ab) * (ab.adjoint() * cb);
  return cond_expectation(c, a, std::move(action));
}

// ---------------------------------------------------------------------------
// axiom verification
// ---------------------------------------------------------------------------

struct expectation_report {
  double fixes_target = 0;   ///< max ||E(a) - a|| over the target basis
  double bimodule = 0;       ///< max ||E(a x b) - a E(x) b||
  double adjoint = 0;        ///< max ||E(x^*) - E(x)^*||
  double positivity = 0;     ///< worst negative eigenvalue of E(x^* x)
  double idempotent = 0;     ///< max ||E(E(x)) - E(x)||
  double range = 0;          ///< max distance of E(x) from the target span
  double unital = 0;         ///< ||E(1) - 1||

  double worst() const {
    return std::max({fixes_target, bimodule, adjoint, positivity, idempotent, range, unital});
  }
  bool passes(double threshold) const { return worst() <= threshold; }
};

/// Max violation of the conditional-expectation axioms. Bases are swept
/// exhaustively while the triple count stays small; otherwise seeded random
/// combinations are used, `samples` of them.
inline expectation_report verify_expectation(const cond_expectation& e, long samples = 20,
                                             std::uint64_t seed = 7) {
  expectation_report rep;
  const matrix_algebra& c = e.source();
  const matrix_algebra& a = e.target();
  const long d = c.ambient();

  for (long i = 0; i < a.dim(); ++i) {
    cmat ai = a.basis(i);
    rep.fixes_target = std::max(rep.fixes_target, hs_norm(e.apply(ai) - ai));
  }
  rep.unital = hs_norm(e.apply(identity(d)) - identity(d));

  for (long i = 0; i < c.dim(); ++i) {
    cmat x = c.basis(i);
    cmat ex = e.apply(x);
    rep.adjoint = std::max(rep.adjoint, hs_norm(e.apply(x.adjoint()) - ex.adjoint()));
    rep.idempotent = std::max(rep.idempotent, hs_norm(e.apply(ex) - ex));
    rep.range = std::max(rep.range, hs_norm(ex - a.project(ex)));
  }

  const bool exhaustive = a.dim() * a.dim() * c.dim() <= 20000;
  rng gen(seed);
  auto random_in = [&gen](const matrix_algebra& alg) {
    cmat m = cmat::Zero(alg.ambient(), alg.ambient());
    for (long i = 0; i < alg.dim(); ++i) m += gen.gauss_cplx() * alg.basis(i);
    return m;
  };
  if (exhaustive) {
    for (long i = 0; i < a.dim(); ++i)
      for (long k = 0; k < c.dim(); ++k) {
        cmat aex = a.basis(i) * e.apply(c.basis(k));
        cmat ax = a.basis(i) * c.basis(k);
        for (long j = 0; j < a.dim(); ++j)
          rep.bimodule = std::max(
              rep.bimodule, hs_norm(e.apply(ax * a.basis(j)) - aex * a.basis(j)));
      }
  } else {
    for (long s = 0; s < samples; ++s) {
      cmat ai = random_in(a), x = random_in(c), bj = random_in(a);
      double scale = std::max(1.0, ai.norm() * x.norm() * bj.norm());
      rep.bimodule = std::max(
          rep.bimodule, hs_norm(e.apply(ai * x * bj) - ai * e.apply(x) * bj) / scale);
    }
  }

  for (long s = 0; s < samples; ++s) {
    cmat x = random_in(c);
    cmat y = e.apply(x.adjoint() * x);
    y = 0.5 * (y + y.adjoint());
    Eigen::SelfAdjointEigenSolver<cmat> es(y);
    double lmin = es.eigenvalues().size() ? es.eigenvalues().minCoeff() : 0.0;
    double scale = std::max(1.0, x.squaredNorm());
    rep.positivity = std::max(rep.positivity, std::max(0.0, -lmin) / scale);
  }
  return rep;
}

/// Max deviation of two expectations over the source basis of the first.
inline double expectation_distance(const cond_expectation& e1, const cond_expectation& e2) {
  double worst = 0.0;
  for (long i = 0; i < e1.source().dim(); ++i) {
    cmat x = e1.source().basis(i);
    worst = std::max(worst, hs_norm(e1.apply(x) - e2.apply(x)));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// quasi-bases and the Watatani index
// ---------------------------------------------------------------------------

namespace detail {

/// Frame (Parseval) algorithm for a quasi-basis of E over the module C with
/// the E-valued inner product <x,y> = E(x^* y). The Gram operator
/// G x = sum_k c_k E(c_k^* x) is self-adjoint in the tau.E inner product,
/// so it is symmetrized there before the inverse square root; for a
/// trace-preserving E that metric is the Frobenius one and the extra factors
/// are identities.
inline std::vector<std::pair<cmat, cmat>> quasi_basis_from_basis(
    const cond_expectation& e, const std::vector<cmat>& cb, double tol) {
  const long m = static_cast<long>(cb.size());
  const auto& span = e.source().span();
  cmat g = cmat::Zero(m, m);
  cmat t = cmat::Zero(m, m);
  std::vector<cvec> basis_coords(m);
  for (long k = 0; k < m; ++k) basis_coords[k] = span.coords(cb[k]);
  for (long k = 0; k < m; ++k) {
    for (long l = 0; l < m; ++l) {
      cmat ekl = e.apply(cb[k].adjoint() * cb[l]);
      t(k, l) = ekl.trace();
      cvec col = span.coords(cb[k] * ekl);
      for (long j = 0; j < m; ++j) g(j, l) += basis_coords[j].dot(col);
    }
  }
  t = 0.5 * (t + t.adjoint());
  cmat t_sqrt = psd_sqrt(t, tol);
  cmat t_inv_sqrt = psd_inv_sqrt(t, tol);
  cmat g_metric = t_sqrt * g * t_inv_sqrt;
  double herm_defect = hs_norm(g_metric - g_metric.adjoint()) / std::max(1.0, hs_norm(g_metric));
  if (herm_defect > 1e-6)
    throw near_singular_error("Gram operator is not self-adjoint in the expectation metric");
  cmat k_metric = psd_inv_sqrt(0.5 * (g_metric + g_metric.adjoint()), tol);
  cmat s_inv_sqrt = t_inv_sqrt * k_metric * t_sqrt;
  std::vector<std::pair<cmat, cmat>> out;
  out.reserve(m);
  for (long i = 0; i < m; ++i) {
    cmat u = cmat::Zero(e.ambient(), e.ambient());
    for (long k = 0; k < m; ++k) u += s_inv_sqrt(k, i) * cb[k];
    out.emplace_back(u, u.adjoint());
  }
  return out;
}

}  // namespace detail

/// Quasi-basis pairs for an index-finite expectation. seed 0 uses the stored
/// orthonormal basis of C; a nonzero seed runs the frame algorithm on a
/// seeded unitary rotation of that basis.
inline std::vector<std::pair<cmat, cmat>> quasi_basis(const cond_expectation& e,
                                                      double tol = default_tol,
                                                      std::uint64_t seed = 0) {
  std::vector<cmat> cb = e.source().basis_list();
  if (seed != 0) {
    const long m = static_cast<long>(cb.size());
    rng gen(seed);
    Eigen::HouseholderQR<cmat> qr(gen.gauss_matrix(m, m));
    cmat q = qr.householderQ();
    std::vector<cmat> rotated(m, cmat::Zero(e.ambient(), e.ambient()));
    for (long i = 0; i < m; ++i)
      for (long k = 0; k < m; ++k) rotated[i] += q(k, i) * cb[k];
    cb = std::move(rotated);
  }
  return detail::quasi_basis_from_basis(e, cb, tol);
}

/// Worst violation of sum_i u_i E(v_i x) = x and sum_i E(x u_i) v_i = x
/// over the basis of C.
inline double quasi_basis_defect(const cond_expectation& e,
                                 const std::vector<std::pair<cmat, cmat>>& qb) {
  double worst = 0.0;
  for (long t = 0; t < e.source().dim(); ++t) {
    cmat x = e.source().basis(t);
    cmat left = cmat::Zero(e.ambient(), e.ambient());
    cmat right = left;
    for (const auto& [u, v] : qb) {
      left += u * e.apply(v * x);
      right += e.apply(x * u) * v;
    }
    worst = std::max({worst, hs_norm(left - x), hs_norm(right - x)});
  }
  return worst;
}

/// The index sum_i u_i v_i. Verified central in C and independent of the
/// quasi-basis by re-running the frame algorithm on a rotated basis.
inline cmat watatani_index(const cond_expectation& e, double tol = default_tol,
                           std::uint64_t seed = 1) {
  auto qb = quasi_basis(e, tol, 0);
  cmat ind = cmat::Zero(e.ambient(), e.ambient());
  for (const auto& [u, v] : qb) ind += u * v;
  double scale = std::max(1.0, hs_norm(ind));
  for (long i = 0; i < e.source().dim(); ++i) {
    cmat c = e.source().basis(i);
    if (hs_norm(ind * c - c * ind) > 1e-7 * scale)
      throw axiom_violation_error("index fails to be central in C");
  }
  auto qb2 = quasi_basis(e, tol, seed == 0 ? 1 : seed);
  cmat ind2 = cmat::Zero(e.ambient(), e.ambient());
  for (const auto& [u, v] : qb2) ind2 += u * v;
  if (hs_norm(ind - ind2) > 1e-7 * scale)
    throw axiom_violation_error("index depends on the quasi-basis choice");
  return ind;
}

/// Populates the quasi and index fields, verifying the defining identities.
inline cond_expectation with_index_data(cond_expectation e, double tol = default_tol) {
  e.quasi = quasi_basis(e, tol);
  e.index = watatani_index(e, tol);
  if (quasi_basis_defect(e, *e.quasi) > 1e-7)
    throw axiom_violation_error("quasi-basis identity fails");
  return e;
}

// ---------------------------------------------------------------------------
// compression to a full corner
// ---------------------------------------------------------------------------

/// Apply E blockwise on an n x n grid of ambient-size blocks (E tensor id).
inline cmat tensor_id_apply(const cond_expectation& e, const cmat& z, long n) {
  const long d = e.ambient();
  if (z.rows() != n * d || z.cols() != n * d)
    throw input_shape_error("tensor_id_apply: wrong block grid size");
  cmat out(n * d, n * d);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      out.block(i * d, j * d, d, d) = e.apply(z.block(i * d, j * d, d, d));
  return out;
}

/// Minimum-norm fullness witnesses: pairs (a_t, b_t) in M_n(A) with
/// sum_t a_t p b_t = 1.
inline std::vector<std::pair<cmat, cmat>> fullness_witnesses(const matrix_algebra& mna,
                                                             const cmat& p,
                                                             double tol = default_tol) {
  const long dd = mna.ambient();
  const long m = mna.dim();
  cmat sys(dd * dd, m * m);
  for (long i = 0; i < m; ++i) {
    cmat gp = mna.basis(i) * p;
    for (long j = 0; j < m; ++j) sys.col(i * m + j) = vec(cmat(gp * mna.basis(j)));
  }
  cvec target = vec(cmat(cmat::Identity(dd, dd)));
  cvec sol = pinv(sys, tol) * target;
  if ((sys * sol - target).norm() > 1e-7 * std::sqrt(double(dd)))
    throw not_full_error("no fullness witnesses: p generates a proper ideal");
  std::vector<std::pair<cmat, cmat>> out;
  double cap = sol.cwiseAbs().maxCoeff();
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < m; ++j) {
      cplx w = sol(i * m + j);
      if (std::abs(w) > 1e-12 * cap)
        out.emplace_back(mna.basis(i), w * mna.basis(j));
    }
  return out;
}

/// Compression of E to the corner p M_n(C) p, re-represented on the range of
/// p. Returns the expectation p M_n(C) p -> p M_n(A) p with the transported
/// quasi-basis and index attached.
struct compressed_expectation {
  cond_expectation exp;  ///< on the cut corner, a unital inclusion again
  cmat isometry;         ///< V with V V^adj = p; cut(x) = V^adj x V
  cmat index_formula;    ///< cut of (Ind_W(E) tensor I_n) p
  matrix_algebra amplified_source;  ///< M_n(C)
  matrix_algebra amplified_target;  ///< M_n(A)
  long n = 1;
};

inline compressed_expectation compress_expectation(const cond_expectation& e, long n,
                                                   const cmat& p, double tol = default_tol) {
  const long d = e.ambient();
  matrix_algebra mna = amplify(e.target(), n, tol);
  matrix_algebra mnc = amplify(e.source(), n, tol);
  if (p.rows() != n * d || p.cols() != n * d)
    throw input_shape_error("compress_expectation: projection has wrong size");
  check_projection(p, tol);
  if (!mna.contains(p, 1e-6))
    throw not_projection_error("compression projection must lie in M_n(A)");
  auto witnesses = fullness_witnesses(mna, p, tol);

  cmat v = range_isometry(p, tol);
  matrix_algebra corner_c = cut_corner(mnc, p, tol);
  matrix_algebra corner_a = cut_corner(mna, p, tol);
  // action on the cut corner: y -> cut((E tensor id)(p y p))
  std::vector<cmat> ins, outs;
  for (long i = 0; i < corner_c.dim(); ++i) {
    cmat y = corner_c.basis(i);
    cmat big = v * y * v.adjoint();
    outs.push_back(v.adjoint() * tensor_id_apply(e, big, n) * v);
    ins.push_back(y);
  }
  cmat action(corner_c.dim(), corner_c.dim());
  for (long i = 0; i < corner_c.dim(); ++i) action.col(i) = corner_c.span().coords(outs[i]);
  cond_expectation ep(corner_c, corner_a, std::move(action));

  // transported quasi-basis { (p (u_i (x) I_n) a_j p, p b_j (u_i^* (x) I_n) p) }
  auto base_qb = e.quasi ? *e.quasi : quasi_basis(e, tol);
  cmat base_index = e.index ? *e.index : watatani_index(e, tol);
  std::vector<std::pair<cmat, cmat>> qb;
  qb.reserve(base_qb.size() * witnesses.size());
  for (const auto& [u, ustar] : base_qb) {
    cmat ubig = amplify_element(u, n);
    cmat ustarbig = amplify_element(ustar, n);
    for (const auto& [aj, bj] : witnesses)
      qb.emplace_back(v.adjoint() * (p * ubig * aj * p) * v,
                      v.adjoint() * (p * bj * ustarbig * p) * v);
  }
  ep.quasi = std::move(qb);
  compressed_expectation out;
  out.index_formula = v.adjoint() * (amplify_element(base_index, n) * p) * v;
  ep.index = out.index_formula;
  if (quasi_basis_defect(ep, *ep.quasi) > 1e-7)
    throw axiom_violation_error("compressed quasi-basis fails its defining identity");
  out.exp = std::move(ep);
  out.isometry = std::move(v);
  out.amplified_source = std::move(mnc);
  out.amplified_target = std::move(mna);
  out.n = n;
  return out;
}

// ---------------------------------------------------------------------------
// Jones basic construction
// ---------------------------------------------------------------------------

/// The basic construction C_1 = span{ lambda(x) e lambda(y) } realized on the
/// vector space C carrying the inner product tau(E(x^* y)). lambda is left
/// multiplication and the Jones projection e acts as x -> E(x).
struct basic_construction_t {
  matrix_algebra tower;   ///< C_1, a unital algebra on C^module_dim
  cmat jones;             ///< the Jones projection e
  linear_map embed;       ///< lambda : C -> tower ambient (zero off C)
  long module_dim = 0;    ///< dim C, the size of the module the tower acts on
  cmat gns_from_span;     ///< module coordinates of the span basis of C
  cmat span_from_gns;     ///< inverse transform
  matrix_algebra base_source;  ///< C
  matrix_algebra base_target;  ///< A
  matrix_algebra embedded_source;  ///< lambda(C) as a subalgebra of the tower

  /// Module coordinates of an element of C.
  cvec gns(const cmat& x) const {
    return gns_from_span * base_source.span().coords(x);
  }
  /// Element of C with the given module coordinates.
  cmat ungns(const cvec& v) const {
    return base_source.span().from_coords(span_from_gns * v);
  }
  /// Pull an element of lambda(C) back to C.
  cmat unembed(const cmat& z) const {
    // lambda(x) xi(1) = xi(x)
    return ungns(z * gns(cmat::Identity(base_source.ambient(), base_source.ambient())));
  }
};

inline basic_construction_t basic_construction(const cond_expectation& e,
                                               double tol = default_tol) {
  const matrix_algebra& c = e.source();
  const long m = c.dim();
  // metric: t_kl = tau(E(c_k^* c_l)); module basis orthonormal for it
  cmat t = cmat::Zero(m, m);
  std::vector<cmat> lk(m);  // left multiplication in span coordinates
  for (long k = 0; k < m; ++k) {
    lk[k].resize(m, m);
    for (long l = 0; l < m; ++l) {
      cmat prod = c.basis(k) * c.basis(l);
      lk[k].col(l) = c.span().coords(prod);
      t(k, l) = e.apply(c.basis(k).adjoint() * c.basis(l)).trace();
    }
  }
  t = 0.5 * (t + t.adjoint());
  cmat t_sqrt = psd_sqrt(t, tol);       // span coords -> module coords
  cmat t_inv_sqrt = psd_inv_sqrt(t, tol);

  std::vector<cmat> lambda(m);
  for (long k = 0; k < m; ++k) lambda[k] = t_sqrt * lk[k] * t_inv_sqrt;
  cmat jones = t_sqrt * e.action_coords() * t_inv_sqrt;
  jones = 0.5 * (jones + jones.adjoint());

  // span of lambda(x) e lambda(y) over the basis of C
  std::vector<cmat> pre_left(m), pre_right(m);
  for (long k = 0; k < m; ++k) {
    pre_left[k] = lambda[k] * jones;
    pre_right[k] = jones * lambda[k];
  }
  cmat candidates(m * m, m * m);
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < m; ++j)
      candidates.col(i * m + j) = vec(cmat(pre_left[i] * lambda[j]));
  double max_norm = candidates.colwise().norm().maxCoeff();
  cmat basis = detail::mgs_orthonormalize(candidates, tol * std::max(1.0, max_norm));
  subspace tower_span(m, m, std::move(basis));
  if (!tower_span.contains(cmat::Identity(m, m), 1e-7))
    throw near_singular_error(
        "identity is not reached by the basic construction span; E is not of "
        "index-finite type at this tolerance");

  basic_construction_t out;
  out.tower = matrix_algebra(m, std::move(tower_span));
  out.jones = std::move(jones);
  out.module_dim = m;
  out.gns_from_span = t_sqrt;
  out.span_from_gns = t_inv_sqrt;
  out.base_source = c;
  out.base_target = e.target();
  {
    std::vector<cmat> ins, outs;
    for (long k = 0; k < m; ++k) {
      ins.push_back(c.basis(k));
      outs.push_back(lambda[k]);
    }
    double resid = 0.0;
    out.embed = linear_map::from_samples(ins, outs, tol, &resid);
    if (resid > 1e-7) throw inconsistent_span_error("left regular embedding is not linear");
    out.embedded_source = make_algebra(m, std::move(outs), tol);
  }

  // Jones relations
  double worst = hs_norm(out.jones * out.jones - out.jones);
  for (long k = 0; k < m; ++k) {
    cmat lx = out.embed.apply(c.basis(k));
    worst = std::max(worst, hs_norm(out.jones * lx * out.jones -
                                    out.embed.apply(e.apply(c.basis(k))) * out.jones));
  }
  for (long i = 0; i < e.target().dim(); ++i) {
    cmat la = out.embed.apply(e.target().basis(i));
    worst = std::max(worst, hs_norm(la * out.jones - out.jones * la));
  }
  if (worst > 1e-7)
    throw axiom_violation_error("Jones relations fail in the basic construction");
  return out;
}

// ---------------------------------------------------------------------------
// dual expectation
// ---------------------------------------------------------------------------

/// The dual expectation C_1 -> lambda(C) with
/// E'(lambda(x) e lambda(y)) = lambda(Ind^-1 x y), extended from the
/// spanning set by least squares.
inline cond_expectation dual_expectation(const basic_construction_t& bc,
                                         const cond_expectation& e,
                                         double tol = default_tol) {
  const matrix_algebra& c = e.source();
  const long m = c.dim();
  cmat ind = e.index ? *e.index : watatani_index(e, tol);
  cmat ind_inv = psd_inverse(0.5 * (ind + ind.adjoint()), tol);

  std::vector<cmat> lambda(m), pre_left(m);
  for (long k = 0; k < m; ++k) {
    lambda[k] = bc.embed.apply(c.basis(k));
    pre_left[k] = lambda[k] * bc.jones;
  }
  const long n1 = bc.tower.dim();
  const long nn = bc.module_dim * bc.module_dim;
  cmat sources(n1, m * m);
  cmat targets(n1, m * m);
  const cmat& tb = bc.tower.span().basis_matrix();
  // chunked so the flattened spanning elements never sit in memory all at once
  const long chunk = std::max<long>(1, (1 << 22) / std::max<long>(1, nn));
  cmat buf_s(nn, chunk), buf_t(nn, chunk);
  long filled = 0, col0 = 0;
  auto flush = [&]() {
    if (filled == 0) return;
    sources.middleCols(col0, filled) = tb.adjoint() * buf_s.leftCols(filled);
    targets.middleCols(col0, filled) = tb.adjoint() * buf_t.leftCols(filled);
    col0 += filled;
    filled = 0;
  };
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < m; ++j) {
      buf_s.col(filled) = vec(cmat(pre_left[i] * lambda[j]));
      buf_t.col(filled) = vec(bc.embed.apply(ind_inv * c.basis(i) * c.basis(j)));
      if (++filled == chunk) flush();
    }
  flush();
  cmat action = targets * pinv(sources, tol);
  double resid = (action * sources - targets).cwiseAbs().maxCoeff();
  if (resid > 1e-8 * std::max(1.0, targets.cwiseAbs().maxCoeff()) * 10.0)
    throw inconsistent_span_error("dual expectation is ill-defined on the spanning set");
  cond_expectation dual(bc.tower, bc.embedded_source, std::move(action));
  return dual;
}

// ---------------------------------------------------------------------------
// downward data
// ---------------------------------------------------------------------------

/// P = {p}' intersect A and E^P(a) = Ind_W(E) E(p a p), for a full projection
/// p in C with E(p) = Ind^-1. Verifies that A subset C is the basic
/// construction of P subset A with Jones projection p.
struct downward_result {
  matrix_algebra p_algebra;     ///< P
  cond_expectation expectation; ///< E^P : A -> P
};

inline downward_result downward_data(const cond_expectation& e, const cmat& p,
                                     double tol = default_tol) {
  const matrix_algebra& c = e.source();
  const matrix_algebra& a = e.target();
  cmat ind = e.index ? *e.index : watatani_index(e, tol);
  cmat ind_inv = psd_inverse(0.5 * (ind + ind.adjoint()), tol);
  check_projection(p, tol);
  if (!is_full_projection(p, c, tol))
    throw not_full_error("downward projection is not full in C");
  if (hs_norm(e.apply(p) - ind_inv) > 1e-7)
    throw bad_projection_error("E(p) differs from the inverse index");

  matrix_algebra palg = commutant_of_set({p}, a, tol);
  cmat action(a.dim(), a.dim());
  for (long i = 0; i < a.dim(); ++i) {
    cmat val = ind * e.apply(p * a.basis(i) * p);
    action.col(i) = a.span().coords(val);
  }
  // E^P lands in P and acts on A; represent on the inclusion P subset A
  cond_expectation ep(a, palg, std::move(action));

  // Jones relation with p: p a p = E^P(a) p, and A p A spans C
  double worst = 0.0;
  for (long i = 0; i < a.dim(); ++i) {
    cmat ai = a.basis(i);
    worst = std::max(worst, hs_norm(p * ai * p - ep.apply(ai) * p));
  }
  if (worst > 1e-7)
    throw axiom_violation_error("p fails the Jones relation for the recovered expectation");
  {
    std::vector<cmat> ideal;
    ideal.reserve(a.dim() * a.dim());
    for (long i = 0; i < a.dim(); ++i) {
      cmat ap = a.basis(i) * p;
      for (long j = 0; j < a.dim(); ++j) ideal.push_back(ap * a.basis(j));
    }
    if (orthonormalize(ideal, tol, c.ambient(), c.ambient()).dim() != c.dim())
      throw axiom_violation_error("A p A does not span C; not a basic construction");
  }
  return {std::move(palg), std::move(ep)};
}

}  // namespace morita
