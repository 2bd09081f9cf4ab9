#pragma once

#include "morita/condexp.hpp"

namespace morita {

// ---------------------------------------------------------------------------
// Hilbert bimodules in concrete corner form
// ---------------------------------------------------------------------------

/// An A-B bimodule realized as a subspace of dl x dr matrices, the corner
/// picture of a linking algebra with the two corner units normalized to the
/// diagonal blocks. Both inner products are literal matrix products:
///   left  <x,y> = x y^*  (lands in the left algebra)
///   right <x,y> = x^* y  (lands in the right algebra)
/// so the compatibility identity <x,y>_left z = x <y,z>_right is exact.
struct corner_bimodule {
  matrix_algebra left;   ///< acts by left multiplication
  matrix_algebra right;  ///< acts by right multiplication
  subspace space;        ///< subspace of left.ambient() x right.ambient() matrices

  long rows() const { return left.ambient(); }
  long cols() const { return right.ambient(); }
  long dim() const { return space.dim(); }
  cmat basis(long i) const { return space.element(i); }
};

/// Worst violation of the bimodule invariants: inner products landing in the
/// algebras and closure of the space under both actions.
inline double bimodule_defect(const corner_bimodule& x) {
  double worst = 0.0;
  auto dist_to = [](const subspace& s, const cmat& m) {
    return hs_norm(m - s.project(m)) / std::max(1.0, hs_norm(m));
  };
  for (long i = 0; i < x.dim(); ++i)
    for (long j = 0; j < x.dim(); ++j) {
      cmat xi = x.basis(i), xj = x.basis(j);
      worst = std::max(worst, dist_to(x.left.span(), xi * xj.adjoint()));
      worst = std::max(worst, dist_to(x.right.span(), xi.adjoint() * xj));
    }
  for (long a = 0; a < x.left.dim(); ++a)
    for (long i = 0; i < x.dim(); ++i)
      worst = std::max(worst, dist_to(x.space, x.left.basis(a) * x.basis(i)));
  for (long b = 0; b < x.right.dim(); ++b)
    for (long i = 0; i < x.dim(); ++i)
      worst = std::max(worst, dist_to(x.space, x.basis(i) * x.right.basis(b)));
  return worst;
}

inline corner_bimodule make_bimodule(matrix_algebra left, matrix_algebra right,
                                     const std::vector<cmat>& spanning,
                                     double tol = default_tol) {
  corner_bimodule out{std::move(left), std::move(right),
                      orthonormalize(spanning, tol, 0, 0)};
  if (spanning.empty())
    out.space = subspace::empty(out.left.ambient(), out.right.ambient());
  if (out.space.rows() != out.left.ambient() || out.space.cols() != out.right.ambient())
    throw input_shape_error("bimodule space has the wrong matrix shape");
  double defect = bimodule_defect(out);
  if (defect > 1e-7)
    throw axiom_violation_error("bimodule invariants fail (defect " +
                                std::to_string(defect) + ")");
  return out;
}

/// The conjugate bimodule: corners swapped and every element replaced by its
/// adjoint, so the two inner products exchange roles.
inline corner_bimodule dual_bimodule(const corner_bimodule& x, double tol = default_tol) {
  std::vector<cmat> adj;
  adj.reserve(x.dim());
  for (long i = 0; i < x.dim(); ++i) adj.push_back(x.basis(i).adjoint());
  corner_bimodule out{x.right, x.left,
                      orthonormalize(adj, tol, x.cols(), x.rows())};
  if (out.space.dim() == 0) out.space = subspace::empty(x.cols(), x.rows());
  return out;
}

// ---------------------------------------------------------------------------
// fullness report
// ---------------------------------------------------------------------------

struct equivalence_report {
  long left_span_dim = 0;   ///< dim span{ x y^* }
  long right_span_dim = 0;  ///< dim span{ x^* y }
  long left_alg_dim = 0;
  long right_alg_dim = 0;
  bool full_left() const { return left_span_dim == left_alg_dim; }
  bool full_right() const { return right_span_dim == right_alg_dim; }
  bool passes() const { return full_left() && full_right(); }
};

inline equivalence_report check_equivalence(const corner_bimodule& x,
                                            double tol = default_tol) {
  equivalence_report rep;
  rep.left_alg_dim = x.left.dim();
  rep.right_alg_dim = x.right.dim();
  std::vector<cmat> l, r;
  for (long i = 0; i < x.dim(); ++i)
    for (long j = 0; j < x.dim(); ++j) {
      l.push_back(x.basis(i) * x.basis(j).adjoint());
      r.push_back(x.basis(i).adjoint() * x.basis(j));
    }
  rep.left_span_dim = orthonormalize(l, tol, x.rows(), x.rows()).dim();
  rep.right_span_dim = orthonormalize(r, tol, x.cols(), x.cols()).dim();
  return rep;
}

// ---------------------------------------------------------------------------
// frames
// ---------------------------------------------------------------------------

/// Elements x_1..x_n of X with sum_i x_i^* x_i = 1_B, produced by the
/// Parseval normalization of a basis of X.
inline std::vector<cmat> make_frame(const subspace& xspace, const matrix_algebra& b,
                                    double tol = default_tol) {
  if (xspace.dim() == 0) throw frame_not_found_error("the space is zero");
  cmat t = cmat::Zero(b.ambient(), b.ambient());
  for (long i = 0; i < xspace.dim(); ++i)
    t += xspace.element(i).adjoint() * xspace.element(i);
  if (!b.contains(t, 1e-6))
    throw frame_not_found_error("frame operator leaves the right algebra");
  cmat r;
  try {
    r = psd_inv_sqrt(0.5 * (t + t.adjoint()), tol);
  } catch (const near_singular_error&) {
    throw frame_not_found_error("frame operator is singular; the space is not full");
  }
  std::vector<cmat> frame;
  frame.reserve(xspace.dim());
  cmat check = cmat::Zero(b.ambient(), b.ambient());
  for (long i = 0; i < xspace.dim(); ++i) {
    cmat xi = xspace.element(i) * r;
    if (!xspace.contains(xi, 1e-6))
      throw frame_not_found_error("normalized frame vector leaves the space");
    check += xi.adjoint() * xi;
    frame.push_back(std::move(xi));
  }
  if (hs_norm(check - identity(b.ambient())) > 1e-7)
    throw frame_not_found_error("frame identity fails after normalization");
  return frame;
}

// ---------------------------------------------------------------------------
// interior tensor product
// ---------------------------------------------------------------------------

/// X tensor_B Z realized as span{ x z }; the matrix-product realization has
/// the induced inner products on the nose, and its kernel is exactly the
/// null space of the semi-inner product, so the quotient happens inside
/// orthonormalize.
inline corner_bimodule interior_tensor(const corner_bimodule& x, const corner_bimodule& z,
                                       double tol = default_tol) {
  if (x.cols() != z.rows())
    throw input_shape_error("interior_tensor: middle ambients do not match");
  if (!x.right.span().same_space_as(z.left.span(), 1e-6))
    throw input_shape_error("interior_tensor: right algebra of X differs from left algebra of Z");
  std::vector<cmat> prods;
  prods.reserve(x.dim() * z.dim());
  for (long i = 0; i < x.dim(); ++i)
    for (long j = 0; j < z.dim(); ++j) prods.push_back(x.basis(i) * z.basis(j));
  corner_bimodule out{x.left, z.right, orthonormalize(prods, tol, x.rows(), z.cols())};
  if (out.space.dim() == 0) out.space = subspace::empty(x.rows(), z.cols());
  return out;
}

// ---------------------------------------------------------------------------
// bimodule conditional expectations
// ---------------------------------------------------------------------------

/// E^X : Y -> X together with the algebra-level expectations it is
/// compatible with. big and small share the same matrix shape.
struct bimodule_expectation {
  corner_bimodule big;    ///< Y with the big algebras C, D
  corner_bimodule small;  ///< X with the small algebras A subset C, B subset D
  linear_map ex;          ///< the map Y -> X (zero off Y)
  cond_expectation ea;    ///< C -> A
  cond_expectation eb;    ///< D -> B
};

struct bimodule_report {
  double left_module = 0;   ///< E^X(c.x) = E^A(c).x
  double left_linear = 0;   ///< E^X(a.y) = a.E^X(y)
  double left_inner = 0;    ///< E^A(<y,x>_left) = <E^X(y), x>_left
  double right_module = 0;  ///< E^X(x.d) = x.E^B(d)
  double right_linear = 0;  ///< E^X(y.b) = E^X(y).b
  double right_inner = 0;   ///< E^B(<y,x>_right) = <E^X(y), x>_right
  double derived_left = 0;  ///< <E^X(y), x>_left lands in A
  double derived_right = 0; ///< <E^X(y), x>_right lands in B
  double fixes_small = 0;   ///< E^X(x) = x
  double range = 0;         ///< E^X(y) in X
  double norm_bound = 0;    ///< positive part of ||E^X(y)|| - ||y||

  double worst() const {
    return std::max({left_module, left_linear, left_inner, right_module, right_linear,
                     right_inner, derived_left, derived_right, fixes_small, range,
                     norm_bound});
  }
  bool passes(double threshold) const { return worst() <= threshold; }
};

inline bimodule_report check_bimodule_expectation(const bimodule_expectation& be,
                                                  long samples = 20,
                                                  std::uint64_t seed = 11) {
  bimodule_report rep;
  const auto& Y = be.big;
  const auto& X = be.small;
  auto exf = [&](const cmat& y) { return be.ex.apply(y); };

  for (long i = 0; i < X.dim(); ++i)
    rep.fixes_small = std::max(rep.fixes_small, hs_norm(exf(X.basis(i)) - X.basis(i)));
  for (long i = 0; i < Y.dim(); ++i) {
    cmat ey = exf(Y.basis(i));
    rep.range = std::max(rep.range, hs_norm(ey - X.space.project(ey)));
  }

  for (long c = 0; c < Y.left.dim(); ++c)
    for (long i = 0; i < X.dim(); ++i) {
      cmat ci = Y.left.basis(c), xi = X.basis(i);
      rep.left_module = std::max(rep.left_module,
                                 hs_norm(exf(ci * xi) - be.ea.apply(ci) * xi));
    }
  for (long a = 0; a < X.left.dim(); ++a)
    for (long i = 0; i < Y.dim(); ++i) {
      cmat ai = X.left.basis(a), yi = Y.basis(i);
      rep.left_linear = std::max(rep.left_linear, hs_norm(exf(ai * yi) - ai * exf(yi)));
    }
  for (long d = 0; d < Y.right.dim(); ++d)
    for (long i = 0; i < X.dim(); ++i) {
      cmat di = Y.right.basis(d), xi = X.basis(i);
      rep.right_module = std::max(rep.right_module,
                                  hs_norm(exf(xi * di) - xi * be.eb.apply(di)));
    }
  for (long b = 0; b < X.right.dim(); ++b)
    for (long i = 0; i < Y.dim(); ++i) {
      cmat bi = X.right.basis(b), yi = Y.basis(i);
      rep.right_linear = std::max(rep.right_linear, hs_norm(exf(yi * bi) - exf(yi) * bi));
    }
  for (long i = 0; i < Y.dim(); ++i)
    for (long j = 0; j < X.dim(); ++j) {
      cmat yi = Y.basis(i), xj = X.basis(j);
      cmat lip = yi * xj.adjoint();
      cmat rip = yi.adjoint() * xj;
      cmat el = exf(yi) * xj.adjoint();
      cmat er = exf(yi).adjoint() * xj;
      rep.left_inner = std::max(rep.left_inner, hs_norm(be.ea.apply(lip) - el));
      rep.right_inner = std::max(rep.right_inner, hs_norm(be.eb.apply(rip) - er));
      rep.derived_left =
          std::max(rep.derived_left, hs_norm(el - X.left.span().project(el)));
      rep.derived_right =
          std::max(rep.derived_right, hs_norm(er - X.right.span().project(er)));
    }

  rng gen(seed);
  for (long s = 0; s < samples; ++s) {
    cmat y = cmat::Zero(Y.rows(), Y.cols());
    for (long i = 0; i < Y.dim(); ++i) y += gen.gauss_cplx() * Y.basis(i);
    double ny = op_norm(y);
    if (ny == 0.0) continue;
    rep.norm_bound = std::max(rep.norm_bound, (op_norm(exf(y)) - ny) / ny);
  }
  rep.norm_bound = std::max(0.0, rep.norm_bound);
  return rep;
}

// ---------------------------------------------------------------------------
// one-sided expectations
// ---------------------------------------------------------------------------

/// The unique linear map E^X : Y -> X with <E^X(y), x>_right = E^B(<y,x>_right)
/// for every x in X, solved over the right inner products.
inline linear_map right_expectation_from(const cond_expectation& eb,
                                         const corner_bimodule& y, const subspace& xspace,
                                         double tol = default_tol) {
  const long rows = y.rows(), cols = y.cols();
  if (xspace.rows() != rows || xspace.cols() != cols)
    throw input_shape_error("right_expectation_from: X does not sit inside Y");
  const long nx = xspace.dim();
  if (nx == 0) throw rank_deficient_error("X is zero");
  // constraints x_j^adj w = E^B(x_j^adj y) for w in span X with coordinates xi
  cmat sys(nx * cols * cols, nx);
  for (long j = 0; j < nx; ++j) {
    cmat lhs = xspace.element(j).adjoint();
    for (long t = 0; t < nx; ++t)
      sys.block(j * cols * cols, t, cols * cols, 1) = vec(cmat(lhs * xspace.element(t)));
  }
  Eigen::BDCSVD<cmat> svd(sys, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(sv.size() - 1) <= tol * sv(0) * 100.0)
    throw rank_deficient_error("defining system is singular; X is not full on the right");
  std::vector<cmat> ins, outs;
  for (long i = 0; i < y.dim(); ++i) {
    cmat yi = y.basis(i);
    cvec rhs(nx * cols * cols);
    for (long j = 0; j < nx; ++j)
      rhs.segment(j * cols * cols, cols * cols) =
          vec(eb.apply(xspace.element(j).adjoint() * yi));
    cvec xi = svd.solve(rhs);
    if ((sys * xi - rhs).norm() > 1e-7 * std::max(1.0, rhs.norm()))
      throw rank_deficient_error("defining relation has no solution; X is not full");
    ins.push_back(yi);
    outs.push_back(xspace.from_coords(xi));
  }
  double resid = 0.0;
  linear_map ex = linear_map::from_samples(ins, outs, tol, &resid);
  if (resid > 1e-7)
    throw rank_deficient_error("right expectation solve left a large residual");
  return ex;
}

/// The unique linear map E^A : C -> A with E^A(c) x = E^X(c x) for all x in
/// X; verified to be a conditional expectation of index-finite type.
inline cond_expectation induced_left_expectation(const linear_map& ex,
                                                 const corner_bimodule& y,
                                                 const subspace& xspace,
                                                 const matrix_algebra& a,
                                                 const matrix_algebra& c,
                                                 double tol = default_tol) {
  const long rows = y.rows(), cols = y.cols();
  const long na = a.dim();
  cmat sys(xspace.dim() * rows * cols, na);
  for (long j = 0; j < xspace.dim(); ++j) {
    cmat xj = xspace.element(j);
    for (long t = 0; t < na; ++t)
      sys.block(j * rows * cols, t, rows * cols, 1) = vec(cmat(a.basis(t) * xj));
  }
  Eigen::BDCSVD<cmat> svd(sys, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(sv.size() - 1) <= tol * sv(0) * 100.0)
    throw rank_deficient_error("left action on X is degenerate");
  cmat action(c.dim(), c.dim());
  double resid = 0.0;
  for (long i = 0; i < c.dim(); ++i) {
    cmat ci = c.basis(i);
    cvec rhs(xspace.dim() * rows * cols);
    for (long j = 0; j < xspace.dim(); ++j)
      rhs.segment(j * rows * cols, rows * cols) = vec(ex.apply(ci * xspace.element(j)));
    cvec alpha = svd.solve(rhs);
    resid = std::max(resid, (sys * alpha - rhs).norm());
    cmat ea_ci = cmat::Zero(rows, rows);
    for (long t = 0; t < na; ++t) ea_ci += alpha(t) * a.basis(t);
    action.col(i) = c.span().coords(ea_ci);
  }
  if (resid > 1e-7)
    throw rank_deficient_error("induced expectation has no exact solution");
  cond_expectation ea(c, a, std::move(action));
  auto rep = verify_expectation(ea);
  if (!rep.passes(1e-7))
    throw axiom_violation_error("induced map is not a conditional expectation (worst " +
                                std::to_string(rep.worst()) + ")");
  return with_index_data(ea, tol);  // index-finite type: the frame algorithm must succeed
}

// ---------------------------------------------------------------------------
// the algebra of module maps (rank-one operators)
// ---------------------------------------------------------------------------

/// For a right Hilbert module Y in corner form the rank-one operator
/// theta_{x,y} z = x <y,z>_right is left multiplication by x y^*; the span of
/// these over Y is the compact-operator algebra C and the span over the
/// subspace X is the subalgebra A. Both are cut to the support projection so
/// they come out unital.
struct rank_one_result {
  matrix_algebra big;           ///< C, generated by theta over Y
  matrix_algebra small;         ///< A, generated by theta over X
  corner_bimodule module;       ///< Y as a C - D bimodule on the cut support
  subspace small_space;         ///< X inside the cut module
  std::vector<cmat> frame;      ///< frame {x_i} in X with sum theta_{x_i,x_i} = 1
  cmat support_isometry;        ///< columns span the support of the module
};

inline rank_one_result rank_one_algebra(const subspace& yspace, const matrix_algebra& right_d,
                                        const subspace& xspace, double tol = default_tol) {
  if (xspace.rows() != yspace.rows() || xspace.cols() != yspace.cols())
    throw input_shape_error("rank_one_algebra: X does not sit inside Y");
  if (yspace.cols() != right_d.ambient())
    throw input_shape_error("rank_one_algebra: module columns do not match the right algebra");
  // frame on the left support: S = sum g g^*, frame x_i = S^(-1/2) g_i
  cmat s = cmat::Zero(yspace.rows(), yspace.rows());
  for (long i = 0; i < xspace.dim(); ++i)
    s += xspace.element(i) * xspace.element(i).adjoint();
  Eigen::SelfAdjointEigenSolver<cmat> es(0.5 * (s + s.adjoint()));
  double lmax = es.eigenvalues().size() ? es.eigenvalues().maxCoeff() : 0.0;
  if (lmax <= 0.0) throw frame_not_found_error("X is zero");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(es.eigenvalues().size());
  for (long i = 0; i < w.size(); ++i)
    if (es.eigenvalues()(i) > tol * lmax * 100.0) w(i) = 1.0 / std::sqrt(es.eigenvalues()(i));
  cmat s_inv_half = es.eigenvectors() * w.asDiagonal() * es.eigenvectors().adjoint();
  std::vector<cmat> frame;
  cmat support = cmat::Zero(yspace.rows(), yspace.rows());
  for (long i = 0; i < xspace.dim(); ++i) {
    cmat xi = s_inv_half * xspace.element(i);
    if (!xspace.contains(xi, 1e-6))
      throw frame_not_found_error("frame normalization leaves X");
    support += xi * xi.adjoint();
    frame.push_back(std::move(xi));
  }
  // the frame must reproduce all of Y: support acts as the unit on Y
  for (long i = 0; i < yspace.dim(); ++i) {
    cmat yi = yspace.element(i);
    if (hs_norm(support * yi - yi) > 1e-6 * std::max(1.0, hs_norm(yi)))
      throw frame_not_found_error("the reconstruction identity fails on Y");
  }

  cmat v = range_isometry(0.5 * (support + support.adjoint()), 1e-7);
  auto span_of_products = [&](const subspace& sp) {
    std::vector<cmat> prods;
    for (long i = 0; i < sp.dim(); ++i)
      for (long j = 0; j < sp.dim(); ++j)
        prods.push_back(v.adjoint() * sp.element(i) * sp.element(j).adjoint() * v);
    return prods;
  };
  rank_one_result out;
  out.big = make_algebra(v.cols(), span_of_products(yspace), tol);
  out.small = make_algebra(v.cols(), span_of_products(xspace), tol);
  if (!out.big.contains(out.small, 1e-6))
    throw not_subalgebra_error("rank-one span over X leaves the algebra over Y");
  std::vector<cmat> cut_y, cut_x, cut_frame;
  for (long i = 0; i < yspace.dim(); ++i) cut_y.push_back(v.adjoint() * yspace.element(i));
  for (long i = 0; i < xspace.dim(); ++i) cut_x.push_back(v.adjoint() * xspace.element(i));
  for (const auto& f : frame) cut_frame.push_back(v.adjoint() * f);
  out.module = make_bimodule(out.big, right_d, cut_y, tol);
  out.small_space = orthonormalize(cut_x, tol, v.cols(), yspace.cols());
  out.frame = std::move(cut_frame);
  out.support_isometry = std::move(v);
  return out;
}

// ---------------------------------------------------------------------------
// realization of expectation modules in corner form
// ---------------------------------------------------------------------------

/// C as an equivalence bimodule between its basic construction and the target
/// of E, realized concretely: eta(x) stacks the blocks E(u_i^* x) over a
/// quasi-basis, so eta(x)^* eta(y) = E(x^* y) holds exactly and the tower
/// acts on the cut row support.
struct realized_module {
  corner_bimodule module;   ///< left: concretized tower copy, right: target of E
  linear_map embed_space;   ///< C -> module space
  linear_map embed_left;    ///< tower ambient -> concretized left algebra
  matrix_algebra embedded_base;  ///< image of lambda(C) under embed_left
};

inline realized_module realize_base_module(const basic_construction_t& bc,
                                           const cond_expectation& e,
                                           double tol = default_tol) {
  const matrix_algebra& c = e.source();
  const long d = c.ambient();
  const auto& qb = e.quasi ? *e.quasi
                           : throw axiom_violation_error("realize_base_module needs the quasi-basis");
  const long n = static_cast<long>(qb.size());
  auto eta = [&](const cmat& x) {
    cmat out(n * d, d);
    for (long i = 0; i < n; ++i) out.middleRows(i * d, d) = e.apply(qb[i].second * x);
    return out;
  };
  // cut the rows to the joint column support
  std::vector<cmat> columns;
  std::vector<cmat> etas;
  for (long k = 0; k < c.dim(); ++k) {
    etas.push_back(eta(c.basis(k)));
    for (long j = 0; j < d; ++j) columns.push_back(etas.back().col(j));
  }
  subspace colspan = orthonormalize(columns, tol, n * d, 1);
  cmat q = colspan.basis_matrix();
  const long r = q.cols();

  std::vector<cmat> cut;
  cut.reserve(etas.size());
  for (auto& m : etas) cut.push_back(q.adjoint() * m);
  // inner products must be preserved by the cut
  for (long i = 0; i < c.dim(); ++i)
    for (long j = 0; j < c.dim(); ++j) {
      cmat want = e.apply(c.basis(i).adjoint() * c.basis(j));
      if (hs_norm(cut[i].adjoint() * cut[j] - want) > 1e-6)
        throw axiom_violation_error("module realization distorts the inner product");
    }

  realized_module out;
  std::vector<cmat> cbasis = c.basis_list();
  double resid = 0.0;
  out.embed_space = linear_map::from_samples(cbasis, cut, tol, &resid);
  if (resid > 1e-7) throw inconsistent_span_error("module embedding is not linear");

  // concretize the tower action: zeta(z) eta(x) = eta(z . x) with the module
  // action z . x pulled through the tower coordinates
  cmat wide_in(r, static_cast<long>(cut.size()) * d);
  for (std::size_t k = 0; k < cut.size(); ++k)
    wide_in.middleCols(static_cast<long>(k) * d, d) = cut[k];
  cmat wide_pinv = pinv(wide_in, tol);
  std::vector<cmat> tower_basis = bc.tower.basis_list();
  std::vector<cmat> zetas;
  zetas.reserve(tower_basis.size());
  for (const auto& z : tower_basis) {
    cmat wide_out(r, wide_in.cols());
    for (std::size_t k = 0; k < cut.size(); ++k) {
      cmat zx = bc.ungns(z * bc.gns(cbasis[k]));
      wide_out.middleCols(static_cast<long>(k) * d, d) = out.embed_space.apply(zx);
    }
    zetas.push_back(wide_out * wide_pinv);
  }
  out.embed_left = linear_map::from_samples(tower_basis, zetas, tol, &resid);
  if (resid > 1e-7) throw inconsistent_span_error("tower concretization is not linear");
  matrix_algebra left = make_algebra(r, zetas, tol);
  {
    std::vector<cmat> base_imgs;
    for (long k = 0; k < c.dim(); ++k)
      base_imgs.push_back(out.embed_left.apply(bc.embed.apply(cbasis[k])));
    out.embedded_base = make_algebra(r, base_imgs, tol);
  }
  out.module = make_bimodule(std::move(left), e.target(), cut, tol);
  return out;
}

}  // namespace morita
