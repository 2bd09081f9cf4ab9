#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "morita/numlin.hpp"

namespace morita {

// ---------------------------------------------------------------------------
// finite-dimensional C*-algebras as concrete unital *-subalgebras of M_d
// ---------------------------------------------------------------------------

/// A unital *-subalgebra of the d x d complex matrices, stored as an
/// orthonormal spanning set. The unit is always the ambient identity.
/// Immutable after construction.
class matrix_algebra {
 public:
  matrix_algebra() : ambient_(0) {}

  matrix_algebra(long ambient, subspace span) : ambient_(ambient), span_(std::move(span)) {
    if (span_.rows() != ambient_ || span_.cols() != ambient_)
      throw input_shape_error("algebra span must consist of ambient x ambient matrices");
  }

  long ambient() const { return ambient_; }
  long dim() const { return span_.dim(); }
  const subspace& span() const { return span_; }
  cmat unit() const { return cmat::Identity(ambient_, ambient_); }
  cmat basis(long i) const { return span_.element(i); }
  std::vector<cmat> basis_list() const { return span_.elements(); }

  bool contains(const cmat& x, double tol = default_tol) const {
    return span_.contains(x, tol);
  }

  bool contains(const matrix_algebra& other, double tol = default_tol) const {
    return other.ambient() == ambient_ && span_.contains(other.span(), tol);
  }

  cmat project(const cmat& x) const { return span_.project(x); }

  /// Worst violation of *-closure, product closure, and unit membership.
  /// Product pairs are strided once the algebra gets large, and residuals are
  /// computed blockwise.
  double closure_defect(double tol = default_tol) const {
    (void)tol;
    double worst = 0.0;
    if (ambient_ == 0) return worst;
    const long m = dim();
    std::vector<cmat> probes;
    probes.reserve(2 * m + 2);
    probes.push_back(unit());
    for (long i = 0; i < m; ++i) probes.push_back(basis(i).adjoint());
    const long npairs = m * m;
    const long stride = std::max<long>(1, npairs / 512);
    for (long t = 0; t < npairs; t += stride) probes.push_back(basis(t / m) * basis(t % m));

    const cmat& b = span_.basis_matrix();
    const long chunk = 256;
    for (std::size_t c0 = 0; c0 < probes.size(); c0 += chunk) {
      long nc = std::min<long>(chunk, static_cast<long>(probes.size() - c0));
      cmat block(ambient_ * ambient_, nc);
      for (long j = 0; j < nc; ++j) block.col(j) = vec(probes[c0 + j]);
      cmat resid = block - b * (b.adjoint() * block);
      for (long j = 0; j < nc; ++j) {
        double scale = std::max(1.0, block.col(j).norm());
        worst = std::max(worst, resid.col(j).norm() / scale);
      }
    }
    return worst;
  }

 private:
  long ambient_;
  subspace span_;
};

/// Orthonormalize a spanning set (with the identity adjoined) and verify the
/// result is a unital *-subalgebra.
inline matrix_algebra make_algebra(long ambient, std::vector<cmat> spanning,
                                   double tol = default_tol) {
  spanning.push_back(cmat::Identity(ambient, ambient));
  for (const auto& m : spanning)
    if (m.rows() != ambient || m.cols() != ambient)
      throw input_shape_error("algebra elements must be ambient x ambient");
  matrix_algebra a(ambient, orthonormalize(spanning, tol, ambient, ambient));
  double defect = a.closure_defect(tol);
  if (defect > 100.0 * tol)
    throw axiom_violation_error("spanning set is not closed as a *-algebra (defect " +
                                std::to_string(defect) + ")");
  return a;
}

/// Full matrix algebra M_d.
inline matrix_algebra full_algebra(long d, double tol = default_tol) {
  std::vector<cmat> units;
  units.reserve(d * d);
  for (long i = 0; i < d; ++i)
    for (long j = 0; j < d; ++j) units.push_back(munit(d, i, j));
  return make_algebra(d, std::move(units), tol);
}

/// Scalar multiples of the identity.
inline matrix_algebra scalar_algebra(long d, double tol = default_tol) {
  return make_algebra(d, {}, tol);
}

/// Smallest tolerance-closed unital *-subalgebra containing the generators:
/// adjoints are adjoined and products iterated until the span dimension
/// stabilizes.
inline matrix_algebra generate_algebra(long ambient, const std::vector<cmat>& generators,
                                       double tol = default_tol) {
  std::vector<cmat> current;
  current.push_back(cmat::Identity(ambient, ambient));
  for (const auto& g : generators) {
    if (g.rows() != ambient || g.cols() != ambient)
      throw input_shape_error("generators must be ambient x ambient");
    if (!all_finite(g)) throw input_shape_error("generator has non-finite entries");
    current.push_back(g);
    current.push_back(g.adjoint());
  }
  subspace sp = orthonormalize(current, tol, ambient, ambient);
  const long cap = std::max<long>(4, ambient * ambient);
  for (long iter = 0; iter <= cap; ++iter) {
    std::vector<cmat> next = sp.elements();
    long d = sp.dim();
    for (long i = 0; i < d; ++i)
      for (long j = 0; j < d; ++j) next.push_back(sp.element(i) * sp.element(j));
    subspace grown = orthonormalize(next, tol, ambient, ambient);
    if (grown.dim() == sp.dim()) return matrix_algebra(ambient, std::move(grown));
    sp = std::move(grown);
    if (sp.dim() >= ambient * ambient)
      return matrix_algebra(ambient, std::move(sp));
  }
  throw non_stabilizing_error("generated span keeps growing; tolerance is misconfigured");
}

// ---------------------------------------------------------------------------
// commutants
// ---------------------------------------------------------------------------

/// Relative commutant { x in ambient_alg : x s = s x for every s in S }.
inline matrix_algebra commutant(const matrix_algebra& s, const matrix_algebra& ambient_alg,
                                double tol = default_tol) {
  const long d = ambient_alg.ambient();
  if (s.ambient() != d) throw input_shape_error("commutant: ambient dimensions differ");
  if (!ambient_alg.contains(s, 100.0 * tol))
    throw not_subalgebra_error("commutant: S is not contained in the ambient algebra");
  const long m = ambient_alg.dim();
  const long k = s.dim();
  // [x, s] = 0 for x = V c:  rows stack ((s^T (x) I) - (I (x) s)) V over s
  cmat constraints(k * d * d, m);
  const cmat& V = ambient_alg.span().basis_matrix();
  cmat id = cmat::Identity(d, d);
  for (long t = 0; t < k; ++t) {
    cmat st = s.basis(t);
    cmat op = kron(st.transpose(), id) - kron(id, st);
    constraints.middleRows(t * d * d, d * d) = op * V;
  }
  subspace null = null_space(constraints, tol);
  std::vector<cmat> gens;
  gens.reserve(null.dim());
  for (long i = 0; i < null.dim(); ++i)
    gens.push_back(unvec(V * null.basis_matrix().col(i), d, d));
  return make_algebra(d, std::move(gens), tol);
}

/// Everything in ambient_alg commuting with the given matrices. The
/// generators need not lie in the algebra (constraints are formed on raw
/// ambient vectors).
inline matrix_algebra commutant_of_set(const std::vector<cmat>& gens,
                                       const matrix_algebra& ambient_alg,
                                       double tol = default_tol) {
  const long d = ambient_alg.ambient();
  const long m = ambient_alg.dim();
  cmat constraints(static_cast<long>(gens.size()) * d * d, m);
  const cmat& v = ambient_alg.span().basis_matrix();
  for (std::size_t t = 0; t < gens.size(); ++t) {
    const cmat& g = gens[t];
    if (g.rows() != d || g.cols() != d)
      throw input_shape_error("commutant_of_set: generator of wrong size");
    for (long i = 0; i < m; ++i) {
      cmat b = ambient_alg.basis(i);
      constraints.block(static_cast<long>(t) * d * d, i, d * d, 1) = vec(cmat(b * g - g * b));
    }
  }
  subspace null = null_space(constraints, tol);
  std::vector<cmat> basis;
  basis.reserve(null.dim());
  for (long i = 0; i < null.dim(); ++i)
    basis.push_back(unvec(v * null.basis_matrix().col(i), d, d));
  return make_algebra(d, std::move(basis), tol);
}

/// Center A' intersect A. Computed against a seeded pair of generic elements
/// and verified; generic pairs generate, so their relative commutant is the
/// center except on a null set, and failures retry with more elements.
inline matrix_algebra center(const matrix_algebra& a, double tol = default_tol,
                             std::uint64_t seed = 0x517cc1b7u) {
  if (a.dim() <= 8) return commutant(a, a, tol);
  rng gen(seed);
  auto random_element = [&](bool hermitian) {
    cmat m = cmat::Zero(a.ambient(), a.ambient());
    for (long i = 0; i < a.dim(); ++i) m += gen.gauss_cplx() * a.basis(i);
    if (hermitian) m = 0.5 * (m + cmat(m.adjoint()));
    return m;
  };
  for (int attempt = 0; attempt < 5; ++attempt) {
    std::vector<cmat> gens;
    gens.push_back(random_element(true));
    for (int extra = 0; extra <= attempt; ++extra) gens.push_back(random_element(false));
    matrix_algebra z = commutant_of_set(gens, a, tol);
    // verify centrality against the full basis
    double worst = 0.0;
    for (long i = 0; i < z.dim() && worst < 1e-7; ++i) {
      cmat zi = z.basis(i);
      for (long j = 0; j < a.dim(); ++j) {
        cmat bj = a.basis(j);
        worst = std::max(worst, hs_norm(zi * bj - bj * zi));
        if (worst >= 1e-7) break;
      }
    }
    if (worst < 1e-7) return z;
  }
  return commutant(a, a, tol);
}

// ---------------------------------------------------------------------------
// block structure (Wedderburn data)
// ---------------------------------------------------------------------------

struct block_info {
  long k = 0;               ///< simple summand is M_k
  long m = 0;               ///< multiplicity of the summand in the ambient representation
  cmat central_projection;  ///< minimal central projection cutting the summand
};

struct block_structure_t {
  std::vector<block_info> blocks;

  long total_dim() const {
    long s = 0;
    for (const auto& b : blocks) s += b.k * b.k;
    return s;
  }

  std::vector<long> block_dims() const {
    std::vector<long> out;
    out.reserve(blocks.size());
    for (const auto& b : blocks) out.push_back(b.k);
    return out;
  }
};

namespace detail {

inline long round_to_integer(double x, const char* what) {
  double r = std::round(x);
  if (std::abs(x - r) > 1e-6)
    throw degenerate_spectrum_error(std::string(what) + " is not an integer: " +
                                    std::to_string(x));
  return static_cast<long>(r);
}

}  // namespace detail

/// Minimal central projections, block dimensions and multiplicities. The
/// center is split with a random Hermitian combination of its basis drawn
/// from the given seed; up to five fresh draws are made before failing.
inline block_structure_t block_structure(const matrix_algebra& a, double tol = default_tol,
                                         std::uint64_t seed = 1) {
  const long d = a.ambient();
  matrix_algebra z = center(a, tol);
  const long nblocks = z.dim();
  std::vector<cmat> herm;
  for (long i = 0; i < z.dim(); ++i) {
    cmat b = z.basis(i);
    herm.push_back(0.5 * (b + b.adjoint()));
    herm.push_back(cplx(0, 0.5) * (b - b.adjoint()));
  }
  subspace herm_span = orthonormalize(herm, tol, d, d);

  rng gen(seed ^ 0x8f1bbcdcull);
  std::string failure = "no attempt made";
  for (int attempt = 0; attempt < 5; ++attempt) {
    cmat h = cmat::Zero(d, d);
    for (long i = 0; i < herm_span.dim(); ++i) h += gen.gauss() * herm_span.element(i);
    h = 0.5 * (h + h.adjoint());
    Eigen::SelfAdjointEigenSolver<cmat> es(h);
    Eigen::VectorXd lam = es.eigenvalues();
    double spread = lam.size() ? (lam.maxCoeff() - lam.minCoeff()) : 0.0;
    double gap = std::max(spread, 1.0) * 1e-7;
    // cluster sorted eigenvalues
    std::vector<std::pair<long, long>> clusters;  // [begin, end)
    long begin = 0;
    for (long i = 1; i <= lam.size(); ++i) {
      if (i == lam.size() || lam(i) - lam(i - 1) > gap) {
        clusters.emplace_back(begin, i);
        begin = i;
      }
    }
    if (static_cast<long>(clusters.size()) != nblocks) {
      failure = "central element produced " + std::to_string(clusters.size()) +
                " clusters, expected " + std::to_string(nblocks);
      continue;
    }
    block_structure_t out;
    bool ok = true;
    for (const auto& [b, e] : clusters) {
      cmat p = cmat::Zero(d, d);
      for (long i = b; i < e; ++i)
        p += es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
      if (!z.contains(p, 1e-6)) {
        failure = "spectral projection drifted out of the center";
        ok = false;
        break;
      }
      // corner p A p is a full matrix algebra of dimension k^2
      std::vector<cmat> corner;
      corner.reserve(a.dim());
      for (long i = 0; i < a.dim(); ++i) corner.push_back(p * a.basis(i) * p);
      long corner_dim = orthonormalize(corner, tol, d, d).dim();
      long k = detail::round_to_integer(std::sqrt(double(corner_dim)), "block dimension");
      if (k * k != corner_dim) {
        failure = "corner dimension is not a perfect square";
        ok = false;
        break;
      }
      long m = detail::round_to_integer(p.real().trace() / double(k), "block multiplicity");
      block_info info;
      info.k = k;
      info.m = m;
      info.central_projection = std::move(p);
      out.blocks.push_back(std::move(info));
    }
    if (!ok) continue;
    if (out.total_dim() != a.dim()) {
      failure = "sum of squared block dimensions misses the algebra dimension";
      continue;
    }
    // canonical block order: by k, then trace of p, then the trace pattern of
    // p against the ambient matrix units
    std::sort(out.blocks.begin(), out.blocks.end(),
              [d](const block_info& x, const block_info& y) {
                if (x.k != y.k) return x.k < y.k;
                double tx = x.central_projection.real().trace();
                double ty = y.central_projection.real().trace();
                if (std::abs(tx - ty) > 1e-8) return tx < ty;
                for (long i = 0; i < d; ++i)
                  for (long j = 0; j < d; ++j) {
                    cplx a_ = x.central_projection(i, j), b_ = y.central_projection(i, j);
                    if (std::abs(a_.real() - b_.real()) > 1e-8) return a_.real() < b_.real();
                    if (std::abs(a_.imag() - b_.imag()) > 1e-8) return a_.imag() < b_.imag();
                  }
                return false;
              });
    return out;
  }
  throw degenerate_spectrum_error(failure);
}

// ---------------------------------------------------------------------------
// inclusion matrices
// ---------------------------------------------------------------------------

struct inclusion_matrix_t {
  Eigen::MatrixXi entries;  ///< rows: blocks of the smaller algebra, cols: blocks of the larger

  bool operator==(const inclusion_matrix_t& o) const {
    return entries.rows() == o.entries.rows() && entries.cols() == o.entries.cols() &&
           entries == o.entries;
  }
};

/// Multiplicity of A-block i inside B-block j for a unital inclusion
/// A subset B, from the traces of products of minimal central projections.
inline inclusion_matrix_t inclusion_matrix(const matrix_algebra& a, const matrix_algebra& b,
                                           double tol = default_tol, std::uint64_t seed = 1) {
  if (a.ambient() != b.ambient())
    throw input_shape_error("inclusion_matrix: ambient dimensions differ");
  if (!b.contains(a, 100.0 * tol))
    throw not_subalgebra_error("inclusion_matrix: A is not contained in B");
  block_structure_t ba = block_structure(a, tol, seed);
  block_structure_t bb = block_structure(b, tol, seed);
  inclusion_matrix_t out;
  out.entries.resize(static_cast<long>(ba.blocks.size()), static_cast<long>(bb.blocks.size()));
  for (std::size_t i = 0; i < ba.blocks.size(); ++i)
    for (std::size_t j = 0; j < bb.blocks.size(); ++j) {
      // tr(p_i q_j) = lambda_ij * k_i * m_j
      double t = (ba.blocks[i].central_projection * bb.blocks[j].central_projection)
                     .real()
                     .trace();
      double lam = t / (double(ba.blocks[i].k) * double(bb.blocks[j].m));
      out.entries(static_cast<long>(i), static_cast<long>(j)) =
          static_cast<int>(detail::round_to_integer(lam, "inclusion multiplicity"));
    }
  // dimension bookkeeping: sum_i lambda_ij k_i = l_j for a unital inclusion
  for (std::size_t j = 0; j < bb.blocks.size(); ++j) {
    long s = 0;
    for (std::size_t i = 0; i < ba.blocks.size(); ++i)
      s += out.entries(static_cast<long>(i), static_cast<long>(j)) * ba.blocks[i].k;
    if (s != bb.blocks[j].k)
      throw axiom_violation_error("inclusion matrix fails dimension bookkeeping");
  }
  return out;
}

// ---------------------------------------------------------------------------
// projections and amplification
// ---------------------------------------------------------------------------

inline void check_projection(const cmat& p, double tol = default_tol) {
  double scale = std::max(1.0, hs_norm(p));
  if (hs_norm(p - p.adjoint()) > 100.0 * tol * scale ||
      hs_norm(p * p - p) > 100.0 * tol * scale)
    throw not_projection_error("matrix is not a self-adjoint idempotent");
}

/// True iff span{ a p b : a, b in A } is all of A.
inline bool is_full_projection(const cmat& p, const matrix_algebra& a,
                               double tol = default_tol) {
  if (p.rows() != a.ambient() || p.cols() != a.ambient())
    throw input_shape_error("projection has wrong ambient dimension");
  check_projection(p, tol);
  if (!a.contains(p, 100.0 * tol))
    throw not_projection_error("projection does not belong to the algebra");
  std::vector<cmat> ideal;
  ideal.reserve(a.dim() * a.dim());
  for (long i = 0; i < a.dim(); ++i) {
    cmat ap = a.basis(i) * p;
    for (long j = 0; j < a.dim(); ++j) ideal.push_back(ap * a.basis(j));
  }
  return orthonormalize(ideal, tol, a.ambient(), a.ambient()).dim() == a.dim();
}

/// M_n(A) acting on C^(n*d), with the n x n block grid carrying A entries.
inline matrix_algebra amplify(const matrix_algebra& a, long n, double tol = default_tol) {
  if (n < 1) throw input_shape_error("amplify: n must be at least 1");
  const long d = a.ambient();
  std::vector<cmat> gens;
  gens.reserve(n * n * a.dim());
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      for (long t = 0; t < a.dim(); ++t) gens.push_back(kron(munit(n, i, j), a.basis(t)));
  return make_algebra(n * d, std::move(gens), tol);
}

/// a (x) I_n inside M_n(A); the embedding that amplify extends.
inline cmat amplify_element(const cmat& a, long n) {
  return kron(cmat::Identity(n, n), a);
}

/// Isometry onto the range of a projection: columns form an orthonormal
/// basis of range(p), so V * V^adj = p and V^adj * V = identity.
inline cmat range_isometry(const cmat& p, double tol = default_tol) {
  check_projection(p, tol);
  Eigen::SelfAdjointEigenSolver<cmat> es(0.5 * (p + p.adjoint()));
  std::vector<long> keep;
  for (long i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) > 0.5) keep.push_back(i);
  cmat v(p.rows(), static_cast<long>(keep.size()));
  for (std::size_t t = 0; t < keep.size(); ++t) v.col(static_cast<long>(t)) = es.eigenvectors().col(keep[t]);
  return v;
}

/// Re-represent the corner p M p of an algebra on the range of p, giving a
/// unital algebra on C^rank(p).
inline matrix_algebra cut_corner(const matrix_algebra& big, const cmat& p,
                                 double tol = default_tol) {
  cmat v = range_isometry(p, tol);
  std::vector<cmat> gens;
  gens.reserve(big.dim());
  for (long i = 0; i < big.dim(); ++i)
    gens.push_back(v.adjoint() * big.basis(i) * v);
  return make_algebra(v.cols(), std::move(gens), tol);
}

}  // namespace morita
