#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "morita/errors.hpp"

namespace morita {

using cplx = std::complex<double>;
using cmat = Eigen::MatrixXcd;
using cvec = Eigen::VectorXcd;

/// Default relative tolerance for rank decisions and membership tests.
inline constexpr double default_tol = 1e-9;

// ---------------------------------------------------------------------------
// deterministic random numbers
// ---------------------------------------------------------------------------

/// Seeded generator with a platform-independent sequence (splitmix64 core,
/// Box-Muller for gaussians). Identical seeds give identical streams.
class rng {
 public:
  explicit rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// uniform in (0, 1]
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  double gauss() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u = uniform(), v = uniform();
    double r = std::sqrt(-2.0 * std::log(u));
    double a = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  cplx gauss_cplx() {
    double re = gauss();
    double im = gauss();
    return {re, im};
  }

  cmat gauss_matrix(long rows, long cols) {
    cmat m(rows, cols);
    for (long j = 0; j < cols; ++j)
      for (long i = 0; i < rows; ++i) m(i, j) = gauss_cplx();
    return m;
  }

  cmat hermitian(long d) {
    cmat g = gauss_matrix(d, d);
    return 0.5 * (g + g.adjoint());
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// ---------------------------------------------------------------------------
// small matrix helpers
// ---------------------------------------------------------------------------

inline bool all_finite(const cmat& m) {
  return m.allFinite();
}

/// Column-major flattening; inverse of unvec.
inline cvec vec(const cmat& m) {
  return Eigen::Map<const cvec>(m.data(), m.size());
}

inline cmat unvec(const cvec& v, long rows, long cols) {
  if (v.size() != rows * cols) throw input_shape_error("unvec size mismatch");
  return Eigen::Map<const cmat>(v.data(), rows, cols);
}

inline cmat kron(const cmat& a, const cmat& b) {
  cmat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (long j = 0; j < a.cols(); ++j)
    for (long i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Frobenius (Hilbert-Schmidt) inner product trace(a^* b), conjugate-linear
/// in the first slot.
inline cplx hs_inner(const cmat& a, const cmat& b) {
  return (a.adjoint() * b).trace();
}

inline double hs_norm(const cmat& a) { return a.norm(); }

/// Largest singular value.
inline double op_norm(const cmat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<cmat> svd(a);
  return svd.singularValues()(0);
}

inline cmat identity(long d) { return cmat::Identity(d, d); }

/// Matrix unit e_{ij} of size d.
inline cmat munit(long d, long i, long j) {
  cmat m = cmat::Zero(d, d);
  m(i, j) = 1.0;
  return m;
}

// ---------------------------------------------------------------------------
// subspaces of a matrix space
// ---------------------------------------------------------------------------

/// A subspace of the space of rows x cols complex matrices, held as an
/// orthonormal basis (Frobenius inner product) of flattened matrices.
/// Plain vector spaces use cols == 1. Immutable after construction.
class subspace {
 public:
  subspace() : rows_(0), cols_(0), basis_(0, 0) {}

  subspace(long rows, long cols, cmat basis)
      : rows_(rows), cols_(cols), basis_(std::move(basis)) {
    if (basis_.rows() != rows_ * cols_)
      throw input_shape_error("subspace basis has wrong ambient dimension");
  }

  static subspace empty(long rows, long cols) {
    return subspace(rows, cols, cmat(rows * cols, 0));
  }

  long rows() const { return rows_; }
  long cols() const { return cols_; }
  long dim() const { return basis_.cols(); }
  long ambient_dim() const { return rows_ * cols_; }

  const cmat& basis_matrix() const { return basis_; }

  cmat element(long i) const { return unvec(basis_.col(i), rows_, cols_); }

  std::vector<cmat> elements() const {
    std::vector<cmat> out;
    out.reserve(dim());
    for (long i = 0; i < dim(); ++i) out.push_back(element(i));
    return out;
  }

  /// Coordinates of the orthogonal projection of m onto this subspace.
  cvec coords(const cmat& m) const {
    check_shape(m);
    return basis_.adjoint() * vec(m);
  }

  cmat from_coords(const cvec& c) const {
    return unvec(basis_ * c, rows_, cols_);
  }

  /// Orthogonal projection of m onto the subspace.
  cmat project(const cmat& m) const { return from_coords(coords(m)); }

  bool contains(const cmat& m, double tol = default_tol) const {
    check_shape(m);
    double n = hs_norm(m);
    if (n == 0.0) return true;
    return hs_norm(m - project(m)) <= tol * std::max(1.0, n);
  }

  bool contains(const subspace& other, double tol = default_tol) const {
    if (other.rows() != rows_ || other.cols() != cols_) return false;
    for (long i = 0; i < other.dim(); ++i)
      if (!contains(other.element(i), tol)) return false;
    return true;
  }

  bool same_space_as(const subspace& other, double tol = default_tol) const {
    return dim() == other.dim() && contains(other, tol) && other.contains(*this, tol);
  }

  /// Operator-norm distance between the two orthogonal projections.
  double distance(const subspace& other) const {
    if (other.rows() != rows_ || other.cols() != cols_)
      throw input_shape_error("subspace distance: ambient mismatch");
    cmat p1 = basis_ * basis_.adjoint();
    cmat p2 = other.basis_ * other.basis_.adjoint();
    return op_norm(p1 - p2);
  }

 private:
  void check_shape(const cmat& m) const {
    if (m.rows() != rows_ || m.cols() != cols_)
      throw input_shape_error("matrix does not live in the subspace ambient");
  }

  long rows_, cols_;
  cmat basis_;
};

namespace detail {

/// Chunked modified Gram-Schmidt with one reorthogonalization pass.
/// Drops candidates whose residual is <= drop_thresh. Returns the basis
/// as columns. Deterministic in the input order.
inline cmat mgs_orthonormalize(const cmat& candidates, double drop_thresh) {
  const long n = candidates.rows();
  const long k = candidates.cols();
  const long max_rank = std::min<long>(n, k);
  cmat basis(n, max_rank);
  long nb = 0;
  const long chunk = 384;
  for (long c0 = 0; c0 < k && nb < max_rank; c0 += chunk) {
    long nc = std::min<long>(chunk, k - c0);
    cmat block = candidates.middleCols(c0, nc);
    if (nb > 0) {
      auto b = basis.leftCols(nb);
      block -= b * (b.adjoint() * block);
      block -= b * (b.adjoint() * block);
    }
    const long chunk_start = nb;
    for (long j = 0; j < nc && nb < max_rank; ++j) {
      cvec v = block.col(j);
      // older basis columns were removed blockwise; handle the ones added
      // within this chunk vector by vector
      for (int pass = 0; pass < 2; ++pass)
        for (long t = chunk_start; t < nb; ++t)
          v -= basis.col(t) * (basis.col(t).dot(v));
      double r = v.norm();
      if (r > drop_thresh) basis.col(nb++) = v / r;
    }
  }
  return basis.leftCols(nb);
}

}  // namespace detail

/// Orthonormal basis of the span of the given matrices. Candidates whose
/// residual after projection is <= tol * (largest input norm) are dropped.
/// An empty input yields the zero subspace.
inline subspace orthonormalize(const std::vector<cmat>& spanning, double tol = default_tol,
                               long rows_hint = 0, long cols_hint = 0) {
  if (spanning.empty()) return subspace::empty(rows_hint, cols_hint);
  const long rows = spanning.front().rows();
  const long cols = spanning.front().cols();
  cmat cand(rows * cols, static_cast<long>(spanning.size()));
  double max_norm = 0.0;
  for (std::size_t i = 0; i < spanning.size(); ++i) {
    const cmat& m = spanning[i];
    if (m.rows() != rows || m.cols() != cols)
      throw input_shape_error("orthonormalize: inputs of different shapes");
    if (!all_finite(m)) throw input_shape_error("orthonormalize: non-finite entries");
    cand.col(static_cast<long>(i)) = vec(m);
    max_norm = std::max(max_norm, hs_norm(m));
  }
  if (max_norm == 0.0) return subspace::empty(rows, cols);
  cmat basis = detail::mgs_orthonormalize(cand, tol * max_norm);
  return subspace(rows, cols, std::move(basis));
}

/// Basis of { v : ||L v|| <= tol * ||L|| * ||v|| }, by singular-value
/// thresholding at tol * sigma_max. L may be rectangular (rows are stacked
/// constraints). The zero map gives the full space.
inline subspace null_space(const cmat& L, double tol = default_tol) {
  const long n = L.cols();
  if (L.rows() == 0) return subspace(n, 1, cmat::Identity(n, n));
  Eigen::BDCSVD<cmat> svd(L, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double smax = sv.size() > 0 ? sv(0) : 0.0;
  if (smax == 0.0) return subspace(n, 1, cmat::Identity(n, n));
  long rank = 0;
  for (long i = 0; i < sv.size(); ++i)
    if (sv(i) > tol * smax) ++rank;
  cmat basis = svd.matrixV().rightCols(n - rank);
  return subspace(n, 1, std::move(basis));
}

namespace detail {

inline Eigen::SelfAdjointEigenSolver<cmat> hermitian_eigs(const cmat& h, double tol) {
  if (h.rows() != h.cols()) throw input_shape_error("expected a square matrix");
  double scale = std::max(1.0, hs_norm(h));
  if (hs_norm(h - h.adjoint()) > tol * scale * 10.0)
    throw input_shape_error("matrix is not Hermitian within tolerance");
  cmat hh = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<cmat> es(hh);
  if (es.info() != Eigen::Success) throw near_singular_error("eigensolver failed");
  return es;
}

}  // namespace detail

/// Hermitian PSD square root. Small negative eigenvalues within tolerance are
/// clamped to zero.
inline cmat psd_sqrt(const cmat& h, double tol = default_tol) {
  auto es = detail::hermitian_eigs(h, tol);
  Eigen::VectorXd lam = es.eigenvalues();
  double lmax = lam.size() ? lam.maxCoeff() : 0.0;
  if (lmax < 0.0) lmax = 0.0;
  for (long i = 0; i < lam.size(); ++i) {
    if (lam(i) < -10.0 * tol * std::max(1.0, lmax))
      throw near_singular_error("matrix is not positive semidefinite");
    lam(i) = std::sqrt(std::max(0.0, lam(i)));
  }
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

/// Hermitian PSD K with K * H * K = identity. Requires the smallest
/// eigenvalue to exceed tol * (largest eigenvalue).
inline cmat psd_inv_sqrt(const cmat& h, double tol = default_tol) {
  auto es = detail::hermitian_eigs(h, tol);
  Eigen::VectorXd lam = es.eigenvalues();
  if (lam.size() == 0) return h;
  double lmax = lam.maxCoeff();
  double lmin = lam.minCoeff();
  if (lmax <= 0.0 || lmin <= tol * lmax)
    throw near_singular_error("spectral condition violated in inverse square root");
  Eigen::VectorXd w(lam.size());
  for (long i = 0; i < lam.size(); ++i) w(i) = 1.0 / std::sqrt(lam(i));
  return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().adjoint();
}

/// Hermitian PSD inverse, computed as psd_inv_sqrt squared.
inline cmat psd_inverse(const cmat& h, double tol = default_tol) {
  cmat k = psd_inv_sqrt(h, tol);
  return k * k;
}

/// Moore-Penrose pseudoinverse with relative rank cutoff.
inline cmat pinv(const cmat& m, double tol = default_tol) {
  if (m.size() == 0) return cmat(m.cols(), m.rows());
  Eigen::BDCSVD<cmat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (long i = 0; i < sv.size(); ++i)
    if (smax > 0.0 && sv(i) > tol * smax) inv(i) = 1.0 / sv(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

// ---------------------------------------------------------------------------
// linear maps between matrix spaces
// ---------------------------------------------------------------------------

/// A linear map from rows_in x cols_in matrices to rows_out x cols_out
/// matrices, stored as a matrix acting on flattened elements.
class linear_map {
 public:
  linear_map() : ri_(0), ci_(0), ro_(0), co_(0) {}

  linear_map(long rows_in, long cols_in, long rows_out, long cols_out, cmat m)
      : ri_(rows_in), ci_(cols_in), ro_(rows_out), co_(cols_out), m_(std::move(m)) {
    if (m_.rows() != ro_ * co_ || m_.cols() != ri_ * ci_)
      throw input_shape_error("linear_map matrix has wrong dimensions");
  }

  static linear_map identity_map(long rows, long cols) {
    return linear_map(rows, cols, rows, cols, cmat::Identity(rows * cols, rows * cols));
  }

  /// Build from the action on sample inputs: the minimum-norm map sending
  /// each input to the paired output (zero on the orthogonal complement of
  /// the input span). *residual receives the worst relative defect.
  static linear_map from_samples(const std::vector<cmat>& ins, const std::vector<cmat>& outs,
                                 double tol = default_tol, double* residual = nullptr) {
    if (ins.empty() || ins.size() != outs.size())
      throw input_shape_error("from_samples: empty or mismatched sample lists");
    long ri = ins.front().rows(), ci = ins.front().cols();
    long ro = outs.front().rows(), co = outs.front().cols();
    cmat S(ri * ci, static_cast<long>(ins.size()));
    cmat T(ro * co, static_cast<long>(ins.size()));
    double in_scale = 0.0, out_scale = 0.0;
    for (std::size_t k = 0; k < ins.size(); ++k) {
      S.col(static_cast<long>(k)) = vec(ins[k]);
      T.col(static_cast<long>(k)) = vec(outs[k]);
      in_scale = std::max(in_scale, ins[k].norm());
      out_scale = std::max(out_scale, outs[k].norm());
    }
    cmat M = T * pinv(S, tol);
    if (residual) {
      double scale = std::max({1.0, in_scale, out_scale});
      *residual = (M * S - T).cwiseAbs().maxCoeff() / scale;
    }
    return linear_map(ri, ci, ro, co, std::move(M));
  }

  /// Matrix of x -> a * x * b on rows x cols matrices.
  static linear_map sandwich(const cmat& a, const cmat& b, long rows, long cols) {
    if (a.cols() != rows || b.rows() != cols)
      throw input_shape_error("sandwich: inner dimensions do not match");
    // vec(a x b) = (b^T (x) a) vec(x)
    return linear_map(rows, cols, a.rows(), b.cols(), kron(b.transpose(), a));
  }

  static linear_map left_mult(const cmat& a, long rows, long cols) {
    return sandwich(a, cmat::Identity(cols, cols), rows, cols);
  }

  static linear_map right_mult(const cmat& b, long rows, long cols) {
    return sandwich(cmat::Identity(rows, rows), b, rows, cols);
  }

  long rows_in() const { return ri_; }
  long cols_in() const { return ci_; }
  long rows_out() const { return ro_; }
  long cols_out() const { return co_; }
  const cmat& matrix() const { return m_; }

  cmat apply(const cmat& x) const {
    if (x.rows() != ri_ || x.cols() != ci_)
      throw input_shape_error("linear_map apply: wrong input shape");
    return unvec(m_ * vec(x), ro_, co_);
  }

  /// this after other
  linear_map compose(const linear_map& other) const {
    if (other.ro_ != ri_ || other.co_ != ci_)
      throw input_shape_error("linear_map compose: shapes do not chain");
    return linear_map(other.ri_, other.ci_, ro_, co_, m_ * other.m_);
  }

  linear_map scaled(const cplx& s) const { return linear_map(ri_, ci_, ro_, co_, s * m_); }

  linear_map plus(const linear_map& other) const {
    if (other.ri_ != ri_ || other.ci_ != ci_ || other.ro_ != ro_ || other.co_ != co_)
      throw input_shape_error("linear_map plus: shape mismatch");
    return linear_map(ri_, ci_, ro_, co_, m_ + other.m_);
  }

  /// Minimum-norm preimage map (Moore-Penrose inverse).
  linear_map pseudo_inverse(double tol = default_tol) const {
    return linear_map(ro_, co_, ri_, ci_, pinv(m_, tol));
  }

  double map_norm() const { return m_.size() ? op_norm(m_) : 0.0; }

 private:
  long ri_, ci_, ro_, co_;
  cmat m_;
};

/// Largest deviation ||f(x) - g(x)|| over the supplied inputs.
inline double max_deviation(const std::vector<cmat>& xs, const linear_map& f,
                            const linear_map& g) {
  double worst = 0.0;
  for (const auto& x : xs) worst = std::max(worst, hs_norm(f.apply(x) - g.apply(x)));
  return worst;
}

}  // namespace morita
