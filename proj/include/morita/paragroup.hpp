#pragma once

#include <functional>

#include "morita/condexp.hpp"

namespace morita {

// ---------------------------------------------------------------------------
// iterated basic constructions
// ---------------------------------------------------------------------------

/// The Jones tower C = C_0 subset C_1 subset ... subset C_depth. Each level
/// is realized on the module of the previous one; embeds[k] carries level k
/// into the ambient of level k+1 and jones[k] is the Jones projection there.
/// duals[k] is the dual expectation onto the embedded level k; the final
/// dual is computed only while the frame verification stays affordable.
struct tower_data {
  std::vector<matrix_algebra> levels;
  std::vector<linear_map> embeds;
  std::vector<cmat> jones;
  std::vector<cond_expectation> duals;
  cond_expectation base;  ///< the expectation C_0 -> A that drives the tower

  long depth() const { return static_cast<long>(levels.size()) - 1; }
};

/// Ambient cap: a level of dimension n needs n^2 flattened coordinates for
/// the commutant solves of the paragroup stage.
inline constexpr long default_vector_cap = 4096;

inline tower_data build_tower(const cond_expectation& e, long depth,
                              double tol = default_tol,
                              long vector_cap = default_vector_cap) {
  if (depth < 1) throw input_shape_error("build_tower: depth must be at least 1");
  if (!e.index) throw axiom_violation_error("build_tower needs an expectation with index data");
  tower_data t;
  t.base = e;
  t.levels.push_back(e.source());
  cond_expectation current = e;
  for (long k = 1; k <= depth; ++k) {
    long module = t.levels.back().dim();
    if (module * module > vector_cap)
      throw size_cap_error("level " + std::to_string(k) + " would act on " +
                           std::to_string(module * module) + " flattened coordinates");
    basic_construction_t bc = basic_construction(current, tol);
    t.embeds.push_back(bc.embed);
    t.jones.push_back(bc.jones);
    t.levels.push_back(bc.tower);
    if (k == depth && bc.tower.dim() > 128) break;  // final dual not needed
    cond_expectation dual = dual_expectation(bc, current, tol);
    cmat lifted_index = bc.embed.apply(*current.index);
    if (bc.tower.dim() <= 128) {
      dual = with_index_data(dual, tol);
      if (hs_norm(*dual.index - lifted_index) > 1e-7)
        throw axiom_violation_error("index is not constant along the tower");
    } else {
      dual.index = lifted_index;
    }
    t.duals.push_back(dual);
    current = t.duals.back();
  }
  return t;
}

/// All Jones projections embedded into the ambient of the top level.
inline std::vector<cmat> jones_at_top(const tower_data& t) {
  std::vector<cmat> out;
  for (std::size_t k = 0; k < t.jones.size(); ++k) {
    cmat e = t.jones[k];
    for (std::size_t j = k + 1; j < t.embeds.size(); ++j) e = t.embeds[j].apply(e);
    out.push_back(std::move(e));
  }
  return out;
}

/// e_i e_{i+1} e_i = Ind^-1 e_i and [e_i, e_j] = 0 for |i-j| >= 2, measured
/// at the top level. The index is assumed scalar here, as it is whenever the
/// relations are stated this way.
struct jones_relation_report {
  double braid = 0;     ///< worst violation of e_i e_{i+1} e_i = Ind^-1 e_i
  double commute = 0;   ///< worst violation of distant commutation
};

inline jones_relation_report tower_jones_relations(const tower_data& t,
                                                   double index_scalar) {
  jones_relation_report rep;
  auto es = jones_at_top(t);
  for (std::size_t i = 0; i + 1 < es.size(); ++i) {
    rep.braid = std::max(rep.braid,
                         hs_norm(es[i] * es[i + 1] * es[i] - es[i] / index_scalar));
    rep.braid = std::max(rep.braid,
                         hs_norm(es[i + 1] * es[i] * es[i + 1] - es[i + 1] / index_scalar));
  }
  for (std::size_t i = 0; i < es.size(); ++i)
    for (std::size_t j = i + 2; j < es.size(); ++j)
      rep.commute = std::max(rep.commute, hs_norm(es[i] * es[j] - es[j] * es[i]));
  return rep;
}

// ---------------------------------------------------------------------------
// relative commutants and Bratteli data
// ---------------------------------------------------------------------------

struct paragroup_data {
  std::vector<long> rc_dims;                    ///< dim(A' intersect C_n)
  std::vector<block_structure_t> blocks;        ///< per-level block data
  std::vector<inclusion_matrix_t> bratteli;     ///< between consecutive commutants
};

/// The tower of relative commutants A' intersect C_n with the inclusion
/// matrices between consecutive levels.
inline paragroup_data relative_commutants(const matrix_algebra& a, const tower_data& t,
                                          double tol = default_tol,
                                          std::uint64_t seed = 1) {
  if (!t.levels.front().contains(a, 1e-6))
    throw not_subalgebra_error("relative_commutants: A is not contained in C_0");
  paragroup_data out;
  std::vector<cmat> a_basis = a.basis_list();
  matrix_algebra previous_rc;
  for (std::size_t k = 0; k < t.levels.size(); ++k) {
    matrix_algebra rc = commutant_of_set(a_basis, t.levels[k], tol);
    out.rc_dims.push_back(rc.dim());
    out.blocks.push_back(block_structure(rc, tol, seed));
    if (k > 0) {
      std::vector<cmat> lifted;
      for (long i = 0; i < previous_rc.dim(); ++i)
        lifted.push_back(t.embeds[k - 1].apply(previous_rc.basis(i)));
      matrix_algebra embedded = make_algebra(t.levels[k].ambient(), lifted, tol);
      out.bratteli.push_back(inclusion_matrix(embedded, rc, tol, seed));
    }
    previous_rc = rc;
    if (k < t.embeds.size()) {
      std::vector<cmat> next;
      for (auto& b : a_basis) next.push_back(t.embeds[k].apply(b));
      a_basis = std::move(next);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// corner isomorphism of relative commutants
// ---------------------------------------------------------------------------

struct corner_iso_report {
  long dim_big = 0;     ///< dim M_n(A)' intersect M_n(C)
  long dim_small = 0;   ///< dim of the corner commutant
  double multiplicative = 0;
  double star = 0;
  double injectivity = 0;  ///< reconstruction through the fullness witnesses
  bool bijective = false;

  bool passes(double threshold) const {
    return bijective && std::max({multiplicative, star, injectivity}) <= threshold;
  }
};

/// x -> p x restricted to M_n(A)' intersect M_n(C), landing in the relative
/// commutant of the cut corner inclusion.
inline corner_iso_report commutant_corner_iso(const matrix_algebra& a,
                                              const matrix_algebra& c, long n,
                                              const cmat& p, double tol = default_tol) {
  corner_iso_report rep;
  matrix_algebra mna = amplify(a, n, tol);
  matrix_algebra mnc = amplify(c, n, tol);
  if (!is_full_projection(p, mna, tol))
    throw not_full_error("corner projection is not full in M_n(A)");
  matrix_algebra big_rc = commutant(mna, mnc, tol);
  cmat v = range_isometry(p, tol);
  matrix_algebra corner_a = cut_corner(mna, p, tol);
  matrix_algebra corner_c = cut_corner(mnc, p, tol);
  matrix_algebra small_rc = commutant(corner_a, corner_c, tol);
  rep.dim_big = big_rc.dim();
  rep.dim_small = small_rc.dim();

  auto pi = [&](const cmat& x) { return cmat(v.adjoint() * x * v); };
  std::vector<cmat> images;
  for (long i = 0; i < big_rc.dim(); ++i) images.push_back(pi(big_rc.basis(i)));
  subspace img_span = orthonormalize(images, tol, v.cols(), v.cols());
  rep.bijective = img_span.dim() == big_rc.dim() &&
                  img_span.same_space_as(small_rc.span(), 1e-6);
  for (long i = 0; i < big_rc.dim(); ++i) {
    cmat xi = big_rc.basis(i);
    rep.star = std::max(rep.star, hs_norm(pi(xi.adjoint()) - pi(xi).adjoint()));
    for (long j = 0; j < big_rc.dim(); ++j)
      rep.multiplicative = std::max(
          rep.multiplicative, hs_norm(pi(xi * big_rc.basis(j)) - pi(xi) * pi(big_rc.basis(j))));
  }
  // injectivity through the fullness decomposition: x = sum a_j x p b_j
  auto witnesses = fullness_witnesses(mna, p, tol);
  for (long i = 0; i < big_rc.dim(); ++i) {
    cmat xi = big_rc.basis(i);
    cmat rec = cmat::Zero(xi.rows(), xi.cols());
    for (const auto& [aj, bj] : witnesses) rec += aj * xi * p * bj;
    rep.injectivity = std::max(rep.injectivity, hs_norm(rec - xi));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// paragroup comparison
// ---------------------------------------------------------------------------

struct compare_result {
  bool isomorphic = false;
  std::string reason;
  /// for each level, the block permutation carrying the first Bratteli datum
  /// onto the second
  std::vector<std::vector<long>> permutations;
};

namespace detail {

inline bool extend_permutations(const paragroup_data& p1, const paragroup_data& p2,
                                std::size_t level, std::vector<std::vector<long>>& perms) {
  if (level == p1.blocks.size()) return true;
  const auto& b1 = p1.blocks[level].blocks;
  const auto& b2 = p2.blocks[level].blocks;
  std::vector<long> perm(b1.size());
  std::vector<bool> used(b2.size(), false);
  // recursive assignment respecting block dimensions and the previous
  // inclusion matrix
  std::function<bool(std::size_t)> assign = [&](std::size_t i) -> bool {
    if (i == b1.size()) {
      perms.push_back(perm);
      if (extend_permutations(p1, p2, level + 1, perms)) return true;
      perms.pop_back();
      return false;
    }
    for (std::size_t j = 0; j < b2.size(); ++j) {
      if (used[j] || b1[i].k != b2[j].k) continue;
      bool ok = true;
      if (level > 0) {
        const auto& l1 = p1.bratteli[level - 1].entries;
        const auto& l2 = p2.bratteli[level - 1].entries;
        const auto& prev = perms[level - 1];
        for (std::size_t r = 0; r < prev.size() && ok; ++r)
          if (l1(static_cast<long>(r), static_cast<long>(i)) !=
              l2(prev[r], static_cast<long>(j)))
            ok = false;
      }
      if (!ok) continue;
      used[j] = true;
      perm[i] = static_cast<long>(j);
      if (assign(i + 1)) return true;
      used[j] = false;
    }
    return false;
  };
  return assign(0);
}

}  // namespace detail

/// Levelwise equality of the relative-commutant data up to block
/// permutations that match all inclusion matrices.
inline compare_result compare_paragroups(const paragroup_data& p1,
                                         const paragroup_data& p2) {
  compare_result out;
  if (p1.rc_dims.size() != p2.rc_dims.size()) {
    out.reason = "different depths";
    return out;
  }
  for (std::size_t k = 0; k < p1.rc_dims.size(); ++k) {
    if (p1.rc_dims[k] != p2.rc_dims[k]) {
      out.reason = "relative commutant dimensions differ at level " + std::to_string(k);
      return out;
    }
    auto d1 = p1.blocks[k].block_dims();
    auto d2 = p2.blocks[k].block_dims();
    std::sort(d1.begin(), d1.end());
    std::sort(d2.begin(), d2.end());
    if (d1 != d2) {
      out.reason = "block dimensions differ at level " + std::to_string(k);
      return out;
    }
  }
  if (!detail::extend_permutations(p1, p2, 0, out.permutations)) {
    out.reason = "no block permutation matches the inclusion matrices";
    return out;
  }
  out.isomorphic = true;
  out.reason = "paragroup data agree";
  return out;
}

}  // namespace morita
