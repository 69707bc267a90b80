#pragma once

#include <numeric>
#include <vector>

#include "subfactor/bases.hpp"
#include "subfactor/tower.hpp"

namespace subfactor {

/// Automorphism of a multi-matrix algebra M in its canonical form
/// α(x) = u · σ(x) · u*, with σ a dimension-compatible block permutation and
/// u a unitary of M.
class FdAutomorphism {
 public:
  FdAutomorphism(AlgebraPtr algebra, std::vector<int> sigma, AlgebraElement u,
                 bool n_invariant)
      : algebra_(std::move(algebra)),
        sigma_(std::move(sigma)),
        u_(std::move(u)),
        n_invariant_(n_invariant) {}

  const std::vector<int>& sigma() const { return sigma_; }
  const AlgebraElement& unitary() const { return u_; }
  bool n_invariant() const { return n_invariant_; }

  AlgebraElement permute(const AlgebraElement& x) const {
    std::vector<CMatrix> blocks(x.blocks().size());
    for (std::size_t j = 0; j < blocks.size(); ++j)
      blocks[sigma_[j]] = x.block(static_cast<int>(j));
    return {x.parent(), std::move(blocks)};
  }

  AlgebraElement operator()(const AlgebraElement& x) const {
    return u_ * permute(x) * adjoint(u_);
  }

  /// α ∘ β, again in (σ, u) form.
  FdAutomorphism compose(const FdAutomorphism& beta) const {
    std::vector<int> sigma(sigma_.size());
    for (std::size_t j = 0; j < sigma.size(); ++j)
      sigma[j] = sigma_[beta.sigma_[j]];
    AlgebraElement u = u_ * permute(beta.u_);
    return {algebra_, std::move(sigma), std::move(u),
            n_invariant_ && beta.n_invariant_};
  }

 private:
  AlgebraPtr algebra_;
  std::vector<int> sigma_;
  AlgebraElement u_;
  bool n_invariant_;
};

/// span comparison of α(embed(N)) against embed(N): both spans have the
/// dimension of N, so α(N) = N iff the union has no extra rank.
inline bool check_n_invariant(const Inclusion& inc, const std::vector<int>& sigma,
                              const AlgebraElement& u) {
  GnsSpace gn(inc.small());
  std::vector<AlgebraElement> family;
  FdAutomorphism alpha(inc.big(), sigma, u, true);
  for (const auto& nu : gn.ortho_basis()) family.push_back(inc.embed(nu));
  const int base_rank = span_basis(family).second;
  for (const auto& nu : gn.ortho_basis())
    family.push_back(alpha(inc.embed(nu)));
  return span_basis(family).second == base_rank;
}

/// Validated automorphism; reports whether α(N) = N.
inline FdAutomorphism make_automorphism(const Inclusion& inc,
                                        const std::vector<int>& sigma,
                                        const AlgebraElement& u) {
  const auto& dims = inc.big()->block_dims();
  if (sigma.size() != dims.size())
    throw StructuralError("automorphism: sigma has wrong length");
  std::vector<bool> hit(dims.size(), false);
  for (std::size_t j = 0; j < sigma.size(); ++j) {
    if (sigma[j] < 0 || sigma[j] >= static_cast<int>(dims.size()))
      throw StructuralError("automorphism: sigma out of range");
    if (hit[sigma[j]])
      throw StructuralError("automorphism: sigma is not a permutation");
    hit[sigma[j]] = true;
    if (dims[sigma[j]] != dims[j])
      throw StructuralError("automorphism: sigma not dimension-compatible");
  }
  if (!u.parent()->same_structure(*inc.big()))
    throw StructuralError("automorphism: u not in M");
  const double unit_resid =
      hs_norm(adjoint(u) * u - identity_element(inc.big()));
  if (unit_resid > 1e-8)
    throw StructuralError("automorphism: u is not unitary");
  return {inc.big(), sigma, u, check_n_invariant(inc, sigma, u)};
}

/// Max over a linear basis of |tr(α(x)) − tr(x)|. Vanishes for every
/// N-invariant automorphism: the induced block permutation fixes the
/// Perron-Frobenius trace vector.
inline double check_trace_preserving(const Inclusion& inc,
                                     const FdAutomorphism& alpha) {
  if (!alpha.n_invariant())
    throw StructuralError("check_trace_preserving: automorphism must fix N");
  GnsSpace gm(inc.big());
  double worst = 0.0;
  for (const auto& b : gm.ortho_basis())
    worst = std::max(worst, std::abs(trace(alpha(b)) - trace(b)));
  return worst;
}

/// blockwise exp(i h) of a self-adjoint element; stays inside any
/// *-subalgebra containing h.
inline AlgebraElement unitary_exp(const AlgebraElement& h) {
  std::vector<CMatrix> blocks;
  for (const auto& b : h.blocks()) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(b);
    CVector phase(es.eigenvalues().size());
    for (Eigen::Index i = 0; i < phase.size(); ++i)
      phase(i) = std::exp(Complex(0.0, es.eigenvalues()(i)));
    blocks.push_back(es.eigenvectors() * phase.asDiagonal() *
                     es.eigenvectors().adjoint());
  }
  return {h.parent(), std::move(blocks)};
}

/// Orthonormal basis of the relative commutant N' ∩ M.
inline std::vector<AlgebraElement> relative_commutant(const Inclusion& inc) {
  GnsSpace gm(inc.big());
  GnsSpace gn(inc.small());
  const int d = gm.dimension();
  CMatrix h = CMatrix::Zero(d, d);
  for (const auto& nu : gn.ortho_basis()) {
    const AlgebraElement en = inc.embed(nu);
    CMatrix c(d, d);
    for (int m = 0; m < d; ++m) {
      const AlgebraElement comm = gm.ortho_basis()[m] * en - en * gm.ortho_basis()[m];
      c.col(m) = vectorize(comm);
    }
    h += c.adjoint() * c;
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  const double hmax = std::max(1.0, es.eigenvalues().maxCoeff());
  std::vector<AlgebraElement> out;
  for (int i = 0; i < d; ++i)
    if (es.eigenvalues()(i) < 1e-10 * hmax)
      out.push_back(unvectorize(inc.big(), es.eigenvectors().col(i)));
  return out;
}

/// Seeded N-invariant automorphism: Ad(embed(exp(i h_N)) · exp(i h_c)) with
/// h_N self-adjoint in N and h_c self-adjoint in N' ∩ M.
inline FdAutomorphism random_n_invariant_automorphism(
    const Inclusion& inc, const std::vector<AlgebraElement>& commutant,
    Rng& rng) {
  AlgebraElement hn = random_self_adjoint(inc.small(), rng);
  AlgebraElement hc = zero_element(inc.big());
  for (const auto& c : commutant) hc = hc + rng.complex_gaussian() * c;
  hc = 0.5 * (hc + adjoint(hc));
  AlgebraElement u = inc.embed(unitary_exp(hn)) * unitary_exp(hc);
  std::vector<int> id(inc.big()->num_blocks());
  std::iota(id.begin(), id.end(), 0);
  return make_automorphism(inc, id, u);
}

/// Linear maps α_k on the tower levels 0..K, each stored as a matrix in the
/// level's orthonormal basis.
struct TowerAutomorphism {
  std::vector<CMatrix> maps;  // maps[k] acts on level-k coordinates

  int top_level() const { return static_cast<int>(maps.size()) - 1; }
};

inline TowerElement apply_level_map(const Tower& t, const TowerAutomorphism& a,
                                    const TowerElement& x) {
  const int k = x.level();
  if (k < 0 || k > a.top_level())
    throw StructuralError("tower automorphism: level out of range");
  return t.from_coordinates(k, a.maps[k] * t.coordinates(x));
}

namespace detail {

/// α_{k+1}(X) = Σ_i α_k(c_i) e_{k+1} α_k(λ_i) with X = Σ_i c_i e_{k+1} λ_i
/// the canonical decomposition over the level's own family. Assembled in
/// coordinates: the GNS vector of c_i is X·u_i, so
///   coords(α_{k+1}(b_m)) = Σ_i U_i · A_k · (B_m u_i),
/// with U_i the matrix of w ↦ coords(up(w) e_{k+1} up(α_k λ_i)).
inline CMatrix extend_one_level(const Tower& t, int k,
                                const TowerAutomorphism& a) {
  const TowerLevel& lv = t.level(k + 1);
  const int dim = lv.linear_dim();
  const TowerElement e = t.jones(k + 1);
  const std::size_t n = lv.pp.size();

  std::vector<CMatrix> eal;  // e_{k+1} · up(α_k(λ_i))
  for (const auto& lam : lv.pp)
    eal.push_back(e.matrix() * t.up(apply_level_map(t, a, lam)).matrix());

  const std::vector<TowerElement> basis_k = level_linear_basis(t, k);
  const int dk = static_cast<int>(basis_k.size());
  std::vector<CMatrix> u_mats(n, CMatrix(dim, dk));
  for (int r = 0; r < dk; ++r) {
    const CMatrix upb = t.up(basis_k[r]).matrix();
    for (std::size_t i = 0; i < n; ++i)
      u_mats[i].col(r) =
          t.coordinates(TowerElement(k + 1, CMatrix(upb * eal[i])));
  }

  CMatrix map = CMatrix::Zero(dim, dim);
  const std::vector<TowerElement> basis = level_linear_basis(t, k + 1);
  for (int m = 0; m < dim; ++m)
    for (std::size_t i = 0; i < n; ++i)
      map.col(m) += u_mats[i] *
                    (a.maps[k] * (basis[m].matrix() * lv.pp_star_coords[i]));
  return map;
}

}  // namespace detail

/// The unique extension α_1 of an N-invariant α_0 to level 1 fixing e_1,
/// evaluated through the given basis for M/N.
inline TowerAutomorphism extend_automorphism(const Tower& t, const Basis& b,
                                             const FdAutomorphism& alpha0) {
  if (!alpha0.n_invariant())
    throw StructuralError("extend_automorphism: automorphism must fix N");
  if (b.lower != -1 || b.upper != 0)
    throw StructuralError("extend_automorphism: need a basis of M over N");
  if (t.depth() < 1)
    throw StructuralError("extend_automorphism: tower must reach level 1");

  TowerAutomorphism a;
  {
    GnsSpace gm(t.inclusion().big());
    const int d0 = gm.dimension();
    CMatrix map0(d0, d0);
    for (int m = 0; m < d0; ++m)
      map0.col(m) = vectorize(alpha0(gm.ortho_basis()[m]));
    a.maps.push_back(std::move(map0));
  }

  // α_1 via the displayed formula, with the caller's basis
  const TowerLevel& lv = t.level(1);
  const int dim = lv.linear_dim();
  const TowerElement e = t.jones(1);
  std::vector<TowerElement> alam;
  for (const auto& lam : b.elements)
    alam.push_back(t.up(apply_level_map(t, a, lam)));
  CMatrix map1(dim, dim);
  const double inv_tau = 1.0 / t.tau();
  const std::vector<TowerElement> basis1 = level_linear_basis(t, 1);
  for (int m = 0; m < dim; ++m) {
    TowerElement acc = t.zero(1);
    for (std::size_t i = 0; i < b.elements.size(); ++i) {
      // c_i = τ^{-1} E_M(x λ_i^* e_1)
      const TowerElement ci =
          inv_tau *
          t.expectation_down(basis1[m] * adjoint(t.up(b.elements[i])) * e);
      acc = acc + t.up(apply_level_map(t, a, ci)) * e * alam[i];
    }
    map1.col(m) = t.coordinates(acc);
  }
  a.maps.push_back(std::move(map1));
  return a;
}

/// Tower-compatible extension, truncated at depth K: α_k for k <= K with
/// α_k(e_j) = e_j and α_k extending α_{k-1}. The invariance hypothesis is
/// re-checked at every step.
inline TowerAutomorphism extend_tower(const Tower& t,
                                      const FdAutomorphism& alpha0, int depth) {
  if (depth > t.depth())
    throw StructuralError("extend_tower: tower too shallow");
  TowerAutomorphism a = extend_automorphism(t, construct_basis(t), alpha0);
  for (int k = 1; k < depth; ++k) {
    // hypothesis: α_k leaves the up-image of level k-1 invariant
    const std::vector<TowerElement> below = level_linear_basis(t, k - 1);
    std::vector<CVector> image;
    for (const auto& x : below) image.push_back(t.coordinates(t.up(x)));
    auto [on, rank] = orthonormalize(image);
    for (const auto& x : below) {
      CVector v = t.coordinates(apply_level_map(t, a, t.up(x)));
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& w : on) v -= w.dot(v) * w;
      if (v.norm() > 1e-7)
        throw NumericError(
            "extend_tower: level invariance hypothesis failed");
    }
    a.maps.push_back(detail::extend_one_level(t, k, a));
  }
  return a;
}

}  // namespace subfactor
