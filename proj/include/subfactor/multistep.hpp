#pragma once

#include <cmath>
#include <vector>

#include "subfactor/bases.hpp"
#include "subfactor/tower.hpp"

namespace subfactor {

/// e_[k,k+m]: the multi-step projection exhibiting
/// level k ⊆ level k+m ⊆ level k+2m as a basic construction.
struct IntervalProjection {
  int k;
  int m;
  TowerElement value;  // element of level k+2m

  IntervalProjection(int k_, int m_, TowerElement v)
      : k(k_), m(m_), value(std::move(v)) {}
};

namespace detail {

/// e_from e_{from-1} ... e_to at `level`; empty product when from < to
inline TowerElement jones_desc(const Tower& t, int from, int to, int level) {
  TowerElement acc = t.identity(level);
  for (int i = from; i >= to; --i) acc = acc * t.up_to(t.jones(i), level);
  return acc;
}

/// e_from e_{from+1} ... e_to at `level`; empty product when from > to
inline TowerElement jones_asc(const Tower& t, int from, int to, int level) {
  TowerElement acc = t.identity(level);
  for (int i = from; i <= to; ++i) acc = acc * t.up_to(t.jones(i), level);
  return acc;
}

}  // namespace detail

/// e_[k,k+m] = τ^{-m(m-1)/2} (e_{k+m+1}...e_{k+2})(e_{k+m+2}...e_{k+3})
///             ... (e_{k+2m}...e_{k+m+1}), verified to be a projection.
inline IntervalProjection e_interval(const Tower& t, int k, int m) {
  if (k < -1 || m < 0) throw StructuralError("e_interval: bad indices");
  const int top = k + 2 * m;
  if (top > t.depth())
    throw StructuralError("e_interval: insufficient tower depth");
  if (m == 0) return {k, m, t.identity(k)};
  TowerElement acc = t.identity(top);
  for (int g = 1; g <= m; ++g)
    acc = acc * detail::jones_desc(t, k + m + g, k + g + 1, top);
  acc = std::pow(t.tau(), -0.5 * m * (m - 1)) * acc;
  const double resid =
      std::max(t.hs_norm(acc * acc - acc), t.hs_norm(adjoint(acc) - acc));
  if (resid > t.options().tol * std::max(1.0, t.hs_norm(acc)))
    throw NumericError("e_interval: product is not a projection");
  return {k, m, std::move(acc)};
}

/// Basic-construction characterization report for f = e_[k,k+m] against a
/// basis λ of level k+m over level k. Rank conditions are reported as defects
/// (expected dimension minus numerical rank), zero when the condition holds.
struct FvrtReport {
  double sum_residual = 0.0;       // ‖Σ λ_i^* f λ_i − 1‖
  double exchange_residual = 0.0;  // max ‖f x f − E_k(x) f‖ / scale
  int injectivity_defect = 0;      // dim(level k) − rank(n ↦ n f)
  int generation_defect = 0;       // dim(level k+2m) − rank span{x f y}
  double sigma_min_rel = 0.0;      // σ_min/σ_max of n ↦ n f
};

inline FvrtReport fvrt_check(const Tower& t, int k, int m, const Basis& basis,
                             int samples = 8, std::uint64_t seed = 0) {
  if (basis.lower != k || basis.upper != k + m)
    throw StructuralError("fvrt_check: basis pair does not match (k, m)");
  const IntervalProjection f = e_interval(t, k, m);
  const int top = k + 2 * m;
  FvrtReport r;

  // (2'): scale-explicit basis identity
  r.sum_residual = verify_condition_2(t, basis, f.value);

  // (1): f x f = E_{level k}(x) f
  Rng rng(seed * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
  for (int i = 0; i < samples; ++i) {
    const TowerElement x = t.random(k + m, rng);
    const TowerElement xe = t.up_to(x, top);
    const TowerElement ex = t.up_to(t.expectation_down_to(x, k), top);
    const double scale = std::max(1.0, t.hs_norm(x));
    r.exchange_residual = std::max(
        r.exchange_residual,
        t.hs_norm(f.value * xe * f.value - ex * f.value) / scale);
  }

  // (3): injectivity of n -> n f on level k
  {
    const std::vector<TowerElement> lower = level_linear_basis(t, k);
    const int dk = static_cast<int>(lower.size());
    const CMatrix& fm = f.value.matrix();
    CMatrix cols(fm.size(), dk);
    for (int i = 0; i < dk; ++i) {
      const CMatrix prod = t.up_to(lower[i], top).matrix() * fm;
      cols.col(i) = Eigen::Map<const CVector>(prod.data(), prod.size());
    }
    Eigen::JacobiSVD<CMatrix> svd(cols);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() ? sv(0) : 0.0;
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > 1e-8 * std::max(smax, 1e-300)) ++rank;
    r.injectivity_defect = dk - rank;
    r.sigma_min_rel = (smax > 0 && sv.size() == dk)
                          ? sv(sv.size() - 1) / smax
                          : 0.0;
  }

  // (4): span{x f y} has the full dimension of level k+2m
  {
    const std::vector<TowerElement> mid = level_linear_basis(t, k + m);
    std::vector<CMatrix> lifted;
    lifted.reserve(mid.size());
    for (const auto& x : mid) lifted.push_back(t.up_to(x, top).matrix());
    std::vector<CMatrix> cands;
    cands.reserve(lifted.size() * lifted.size());
    for (const auto& x : lifted) {
      const CMatrix xf = x * f.value.matrix();
      for (const auto& y : lifted) cands.push_back(xf * y);
    }
    const int rank = span_basis(cands).second;
    r.generation_defect = t.linear_dim(top) - rank;
  }
  return r;
}

/// Temperley-Lieb residuals over every index the tower supports.
struct TlReport {
  double braid_residual = 0.0;    // max ‖e_i e_{i±1} e_i − τ e_i‖
  double commute_residual = 0.0;  // max ‖[e_i, e_j]‖, |i−j| >= 2
};

inline TlReport tl_relations(const Tower& t) {
  TlReport r;
  const double tau = t.tau();
  for (int i = 1; i + 1 <= t.depth(); ++i) {
    const TowerElement ei = t.up_to(t.jones(i), i + 1);
    const TowerElement ej = t.jones(i + 1);
    r.braid_residual =
        std::max(r.braid_residual, t.hs_norm(ei * ej * ei - tau * ei));
    r.braid_residual =
        std::max(r.braid_residual, t.hs_norm(ej * ei * ej - tau * ej));
  }
  for (int i = 1; i <= t.depth(); ++i)
    for (int j = i + 2; j <= t.depth(); ++j) {
      const TowerElement ei = t.up_to(t.jones(i), j);
      const TowerElement ej = t.jones(j);
      r.commute_residual =
          std::max(r.commute_residual, t.hs_norm(ei * ej - ej * ei));
    }
  return r;
}

/// ‖(e_1 e_2 ... e_{2n+1})(e_{2n} ... e_1) − τ^{2n} e_1‖ at level 2n+1.
inline double contraction_residual(const Tower& t, int n) {
  const int top = 2 * n + 1;
  if (top > t.depth())
    throw StructuralError("contraction: insufficient tower depth");
  const TowerElement lhs = detail::jones_asc(t, 1, 2 * n + 1, top) *
                           detail::jones_desc(t, 2 * n, 1, top);
  const TowerElement rhs =
      std::pow(t.tau(), 2.0 * n) * t.up_to(t.jones(1), top);
  return t.hs_norm(lhs - rhs);
}

/// ‖(e_{2n+2}...e_{n+3})(e_{n+2}...e_{2n+3}) − τ^n e_{2n+2} e_{2n+3}‖
/// at level 2n+3.
inline double eq34_residual(const Tower& t, int n) {
  const int top = 2 * n + 3;
  if (top > t.depth())
    throw StructuralError("eq(3.4): insufficient tower depth");
  const TowerElement lhs = detail::jones_desc(t, 2 * n + 2, n + 3, top) *
                           detail::jones_asc(t, n + 2, 2 * n + 3, top);
  const TowerElement rhs = std::pow(t.tau(), double(n)) *
                           (t.up_to(t.jones(2 * n + 2), top) *
                            t.jones(2 * n + 3));
  return t.hs_norm(lhs - rhs);
}

/// ‖e_[-1,n+1] − τ^{-(n+1)} (e_{n+2}...e_{2n+3}) e_[-1,n] (e_{2n+2}...e_{n+2})‖
inline double multistep_recursion_check(const Tower& t, int n) {
  const int top = 2 * n + 3;
  if (top > t.depth())
    throw StructuralError("recursion: insufficient tower depth");
  const TowerElement lhs = e_interval(t, -1, n + 2).value;
  const TowerElement mid = t.up_to(e_interval(t, -1, n + 1).value, top);
  const TowerElement rhs =
      std::pow(t.tau(), -double(n + 1)) *
      (detail::jones_asc(t, n + 2, 2 * n + 3, top) * mid *
       detail::jones_desc(t, 2 * n + 2, n + 2, top));
  return t.hs_norm(lhs - rhs);
}

/// e_[k,k+m] commutes with the up-image of level k (its factors are e_j with
/// j >= k+2), hence with everything below.
inline double interval_commutation_residual(const Tower& t, int k, int m,
                                            std::uint64_t seed = 0) {
  const IntervalProjection f = e_interval(t, k, m);
  if (m == 0) return 0.0;
  const int top = k + 2 * m;
  Rng rng(seed + 17);
  double worst = 0.0;
  for (int i = 0; i < 6; ++i) {
    const TowerElement x = t.random(k, rng);
    const TowerElement xu = t.up_to(x, top);
    worst = std::max(worst, t.hs_norm(f.value * xu - xu * f.value) /
                                std::max(1.0, t.hs_norm(x)));
  }
  return worst;
}

}  // namespace subfactor
