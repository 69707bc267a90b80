#pragma once

#include <cmath>
#include <vector>

#include "subfactor/tower.hpp"

namespace subfactor {

/// Finite family λ_1..λ_n in tower level `upper`, certified (or certifiable)
/// as a basis of level `upper` over level `lower`. The modulus of the pair is
/// τ^(upper-lower).
struct Basis {
  int lower = -1;
  int upper = 0;
  std::vector<TowerElement> elements;

  int size() const { return static_cast<int>(elements.size()); }
  int steps() const { return upper - lower; }
};

/// Orthonormal linear basis of a level, as tower elements.
inline std::vector<TowerElement> level_linear_basis(const Tower& t, int k) {
  std::vector<TowerElement> out;
  if (k <= 0) {
    GnsSpace g(k == 0 ? t.inclusion().big() : t.inclusion().small());
    for (const auto& u : g.ortho_basis()) out.push_back({k, u});
  } else {
    for (const auto& b : t.level(k).basis) out.push_back({k, b});
  }
  return out;
}

/// modulus of the pair (lower, upper): τ^(upper-lower)
inline double pair_modulus(const Tower& t, const Basis& b) {
  return std::pow(t.tau(), b.steps());
}

/// The family the tower's own construction produced for M/N (partial
/// isometries under e_1, pushed down and starred).
inline Basis construct_basis(const Tower& t) {
  if (t.depth() < 1)
    throw StructuralError("construct_basis: tower must reach level 1");
  Basis b;
  b.lower = -1;
  b.upper = 0;
  b.elements = t.level(1).pp;
  return b;
}

/// q_ij = E_lower(λ_i λ_j^*), an n×n array over the lower level.
inline std::vector<std::vector<TowerElement>> q_matrix(const Tower& t,
                                                       const Basis& b) {
  const int n = b.size();
  std::vector<std::vector<TowerElement>> q;
  q.reserve(n);
  for (int i = 0; i < n; ++i) {
    std::vector<TowerElement> row;
    row.reserve(n);
    for (int j = 0; j < n; ++j)
      row.push_back(t.expectation_down_to(
          b.elements[i] * adjoint(b.elements[j]), b.lower));
    q.push_back(std::move(row));
  }
  return q;
}

struct Condition1Report {
  double projection_residual = 0.0;  // ‖Q² − Q‖
  double adjoint_residual = 0.0;     // ‖Q − Q*‖
  double trace_residual = 0.0;       // |tr Q − τ^{-1}/n|
};

/// First basis condition: Q is a projection in M_n(lower) with
/// normalized trace τ^{-1}/n.
inline Condition1Report verify_condition_1(const Tower& t, const Basis& b) {
  const auto q = q_matrix(t, b);
  const int n = b.size();
  Condition1Report r;
  double proj2 = 0.0, adj2 = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      TowerElement acc = t.zero(b.lower);
      for (int k = 0; k < n; ++k) acc = acc + q[i][k] * q[k][j];
      const double d1 = t.hs_norm(acc - q[i][j]);
      proj2 += d1 * d1;
      const double d2 = t.hs_norm(adjoint(q[j][i]) - q[i][j]);
      adj2 += d2 * d2;
    }
  r.projection_residual = std::sqrt(proj2);
  r.adjoint_residual = std::sqrt(adj2);
  Complex tr = 0.0;
  for (int i = 0; i < n; ++i) tr += t.trace(q[i][i]);
  tr /= double(n);
  r.trace_residual = std::abs(tr - 1.0 / (pair_modulus(t, b) * n));
  return r;
}

/// Second basis condition: sum λ_i^* f λ_i = 1, with f the Jones
/// projection of the pair (or a multi-step interval projection).
inline double verify_condition_2(const Tower& t, const Basis& b,
                                 const TowerElement& f) {
  TowerElement acc = t.zero(f.level());
  for (const auto& lam : b.elements) {
    const TowerElement l = t.up_to(lam, f.level());
    acc = acc + adjoint(l) * f * l;
  }
  return t.hs_norm(acc - t.identity(f.level()));
}

struct Condition3Report {
  double reconstruction_residual = 0.0;  // max ‖x − Σ E(xλ_i^*)λ_i‖
  double adjoint_form_residual = 0.0;    // max ‖x − Σ λ_i^* E(λ_i x)‖
};

/// Third basis condition x = sum E(x λ_i^*) λ_i plus its adjoint form,
/// over the level's matrix units and `samples` random elements.
inline Condition3Report verify_condition_3(const Tower& t, const Basis& b,
                                           int samples = 16,
                                           std::uint64_t seed = 0) {
  std::vector<TowerElement> xs = level_linear_basis(t, b.upper);
  Rng rng(seed * 6364136223846793005ull + 1442695040888963407ull);
  for (int i = 0; i < samples; ++i) xs.push_back(t.random(b.upper, rng));
  Condition3Report r;
  for (const auto& x : xs) {
    TowerElement rec = t.zero(b.upper);
    TowerElement rec_adj = t.zero(b.upper);
    for (const auto& lam : b.elements) {
      const TowerElement ci =
          t.expectation_down_to(x * adjoint(lam), b.lower);
      rec = rec + t.up_to(ci, b.upper) * lam;
      const TowerElement di = t.expectation_down_to(lam * x, b.lower);
      rec_adj = rec_adj + adjoint(lam) * t.up_to(di, b.upper);
    }
    const double scale = std::max(1.0, t.hs_norm(x));
    r.reconstruction_residual =
        std::max(r.reconstruction_residual, t.hs_norm(x - rec) / scale);
    r.adjoint_form_residual =
        std::max(r.adjoint_form_residual, t.hs_norm(x - rec_adj) / scale);
  }
  return r;
}

/// Coordinate row of x over the basis: [E(xλ_1^*), ..., E(xλ_n^*)].
inline std::vector<TowerElement> coordinates(const Tower& t, const Basis& b,
                                             const TowerElement& x) {
  std::vector<TowerElement> row;
  row.reserve(b.elements.size());
  for (const auto& lam : b.elements)
    row.push_back(t.expectation_down_to(x * adjoint(lam), b.lower));
  return row;
}

/// row · Q − row; the coordinate row of any element absorbs Q.
inline double coordinate_row_q_residual(const Tower& t, const Basis& b,
                                        const std::vector<TowerElement>& row) {
  const auto q = q_matrix(t, b);
  const int n = b.size();
  double acc2 = 0.0;
  for (int j = 0; j < n; ++j) {
    TowerElement acc = t.zero(b.lower);
    for (int i = 0; i < n; ++i) acc = acc + row[i] * q[i][j];
    const double d = t.hs_norm(acc - row[j]);
    acc2 += d * d;
  }
  return std::sqrt(acc2);
}

/// {λ_i μ_j} is a basis for the composite pair. Ordered
/// row-major in (i, j), which makes composition associative element-by-element.
inline Basis compose_bases(const Tower& t, const Basis& a, const Basis& b) {
  if (a.upper != b.lower)
    throw StructuralError("compose_bases: pairs do not chain");
  Basis out;
  out.lower = a.lower;
  out.upper = b.upper;
  for (const auto& lam : a.elements) {
    const TowerElement lifted = t.up_to(lam, b.upper);
    for (const auto& mu : b.elements) out.elements.push_back(lifted * mu);
  }
  return out;
}

/// {τ^{-1/2} e_{k+1} up(λ_i)} is a basis for level k+1 over level k,
/// given a basis of level k over level k-1.
inline Basis lift_basis(const Tower& t, int k, const Basis& b) {
  if (b.upper != k || b.lower != k - 1)
    throw StructuralError("lift_basis: expected a basis of level k over k-1");
  if (t.depth() < k + 1)
    throw StructuralError("lift_basis: tower too shallow");
  Basis out;
  out.lower = k;
  out.upper = k + 1;
  const double scale = 1.0 / std::sqrt(t.tau());
  for (const auto& lam : b.elements)
    out.elements.push_back(scale * (t.jones(k + 1) * t.up(lam)));
  return out;
}

/// All n^k ordered products
///   λ_{î(k)} = τ^{-k(k-1)/4} λ_{i1} e_1 λ_{i2} e_2 e_1 λ_{i3} ... λ_{ik}
/// form a basis of level k-1 over N. Index i_k varies fastest.
inline Basis tower_basis(const Tower& t, int k, const Basis& b,
                         int cardinality_cap = 4096) {
  if (b.lower != -1 || b.upper != 0)
    throw StructuralError("tower_basis: expected a basis of M over N");
  if (k < 1) throw StructuralError("tower_basis: k must be >= 1");
  if (t.depth() < k - 1)
    throw StructuralError("tower_basis: tower too shallow");
  const int n = b.size();
  double card = std::pow(double(n), k);
  if (card > double(cardinality_cap))
    throw StructuralError("tower_basis: cardinality exceeds the cap");

  Basis out;
  out.lower = -1;
  out.upper = k - 1;
  if (k == 1) {
    out.elements = b.elements;
    return out;
  }

  const int top = k - 1;
  // λ's and the descending separators e_j e_{j-1} ... e_1, all at level k-1
  std::vector<TowerElement> lam_top;
  for (const auto& lam : b.elements) lam_top.push_back(t.up_to(lam, top));
  std::vector<TowerElement> sep;  // sep[j] = e_{j+1} e_j ... e_1 at top level
  for (int j = 1; j <= k - 1; ++j) {
    TowerElement ej = t.up_to(t.jones(j), top);
    if (j == 1)
      sep.push_back(ej);
    else
      sep.push_back(ej * sep.back());
  }

  const double pref = std::pow(t.tau(), -0.25 * k * (k - 1));
  std::vector<int> idx(k, 0);
  const long total = static_cast<long>(std::llround(card));
  for (long c = 0; c < total; ++c) {
    long rem = c;
    for (int pos = k - 1; pos >= 0; --pos) {
      idx[pos] = static_cast<int>(rem % n);
      rem /= n;
    }
    TowerElement prod = lam_top[idx[0]];
    for (int j = 1; j < k; ++j) prod = prod * sep[j - 1] * lam_top[idx[j]];
    out.elements.push_back(pref * prod);
  }
  return out;
}

/// Index sum λ_i^* λ_i, equal to τ^{-steps}·1 for a genuine basis.
inline TowerElement watatani_index(const Tower& t, const Basis& b) {
  TowerElement acc = t.zero(b.upper);
  for (const auto& lam : b.elements) acc = acc + adjoint(lam) * lam;
  return acc;
}

/// Convenience: the natural Jones projection to test condition (2) against,
/// e_{upper+1} of the tower.
inline TowerElement pair_jones(const Tower& t, const Basis& b) {
  if (b.steps() != 1)
    throw StructuralError("pair_jones: only single-step pairs");
  return t.jones(b.upper + 1);
}

}  // namespace subfactor
