#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <variant>
#include <vector>

#include "subfactor/inclusion.hpp"
#include "subfactor/multimatrix.hpp"
#include "subfactor/rng.hpp"

namespace subfactor {

/// GNS space of a multi-matrix algebra with its trace: the algebra as a
/// Hilbert space under <x,y> = tr(y*x). The weighted matrix units
/// t_j^{-1/2} e^{(j)}_{pq} are an orthonormal basis, and the coordinate map
/// coincides with vectorize().
class GnsSpace {
 public:
  explicit GnsSpace(AlgebraPtr algebra) : algebra_(std::move(algebra)) {
    for (int j = 0; j < algebra_->num_blocks(); ++j) {
      const double s = 1.0 / std::sqrt(algebra_->trace_weights()[j]);
      for (int p = 0; p < algebra_->block_dims()[j]; ++p)
        for (int q = 0; q < algebra_->block_dims()[j]; ++q)
          ortho_basis_.push_back(Complex(s, 0.0) *
                                 matrix_unit(algebra_, j, p, q));
    }
  }

  int dimension() const { return algebra_->linear_dim(); }
  const AlgebraPtr& algebra() const { return algebra_; }
  const std::vector<AlgebraElement>& ortho_basis() const { return ortho_basis_; }

  CVector coordinates(const AlgebraElement& x) const { return vectorize(x); }
  AlgebraElement element(const CVector& v) const {
    return unvectorize(algebra_, v);
  }

  /// Matrix of xi -> a*xi in the orthonormal basis: blockwise a_j ⊗ I_{n_j}.
  CMatrix left_rep(const AlgebraElement& a) const {
    const int d = dimension();
    CMatrix l = CMatrix::Zero(d, d);
    int off = 0;
    for (int j = 0; j < algebra_->num_blocks(); ++j) {
      const int n = algebra_->block_dims()[j];
      for (int p = 0; p < n; ++p)
        for (int pp = 0; pp < n; ++pp) {
          const Complex v = a.block(j)(p, pp);
          if (v == Complex(0.0)) continue;
          for (int q = 0; q < n; ++q)
            l(off + p * n + q, off + pp * n + q) = v;
        }
      off += n * n;
    }
    return l;
  }

 private:
  AlgebraPtr algebra_;
  std::vector<AlgebraElement> ortho_basis_;
};

/// Element of a tower level. Levels -1 and 0 carry multi-matrix elements,
/// levels k >= 1 carry operators on the GNS space of level k-1.
class TowerElement {
 public:
  TowerElement(int level, AlgebraElement x) : level_(level), v_(std::move(x)) {
    if (level > 0)
      throw StructuralError("tower element: abstract carrier above level 0");
  }
  TowerElement(int level, CMatrix x) : level_(level), v_(std::move(x)) {
    if (level < 1)
      throw StructuralError("tower element: matrix carrier below level 1");
  }

  int level() const { return level_; }
  bool is_abstract() const { return level_ <= 0; }

  const AlgebraElement& algebra_element() const {
    if (!std::holds_alternative<AlgebraElement>(v_))
      throw StructuralError("tower element: not an abstract element");
    return std::get<AlgebraElement>(v_);
  }
  const CMatrix& matrix() const {
    if (!std::holds_alternative<CMatrix>(v_))
      throw StructuralError("tower element: not a matrix element");
    return std::get<CMatrix>(v_);
  }

 private:
  int level_;
  std::variant<AlgebraElement, CMatrix> v_;
};

namespace detail {
inline void require_same_level(const TowerElement& x, const TowerElement& y,
                               const char* op) {
  if (x.level() != y.level())
    throw StructuralError(std::string("level mismatch in ") + op);
}
}  // namespace detail

inline TowerElement operator+(const TowerElement& x, const TowerElement& y) {
  detail::require_same_level(x, y, "add");
  if (x.is_abstract())
    return {x.level(), x.algebra_element() + y.algebra_element()};
  return {x.level(), CMatrix(x.matrix() + y.matrix())};
}

inline TowerElement operator-(const TowerElement& x, const TowerElement& y) {
  detail::require_same_level(x, y, "sub");
  if (x.is_abstract())
    return {x.level(), x.algebra_element() - y.algebra_element()};
  return {x.level(), CMatrix(x.matrix() - y.matrix())};
}

inline TowerElement operator*(const TowerElement& x, const TowerElement& y) {
  detail::require_same_level(x, y, "mul");
  if (x.is_abstract())
    return {x.level(), x.algebra_element() * y.algebra_element()};
  return {x.level(), CMatrix(x.matrix() * y.matrix())};
}

inline TowerElement operator*(const Complex& c, const TowerElement& x) {
  if (x.is_abstract()) return {x.level(), c * x.algebra_element()};
  return {x.level(), CMatrix(c * x.matrix())};
}

inline TowerElement operator*(double c, const TowerElement& x) {
  return Complex(c, 0.0) * x;
}

inline TowerElement adjoint(const TowerElement& x) {
  if (x.is_abstract()) return {x.level(), adjoint(x.algebra_element())};
  return {x.level(), CMatrix(x.matrix().adjoint())};
}

namespace detail {

inline CVector flatten(const CMatrix& m) {
  return CVector(Eigen::Map<const CVector>(m.data(), m.size()));
}

inline Complex frob_inner(const CMatrix& a, const CMatrix& b) {
  // tr(b^† a)
  return (b.conjugate().cwiseProduct(a)).sum();
}

/// Modified Gram-Schmidt of matrices under <X,Y> = tr(Y^† X rho). Valid on a
/// span where the form restricts to a faithful trace form. Deterministic in
/// candidate order. Kept vectors are stored flattened so projections are
/// single matrix-vector products.
inline std::vector<CMatrix> gs_under_trace_form(
    const std::vector<CMatrix>& candidates, const CMatrix& rho,
    double rel_cutoff = 1e-10) {
  std::vector<CMatrix> kept;
  if (candidates.empty()) return kept;
  const Eigen::Index d = candidates.front().rows();
  const Eigen::Index cap =
      std::min<Eigen::Index>(candidates.size(), d * d);
  CMatrix k_flat(d * d, cap), krho_flat(d * d, cap);
  Eigen::Index r = 0;

  double max_norm = 0.0;
  for (const auto& c : candidates) {
    const double n2 = std::real(frob_inner(c * rho, c));
    max_norm = std::max(max_norm, std::sqrt(std::max(0.0, n2)));
  }
  if (max_norm == 0.0) return kept;
  const double cutoff = rel_cutoff * max_norm;

  for (const auto& c : candidates) {
    CVector w = flatten(c);
    CVector wr = flatten(CMatrix(c * rho));
    for (int pass = 0; pass < 2 && r > 0; ++pass) {
      const CVector coeffs = k_flat.leftCols(r).adjoint() * wr;
      w.noalias() -= k_flat.leftCols(r) * coeffs;
      wr.noalias() -= krho_flat.leftCols(r) * coeffs;
    }
    const double n = std::sqrt(std::max(0.0, std::real(wr.dot(w))));
    if (n > cutoff && r < cap) {
      k_flat.col(r) = w / n;
      krho_flat.col(r) = wr / n;
      ++r;
    }
  }
  kept.reserve(r);
  for (Eigen::Index i = 0; i < r; ++i)
    kept.push_back(CMatrix(Eigen::Map<const CMatrix>(k_flat.col(i).data(), d, d)));
  return kept;
}

}  // namespace detail

/// One tower level. Levels -1 and 0 are abstract multi-matrix algebras; level
/// k >= 1 is a concrete algebra of operators on the GNS space of level k-1,
/// held as an orthonormal linear basis w.r.t. its Markov trace.
struct TowerLevel {
  int index = 0;
  AlgebraPtr algebra;            // levels <= 0
  std::vector<CMatrix> basis;    // levels >= 1, ON w.r.t. Tr_k
  CMatrix basis_flat;            // columns vec(basis[m])
  CMatrix trace_density;         // rho on the GNS space below: Tr(X)=tr(X rho)
  CMatrix jones;                 // e_k, level k >= 1
  std::vector<TowerElement> pp;  // basis of level k-1 over k-2, k >= 1
  std::vector<CVector> pp_star_coords;  // coords_{k-1}(pp_i^*)
  std::vector<CMatrix> generators;      // algebra generators (levels >= 1)
  int gns_dim_below = 0;                // D_{k-1}

  int linear_dim() const {
    return algebra ? algebra->linear_dim() : static_cast<int>(basis.size());
  }
};

struct TowerOptions {
  int max_gns_dim = 4096;  // refuse to act on larger GNS spaces
  double tol = 1e-8;       // relative residual gate for build verification
  std::uint64_t seed = 0;  // seeds internal deterministic draws
};

/// Block data of one tower level: dimensions, minimal central projections,
/// and the inclusion matrix from the previous level (rows: blocks below).
struct BlockStructure {
  std::vector<int> block_dims;
  std::vector<int> multiplicities;  // GNS multiplicity of each block
  std::vector<TowerElement> central_projections;
  std::vector<TowerElement> minimal_projections;
  Eigen::MatrixXi inclusion_from_below;
};

/// The Jones tower M_{-1} = N ⊆ M_0 = M ⊆ M_1 ⊆ ... with each level k >= 1
/// realized concretely on the GNS space of level k-1, together with the
/// Jones projections and the Markov trace extensions.
class Tower {
 public:
  static Tower build(Inclusion inc, int depth, TowerOptions opt = {});

  int depth() const { return static_cast<int>(levels_.size()) - 2; }
  const Inclusion& inclusion() const { return inc_; }
  double tau() const { return inc_.tau(); }
  const TowerOptions& options() const { return opt_; }

  const TowerLevel& level(int k) const {
    if (k < -1 || k > depth()) throw StructuralError("tower: level out of range");
    return levels_[static_cast<std::size_t>(k + 1)];
  }

  /// Block dimension vector of level k predicted by alternating G, Gᵗ.
  std::vector<int> predicted_block_dims(int k) const {
    std::vector<int> v(inc_.small()->block_dims());
    std::vector<int> w(inc_.big()->block_dims());
    if (k == -1) return v;
    for (int j = 0; j < k; ++j) {
      const InclusionMatrix h =
          (j % 2 == 0) ? InclusionMatrix(inc_.matrix().transpose())
                       : inc_.matrix();
      std::vector<int> next(static_cast<std::size_t>(h.cols()), 0);
      for (int c = 0; c < h.cols(); ++c)
        for (int b = 0; b < h.rows(); ++b) next[c] += h(b, c) * w[b];
      v = w;
      w = std::move(next);
    }
    return w;
  }

  int predicted_linear_dim(int k) const {
    int d = 0;
    for (int n : predicted_block_dims(k)) d += n * n;
    return d;
  }

  int linear_dim(int k) const { return level(k).linear_dim(); }

  TowerElement identity(int k) const {
    if (k <= 0) return {k, identity_element(algebra_of(k))};
    return {k, CMatrix(CMatrix::Identity(level(k).gns_dim_below,
                                         level(k).gns_dim_below))};
  }

  TowerElement zero(int k) const {
    if (k <= 0) return {k, zero_element(algebra_of(k))};
    return {k, CMatrix(CMatrix::Zero(level(k).gns_dim_below,
                                     level(k).gns_dim_below))};
  }

  /// e_k as an element of level k (k in [1, depth]).
  TowerElement jones(int k) const {
    if (k < 1 || k > depth()) throw StructuralError("jones: level out of range");
    return {k, level(k).jones};
  }

  TowerElement from_algebra(int k, AlgebraElement x) const {
    if (k > 0) throw StructuralError("from_algebra: level must be <= 0");
    if (!x.parent()->same_structure(*algebra_of(k)))
      throw StructuralError("from_algebra: wrong parent algebra");
    return {k, std::move(x)};
  }

  /// Embedding of level k into level k+1: embed for k = -1, the left regular
  /// representation for k >= 0.
  TowerElement up(const TowerElement& x) const {
    const int k = x.level();
    if (k >= depth()) throw StructuralError("up: no level above");
    if (k == -1) return {0, inc_.embed(x.algebra_element())};
    if (k == 0) return {1, gns0_.left_rep(x.algebra_element())};
    return {k + 1, left_rep(k, x.matrix())};
  }

  TowerElement up_to(TowerElement x, int target) const {
    while (x.level() < target) x = up(x);
    if (x.level() != target) throw StructuralError("up_to: target below element");
    return x;
  }

  /// Level trace: tr_N / tr_M below level 1, the Markov extension Tr_k above.
  Complex trace(const TowerElement& x) const {
    if (x.is_abstract()) return subfactor::trace(x.algebra_element());
    return (x.matrix() * level(x.level()).trace_density).trace();
  }

  double hs_norm(const TowerElement& x) const {
    const Complex n2 = trace(adjoint(x) * x);
    return std::sqrt(std::max(0.0, std::real(n2)));
  }

  /// GNS coordinates at level k >= 0 (orthonormal basis of the level).
  CVector coordinates(const TowerElement& x) const {
    const int k = x.level();
    if (k < 0) throw StructuralError("coordinates: level must be >= 0");
    if (k == 0) return gns0_.coordinates(x.algebra_element());
    const TowerLevel& lv = level(k);
    const CMatrix y = x.matrix() * lv.trace_density;
    return lv.basis_flat.adjoint() * detail::flatten(y);
  }

  TowerElement from_coordinates(int k, const CVector& v) const {
    if (k < 0) throw StructuralError("from_coordinates: level must be >= 0");
    if (k == 0) return {0, gns0_.element(v)};
    const TowerLevel& lv = level(k);
    const CVector flat = lv.basis_flat * v;
    return {k, CMatrix(Eigen::Map<const CMatrix>(flat.data(), lv.gns_dim_below,
                                                 lv.gns_dim_below))};
  }

  /// Residual of x against the linear span of its level (levels >= 1).
  double span_residual(const TowerElement& x) const {
    const TowerElement y = from_coordinates(x.level(), coordinates(x));
    const double scale = std::max(1.0, x.matrix().norm());
    return (x.matrix() - y.matrix()).norm() / scale;
  }

  /// Random Gaussian element of level k.
  TowerElement random(int k, Rng& rng) const {
    if (k <= 0) return {k, random_element(algebra_of(k), rng)};
    const TowerLevel& lv = level(k);
    CMatrix x = CMatrix::Zero(lv.gns_dim_below, lv.gns_dim_below);
    for (const auto& b : lv.basis) x += rng.complex_gaussian() * b;
    return {k, std::move(x)};
  }

  /// Coefficients c_i of X = sum_i up(c_i) e_k up(λ_i) over the level's
  /// decomposition basis, read off by evaluating X on GNS vectors; the
  /// reconstruction is checked against X.
  std::vector<TowerElement> canonical_decomposition(const TowerElement& x) const {
    std::vector<TowerElement> cs = decompose_unchecked(x);
    const int k = x.level();
    TowerElement recon = zero(k);
    const TowerElement e = jones(k);
    for (std::size_t i = 0; i < cs.size(); ++i)
      recon = recon + up(cs[i]) * e * up(level(k).pp[i]);
    const double scale = std::max(1.0, hs_norm(x));
    const double resid = hs_norm(x - recon) / scale;
    if (resid > opt_.tol) {
      std::ostringstream os;
      os << "canonical decomposition: reconstruction residual " << resid;
      throw NumericError(os.str());
    }
    return cs;
  }

  /// Markov trace extension evaluated through the canonical decomposition;
  /// identical to trace() on tower levels.
  Complex trace_extension(const TowerElement& x) const {
    const int k = x.level();
    if (k < 1) throw StructuralError("trace_extension: level must be >= 1");
    std::vector<TowerElement> cs = decompose_unchecked(x);
    Complex acc = 0.0;
    for (std::size_t i = 0; i < cs.size(); ++i)
      acc += trace(cs[i] * level(k).pp[i]);
    return tau() * acc;
  }

  /// Tr-preserving conditional expectation of level k onto level k-1;
  /// the inclusion's E_N below level 1.
  TowerElement expectation_down(const TowerElement& x) const {
    const int k = x.level();
    if (k < 0) throw StructuralError("expectation_down: no level below");
    if (k == 0)
      return {-1, inc_.conditional_expectation(x.algebra_element())};
    std::vector<TowerElement> cs = decompose_unchecked(x);
    TowerElement acc = zero(k - 1);
    for (std::size_t i = 0; i < cs.size(); ++i)
      acc = acc + cs[i] * level(k).pp[i];
    return tau() * acc;
  }

  /// Iterated expectation from the element's level down to level `target`.
  TowerElement expectation_down_to(TowerElement x, int target) const {
    while (x.level() > target) x = expectation_down(x);
    if (x.level() != target)
      throw StructuralError("expectation_down_to: target above element");
    return x;
  }

  /// The unique x0 in level k-1 with X e_k = up(x0) e_k, computed by
  /// evaluating X e_k on the GNS vector of 1.
  TowerElement pushdown(const TowerElement& x) const {
    const int k = x.level();
    if (k < 1) throw StructuralError("pushdown: level must be >= 1");
    const CMatrix y = x.matrix() * level(k).jones;
    const CVector onehat = coordinates(identity(k - 1));
    TowerElement x0 = from_coordinates(k - 1, y * onehat);
    const TowerElement lhs = TowerElement(k, y);
    const TowerElement rhs = up(x0) * jones(k);
    const double scale = std::max(1.0, hs_norm(lhs));
    const double resid = hs_norm(lhs - rhs) / scale;
    if (resid > opt_.tol) {
      std::ostringstream os;
      os << "pushdown: residual " << resid << " above tolerance";
      throw NumericError(os.str());
    }
    return x0;
  }

  BlockStructure block_structure(int k) const;

  const GnsSpace& gns0() const { return gns0_; }

 private:
  Tower(Inclusion inc, TowerOptions opt)
      : inc_(std::move(inc)), opt_(opt), gns0_(inc_.big()) {}

  const AlgebraPtr& algebra_of(int k) const {
    if (k == -1) return inc_.small();
    if (k == 0) return inc_.big();
    throw StructuralError("algebra_of: concrete level");
  }

  /// left regular representation of a level-k matrix on the level-k GNS space.
  CMatrix left_rep(int k, const CMatrix& x) const {
    const TowerLevel& lv = level(k);
    const int d = lv.linear_dim();
    CMatrix l(d, d);
    for (int n = 0; n < d; ++n) {
      const CMatrix col = (x * lv.basis[n]) * lv.trace_density;
      l.col(n) = lv.basis_flat.adjoint() * detail::flatten(col);
    }
    return l;
  }

  std::vector<TowerElement> decompose_unchecked(const TowerElement& x) const {
    const int k = x.level();
    if (k < 1)
      throw StructuralError("canonical decomposition: level must be >= 1");
    const TowerLevel& lv = level(k);
    std::vector<TowerElement> cs;
    cs.reserve(lv.pp.size());
    for (const auto& u : lv.pp_star_coords)
      cs.push_back(from_coordinates(k - 1, x.matrix() * u));
    return cs;
  }

  void build_level(int k);  // k >= 1, levels below complete
  void seed_level_one_pp(TowerLevel& lv);
  void make_trace_density(TowerLevel& lv);
  void finalize_level(TowerLevel& lv);
  std::vector<CMatrix> module_generators(int k) const;
  std::vector<CMatrix> span_candidates(int k, const CMatrix& e) const;
  void verify_level(int k) const;

  Inclusion inc_;
  TowerOptions opt_;
  GnsSpace gns0_;
  std::vector<TowerLevel> levels_;

  friend Tower build_tower(const Inclusion&, int, const TowerOptions&);
};

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

inline Tower Tower::build(Inclusion inc, int depth, TowerOptions opt) {
  if (depth < 0) throw StructuralError("tower: depth must be >= 0");
  Tower t(std::move(inc), opt);
  TowerLevel ln;
  ln.index = -1;
  ln.algebra = t.inc_.small();
  TowerLevel lm;
  lm.index = 0;
  lm.algebra = t.inc_.big();
  t.levels_.push_back(std::move(ln));
  t.levels_.push_back(std::move(lm));
  for (int k = 1; k <= depth; ++k) t.build_level(k);
  return t;
}

inline Tower build_tower(const Inclusion& inc, int depth,
                         const TowerOptions& opt = {}) {
  return Tower::build(inc, depth, opt);
}

/// Module generators of level k (k >= 1) over the up-image of level k-1: a
/// short list Y with span(up(level k-1) · Y) = level k. Generic elements are
/// module generators of maximal rank, so seeded random draws reach the full
/// span in about dim(k)/dim(k-1) picks; the identity is tried first.
inline std::vector<CMatrix> Tower::module_generators(int k) const {
  const TowerLevel& lv = level(k);
  const int d = lv.linear_dim();
  std::vector<CMatrix> gens;
  std::vector<CVector> span;  // orthonormal, standard inner product on coords
  auto residual = [&](CVector w) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : span) w -= b.dot(w) * b;
    return w;
  };
  // up-image of level k-1, as level-k matrices acting by left multiplication
  std::vector<CMatrix> lower;
  if (k == 1) {
    for (const auto& u : gns0_.ortho_basis())
      lower.push_back(gns0_.left_rep(u));
  } else {
    for (const auto& b : level(k - 1).basis)
      lower.push_back(left_rep(k - 1, b));
  }
  Rng rng(opt_.seed * 48271u + 101u * static_cast<unsigned>(k));
  const int d_below = lv.gns_dim_below;
  const int limit = 4 * d + 8;
  for (int draw = 0; draw < limit && static_cast<int>(span.size()) < d;
       ++draw) {
    CMatrix y;
    if (draw == 0) {
      y = CMatrix::Identity(d_below, d_below);
    } else {
      y = CMatrix::Zero(d_below, d_below);
      for (int m = 0; m < d; ++m) y += rng.complex_gaussian() * lv.basis[m];
    }
    const CVector vy = residual(coordinates(TowerElement(k, y)));
    if (vy.norm() < 1e-9) continue;
    bool extended = false;
    for (const auto& a : lower) {
      CVector w = residual(coordinates(TowerElement(k, CMatrix(a * y))));
      const double n = w.norm();
      if (n > 1e-9) {
        span.push_back(w / n);
        extended = true;
      }
    }
    if (extended) gens.push_back(std::move(y));
  }
  if (static_cast<int>(span.size()) != d)
    throw NumericError("module generators: span did not saturate");
  return gens;
}

/// Spanning candidates of the next level: {L(b_i) e L(y_g)} with y_g module
/// generators. Since e commutes with the up-image of the level below, this
/// spans the same space as {L(x) e L(y)} over full bases.
inline std::vector<CMatrix> Tower::span_candidates(int k,
                                                   const CMatrix& e) const {
  std::vector<CMatrix> left;
  if (k == 0) {
    for (const auto& b : gns0_.ortho_basis()) left.push_back(gns0_.left_rep(b));
  } else {
    for (const auto& b : level(k).basis) left.push_back(left_rep(k, b));
  }
  std::vector<CMatrix> right;
  if (k == 0) {
    // module generators of M over embed(N), generic draws
    std::vector<CVector> span;
    auto residual = [&](CVector w) {
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& b : span) w -= b.dot(w) * b;
      return w;
    };
    GnsSpace gn(inc_.small());
    const int d = gns0_.dimension();
    Rng rng(opt_.seed * 48271u + 11u);
    const int limit = 4 * d + 8;
    for (int draw = 0;
         draw < limit && static_cast<int>(span.size()) < d; ++draw) {
      const AlgebraElement y = (draw == 0)
                                   ? identity_element(inc_.big())
                                   : random_element(inc_.big(), rng);
      if (residual(vectorize(y)).norm() < 1e-9) continue;
      bool extended = false;
      for (const auto& u : gn.ortho_basis()) {
        CVector w = residual(vectorize(inc_.embed(u) * y));
        const double n = w.norm();
        if (n > 1e-9) {
          span.push_back(w / n);
          extended = true;
        }
      }
      if (extended) right.push_back(gns0_.left_rep(y));
    }
    if (static_cast<int>(span.size()) != d)
      throw NumericError("module generators: span did not saturate");
  } else {
    for (const auto& y : module_generators(k))
      right.push_back(left_rep(k, y));
  }
  std::vector<CMatrix> out;
  out.reserve(left.size() * right.size());
  std::vector<CMatrix> eright;
  eright.reserve(right.size());
  for (const auto& y : right) eright.push_back(e * y);
  for (const auto& x : left)
    for (const auto& ey : eright) out.push_back(x * ey);
  return out;
}

inline void Tower::make_trace_density(TowerLevel& lv) {
  const int k = lv.index;
  const int d_below = lv.gns_dim_below;
  CMatrix rho = CMatrix::Zero(d_below, d_below);
  lv.pp_star_coords.clear();
  for (const auto& lam : lv.pp) {
    const CVector u = coordinates(adjoint(lam));
    CVector w(d_below);
    if (k == 1) {
      for (int m = 0; m < d_below; ++m)
        w(m) = tau() * subfactor::trace(gns0_.ortho_basis()[m] *
                                        lam.algebra_element());
    } else {
      const TowerLevel& below = level(k - 1);
      const CMatrix lr = lam.matrix() * below.trace_density;
      for (int m = 0; m < d_below; ++m)
        w(m) = tau() * (below.basis[m] * lr).trace();
    }
    rho += u * w.transpose();
    lv.pp_star_coords.push_back(u);
  }
  lv.trace_density = std::move(rho);
}

inline void Tower::finalize_level(TowerLevel& lv) {
  lv.basis_flat.resize(lv.gns_dim_below * lv.gns_dim_below,
                       static_cast<Eigen::Index>(lv.basis.size()));
  for (std::size_t m = 0; m < lv.basis.size(); ++m)
    lv.basis_flat.col(static_cast<Eigen::Index>(m)) =
        detail::flatten(lv.basis[m]);
}

inline void Tower::build_level(int k) {
  const int d_below = linear_dim(k - 1);
  if (d_below > opt_.max_gns_dim) {
    std::ostringstream os;
    os << "tower: GNS dimension " << d_below << " of level " << (k - 1)
       << " exceeds the cap " << opt_.max_gns_dim;
    throw StructuralError(os.str());
  }
  // dense-storage guard: a level holds its basis as dim_k matrices of size
  // d_below^2 each
  const double storage =
      double(predicted_linear_dim(k)) * double(d_below) * double(d_below);
  if (storage > double(1 << 24)) {
    std::ostringstream os;
    os << "tower: level " << k << " needs " << storage
       << " dense coefficients, beyond the desk-scale budget";
    throw StructuralError(os.str());
  }

  TowerLevel lv;
  lv.index = k;
  lv.gns_dim_below = d_below;

  // Jones projection e_k: orthogonal projection of L²(M_{k-1}) onto the
  // up-image of level k-2. The up map is a trace isometry, so the image of an
  // orthonormal basis is orthonormal; one Gram-Schmidt pass absorbs drift.
  std::vector<CVector> image;
  if (k == 1) {
    GnsSpace gn(inc_.small());
    for (const auto& u : gn.ortho_basis())
      image.push_back(vectorize(inc_.embed(u)));
  } else if (k == 2) {
    for (const auto& u : gns0_.ortho_basis())
      image.push_back(coordinates(up(TowerElement(0, u))));
  } else {
    for (const auto& b : level(k - 2).basis)
      image.push_back(coordinates(up(TowerElement(k - 2, b))));
  }
  auto [on_image, rank] = orthonormalize(image);
  if (rank != static_cast<int>(image.size()))
    throw NumericError("jones projection: up-image lost rank");
  CMatrix e = CMatrix::Zero(d_below, d_below);
  for (const auto& w : on_image) e += w * w.adjoint();
  e = 0.5 * (e + e.adjoint().eval());
  lv.jones = e;

  if (k == 1) {
    // bootstrap: span first under the Frobenius form, then construct the
    // Pimsner-Popa family, then re-orthonormalize under the Markov trace
    std::vector<CMatrix> cands = span_candidates(0, e);
    const CMatrix frob = CMatrix::Identity(d_below, d_below);
    std::vector<CMatrix> pre = detail::gs_under_trace_form(cands, frob);
    lv.basis = pre;
    finalize_level(lv);
    levels_.push_back(std::move(lv));
    TowerLevel& stored = levels_.back();
    seed_level_one_pp(stored);
    make_trace_density(stored);
    stored.basis = detail::gs_under_trace_form(pre, stored.trace_density);
    if (stored.basis.size() != pre.size())
      throw NumericError("level 1: rank changed under the Markov form");
    finalize_level(stored);
  } else {
    // lifted Pimsner-Popa family: {τ^{-1/2} e_{k-1} up(λ_i)}
    const double scale = 1.0 / std::sqrt(tau());
    std::vector<TowerElement> pp;
    for (const auto& lam : level(k - 1).pp)
      pp.push_back(scale * (jones(k - 1) * up(lam)));
    lv.pp = std::move(pp);
    levels_.push_back(std::move(lv));
    TowerLevel& stored = levels_.back();
    make_trace_density(stored);
    std::vector<CMatrix> cands = span_candidates(k - 1, e);
    stored.basis = detail::gs_under_trace_form(cands, stored.trace_density);
    finalize_level(stored);
  }

  TowerLevel& stored = levels_.back();
  // algebra generators, for the center machinery
  if (k == 1) {
    for (const auto& b : gns0_.ortho_basis())
      stored.generators.push_back(gns0_.left_rep(b));
    stored.generators.push_back(stored.jones);
  } else {
    for (const auto& g : level(k - 1).generators)
      stored.generators.push_back(left_rep(k - 1, g));
    stored.generators.push_back(stored.jones);
  }

  verify_level(k);
}

/// Partial-isometry construction of a basis for M/N under e_1: blockwise, the
/// identity of each M_1 block is peeled into chunks of rank at most
/// rank(e_1 in that block), each chunk paired isometrically with range
/// vectors of e_1; λ_i = (pushdown of v_i)*.
inline void Tower::seed_level_one_pp(TowerLevel& lv) {
  const CMatrix& e = lv.jones;
  const int d = lv.gns_dim_below;
  const double gate = 1e-7;

  // center of the span, under the Frobenius form
  const int dim1 = static_cast<int>(lv.basis.size());
  CMatrix h = CMatrix::Zero(dim1, dim1);
  std::vector<CMatrix> gens;
  for (const auto& b : gns0_.ortho_basis()) gens.push_back(gns0_.left_rep(b));
  gens.push_back(e);
  for (const auto& g : gens) {
    CMatrix c(dim1, dim1);
    for (int m = 0; m < dim1; ++m) {
      const CMatrix comm = lv.basis[m] * g - g * lv.basis[m];
      for (int r = 0; r < dim1; ++r)
        c(r, m) = detail::frob_inner(comm, lv.basis[r]);
    }
    h += c.adjoint() * c;
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> hs(h);
  const double hmax = std::max(1.0, hs.eigenvalues().maxCoeff());
  std::vector<CMatrix> center;
  for (int i = 0; i < dim1; ++i)
    if (hs.eigenvalues()(i) < 1e-10 * hmax) {
      CMatrix z = CMatrix::Zero(d, d);
      for (int m = 0; m < dim1; ++m)
        z += hs.eigenvectors()(m, i) * lv.basis[m];
      center.push_back(std::move(z));
    }
  const int num_blocks = static_cast<int>(center.size());
  if (num_blocks < 1) throw NumericError("level 1: empty center");

  // split a generic self-adjoint central element into the minimal central
  // projections
  std::vector<CMatrix> zs;
  for (int attempt = 0; attempt < 4; ++attempt) {
    Rng rng(opt_.seed * 1315423911u + 7u + attempt);
    CMatrix zgen = CMatrix::Zero(d, d);
    for (const auto& zc : center) zgen += rng.gaussian() * zc;
    zgen = 0.5 * (zgen + zgen.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(zgen);
    std::vector<std::pair<double, int>> clusters;  // (value, start index)
    for (int i = 0; i < d; ++i) {
      if (clusters.empty() ||
          es.eigenvalues()(i) - clusters.back().first > 1e-6)
        clusters.push_back({es.eigenvalues()(i), i});
      else
        clusters.back().first = es.eigenvalues()(i);
    }
    if (static_cast<int>(clusters.size()) != num_blocks) continue;
    zs.clear();
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      const int lo = clusters[a].second;
      const int hi = (a + 1 < clusters.size()) ? clusters[a + 1].second : d;
      CMatrix z = CMatrix::Zero(d, d);
      for (int i = lo; i < hi; ++i)
        z += es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
      zs.push_back(std::move(z));
    }
    break;
  }
  if (zs.empty())
    throw NumericError("level 1: central spectrum stayed degenerate");

  // per block: matrix rank r_a, GNS multiplicity mu_a, e_1 rank rho_a
  std::vector<int> r(num_blocks), mu(num_blocks), rho(num_blocks);
  auto int_of = [](double x, const char* what) {
    const double rx = std::round(x);
    if (std::abs(x - rx) > 1e-6)
      throw NumericError(std::string("level 1: non-integer ") + what);
    return static_cast<int>(rx);
  };
  for (int a = 0; a < num_blocks; ++a) {
    std::vector<CMatrix> compressed;
    for (int m = 0; m < dim1; ++m)
      compressed.push_back(zs[a] * lv.basis[m] * zs[a]);
    const int rank2 = span_basis(compressed).second;
    r[a] = int_of(std::sqrt(double(rank2)), "block dimension");
    const int rank_v = int_of(std::real(zs[a].trace()), "central rank");
    if (rank_v % r[a] != 0)
      throw NumericError("level 1: multiplicity not integral");
    mu[a] = rank_v / r[a];
    rho[a] = int_of(std::real((e * zs[a]).trace()), "e1 rank") / mu[a];
    if (rho[a] == 0)
      throw NumericError("level 1: e1 vanishes on a block");
  }

  // peel each block into partial isometries with ranges summing to z_a and
  // supports under e_1 z_a
  int n = 0;
  for (int a = 0; a < num_blocks; ++a)
    n = std::max(n, (r[a] + rho[a] - 1) / rho[a]);
  std::vector<CMatrix> vs(n, CMatrix::Zero(d, d));
  Rng rng(opt_.seed * 2654435761u + 13u);
  for (int a = 0; a < num_blocks; ++a) {
    CMatrix remaining = zs[a];
    int left = r[a];
    const CMatrix source = e * zs[a];
    for (int c = 0; left > 0; ++c) {
      const int want = std::min(rho[a], left);
      CMatrix u;
      bool ok = false;
      for (int attempt = 0; attempt < 4 && !ok; ++attempt) {
        CMatrix x = CMatrix::Zero(d, d);
        for (int m = 0; m < dim1; ++m)
          x += rng.complex_gaussian() * lv.basis[m];
        CMatrix w = remaining * x * source;
        Eigen::SelfAdjointEigenSolver<CMatrix> es(
            CMatrix(0.5 * (w.adjoint() * w + (w.adjoint() * w).adjoint())));
        const double emax = es.eigenvalues().maxCoeff();
        CMatrix inv_root = CMatrix::Zero(d, d);
        int kept = 0;
        for (int i = 0; i < d; ++i)
          if (es.eigenvalues()(i) > 1e-10 * std::max(emax, 1e-300)) {
            inv_root += (1.0 / std::sqrt(es.eigenvalues()(i))) *
                        es.eigenvectors().col(i) *
                        es.eigenvectors().col(i).adjoint();
            ++kept;
          }
        if (kept != want * mu[a]) continue;
        u = w * inv_root;
        ok = true;
      }
      if (!ok)
        throw NumericError("level 1: partial isometry rank did not settle");
      vs[c] += u;
      remaining -= u * u.adjoint();
      left -= want;
    }
    if (remaining.norm() > gate * d)
      throw NumericError("level 1: block ranges did not sum to the identity");
  }

  // λ_i = (pushdown of v_i)^*; v_i e_1 = v_i, so the pushdown is v_i at 1̂
  const CVector onehat = vectorize(identity_element(inc_.big()));
  lv.pp.clear();
  for (const auto& v : vs) {
    AlgebraElement x0 = gns0_.element(v * onehat);
    lv.pp.push_back(TowerElement(0, adjoint(x0)));
  }
  // defining identity sum λ_i^* e_1 λ_i = 1
  CMatrix acc = CMatrix::Zero(d, d);
  for (const auto& lam : lv.pp) {
    const CMatrix l = gns0_.left_rep(lam.algebra_element());
    acc += l.adjoint() * e * l;
  }
  if ((acc - CMatrix::Identity(d, d)).norm() > gate * d)
    throw NumericError("level 1: basis identity sum failed");
}

inline void Tower::verify_level(int k) const {
  const TowerLevel& lv = level(k);
  const double tol = opt_.tol;
  const int d = lv.gns_dim_below;

  if (static_cast<int>(lv.basis.size()) != predicted_linear_dim(k)) {
    std::ostringstream os;
    os << "level " << k << ": span rank " << lv.basis.size()
       << " does not match the Bratteli prediction " << predicted_linear_dim(k);
    throw NumericError(os.str());
  }

  const CMatrix& e = lv.jones;
  if ((e * e - e).norm() > tol * d || (e - e.adjoint()).norm() > tol * d)
    throw NumericError("jones projection: not a projection");

  // identity and closure of the span
  if (span_residual(identity(k)) > tol)
    throw NumericError("level span: identity not inside");
  Rng rng(opt_.seed * 1000003u + static_cast<unsigned>(k));
  for (int trial = 0; trial < 3; ++trial) {
    const TowerElement x = random(k, rng);
    const TowerElement y = random(k, rng);
    if (span_residual(x * y) > tol)
      throw NumericError("level span: not closed under product");
    if (span_residual(adjoint(x)) > tol)
      throw NumericError("level span: not closed under adjoint");
  }

  // Markov property Tr(up(x) e_k) = τ tr(x)
  for (int trial = 0; trial < 3; ++trial) {
    const TowerElement x = random(k - 1, rng);
    const Complex lhs = trace(up(x) * jones(k));
    const Complex rhs = tau() * trace(x);
    if (std::abs(lhs - rhs) > tol * std::max(1.0, std::abs(rhs)))
      throw NumericError("markov property failed at build");
  }
}

// ---------------------------------------------------------------------------
// block structure
// ---------------------------------------------------------------------------

inline BlockStructure Tower::block_structure(int k) const {
  if (k < 0 || k > depth())
    throw StructuralError("block_structure: level out of range");
  BlockStructure bs;
  if (k == 0) {
    const AlgebraPtr& a = inc_.big();
    bs.block_dims = a->block_dims();
    bs.multiplicities.assign(bs.block_dims.size(), 1);
    for (int j = 0; j < a->num_blocks(); ++j) {
      AlgebraElement z = zero_element(a);
      std::vector<CMatrix> blocks = z.blocks();
      blocks[j] = CMatrix::Identity(bs.block_dims[j], bs.block_dims[j]);
      bs.central_projections.push_back(
          TowerElement(0, AlgebraElement(a, blocks)));
      bs.minimal_projections.push_back(
          TowerElement(0, matrix_unit(a, j, 0, 0)));
    }
    bs.inclusion_from_below = inc_.matrix();
    return bs;
  }

  const TowerLevel& lv = level(k);
  const int d = lv.gns_dim_below;
  const int dim = lv.linear_dim();

  // center: commutation with the algebra generators, solved over the span
  CMatrix h = CMatrix::Zero(dim, dim);
  for (const auto& g : lv.generators) {
    CMatrix c(dim, dim);
    for (int m = 0; m < dim; ++m) {
      const TowerElement comm(
          k, CMatrix(lv.basis[m] * g - g * lv.basis[m]));
      c.col(m) = coordinates(comm);
    }
    h += c.adjoint() * c;
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> hs(h);
  const double hmax = std::max(1.0, hs.eigenvalues().maxCoeff());
  std::vector<CMatrix> center;
  for (int i = 0; i < dim; ++i)
    if (hs.eigenvalues()(i) < 1e-10 * hmax) {
      CMatrix z = CMatrix::Zero(d, d);
      for (int m = 0; m < dim; ++m) z += hs.eigenvectors()(m, i) * lv.basis[m];
      center.push_back(std::move(z));
    }
  const int num_blocks = static_cast<int>(center.size());
  if (num_blocks < 1) throw NumericError("block_structure: empty center");

  // split a generic central self-adjoint element; retry on a tight spectrum
  std::vector<CMatrix> zs;
  for (int attempt = 0; attempt < 4 && zs.empty(); ++attempt) {
    Rng rng(opt_.seed * 2166136261u + 31u * k + attempt);
    CMatrix zgen = CMatrix::Zero(d, d);
    for (const auto& zc : center) zgen += rng.gaussian() * zc;
    zgen = 0.5 * (zgen + zgen.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(zgen);
    std::vector<std::pair<double, int>> clusters;
    for (int i = 0; i < d; ++i) {
      if (clusters.empty() ||
          es.eigenvalues()(i) - clusters.back().first > 1e-6)
        clusters.push_back({es.eigenvalues()(i), i});
      else
        clusters.back().first = es.eigenvalues()(i);
    }
    if (static_cast<int>(clusters.size()) != num_blocks) continue;
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      const int lo = clusters[a].second;
      const int hi = (a + 1 < clusters.size()) ? clusters[a + 1].second : d;
      CMatrix z = CMatrix::Zero(d, d);
      for (int i = lo; i < hi; ++i)
        z += es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
      zs.push_back(std::move(z));
    }
  }
  if (zs.empty())
    throw NumericError("block_structure: central spectrum stayed degenerate");

  auto int_of = [](double x, const char* what) {
    const double rx = std::round(x);
    if (std::abs(x - rx) > 1e-6)
      throw NumericError(std::string("block_structure: non-integer ") + what);
    return static_cast<int>(rx);
  };

  for (int a = 0; a < num_blocks; ++a) {
    std::vector<CMatrix> compressed;
    for (int m = 0; m < dim; ++m)
      compressed.push_back(zs[a] * lv.basis[m] * zs[a]);
    const int rank2 = span_basis(compressed).second;
    const int ra = int_of(std::sqrt(double(rank2)), "block dimension");
    const int rank_v = int_of(std::real(zs[a].trace()), "central rank");
    if (rank_v % ra != 0)
      throw NumericError("block_structure: multiplicity not integral");
    bs.block_dims.push_back(ra);
    bs.multiplicities.push_back(rank_v / ra);
    bs.central_projections.push_back(TowerElement(k, zs[a]));
  }

  // one minimal projection per block, from the top spectral cluster of a
  // generic self-adjoint compression
  Rng rng(opt_.seed * 40503u + 977u * k);
  for (int a = 0; a < num_blocks; ++a) {
    const int mu = bs.multiplicities[a];
    CMatrix p;
    bool ok = false;
    for (int attempt = 0; attempt < 4 && !ok; ++attempt) {
      CMatrix x = CMatrix::Zero(d, d);
      for (int m = 0; m < dim; ++m) x += rng.complex_gaussian() * lv.basis[m];
      x = 0.5 * (x + x.adjoint().eval());
      const CMatrix y = zs[a] * x * zs[a];
      Eigen::SelfAdjointEigenSolver<CMatrix> es(y);
      // top cluster of width mu, separated from the rest
      const int top = d - mu;
      if (top > 0 &&
          es.eigenvalues()(top) - es.eigenvalues()(top - 1) < 1e-8)
        continue;
      p = CMatrix::Zero(d, d);
      for (int i = top; i < d; ++i)
        p += es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
      ok = true;
    }
    if (!ok)
      throw NumericError("block_structure: minimal projection split failed");
    bs.minimal_projections.push_back(TowerElement(k, p));
  }

  // inclusion matrix from level k-1: multiplicity of lower block b in block a
  // equals rank(up(p_b) z_a) / mu_a, with p_b a minimal projection below
  std::vector<TowerElement> lower_minimal;
  if (k == 1) {
    for (int j = 0; j < inc_.big()->num_blocks(); ++j)
      lower_minimal.push_back(TowerElement(0, matrix_unit(inc_.big(), j, 0, 0)));
  } else {
    const BlockStructure below = block_structure(k - 1);
    lower_minimal = below.minimal_projections;
  }
  bs.inclusion_from_below.resize(static_cast<int>(lower_minimal.size()),
                                 num_blocks);
  for (std::size_t b = 0; b < lower_minimal.size(); ++b) {
    const CMatrix pb = up(lower_minimal[b]).matrix();
    for (int a = 0; a < num_blocks; ++a) {
      const double t = std::real((pb * zs[a]).trace());
      bs.inclusion_from_below(static_cast<int>(b), a) =
          int_of(t, "inclusion multiplicity") / bs.multiplicities[a];
    }
  }
  return bs;
}

}  // namespace subfactor
