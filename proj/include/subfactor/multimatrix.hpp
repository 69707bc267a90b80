#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "subfactor/rng.hpp"

namespace subfactor {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Ill-formed input: mismatched parents, bad inclusion data, malformed files.
struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A computation left its tolerance envelope (failed convergence, residual
/// above gate, degenerate spectrum).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Finite direct sum of full complex matrix algebras M_{n_1} ⊕ ... ⊕ M_{n_p}
/// carrying a faithful tracial state: trace_weights[j] is the trace of a
/// minimal projection of block j, so sum_j n_j * t_j = 1.
class MultiMatrixAlgebra {
 public:
  static std::shared_ptr<const MultiMatrixAlgebra> make(
      std::vector<int> block_dims, std::vector<double> trace_weights) {
    if (block_dims.empty() || block_dims.size() != trace_weights.size())
      throw StructuralError("algebra: dims/weights size mismatch");
    double state = 0.0;
    for (std::size_t j = 0; j < block_dims.size(); ++j) {
      if (block_dims[j] < 1) throw StructuralError("algebra: block dim < 1");
      if (!(trace_weights[j] > 0.0))
        throw StructuralError("algebra: trace weight must be positive");
      state += block_dims[j] * trace_weights[j];
    }
    if (std::abs(state - 1.0) > 1e-9)
      throw StructuralError("algebra: trace weights do not sum to a state");
    return std::shared_ptr<const MultiMatrixAlgebra>(
        new MultiMatrixAlgebra(std::move(block_dims), std::move(trace_weights)));
  }

  /// Single full matrix block M_n with the normalized trace.
  static std::shared_ptr<const MultiMatrixAlgebra> full_matrix(int n) {
    return make({n}, {1.0 / n});
  }

  const std::vector<int>& block_dims() const { return dims_; }
  const std::vector<double>& trace_weights() const { return weights_; }
  int num_blocks() const { return static_cast<int>(dims_.size()); }

  /// Linear dimension sum_j n_j^2.
  int linear_dim() const {
    int d = 0;
    for (int n : dims_) d += n * n;
    return d;
  }

  bool same_structure(const MultiMatrixAlgebra& other) const {
    return dims_ == other.dims_ && weights_ == other.weights_;
  }

 private:
  MultiMatrixAlgebra(std::vector<int> d, std::vector<double> w)
      : dims_(std::move(d)), weights_(std::move(w)) {}
  std::vector<int> dims_;
  std::vector<double> weights_;
};

using AlgebraPtr = std::shared_ptr<const MultiMatrixAlgebra>;

/// One complex matrix per block; the universal value type. Immutable by
/// convention: operations return fresh values.
class AlgebraElement {
 public:
  AlgebraElement(AlgebraPtr parent, std::vector<CMatrix> blocks)
      : parent_(std::move(parent)), blocks_(std::move(blocks)) {
    if (!parent_) throw StructuralError("element: null parent");
    const auto& dims = parent_->block_dims();
    if (blocks_.size() != dims.size())
      throw StructuralError("element: wrong block count");
    for (std::size_t j = 0; j < dims.size(); ++j)
      if (blocks_[j].rows() != dims[j] || blocks_[j].cols() != dims[j])
        throw StructuralError("element: block shape mismatch");
  }

  const AlgebraPtr& parent() const { return parent_; }
  const std::vector<CMatrix>& blocks() const { return blocks_; }
  const CMatrix& block(int j) const { return blocks_.at(j); }

  bool same_parent(const AlgebraElement& other) const {
    return parent_ == other.parent_ || parent_->same_structure(*other.parent_);
  }

 private:
  AlgebraPtr parent_;
  std::vector<CMatrix> blocks_;
};

inline AlgebraElement zero_element(const AlgebraPtr& a) {
  std::vector<CMatrix> blocks;
  blocks.reserve(a->num_blocks());
  for (int n : a->block_dims()) blocks.push_back(CMatrix::Zero(n, n));
  return {a, std::move(blocks)};
}

inline AlgebraElement identity_element(const AlgebraPtr& a) {
  std::vector<CMatrix> blocks;
  blocks.reserve(a->num_blocks());
  for (int n : a->block_dims()) blocks.push_back(CMatrix::Identity(n, n));
  return {a, std::move(blocks)};
}

/// e^{(j)}_{pq}: matrix unit in block j, zero elsewhere.
inline AlgebraElement matrix_unit(const AlgebraPtr& a, int j, int p, int q) {
  AlgebraElement x = zero_element(a);
  std::vector<CMatrix> blocks = x.blocks();
  blocks.at(j)(p, q) = 1.0;
  return {a, std::move(blocks)};
}

namespace detail {
inline void require_same_parent(const AlgebraElement& x, const AlgebraElement& y,
                                const char* op) {
  if (!x.same_parent(y))
    throw StructuralError(std::string("parent mismatch in ") + op);
}
}  // namespace detail

inline AlgebraElement operator+(const AlgebraElement& x, const AlgebraElement& y) {
  detail::require_same_parent(x, y, "add");
  std::vector<CMatrix> blocks;
  blocks.reserve(x.blocks().size());
  for (std::size_t j = 0; j < x.blocks().size(); ++j)
    blocks.push_back(x.block(j) + y.block(j));
  return {x.parent(), std::move(blocks)};
}

inline AlgebraElement operator-(const AlgebraElement& x, const AlgebraElement& y) {
  detail::require_same_parent(x, y, "sub");
  std::vector<CMatrix> blocks;
  blocks.reserve(x.blocks().size());
  for (std::size_t j = 0; j < x.blocks().size(); ++j)
    blocks.push_back(x.block(j) - y.block(j));
  return {x.parent(), std::move(blocks)};
}

inline AlgebraElement operator*(const AlgebraElement& x, const AlgebraElement& y) {
  detail::require_same_parent(x, y, "mul");
  std::vector<CMatrix> blocks;
  blocks.reserve(x.blocks().size());
  for (std::size_t j = 0; j < x.blocks().size(); ++j)
    blocks.push_back(x.block(j) * y.block(j));
  return {x.parent(), std::move(blocks)};
}

inline AlgebraElement operator*(const Complex& c, const AlgebraElement& x) {
  std::vector<CMatrix> blocks;
  blocks.reserve(x.blocks().size());
  for (const auto& b : x.blocks()) blocks.push_back(c * b);
  return {x.parent(), std::move(blocks)};
}

inline AlgebraElement operator*(double c, const AlgebraElement& x) {
  return Complex(c, 0.0) * x;
}

/// Blockwise conjugate transpose.
inline AlgebraElement adjoint(const AlgebraElement& x) {
  std::vector<CMatrix> blocks;
  blocks.reserve(x.blocks().size());
  for (const auto& b : x.blocks()) blocks.push_back(b.adjoint());
  return {x.parent(), std::move(blocks)};
}

/// tr(x) = sum_j t_j Tr(x_j).
inline Complex trace(const AlgebraElement& x) {
  Complex t = 0.0;
  const auto& w = x.parent()->trace_weights();
  for (std::size_t j = 0; j < x.blocks().size(); ++j)
    t += w[j] * x.block(j).trace();
  return t;
}

/// <x, y> = tr(y* x).
inline Complex inner_product(const AlgebraElement& x, const AlgebraElement& y) {
  detail::require_same_parent(x, y, "inner_product");
  Complex t = 0.0;
  const auto& w = x.parent()->trace_weights();
  for (std::size_t j = 0; j < x.blocks().size(); ++j)
    t += w[j] * (y.block(j).adjoint() * x.block(j)).trace();
  return t;
}

inline double hs_norm(const AlgebraElement& x) {
  double s = 0.0;
  const auto& w = x.parent()->trace_weights();
  for (std::size_t j = 0; j < x.blocks().size(); ++j)
    s += w[j] * x.block(j).squaredNorm();
  return std::sqrt(std::max(0.0, s));
}

/// Weighted vectorization: <vec(x), vec(y)>_std = tr(y* x). Block j scaled by
/// sqrt(t_j), row-major within a block.
inline CVector vectorize(const AlgebraElement& x) {
  CVector v(x.parent()->linear_dim());
  Eigen::Index off = 0;
  const auto& w = x.parent()->trace_weights();
  const auto& dims = x.parent()->block_dims();
  for (std::size_t j = 0; j < x.blocks().size(); ++j) {
    const double s = std::sqrt(w[j]);
    const int n = dims[j];
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) v(off++) = s * x.block(j)(p, q);
  }
  return v;
}

inline AlgebraElement unvectorize(const AlgebraPtr& a, const CVector& v) {
  if (v.size() != a->linear_dim())
    throw StructuralError("unvectorize: bad length");
  std::vector<CMatrix> blocks;
  Eigen::Index off = 0;
  for (std::size_t j = 0; j < a->block_dims().size(); ++j) {
    const int n = a->block_dims()[j];
    const double s = 1.0 / std::sqrt(a->trace_weights()[j]);
    CMatrix b(n, n);
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) b(p, q) = s * v(off++);
    blocks.push_back(std::move(b));
  }
  return {a, std::move(blocks)};
}

/// Entries are standard complex Gaussians; deterministic for a fixed stream.
inline AlgebraElement random_element(const AlgebraPtr& a, Rng& rng) {
  std::vector<CMatrix> blocks;
  for (int n : a->block_dims()) {
    CMatrix b(n, n);
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) b(p, q) = rng.complex_gaussian();
    blocks.push_back(std::move(b));
  }
  return {a, std::move(blocks)};
}

inline AlgebraElement random_element(const AlgebraPtr& a, std::uint64_t seed) {
  Rng rng(seed);
  return random_element(a, rng);
}

inline AlgebraElement random_self_adjoint(const AlgebraPtr& a, Rng& rng) {
  AlgebraElement x = random_element(a, rng);
  return 0.5 * (x + adjoint(x));
}

/// Modified Gram-Schmidt with re-orthogonalization. Keeps vectors whose
/// residual after projection exceeds rel_cutoff times the largest input norm.
/// Deterministic in input order.
inline std::pair<std::vector<CVector>, int> orthonormalize(
    const std::vector<CVector>& input, double rel_cutoff = 1e-10) {
  std::vector<CVector> basis;
  double max_norm = 0.0;
  for (const auto& v : input) max_norm = std::max(max_norm, v.norm());
  if (max_norm == 0.0) return {basis, 0};
  const double cutoff = rel_cutoff * max_norm;
  for (const auto& v : input) {
    CVector w = v;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) w -= b.dot(w) * b;
    const double n = w.norm();
    if (n > cutoff) basis.push_back(w / n);
  }
  return {basis, static_cast<int>(basis.size())};
}

/// Orthonormal spanning list of the linear span w.r.t. the trace inner
/// product, plus its rank.
inline std::pair<std::vector<AlgebraElement>, int> span_basis(
    const std::vector<AlgebraElement>& input, double rel_cutoff = 1e-10) {
  if (input.empty()) throw StructuralError("span_basis: empty input");
  std::vector<CVector> vecs;
  vecs.reserve(input.size());
  for (const auto& x : input) {
    detail::require_same_parent(x, input.front(), "span_basis");
    vecs.push_back(vectorize(x));
  }
  auto [on, rank] = orthonormalize(vecs, rel_cutoff);
  std::vector<AlgebraElement> out;
  out.reserve(on.size());
  for (const auto& v : on) out.push_back(unvectorize(input.front().parent(), v));
  return {std::move(out), rank};
}

/// Raw-matrix overload: Frobenius inner product.
inline std::pair<std::vector<CMatrix>, int> span_basis(
    const std::vector<CMatrix>& input, double rel_cutoff = 1e-10) {
  if (input.empty()) throw StructuralError("span_basis: empty input");
  const Eigen::Index r = input.front().rows(), c = input.front().cols();
  std::vector<CVector> vecs;
  vecs.reserve(input.size());
  for (const auto& m : input) {
    if (m.rows() != r || m.cols() != c)
      throw StructuralError("span_basis: shape mismatch");
    vecs.push_back(CVector(Eigen::Map<const CVector>(m.data(), m.size())));
  }
  auto [on, rank] = orthonormalize(vecs, rel_cutoff);
  std::vector<CMatrix> out;
  out.reserve(on.size());
  for (const auto& v : on)
    out.push_back(CMatrix(Eigen::Map<const CMatrix>(v.data(), r, c)));
  return {std::move(out), rank};
}

}  // namespace subfactor
