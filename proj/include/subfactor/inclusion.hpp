#pragma once

#include <Eigen/Dense>
#include <sstream>
#include <vector>

#include "subfactor/multimatrix.hpp"

namespace subfactor {

using InclusionMatrix = Eigen::MatrixXi;  // rows: blocks of N, cols: blocks of M

/// Markov data of a connected inclusion: ‖G‖² (Perron-Frobenius eigenvalue of
/// GᵗG), τ = ‖G‖⁻², the M trace vector t and N trace vector s = G·t.
struct MarkovData {
  double norm_sq = 0.0;
  double tau = 0.0;
  std::vector<double> t_vec;  // weights on M
  std::vector<double> s_vec;  // weights on N
  int iterations = 0;
};

namespace detail {

inline bool bipartite_connected(const InclusionMatrix& g) {
  const int m = static_cast<int>(g.rows()), p = static_cast<int>(g.cols());
  std::vector<bool> seen_n(m, false), seen_m(p, false);
  std::vector<std::pair<bool, int>> stack;  // (is_n_block, index)
  stack.push_back({true, 0});
  seen_n[0] = true;
  while (!stack.empty()) {
    auto [is_n, idx] = stack.back();
    stack.pop_back();
    if (is_n) {
      for (int j = 0; j < p; ++j)
        if (g(idx, j) > 0 && !seen_m[j]) {
          seen_m[j] = true;
          stack.push_back({false, j});
        }
    } else {
      for (int i = 0; i < m; ++i)
        if (g(i, idx) > 0 && !seen_n[i]) {
          seen_n[i] = true;
          stack.push_back({true, i});
        }
    }
  }
  for (bool b : seen_n)
    if (!b) return false;
  for (bool b : seen_m)
    if (!b) return false;
  return true;
}

/// Power iteration on GᵗG + Tr(GᵗG)·I; the shift keeps the iteration
/// primitive on the irreducible block. Converges when successive normalized
/// iterates differ by ≤ 1e-14, cap 100000 iterations, all-ones start.
struct PfResult {
  double eigenvalue;
  Eigen::VectorXd eigenvector;  // unit norm, positive
  int iterations;
};

inline PfResult perron_frobenius(const InclusionMatrix& g) {
  const Eigen::MatrixXd gd = g.cast<double>();
  const Eigen::MatrixXd a = gd.transpose() * gd;
  const int p = static_cast<int>(a.rows());
  const Eigen::MatrixXd shifted =
      a + a.trace() * Eigen::MatrixXd::Identity(p, p);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(p).normalized();
  const int cap = 100000;
  int iters = 0;
  bool converged = false;
  for (; iters < cap; ++iters) {
    Eigen::VectorXd w = (shifted * v).normalized();
    const double diff = (w - v).norm();
    v = w;
    if (diff <= 1e-14) {
      converged = true;
      ++iters;
      break;
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "markov: power iteration did not converge after " << cap
       << " iterations";
    throw NumericError(os.str());
  }
  if (v.minCoeff() < 0) v = -v;
  return {v.dot(a * v), v, iters};
}

}  // namespace detail

/// Markov data straight from the inclusion matrix.
inline MarkovData markov_data(const InclusionMatrix& g,
                              const std::vector<int>& dims_m) {
  auto pf = detail::perron_frobenius(g);
  MarkovData md;
  md.norm_sq = pf.eigenvalue;
  md.tau = 1.0 / pf.eigenvalue;
  md.iterations = pf.iterations;
  double state = 0.0;
  for (std::size_t j = 0; j < dims_m.size(); ++j)
    state += dims_m[j] * pf.eigenvector(static_cast<int>(j));
  const Eigen::VectorXd t = pf.eigenvector / state;
  const Eigen::VectorXd s = g.cast<double>() * t;
  md.t_vec.assign(t.data(), t.data() + t.size());
  md.s_vec.assign(s.data(), s.data() + s.size());
  return md;
}

/// Connected unital inclusion N ⊆ M with its Bratteli matrix and Markov
/// trace data. Both algebras carry the Markov weights, so every trace in
/// sight is the Markov trace.
class Inclusion {
 public:
  const AlgebraPtr& small() const { return small_; }  // N
  const AlgebraPtr& big() const { return big_; }      // M
  const InclusionMatrix& matrix() const { return g_; }
  const MarkovData& markov() const { return markov_; }
  double tau() const { return markov_.tau; }

  /// Canonical block-diagonal embedding N → M: inside M-block j, G(i,j)
  /// copies of n's block i in increasing block order.
  AlgebraElement embed(const AlgebraElement& n) const {
    if (!n.parent()->same_structure(*small_))
      throw StructuralError("embed: element not in N");
    std::vector<CMatrix> blocks;
    const auto& dn = small_->block_dims();
    for (int j = 0; j < big_->num_blocks(); ++j) {
      const int nj = big_->block_dims()[j];
      CMatrix b = CMatrix::Zero(nj, nj);
      int off = 0;
      for (int i = 0; i < small_->num_blocks(); ++i)
        for (int c = 0; c < g_(i, j); ++c) {
          b.block(off, off, dn[i], dn[i]) = n.block(i);
          off += dn[i];
        }
      blocks.push_back(std::move(b));
    }
    return {big_, std::move(blocks)};
  }

  /// tr-preserving conditional expectation E_N: M → N, realized as the
  /// trace-orthogonal projection onto the embedded copy of N pulled back.
  /// tr_M ∘ embed = tr_N, so the embedded weighted units stay orthonormal.
  AlgebraElement conditional_expectation(const AlgebraElement& x) const {
    if (!x.parent()->same_structure(*big_))
      throw StructuralError("conditional_expectation: element not in M");
    AlgebraElement out = zero_element(small_);
    for (std::size_t q = 0; q < n_units_.size(); ++q) {
      const Complex c = inner_product(x, embedded_units_[q]);
      out = out + c * n_units_[q];
    }
    return out;
  }

  /// Structural validation (connectedness, unital dimension count), Markov
  /// data, and the canonical embedding.
  static Inclusion validate(const std::vector<int>& dims_n,
                            const std::vector<int>& dims_m,
                            const InclusionMatrix& g) {
    const int m = static_cast<int>(dims_n.size());
    const int p = static_cast<int>(dims_m.size());
    if (m == 0 || p == 0) throw StructuralError("inclusion: empty dims");
    if (g.rows() != m || g.cols() != p)
      throw StructuralError("inclusion: G shape does not match block counts");
    if (g.minCoeff() < 0) throw StructuralError("inclusion: negative G entry");
    for (int i = 0; i < m; ++i)
      if (g.row(i).sum() == 0)
        throw StructuralError("degenerate inclusion: zero row in G");
    for (int j = 0; j < p; ++j)
      if (g.col(j).sum() == 0)
        throw StructuralError("degenerate inclusion: zero column in G");
    if (!detail::bipartite_connected(g)) throw StructuralError("not connected");
    for (int j = 0; j < p; ++j) {
      int acc = 0;
      for (int i = 0; i < m; ++i) acc += g(i, j) * dims_n[i];
      if (acc != dims_m[j]) {
        std::ostringstream os;
        os << "not unital: M block " << j << " has dim " << dims_m[j]
           << " but G predicts " << acc;
        throw StructuralError(os.str());
      }
    }

    Inclusion inc;
    inc.g_ = g;
    inc.markov_ = markov_data(g, dims_m);
    inc.small_ = MultiMatrixAlgebra::make(dims_n, inc.markov_.s_vec);
    inc.big_ = MultiMatrixAlgebra::make(dims_m, inc.markov_.t_vec);
    for (int i = 0; i < inc.small_->num_blocks(); ++i) {
      const double sc = 1.0 / std::sqrt(inc.small_->trace_weights()[i]);
      for (int pp = 0; pp < inc.small_->block_dims()[i]; ++pp)
        for (int q = 0; q < inc.small_->block_dims()[i]; ++q) {
          AlgebraElement u =
              Complex(sc, 0.0) * matrix_unit(inc.small_, i, pp, q);
          inc.embedded_units_.push_back(inc.embed(u));
          inc.n_units_.push_back(std::move(u));
        }
    }
    return inc;
  }

 private:
  Inclusion() = default;

  AlgebraPtr small_, big_;
  InclusionMatrix g_;
  MarkovData markov_;
  // orthonormal basis of N (weighted units) and its embedded image
  std::vector<AlgebraElement> n_units_;
  std::vector<AlgebraElement> embedded_units_;
};

}  // namespace subfactor
