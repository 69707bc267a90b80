#pragma once

#include <string>
#include <vector>

#include "subfactor/rng.hpp"
#include "subfactor/specfile.hpp"

namespace subfactor {

/// The fixed desk-scale catalog.
inline InclusionSpec c1_spec() {
  InclusionSpec s;
  s.name = "c1";
  s.dims_n = {1};
  s.dims_m = {2};
  s.g_rows = {{2}};
  return s;
}

inline InclusionSpec c2_spec() {
  InclusionSpec s;
  s.name = "c2";
  s.dims_n = {1, 1};
  s.dims_m = {2};
  s.g_rows = {{1}, {1}};
  return s;
}

inline InclusionSpec c3_spec() {
  InclusionSpec s;
  s.name = "c3";
  s.dims_n = {1, 1};
  s.dims_m = {1, 2};
  s.g_rows = {{1, 1}, {0, 1}};
  return s;
}

inline InclusionSpec c4_spec() {
  InclusionSpec s;
  s.name = "c4";
  s.dims_n = {2};
  s.dims_m = {2};
  s.g_rows = {{1}};
  return s;
}

/// Seeded random connected inclusion at desk scale: at most three blocks a
/// side, entries <= 2, total linear dimension dim N + dim M <= 64, index
/// bound ‖G‖² <= 8 and a predicted dim M_1 small enough to span quickly.
inline InclusionSpec random_inclusion_spec(std::uint64_t seed,
                                           const std::string& name) {
  Rng rng(seed * 0x9e3779b97f4a7c15ull + 0xbf58476d1ce4e5b9ull);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const int m = 1 + static_cast<int>(rng.uniform_index(3));
    const int p = 1 + static_cast<int>(rng.uniform_index(3));
    std::vector<int> d(m);
    for (int i = 0; i < m; ++i)
      d[i] = 1 + static_cast<int>(rng.uniform_index(2));
    InclusionMatrix g(m, p);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < p; ++j) {
        const double r = rng.uniform();
        g(i, j) = r < 0.45 ? 0 : (r < 0.9 ? 1 : 2);
      }
    bool ok = true;
    for (int i = 0; i < m && ok; ++i) ok = g.row(i).sum() > 0;
    for (int j = 0; j < p && ok; ++j) ok = g.col(j).sum() > 0;
    if (!ok || !detail::bipartite_connected(g)) continue;

    std::vector<int> n(p, 0);
    int dim_total = 0, dim_m1 = 0;
    for (int i = 0; i < m; ++i) dim_total += d[i] * d[i];
    for (int j = 0; j < p; ++j) {
      for (int i = 0; i < m; ++i) n[j] += g(i, j) * d[i];
      dim_total += n[j] * n[j];
    }
    if (dim_total > 64) continue;
    for (int i = 0; i < m; ++i) {
      int r = 0;
      for (int j = 0; j < p; ++j) r += g(i, j) * n[j];
      dim_m1 += r * r;
    }
    if (dim_m1 > 320) continue;
    const Eigen::MatrixXd gd = g.cast<double>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gd.transpose() * gd);
    if (es.eigenvalues().maxCoeff() > 8.0) continue;

    InclusionSpec s;
    s.name = name;
    s.dims_n = std::move(d);
    s.dims_m = std::move(n);
    for (int i = 0; i < m; ++i) {
      std::vector<int> row(p);
      for (int j = 0; j < p; ++j) row[j] = g(i, j);
      s.g_rows.push_back(std::move(row));
    }
    return s;
  }
  throw NumericError("random inclusion sampler failed to land at desk scale");
}

/// C1..C4 plus `random_count` seeded random connected inclusions.
inline std::vector<InclusionSpec> full_catalog(int random_count = 20,
                                               std::uint64_t seed = 0) {
  std::vector<InclusionSpec> out = {c1_spec(), c2_spec(), c3_spec(),
                                    c4_spec()};
  for (int i = 0; i < random_count; ++i)
    out.push_back(
        random_inclusion_spec(seed + 1000 + i, "r" + std::to_string(i)));
  return out;
}

}  // namespace subfactor
