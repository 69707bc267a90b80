#include <catch2/catch_amalgamated.hpp>

#include "subfactor/tower.hpp"

using namespace subfactor;

namespace {

InclusionMatrix mat(std::initializer_list<std::initializer_list<int>> rows) {
  InclusionMatrix g((int)rows.size(), (int)rows.begin()->size());
  int i = 0;
  for (const auto& r : rows) {
    int j = 0;
    for (int v : r) g(i, j++) = v;
    ++i;
  }
  return g;
}

Inclusion c1() { return Inclusion::validate({1}, {2}, mat({{2}})); }
Inclusion c2() { return Inclusion::validate({1, 1}, {2}, mat({{1}, {1}})); }
Inclusion c3() {
  return Inclusion::validate({1, 1}, {1, 2}, mat({{1, 1}, {0, 1}}));
}

}  // namespace

TEST_CASE("gns space of M2") {
  Inclusion inc = c1();
  GnsSpace g(inc.big());
  CHECK(g.dimension() == 4);
  // orthonormality of the emitted basis
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const Complex ip = inner_product(g.ortho_basis()[i], g.ortho_basis()[j]);
      CHECK(std::abs(ip - (i == j ? 1.0 : 0.0)) < 1e-13);
    }
  // left_rep is a unital *-homomorphism
  CHECK((g.left_rep(identity_element(inc.big())) - CMatrix::Identity(4, 4))
            .norm() < 1e-14);
  Rng rng(31);
  AlgebraElement a = random_element(inc.big(), rng);
  AlgebraElement b = random_element(inc.big(), rng);
  CHECK((g.left_rep(a * b) - g.left_rep(a) * g.left_rep(b)).norm() < 1e-12);
  CHECK((g.left_rep(adjoint(a)) - g.left_rep(a).adjoint()).norm() < 1e-12);
  // representation of the action on coordinates
  CHECK((g.left_rep(a) * g.coordinates(b) - g.coordinates(a * b)).norm() <
        1e-12);
}

TEST_CASE("jones projection at level one") {
  Inclusion inc = c2();
  Tower t = build_tower(inc, 1);
  const CMatrix& e = t.level(1).jones;
  CHECK((e * e - e).norm() < 1e-12);
  CHECK((e - e.adjoint()).norm() < 1e-13);
  // C2: rank 2 on the 4-dimensional GNS space of M2
  CHECK(std::abs(std::real(e.trace()) - 2.0) < 1e-10);

  // e1 fixes the GNS vector of 1
  const CVector onehat = vectorize(identity_element(inc.big()));
  CHECK((e * onehat - onehat).norm() < 1e-12);

  // e1 commutes with the embedded copy of N
  Rng rng(32);
  AlgebraElement n = random_element(inc.small(), rng);
  const CMatrix ln = t.gns0().left_rep(inc.embed(n));
  CHECK((e * ln * e - ln * e).norm() < 1e-10);
  CHECK((e * ln - ln * e).norm() < 1e-10);

  // e1 acts as E_N on GNS vectors
  AlgebraElement x = random_element(inc.big(), rng);
  const CVector lhs = e * vectorize(x);
  const CVector rhs = vectorize(inc.embed(inc.conditional_expectation(x)));
  CHECK((lhs - rhs).norm() < 1e-11);
}

TEST_CASE("basic construction dimensions") {
  Tower t2 = build_tower(c2(), 2);
  CHECK(t2.linear_dim(1) == 8);
  CHECK(t2.linear_dim(2) == 16);
  Tower t1 = build_tower(c1(), 2);
  CHECK(t1.linear_dim(1) == 16);
  CHECK(t1.linear_dim(2) == 64);
  Tower t3 = build_tower(c3(), 2);
  CHECK(t3.linear_dim(1) == 13);
  CHECK(t3.linear_dim(2) == 34);

  // combinatorial prediction matches the computed span rank at every level
  for (int k = 1; k <= 2; ++k) {
    CHECK(t2.linear_dim(k) == t2.predicted_linear_dim(k));
    CHECK(t1.linear_dim(k) == t1.predicted_linear_dim(k));
    CHECK(t3.linear_dim(k) == t3.predicted_linear_dim(k));
  }
}

TEST_CASE("markov trace extension") {
  Tower t = build_tower(c2(), 2);
  const double tau = t.tau();

  CHECK(std::abs(t.trace(t.identity(1)) - 1.0) < 1e-10);
  CHECK(std::abs(t.trace(t.jones(1)) - tau) < 1e-10);
  CHECK(std::abs(t.trace(t.identity(2)) - 1.0) < 1e-9);
  CHECK(std::abs(t.trace(t.jones(2)) - tau) < 1e-9);

  // trace_extension through the canonical decomposition agrees with the
  // precomputed density
  Rng rng(33);
  for (int i = 0; i < 4; ++i) {
    TowerElement x = t.random(1, rng);
    CHECK(std::abs(t.trace_extension(x) - t.trace(x)) < 1e-10);
  }

  // Markov property at both levels
  for (int k = 1; k <= 2; ++k)
    for (int i = 0; i < 4; ++i) {
      TowerElement x = t.random(k - 1, rng);
      const Complex lhs = t.trace(t.up(x) * t.jones(k));
      CHECK(std::abs(lhs - tau * t.trace(x)) < 1e-10);
    }

  // traciality and positivity of the extension
  for (int i = 0; i < 4; ++i) {
    TowerElement x = t.random(2, rng);
    TowerElement y = t.random(2, rng);
    CHECK(std::abs(t.trace(x * y) - t.trace(y * x)) < 1e-9);
    CHECK(std::real(t.trace(adjoint(x) * x)) >= -1e-10);
  }

  // C2: Tr on M1 has block weights (1/4, 1/4)
  BlockStructure bs = t.block_structure(1);
  REQUIRE(bs.block_dims.size() == 2);
  for (std::size_t a = 0; a < 2; ++a) {
    const Complex w = t.trace(bs.minimal_projections[a]);
    CHECK(std::abs(w - 0.25) < 1e-9);
  }
}

TEST_CASE("up map is a trace-preserving *-homomorphism") {
  Tower t = build_tower(c3(), 2);
  Rng rng(34);
  for (int k = -1; k <= 1; ++k) {
    TowerElement x = t.random(k, rng);
    TowerElement y = t.random(k, rng);
    const double scale = std::max(1.0, t.hs_norm(x) * t.hs_norm(y));
    CHECK(t.hs_norm(t.up(x * y) - t.up(x) * t.up(y)) < 1e-9 * scale);
    CHECK(t.hs_norm(t.up(adjoint(x)) - adjoint(t.up(x))) < 1e-9 * scale);
    CHECK(std::abs(t.trace(t.up(x)) - t.trace(x)) < 1e-9 * scale);
    CHECK(std::abs(t.hs_norm(t.up(x)) - t.hs_norm(x)) < 1e-9 * scale);
    CHECK(t.hs_norm(t.up(t.identity(k)) - t.identity(k + 1)) < 1e-9);
  }
}

TEST_CASE("canonical decomposition") {
  Tower t = build_tower(c2(), 2);
  Rng rng(35);

  // self-reconstruction of e_k
  for (int k = 1; k <= 2; ++k) {
    TowerElement e = t.jones(k);
    auto cs = t.canonical_decomposition(e);  // validates internally
    TowerElement recon = t.zero(k);
    for (std::size_t i = 0; i < cs.size(); ++i)
      recon = recon + t.up(cs[i]) * e * t.up(t.level(k).pp[i]);
    CHECK(t.hs_norm(recon - e) < 1e-8);
  }

  // X = up(a) reconstructs
  TowerElement a = t.random(0, rng);
  CHECK_NOTHROW(t.canonical_decomposition(t.up(a)));

  // random X against a direct matrix comparison
  for (int i = 0; i < 4; ++i) {
    TowerElement x = t.random(1, rng);
    auto cs = t.canonical_decomposition(x);
    TowerElement recon = t.zero(1);
    for (std::size_t j = 0; j < cs.size(); ++j)
      recon = recon + t.up(cs[j]) * t.jones(1) * t.up(t.level(1).pp[j]);
    CHECK((recon.matrix() - x.matrix()).norm() < 1e-8);
  }
}

TEST_CASE("expectation onto the previous level") {
  Tower t = build_tower(c2(), 2);
  const double tau = t.tau();
  Rng rng(36);

  for (int k = 1; k <= 2; ++k) {
    // E(e_k) = tau 1
    TowerElement ee = t.expectation_down(t.jones(k));
    CHECK(t.hs_norm(ee - tau * t.identity(k - 1)) < 1e-9);

    // E(up(a)) = a
    TowerElement a = t.random(k - 1, rng);
    CHECK(t.hs_norm(t.expectation_down(t.up(a)) - a) < 1e-9);

    // trace pairing: Tr(X up(y)) = tr(E(X) y)
    for (int i = 0; i < 4; ++i) {
      TowerElement x = t.random(k, rng);
      TowerElement y = t.random(k - 1, rng);
      const Complex lhs = t.trace(x * t.up(y));
      const Complex rhs = t.trace(t.expectation_down(x) * y);
      CHECK(std::abs(lhs - rhs) <
            1e-9 * std::max(1.0, t.hs_norm(x) * t.hs_norm(y)));
    }
  }
}

TEST_CASE("pushdown") {
  Tower t = build_tower(c2(), 1);
  Rng rng(37);

  // X = e_1 pushes to 1
  CHECK(t.hs_norm(t.pushdown(t.jones(1)) - t.identity(0)) < 1e-9);

  // X = up(a) pushes to a
  TowerElement a = t.random(0, rng);
  CHECK(t.hs_norm(t.pushdown(t.up(a)) - a) < 1e-9);

  // X = e_1 up(m) e_1 pushes to embed(E_N(m))
  AlgebraElement m = random_element(t.inclusion().big(), rng);
  TowerElement x = t.jones(1) * t.up(t.from_algebra(0, m)) * t.jones(1);
  AlgebraElement expected =
      t.inclusion().embed(t.inclusion().conditional_expectation(m));
  CHECK(t.hs_norm(t.pushdown(x) - t.from_algebra(0, expected)) < 1e-9);

  // two routes agree: GNS evaluation vs tau^{-1} E(X e_1)
  for (int i = 0; i < 6; ++i) {
    TowerElement y = t.random(1, rng);
    TowerElement route1 = t.pushdown(y);
    TowerElement route2 =
        (1.0 / t.tau()) * t.expectation_down(y * t.jones(1));
    CHECK(t.hs_norm(route1 - route2) < 1e-10 * std::max(1.0, t.hs_norm(y)));
  }
}

TEST_CASE("block structure") {
  Tower t2 = build_tower(c2(), 1);
  BlockStructure b2 = t2.block_structure(1);
  REQUIRE(b2.block_dims.size() == 2);
  CHECK(b2.block_dims[0] == 2);
  CHECK(b2.block_dims[1] == 2);
  REQUIRE(b2.inclusion_from_below.rows() == 1);
  CHECK(b2.inclusion_from_below(0, 0) == 1);
  CHECK(b2.inclusion_from_below(0, 1) == 1);

  Tower t1 = build_tower(c1(), 1);
  BlockStructure b1 = t1.block_structure(1);
  REQUIRE(b1.block_dims.size() == 1);
  CHECK(b1.block_dims[0] == 4);
  CHECK(b1.inclusion_from_below(0, 0) == 2);

  // center of a full matrix block level has dimension 1
  CHECK(b1.central_projections.size() == 1);
  CHECK(t1.hs_norm(b1.central_projections[0] - t1.identity(1)) < 1e-9);

  // central projections are projections summing to 1
  TowerElement sum = t2.zero(1);
  for (const auto& z : b2.central_projections) {
    CHECK(t2.hs_norm(z * z - z) < 1e-9);
    CHECK(t2.hs_norm(adjoint(z) - z) < 1e-9);
    sum = sum + z;
  }
  CHECK(t2.hs_norm(sum - t2.identity(1)) < 1e-9);
}

TEST_CASE("temperley-lieb relations hold on a depth-3 tower") {
  Tower t = build_tower(c2(), 3);
  const double tau = t.tau();
  for (int i = 1; i <= 2; ++i) {
    TowerElement ei = t.up_to(t.jones(i), i + 1);
    TowerElement ej = t.jones(i + 1);
    TowerElement lhs = ei * ej * ei;
    CHECK(t.hs_norm(lhs - tau * ei) < 1e-9);
    TowerElement rhs = ej * ei * ej;
    CHECK(t.hs_norm(rhs - tau * ej) < 1e-9);
  }
  // commutation at distance >= 2
  TowerElement e1 = t.up_to(t.jones(1), 3);
  TowerElement e3 = t.jones(3);
  CHECK(t.hs_norm(e1 * e3 - e3 * e1) < 1e-9);
}

TEST_CASE("tower rejects depth beyond the GNS cap") {
  TowerOptions opt;
  opt.max_gns_dim = 20;
  CHECK_THROWS_AS(build_tower(c1(), 3, opt), StructuralError);
}
