#include <catch2/catch_amalgamated.hpp>

#include "subfactor/bases.hpp"
#include "subfactor/multistep.hpp"

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
Inclusion c4() { return Inclusion::validate({2}, {2}, mat({{1}})); }

// the hand-written basis {1, e12 + e21} for C2
Basis manual_c2_basis(const Tower& t) {
  const AlgebraPtr m = t.inclusion().big();
  AlgebraElement flip =
      matrix_unit(m, 0, 0, 1) + matrix_unit(m, 0, 1, 0);
  Basis b;
  b.lower = -1;
  b.upper = 0;
  b.elements.push_back(t.from_algebra(0, identity_element(m)));
  b.elements.push_back(t.from_algebra(0, flip));
  return b;
}

void check_all_conditions(const Tower& t, const Basis& b, double tol) {
  const Condition1Report c1r = verify_condition_1(t, b);
  CHECK(c1r.projection_residual < tol);
  CHECK(c1r.adjoint_residual < tol);
  CHECK(c1r.trace_residual < tol);
  CHECK(verify_condition_2(t, b, pair_jones(t, b)) < tol);
  const Condition3Report c3r = verify_condition_3(t, b, 8, 5);
  CHECK(c3r.reconstruction_residual < tol);
  CHECK(c3r.adjoint_form_residual < tol);
}

}  // namespace

TEST_CASE("constructed bases pass all three conditions") {
  for (const Inclusion& inc : {c1(), c2(), c3(), c4()}) {
    Tower t = build_tower(inc, 1);
    Basis b = construct_basis(t);
    check_all_conditions(t, b, 1e-8);

    // cardinality bound n >= tau^{-1}
    CHECK(double(b.size()) >= 1.0 / t.tau() - 1e-9);
  }
}

TEST_CASE("constructed basis cardinalities") {
  CHECK(construct_basis(build_tower(c1(), 1)).size() == 4);
  CHECK(construct_basis(build_tower(c2(), 1)).size() == 2);
  CHECK(construct_basis(build_tower(c4(), 1)).size() == 1);
}

TEST_CASE("perturbed family fails at least one condition by more than 1e-3") {
  for (const Inclusion& inc : {c1(), c2(), c3()}) {
    Tower t = build_tower(inc, 1);
    Basis b = construct_basis(t);
    b.elements[0] =
        b.elements[0] + 0.1 * t.from_algebra(0, identity_element(
                                                     t.inclusion().big()));
    const Condition1Report r1 = verify_condition_1(t, b);
    const double r2 = verify_condition_2(t, b, pair_jones(t, b));
    const Condition3Report r3 = verify_condition_3(t, b, 4, 5);
    const double worst =
        std::max({r1.projection_residual, r1.trace_residual, r2,
                  r3.reconstruction_residual});
    CHECK(worst > 1e-3);
  }
}

TEST_CASE("verification is deterministic") {
  Tower t = build_tower(c2(), 1);
  Basis b = construct_basis(t);
  const double a = verify_condition_2(t, b, pair_jones(t, b));
  const double bb = verify_condition_2(t, b, pair_jones(t, b));
  CHECK(a == bb);
  const Condition3Report r1 = verify_condition_3(t, b, 8, 9);
  const Condition3Report r2 = verify_condition_3(t, b, 8, 9);
  CHECK(r1.reconstruction_residual == r2.reconstruction_residual);
}

TEST_CASE("manual C2 basis and its coordinates") {
  Tower t = build_tower(c2(), 1);
  Basis b = manual_c2_basis(t);
  check_all_conditions(t, b, 1e-8);

  // x = e12: row (0, diag(1,0))
  const AlgebraPtr m = t.inclusion().big();
  TowerElement x = t.from_algebra(0, matrix_unit(m, 0, 0, 1));
  auto row = coordinates(t, b, x);
  CHECK(t.hs_norm(row[0]) < 1e-12);
  const AlgebraElement& q = row[1].algebra_element();
  CHECK(std::abs(q.block(0)(0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(q.block(1)(0, 0)) < 1e-12);

  // reconstruction sum coordinates(x)_i λ_i = x
  TowerElement rec = t.zero(0);
  for (std::size_t i = 0; i < row.size(); ++i)
    rec = rec + t.up_to(row[i], 0) * b.elements[i];
  CHECK(t.hs_norm(rec - x) < 1e-12);

  // λ_k maps to the k-th standard row (this basis has Q = identity)
  auto row2 = coordinates(t, b, b.elements[1]);
  CHECK(t.hs_norm(row2[0]) < 1e-12);
  CHECK(t.hs_norm(row2[1] - t.identity(-1)) < 1e-12);

  // row · Q = row
  CHECK(coordinate_row_q_residual(t, b, row) < 1e-10);
  Rng rng(77);
  auto row3 = coordinates(t, b, t.random(0, rng));
  CHECK(coordinate_row_q_residual(t, b, row3) < 1e-10);
}

TEST_CASE("composition of bases") {
  Tower t = build_tower(c2(), 3);
  Basis b = construct_basis(t);
  Basis lifted = lift_basis(t, 0, b);
  Basis comp = compose_bases(t, b, lifted);
  CHECK(comp.size() == 4);
  CHECK(comp.lower == -1);
  CHECK(comp.upper == 1);
  const Condition3Report r = verify_condition_3(t, comp, 8, 5);
  CHECK(r.reconstruction_residual < 1e-8);
  CHECK(verify_condition_2(t, comp, e_interval(t, -1, 2).value) < 1e-8);

  // trivial basis of M/M composes to the original list
  Basis triv;
  triv.lower = 0;
  triv.upper = 0;
  triv.elements.push_back(t.identity(0));
  Basis same = compose_bases(t, b, triv);
  REQUIRE(same.size() == b.size());
  for (int i = 0; i < b.size(); ++i)
    CHECK(t.hs_norm(same.elements[i] - b.elements[i]) < 1e-14);
}

TEST_CASE("lifted bases") {
  Tower t2 = build_tower(c2(), 2);
  Basis b2 = construct_basis(t2);
  Basis l2 = lift_basis(t2, 0, b2);
  CHECK(l2.size() == b2.size());
  CHECK(verify_condition_2(t2, l2, pair_jones(t2, l2)) < 1e-8);

  // C1: the lifted Watatani sum is 4·1 (the index of M ⊆ M_1)
  Tower t1 = build_tower(c1(), 2);
  Basis l1 = lift_basis(t1, 0, construct_basis(t1));
  CHECK(l1.size() == 4);
  TowerElement w = watatani_index(t1, l1);
  CHECK(t1.hs_norm(w - 4.0 * t1.identity(1)) < 1e-8);
}

TEST_CASE("tower bases") {
  Tower t = build_tower(c2(), 3);
  Basis b = construct_basis(t);

  // k = 1 returns the input
  Basis k1 = tower_basis(t, 1, b);
  REQUIRE(k1.size() == b.size());
  for (int i = 0; i < b.size(); ++i)
    CHECK(t.hs_norm(k1.elements[i] - b.elements[i]) == 0.0);

  // k = 2: four elements satisfying the multi-step identity
  Basis k2 = tower_basis(t, 2, b);
  CHECK(k2.size() == 4);
  CHECK(k2.upper == 1);
  CHECK(verify_condition_2(t, k2, e_interval(t, -1, 2).value) < 1e-8);
  const Condition3Report r = verify_condition_3(t, k2, 6, 5);
  CHECK(r.reconstruction_residual < 1e-8);

  // the explicit product formula agrees with iterated compose/lift,
  // pinning the prefactor exponent -k(k-1)/4
  Basis l1 = lift_basis(t, 0, b);
  Basis via_compose = compose_bases(t, b, l1);
  REQUIRE(via_compose.size() == k2.size());
  for (int i = 0; i < k2.size(); ++i)
    CHECK(t.hs_norm(k2.elements[i] - via_compose.elements[i]) < 1e-10);

  Basis k3 = tower_basis(t, 3, b);
  CHECK(k3.size() == 8);
  Basis l2 = lift_basis(t, 1, l1);
  Basis via_compose3 = compose_bases(t, via_compose, l2);
  REQUIRE(via_compose3.size() == k3.size());
  for (int i = 0; i < k3.size(); ++i)
    CHECK(t.hs_norm(k3.elements[i] - via_compose3.elements[i]) < 1e-9);

  // prefactor at k = 3 is tau^{-3/2}
  const double pref = std::pow(t.tau(), -0.25 * 3 * 2);
  CHECK(std::abs(pref - std::pow(t.tau(), -1.5)) < 1e-14);

  // cardinality cap refusal
  CHECK_THROWS_AS(tower_basis(t, 3, b, 4), StructuralError);
}

TEST_CASE("watatani index") {
  Tower t1 = build_tower(c1(), 1);
  CHECK(t1.hs_norm(watatani_index(t1, construct_basis(t1)) -
                   4.0 * t1.identity(0)) < 1e-8);
  Tower t2 = build_tower(c2(), 1);
  CHECK(t2.hs_norm(watatani_index(t2, construct_basis(t2)) -
                   2.0 * t2.identity(0)) < 1e-8);
  Tower t3 = build_tower(c3(), 1);
  CHECK(t3.hs_norm(watatani_index(t3, construct_basis(t3)) -
                   t3.inclusion().markov().norm_sq * t3.identity(0)) < 1e-8);
}

TEST_CASE("equivalence loop: families passing (2) pass (1) and (3)") {
  for (const Inclusion& inc : {c1(), c2(), c3()}) {
    Tower t = build_tower(inc, 1);
    Basis b = construct_basis(t);
    Rng rng(123);
    for (int trial = 0; trial < 3; ++trial) {
      // unitary mix preserves condition (2) exactly
      const int n = b.size();
      CMatrix h(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) h(i, j) = rng.complex_gaussian();
      h = 0.5 * (h + h.adjoint().eval());
      Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
      CVector phase(n);
      for (int i = 0; i < n; ++i)
        phase(i) = std::exp(Complex(0.0, es.eigenvalues()(i)));
      const CMatrix w =
          es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();

      Basis mixed;
      mixed.lower = b.lower;
      mixed.upper = b.upper;
      for (int i = 0; i < n; ++i) {
        TowerElement acc = t.zero(0);
        for (int j = 0; j < n; ++j) acc = acc + w(i, j) * b.elements[j];
        mixed.elements.push_back(acc);
      }
      const double r2 = verify_condition_2(t, mixed, pair_jones(t, mixed));
      REQUIRE(r2 < 1e-10);
      const Condition1Report r1 = verify_condition_1(t, mixed);
      CHECK(r1.projection_residual < 1e-8);
      CHECK(r1.trace_residual < 1e-8);
      const Condition3Report r3 = verify_condition_3(t, mixed, 4, 5);
      CHECK(r3.reconstruction_residual < 1e-8);
      CHECK(r3.adjoint_form_residual < 1e-8);
    }
  }
}

TEST_CASE("composition is associative at the element level") {
  Tower t = build_tower(c2(), 3);
  Basis b = construct_basis(t);
  Basis l1 = lift_basis(t, 0, b);
  Basis l2 = lift_basis(t, 1, l1);
  Basis left = compose_bases(t, compose_bases(t, b, l1), l2);
  Basis right = compose_bases(t, b, compose_bases(t, l1, l2));
  REQUIRE(left.size() == right.size());
  for (int i = 0; i < left.size(); ++i)
    CHECK(t.hs_norm(left.elements[i] - right.elements[i]) < 1e-10);
}
