#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "subfactor/automorphisms.hpp"
#include "subfactor/bases.hpp"
#include "subfactor/multistep.hpp"
#include "subfactor/report.hpp"

namespace subfactor {

struct VerifyOptions {
  std::uint64_t seed = 0;
  double tol = 1e-8;
  int automorphism_samples = 20;
};

namespace suites {

inline SuiteReport thm22(const Tower& t, const VerifyOptions& o) {
  SuiteReport r{"thm2.2", "Thm 2.2 / Lem 2.1 / Rem 2.4", {}, 0.0};
  Basis b = construct_basis(t);
  const Condition1Report c1 = verify_condition_1(t, b);
  r.add("Q projection", c1.projection_residual, o.tol);
  r.add("Q self-adjoint", c1.adjoint_residual, o.tol);
  r.add("tr(Q) = 1/(tau n)", c1.trace_residual, o.tol);
  r.add("sum lambda* e1 lambda = 1",
        verify_condition_2(t, b, pair_jones(t, b)), o.tol);
  const Condition3Report c3 = verify_condition_3(t, b, 12, o.seed);
  r.add("x = sum E(x lambda*) lambda", c3.reconstruction_residual, o.tol);
  r.add("x = sum lambda* E(lambda x)", c3.adjoint_form_residual, o.tol);
  r.add("sum lambda* lambda = 1/tau",
        t.hs_norm(watatani_index(t, b) -
                  (1.0 / t.tau()) * t.identity(0)),
        o.tol);
  // pushdown: defining identity and two-route uniqueness
  Rng rng(o.seed * 31 + 5);
  double def = 0.0, uniq = 0.0;
  for (int i = 0; i < 6; ++i) {
    const TowerElement x = t.random(1, rng);
    const TowerElement x0 = t.pushdown(x);
    const double scale = std::max(1.0, t.hs_norm(x));
    def = std::max(def, t.hs_norm(x * t.jones(1) - t.up(x0) * t.jones(1)) /
                            scale);
    const TowerElement x0b =
        (1.0 / t.tau()) * t.expectation_down(x * t.jones(1));
    uniq = std::max(uniq, t.hs_norm(x0 - x0b) / scale);
  }
  r.add("pushdown defining identity", def, o.tol);
  r.add("pushdown two routes agree", uniq, 1e-10);
  return r;
}

inline SuiteReport cor26(const Tower& t, const VerifyOptions& o) {
  SuiteReport r{"cor2.6", "Cor 2.6", {}, 0.0};
  if (t.depth() < 2)
    throw StructuralError("cor2.6: needs tower depth >= 2");
  Basis b = construct_basis(t);
  Basis lifted = lift_basis(t, 0, b);
  Basis comp = compose_bases(t, b, lifted);
  const Condition3Report c3 = verify_condition_3(t, comp, 8, o.seed);
  r.add("composite reconstructs M1 over N", c3.reconstruction_residual,
        o.tol);
  r.add("composite adjoint form", c3.adjoint_form_residual, o.tol);
  if (t.depth() >= 3)
    r.add("composite sum lambda* e_[-1,1] lambda = 1",
          verify_condition_2(t, comp, e_interval(t, -1, 2).value), o.tol);
  return r;
}

inline SuiteReport cor27(const Tower& t, const VerifyOptions& o) {
  SuiteReport r{"cor2.7", "Cor 2.7", {}, 0.0};
  if (t.depth() < 2)
    throw StructuralError("cor2.7: needs tower depth >= 2");
  Basis b = construct_basis(t);
  Basis l1 = lift_basis(t, 0, b);
  r.add("lifted basis condition (2)",
        verify_condition_2(t, l1, pair_jones(t, l1)), o.tol);
  r.add("lifted index sum",
        t.hs_norm(watatani_index(t, l1) -
                  (1.0 / t.tau()) * t.identity(1)),
        o.tol);
  if (t.depth() >= 3) {
    Basis l2 = lift_basis(t, 1, l1);
    r.add("second lift condition (2)",
          verify_condition_2(t, l2, pair_jones(t, l2)), o.tol);
  }
  return r;
}

inline SuiteReport cor29(const Tower& t, const VerifyOptions& o) {
  SuiteReport r{"cor2.9", "Cor 2.9", {}, 0.0};
  if (t.depth() < 3)
    throw StructuralError("cor2.9: needs tower depth >= 3");
  Basis b = construct_basis(t);
  std::vector<int> ks = {2};
  if (t.depth() >= 5 && std::pow(double(b.size()), 3) <= 512.0)
    ks.push_back(3);
  for (int k : ks) {
    Basis tb = tower_basis(t, k, b);
    const std::string tag = "k=" + std::to_string(k);
    r.add(tag + " sum lambda* e_[-1," + std::to_string(k - 1) +
              "] lambda = 1",
          verify_condition_2(t, tb, e_interval(t, -1, k).value), o.tol);
    const Condition3Report c3 = verify_condition_3(t, tb, 4, o.seed);
    r.add(tag + " reconstruction over N", c3.reconstruction_residual, o.tol);
    // prefactor exponent -k(k-1)/4, pinned by the compose/lift route
    Basis chain = b;
    Basis step = b;
    for (int j = 1; j < k; ++j) {
      step = lift_basis(t, j - 1, step);
      chain = compose_bases(t, chain, step);
    }
    double diff = 0.0;
    for (int i = 0; i < tb.size(); ++i)
      diff = std::max(diff,
                      t.hs_norm(tb.elements[i] - chain.elements[i]));
    r.add(tag + " prefactor tau^{-k(k-1)/4} matches compose route", diff,
          o.tol);
  }
  return r;
}

inline SuiteReport lem31(const Tower& t, const VerifyOptions& o) {
  SuiteReport r{"lem3.1", "Lem 3.1", {}, 0.0};
  const Inclusion& inc = t.inclusion();
  const auto commutant = relative_commutant(inc);
  Rng rng(o.seed * 1009 + 7);
  double worst = 0.0;
  for (int i = 0; i < o.automorphism_samples; ++i) {
    FdAutomorphism a = random_n_invariant_automorphism(inc, commutant, rng);
    worst = std::max(worst, check_trace_preserving(inc, a));
  }
  r.add("tr is invariant under N-invariant automorphisms", worst, 1e-10);
  return r;
}

inline SuiteReport thm32(const Tower& t, const VerifyOptions& o) {
  SuiteReport r{"thm3.2", "Thm 3.2", {}, 0.0};
  const Inclusion& inc = t.inclusion();
  const auto commutant = relative_commutant(inc);
  Rng rng(o.seed * 7727 + 3);
  FdAutomorphism a0 = random_n_invariant_automorphism(inc, commutant, rng);
  Basis b = construct_basis(t);
  TowerAutomorphism a = extend_automorphism(t, b, a0);

  r.add("alpha1(e1) = e1",
        t.hs_norm(apply_level_map(t, a, t.jones(1)) - t.jones(1)), o.tol);
  double hom = 0.0, star = 0.0, restr = 0.0, trp = 0.0;
  for (int i = 0; i < 6; ++i) {
    const TowerElement x = t.random(1, rng);
    const TowerElement y = t.random(1, rng);
    const double s = std::max(1.0, t.hs_norm(x) * t.hs_norm(y));
    hom = std::max(hom, t.hs_norm(apply_level_map(t, a, x * y) -
                                  apply_level_map(t, a, x) *
                                      apply_level_map(t, a, y)) /
                            s);
    star = std::max(star, t.hs_norm(apply_level_map(t, a, adjoint(x)) -
                                    adjoint(apply_level_map(t, a, x))) /
                              std::max(1.0, t.hs_norm(x)));
    trp = std::max(trp, std::abs(t.trace(apply_level_map(t, a, x)) -
                                 t.trace(x)) /
                            std::max(1.0, t.hs_norm(x)));
    const TowerElement z = t.random(0, rng);
    restr = std::max(restr,
                     t.hs_norm(apply_level_map(t, a, t.up(z)) -
                               t.up(t.from_algebra(
                                   0, a0(z.algebra_element())))) /
                         std::max(1.0, t.hs_norm(z)));
  }
  r.add("alpha1 multiplicative", hom, o.tol);
  r.add("alpha1 star-preserving", star, o.tol);
  r.add("alpha1 restricts to alpha0", restr, o.tol);
  r.add("alpha1 trace-preserving", trp, o.tol);

  // uniqueness across a second basis: a deterministic unitary recombination
  const int n = b.size();
  CMatrix h(n, n);
  Rng mix(o.seed * 41 + 13);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h(i, j) = mix.complex_gaussian();
  h = 0.5 * (h + h.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  CVector phase(n);
  for (int i = 0; i < n; ++i)
    phase(i) = std::exp(Complex(0.0, es.eigenvalues()(i)));
  const CMatrix w =
      es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
  Basis b2;
  b2.lower = -1;
  b2.upper = 0;
  for (int i = 0; i < n; ++i) {
    TowerElement acc = t.zero(0);
    for (int j = 0; j < n; ++j) acc = acc + w(i, j) * b.elements[j];
    b2.elements.push_back(acc);
  }
  TowerAutomorphism a2 = extend_automorphism(t, b2, a0);
  r.add("uniqueness across bases", (a.maps[1] - a2.maps[1]).norm(), o.tol);
  return r;
}

inline SuiteReport cor33(const Tower& t, const VerifyOptions& o) {
  SuiteReport r{"cor3.3", "Cor 3.3", {}, 0.0};
  if (t.depth() < 2)
    throw StructuralError("cor3.3: needs tower depth >= 2");
  const Inclusion& inc = t.inclusion();
  const auto commutant = relative_commutant(inc);
  Rng rng(o.seed * 523 + 11);
  FdAutomorphism a0 = random_n_invariant_automorphism(inc, commutant, rng);
  const int depth = std::min(2, t.depth());
  TowerAutomorphism a = extend_tower(t, a0, depth);
  for (int j = 1; j <= depth; ++j)
    r.add("alpha fixes e_" + std::to_string(j),
          t.hs_norm(apply_level_map(t, a, t.up_to(t.jones(j), depth)) -
                    t.up_to(t.jones(j), depth)),
          o.tol);
  double compat = 0.0;
  for (int k = 0; k < depth; ++k)
    for (int i = 0; i < 3; ++i) {
      const TowerElement x = t.random(k, rng);
      compat = std::max(compat,
                        t.hs_norm(apply_level_map(t, a, t.up(x)) -
                                  t.up(apply_level_map(t, a, x))) /
                            std::max(1.0, t.hs_norm(x)));
    }
  r.add("alpha_{k+1} extends alpha_k", compat, o.tol);
  return r;
}

inline SuiteReport lem34(const Tower& t, const VerifyOptions& o) {
  SuiteReport r{"lem3.4", "Lem 3.4", {}, 0.0};
  Basis b = construct_basis(t);
  {
    FvrtReport f = fvrt_check(t, -1, 1, b, 6, o.seed);
    r.add("(-1,1) sum lambda* f lambda = 1", f.sum_residual, o.tol);
    r.add("(-1,1) f x f = E(x) f", f.exchange_residual, o.tol);
    r.add("(-1,1) injectivity defect", f.injectivity_defect, 0.5);
    r.add("(-1,1) generation defect", f.generation_defect, 0.5);
  }
  if (t.depth() >= 2) {
    Basis l1 = lift_basis(t, 0, b);
    FvrtReport f = fvrt_check(t, 0, 1, l1, 6, o.seed);
    r.add("(0,1) sum lambda* f lambda = 1", f.sum_residual, o.tol);
    r.add("(0,1) f x f = E(x) f", f.exchange_residual, o.tol);
    r.add("(0,1) injectivity defect", f.injectivity_defect, 0.5);
    r.add("(0,1) generation defect", f.generation_defect, 0.5);
  }
  return r;
}

inline SuiteReport thm35(const Tower& t, const VerifyOptions& o) {
  SuiteReport r{"thm3.5", "S3.2 Thm (multi-step)", {}, 0.0};
  if (t.depth() < 3)
    throw StructuralError("thm3.5: needs tower depth >= 3");
  Basis b = construct_basis(t);
  IntervalProjection f = e_interval(t, -1, 2);
  r.add("e_[-1,1] is a projection",
        std::max(t.hs_norm(f.value * f.value - f.value),
                 t.hs_norm(adjoint(f.value) - f.value)),
        o.tol);
  r.add("e_[-1,1] commutes with N",
        interval_commutation_residual(t, -1, 2, o.seed), o.tol);
  Basis tb = tower_basis(t, 2, b);
  FvrtReport fr = fvrt_check(t, -1, 2, tb, 6, o.seed);
  r.add("(-1,2) sum lambda* f lambda = 1", fr.sum_residual, o.tol);
  r.add("(-1,2) f x f = E(x) f", fr.exchange_residual, o.tol);
  r.add("(-1,2) injectivity defect", fr.injectivity_defect, 0.5);
  r.add("(-1,2) generation defect", fr.generation_defect, 0.5);
  r.add("recursion n=0", multistep_recursion_check(t, 0), o.tol);
  if (t.depth() >= 5)
    r.add("recursion n=1", multistep_recursion_check(t, 1), o.tol);
  return r;
}

inline SuiteReport tl(const Tower& t, const VerifyOptions& o) {
  SuiteReport r{"tl", "TL relations / contraction", {}, 0.0};
  const TlReport rel = tl_relations(t);
  r.add("e_i e_{i+-1} e_i = tau e_i", rel.braid_residual, o.tol);
  r.add("[e_i, e_j] = 0 for |i-j| >= 2", rel.commute_residual, o.tol);
  for (int n = 0; 2 * n + 1 <= t.depth() && n <= 2; ++n)
    r.add("contraction n=" + std::to_string(n), contraction_residual(t, n),
          o.tol);
  return r;
}

inline SuiteReport eq34(const Tower& t, const VerifyOptions& o) {
  SuiteReport r{"eq3.4", "Eq (3.4)", {}, 0.0};
  if (t.depth() < 3)
    throw StructuralError("eq3.4: needs tower depth >= 3");
  for (int n = 0; 2 * n + 3 <= t.depth() && n <= 1; ++n)
    r.add("eq(3.4) n=" + std::to_string(n), eq34_residual(t, n), o.tol);
  return r;
}

}  // namespace suites

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {
      "thm2.2", "cor2.6", "cor2.7", "cor2.9", "lem3.1", "thm3.2",
      "cor3.3", "lem3.4", "thm3.5", "tl",     "eq3.4"};
  return names;
}

inline SuiteReport run_suite(const std::string& name, const Tower& t,
                             const VerifyOptions& o) {
  using Fn = std::function<SuiteReport(const Tower&, const VerifyOptions&)>;
  static const std::map<std::string, Fn> table = {
      {"thm2.2", suites::thm22}, {"cor2.6", suites::cor26},
      {"cor2.7", suites::cor27}, {"cor2.9", suites::cor29},
      {"lem3.1", suites::lem31}, {"thm3.2", suites::thm32},
      {"cor3.3", suites::cor33}, {"lem3.4", suites::lem34},
      {"thm3.5", suites::thm35}, {"tl", suites::tl},
      {"eq3.4", suites::eq34}};
  const auto it = table.find(name);
  if (it == table.end()) {
    std::string msg = "unknown suite '" + name + "'; valid suites:";
    for (const auto& s : suite_names()) msg += " " + s;
    msg += " all";
    throw StructuralError(msg);
  }
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport r = it->second(t, o);
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return r;
}

}  // namespace subfactor
