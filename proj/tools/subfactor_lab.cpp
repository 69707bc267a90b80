// subfactor-lab: build connected inclusions of multi-matrix algebras, their
// Markov data, Jones towers and Pimsner-Popa bases, and verify the operator
// identities they satisfy. Exit codes: 0 all checks pass, 1 failures,
// 2 input error.

#include <CLI11.hpp>
#include <iomanip>
#include <iostream>
#include <json.hpp>

#include "subfactor/automorphisms.hpp"
#include "subfactor/bases.hpp"
#include "subfactor/catalog.hpp"
#include "subfactor/multistep.hpp"
#include "subfactor/report.hpp"
#include "subfactor/specfile.hpp"
#include "subfactor/verification.hpp"

using namespace subfactor;

namespace {

struct CommonArgs {
  std::string specfile;
  int depth = -1;  // -1: use the spec's depth or the command default
  std::uint64_t seed = 0;
  double tol = 1e-8;
  bool json = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_depth = true) {
  cmd->add_option("specfile", a.specfile, "inclusion spec file")->required();
  if (with_depth) cmd->add_option("--depth", a.depth, "tower depth");
  cmd->add_option("--seed", a.seed, "seed for randomized checks");
  cmd->add_option("--tol", a.tol, "residual tolerance");
  cmd->add_flag("--json", a.json, "emit a JSON report");
}

int resolve_depth(const CommonArgs& a, const InclusionSpec& spec,
                  int fallback) {
  if (a.depth >= 0) return a.depth;
  if (spec.depth) return *spec.depth;
  return fallback;
}

Tower build(const InclusionSpec& spec, const CommonArgs& a, int depth) {
  TowerOptions opt;
  opt.seed = a.seed;
  opt.tol = a.tol;
  return build_tower(spec.to_inclusion(), depth, opt);
}

int finish(const VerificationReport& report, bool json) {
  if (json)
    std::cout << to_json(report).dump(2) << "\n";
  else
    print_table(std::cout, report);
  return report.all_pass() ? 0 : 1;
}

int cmd_markov(const CommonArgs& a) {
  const InclusionSpec spec = load_spec(a.specfile);
  const Inclusion inc = spec.to_inclusion();
  const MarkovData& md = inc.markov();
  if (a.json) {
    nlohmann::json j;
    j["spec"] = spec.name;
    j["norm_sq"] = md.norm_sq;
    j["tau"] = md.tau;
    j["t"] = md.t_vec;
    j["s"] = md.s_vec;
    j["iterations"] = md.iterations;
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::cout << "spec " << spec.name << "\n";
  std::cout << std::setprecision(15);
  std::cout << "  |G|^2 = " << md.norm_sq << "\n";
  std::cout << "  tau   = " << md.tau << "\n";
  std::cout << "  t     =";
  for (double v : md.t_vec) std::cout << ' ' << v;
  std::cout << "\n  s     =";
  for (double v : md.s_vec) std::cout << ' ' << v;
  std::cout << "\n  (power iteration: " << md.iterations << " iterations)\n";
  return 0;
}

int cmd_tower(const CommonArgs& a) {
  const InclusionSpec spec = load_spec(a.specfile);
  const int depth = resolve_depth(a, spec, 2);
  const Tower t = build(spec, a, depth);

  nlohmann::json levels = nlohmann::json::array();
  std::ostringstream table;
  table << "spec " << spec.name << ", tower to depth " << depth << "\n";
  for (int k = -1; k <= depth; ++k) {
    std::vector<int> dims;
    if (k <= 0) {
      dims = (k == -1) ? t.inclusion().small()->block_dims()
                       : t.inclusion().big()->block_dims();
    } else {
      dims = t.block_structure(k).block_dims;
    }
    nlohmann::json jl;
    jl["level"] = k;
    jl["linear_dim"] = t.linear_dim(k);
    jl["block_dims"] = dims;
    levels.push_back(jl);
    table << "  level " << std::setw(2) << k << ": linear dim "
          << std::setw(5) << t.linear_dim(k) << ", blocks (";
    for (std::size_t i = 0; i < dims.size(); ++i)
      table << (i ? "," : "") << dims[i];
    table << ")\n";
  }
  const TlReport tl = tl_relations(t);
  table << "  TL residuals: braid " << std::scientific << std::setprecision(3)
        << tl.braid_residual << ", commute " << tl.commute_residual << "\n";
  const bool pass = tl.braid_residual <= a.tol && tl.commute_residual <= a.tol;
  if (a.json) {
    nlohmann::json j;
    j["spec"] = spec.name;
    j["depth"] = depth;
    j["levels"] = levels;
    j["tl_braid_residual"] = tl.braid_residual;
    j["tl_commute_residual"] = tl.commute_residual;
    j["pass"] = pass;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << table.str();
  }
  return pass ? 0 : 1;
}

int cmd_basis(const CommonArgs& a) {
  const InclusionSpec spec = load_spec(a.specfile);
  const int depth = std::max(1, resolve_depth(a, spec, 1));
  const Tower t = build(spec, a, depth);
  VerifyOptions vo{a.seed, a.tol, 20};
  VerificationReport report;
  report.spec_name = spec.name;
  report.seed = a.seed;
  report.suites.push_back(run_suite("thm2.2", t, vo));
  const Basis b = construct_basis(t);
  if (!a.json)
    std::cout << "basis for M/N has " << b.size()
              << " elements (tau = " << t.tau() << ")\n";
  return finish(report, a.json);
}

int cmd_verify(const CommonArgs& a, const std::vector<std::string>& names) {
  const InclusionSpec spec = load_spec(a.specfile);
  std::vector<std::string> run = names;
  if (run.empty())
    throw StructuralError("verify: no suites given; use 'all' or a list");
  if (run.size() == 1 && run[0] == "all") run = suite_names();
  for (const auto& n : run) {
    bool known = false;
    for (const auto& s : suite_names()) known = known || s == n;
    if (!known) {
      std::string msg = "unknown suite '" + n + "'; valid suites:";
      for (const auto& s : suite_names()) msg += " " + s;
      msg += " all";
      throw StructuralError(msg);
    }
  }
  const int depth = resolve_depth(a, spec, 3);
  const Tower t = build(spec, a, depth);
  VerifyOptions vo{a.seed, a.tol, 20};
  VerificationReport report;
  report.spec_name = spec.name;
  report.seed = a.seed;
  for (const auto& n : run) report.suites.push_back(run_suite(n, t, vo));
  return finish(report, a.json);
}

int cmd_extend_aut(const CommonArgs& a) {
  const InclusionSpec spec = load_spec(a.specfile);
  if (!spec.has_automorphism())
    throw StructuralError("extend-aut: spec has no automorphism block");
  const int depth = std::max(1, resolve_depth(a, spec, 2));
  const Tower t = build(spec, a, depth);
  const Inclusion& inc = t.inclusion();
  FdAutomorphism a0 =
      make_automorphism(inc, *spec.sigma, spec.unitary(inc.big()));
  if (!a0.n_invariant())
    throw StructuralError("extend-aut: automorphism does not preserve N");

  VerificationReport report;
  report.spec_name = spec.name;
  report.seed = a.seed;
  SuiteReport r{"extend-aut", "Lem 3.1 / Thm 3.2 / Cor 3.3", {}, 0.0};
  const auto t0 = std::chrono::steady_clock::now();
  r.add("trace preservation of alpha0", check_trace_preserving(inc, a0),
        1e-10);
  TowerAutomorphism ta = extend_tower(t, a0, depth);
  Rng rng(a.seed * 97 + 1);
  for (int k = 1; k <= depth; ++k)
    r.add("alpha fixes e_" + std::to_string(k),
          t.hs_norm(apply_level_map(t, ta, t.up_to(t.jones(k), depth)) -
                    t.up_to(t.jones(k), depth)),
          a.tol);
  double hom = 0.0, compat = 0.0, trp = 0.0;
  for (int i = 0; i < 6; ++i) {
    const TowerElement x = t.random(depth, rng);
    const TowerElement y = t.random(depth, rng);
    const double s = std::max(1.0, t.hs_norm(x) * t.hs_norm(y));
    hom = std::max(hom, t.hs_norm(apply_level_map(t, ta, x * y) -
                                  apply_level_map(t, ta, x) *
                                      apply_level_map(t, ta, y)) /
                            s);
    trp = std::max(trp, std::abs(t.trace(apply_level_map(t, ta, x)) -
                                 t.trace(x)) /
                            std::max(1.0, t.hs_norm(x)));
  }
  for (int k = 0; k < depth; ++k)
    for (int i = 0; i < 3; ++i) {
      const TowerElement x = t.random(k, rng);
      compat = std::max(compat,
                        t.hs_norm(apply_level_map(t, ta, t.up(x)) -
                                  t.up(apply_level_map(t, ta, x))) /
                            std::max(1.0, t.hs_norm(x)));
    }
  r.add("top-level homomorphism", hom, a.tol);
  r.add("alpha_{k+1} extends alpha_k", compat, a.tol);
  r.add("trace preservation up the tower", trp, a.tol);
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  report.suites.push_back(std::move(r));
  return finish(report, a.json);
}

int cmd_multistep(const CommonArgs& a) {
  const InclusionSpec spec = load_spec(a.specfile);
  const int depth = resolve_depth(a, spec, 3);
  const Tower t = build(spec, a, depth);
  VerifyOptions vo{a.seed, a.tol, 20};
  VerificationReport report;
  report.spec_name = spec.name;
  report.seed = a.seed;
  report.suites.push_back(run_suite("lem3.4", t, vo));
  if (depth >= 3) report.suites.push_back(run_suite("thm3.5", t, vo));
  report.suites.push_back(run_suite("tl", t, vo));
  if (depth >= 3) report.suites.push_back(run_suite("eq3.4", t, vo));
  return finish(report, a.json);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "subfactor-lab: Markov traces, Jones towers, Pimsner-Popa bases and "
      "their verification for connected inclusions of multi-matrix algebras"};
  app.require_subcommand(1);

  CommonArgs margs, targs, bargs, vargs, eargs, msargs;
  std::vector<std::string> suites_arg;

  CLI::App* markov = app.add_subcommand("markov", "Markov trace data");
  add_common(markov, margs, false);

  CLI::App* tower =
      app.add_subcommand("tower", "tower levels and block structures");
  add_common(tower, targs);

  CLI::App* basis =
      app.add_subcommand("basis", "construct and verify a basis for M/N");
  add_common(basis, bargs);

  CLI::App* verify = app.add_subcommand("verify", "run verification suites");
  verify->add_option("specfile", vargs.specfile, "inclusion spec file")
      ->required();
  verify->add_option("suites", suites_arg,
                     "suite names (thm2.2 cor2.6 cor2.7 cor2.9 lem3.1 "
                     "thm3.2 cor3.3 lem3.4 thm3.5 tl eq3.4) or 'all'");
  verify->add_option("--depth", vargs.depth, "tower depth");
  verify->add_option("--seed", vargs.seed, "seed for randomized checks");
  verify->add_option("--tol", vargs.tol, "residual tolerance");
  verify->add_flag("--json", vargs.json, "emit a JSON report");

  CLI::App* extend = app.add_subcommand(
      "extend-aut", "extend the spec's automorphism up the tower");
  add_common(extend, eargs);

  CLI::App* multistep =
      app.add_subcommand("multistep", "multi-step basic construction checks");
  add_common(multistep, msargs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (markov->parsed()) return cmd_markov(margs);
    if (tower->parsed()) return cmd_tower(targs);
    if (basis->parsed()) return cmd_basis(bargs);
    if (verify->parsed()) return cmd_verify(vargs, suites_arg);
    if (extend->parsed()) return cmd_extend_aut(eargs);
    if (multistep->parsed()) return cmd_multistep(msargs);
  } catch (const StructuralError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
