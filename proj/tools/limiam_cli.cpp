#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <string>

#include "limiam/bench.hpp"
#include "limiam/discover.hpp"
#include "limiam/io.hpp"
#include "limiam/popfail.hpp"
#include "limiam/simulate.hpp"
#include "limiam/svar.hpp"
#include "limiam/tensor.hpp"

using namespace limiam;

namespace {

void emit(const std::string& out, const json& j) {
  if (out.empty() || out == "-")
    std::cout << j.dump(2) << '\n';
  else
    write_text(out, j.dump(2) + "\n");
}

std::string sidecar_path(const std::string& csv) {
  std::filesystem::path p(csv);
  p.replace_extension(".dag.json");
  return p.string();
}

json lower_matrix_json(const Eigen::MatrixXd& m) {
  json entries = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      entries.push_back({json::array({i + 1, j + 1}), m(i, j)});
  return {{"order", 2}, {"dim", m.rows()}, {"symmetric", false}, {"entries", entries}};
}

// ------------------------------------------------------------ subcommands

struct LdlArgs {
  std::string input, out;
  int order = 0;
};

int run_ldl(const LdlArgs& a) {
  const SymmetricTensor t = tensor_from_json(json::parse(read_text(a.input)));
  require(t.order() == a.order, "ldl: --order " + std::to_string(a.order) + " but the tensor has order " +
                                    std::to_string(t.order()));
  const LdlFactors f = higher_order_ldl(t);
  emit(a.out, {{"L", lower_matrix_json(f.L.matrix())}, {"D", tensor_to_json(f.D)}});
  return 0;
}

struct SimulateArgs {
  int p = 0, T = 0;
  std::string aux = "uniform", design = "independent", out;
  std::uint64_t seed = 0;
  double rho = 0.5, gamma = 1.0, edge_prob = 1.0;
};

int run_simulate(const SimulateArgs& a) {
  DagOptions opt;
  opt.edge_prob = a.edge_prob;
  const WeightedDag dag = sample_dag(a.p, derive_seed(a.seed, {1}), opt);
  const SampleMatrix eps =
      sample_disturbances(a.p, a.T, parse_aux(a.aux), parse_design(a.design, a.rho, a.gamma), derive_seed(a.seed, {2}));
  write_text(a.out, csv_matrix_text(generate_dataset(dag, eps), default_names(a.p)));
  json side = dag_to_json(dag);
  side["aux"] = a.aux;
  side["design"] = a.design;
  side["T"] = a.T;
  side["seed"] = a.seed;
  write_text(sidecar_path(a.out), side.dump(2) + "\n");
  std::cerr << "wrote " << a.out << " and " << sidecar_path(a.out) << '\n';
  return 0;
}

struct DiscoverArgs {
  std::string input, scorer = "kernel", out;
  int d = 4;
  std::uint64_t seed = 0;
};

int run_discover(const DiscoverArgs& a) {
  const NamedMatrix data = read_csv_matrix(a.input);
  const DiscoveryResult r = a.scorer == "direct-lingam" ? direct_lingam_baseline(data.values)
                                                        : direct_limiam(data.values, parse_scorer(a.scorer, a.d), a.seed);
  json j = discovery_to_json(r, data.names);
  j["seed"] = a.seed;
  j["observations"] = data.values.rows();
  emit(a.out, j);
  return 0;
}

struct PopfailArgs {
  double k1 = 0.0, k2 = 0.0, c = 0.0;
  bool empirical = false;
  int T = 100000;
  std::uint64_t seed = 0;
};

int run_popfail(const PopfailArgs& a) {
  const Cumulant4Config cfg{a.k1, a.k2, a.c};
  for (const auto& w : cfg.admissibility_warnings()) std::cerr << "warning: " << w << '\n';
  const JadeVerdict jv = jade_reversal_verdict(cfg);
  const ResidualScores rs = residual_dependence_scores(cfg);
  std::printf("cumulants          k1 = %.6g  k2 = %.6g  c = %.6g\n", a.k1, a.k2, a.c);
  std::printf("JADE contrast      g(0) = %.6f   g(pi/4) = %.6f\n", jv.g_true, jv.g_reversed);
  std::printf("JADE threshold     (k1+k2+6c)^2 = %.6f   8(k1^2+k2^2) = %.6f\n", jv.lhs, jv.rhs);
  std::printf("JADE verdict       %s\n", std::string(to_string(jv.verdict)).c_str());
  if (jv.B_hat)
    std::printf("JADE recovered B   [[%.4f, %.4f], [%.4f, %.4f]]\n", (*jv.B_hat)(0, 0), (*jv.B_hat)(0, 1),
                (*jv.B_hat)(1, 0), (*jv.B_hat)(1, 1));
  std::printf("residual scores    source = %.6f   reversed = %.6f\n", rs.source_score, rs.reversed_score);
  std::printf("residual verdict   %s%s\n", std::string(to_string(rs.verdict)).c_str(),
              rs.sufficient_condition ? "   (c > (k1+k2)/6 holds)" : "");
  if (a.empirical) {
    const JadeEmpirical e = jade_empirical_check(cfg, a.T, a.seed);
    std::printf("empirical (T=%d)   theta_hat = %.4f   |to 0 mod pi/2| = %.4f   |to pi/4| = %.4f\n", a.T, e.theta_hat,
                e.distance_to_true, e.distance_to_reversed);
    std::printf("sample cumulants   k1 = %.4f  k2 = %.4f  c = %.4f\n", e.sample_cumulants.k1, e.sample_cumulants.k2,
                e.sample_cumulants.c);
  }
  return 0;
}

struct SvarArgs {
  std::string input, scorer = "kernel", out;
  int lags = 1, permutations = 999, bootstrap = 200, d = 4;
  std::uint64_t seed = 0;
};

int run_svar(const SvarArgs& a) {
  const NamedMatrix data = read_csv_matrix(a.input);
  const VarFit fit = fit_var(data.values, a.lags);
  const SvarDiscovery sd = svar_discover(fit.standardized, parse_scorer(a.scorer, a.d), a.seed);
  const TestReport ordered = ordered_meanind_test(sd.eps_ordered, a.permutations, derive_seed(a.seed, {1}));
  const TestReport mutual = mutual_independence_test(sd.eps_ordered, a.permutations, derive_seed(a.seed, {2}));

  json phi = json::array();
  for (const auto& m : fit.model.phi) phi.push_back(matrix_json(m));
  json report = {
      {"variables", data.names},
      {"var", {{"p", fit.model.p},
               {"lags", fit.model.k},
               {"observations", fit.standardized.rows()},
               {"intercept", std::vector<double>(fit.model.intercept.data(), fit.model.intercept.data() + fit.model.p)},
               {"phi", phi},
               {"residual_sd", std::vector<double>(fit.resid_sd.data(), fit.resid_sd.data() + fit.model.p)}}},
      {"discovery", discovery_to_json(sd.discovery, data.names)},
      {"A_hat", matrix_json(sd.A_hat)},
      {"ordered_mean_independence_test", test_report_json(ordered)},
      {"mutual_independence_test", test_report_json(mutual)},
      {"seed", a.seed}};
  if (a.bootstrap > 0) {
    const BootstrapResult b = bootstrap_se_B(data.values, a.lags, sd.discovery.order, a.bootstrap, derive_seed(a.seed, {3}));
    report["B_se"] = matrix_json(b.se);
    report["bootstrap_replicates"] = b.replicates;
  }
  emit(a.out, report);
  return 0;
}

struct BenchArgs {
  std::string config, out = "results";
  bool full_scale = false, quiet = false;
};

int run_bench(const BenchArgs& a) {
  BenchmarkConfig cfg = load_bench_config(a.config);
  if (a.full_scale) cfg = cfg.full_scale();
  std::filesystem::create_directories(a.out);
  const auto cells = run_grid(cfg, a.quiet ? ProgressFn{} : ProgressFn{[](const std::string& m) { std::cerr << m << '\n'; }});
  write_bench_outputs(a.out, cfg, cells);
  std::cout << summary_text(summarize(cells));
  std::cerr << "wrote " << a.out << "/{cells.csv,records.csv,summary.csv,summary.txt,manifest.json}\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal order discovery under mean independence"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  LdlArgs ldl;
  auto* c_ldl = app.add_subcommand("ldl", "Higher-order LDL factorization of a symmetric tensor");
  c_ldl->add_option("--input", ldl.input, "tensor JSON (order, dim, entries)")->required();
  c_ldl->add_option("--order", ldl.order, "tensor order, checked against the file")->required();
  c_ldl->add_option("--out", ldl.out, "output JSON (default stdout)");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Sample a DAG and a dataset");
  c_sim->add_option("--p", sim.p, "number of variables")->required();
  c_sim->add_option("--T", sim.T, "number of observations")->required();
  c_sim->add_option("--aux", sim.aux, "uniform | ushaped-beta | concentrated-beta | bimodal");
  c_sim->add_option("--design", sim.design, "independent | lagged-hetero | threshold | mixture");
  c_sim->add_option("--seed", sim.seed);
  c_sim->add_option("--rho", sim.rho, "lagged-hetero persistence");
  c_sim->add_option("--gamma", sim.gamma, "lagged-hetero strength");
  c_sim->add_option("--edge-prob", sim.edge_prob, "probability of each DAG edge (1 = dense)");
  c_sim->add_option("--out", sim.out, "output CSV; the DAG goes to <out>.dag.json")->required();

  DiscoverArgs dis;
  auto* c_dis = app.add_subcommand("discover", "Estimate a causal order and B from a CSV dataset");
  c_dis->add_option("--input", dis.input)->required();
  c_dis->add_option("--scorer", dis.scorer, "kernel | sieve | moment | finite-order | direct-lingam");
  c_dis->add_option("--d", dis.d, "moment order for the finite-order scorer");
  c_dis->add_option("--seed", dis.seed);
  c_dis->add_option("--out", dis.out, "output JSON (default stdout)");

  PopfailArgs pf;
  auto* c_pf = app.add_subcommand("popfail", "Two-variable JADE reversal analysis");
  c_pf->add_option("--k1", pf.k1)->required();
  c_pf->add_option("--k2", pf.k2)->required();
  c_pf->add_option("--c", pf.c)->required();
  c_pf->add_flag("--empirical", pf.empirical, "also run the sample-based check");
  c_pf->add_option("--T", pf.T);
  c_pf->add_option("--seed", pf.seed);

  SvarArgs sv;
  auto* c_sv = app.add_subcommand("svar", "Structural VAR: fit, discover, test, bootstrap");
  c_sv->add_option("--input", sv.input)->required();
  c_sv->add_option("--lags", sv.lags)->required();
  c_sv->add_option("--scorer", sv.scorer, "kernel | sieve | moment | finite-order");
  c_sv->add_option("--d", sv.d);
  c_sv->add_option("--permutations", sv.permutations);
  c_sv->add_option("--bootstrap", sv.bootstrap, "replicates (0 skips the bootstrap)");
  c_sv->add_option("--seed", sv.seed);
  c_sv->add_option("--out", sv.out, "output JSON (default stdout)");

  BenchArgs be;
  auto* c_be = app.add_subcommand("bench", "Run the simulation grid");
  c_be->add_option("--config", be.config)->required();
  c_be->add_option("--out", be.out, "output directory");
  c_be->add_flag("--full-scale", be.full_scale, "p = 2..6 and 100 replications");
  c_be->add_flag("--quiet", be.quiet, "no per-cell progress");

  CLI11_PARSE(app, argc, argv);
  try {
    if (c_ldl->parsed()) return run_ldl(ldl);
    if (c_sim->parsed()) return run_simulate(sim);
    if (c_dis->parsed()) return run_discover(dis);
    if (c_pf->parsed()) return run_popfail(pf);
    if (c_sv->parsed()) return run_svar(sv);
    if (c_be->parsed()) return run_bench(be);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DegenerateError& e) {
    std::cerr << "degenerate data: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 4;
  } catch (const json::exception& e) {
    std::cerr << "json error: " << e.what() << '\n';
    return 4;
  }
  return 1;
}
