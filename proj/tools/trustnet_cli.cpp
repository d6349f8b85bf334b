// Command-line front end: generate networks, simulate opinion dynamics,
// run the sparse identification solve, drive full studies, and evaluate
// placement recoverability conditions.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "trustnet/dynamics.hpp"
#include "trustnet/experiment.hpp"
#include "trustnet/graph.hpp"
#include "trustnet/identifiability.hpp"
#include "trustnet/identify.hpp"
#include "trustnet/io.hpp"
#include "trustnet/metrics.hpp"
#include "trustnet/random.hpp"

namespace tn = trustnet;

namespace {

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    out.push_back(std::stoi(item, &used));
    if (used != item.size()) throw std::runtime_error("bad integer in list: " + item);
  }
  if (out.empty()) throw std::runtime_error("empty integer list");
  return out;
}

std::vector<tn::Placement> parse_placements(const std::string& text) {
  if (text == "er") return {tn::Placement::er};
  if (text == "regular") return {tn::Placement::regular};
  if (text == "both") return {tn::Placement::er, tn::Placement::regular};
  throw std::runtime_error("placement must be er, regular, or both");
}

tn::DynamicsModel parse_model(const std::string& text, double gamma) {
  if (text == "static") return tn::static_model();
  if (text == "gossip") return tn::gossip_model(gamma);
  throw std::runtime_error("model must be static or gossip");
}

/// Applies a flat key-value config file on top of a base configuration.
tn::ExperimentConfig config_from_file(const std::string& path, tn::ExperimentConfig base) {
  const auto kv = tn::parse_config(tn::read_text_file(path));
  static const std::vector<std::string> known = {
      "scenario", "n_normal", "ns_list", "p_e", "p_s", "placement", "degree", "model",
      "gamma", "sigma", "t_observe", "samples", "t_max", "m", "issues", "epsilon",
      "support_threshold", "trials", "seed", "threads", "solver_tol", "solver_max_iterations",
      "solver_bisection_max", "solver_residual_bracket"};
  for (const auto& [key, value] : kv) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::runtime_error("unknown config key: " + key);
    (void)value;
  }
  base.scenario = tn::config_string(kv, "scenario", base.scenario);
  base.n_normal = static_cast<int>(tn::config_long(kv, "n_normal", base.n_normal));
  if (kv.count("ns_list")) base.ns_values = parse_int_list(kv.at("ns_list"));
  base.p_e = tn::config_double(kv, "p_e", base.p_e);
  base.p_s = tn::config_double(kv, "p_s", base.p_s);
  if (kv.count("placement")) base.placements = parse_placements(kv.at("placement"));
  base.degree_override = static_cast<int>(tn::config_long(kv, "degree", base.degree_override));
  const double gamma = tn::config_double(kv, "gamma", base.model.gamma);
  if (kv.count("model"))
    base.model = parse_model(kv.at("model"), gamma);
  else
    base.model.gamma = gamma;
  base.sigma = tn::config_double(kv, "sigma", base.sigma);
  base.t_observe = tn::config_long(kv, "t_observe", base.t_observe);
  base.samples = tn::config_long(kv, "samples", base.samples);
  base.t_max = tn::config_long(kv, "t_max", base.t_max);
  base.m = static_cast<int>(tn::config_long(kv, "m", base.m));
  base.issues = static_cast<int>(tn::config_long(kv, "issues", base.issues));
  base.epsilon = tn::config_double(kv, "epsilon", base.epsilon);
  base.support_threshold = tn::config_double(kv, "support_threshold", base.support_threshold);
  base.trials = static_cast<int>(tn::config_long(kv, "trials", base.trials));
  base.seed = static_cast<std::uint64_t>(tn::config_long(kv, "seed", static_cast<long>(base.seed)));
  base.threads = static_cast<int>(tn::config_long(kv, "threads", base.threads));
  base.solver.tol = tn::config_double(kv, "solver_tol", base.solver.tol);
  base.solver.max_iterations = tn::config_long(kv, "solver_max_iterations", base.solver.max_iterations);
  base.solver.bisection_max =
      static_cast<int>(tn::config_long(kv, "solver_bisection_max", base.solver.bisection_max));
  base.solver.residual_bracket =
      tn::config_double(kv, "solver_residual_bracket", base.solver.residual_bracket);
  return base;
}

int run_generate(int n_normal, int n_stubborn, double p_e, double p_s,
                 const std::string& placement, int degree, std::uint64_t seed,
                 const std::string& out_dir) {
  tn::SocialGraph graph;
  if (placement == "er") {
    graph = tn::generate_er_graph(n_normal, n_stubborn, p_e, p_s, seed);
  } else if (placement == "regular") {
    const int d = degree > 0 ? degree
                             : std::max(1, std::min(static_cast<int>(std::floor(p_s * n_stubborn + 0.5)),
                                                    n_stubborn));
    graph = tn::generate_regular_placement_graph(n_normal, n_stubborn, p_e, d, seed);
  } else {
    throw std::runtime_error("placement must be er or regular");
  }
  const tn::TrustSystem sys = tn::generate_trust_matrix(graph, tn::derive_seed(seed, 2));
  std::filesystem::create_directories(out_dir);
  tn::write_text_file(out_dir + "/graph.txt", tn::serialize_graph(graph));
  tn::write_text_file(out_dir + "/system.txt", tn::serialize_trust_system(sys));
  std::cout << "wrote " << out_dir << "/graph.txt and " << out_dir << "/system.txt\n";
  return 0;
}

int run_simulate(const std::string& system_path, const std::string& graph_path,
                 const std::string& model_name, double gamma, double sigma, long t_observe,
                 long samples, long t_max, int issues, int m, std::uint64_t seed,
                 const std::string& out_dir, bool dump_snapshots) {
  const tn::TrustSystem sys = tn::parse_trust_system(tn::read_text_file(system_path));
  sys.validate();
  const tn::SocialGraph graph = tn::parse_graph(tn::read_text_file(graph_path));
  graph.validate();
  if (graph.n != sys.n || graph.n_stubborn != sys.n_stubborn)
    throw std::runtime_error("graph and system disagree on agent counts");
  const tn::DynamicsModel model = parse_model(model_name, gamma);

  std::optional<tn::AffineDoubling> ladder;
  if (model.kind == tn::DynamicsModel::Kind::mean_field) ladder.emplace(sys.D);

  std::vector<Eigen::MatrixXd> terminals;
  std::string last_snapshots;
  for (int k = 0; k < issues; ++k) {
    const std::uint64_t issue_seed = tn::derive_seed(seed, 10 + static_cast<std::uint64_t>(k));
    tn::Rng init_rng(tn::derive_seed(issue_seed, 1));
    tn::Rng sched_rng(tn::derive_seed(issue_seed, 2));
    const Eigen::MatrixXd x0 = tn::random_initial_opinions(graph.n, graph.n_stubborn, m, init_rng);
    const tn::SamplingSchedule sched = tn::make_uniform_schedule(t_observe, t_max, samples, sched_rng);
    const tn::SnapshotSet snaps =
        tn::simulate_and_sample(sys, graph, model, x0, sched, sigma, tn::derive_seed(issue_seed, 3),
                                ladder ? &*ladder : nullptr);
    terminals.push_back(tn::estimate_terminal(snaps));
    if (dump_snapshots && k == issues - 1) last_snapshots = tn::snapshot_csv(snaps);
  }
  const tn::DataMatrices data = tn::assemble_data_matrices(terminals, graph.n_stubborn);
  std::filesystem::create_directories(out_dir);
  tn::write_text_file(out_dir + "/Y.csv", tn::matrix_csv(data.Y, data.issues, data.m));
  tn::write_text_file(out_dir + "/Z.csv", tn::matrix_csv(data.Z, data.issues, data.m));
  if (dump_snapshots) tn::write_text_file(out_dir + "/snapshots.csv", last_snapshots);
  std::cout << "wrote " << out_dir << "/Y.csv and " << out_dir << "/Z.csv (" << issues
            << " issues)\n";
  return 0;
}

int run_identify(const std::string& y_path, const std::string& z_path, const std::string& graph_path,
                 double epsilon, const tn::SSISolverOptions& opts, const std::string& out_dir) {
  const tn::SocialGraph graph = tn::parse_graph(tn::read_text_file(graph_path));
  graph.validate();
  tn::SSIProblem prob;
  prob.data.Y = tn::parse_matrix_csv(tn::read_text_file(y_path));
  prob.data.Z = tn::parse_matrix_csv(tn::read_text_file(z_path));
  prob.data.issues = static_cast<int>(prob.data.Y.cols());
  prob.data.m = 1;
  if (prob.data.Y.rows() != graph.n_normal() || prob.data.Z.rows() != graph.n_stubborn)
    throw std::runtime_error("data matrices disagree with the graph's agent counts");
  prob.support_B = tn::support_rows(graph);
  prob.epsilon = epsilon;
  prob.options = opts;
  const tn::SSIEstimate est = tn::solve_ssi(prob);

  tn::TrustSystem out_sys;
  out_sys.n = graph.n;
  out_sys.n_stubborn = graph.n_stubborn;
  out_sys.B = est.B;
  out_sys.D = est.D;
  std::filesystem::create_directories(out_dir);
  tn::write_text_file(out_dir + "/estimate.txt", tn::serialize_trust_system(out_sys));
  tn::write_text_file(out_dir + "/diagnostics.txt", tn::estimate_diagnostics(est));
  std::cout << "status: " << (est.status == tn::SolveStatus::ok ? "ok" : "infeasible_epsilon")
            << " residual: " << tn::format_double(est.residual)
            << " l1_offdiag: " << tn::format_double(est.l1_offdiag) << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"trust network identification toolkit"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "draw a social graph and trust system");
  int g_nn = 50, g_ns = 10, g_degree = 0;
  double g_pe = 0.15, g_ps = 0.15;
  std::string g_placement = "er", g_out = "out";
  std::uint64_t g_seed = 1;
  gen->add_option("--n-normal", g_nn, "normal agent count");
  gen->add_option("--n-stubborn", g_ns, "stubborn agent count");
  gen->add_option("--p-edge", g_pe, "normal-normal edge probability");
  gen->add_option("--p-stubborn", g_ps, "stubborn tie probability");
  gen->add_option("--placement", g_placement, "er | regular");
  gen->add_option("--degree", g_degree, "stubborn ties per normal agent (regular placement)");
  gen->add_option("--seed", g_seed, "random seed");
  gen->add_option("--out-dir", g_out, "output directory")->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "run opinion dynamics and export data matrices");
  std::string s_system, s_graph, s_model = "static", s_out = "out";
  double s_gamma = 0.5, s_sigma = 0.0;
  long s_tobs = 10000, s_samples = 1, s_tmax = 0;
  int s_issues = 100, s_m = 1;
  std::uint64_t s_seed = 1;
  bool s_snap = false;
  sim->add_option("--system", s_system, "trust system file")->required();
  sim->add_option("--graph", s_graph, "graph file")->required();
  sim->add_option("--model", s_model, "static | gossip");
  sim->add_option("--gamma", s_gamma, "gossip mixing weight");
  sim->add_option("--sigma", s_sigma, "observation noise level");
  sim->add_option("--t-observe", s_tobs, "earliest sampling time");
  sim->add_option("--samples", s_samples, "samples per issue");
  sim->add_option("--t-max", s_tmax, "latest sampling time (default: t-observe)");
  sim->add_option("--issues", s_issues, "issue count");
  sim->add_option("--m", s_m, "belief dimension");
  sim->add_option("--seed", s_seed, "random seed");
  sim->add_option("--out-dir", s_out, "output directory")->required();
  sim->add_flag("--dump-snapshots", s_snap, "also write the last issue's snapshots");

  // identify
  auto* ident = app.add_subcommand("identify", "sparse identification from data matrices");
  std::string i_y, i_z, i_graph, i_out = "out";
  double i_eps = 1e-8;
  tn::SSISolverOptions i_opts;
  ident->add_option("--y", i_y, "normal-agent data CSV")->required();
  ident->add_option("--z", i_z, "stubborn-agent data CSV")->required();
  ident->add_option("--graph", i_graph, "graph file (stubborn support)")->required();
  ident->add_option("--epsilon", i_eps, "residual tolerance")->required();
  ident->add_option("--solver-tol", i_opts.tol, "relative objective-change tolerance");
  ident->add_option("--max-iterations", i_opts.max_iterations, "per-row iteration cap");
  ident->add_option("--bisection-max", i_opts.bisection_max, "penalty bisection cap");
  ident->add_option("--residual-bracket", i_opts.residual_bracket, "bisection residual bracket");
  ident->add_option("--out-dir", i_out, "output directory")->required();

  // experiment
  auto* exp = app.add_subcommand("experiment", "run a Monte-Carlo identification study");
  std::string e_preset, e_config, e_out = "out";
  std::optional<std::uint64_t> e_seed;
  std::optional<int> e_trials, e_threads, e_issues;
  std::optional<std::string> e_ns, e_placement;
  std::optional<double> e_epsilon, e_sigma;
  bool e_no_plotdata = false;
  exp->add_option("--preset", e_preset, "fig2-static | fig3-gossip");
  exp->add_option("--config", e_config, "key = value config file");
  exp->add_option("--seed", e_seed, "override master seed");
  exp->add_option("--trials", e_trials, "override trial count");
  exp->add_option("--threads", e_threads, "worker pool size");
  exp->add_option("--issues", e_issues, "override issue count");
  exp->add_option("--ns", e_ns, "override stubborn counts, comma separated");
  exp->add_option("--placement", e_placement, "er | regular | both");
  exp->add_option("--epsilon", e_epsilon, "override residual tolerance");
  exp->add_option("--sigma", e_sigma, "override noise level");
  exp->add_option("--out-dir", e_out, "output directory")->required();
  exp->add_flag("--no-plotdata", e_no_plotdata, "skip plot-ready aggregate files");

  // check-identifiability
  auto* chk = app.add_subcommand("check-identifiability", "evaluate placement recoverability conditions");
  tn::IdentifiabilityParams c_params;
  std::string c_out;
  chk->add_option("--n", c_params.n, "total agents")->required();
  chk->add_option("--n-stubborn", c_params.n_s, "stubborn agents")->required();
  chk->add_option("--degree", c_params.d, "stubborn ties per normal agent")->required();
  chk->add_option("--alpha", c_params.alpha, "sparsity parameter")->required();
  chk->add_option("--b-min", c_params.b_min, "smallest nonzero stubborn trust");
  chk->add_option("--b-max", c_params.b_max, "largest nonzero stubborn trust");
  chk->add_option("--out", c_out, "also write the report to this file");

  try {
    app.parse(argc, argv);

    if (gen->parsed())
      return run_generate(g_nn, g_ns, g_pe, g_ps, g_placement, g_degree, g_seed, g_out);

    if (sim->parsed())
      return run_simulate(s_system, s_graph, s_model, s_gamma, s_sigma, s_tobs, s_samples,
                          s_tmax > 0 ? s_tmax : s_tobs, s_issues, s_m, s_seed, s_out, s_snap);

    if (ident->parsed()) return run_identify(i_y, i_z, i_graph, i_eps, i_opts, i_out);

    if (exp->parsed()) {
      tn::ExperimentConfig cfg;
      if (!e_preset.empty() && !e_config.empty())
        throw std::runtime_error("--preset and --config are mutually exclusive");
      if (!e_preset.empty()) {
        if (e_preset == "fig2-static")
          cfg = tn::preset_fig2_static();
        else if (e_preset == "fig3-gossip")
          cfg = tn::preset_fig3_gossip();
        else
          throw std::runtime_error("unknown preset: " + e_preset);
      } else if (!e_config.empty()) {
        cfg = config_from_file(e_config, tn::ExperimentConfig{});
      } else {
        throw std::runtime_error("experiment needs --preset or --config");
      }
      if (e_seed) cfg.seed = *e_seed;
      if (e_trials) cfg.trials = *e_trials;
      if (e_threads) cfg.threads = *e_threads;
      if (e_issues) cfg.issues = *e_issues;
      if (e_ns) cfg.ns_values = parse_int_list(*e_ns);
      if (e_placement) cfg.placements = parse_placements(*e_placement);
      if (e_epsilon) cfg.epsilon = *e_epsilon;
      if (e_sigma) cfg.sigma = *e_sigma;
      const tn::ExperimentResult res = tn::run_experiment(cfg);
      tn::write_experiment_outputs(res, e_out);
      if (!e_no_plotdata) tn::emit_plotdata(res, e_out);
      std::cout << "wrote " << res.rows.size() << " result rows to " << e_out << "\n";
      return 0;
    }

    if (chk->parsed()) {
      const std::string report = tn::identifiability_report(c_params);
      if (!c_out.empty()) tn::write_text_file(c_out, report);
      std::cout << report;
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
