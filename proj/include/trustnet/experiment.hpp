#ifndef TRUSTNET_EXPERIMENT_HPP
#define TRUSTNET_EXPERIMENT_HPP

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "trustnet/dynamics.hpp"
#include "trustnet/graph.hpp"
#include "trustnet/identify.hpp"
#include "trustnet/io.hpp"
#include "trustnet/metrics.hpp"
#include "trustnet/random.hpp"

namespace trustnet {

enum class Placement { er, regular };

inline std::string placement_name(Placement p) { return p == Placement::er ? "er" : "regular"; }

/// Full description of a Monte-Carlo identification study. Every random
/// draw descends from `seed`, and within a trial the same streams feed both
/// placements of a cell, so placement comparisons are paired.
struct ExperimentConfig {
  std::string scenario = "custom";  // static-sweep | gossip-single | custom
  int n_normal = 50;
  std::vector<int> ns_values;
  double p_e = 0.15;
  double p_s = 0.15;
  std::vector<Placement> placements{Placement::er};
  int degree_override = 0;  // 0: per-cell degree matches the expected ER stubborn degree
  DynamicsModel model = static_model();
  double sigma = 0.0;
  long t_observe = 10000;  // earliest admissible sampling time
  long samples = 1;
  long t_max = 10000;
  int m = 1;        // belief dimension
  int issues = 100;
  double epsilon = 1e-8;
  double support_threshold = 1e-6;
  SSISolverOptions solver{};
  int trials = 1;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency

  void validate() const {
    if (n_normal <= 0) throw std::invalid_argument("config: n_normal must be positive");
    if (ns_values.empty()) throw std::invalid_argument("config: no stubborn counts given");
    for (std::size_t i = 0; i < ns_values.size(); ++i) {
      if (ns_values[i] <= 0) throw std::invalid_argument("config: stubborn counts must be positive");
      if (i && ns_values[i] <= ns_values[i - 1])
        throw std::invalid_argument("config: stubborn counts must be strictly increasing");
    }
    if (p_e < 0.0 || p_e > 1.0 || p_s <= 0.0 || p_s > 1.0)
      throw std::invalid_argument("config: edge probabilities out of range");
    if (placements.empty()) throw std::invalid_argument("config: no placements given");
    if (sigma < 0.0) throw std::invalid_argument("config: negative noise level");
    if (t_observe <= 0 || t_max < t_observe) throw std::invalid_argument("config: bad sampling window");
    if (samples < 1 || m < 1 || issues < 1 || trials < 1)
      throw std::invalid_argument("config: counts must be positive");
    if (epsilon < 0.0) throw std::invalid_argument("config: negative epsilon");
  }
};

/// Per-cell regular placement degree: the nearest integer to the expected
/// number of stubborn ties under the ER placement with the same p_s.
inline int matched_degree(const ExperimentConfig& cfg, int n_s) {
  if (cfg.degree_override > 0) return cfg.degree_override;
  const int d = static_cast<int>(std::floor(cfg.p_s * n_s + 0.5));
  return std::max(1, std::min(d, n_s));
}

inline ExperimentConfig preset_fig2_static() {
  ExperimentConfig c;
  c.scenario = "static-sweep";
  c.n_normal = 50;
  c.ns_values = {10, 20, 30, 40, 50};
  c.p_e = 0.15;
  c.p_s = 0.15;
  c.placements = {Placement::er, Placement::regular};
  c.model = static_model();
  c.sigma = 0.0;
  c.t_observe = 10000;
  c.samples = 1;
  c.t_max = 10000;
  c.m = 1;
  c.issues = 100;
  c.epsilon = 1e-8;
  c.trials = 100;
  c.seed = 9001;
  return c;
}

inline ExperimentConfig preset_fig3_gossip() {
  ExperimentConfig c;
  c.scenario = "gossip-single";
  c.n_normal = 50;
  c.ns_values = {30};
  c.p_e = 0.15;
  c.p_s = 0.15;
  c.placements = {Placement::er};
  c.model = gossip_model(0.5);
  c.sigma = 0.01;
  c.t_observe = 1000;
  c.samples = 3000;
  c.t_max = 100000;
  c.m = 1;
  c.issues = 100;
  c.epsilon = 0.165;
  c.trials = 1;
  c.seed = 9002;
  return c;
}

struct CellResult {
  int trial = 0;
  int n_s = 0;
  Placement placement = Placement::er;
  EvalReport eval{};
  double residual = 0.0;
  double penalty = 0.0;
  SolveStatus status = SolveStatus::ok;
  double wall_ms = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<CellResult> rows;
  // last processed cell, for reproducibility dumps and heatmaps
  std::string truth_dump, estimate_dump, estimate_diag;
  Eigen::MatrixXd truth_D_rel, estimate_D;
};

namespace detail {

struct CellOutput {
  CellResult row;
  bool has_dump = false;
  std::string truth_dump, estimate_dump, estimate_diag;
  Eigen::MatrixXd truth_D_rel, estimate_D;
};

inline CellOutput run_cell(const ExperimentConfig& cfg, int trial, int n_s, Placement placement,
                           bool want_dump) {
  const auto started = std::chrono::steady_clock::now();
  const std::uint64_t trial_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(trial));
  const std::uint64_t cell_seed = derive_seed(trial_seed, static_cast<std::uint64_t>(n_s));

  SocialGraph graph = placement == Placement::er
                          ? generate_er_graph(cfg.n_normal, n_s, cfg.p_e, cfg.p_s,
                                              derive_seed(cell_seed, 1))
                          : generate_regular_placement_graph(cfg.n_normal, n_s, cfg.p_e,
                                                             matched_degree(cfg, n_s),
                                                             derive_seed(cell_seed, 1));
  TrustSystem truth = generate_trust_matrix(graph, derive_seed(cell_seed, 2));

  // ground truth in the normalization the data determines
  const TrustSystem& compared = truth;
  Eigen::MatrixXd Br, Dr;
  if (cfg.model.kind == DynamicsModel::Kind::mean_field) {
    std::tie(Br, Dr) = relative_trust(compared.B, compared.D);
  } else {
    const TrustSystem mean = expected_gossip_matrix(graph, cfg.model.gamma);
    std::tie(Br, Dr) = relative_trust(mean.B, mean.D);
  }

  std::optional<AffineDoubling> ladder;
  if (cfg.model.kind == DynamicsModel::Kind::mean_field) ladder.emplace(truth.D);

  std::vector<Eigen::MatrixXd> terminals;
  terminals.reserve(static_cast<std::size_t>(cfg.issues));
  for (int k = 0; k < cfg.issues; ++k) {
    const std::uint64_t issue_seed = derive_seed(cell_seed, 10 + static_cast<std::uint64_t>(k));
    Rng init_rng(derive_seed(issue_seed, 1));
    Rng sched_rng(derive_seed(issue_seed, 2));
    const Eigen::MatrixXd x0 = random_initial_opinions(graph.n, graph.n_stubborn, cfg.m, init_rng);
    const SamplingSchedule sched =
        make_uniform_schedule(cfg.t_observe, cfg.t_max, cfg.samples, sched_rng);
    const SnapshotSet snaps = simulate_and_sample(truth, graph, cfg.model, x0, sched, cfg.sigma,
                                                  derive_seed(issue_seed, 3),
                                                  ladder ? &*ladder : nullptr);
    terminals.push_back(estimate_terminal(snaps));
  }

  SSIProblem prob;
  prob.data = assemble_data_matrices(terminals, graph.n_stubborn);
  prob.support_B = support_rows(graph);
  prob.epsilon = cfg.epsilon;
  prob.options = cfg.solver;
  const SSIEstimate est = solve_ssi(prob);

  CellOutput out;
  out.row.trial = trial;
  out.row.n_s = n_s;
  out.row.placement = placement;
  out.row.eval = evaluate(est.B, est.D, Br, Dr, cfg.support_threshold);
  out.row.residual = est.residual;
  out.row.penalty = est.penalty;
  out.row.status = est.status;
  out.row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              started)
                        .count();
  if (want_dump) {
    TrustSystem truth_rel;
    truth_rel.n = graph.n;
    truth_rel.n_stubborn = graph.n_stubborn;
    truth_rel.B = Br;
    truth_rel.D = Dr;
    TrustSystem est_sys;
    est_sys.n = graph.n;
    est_sys.n_stubborn = graph.n_stubborn;
    est_sys.B = est.B;
    est_sys.D = est.D;
    out.has_dump = true;
    out.truth_dump = serialize_trust_system(truth_rel);
    out.estimate_dump = serialize_trust_system(est_sys);
    out.estimate_diag = estimate_diagnostics(est);
    out.truth_D_rel = Dr;
    out.estimate_D = est.D;
  }
  return out;
}

inline std::vector<CellOutput> run_trial(const ExperimentConfig& cfg, int trial) {
  std::vector<CellOutput> outs;
  const bool last_trial = trial == cfg.trials - 1;
  for (std::size_t a = 0; a < cfg.ns_values.size(); ++a)
    for (std::size_t b = 0; b < cfg.placements.size(); ++b) {
      const bool last_cell =
          last_trial && a + 1 == cfg.ns_values.size() && b + 1 == cfg.placements.size();
      const int n_s = cfg.ns_values[a];
      const Placement pl = cfg.placements[b];
      try {
        outs.push_back(run_cell(cfg, trial, n_s, pl, last_cell));
      } catch (const std::exception& e) {
        throw std::runtime_error("trial " + format_long(trial) + " n_s " + format_long(n_s) + " " +
                                 placement_name(pl) + ": " + e.what());
      }
    }
  return outs;
}

} // namespace detail

/// Runs the full study. Trials execute on a worker pool; results are
/// gathered into trial-index order, so the output is independent of
/// scheduling. Wall-times are the one nondeterministic field and are kept
/// out of the deterministic outputs by the writers below.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const int trials = cfg.trials;
  std::vector<std::vector<detail::CellOutput>> slots(static_cast<std::size_t>(trials));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(trials));

  unsigned pool = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                  : std::max(1u, std::thread::hardware_concurrency());
  pool = std::min<unsigned>(pool, static_cast<unsigned>(trials));
  std::atomic<int> next{0};
  const auto worker = [&]() {
    for (;;) {
      const int t = next.fetch_add(1);
      if (t >= trials) return;
      try {
        slots[static_cast<std::size_t>(t)] = detail::run_trial(cfg, t);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    }
  };
  if (pool <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < pool; ++w) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
  }
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);

  ExperimentResult result;
  result.config = cfg;
  for (auto& trial_outs : slots)
    for (auto& out : trial_outs) {
      result.rows.push_back(out.row);
      if (out.has_dump) {
        result.truth_dump = std::move(out.truth_dump);
        result.estimate_dump = std::move(out.estimate_dump);
        result.estimate_diag = std::move(out.estimate_diag);
        result.truth_D_rel = std::move(out.truth_D_rel);
        result.estimate_D = std::move(out.estimate_D);
      }
    }
  return result;
}

/// Deterministic per-cell table; byte-identical across reruns of one config.
inline std::string results_csv(const ExperimentResult& res) {
  std::string out = "trial,n_s,placement,nmse_D,nmse_B,support_error,residual,penalty,status\n";
  for (const auto& r : res.rows) {
    out += format_long(r.trial) + "," + format_long(r.n_s) + "," + placement_name(r.placement) +
           "," + format_double(r.eval.nmse_D) + "," + format_double(r.eval.nmse_B) + "," +
           format_long(r.eval.support_errors) + "," + format_double(r.residual) + "," +
           format_double(r.penalty) + "," +
           (r.status == SolveStatus::ok ? "ok" : "infeasible_epsilon") + "\n";
  }
  return out;
}

/// Wall-clock sidecar; the one output that varies run to run.
inline std::string timings_csv(const ExperimentResult& res) {
  std::string out = "trial,n_s,placement,wall_ms\n";
  for (const auto& r : res.rows)
    out += format_long(r.trial) + "," + format_long(r.n_s) + "," + placement_name(r.placement) +
           "," + format_double(r.wall_ms) + "\n";
  return out;
}

inline void write_experiment_outputs(const ExperimentResult& res, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir + "/results.csv", results_csv(res));
  write_text_file(out_dir + "/timings.csv", timings_csv(res));
  write_text_file(out_dir + "/truth_last.txt", res.truth_dump);
  write_text_file(out_dir + "/estimate_last.txt", res.estimate_dump);
  write_text_file(out_dir + "/estimate_last_diagnostics.txt", res.estimate_diag);
}

/// Dense matrix dump for heatmap plotting.
inline std::string dense_csv(const Eigen::MatrixXd& M) {
  std::string out = "row";
  for (Eigen::Index j = 0; j < M.cols(); ++j) out += ",c" + format_long(j);
  out += "\n";
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    out += format_long(i);
    for (Eigen::Index j = 0; j < M.cols(); ++j) out += "," + format_double(M(i, j));
    out += "\n";
  }
  return out;
}

/// Plot-ready aggregates: per (n_s, placement) mean and sample deviation of
/// the error metrics, plus dense dumps of the last cell's true and
/// estimated normal-block trusts.
inline void emit_plotdata(const ExperimentResult& res, const std::string& out_dir) {
  if (res.rows.empty()) throw std::invalid_argument("emit_plotdata: empty result table");
  std::filesystem::create_directories(out_dir);

  std::string out = "n_s,placement,trials,nmse_D_mean,nmse_D_std,nmse_B_mean,nmse_B_std,"
                    "support_mean,support_std\n";
  for (int n_s : res.config.ns_values)
    for (Placement pl : res.config.placements) {
      std::vector<const CellResult*> cells;
      for (const auto& r : res.rows)
        if (r.n_s == n_s && r.placement == pl) cells.push_back(&r);
      if (cells.empty()) continue;
      const double cnt = static_cast<double>(cells.size());
      const auto mean_std = [&](auto&& get) {
        double mean = 0.0;
        for (const auto* c : cells) mean += get(*c);
        mean /= cnt;
        double var = 0.0;
        for (const auto* c : cells) var += (get(*c) - mean) * (get(*c) - mean);
        var = cells.size() > 1 ? var / (cnt - 1.0) : 0.0;
        return std::pair<double, double>(mean, std::sqrt(var));
      };
      const auto [md, sd] = mean_std([](const CellResult& c) { return c.eval.nmse_D; });
      const auto [mb, sb] = mean_std([](const CellResult& c) { return c.eval.nmse_B; });
      const auto [ms, ss] =
          mean_std([](const CellResult& c) { return static_cast<double>(c.eval.support_errors); });
      out += format_long(n_s) + "," + placement_name(pl) + "," +
             format_long(static_cast<long>(cells.size())) + "," + format_double(md) + "," +
             format_double(sd) + "," + format_double(mb) + "," + format_double(sb) + "," +
             format_double(ms) + "," + format_double(ss) + "\n";
    }
  write_text_file(out_dir + "/sweep_summary.csv", out);

  if (res.truth_D_rel.size() > 0) {
    write_text_file(out_dir + "/truth_heatmap.csv", dense_csv(res.truth_D_rel));
    write_text_file(out_dir + "/estimate_heatmap.csv", dense_csv(res.estimate_D));
  }
}

} // namespace trustnet

#endif
