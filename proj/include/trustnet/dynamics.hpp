#ifndef TRUSTNET_DYNAMICS_HPP
#define TRUSTNET_DYNAMICS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "trustnet/graph.hpp"
#include "trustnet/random.hpp"

namespace trustnet {

/// Opinions are an n x m matrix: one row per agent, one column per issue
/// component. Valid states are entrywise in [0,1] with row sums <= 1.
inline void validate_opinions(const Eigen::MatrixXd& x, double tol = 1e-9) {
  if (x.size() == 0) return;
  if (x.minCoeff() < -tol || x.maxCoeff() > 1.0 + tol)
    throw std::invalid_argument("opinions must lie in [0,1]");
  if ((x.rowwise().sum().array() > 1.0 + tol).any())
    throw std::invalid_argument("opinion row sums must not exceed 1");
}

struct DynamicsModel {
  enum class Kind { mean_field, broadcast_gossip };
  Kind kind = Kind::mean_field;
  double gamma = 0.5;  // listener retention weight, gossip only
};

inline DynamicsModel static_model() { return {DynamicsModel::Kind::mean_field, 0.5}; }
inline DynamicsModel gossip_model(double gamma) {
  if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("gossip_model: gamma in [0,1) required");
  return {DynamicsModel::Kind::broadcast_gossip, gamma};
}

/// One synchronous update x(t+1) = W x(t): stubborn rows held, normal rows
/// replaced by B z + D x_normal.
inline Eigen::MatrixXd degroot_step(const TrustSystem& sys, const Eigen::MatrixXd& x) {
  const int ns = sys.n_stubborn;
  const int nr = sys.n_normal();
  if (x.rows() != sys.n) throw std::invalid_argument("degroot_step: state has wrong agent count");
  Eigen::MatrixXd out = x;
  if (nr > 0)
    out.bottomRows(nr) = sys.B * x.topRows(ns) + sys.D * x.bottomRows(nr);
  return out;
}

/// Per-agent lists of normal neighbors, the only rows a broadcast can move.
inline std::vector<std::vector<int>> normal_neighbor_lists(const SocialGraph& g) {
  std::vector<std::vector<int>> nbr(static_cast<std::size_t>(g.n));
  for (auto [a, b] : g.edges_normal) {
    nbr[static_cast<std::size_t>(a)].push_back(b);
    nbr[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto [i, s] : g.support_B) nbr[static_cast<std::size_t>(s)].push_back(i);
  return nbr;
}

/// One broadcast-gossip update in place: a uniformly chosen agent broadcasts
/// and each of its normal neighbors j mixes x_j <- gamma x_j + (1-gamma) x_b.
/// Returns the broadcaster id.
inline int broadcast_gossip_step(const std::vector<std::vector<int>>& normal_nbrs,
                                 Eigen::MatrixXd& x, double gamma, Rng& rng) {
  const int n = static_cast<int>(normal_nbrs.size());
  const int b = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
  for (int j : normal_nbrs[static_cast<std::size_t>(b)])
    x.row(j) = gamma * x.row(j) + (1.0 - gamma) * x.row(b);
  return b;
}

inline int broadcast_gossip_step(const SocialGraph& g, Eigen::MatrixXd& x, double gamma, Rng& rng) {
  const auto nbrs = normal_neighbor_lists(g);
  return broadcast_gossip_step(nbrs, x, gamma, rng);
}

/// Dense one-step update matrix for broadcaster b (for state-transition
/// products): identity except rows of b's normal neighbors.
inline Eigen::MatrixXd gossip_update_matrix(const SocialGraph& g, int broadcaster, double gamma) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Identity(g.n, g.n);
  const auto nbrs = normal_neighbor_lists(g);
  for (int j : nbrs[static_cast<std::size_t>(broadcaster)]) {
    w(j, j) = gamma;
    w(j, broadcaster) += 1.0 - gamma;
  }
  return w;
}

/// Product of update matrices over a time window, latest applied last:
/// given [W(s), W(s+1), ..., W(t)] returns W(t) * ... * W(s).
inline Eigen::MatrixXd phi_product(const std::vector<Eigen::MatrixXd>& updates, int n) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n, n);
  for (const auto& w : updates) p = w * p;
  return p;
}

/// Observation times: sorted distinct integers, none before the warm-up time.
struct SamplingSchedule {
  long t_warmup = 0;
  std::vector<long> times;

  long t_last() const { return times.empty() ? t_warmup : times.back(); }

  void validate() const {
    long prev = -1;
    for (long t : times) {
      if (t < t_warmup) throw std::invalid_argument("SamplingSchedule: sample before warm-up");
      if (t <= prev) throw std::invalid_argument("SamplingSchedule: times must be sorted and distinct");
      prev = t;
    }
  }
};

/// count distinct times drawn uniformly from {t_warmup+1, ..., t_max}.
/// A collapsed window (t_max == t_warmup) yields the single time t_warmup.
inline SamplingSchedule make_uniform_schedule(long t_warmup, long t_max, long count, Rng& rng) {
  if (t_max < t_warmup) throw std::invalid_argument("make_uniform_schedule: t_max < t_warmup");
  SamplingSchedule s;
  s.t_warmup = t_warmup;
  if (t_max == t_warmup) {
    if (count != 1) throw std::invalid_argument("make_uniform_schedule: collapsed window needs count == 1");
    s.times = {t_warmup};
    return s;
  }
  s.times = rng.sample_distinct(t_warmup + 1, t_max, count);
  return s;
}

/// Noisy observations y(t_i) = x(t_i) + noise recorded at schedule times.
struct SnapshotSet {
  std::vector<long> times;
  std::vector<Eigen::MatrixXd> y;  // one n x m matrix per time
  int n_stubborn = 0;
  double sigma = 0.0;
};

/// Exact affine jumps for the mean-field recursion x <- D x + c: maintains
/// the ladder A_k = D^(2^k), S_k = I + D + ... + D^(2^k - 1), so that
/// advancing by any delta costs O(log delta) small matrix products. Built
/// once per system and shared across issues.
class AffineDoubling {
public:
  explicit AffineDoubling(const Eigen::MatrixXd& d) {
    a_.push_back(d);
    s_.push_back(Eigen::MatrixXd::Identity(d.rows(), d.cols()));
  }

  /// x <- D^delta x + S_delta c
  void jump(Eigen::MatrixXd& x, const Eigen::MatrixXd& c, long delta) {
    int bit = 0;
    while (delta > 0) {
      if (delta & 1) {
        ensure(bit);
        x = a_[static_cast<std::size_t>(bit)] * x + s_[static_cast<std::size_t>(bit)] * c;
      }
      delta >>= 1;
      ++bit;
    }
  }

private:
  void ensure(int bit) {
    while (static_cast<int>(a_.size()) <= bit) {
      const auto& a = a_.back();
      const auto& s = s_.back();
      s_.push_back(s + a * s);
      a_.push_back(a * a);
    }
  }

  std::vector<Eigen::MatrixXd> a_, s_;
};

/// Runs the dynamics from t = 0 and records y(t_i) = x(t_i) + sigma * N(0,1)
/// at each scheduled time. The mean-field model advances by exact affine
/// jumps between sample times (identical to step-by-step application up to
/// float roundoff); the gossip model steps through every broadcast. A
/// prebuilt ladder for the system's D block may be shared across calls.
inline SnapshotSet simulate_and_sample(const TrustSystem& sys, const SocialGraph& g,
                                       const DynamicsModel& model, const Eigen::MatrixXd& x0,
                                       const SamplingSchedule& sched, double sigma,
                                       std::uint64_t seed, AffineDoubling* ladder = nullptr) {
  sched.validate();
  if (sigma < 0.0) throw std::invalid_argument("simulate_and_sample: negative noise level");
  SnapshotSet out;
  out.times = sched.times;
  out.sigma = sigma;
  Rng rng_noise(derive_seed(seed, 1));
  Rng rng_dyn(derive_seed(seed, 2));

  const auto record = [&](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd y = x;
    if (sigma > 0.0)
      for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (Eigen::Index j = 0; j < y.cols(); ++j) y(i, j) += sigma * rng_noise.gaussian();
    out.y.push_back(std::move(y));
  };

  if (model.kind == DynamicsModel::Kind::mean_field) {
    out.n_stubborn = sys.n_stubborn;
    if (x0.rows() != sys.n) throw std::invalid_argument("simulate_and_sample: state has wrong agent count");
    const int ns = sys.n_stubborn, nr = sys.n_normal();
    const Eigen::MatrixXd z = x0.topRows(ns);
    const Eigen::MatrixXd c = sys.B * z;
    Eigen::MatrixXd xn = x0.bottomRows(nr);
    std::optional<AffineDoubling> local;
    if (!ladder) local.emplace(sys.D);
    AffineDoubling& lad = ladder ? *ladder : *local;
    long t = 0;
    Eigen::MatrixXd full(sys.n, x0.cols());
    full.topRows(ns) = z;
    for (long ti : sched.times) {
      lad.jump(xn, c, ti - t);
      t = ti;
      full.bottomRows(nr) = xn;
      record(full);
    }
  } else {
    out.n_stubborn = g.n_stubborn;
    if (x0.rows() != g.n) throw std::invalid_argument("simulate_and_sample: state has wrong agent count");
    const auto nbrs = normal_neighbor_lists(g);
    Eigen::MatrixXd x = x0;
    long t = 0;
    for (long ti : sched.times) {
      for (; t < ti; ++t) broadcast_gossip_step(nbrs, x, model.gamma, rng_dyn);
      record(x);
    }
  }
  return out;
}

/// Time-average estimator of the terminal ensemble mean: the plain mean of
/// the recorded snapshots, no time weighting.
inline Eigen::MatrixXd estimate_terminal(const SnapshotSet& snaps) {
  if (snaps.y.empty()) throw std::invalid_argument("estimate_terminal: empty snapshot set");
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(snaps.y.front().rows(), snaps.y.front().cols());
  for (const auto& y : snaps.y) acc += y;
  return acc / static_cast<double>(snaps.y.size());
}

/// Terminal opinion limit: stubborn rows hold their initial opinions z and
/// normal rows converge to (I - D)^{-1} B z, computed by linear solve.
inline Eigen::MatrixXd exact_terminal(const TrustSystem& sys, const Eigen::MatrixXd& x0) {
  if (x0.rows() != sys.n) throw std::invalid_argument("exact_terminal: state has wrong agent count");
  const int ns = sys.n_stubborn, nr = sys.n_normal();
  Eigen::MatrixXd out(sys.n, x0.cols());
  out.topRows(ns) = x0.topRows(ns);
  if (nr > 0) {
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(nr, nr) - sys.D;
    const Eigen::MatrixXd rhs = sys.B * x0.topRows(ns);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    const Eigen::MatrixXd sol = lu.solve(rhs);
    const double scale = std::max(1.0, rhs.norm());
    if (!sol.allFinite() || (a * sol - rhs).norm() > 1e-8 * scale)
      throw std::runtime_error("exact_terminal: I - D is numerically singular (spectral radius >= 1?)");
    out.bottomRows(nr) = sol;
  }
  return out;
}

/// Data matrices for the identification stage: Y stacks the normal-agent
/// terminal estimates and Z the stubborn opinions, one m-column block per
/// issue (issue-major, component-minor).
struct DataMatrices {
  Eigen::MatrixXd Y;  // n_normal x (issues * m)
  Eigen::MatrixXd Z;  // n_stubborn x (issues * m)
  int issues = 0;
  int m = 0;
};

inline DataMatrices assemble_data_matrices(const std::vector<Eigen::MatrixXd>& terminals,
                                           int n_stubborn) {
  if (terminals.empty()) throw std::invalid_argument("assemble_data_matrices: no issues");
  const int n = static_cast<int>(terminals.front().rows());
  const int m = static_cast<int>(terminals.front().cols());
  const int nr = n - n_stubborn;
  const int k = static_cast<int>(terminals.size());
  DataMatrices d;
  d.issues = k;
  d.m = m;
  d.Y.resize(nr, static_cast<Eigen::Index>(k) * m);
  d.Z.resize(n_stubborn, static_cast<Eigen::Index>(k) * m);
  for (int s = 0; s < k; ++s) {
    if (terminals[static_cast<std::size_t>(s)].rows() != n || terminals[static_cast<std::size_t>(s)].cols() != m)
      throw std::invalid_argument("assemble_data_matrices: inconsistent issue shapes");
    d.Y.middleCols(static_cast<Eigen::Index>(s) * m, m) = terminals[static_cast<std::size_t>(s)].bottomRows(nr);
    d.Z.middleCols(static_cast<Eigen::Index>(s) * m, m) = terminals[static_cast<std::size_t>(s)].topRows(n_stubborn);
  }
  return d;
}

/// Random initial opinions: stubborn rows i.i.d. uniform on [0,1]^m scaled
/// back to the simplex when the row sum exceeds one; normal rows uniform on
/// {x >= 0, sum(x) <= 1}.
inline Eigen::MatrixXd random_initial_opinions(int n, int n_stubborn, int m, Rng& rng) {
  Eigen::MatrixXd x(n, m);
  for (int i = 0; i < n_stubborn; ++i) {
    double sum = 0.0;
    for (int j = 0; j < m; ++j) {
      x(i, j) = rng.uniform();
      sum += x(i, j);
    }
    if (sum > 1.0) x.row(i) /= sum;
  }
  for (int i = n_stubborn; i < n; ++i) {
    // uniform on the simplex prefix: flat Dirichlet over m+1 parts, drop one
    double total = 0.0;
    std::vector<double> e(static_cast<std::size_t>(m) + 1);
    for (auto& v : e) {
      double u;
      do { u = rng.uniform(); } while (u == 0.0);
      v = -std::log(u);
      total += v;
    }
    for (int j = 0; j < m; ++j) x(i, j) = e[static_cast<std::size_t>(j)] / total;
  }
  return x;
}

} // namespace trustnet

#endif
