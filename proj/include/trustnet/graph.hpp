#ifndef TRUSTNET_GRAPH_HPP
#define TRUSTNET_GRAPH_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <queue>
#include <stdexcept>
#include <utility>
#include <vector>

#include "trustnet/random.hpp"

namespace trustnet {

/// Undirected social graph over n agents. Agents 0..n_stubborn-1 are the
/// stubborn (never-updating) block; the rest are normal agents. Edges among
/// normal agents and (normal, stubborn) attachments are kept separately
/// because only the latter carry the known influence support used by the
/// identification stage.
struct SocialGraph {
  int n = 0;
  int n_stubborn = 0;
  /// Ties between normal agents, global ids, first < second.
  std::vector<std::pair<int, int>> edges_normal;
  /// Admissible (normal, stubborn) influence pairs, global ids.
  std::vector<std::pair<int, int>> support_B;

  int n_normal() const { return n - n_stubborn; }

  /// True when every normal agent has at least one stubborn attachment.
  bool covered_by_stubborn() const {
    std::vector<char> has(static_cast<std::size_t>(n_normal()), 0);
    for (auto [i, s] : support_B) has[static_cast<std::size_t>(i - n_stubborn)] = 1;
    return std::all_of(has.begin(), has.end(), [](char c) { return c != 0; });
  }

  /// Adjacency lists over all agents (normal ties + stubborn attachments).
  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (auto [a, b] : edges_normal) {
      adj[static_cast<std::size_t>(a)].push_back(b);
      adj[static_cast<std::size_t>(b)].push_back(a);
    }
    for (auto [i, s] : support_B) {
      adj[static_cast<std::size_t>(i)].push_back(s);
      adj[static_cast<std::size_t>(s)].push_back(i);
    }
    for (auto& v : adj) std::sort(v.begin(), v.end());
    return adj;
  }

  bool connected() const {
    if (n == 0) return true;
    const auto adj = adjacency();
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int reached = 1;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj[static_cast<std::size_t>(u)])
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          ++reached;
          q.push(v);
        }
    }
    return reached == n;
  }

  void validate() const {
    if (n < 0 || n_stubborn < 0 || n_stubborn > n)
      throw std::invalid_argument("SocialGraph: invalid agent counts");
    for (auto [a, b] : edges_normal)
      if (a < n_stubborn || b < n_stubborn || a >= n || b >= n || a == b)
        throw std::invalid_argument("SocialGraph: normal edge endpoints out of range");
    for (auto [i, s] : support_B)
      if (i < n_stubborn || i >= n || s < 0 || s >= n_stubborn)
        throw std::invalid_argument("SocialGraph: stubborn attachment out of range");
  }
};

/// Ground-truth influence system in block form: B (normal x stubborn) and
/// D (normal x normal), rows of [B D] are nonnegative and sum to one.
/// Stubborn rows are implicit identity rows.
struct TrustSystem {
  int n = 0;
  int n_stubborn = 0;
  Eigen::MatrixXd B;  // n_normal x n_stubborn
  Eigen::MatrixXd D;  // n_normal x n_normal

  int n_normal() const { return n - n_stubborn; }

  void validate(double tol = 1e-9) const {
    const int nr = n_normal();
    if (B.rows() != nr || B.cols() != n_stubborn || D.rows() != nr || D.cols() != nr)
      throw std::invalid_argument("TrustSystem: block shapes inconsistent with agent counts");
    if (nr > 0) {
      if (B.size() > 0 && B.minCoeff() < 0.0) throw std::invalid_argument("TrustSystem: negative B entry");
      if (D.minCoeff() < 0.0) throw std::invalid_argument("TrustSystem: negative D entry");
      const Eigen::VectorXd rows = B.rowwise().sum() + D.rowwise().sum();
      if (((rows.array() - 1.0).abs() > tol).any())
        throw std::invalid_argument("TrustSystem: rows of [B D] must sum to one");
    }
  }
};

/// Spectral radius of the normal-to-normal block via power iteration on the
/// nonnegative matrix D (its Perron value). Returns 0 for an empty block.
inline double spectral_radius_D(const Eigen::MatrixXd& D, int iters = 200) {
  const auto nlen = D.rows();
  if (nlen == 0) return 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(nlen) / std::sqrt(static_cast<double>(nlen));
  double lambda = 0.0;
  for (int k = 0; k < iters; ++k) {
    Eigen::VectorXd w = D * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    lambda = norm;
  }
  return lambda;
}

/// Assigns each normal agent exactly d distinct stubborn neighbors, drawn
/// uniformly without replacement, independently across normal agents.
inline std::vector<std::pair<int, int>> place_stubborn_regular(int n_normal, int n_stubborn,
                                                               int d, std::uint64_t seed) {
  if (d < 1 || d > n_stubborn)
    throw std::invalid_argument("place_stubborn_regular: need 1 <= d <= n_stubborn");
  if (n_normal < 0) throw std::invalid_argument("place_stubborn_regular: negative agent count");
  Rng rng(seed);
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<std::size_t>(n_normal) * static_cast<std::size_t>(d));
  for (int i = 0; i < n_normal; ++i) {
    auto cols = rng.sample_distinct(0, n_stubborn - 1, d);
    for (long c : cols) out.emplace_back(n_stubborn + i, static_cast<int>(c));
  }
  return out;
}

/// Erdos-Renyi social graph: normal-normal ties included i.i.d. with
/// probability p_e; (normal, stubborn) attachments i.i.d. with probability
/// p_s conditioned on every normal agent keeping at least one attachment
/// (rows are independent, so per-row redraws realize exactly the conditioned
/// law). The whole graph is redrawn, up to max_retries times, until it is
/// connected.
inline SocialGraph generate_er_graph(int n_normal, int n_stubborn, double p_e, double p_s,
                                     std::uint64_t seed, int max_retries = 100) {
  if (n_normal < 1 || n_stubborn < 1)
    throw std::invalid_argument("generate_er_graph: need at least one normal and one stubborn agent");
  if (p_e < 0 || p_e > 1 || p_s <= 0 || p_s > 1)
    throw std::invalid_argument("generate_er_graph: probabilities out of range (p_s must be positive)");
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    SocialGraph g;
    g.n = n_normal + n_stubborn;
    g.n_stubborn = n_stubborn;
    for (int i = 0; i < n_normal; ++i)
      for (int j = i + 1; j < n_normal; ++j)
        if (rng.uniform() < p_e) g.edges_normal.emplace_back(n_stubborn + i, n_stubborn + j);
    for (int i = 0; i < n_normal; ++i) {
      std::vector<int> row;
      do {
        row.clear();
        for (int s = 0; s < n_stubborn; ++s)
          if (rng.uniform() < p_s) row.push_back(s);
      } while (row.empty());
      for (int s : row) g.support_B.emplace_back(n_stubborn + i, s);
    }
    if (g.connected()) return g;
  }
  throw std::runtime_error("generate_er_graph: no connected draw within retry budget");
}

/// Builds a graph from a regular stubborn placement plus ER normal ties.
inline SocialGraph generate_regular_placement_graph(int n_normal, int n_stubborn, double p_e,
                                                    int d, std::uint64_t seed,
                                                    int max_retries = 100) {
  if (n_normal < 1 || n_stubborn < 1)
    throw std::invalid_argument("generate_regular_placement_graph: need agents on both sides");
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(attempt));
    Rng rng(derive_seed(s, 1));
    SocialGraph g;
    g.n = n_normal + n_stubborn;
    g.n_stubborn = n_stubborn;
    for (int i = 0; i < n_normal; ++i)
      for (int j = i + 1; j < n_normal; ++j)
        if (rng.uniform() < p_e) g.edges_normal.emplace_back(n_stubborn + i, n_stubborn + j);
    g.support_B = place_stubborn_regular(n_normal, n_stubborn, d, derive_seed(s, 2));
    if (g.connected()) return g;
  }
  throw std::runtime_error("generate_regular_placement_graph: no connected draw within retry budget");
}

/// Ground-truth trust weights: i.i.d. uniform(0,1) on every admissible
/// position (stubborn attachments, normal ties in both directions, and the
/// self-trust diagonal), then each row of [B D] is normalized to sum one.
/// Weight fields are drawn for all positions in a fixed order and then
/// masked, so the draw consumed at a position does not depend on the support
/// pattern (keeps paired placement comparisons on common random numbers).
inline TrustSystem generate_trust_matrix(const SocialGraph& g, std::uint64_t seed) {
  const int nr = g.n_normal();
  const int ns = g.n_stubborn;
  Rng rng_d(derive_seed(seed, 11));
  Rng rng_b(derive_seed(seed, 12));
  Eigen::MatrixXd WD(nr, nr), WB(nr, ns);
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nr; ++j) WD(i, j) = rng_d.uniform();
  for (int i = 0; i < nr; ++i)
    for (int s = 0; s < ns; ++s) WB(i, s) = rng_b.uniform();

  TrustSystem t;
  t.n = g.n;
  t.n_stubborn = ns;
  t.B = Eigen::MatrixXd::Zero(nr, ns);
  t.D = Eigen::MatrixXd::Zero(nr, nr);
  for (auto [gi, s] : g.support_B) t.B(gi - ns, s) = WB(gi - ns, s);
  for (auto [ga, gb] : g.edges_normal) {
    const int a = ga - ns, b = gb - ns;
    t.D(a, b) = WD(a, b);
    t.D(b, a) = WD(b, a);
  }
  for (int i = 0; i < nr; ++i) t.D(i, i) = WD(i, i);
  for (int i = 0; i < nr; ++i) {
    const double s = t.B.row(i).sum() + t.D.row(i).sum();
    if (s <= 0.0) throw std::runtime_error("generate_trust_matrix: isolated normal agent row");
    t.B.row(i) /= s;
    t.D.row(i) /= s;
  }
  return t;
}

/// Mean influence matrix of the broadcast gossip protocol: one agent,
/// uniform over all n, broadcasts; each normal neighbor j of the broadcaster
/// moves to gamma*x_j + (1-gamma)*x_broadcaster; everyone else holds.
/// Averaging the n one-step update matrices gives, for normal row j:
///   diagonal 1 - (1-gamma)*deg(j)/n, and (1-gamma)/n on each neighbor.
inline TrustSystem expected_gossip_matrix(const SocialGraph& g, double gamma) {
  if (gamma < 0.0 || gamma >= 1.0)
    throw std::invalid_argument("expected_gossip_matrix: gamma must be in [0,1)");
  const int nr = g.n_normal();
  const int ns = g.n_stubborn;
  TrustSystem t;
  t.n = g.n;
  t.n_stubborn = ns;
  t.B = Eigen::MatrixXd::Zero(nr, ns);
  t.D = Eigen::MatrixXd::Zero(nr, nr);
  const double w = (1.0 - gamma) / static_cast<double>(g.n);
  std::vector<int> deg(static_cast<std::size_t>(nr), 0);
  for (auto [ga, gb] : g.edges_normal) {
    const int a = ga - ns, b = gb - ns;
    t.D(a, b) += w;
    t.D(b, a) += w;
    ++deg[static_cast<std::size_t>(a)];
    ++deg[static_cast<std::size_t>(b)];
  }
  for (auto [gi, s] : g.support_B) {
    t.B(gi - ns, s) += w;
    ++deg[static_cast<std::size_t>(gi - ns)];
  }
  for (int i = 0; i < nr; ++i)
    t.D(i, i) = 1.0 - (1.0 - gamma) * static_cast<double>(deg[static_cast<std::size_t>(i)]) / static_cast<double>(g.n);
  return t;
}

} // namespace trustnet

#endif
