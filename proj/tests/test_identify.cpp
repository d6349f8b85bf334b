#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "trustnet/dynamics.hpp"
#include "trustnet/graph.hpp"
#include "trustnet/identify.hpp"
#include "trustnet/random.hpp"

using namespace trustnet;

namespace {

// brute-force simplex projection: enumerate active sets, keep the closest
// feasible stationary candidate
Eigen::VectorXd project_simplex_oracle(const Eigen::VectorXd& v) {
  const int p = static_cast<int>(v.size());
  Eigen::VectorXd best;
  double best_d = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << p); ++mask) {
    double sum = 0.0;
    int cnt = 0;
    for (int j = 0; j < p; ++j)
      if (mask & (1u << j)) {
        sum += v(j);
        ++cnt;
      }
    const double tau = (sum - 1.0) / cnt;
    Eigen::VectorXd cand = Eigen::VectorXd::Zero(p);
    bool ok = true;
    for (int j = 0; j < p; ++j)
      if (mask & (1u << j)) {
        cand(j) = v(j) - tau;
        if (cand(j) < -1e-12) ok = false;
      }
    if (!ok) continue;
    const double d = (cand - v).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = cand;
    }
  }
  return best;
}

// the per-row quadratic the solver works with, rebuilt from the documented
// variable layout: admissible stubborn columns (sorted) first, then the
// other normal rows in index order
struct RowModel {
  Eigen::MatrixXd G;
  Eigen::VectorXd c;
  double y2 = 0.0;
  int n_b = 0;
  std::vector<int> b_cols, d_cols;
};

RowModel row_model(const DataMatrices& data, const std::vector<std::vector<int>>& support,
                   int row) {
  RowModel rm;
  rm.b_cols = support[static_cast<std::size_t>(row)];
  std::sort(rm.b_cols.begin(), rm.b_cols.end());
  for (int j = 0; j < data.Y.rows(); ++j)
    if (j != row) rm.d_cols.push_back(j);
  rm.n_b = static_cast<int>(rm.b_cols.size());
  const int p = rm.n_b + static_cast<int>(rm.d_cols.size());
  Eigen::MatrixXd M(p, data.Y.cols());
  for (int k = 0; k < rm.n_b; ++k) M.row(k) = data.Z.row(rm.b_cols[static_cast<std::size_t>(k)]);
  for (std::size_t k = 0; k < rm.d_cols.size(); ++k)
    M.row(rm.n_b + static_cast<int>(k)) = data.Y.row(rm.d_cols[k]);
  const Eigen::VectorXd y = data.Y.row(row).transpose();
  rm.G = M * M.transpose();
  rm.c = M * y;
  rm.y2 = y.squaredNorm();
  return rm;
}

double row_objective(const RowModel& rm, const Eigen::VectorXd& u, double penalty) {
  double f = u.dot(rm.G * u) - 2.0 * rm.c.dot(u) + rm.y2;
  if (rm.n_b > 0) f -= penalty * u.head(rm.n_b).sum();
  return f;
}

// global minimum of the penalized row quadratic over the simplex, by solving
// the stationarity system on every face and keeping the best feasible point
double row_objective_min(const RowModel& rm, double penalty) {
  const int p = static_cast<int>(rm.G.rows());
  REQUIRE(p <= 8);
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << p); ++mask) {
    std::vector<int> S;
    for (int j = 0; j < p; ++j)
      if (mask & (1u << j)) S.push_back(j);
    const int s = static_cast<int>(S.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(s + 1, s + 1);
    Eigen::VectorXd rhs(s + 1);
    for (int a = 0; a < s; ++a) {
      for (int b = 0; b < s; ++b) A(a, b) = 2.0 * rm.G(S[a], S[b]);
      A(a, s) = 1.0;
      A(s, a) = 1.0;
      rhs(a) = 2.0 * rm.c(S[a]) + (S[a] < rm.n_b ? penalty : 0.0);
    }
    rhs(s) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    bool ok = true;
    Eigen::VectorXd cand = Eigen::VectorXd::Zero(p);
    for (int a = 0; a < s; ++a) {
      cand(S[a]) = sol(a);
      if (sol(a) < -1e-12) ok = false;
    }
    if (!ok) continue;
    best = std::min(best, row_objective(rm, cand, penalty));
  }
  return best;
}

Eigen::VectorXd extract_row(const SSIEstimate& est, const RowModel& rm, int row) {
  Eigen::VectorXd u(rm.n_b + static_cast<int>(rm.d_cols.size()));
  for (int k = 0; k < rm.n_b; ++k) u(k) = est.B(row, rm.b_cols[static_cast<std::size_t>(k)]);
  for (std::size_t k = 0; k < rm.d_cols.size(); ++k)
    u(rm.n_b + static_cast<Eigen::Index>(k)) = est.D(row, rm.d_cols[k]);
  return u;
}

DataMatrices noiseless_data(const TrustSystem& sys, int issues, int m, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Eigen::MatrixXd> terminals;
  for (int k = 0; k < issues; ++k) {
    const Eigen::MatrixXd x0 = random_initial_opinions(sys.n, sys.n_stubborn, m, rng);
    terminals.push_back(exact_terminal(sys, x0));
  }
  return assemble_data_matrices(terminals, sys.n_stubborn);
}

std::vector<std::vector<int>> full_support(int nr, int ns) {
  std::vector<int> all(ns);
  for (int s = 0; s < ns; ++s) all[static_cast<std::size_t>(s)] = s;
  return std::vector<std::vector<int>>(static_cast<std::size_t>(nr), all);
}

} // namespace

TEST_CASE("simplex projection matches the active-set enumeration") {
  Rng rng(101);
  for (int rep = 0; rep < 60; ++rep) {
    const int p = 1 + rng.uniform_int(7);
    Eigen::VectorXd v(p);
    for (int j = 0; j < p; ++j) v(j) = rng.uniform(-2.0, 2.0);
    const Eigen::VectorXd got = project_simplex(v);
    const Eigen::VectorXd want = project_simplex_oracle(v);
    REQUIRE(want.size() == p);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(got.minCoeff() >= 0.0);
    CHECK(std::abs(got.sum() - 1.0) < 1e-12);
  }
  // already-feasible points are fixed points
  Eigen::VectorXd q(3);
  q << 0.2, 0.5, 0.3;
  CHECK((project_simplex(q) - q).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("constrained projection zeroes the disallowed coordinates") {
  Rng rng(102);
  Eigen::VectorXd v(6);
  for (int j = 0; j < 6; ++j) v(j) = rng.uniform(-1.0, 1.0);
  const std::vector<int> allowed = {0, 2, 5};
  const Eigen::VectorXd got = project_constrained_simplex(v, allowed);
  CHECK(got(1) == 0.0);
  CHECK(got(3) == 0.0);
  CHECK(got(4) == 0.0);
  Eigen::VectorXd sub(3);
  sub << v(0), v(2), v(5);
  const Eigen::VectorXd psub = project_simplex(sub);
  CHECK(std::abs(got(0) - psub(0)) < 1e-14);
  CHECK(std::abs(got(2) - psub(1)) < 1e-14);
  CHECK(std::abs(got(5) - psub(2)) < 1e-14);
  CHECK_THROWS(project_constrained_simplex(v, {}));
  CHECK_THROWS(project_constrained_simplex(v, {0, 6}));
}

TEST_CASE("relative trust has unit row sums and zero diagonal") {
  const SocialGraph g = generate_er_graph(8, 3, 0.4, 0.5, 11);
  const TrustSystem sys = generate_trust_matrix(g, 12);
  const auto [Br, Dr] = relative_trust(sys.B, sys.D);
  for (int i = 0; i < 8; ++i) {
    CHECK(Dr(i, i) == 0.0);
    CHECK(std::abs(Br.row(i).sum() + Dr.row(i).sum() - 1.0) < 1e-12);
  }
  Eigen::MatrixXd D_bad = sys.D;
  D_bad(0, 0) = 1.0;
  CHECK_THROWS_AS(relative_trust(sys.B, D_bad), std::invalid_argument);
}

TEST_CASE("equivalence scaling keeps rows stochastic and the fit exact") {
  const SocialGraph g = generate_er_graph(6, 3, 0.4, 0.6, 5);
  const TrustSystem sys = generate_trust_matrix(g, 7);
  const DataMatrices data = noiseless_data(sys, 4, 2, 21);
  REQUIRE(residual(sys.B, sys.D, data) < 1e-9);

  const auto [Br0, Dr0] = relative_trust(sys.B, sys.D);
  Rng rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd scales(6);
    for (int i = 0; i < 6; ++i) {
      const double off_mass = 1.0 - sys.D(i, i);
      scales(i) = rng.uniform(0.5, std::min(1.5, 0.95 / off_mass));
    }
    const auto [Bs, Ds] = apply_equivalence_scaling(sys.B, sys.D, scales);
    for (int i = 0; i < 6; ++i)
      CHECK(std::abs(Bs.row(i).sum() + Ds.row(i).sum() - 1.0) < 1e-14);
    CHECK(residual(Bs, Ds, data) < 1e-9);
    const auto [Br, Dr] = relative_trust(Bs, Ds);
    CHECK((Br - Br0).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((Dr - Dr0).cwiseAbs().maxCoeff() < 1e-9);
  }

  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(6);
  const auto [Bi, Di] = apply_equivalence_scaling(sys.B, sys.D, ones);
  CHECK((Bi - sys.B).cwiseAbs().maxCoeff() == 0.0);
  CHECK((Di - sys.D).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::VectorXd neg = ones;
  neg(2) = -0.5;
  CHECK_THROWS(apply_equivalence_scaling(sys.B, sys.D, neg));
  Eigen::VectorXd huge = ones * 50.0;
  CHECK_THROWS(apply_equivalence_scaling(sys.B, sys.D, huge));
}

TEST_CASE("fixed-penalty row solutions match face enumeration") {
  Rng rng(201);
  for (int rep = 0; rep < 8; ++rep) {
    const int nr = 3, ns = 3, cols = 12;
    DataMatrices data;
    data.issues = cols;
    data.m = 1;
    data.Y.resize(nr, cols);
    data.Z.resize(ns, cols);
    for (int i = 0; i < nr; ++i)
      for (int j = 0; j < cols; ++j) data.Y(i, j) = rng.uniform();
    for (int i = 0; i < ns; ++i)
      for (int j = 0; j < cols; ++j) data.Z(i, j) = rng.uniform();

    SSIProblem prob;
    prob.data = data;
    prob.support_B = full_support(nr, ns);
    prob.options.tol = 1e-13;
    prob.options.max_iterations = 200000;

    std::vector<RowModel> rms;
    double lmax = 0.0;
    for (int i = 0; i < nr; ++i) {
      rms.push_back(row_model(data, prob.support_B, i));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rms.back().G, Eigen::EigenvaluesOnly);
      lmax = std::max(lmax, 2.0 * es.eigenvalues().maxCoeff());
    }

    for (double penalty : {0.0, 0.05 * lmax, lmax}) {
      const SSIEstimate est = solve_at_penalty(prob, penalty);
      for (int i = 0; i < nr; ++i) {
        const Eigen::VectorXd u = extract_row(est, rms[static_cast<std::size_t>(i)], i);
        const double f = row_objective(rms[static_cast<std::size_t>(i)], u, penalty);
        const double fstar = row_objective_min(rms[static_cast<std::size_t>(i)], penalty);
        INFO("rep " << rep << " row " << i << " penalty " << penalty);
        CHECK(f - fstar <= 1e-6 * std::max(1.0, std::abs(fstar)));
      }
    }
  }
}

TEST_CASE("larger penalties never increase the off-diagonal mass") {
  // full-rank synthetic rows: every subproblem is strongly convex, so the
  // solved path is resolved well below the slack used here
  Rng rng(141);
  const int nr = 4, ns = 2, cols = 12;
  DataMatrices data;
  data.issues = cols;
  data.m = 1;
  data.Y.resize(nr, cols);
  data.Z.resize(ns, cols);
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < cols; ++j) data.Y(i, j) = rng.uniform();
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < cols; ++j) data.Z(i, j) = rng.uniform();

  SSIProblem prob;
  prob.data = data;
  prob.support_B = full_support(nr, ns);
  double lmax = 0.0;
  for (int i = 0; i < nr; ++i) {
    const RowModel rm = row_model(data, prob.support_B, i);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rm.G, Eigen::EigenvaluesOnly);
    lmax = std::max(lmax, 2.0 * es.eigenvalues().maxCoeff());
  }
  double prev = std::numeric_limits<double>::infinity();
  for (double penalty : {0.0, 1e-3 * lmax, 1e-2 * lmax, 0.1 * lmax, lmax}) {
    const SSIEstimate est = solve_at_penalty(prob, penalty);
    CHECK(est.l1_offdiag <= prev + 1e-7);
    prev = est.l1_offdiag;
  }
}

TEST_CASE("estimates live on the row simplex and report their own mass") {
  const SocialGraph g = generate_er_graph(5, 2, 0.5, 0.6, 51);
  const TrustSystem sys = generate_trust_matrix(g, 52);
  SSIProblem prob;
  prob.data = noiseless_data(sys, 8, 1, 53);
  prob.support_B = support_rows(g);
  prob.epsilon = 1e-7;
  const SSIEstimate est = solve_ssi(prob);
  CHECK(est.status == SolveStatus::ok);
  CHECK(est.residual <= prob.epsilon);
  for (int i = 0; i < 5; ++i) {
    CHECK(est.D(i, i) == 0.0);
    CHECK(est.B.row(i).minCoeff() >= 0.0);
    CHECK(est.D.row(i).minCoeff() >= 0.0);
    CHECK(std::abs(est.B.row(i).sum() + est.D.row(i).sum() - 1.0) < 1e-9);
  }
  CHECK(std::abs(est.l1_offdiag - est.D.sum()) < 1e-12);
  // off the admissible support B is identically zero
  for (int i = 0; i < 5; ++i) {
    const auto& sup = prob.support_B[static_cast<std::size_t>(i)];
    for (int s = 0; s < 2; ++s)
      if (std::find(sup.begin(), sup.end(), s) == sup.end()) CHECK(est.B(i, s) == 0.0);
  }
}

TEST_CASE("with full support the sparsest consistent attribution is returned") {
  // two normal agents cannot pin down their mutual trust from steady states:
  // every mix between peer influence and direct stubborn attribution fits
  // exactly, so the minimum-l1 member (all influence attributed directly,
  // B = (I - D)^-1 B_true, D = 0) is the defined answer
  Eigen::MatrixXd Br(2, 2), Dr(2, 2);
  Br << 0.5, 0.3, 0.2, 0.1;
  Dr << 0.0, 0.2, 0.7, 0.0;

  const int issues = 40;
  Rng rng(61);
  DataMatrices data;
  data.issues = issues;
  data.m = 1;
  data.Z.resize(2, issues);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < issues; ++k) data.Z(i, k) = rng.uniform();
  const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(2, 2) - Dr;
  data.Y = lhs.partialPivLu().solve(Br * data.Z);
  const Eigen::MatrixXd direct = lhs.partialPivLu().solve(Br);

  SSIProblem prob;
  prob.data = data;
  prob.support_B = full_support(2, 2);
  prob.epsilon = 1e-8;
  const SSIEstimate est = solve_ssi(prob);
  CHECK(est.status == SolveStatus::ok);
  CHECK(est.residual <= prob.epsilon);
  CHECK(est.D.cwiseAbs().maxCoeff() < 1e-6);
  CHECK((est.B - direct).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(est.l1_offdiag < Dr.sum());  // strictly sparser than the generator
}

TEST_CASE("support restrictions force excluded stubborn weights to zero") {
  Eigen::MatrixXd Br(2, 2), Dr(2, 2);
  Br << 0.8, 0.0, 0.0, 0.3;
  Dr << 0.0, 0.2, 0.7, 0.0;
  const int issues = 30;
  Rng rng(71);
  DataMatrices data;
  data.issues = issues;
  data.m = 1;
  data.Z.resize(2, issues);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < issues; ++k) data.Z(i, k) = rng.uniform();
  data.Y = (Eigen::MatrixXd::Identity(2, 2) - Dr).partialPivLu().solve(Br * data.Z);

  SSIProblem prob;
  prob.data = data;
  prob.support_B = {{0}, {1}};
  prob.epsilon = 1e-8;
  const SSIEstimate est = solve_ssi(prob);
  CHECK(est.status == SolveStatus::ok);
  CHECK(est.B(0, 1) == 0.0);
  CHECK(est.B(1, 0) == 0.0);
  CHECK((est.B - Br).cwiseAbs().maxCoeff() < 1e-4);
  CHECK((est.D - Dr).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("an unreachable tolerance is reported, with the best fit returned") {
  DataMatrices data;
  data.issues = 4;
  data.m = 1;
  data.Y.resize(1, 4);
  data.Z.resize(1, 4);
  data.Y << 5.0, 6.0, 7.0, 8.0;
  data.Z << 0.1, 0.2, 0.3, 0.4;
  SSIProblem prob;
  prob.data = data;
  prob.support_B = {{0}};
  prob.epsilon = 1e-3;
  const SSIEstimate est = solve_ssi(prob);
  CHECK(est.status == SolveStatus::infeasible_epsilon);
  // the single admissible weight is pinned to one by the simplex constraint
  CHECK(est.B(0, 0) == 1.0);
  const double forced = (data.Y - data.Z).norm();
  CHECK(est.residual == Catch::Approx(forced).epsilon(1e-12));
}

TEST_CASE("rows with constant observations are flagged") {
  DataMatrices data;
  data.issues = 5;
  data.m = 1;
  data.Y.resize(2, 5);
  data.Z.resize(1, 5);
  Rng rng(81);
  for (int k = 0; k < 5; ++k) {
    data.Y(0, k) = rng.uniform();
    data.Z(0, k) = rng.uniform();
  }
  data.Y.row(1).setConstant(0.4);
  SSIProblem prob;
  prob.data = data;
  prob.support_B = {{0}, {0}};
  prob.epsilon = 10.0;
  const SSIEstimate est = solve_ssi(prob);
  REQUIRE(est.flagged_rows.size() == 1);
  CHECK(est.flagged_rows[0] == 1);
}

TEST_CASE("malformed problems are rejected") {
  DataMatrices data;
  data.issues = 3;
  data.m = 1;
  data.Y = Eigen::MatrixXd::Zero(2, 3);
  data.Z = Eigen::MatrixXd::Zero(1, 3);
  SSIProblem prob;
  prob.data = data;
  prob.support_B = {{0}};  // one row short
  CHECK_THROWS(solve_ssi(prob));
  prob.support_B = {{0}, {1}};  // column out of range
  CHECK_THROWS(solve_ssi(prob));
  prob.support_B = {{0}, {0}};
  prob.epsilon = -1.0;
  CHECK_THROWS(solve_ssi(prob));
  prob.epsilon = 1.0;
  prob.data.Z = Eigen::MatrixXd::Zero(1, 4);  // column mismatch
  CHECK_THROWS(solve_ssi(prob));
}

TEST_CASE("support rows mirror the graph in block-local indexing") {
  const SocialGraph g = generate_er_graph(5, 3, 0.4, 0.5, 91);
  const auto sup = support_rows(g);
  REQUIRE(sup.size() == 5);
  for (int i = 0; i < 5; ++i) {
    const auto& row = sup[static_cast<std::size_t>(i)];
    CHECK(std::is_sorted(row.begin(), row.end()));
    for (int s = 0; s < 3; ++s) {
      const bool in_graph = std::find(g.support_B.begin(), g.support_B.end(),
                                      std::make_pair(i + 3, s)) != g.support_B.end();
      const bool in_rows = std::find(row.begin(), row.end(), s) != row.end();
      CHECK(in_graph == in_rows);
    }
  }
}
