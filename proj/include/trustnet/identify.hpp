#ifndef TRUSTNET_IDENTIFY_HPP
#define TRUSTNET_IDENTIFY_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "trustnet/dynamics.hpp"
#include "trustnet/graph.hpp"

namespace trustnet {

/// Relative trust: each row of [B D] divided by 1 - D_ii, diagonal zeroed.
/// This is the canonical representative of the scaling equivalence class
/// that steady-state data can determine.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> relative_trust(const Eigen::MatrixXd& B,
                                                                  const Eigen::MatrixXd& D) {
  const Eigen::Index nr = D.rows();
  Eigen::MatrixXd Br = B, Dr = D;
  for (Eigen::Index i = 0; i < nr; ++i) {
    const double self = D(i, i);
    if (self >= 1.0 - 1e-12)
      throw std::invalid_argument("relative_trust: self-trust must be below one");
    const double s = 1.0 / (1.0 - self);
    Br.row(i) *= s;
    Dr.row(i) *= s;
    Dr(i, i) = 0.0;
  }
  return {std::move(Br), std::move(Dr)};
}

/// Member of the scaling equivalence class: B' = diag(scales) B, off-diagonal
/// D' = diag(scales) off(D), and the diagonal refilled so each row of [B' D']
/// sums to one. The diagonal is computed from the already-scaled entries, so
/// row-stochasticity holds to the last bit of the summation.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> apply_equivalence_scaling(
    const Eigen::MatrixXd& B, const Eigen::MatrixXd& D, const Eigen::VectorXd& scales) {
  const Eigen::Index nr = D.rows();
  if (scales.size() != nr) throw std::invalid_argument("apply_equivalence_scaling: scales size mismatch");
  Eigen::MatrixXd Bs = B, Ds = D;
  for (Eigen::Index i = 0; i < nr; ++i) {
    const double si = scales(i);
    if (si < 0.0) throw std::invalid_argument("apply_equivalence_scaling: negative scaling");
    Bs.row(i) *= si;
    Ds.row(i) *= si;
    Ds(i, i) = 0.0;
    const double mass = Bs.row(i).sum() + Ds.row(i).sum();
    const double diag = 1.0 - mass;
    if (diag < -1e-9)
      throw std::invalid_argument("apply_equivalence_scaling: scaling drives a diagonal entry negative");
    Ds(i, i) = std::max(diag, 0.0);
  }
  return {std::move(Bs), std::move(Ds)};
}

/// Fit residual ||(I - D)Y - BZ||_F (not squared).
inline double residual(const Eigen::MatrixXd& B, const Eigen::MatrixXd& D,
                       const DataMatrices& data) {
  return ((data.Y - D * data.Y) - B * data.Z).norm();
}

/// Euclidean projection onto {u >= 0, sum u = 1} by the sorting method.
inline Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index p = v.size();
  if (p == 0) throw std::invalid_argument("project_simplex: empty vector");
  std::vector<double> w(v.data(), v.data() + p);
  std::sort(w.begin(), w.end(), std::greater<double>());
  double csum = 0.0, tau = 0.0;
  for (Eigen::Index k = 0; k < p; ++k) {
    csum += w[static_cast<std::size_t>(k)];
    const double t = (csum - 1.0) / static_cast<double>(k + 1);
    if (w[static_cast<std::size_t>(k)] - t > 0.0) tau = t;
  }
  return (v.array() - tau).max(0.0);
}

/// Projection onto the simplex restricted to an allowed coordinate set:
/// coordinates outside `allowed` are zeroed, the rest projected onto the
/// probability simplex.
inline Eigen::VectorXd project_constrained_simplex(const Eigen::VectorXd& v,
                                                   const std::vector<int>& allowed) {
  if (allowed.empty()) throw std::invalid_argument("project_constrained_simplex: empty allowed set");
  Eigen::VectorXd sub(static_cast<Eigen::Index>(allowed.size()));
  for (std::size_t k = 0; k < allowed.size(); ++k) {
    const int j = allowed[k];
    if (j < 0 || j >= v.size()) throw std::invalid_argument("project_constrained_simplex: index out of range");
    sub(static_cast<Eigen::Index>(k)) = v(j);
  }
  const Eigen::VectorXd psub = project_simplex(sub);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  for (std::size_t k = 0; k < allowed.size(); ++k) out(allowed[k]) = psub(static_cast<Eigen::Index>(k));
  return out;
}

enum class SolveStatus { ok, infeasible_epsilon };

struct SSISolverOptions {
  double tol = 1e-10;              // relative objective-change stopping rule
  long max_iterations = 3000;      // gradient steps per row on the first (cold) evaluation;
                                   // they only have to locate the active face, the
                                   // closed-form finish supplies the precision
  long warm_iterations = 200;      // gradient budget once iterates are warm along the path
  int bisection_max = 64;          // penalty bisection iterations
  double residual_bracket = 1e-4;  // bisection stops at (r_hi - r_lo) <= this * epsilon
  double penalty_bracket = 1e-3;   // or at (lam_hi - lam_lo) <= this * lam_hi
  double penalty_start_scale = 1.0;   // initial penalty = this * max row Lipschitz constant
  double penalty_floor_rel = 1e-16;   // below this * initial penalty, treat as zero
};

struct SSIProblem {
  DataMatrices data;
  std::vector<std::vector<int>> support_B;  // per normal row: admissible stubborn columns
  double epsilon = 0.0;
  SSISolverOptions options{};
};

struct SSIEstimate {
  Eigen::MatrixXd B;         // zero outside the admissible support
  Eigen::MatrixXd D;         // zero diagonal
  double residual = 0.0;     // achieved ||(I-D)Y - BZ||_F
  double l1_offdiag = 0.0;   // objective value at the returned point
  double penalty = 0.0;      // penalty weight at the returned point
  std::vector<long> iterations;   // cumulative gradient iterations per row
  std::vector<int> flagged_rows;  // rows whose data is constant across issues
  long rows_at_iteration_cap = 0;
  long penalty_evals = 0;         // full-row solves performed along the penalty path
  long finish_rounds = 0;         // cumulative active-set rounds across rows and evals
  SolveStatus status = SolveStatus::ok;
};

namespace detail {

/// Quadratic data for one row's subproblem. Variables u = [b; d] with the
/// admissible stubborn weights first, then the trusts on the other normal
/// agents; the row residual is ||y - u^T M||^2 = u^T G u - 2 c^T u + y2.
struct RowQuadratic {
  Eigen::MatrixXd G;
  Eigen::VectorXd c;
  double y2 = 0.0;
  double lipschitz = 0.0;  // 2 * lambda_max(G)
  int n_b = 0;             // leading coordinates that belong to B
  std::vector<int> b_cols, d_cols;
  // raw row data, kept so residuals can be measured without the catastrophic
  // cancellation of u'Gu - 2c'u + y2 (that form cannot see below ~1e-8)
  Eigen::MatrixXd M;
  Eigen::VectorXd y;
};

inline RowQuadratic build_row_quadratic(const SSIProblem& prob, int row) {
  const auto& Y = prob.data.Y;
  const auto& Z = prob.data.Z;
  const Eigen::Index cols = Y.cols();
  RowQuadratic rq;
  rq.b_cols = prob.support_B[static_cast<std::size_t>(row)];
  std::sort(rq.b_cols.begin(), rq.b_cols.end());
  for (int j = 0; j < Y.rows(); ++j)
    if (j != row) rq.d_cols.push_back(j);
  rq.n_b = static_cast<int>(rq.b_cols.size());
  const int p = rq.n_b + static_cast<int>(rq.d_cols.size());
  Eigen::MatrixXd M(p, cols);
  for (int k = 0; k < rq.n_b; ++k) M.row(k) = Z.row(rq.b_cols[static_cast<std::size_t>(k)]);
  for (std::size_t k = 0; k < rq.d_cols.size(); ++k)
    M.row(rq.n_b + static_cast<int>(k)) = Y.row(rq.d_cols[k]);
  const Eigen::VectorXd y = Y.row(row).transpose();
  rq.G.noalias() = M * M.transpose();
  rq.c.noalias() = M * y;
  rq.y2 = y.squaredNorm();
  if (p > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rq.G, Eigen::EigenvaluesOnly);
    const double emax = std::max(es.eigenvalues()(p - 1), 0.0);
    rq.lipschitz = 2.0 * emax * (1.0 + 1e-9) + 1e-300;
  }
  rq.M = std::move(M);
  rq.y = y;
  return rq;
}

/// Accelerated projected gradient on f(u) = u'Gu - 2c'u + y2 - penalty*sum(b)
/// over the probability simplex, warm-started at u. Fixed step 1/L with the
/// exact curvature bound; acceleration restarts whenever the objective rises.
/// Stops once the relative objective change stays below tol twice in a row.
/// Returns iterations used; u holds the solution.
inline long fista_row(const RowQuadratic& rq, double penalty, double tol, long max_iter,
                      Eigen::VectorXd& u) {
  const Eigen::Index p = rq.G.rows();
  if (p == 0) return 0;
  const double step = 1.0 / rq.lipschitz;
  const auto fval = [&](const Eigen::VectorXd& w) {
    double f = w.dot(rq.G * w) - 2.0 * rq.c.dot(w) + rq.y2;
    if (rq.n_b > 0) f -= penalty * w.head(rq.n_b).sum();
    return f;
  };
  Eigen::VectorXd x_prev = u, v = u;
  double t_acc = 1.0;
  double f_prev = fval(u);
  int calm = 0;
  long it = 0;
  for (; it < max_iter; ++it) {
    Eigen::VectorXd grad = 2.0 * (rq.G * v - rq.c);
    if (rq.n_b > 0) grad.head(rq.n_b).array() -= penalty;
    Eigen::VectorXd x = project_simplex(v - step * grad);
    const double f = fval(x);
    if (f > f_prev) {  // restart acceleration
      v = x_prev;
      t_acc = 1.0;
      calm = 0;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_acc * t_acc));
    v = x + ((t_acc - 1.0) / t_next) * (x - x_prev);
    t_acc = t_next;
    x_prev = x;
    const double change = std::abs(f_prev - f);
    f_prev = f;
    if (change <= tol * std::max(1.0, std::abs(f))) {
      if (++calm >= 2) { ++it; break; }
    } else {
      calm = 0;
    }
  }
  u = x_prev;
  return it;
}

/// Measured from the raw row data, not the Gram form: exact fits then read
/// as ~1e-15 instead of drowning in the ~sqrt(eps)*|y| cancellation noise.
inline double row_residual_sq(const RowQuadratic& rq, const Eigen::VectorXd& u) {
  if (rq.G.rows() == 0) return rq.y2;
  return (rq.y - rq.M.transpose() * u).squaredNorm();
}

/// Active-set finish of the row subproblem. The gradient steps stall once
/// the remaining error lives in near-flat directions (per-step objective
/// change falls below any threshold long before the residual reaches the
/// floor the data supports), so the iterate's working set is refined in
/// closed form: solve the stationarity system on the positive coordinates,
/// step back to feasibility dropping coordinates the face solution pushes
/// negative, and grow the set with the coordinate whose multiplier most
/// violates optimality. Objectives are measured from raw row data; the best
/// feasible point seen replaces the iterate, so the finish never regresses.
inline long face_finish(const RowQuadratic& rq, double penalty, Eigen::VectorXd& u) {
  const Eigen::Index p = rq.G.rows();
  if (p == 0) return 0;
  const auto fprec = [&](const Eigen::VectorXd& w) {
    double f = row_residual_sq(rq, w);
    if (rq.n_b > 0) f -= penalty * w.head(rq.n_b).sum();
    return f;
  };
  Eigen::VectorXd x = u;  // feasible throughout
  Eigen::VectorXd best = u;
  double f_best = fprec(u);
  std::vector<char> active(static_cast<std::size_t>(p), 0);
  for (Eigen::Index j = 0; j < p; ++j) active[static_cast<std::size_t>(j)] = x(j) > 0.0 ? 1 : 0;

  const long cap = 6 * static_cast<long>(p) + 30;
  long rounds = 0;
  for (long round = 0; round < cap; ++round) {
    ++rounds;
    std::vector<int> S;
    for (int j = 0; j < p; ++j)
      if (active[static_cast<std::size_t>(j)]) S.push_back(j);
    if (S.empty()) break;
    const int s = static_cast<int>(S.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(s + 1, s + 1);
    Eigen::VectorXd rhs(s + 1);
    for (int a = 0; a < s; ++a) {
      for (int b = 0; b < s; ++b) A(a, b) = 2.0 * rq.G(S[a], S[b]);
      A(a, s) = 1.0;
      A(s, a) = 1.0;
      rhs(a) = 2.0 * rq.c(S[a]) + (S[a] < rq.n_b ? penalty : 0.0);
    }
    rhs(s) = 1.0;
    // least-squares solve: the bordered system is singular whenever the face
    // contains flat directions, and any stationary point of the face will do
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    const Eigen::VectorXd sol = cod.solve(rhs);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(p);
    double zmin = 0.0;
    for (int a = 0; a < s; ++a) {
      z(S[a]) = sol(a);
      zmin = std::min(zmin, sol(a));
    }
    if (zmin < -1e-12) {
      // step from x toward z until the first coordinate leaves the face
      double theta = 1.0;
      for (int a = 0; a < s; ++a)
        if (sol(a) < 0.0) theta = std::min(theta, x(S[a]) / (x(S[a]) - sol(a)));
      x += theta * (z - x);
      for (int a = 0; a < s; ++a)
        if (x(S[a]) <= 1e-15) {
          x(S[a]) = 0.0;
          active[static_cast<std::size_t>(S[a])] = 0;
        }
      const double total = x.sum();
      if (!(total > 0.5 && total < 2.0)) break;  // degenerate geometry, keep best
      x /= total;
      continue;
    }
    // face optimum reached
    x = z.cwiseMax(0.0);
    const double total = x.sum();
    if (!(total > 0.5 && total < 2.0)) break;
    x /= total;
    const double fx = fprec(x);
    if (fx < f_best) {
      f_best = fx;
      best = x;
    }
    // optimality over the inactive coordinates: active ones share the
    // equality multiplier, an inactive one below it can still improve
    Eigen::VectorXd grad = 2.0 * (rq.G * x - rq.c);
    if (rq.n_b > 0) grad.head(rq.n_b).array() -= penalty;
    double nu = 0.0;
    for (int a = 0; a < s; ++a) nu += grad(S[a]);
    nu /= static_cast<double>(s);
    const double tol_add = 1e-9 * std::max(1.0, grad.cwiseAbs().maxCoeff());
    int enter = -1;
    double worst = -tol_add;
    for (int j = 0; j < p; ++j)
      if (!active[static_cast<std::size_t>(j)] && grad(j) - nu < worst) {
        worst = grad(j) - nu;
        enter = j;
      }
    if (enter < 0) break;  // KKT point
    active[static_cast<std::size_t>(enter)] = 1;
  }
  const double fx = fprec(x);
  if (fx < f_best) {
    f_best = fx;
    best = x;
  }
  if (f_best <= fprec(u)) u = best;
  return rounds;
}

struct RowWorkspace {
  std::vector<RowQuadratic> rows;
  std::vector<Eigen::VectorXd> u;
  std::vector<long> iterations;
  long cap_hits = 0;
  long evals = 0;
  long finish_rounds = 0;

  explicit RowWorkspace(const SSIProblem& prob) {
    const int nr = static_cast<int>(prob.data.Y.rows());
    rows.reserve(static_cast<std::size_t>(nr));
    for (int i = 0; i < nr; ++i) rows.push_back(build_row_quadratic(prob, i));
    u.resize(static_cast<std::size_t>(nr));
    iterations.assign(static_cast<std::size_t>(nr), 0);
    for (int i = 0; i < nr; ++i) {
      const Eigen::Index p = rows[static_cast<std::size_t>(i)].G.rows();
      u[static_cast<std::size_t>(i)] =
          p > 0 ? Eigen::VectorXd::Constant(p, 1.0 / static_cast<double>(p)) : Eigen::VectorXd();
    }
  }

  // solves every row at the given penalty from the current iterates: gradient
  // steps to locate the active face, closed-form finish for precision.
  // Returns the global residual.
  double solve_all(double penalty, const SSISolverOptions& opt) {
    ++evals;
    const long budget = evals == 1 ? opt.max_iterations : opt.warm_iterations;
    double rss = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const long used = fista_row(rows[i], penalty, opt.tol, budget, u[i]);
      iterations[i] += used;
      if (used >= budget) ++cap_hits;
      finish_rounds += face_finish(rows[i], penalty, u[i]);
      rss += row_residual_sq(rows[i], u[i]);
    }
    return std::sqrt(rss);
  }

  double max_lipschitz() const {
    double s = 0.0;
    for (const auto& rq : rows) s = std::max(s, rq.lipschitz);
    return s > 0.0 ? s : 1.0;
  }
};

inline SSIEstimate assemble_estimate(const SSIProblem& prob, const RowWorkspace& ws,
                                     const std::vector<Eigen::VectorXd>& sol,
                                     double penalty, double resid) {
  const int nr = static_cast<int>(prob.data.Y.rows());
  const int ns = static_cast<int>(prob.data.Z.rows());
  SSIEstimate est;
  est.penalty = penalty;
  est.residual = resid;
  est.iterations = ws.iterations;
  est.rows_at_iteration_cap = ws.cap_hits;
  est.penalty_evals = ws.evals;
  est.finish_rounds = ws.finish_rounds;
  est.B = Eigen::MatrixXd::Zero(nr, ns);
  est.D = Eigen::MatrixXd::Zero(nr, nr);
  for (int i = 0; i < nr; ++i) {
    const auto& rq = ws.rows[static_cast<std::size_t>(i)];
    const auto& ui = sol[static_cast<std::size_t>(i)];
    for (int k = 0; k < rq.n_b; ++k) est.B(i, rq.b_cols[static_cast<std::size_t>(k)]) = ui(k);
    for (std::size_t k = 0; k < rq.d_cols.size(); ++k)
      est.D(i, rq.d_cols[k]) = ui(rq.n_b + static_cast<Eigen::Index>(k));
    const double lo = prob.data.Y.row(i).minCoeff();
    const double hi = prob.data.Y.row(i).maxCoeff();
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) est.flagged_rows.push_back(i);
  }
  for (int i = 0; i < nr; ++i) est.l1_offdiag += est.D.row(i).sum();
  return est;
}

inline void validate_problem(const SSIProblem& prob) {
  const int nr = static_cast<int>(prob.data.Y.rows());
  if (static_cast<int>(prob.support_B.size()) != nr)
    throw std::invalid_argument("solve_ssi: support rows must match normal agent count");
  if (prob.data.Y.cols() != prob.data.Z.cols())
    throw std::invalid_argument("solve_ssi: Y and Z column counts differ");
  if (prob.epsilon < 0.0) throw std::invalid_argument("solve_ssi: negative epsilon");
  const int ns = static_cast<int>(prob.data.Z.rows());
  for (const auto& sup : prob.support_B)
    for (int j : sup)
      if (j < 0 || j >= ns) throw std::invalid_argument("solve_ssi: support column out of range");
}

} // namespace detail

/// Single fixed-penalty solve of the per-row quadratics, no bisection.
/// Exposed for diagnostics and for checking the penalty path.
inline SSIEstimate solve_at_penalty(const SSIProblem& prob, double penalty) {
  detail::validate_problem(prob);
  detail::RowWorkspace ws(prob);
  const double r = ws.solve_all(penalty, prob.options);
  SSIEstimate est = detail::assemble_estimate(prob, ws, ws.u, penalty, r);
  est.status = r <= prob.epsilon ? SolveStatus::ok : SolveStatus::infeasible_epsilon;
  return est;
}

/// Sparse identification solve: minimizes the l1 mass of the off-diagonal
/// trusts subject to the data-fit residual staying within epsilon, the
/// row-simplex constraints, the known B support, and a zero D diagonal.
///
/// Per-row penalized quadratics share one global penalty; the penalty is
/// bisected onto the feasibility boundary and the feasible end of the final
/// bracket is returned. Every evaluation warm-starts from the previous
/// iterates, and the search walks down from a fully sparsifying penalty:
/// cold starts at small penalties cannot separate solutions that tie on the
/// fit term within the iteration budget, warm starts inherit the selection.
inline SSIEstimate solve_ssi(const SSIProblem& prob) {
  detail::validate_problem(prob);
  const auto& opt = prob.options;
  detail::RowWorkspace ws(prob);

  struct Saved {
    std::vector<Eigen::VectorXd> u;
    double penalty = 0.0, resid = 0.0;
    bool feasible = false;
  };
  Saved best;
  const auto save = [&](double penalty, double r, bool feasible) {
    best.u = ws.u;
    best.penalty = penalty;
    best.resid = r;
    best.feasible = feasible;
  };

  const auto eval = [&](double lam) { return ws.solve_all(lam, opt); };

  const double scale = ws.max_lipschitz() * opt.penalty_start_scale;
  double lam_hi = scale;
  double r_hi = eval(lam_hi);
  if (r_hi <= prob.epsilon) {
    // feasible at the sparsest end; nothing to bisect
    save(lam_hi, r_hi, true);
  } else {
    double lam_lo = 0.0, r_lo = 0.0;
    bool bracketed = false;
    const double floor = scale * opt.penalty_floor_rel;
    for (double lam = lam_hi / 8.0; lam > floor; lam /= 8.0) {
      const double r = eval(lam);
      if (r <= prob.epsilon) {
        lam_lo = lam;
        r_lo = r;
        save(lam, r, true);
        bracketed = true;
        break;
      }
      lam_hi = lam;
      r_hi = r;
    }
    if (!bracketed) {
      const double r0 = eval(0.0);
      if (r0 <= prob.epsilon) {
        lam_lo = 0.0;
        r_lo = r0;
        lam_hi = floor * 8.0;
        save(0.0, r0, true);
        bracketed = true;
      } else {
        save(0.0, r0, false);  // epsilon below the least-squares residual
      }
    }
    if (bracketed) {
      for (int k = 0; k < opt.bisection_max; ++k) {
        if (r_hi - r_lo <= opt.residual_bracket * prob.epsilon) break;
        if (lam_hi - lam_lo <= opt.penalty_bracket * lam_hi) break;
        const double mid = 0.5 * (lam_lo + lam_hi);
        const double r = eval(mid);
        if (r <= prob.epsilon) {
          lam_lo = mid;
          r_lo = r;
          save(mid, r, true);
        } else {
          lam_hi = mid;
          r_hi = r;
        }
      }
    }
  }

  SSIEstimate est = detail::assemble_estimate(prob, ws, best.u, best.penalty, best.resid);
  est.status = best.feasible ? SolveStatus::ok : SolveStatus::infeasible_epsilon;
  return est;
}

/// Admissible stubborn columns per normal row, block-local indices.
inline std::vector<std::vector<int>> support_rows(const SocialGraph& g) {
  std::vector<std::vector<int>> sup(static_cast<std::size_t>(g.n_normal()));
  for (auto [i, s] : g.support_B) sup[static_cast<std::size_t>(i - g.n_stubborn)].push_back(s);
  for (auto& v : sup) std::sort(v.begin(), v.end());
  return sup;
}

} // namespace trustnet

#endif
