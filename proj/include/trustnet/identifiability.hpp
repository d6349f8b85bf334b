#ifndef TRUSTNET_IDENTIFIABILITY_HPP
#define TRUSTNET_IDENTIFIABILITY_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "trustnet/format.hpp"

namespace trustnet {

/// Placement parameters entering the recoverability conditions.
/// alpha bounds the per-row count of nonzero normal-to-normal trusts
/// (at most alpha*n/2); b_min/b_max are the extreme nonzero entries of
/// the relative stubborn-trust block.
struct IdentifiabilityParams {
  int n = 0;
  int n_s = 0;
  int d = 0;  // stubborn trusts per normal agent
  double alpha = 0.0;
  double b_min = 0.0;
  double b_max = 0.0;

  double beta() const { return static_cast<double>(n_s) / static_cast<double>(n); }
  double beta_prime() const { return beta() - static_cast<double>(d) / static_cast<double>(n); }
  // appears alongside the conditions in reports; no check consumes it
  double delta() const { return 1.0 - 1.0 / static_cast<double>(d - 1); }

  void validate() const {
    if (n <= 0 || n_s <= 0 || n_s >= n) throw std::invalid_argument("IdentifiabilityParams: need 0 < n_s < n");
    if (d < 2) throw std::invalid_argument("IdentifiabilityParams: degree must be at least 2");
    if (!(alpha > 0.0)) throw std::invalid_argument("IdentifiabilityParams: alpha must be positive");
    if (b_min > b_max) throw std::invalid_argument("IdentifiabilityParams: b_min exceeds b_max");
  }
};

/// Binary entropy in nats, with 0 log 0 = 0. The condition below uses an
/// entropy-to-log ratio, so the base choice cancels.
inline double binary_entropy(double x) {
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("binary_entropy: argument outside [0,1]");
  double h = 0.0;
  if (x > 0.0) h -= x * std::log(x);
  if (x < 1.0) h -= (1.0 - x) * std::log(1.0 - x);
  return h;
}

struct ConditionResult {
  bool satisfied = false;
  double margin = 0.0;
};

/// Degree condition: d must strictly exceed
/// max{4, 1 + (H(alpha) + beta' H(alpha/beta')) / (alpha ln(beta'/alpha))}.
/// margin = d - rhs. When beta' <= alpha the ratio is undefined and the
/// condition cannot hold for any d; reported as not satisfiable with an
/// infinite deficit rather than thrown, since callers sweep parameter grids.
inline ConditionResult check_degree_condition(const IdentifiabilityParams& p) {
  p.validate();
  const double a = p.alpha;
  const double bp = p.beta_prime();
  if (bp <= a) return {false, -std::numeric_limits<double>::infinity()};
  const double rhs =
      std::max(4.0, 1.0 + (binary_entropy(a) + bp * binary_entropy(a / bp)) / (a * std::log(bp / a)));
  const double margin = static_cast<double>(p.d) - rhs;
  return {margin > 0.0, margin};
}

/// Magnitude condition: b_min (2d - 3) - 1 - 2 b_max > 0.
/// margin is the left-hand side itself.
inline ConditionResult check_magnitude_condition(const IdentifiabilityParams& p) {
  p.validate();
  const double lhs = p.b_min * (2.0 * p.d - 3.0) - 1.0 - 2.0 * p.b_max;
  return {lhs > 0.0, lhs};
}

/// Smallest stubborn fraction beta in (alpha, 1) meeting the degree
/// condition at the given degree and population, bisected to 1e-6.
/// The returned value sits on the satisfied side of the boundary.
inline double min_stubborn_fraction(int d, double alpha, int n) {
  if (d < 5) throw std::invalid_argument("min_stubborn_fraction: degree below 5 can never pass");
  if (!(alpha > 0.0)) throw std::invalid_argument("min_stubborn_fraction: alpha must be positive");
  if (n <= d) throw std::invalid_argument("min_stubborn_fraction: population must exceed degree");

  const auto satisfied_at = [&](double beta) {
    const double bp = beta - static_cast<double>(d) / static_cast<double>(n);
    if (bp <= alpha) return false;
    const double rhs =
        std::max(4.0, 1.0 + (binary_entropy(alpha) + bp * binary_entropy(alpha / bp)) /
                                (alpha * std::log(bp / alpha)));
    return static_cast<double>(d) > rhs;
  };

  double lo = alpha + static_cast<double>(d) / static_cast<double>(n);  // vacuous region below
  double hi = 1.0;
  if (lo >= hi || !satisfied_at(hi)) throw std::domain_error("min_stubborn_fraction: no feasible fraction below one");
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    if (satisfied_at(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

/// Key-value summary of both conditions and the derived placement bound.
inline std::string identifiability_report(const IdentifiabilityParams& p) {
  p.validate();
  const ConditionResult deg = check_degree_condition(p);
  const ConditionResult mag = check_magnitude_condition(p);
  std::string out;
  out += "n = " + format_long(p.n) + "\n";
  out += "n_stubborn = " + format_long(p.n_s) + "\n";
  out += "degree = " + format_long(p.d) + "\n";
  out += "alpha = " + format_double(p.alpha) + "\n";
  out += "b_min = " + format_double(p.b_min) + "\n";
  out += "b_max = " + format_double(p.b_max) + "\n";
  out += "beta = " + format_double(p.beta()) + "\n";
  out += "beta_prime = " + format_double(p.beta_prime()) + "\n";
  out += "delta = " + format_double(p.delta()) + "\n";
  out += std::string("degree_condition = ") + (deg.satisfied ? "true" : "false") + "\n";
  out += "degree_margin = " + format_double(deg.margin) + "\n";
  out += std::string("magnitude_condition = ") + (mag.satisfied ? "true" : "false") + "\n";
  out += "magnitude_margin = " + format_double(mag.margin) + "\n";
  if (p.d >= 5) {
    try {
      out += "beta_bound = " + format_double(min_stubborn_fraction(p.d, p.alpha, p.n)) + "\n";
    } catch (const std::domain_error&) {
      out += "beta_bound = unattainable\n";
    }
  } else {
    out += "beta_bound = unattainable\n";
  }
  return out;
}

} // namespace trustnet

#endif
