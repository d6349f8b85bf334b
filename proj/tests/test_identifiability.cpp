#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "trustnet/identifiability.hpp"
#include "trustnet/io.hpp"

using namespace trustnet;

namespace {

IdentifiabilityParams params(int n_s, int d = 8, double alpha = 0.20, int n_normal = 50) {
  IdentifiabilityParams p;
  p.n = n_normal + n_s;
  p.n_s = n_s;
  p.d = d;
  p.alpha = alpha;
  p.b_min = 0.1;
  p.b_max = 0.2;
  return p;
}

} // namespace

TEST_CASE("binary entropy endpoints, symmetry, and known values") {
  CHECK(binary_entropy(0.0) == 0.0);
  CHECK(binary_entropy(1.0) == 0.0);
  CHECK(binary_entropy(0.5) == Catch::Approx(0.69314718055994531).epsilon(1e-15));
  CHECK(binary_entropy(0.11) == Catch::Approx(0.34651533691866615).epsilon(1e-14));
  for (double x : {0.03, 0.2, 0.41}) {
    CHECK(binary_entropy(x) == Catch::Approx(binary_entropy(1.0 - x)).epsilon(1e-14));
    // concave: strictly above the chord through the endpoints
    CHECK(binary_entropy(x) > 0.0);
    CHECK(binary_entropy(x) < binary_entropy(0.5));
  }
  CHECK_THROWS_AS(binary_entropy(-0.01), std::invalid_argument);
  CHECK_THROWS_AS(binary_entropy(1.01), std::invalid_argument);
}

TEST_CASE("degree condition flips at the documented population split") {
  // fifty normal agents, degree 8, alpha 0.20: the threshold sits between
  // 37 and 38 stubborn agents
  const ConditionResult at38 = check_degree_condition(params(38));
  CHECK(at38.satisfied);
  CHECK(at38.margin == Catch::Approx(8.0 - 7.8587803765866341).epsilon(1e-9));

  const ConditionResult at37 = check_degree_condition(params(37));
  CHECK_FALSE(at37.satisfied);
  CHECK(at37.margin == Catch::Approx(8.0 - 8.0938066940687578).epsilon(1e-9));
}

TEST_CASE("degrees of four or less never satisfy the condition") {
  for (int n_s : {38, 60, 90}) {
    const ConditionResult r = check_degree_condition(params(n_s, 4));
    CHECK_FALSE(r.satisfied);
    CHECK(r.margin <= 0.0);
  }
}

TEST_CASE("a stubborn fraction at or below alpha is flagged unsatisfiable") {
  // beta' = 0.22 - 0.08 = 0.14 <= alpha = 0.20
  const ConditionResult r = check_degree_condition(params(22, 8, 0.20, 78));
  CHECK_FALSE(r.satisfied);
  CHECK(std::isinf(r.margin));
  CHECK(r.margin < 0.0);
}

TEST_CASE("the condition does not depend on the entropy base") {
  const IdentifiabilityParams p = params(38);
  const double a = p.alpha;
  const double bp = p.beta_prime();
  const auto h2 = [](double x) {
    double h = 0.0;
    if (x > 0.0) h -= x * std::log2(x);
    if (x < 1.0) h -= (1.0 - x) * std::log2(1.0 - x);
    return h;
  };
  const double rhs_base2 = std::max(4.0, 1.0 + (h2(a) + bp * h2(a / bp)) / (a * std::log2(bp / a)));
  const double margin_base2 = p.d - rhs_base2;
  CHECK(check_degree_condition(p).margin == Catch::Approx(margin_base2).epsilon(1e-12));
}

TEST_CASE("magnitude condition margin is the literal left-hand side") {
  IdentifiabilityParams p = params(38);
  p.b_min = 0.1;
  p.b_max = 0.2;  // 0.1 * 13 - 1 - 0.4 = -0.1
  ConditionResult r = check_magnitude_condition(p);
  CHECK_FALSE(r.satisfied);
  CHECK(r.margin == Catch::Approx(-0.1).margin(1e-12));

  p.b_min = 0.2;
  p.b_max = 0.3;  // 0.2 * 13 - 1 - 0.6 = 1.0
  r = check_magnitude_condition(p);
  CHECK(r.satisfied);
  CHECK(r.margin == Catch::Approx(1.0).epsilon(1e-12));

  p.b_min = 0.4;
  p.b_max = 0.3;
  CHECK_THROWS_AS(check_magnitude_condition(p), std::invalid_argument);
}

TEST_CASE("smallest passing stubborn fraction matches independent bisection") {
  CHECK(min_stubborn_fraction(5, 0.20, 1000) == Catch::Approx(0.60869724195019830).margin(2e-6));
  CHECK(min_stubborn_fraction(8, 0.20, 1000) == Catch::Approx(0.34426246039206522).margin(2e-6));
  CHECK(min_stubborn_fraction(15, 0.20, 1000) == Catch::Approx(0.26507310965786124).margin(2e-6));
  // vanishing density of normal-to-normal ties: the bound collapses toward d/n
  CHECK(min_stubborn_fraction(8, 1e-4, 1000) == Catch::Approx(0.0086389138518599649).margin(2e-6));
}

TEST_CASE("required fraction shrinks as the stubborn degree grows") {
  double prev = 1.0;
  for (int d = 5; d <= 15; ++d) {
    const double f = min_stubborn_fraction(d, 0.20, 1000);
    CHECK(f <= prev + 1e-12);
    prev = f;
  }
}

TEST_CASE("fraction search rejects impossible inputs") {
  CHECK_THROWS_AS(min_stubborn_fraction(4, 0.20, 1000), std::invalid_argument);
  CHECK_THROWS_AS(min_stubborn_fraction(8, 0.0, 1000), std::invalid_argument);
  CHECK_THROWS_AS(min_stubborn_fraction(8, 0.20, 8), std::invalid_argument);
  // even beta -> 1 fails here, so there is nothing to return
  CHECK_THROWS_AS(min_stubborn_fraction(5, 0.60, 1000), std::domain_error);
}

TEST_CASE("parameter validation catches degenerate populations") {
  IdentifiabilityParams p = params(38);
  p.n_s = 0;
  CHECK_THROWS(check_degree_condition(p));
  p = params(38);
  p.n_s = p.n;
  CHECK_THROWS(check_degree_condition(p));
  p = params(38);
  p.d = 1;
  CHECK_THROWS(check_degree_condition(p));
  p = params(38);
  p.alpha = 0.0;
  CHECK_THROWS(check_degree_condition(p));
}

TEST_CASE("report is machine-readable and self-consistent") {
  const IdentifiabilityParams p = params(38);
  const auto kv = parse_config(identifiability_report(p));
  CHECK(config_long(kv, "n", -1) == 88);
  CHECK(config_long(kv, "n_stubborn", -1) == 38);
  CHECK(config_long(kv, "degree", -1) == 8);
  CHECK(config_string(kv, "degree_condition", "") == "true");
  CHECK(config_double(kv, "degree_margin", 0.0) ==
        Catch::Approx(check_degree_condition(p).margin).epsilon(1e-15));
  CHECK(config_string(kv, "magnitude_condition", "") == "false");
  CHECK(config_double(kv, "beta", 0.0) == Catch::Approx(38.0 / 88.0).epsilon(1e-15));
  CHECK(config_double(kv, "beta_prime", 0.0) == Catch::Approx(38.0 / 88.0 - 8.0 / 88.0).epsilon(1e-15));
  CHECK(config_double(kv, "delta", 0.0) == Catch::Approx(1.0 - 1.0 / 7.0).epsilon(1e-15));
  CHECK(config_double(kv, "beta_bound", 0.0) > 0.0);

  // an unattainable bound is spelled out rather than faked with a number
  IdentifiabilityParams q = params(38, 5, 0.60, 962);
  const auto kv2 = parse_config(identifiability_report(q));
  CHECK(config_string(kv2, "beta_bound", "") == "unattainable");
}
