#pragma once

// Synthetic regression scenarios with closed-form conditional densities,
// and the density level-set ("Neyman-Pearson") oracle built on them.

#include "cti/common.hpp"

#include <string>
#include <utility>
#include <vector>

namespace cti {

enum class ScenarioFamily { HeteroGauss, Bimodal, LogNormal, Uniform };

/// One-dimensional feature x ~ U[0, 1]; Y | x from the family below.
///
///   hetero-gauss  N(mean_slope * x, (sd_base + sd_slope * x)^2)
///   bimodal       0.5 N(-mode, sd^2) + 0.5 N(mode, sd^2)   (x ignored)
///   lognormal     exp(N(mean_slope * x, (sd_base + sd_slope * x)^2))
///   uniform       U(0, 1)                                   (x ignored)
struct Scenario {
  ScenarioFamily family = ScenarioFamily::HeteroGauss;
  double mean_slope = 1.0;
  double sd_base = 1.0;
  double sd_slope = 1.0;
  double mode = 3.0;
  double mode_sd = 0.5;

  static Scenario hetero_gauss() { return {}; }
  static Scenario standard_normal() {
    Scenario s;
    s.mean_slope = 0.0;
    s.sd_slope = 0.0;
    return s;
  }
  static Scenario bimodal(double mode = 3.0, double sd = 0.5) {
    Scenario s;
    s.family = ScenarioFamily::Bimodal;
    s.mode = mode;
    s.mode_sd = sd;
    return s;
  }
  static Scenario lognormal() {
    Scenario s;
    s.family = ScenarioFamily::LogNormal;
    s.mean_slope = 0.5;
    s.sd_base = 0.25;
    s.sd_slope = 0.5;
    return s;
  }
  static Scenario uniform() {
    Scenario s;
    s.family = ScenarioFamily::Uniform;
    return s;
  }

  /// "hetero-gauss", "bimodal", "lognormal", "uniform"; throws InvalidArgument.
  static Scenario from_name(const std::string& name);
  std::string name() const;
};

double normal_pdf(double z);
double normal_cdf(double z);
double normal_quantile(double p);

Dataset generate(const Scenario& s, Index n, std::uint64_t seed);

double true_density(const Scenario& s, double x, double y);
double true_cdf(const Scenario& s, double x, double y);
double true_quantile(const Scenario& s, double x, double tau);

/// Support window [lo, hi] used for level-set search at x.
std::pair<double, double> support_window(const Scenario& s, double x,
                                         double window_sds = 6.0);

struct GridSpec {
  int points = 2048;
  double window_sds = 6.0;
};

/// sup{t : P(f(Y|X) >= t) >= 1 - alpha} from mc_n Monte-Carlo draws, by
/// bisection until the bracket is narrower than 1e-4 * max density.
/// Throws NumericError if 100 iterations do not suffice.
double oracle_threshold(const Scenario& s, double alpha, Index mc_n,
                        std::uint64_t seed);

struct OracleSet {
  double t_prime = 0.0;
  std::vector<std::pair<double, double>> components;  // at one x
  double length = 0.0;
};

/// Components of {y : f(y|x) >= t'} by grid scan plus bisection at crossings.
OracleSet oracle_set(const Scenario& s, double x, double t_prime,
                     const GridSpec& grid = {});

struct OracleLength {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Expected oracle set length averaged over n_x sampled features.
OracleLength oracle_expected_length(const Scenario& s, double t_prime,
                                    Index n_x, std::uint64_t seed,
                                    const GridSpec& grid = {});

/// Bounds on a Lipschitz(L) function whose integral over [a, b] is c:
/// c/(b-a) -+ L(b-a)/2.
std::pair<double, double> lipschitz_bound(double a, double b, double L, double c);

/// Exact quantile function of the scenario on a level grid, for injection as
/// an external model.
Eigen::VectorXd true_quantile_grid(const Scenario& s, double x,
                                   const Eigen::VectorXd& levels);

}  // namespace cti
