#include "cti/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>

namespace cti {
namespace {

double cond_mean(const Scenario& s, double x) { return s.mean_slope * x; }
double cond_sd(const Scenario& s, double x) { return s.sd_base + s.sd_slope * x; }

// Points where the density at x is maximal; used to detect level sets that
// fall between grid points.
std::vector<double> peak_locations(const Scenario& s, double x) {
  switch (s.family) {
    case ScenarioFamily::HeteroGauss: return {cond_mean(s, x)};
    case ScenarioFamily::Bimodal: return {-s.mode, s.mode};
    case ScenarioFamily::LogNormal: {
      const double sd = cond_sd(s, x);
      return {std::exp(cond_mean(s, x) - sd * sd)};
    }
    case ScenarioFamily::Uniform: return {0.5};
  }
  return {};
}

// Boundary of a level set between an outside point and an inside point.
double refine(const std::function<bool(double)>& inside, double out, double in) {
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (out + in);
    if (mid == out || mid == in) break;
    (inside(mid) ? in : out) = mid;
  }
  return in;
}

}  // namespace

Scenario Scenario::from_name(const std::string& name) {
  if (name == "hetero-gauss") return hetero_gauss();
  if (name == "bimodal") return bimodal();
  if (name == "lognormal") return lognormal();
  if (name == "uniform") return uniform();
  if (name == "standard-normal") return standard_normal();
  throw InvalidArgument("unknown scenario '" + name + "'");
}

std::string Scenario::name() const {
  switch (family) {
    case ScenarioFamily::HeteroGauss: return "hetero-gauss";
    case ScenarioFamily::Bimodal: return "bimodal";
    case ScenarioFamily::LogNormal: return "lognormal";
    case ScenarioFamily::Uniform: return "uniform";
  }
  return "unknown";
}

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Acklam's rational approximation, polished with one Halley step.
double normal_quantile(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("normal_quantile: p outside [0, 1]");
  if (p == 0.0) return -std::numeric_limits<double>::infinity();
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

Dataset generate(const Scenario& s, Index n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("generate: n must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Dataset d;
  d.X.resize(n, 1);
  d.y.resize(n);
  d.feature_names = {"x"};
  d.provenance = "scenario:" + s.name();
  for (Index i = 0; i < n; ++i) {
    const double x = unif(rng);
    double y = 0.0;
    switch (s.family) {
      case ScenarioFamily::HeteroGauss:
        y = cond_mean(s, x) + cond_sd(s, x) * normal(rng);
        break;
      case ScenarioFamily::Bimodal: {
        const double sign = unif(rng) < 0.5 ? -1.0 : 1.0;
        y = sign * s.mode + s.mode_sd * normal(rng);
        break;
      }
      case ScenarioFamily::LogNormal:
        y = std::exp(cond_mean(s, x) + cond_sd(s, x) * normal(rng));
        break;
      case ScenarioFamily::Uniform:
        y = unif(rng);
        break;
    }
    d.X(i, 0) = x;
    d.y(i) = y;
  }
  return d;
}

double true_density(const Scenario& s, double x, double y) {
  switch (s.family) {
    case ScenarioFamily::HeteroGauss: {
      const double sd = cond_sd(s, x);
      return normal_pdf((y - cond_mean(s, x)) / sd) / sd;
    }
    case ScenarioFamily::Bimodal:
      return 0.5 * (normal_pdf((y + s.mode) / s.mode_sd) +
                    normal_pdf((y - s.mode) / s.mode_sd)) /
             s.mode_sd;
    case ScenarioFamily::LogNormal: {
      if (y <= 0.0) return 0.0;
      const double sd = cond_sd(s, x);
      return normal_pdf((std::log(y) - cond_mean(s, x)) / sd) / (sd * y);
    }
    case ScenarioFamily::Uniform:
      return (y >= 0.0 && y <= 1.0) ? 1.0 : 0.0;
  }
  return 0.0;
}

double true_cdf(const Scenario& s, double x, double y) {
  switch (s.family) {
    case ScenarioFamily::HeteroGauss:
      return normal_cdf((y - cond_mean(s, x)) / cond_sd(s, x));
    case ScenarioFamily::Bimodal:
      return 0.5 * (normal_cdf((y + s.mode) / s.mode_sd) +
                    normal_cdf((y - s.mode) / s.mode_sd));
    case ScenarioFamily::LogNormal:
      if (y <= 0.0) return 0.0;
      return normal_cdf((std::log(y) - cond_mean(s, x)) / cond_sd(s, x));
    case ScenarioFamily::Uniform:
      return std::clamp(y, 0.0, 1.0);
  }
  return 0.0;
}

double true_quantile(const Scenario& s, double x, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidArgument("true_quantile: tau outside [0, 1]");
  switch (s.family) {
    case ScenarioFamily::HeteroGauss:
      return cond_mean(s, x) + cond_sd(s, x) * normal_quantile(tau);
    case ScenarioFamily::LogNormal:
      return std::exp(cond_mean(s, x) + cond_sd(s, x) * normal_quantile(tau));
    case ScenarioFamily::Uniform:
      return tau;
    case ScenarioFamily::Bimodal: {
      double lo = -s.mode - 40.0 * s.mode_sd, hi = s.mode + 40.0 * s.mode_sd;
      for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (true_cdf(s, x, mid) < tau ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
  }
  return 0.0;
}

Eigen::VectorXd true_quantile_grid(const Scenario& s, double x,
                                   const Eigen::VectorXd& levels) {
  Eigen::VectorXd q(levels.size());
  for (Index k = 0; k < levels.size(); ++k) q(k) = true_quantile(s, x, levels(k));
  return q;
}

std::pair<double, double> support_window(const Scenario& s, double x,
                                         double window_sds) {
  switch (s.family) {
    case ScenarioFamily::HeteroGauss: {
      const double m = cond_mean(s, x), sd = cond_sd(s, x);
      return {m - window_sds * sd, m + window_sds * sd};
    }
    case ScenarioFamily::Bimodal:
      return {-s.mode - window_sds * s.mode_sd, s.mode + window_sds * s.mode_sd};
    case ScenarioFamily::LogNormal: {
      const double m = cond_mean(s, x), sd = cond_sd(s, x);
      return {std::exp(m - window_sds * sd), std::exp(m + window_sds * sd)};
    }
    case ScenarioFamily::Uniform: {
      const double pad = window_sds * std::sqrt(1.0 / 12.0) - 0.5;
      return {-std::max(pad, 0.05), 1.0 + std::max(pad, 0.05)};
    }
  }
  return {0.0, 0.0};
}

double oracle_threshold(const Scenario& s, double alpha, Index mc_n,
                        std::uint64_t seed) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("oracle_threshold: alpha outside (0, 1)");
  if (mc_n < 10000) throw InvalidArgument("oracle_threshold: need at least 1e4 draws");
  const Dataset draws = generate(s, mc_n, seed);
  std::vector<double> f(static_cast<std::size_t>(mc_n));
  for (Index i = 0; i < mc_n; ++i)
    f[static_cast<std::size_t>(i)] = true_density(s, draws.X(i, 0), draws.y(i));
  std::sort(f.begin(), f.end());
  const double fmax = f.back();

  auto mass_above = [&](double t) {
    const auto first = std::lower_bound(f.begin(), f.end(), t);
    return static_cast<double>(f.end() - first) / static_cast<double>(mc_n);
  };
  const double target = 1.0 - alpha;
  double lo = 0.0;  // mass_above(lo) >= target
  double hi = std::nextafter(fmax, std::numeric_limits<double>::infinity());
  const double width = 1e-4 * fmax;
  int iterations = 0;
  while (hi - lo >= width) {
    if (++iterations > 100) throw NumericError("oracle_threshold: bisection did not converge");
    const double mid = 0.5 * (lo + hi);
    (mass_above(mid) >= target ? lo : hi) = mid;
  }
  return lo;
}

OracleSet oracle_set(const Scenario& s, double x, double t_prime,
                     const GridSpec& grid) {
  if (grid.points < 3) throw NumericError("oracle_set: grid needs at least 3 points");
  const auto [lo, hi] = support_window(s, x, grid.window_sds);
  auto inside = [&](double y) { return true_density(s, x, y) >= t_prime; };

  OracleSet out;
  out.t_prime = t_prime;
  const double step = (hi - lo) / (grid.points - 1);
  bool prev_in = false;
  double prev_y = lo, start = lo;
  for (int i = 0; i < grid.points; ++i) {
    const double y = lo + step * i;
    const bool in = inside(y);
    if (in && !prev_in) start = i == 0 ? y : refine(inside, prev_y, y);
    if (!in && prev_in) out.components.emplace_back(start, refine(inside, y, prev_y));
    prev_in = in;
    prev_y = y;
  }
  if (prev_in) out.components.emplace_back(start, hi);

  if (out.components.empty()) {
    for (double peak : peak_locations(s, x))
      if (inside(peak))
        throw NumericError("oracle_set: level set falls between grid points; refine the grid");
  }
  for (const auto& [a, b] : out.components) out.length += b - a;
  return out;
}

OracleLength oracle_expected_length(const Scenario& s, double t_prime, Index n_x,
                                    std::uint64_t seed, const GridSpec& grid) {
  if (n_x < 2) throw InvalidArgument("oracle_expected_length: need at least 2 draws");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double sum = 0.0, sumsq = 0.0;
  for (Index i = 0; i < n_x; ++i) {
    const double len = oracle_set(s, unif(rng), t_prime, grid).length;
    sum += len;
    sumsq += len * len;
  }
  const double n = static_cast<double>(n_x);
  OracleLength out;
  out.mean = sum / n;
  const double var = std::max(0.0, (sumsq - n * out.mean * out.mean) / (n - 1.0));
  out.std_error = std::sqrt(var / n);
  return out;
}

std::pair<double, double> lipschitz_bound(double a, double b, double L, double c) {
  if (!(b > a)) throw InvalidArgument("lipschitz_bound: need b > a");
  if (L < 0.0) throw InvalidArgument("lipschitz_bound: need L >= 0");
  const double w = b - a;
  return {c / w - L * w / 2.0, c / w + L * w / 2.0};
}

}  // namespace cti
