#include "gp2f/theory.hpp"

#include <algorithm>
#include <cmath>

#include "gp2f/error.hpp"
#include "gp2f/rng.hpp"

namespace gp2f::theory {

bool ErrorStats::valid(std::string* why) const {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (!std::isfinite(sigma_g2) || !std::isfinite(sigma_a2) || !std::isfinite(rho))
    return fail("bounded second moments violated: non-finite statistic");
  if (!(sigma_g2 > 0.0))
    return fail("sigma_g^2 > 0 violated (sigma_g^2=" + std::to_string(sigma_g2) + ")");
  if (!(sigma_a2 > 0.0))
    return fail("sigma_a^2 > 0 violated (sigma_a^2=" + std::to_string(sigma_a2) + ")");
  if (!(rho < std::min(sigma_g2, sigma_a2)))
    return fail("rho < min(sigma_g^2, sigma_a^2) violated (rho=" + std::to_string(rho) +
                ", min=" + std::to_string(std::min(sigma_g2, sigma_a2)) + ")");
  // implied by the previous condition; kept because it is assumed separately
  if (!(curvature() > 0.0))
    return fail("sigma_g^2 + sigma_a^2 - 2*rho > 0 violated (value=" +
                std::to_string(curvature()) + ")");
  return true;
}

void ErrorStats::validate() const {
  std::string why;
  if (!valid(&why)) throw AssumptionError("error-model assumption violated: " + why);
}

double mse_curve(const ErrorStats& stats, double lambda) {
  stats.validate();
  const double a = stats.curvature();
  const double b = 2.0 * (stats.rho - stats.sigma_a2);
  const double c = stats.sigma_a2;
  return a * lambda * lambda + b * lambda + c;
}

double optimal_lambda(const ErrorStats& stats) {
  stats.validate();
  return (stats.sigma_a2 - stats.rho) / stats.curvature();
}

double mse_at_optimum(const ErrorStats& stats) {
  stats.validate();
  const double a = stats.curvature();
  const double form_a = stats.sigma_a2 - (stats.sigma_a2 - stats.rho) *
                                             (stats.sigma_a2 - stats.rho) / a;
  const double form_g = stats.sigma_g2 - (stats.sigma_g2 - stats.rho) *
                                             (stats.sigma_g2 - stats.rho) / a;
  const double tol = 1e-12 * std::max({1.0, std::fabs(form_a), std::fabs(form_g)});
  if (std::fabs(form_a - form_g) > tol)
    throw NumericError("mse_at_optimum: the two closed forms disagree");
  return form_a;
}

void NoiseModel::validate() const {
  stats.validate();
  if (dim < 1) throw ConfigError("noise model: dim must be >= 1");
  if (stats.rho * stats.rho > stats.sigma_g2 * stats.sigma_a2)
    throw AssumptionError(
        "noise model: rho^2 <= sigma_g^2 * sigma_a^2 violated; no random-vector pair "
        "realizes these statistics");
}

void NoiseModel::sample(Rng& rng, double* eps_g, double* eps_a) const {
  const double d = static_cast<double>(dim);
  const double sg = std::sqrt(stats.sigma_g2);
  const double cu = stats.rho / (sg * std::sqrt(d));
  const double cv = std::sqrt((stats.sigma_a2 - stats.rho * stats.rho / stats.sigma_g2) / d);
  const double gu = sg / std::sqrt(d);
  for (int i = 0; i < dim; ++i) {
    const double u = rng.next_normal();
    const double v = rng.next_normal();
    eps_g[i] = gu * u;
    eps_a[i] = cu * u + cv * v;
  }
}

MonteCarloMse monte_carlo_mse(const NoiseModel& model, double lambda, long n_samples) {
  model.validate();
  if (n_samples < 1000) throw ConfigError("monte_carlo_mse: n_samples must be >= 1000");
  Rng rng = Rng::derive(model.seed, {Rng::tag("mc-mse"), static_cast<std::uint64_t>(
                                                             std::llround(lambda * 1e9))});
  std::vector<double> eg(static_cast<std::size_t>(model.dim));
  std::vector<double> ea(static_cast<std::size_t>(model.dim));
  double sum = 0.0, sumsq = 0.0;
  for (long s = 0; s < n_samples; ++s) {
    model.sample(rng, eg.data(), ea.data());
    double sq = 0.0;
    for (int i = 0; i < model.dim; ++i) {
      const double e = lambda * eg[static_cast<std::size_t>(i)] +
                       (1.0 - lambda) * ea[static_cast<std::size_t>(i)];
      sq += e * e;
    }
    sum += sq;
    sumsq += sq * sq;
  }
  MonteCarloMse out;
  out.n = n_samples;
  out.mean = sum / static_cast<double>(n_samples);
  const double var =
      std::max(0.0, sumsq / static_cast<double>(n_samples) - out.mean * out.mean);
  out.stderr_ = std::sqrt(var / static_cast<double>(n_samples));
  return out;
}

ImprovementReport verify_improvement(const ErrorStats& stats, int dim, std::uint64_t seed,
                                     long n_samples) {
  ImprovementReport rep;
  std::string why;
  if (!stats.valid(&why)) {
    rep.applicable = false;
    rep.reason = "assumptions violated, theorem inapplicable: " + why;
    return rep;
  }
  NoiseModel model{dim, stats, seed};
  model.validate();
  if (n_samples < 1000) throw ConfigError("verify_improvement: n_samples must be >= 1000");
  rep.applicable = true;
  rep.lambda_star = optimal_lambda(stats);
  rep.analytic_at_star = mse_at_optimum(stats);

  // Paired draws: each sample evaluates the fused estimator and both
  // endpoints on the same noise, so the improvement margin is measured on
  // the paired differences rather than on independent estimates.
  Rng rng = Rng::derive(seed, {Rng::tag("mc-improvement")});
  std::vector<double> eg(static_cast<std::size_t>(dim));
  std::vector<double> ea(static_cast<std::size_t>(dim));
  const double lam = rep.lambda_star;
  double s_star = 0, ss_star = 0, s0 = 0, ss0 = 0, s1 = 0, ss1 = 0;
  double d0 = 0, dd0 = 0, d1 = 0, dd1 = 0;
  for (long s = 0; s < n_samples; ++s) {
    model.sample(rng, eg.data(), ea.data());
    double q_star = 0, q0 = 0, q1 = 0;
    for (int i = 0; i < dim; ++i) {
      const double g = eg[static_cast<std::size_t>(i)];
      const double a = ea[static_cast<std::size_t>(i)];
      const double f = lam * g + (1.0 - lam) * a;
      q_star += f * f;
      q0 += a * a;  // λ=0: adapted branch alone
      q1 += g * g;  // λ=1: frozen branch alone
    }
    s_star += q_star;
    ss_star += q_star * q_star;
    s0 += q0;
    ss0 += q0 * q0;
    s1 += q1;
    ss1 += q1 * q1;
    const double diff0 = q_star - q0, diff1 = q_star - q1;
    d0 += diff0;
    dd0 += diff0 * diff0;
    d1 += diff1;
    dd1 += diff1 * diff1;
  }
  const double n = static_cast<double>(n_samples);
  auto mc = [&](double sum, double sumsq) {
    MonteCarloMse m;
    m.n = n_samples;
    m.mean = sum / n;
    m.stderr_ = std::sqrt(std::max(0.0, sumsq / n - m.mean * m.mean) / n);
    return m;
  };
  rep.at_star = mc(s_star, ss_star);
  rep.at_zero = mc(s0, ss0);
  rep.at_one = mc(s1, ss1);
  const MonteCarloMse diff_zero = mc(d0, dd0);
  const MonteCarloMse diff_one = mc(d1, dd1);
  rep.verdict = diff_zero.mean + 4.0 * diff_zero.stderr_ < 0.0 &&
                diff_one.mean + 4.0 * diff_one.stderr_ < 0.0;
  return rep;
}

MarginProblem generate_margin_problem(int num_classes, int dim, int num_points,
                                      double b_norm, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("margin problem: need at least 2 classes");
  if (dim < 1 || num_points < 1) throw ConfigError("margin problem: bad dimensions");
  if (!(b_norm > 0.0)) throw ConfigError("margin problem: b_norm must be positive");

  Rng rng = Rng::derive(seed, {Rng::tag("margin-problem")});
  MarginProblem p;
  p.num_classes = num_classes;
  p.dim = dim;
  p.b_norm = b_norm;
  p.w = DenseMatrix(num_classes, dim);
  for (int c = 0; c < num_classes; ++c) {
    double norm = 0.0;
    for (int j = 0; j < dim; ++j) {
      p.w.at(c, j) = rng.next_normal();
      norm += p.w.at(c, j) * p.w.at(c, j);
    }
    norm = std::sqrt(norm);
    for (int j = 0; j < dim; ++j) p.w.at(c, j) = p.w.at(c, j) / norm * b_norm;
  }

  p.z = DenseMatrix(num_points, dim);
  p.gamma = std::numeric_limits<double>::infinity();
  int accepted = 0;
  long attempts = 0;
  while (accepted < num_points) {
    if (++attempts > 1000L * num_points)
      throw NumericError("margin problem: rejection sampling failed to find margins");
    std::vector<double> z(static_cast<std::size_t>(dim));
    for (auto& v : z) v = 2.0 * rng.next_normal();
    double best = -1e300, second = -1e300;
    int best_c = 0;
    for (int c = 0; c < num_classes; ++c) {
      double s = 0.0;
      for (int j = 0; j < dim; ++j) s += p.w.at(c, j) * z[static_cast<std::size_t>(j)];
      if (s > best) {
        second = best;
        best = s;
        best_c = c;
      } else if (s > second) {
        second = s;
      }
    }
    const double margin = best - second;
    if (margin <= 1e-6) continue;  // reject near-ties
    for (int j = 0; j < dim; ++j) p.z.at(accepted, j) = z[static_cast<std::size_t>(j)];
    p.labels.push_back(best_c);
    p.gamma = std::min(p.gamma, margin);
    ++accepted;
  }
  return p;
}

BoundResult misclassification_bound(const MarginProblem& problem, double mse) {
  if (!(problem.gamma > 0.0))
    throw AssumptionError("misclassification bound: margin gamma must be positive");
  if (!(problem.b_norm > 0.0))
    throw AssumptionError("misclassification bound: classifier norm bound must be positive");
  if (problem.num_classes < 2)
    throw AssumptionError("misclassification bound: needs at least two classes");
  BoundResult r;
  r.unclamped = 4.0 * (problem.num_classes - 1) * problem.b_norm * problem.b_norm * mse /
                (problem.gamma * problem.gamma);
  r.clamped = std::clamp(r.unclamped, 0.0, 1.0);
  return r;
}

double empirical_misclassification(const MarginProblem& problem, const NoiseModel& model,
                                   double lambda, long n_samples, std::uint64_t seed) {
  model.validate();
  if (model.dim != problem.dim)
    throw DimensionError("empirical_misclassification: noise dim != problem dim");
  Rng rng = Rng::derive(seed, {Rng::tag("mc-classify")});
  std::vector<double> eg(static_cast<std::size_t>(model.dim));
  std::vector<double> ea(static_cast<std::size_t>(model.dim));
  long errors = 0;
  const int m = problem.z.rows;
  for (long s = 0; s < n_samples; ++s) {
    const int zi = static_cast<int>(s % m);  // cycle through the latent points
    model.sample(rng, eg.data(), ea.data());
    int pred = 0;
    double best = -1e300;
    for (int c = 0; c < problem.num_classes; ++c) {
      double score = 0.0;
      for (int j = 0; j < model.dim; ++j) {
        const double zt = problem.z.at(zi, j) + lambda * eg[static_cast<std::size_t>(j)] +
                          (1.0 - lambda) * ea[static_cast<std::size_t>(j)];
        score += problem.w.at(c, j) * zt;
      }
      if (score > best) {
        best = score;
        pred = c;
      }
    }
    if (pred != problem.labels[static_cast<std::size_t>(zi)]) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(n_samples);
}

DiscrepancyStats branch_discrepancy_stats(const DenseMatrix& h_pre, const DenseMatrix& h_adp) {
  if (!h_pre.same_shape(h_adp))
    throw DimensionError("branch_discrepancy_stats: shape mismatch");
  DiscrepancyStats out;
  out.mean.assign(static_cast<std::size_t>(h_pre.cols), 0.0);
  for (int i = 0; i < h_pre.rows; ++i)
    for (int j = 0; j < h_pre.cols; ++j)
      out.mean[static_cast<std::size_t>(j)] += h_pre.at(i, j) - h_adp.at(i, j);
  double norm = 0.0;
  for (auto& v : out.mean) {
    v /= h_pre.rows;
    norm += v * v;
  }
  out.mean_norm = std::sqrt(norm);
  return out;
}

}  // namespace gp2f::theory
