#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gp2f/matrix.hpp"

namespace gp2f::theory {

// Second-moment statistics of the two branch errors: total variances and the
// cross-moment E⟨ε_g, ε_a⟩. Valid stats have positive variances, positive
// combined curvature A = σ_g² + σ_a² − 2ρ, and ρ below both variances.
struct ErrorStats {
  double sigma_g2 = 1.0;
  double sigma_a2 = 1.0;
  double rho = 0.0;

  double curvature() const { return sigma_g2 + sigma_a2 - 2.0 * rho; }
  bool valid(std::string* why = nullptr) const;
  void validate() const;  // AssumptionError quoting the violated condition
};

// MSE of the fused estimator: A·λ² + B·λ + C with A = σ_g²+σ_a²−2ρ,
// B = 2(ρ−σ_a²), C = σ_a². Endpoints: MSE(0)=σ_a² (adapted branch only),
// MSE(1)=σ_g² (frozen branch only).
double mse_curve(const ErrorStats& stats, double lambda);

// Unique minimizer λ* = (σ_a²−ρ) / (σ_g²+σ_a²−2ρ), strictly inside (0,1)
// for valid stats.
double optimal_lambda(const ErrorStats& stats);

// MSE(λ*) = σ_a² − (σ_a²−ρ)²/A, internally checked against the symmetric
// form σ_g² − (σ_g²−ρ)²/A.
double mse_at_optimum(const ErrorStats& stats);

// Gaussian noise pair with the prescribed second moments, built from two
// i.i.d. standard-normal d-vectors u, v:
//   ε_g = (σ_g/√d)·u,  ε_a = (ρ/(σ_g·√d))·u + √((σ_a²−ρ²/σ_g²)/d)·v.
// Requires ρ² ≤ σ_g²·σ_a² (otherwise no such pair of random vectors exists).
struct NoiseModel {
  int dim = 8;
  ErrorStats stats;
  std::uint64_t seed = 0;

  void validate() const;
  // Draws one (ε_g, ε_a) pair into preallocated buffers of length dim.
  void sample(Rng& rng, double* eps_g, double* eps_a) const;
};

struct MonteCarloMse {
  double mean = 0.0;
  double stderr_ = 0.0;
  long n = 0;
};

// Empirical E‖λ·ε_g + (1−λ)·ε_a‖² over n_samples draws, with standard error.
MonteCarloMse monte_carlo_mse(const NoiseModel& model, double lambda, long n_samples);

struct ImprovementReport {
  bool applicable = false;
  std::string reason;  // set when assumptions are violated
  double lambda_star = 0.0;
  double analytic_at_star = 0.0;
  MonteCarloMse at_star, at_zero, at_one;
  bool verdict = false;  // empirical strict improvement with 4·SE margin
};

// Monte Carlo confirmation of the strict-improvement theorem: the fused
// estimator at λ* beats both endpoints by at least four combined standard
// errors. Invalid stats yield an inapplicable report instead of a throw.
ImprovementReport verify_improvement(const ErrorStats& stats, int dim, std::uint64_t seed,
                                     long n_samples);

// Linearly separable latent problem: C classifier rows of norm b_norm, m
// latent points whose top-class margin is at least gamma (gamma is the
// smallest realized margin).
struct MarginProblem {
  int num_classes = 2;
  int dim = 2;
  DenseMatrix w;  // C × d
  double b_norm = 1.0;
  double gamma = 0.0;
  DenseMatrix z;  // m × d
  std::vector<int> labels;
};

MarginProblem generate_margin_problem(int num_classes, int dim, int num_points,
                                      double b_norm, std::uint64_t seed);

struct BoundResult {
  double unclamped = 0.0;
  double clamped = 0.0;  // min(unclamped, 1) for reporting
};

// Margin-based misclassification bound 4(C−1)B²·mse/γ².
BoundResult misclassification_bound(const MarginProblem& problem, double mse);

// Empirical argmax error rate of w over noisy z̃ = z + λ·ε_g + (1−λ)·ε_a,
// ties broken toward the lowest class index.
double empirical_misclassification(const MarginProblem& problem, const NoiseModel& model,
                                   double lambda, long n_samples, std::uint64_t seed);

// Diagnostic for the zero-mean premise on real branch outputs: coordinate
// mean of Δ_i = h_i_pre − h_i_adp and its norm. No pass/fail semantics.
struct DiscrepancyStats {
  std::vector<double> mean;
  double mean_norm = 0.0;
};

DiscrepancyStats branch_discrepancy_stats(const DenseMatrix& h_pre, const DenseMatrix& h_adp);

}  // namespace gp2f::theory
