#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gp2f/error.hpp"
#include "gp2f/rng.hpp"
#include "gp2f/theory.hpp"

using namespace gp2f;
using namespace gp2f::theory;

namespace {

ErrorStats random_valid_stats(Rng& rng) {
  ErrorStats s;
  s.sigma_g2 = 0.2 + 2.0 * rng.next_double();
  s.sigma_a2 = 0.2 + 2.0 * rng.next_double();
  const double lo = -0.95 * std::sqrt(s.sigma_g2 * s.sigma_a2);
  const double hi = 0.95 * std::min(s.sigma_g2, s.sigma_a2);
  s.rho = lo + (hi - lo) * rng.next_double();
  return s;
}

// Golden-section minimization over [0,1], an independent route to λ*.
double golden_minimize(const ErrorStats& s) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = 1.0;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  for (int it = 0; it < 200; ++it) {
    if (mse_curve(s, c) < mse_curve(s, d))
      b = d;
    else
      a = c;
    c = b - phi * (b - a);
    d = a + phi * (b - a);
  }
  return 0.5 * (a + b);
}

// Least-squares fit of y = aλ² + bλ + c via 3×3 normal equations.
void quadratic_fit(const std::vector<double>& xs, const std::vector<double>& ys, double* a,
                   double* b, double* c) {
  double m[3][4] = {};
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double x = xs[k], y = ys[k];
    const double basis[3] = {x * x, x, 1.0};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m[i][j] += basis[i] * basis[j];
      m[i][3] += basis[i] * y;
    }
  }
  for (int col = 0; col < 3; ++col) {  // Gaussian elimination with pivoting
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::fabs(m[r][col]) > std::fabs(m[piv][col])) piv = r;
    for (int j = 0; j < 4; ++j) std::swap(m[piv][j], m[col][j]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int j = col; j < 4; ++j) m[r][j] -= f * m[col][j];
    }
  }
  *a = m[0][3] / m[0][0];
  *b = m[1][3] / m[1][1];
  *c = m[2][3] / m[2][2];
}

}  // namespace

TEST_CASE("mse_curve endpoints and hand value") {
  ErrorStats s{2.0, 1.0, 0.3};
  CHECK(mse_curve(s, 0.0) == doctest::Approx(1.0));  // adapted-branch endpoint
  CHECK(mse_curve(s, 1.0) == doctest::Approx(2.0));  // frozen-branch endpoint
  CHECK(mse_curve(s, 0.5) == doctest::Approx(0.9));  // 2.4·0.25 − 1.4·0.5 + 1

  SUBCASE("invalid stats are an assumption error") {
    CHECK_THROWS_WITH_AS((void)mse_curve(ErrorStats{-1.0, 1.0, 0.0}, 0.5),
                         doctest::Contains("sigma_g^2 > 0"), AssumptionError);
    CHECK_THROWS_WITH_AS((void)mse_curve(ErrorStats{1.0, 2.0, 1.2}, 0.5),
                         doctest::Contains("min"), AssumptionError);
  }
}

TEST_CASE("optimal lambda: symmetric case, hand values, golden-section cross-check") {
  CHECK(optimal_lambda(ErrorStats{1.5, 1.5, 0.4}) == doctest::Approx(0.5));
  CHECK(optimal_lambda(ErrorStats{2.0, 1.0, 0.0}) == doctest::Approx(1.0 / 3.0));
  CHECK(optimal_lambda(ErrorStats{2.0, 1.0, 0.3}) == doctest::Approx(0.7 / 2.4));

  Rng rng(7);
  for (int i = 0; i < 25; ++i) {
    ErrorStats s = random_valid_stats(rng);
    const double star = optimal_lambda(s);
    CHECK(star > 0.0);
    CHECK(star < 1.0);
    CHECK(star == doctest::Approx(golden_minimize(s)).epsilon(1e-6));
  }
}

TEST_CASE("mse at the optimum: values, dual forms, strict improvement") {
  CHECK(mse_at_optimum(ErrorStats{1.0, 1.0, 0.0}) == doctest::Approx(0.5));
  CHECK(mse_at_optimum(ErrorStats{2.0, 1.0, 0.0}) == doctest::Approx(2.0 / 3.0));
  CHECK(mse_at_optimum(ErrorStats{1.0, 1.0, 0.0}) ==
        doctest::Approx(mse_curve(ErrorStats{1.0, 1.0, 0.0}, 0.5)));
  CHECK(mse_at_optimum(ErrorStats{2.0, 1.0, 0.0}) ==
        doctest::Approx(mse_curve(ErrorStats{2.0, 1.0, 0.0}, 1.0 / 3.0)));

  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    ErrorStats s = random_valid_stats(rng);
    const double opt = mse_at_optimum(s);  // internally checks both closed forms
    CHECK(opt < std::min(s.sigma_g2, s.sigma_a2));
    CHECK(opt <= mse_curve(s, optimal_lambda(s)) + 1e-12);
  }
}

TEST_CASE("mse_curve second differences are constant (pure quadratic)") {
  ErrorStats s{1.7, 0.9, -0.2};
  const double h = 0.05;
  const double expect = 2.0 * s.curvature() * h * h;
  for (double l = h; l <= 1.0 - h + 1e-12; l += h) {
    const double dd = mse_curve(s, l + h) - 2.0 * mse_curve(s, l) + mse_curve(s, l - h);
    CHECK(std::fabs(dd - expect) <= 1e-12);
  }
}

TEST_CASE("monte carlo endpoints and the lemma-1 configuration") {
  ErrorStats s{2.0, 1.0, 0.3};
  NoiseModel model{8, s, 2024};

  SUBCASE("lambda 0 recovers sigma_a^2 within 4 standard errors") {
    auto mc = monte_carlo_mse(model, 0.0, 20000);
    CHECK(std::fabs(mc.mean - 1.0) <= 4.0 * mc.stderr_);
  }
  SUBCASE("lambda* matches the closed form within 2%") {
    auto mc = monte_carlo_mse(model, optimal_lambda(s), 200000);
    const double analytic = mse_at_optimum(s);
    CHECK(analytic == doctest::Approx(1.0 - 0.49 / 2.4));
    CHECK(std::fabs(mc.mean - analytic) / analytic < 0.02);
  }
  SUBCASE("a lambda sweep refits the quadratic coefficients within 5%") {
    std::vector<double> xs, ys;
    for (int i = 0; i <= 10; ++i) {
      const double l = i / 10.0;
      xs.push_back(l);
      ys.push_back(monte_carlo_mse(model, l, 40000).mean);
    }
    double a, b, c;
    quadratic_fit(xs, ys, &a, &b, &c);
    CHECK(std::fabs(a - s.curvature()) / s.curvature() < 0.05);
    CHECK(std::fabs(b - 2.0 * (s.rho - s.sigma_a2)) / std::fabs(2.0 * (s.rho - s.sigma_a2)) <
          0.05);
    CHECK(std::fabs(c - s.sigma_a2) / s.sigma_a2 < 0.05);
  }
  SUBCASE("standard error scales like n^{-1/2} within a factor of two") {
    auto se3 = monte_carlo_mse(model, 0.4, 1000).stderr_;
    auto se4 = monte_carlo_mse(model, 0.4, 10000).stderr_;
    auto se5 = monte_carlo_mse(model, 0.4, 100000).stderr_;
    const double r34 = se3 / se4, r45 = se4 / se5;
    const double root10 = std::sqrt(10.0);
    CHECK(r34 > root10 / 2.0);
    CHECK(r34 < root10 * 2.0);
    CHECK(r45 > root10 / 2.0);
    CHECK(r45 < root10 * 2.0);
  }
  SUBCASE("too few samples rejected") {
    CHECK_THROWS_AS((void)monte_carlo_mse(model, 0.0, 10), ConfigError);
  }
}

TEST_CASE("verify_improvement verdicts") {
  SUBCASE("standard case holds with margin") {
    auto rep = verify_improvement(ErrorStats{2.0, 1.0, 0.3}, 8, 99, 200000);
    CHECK(rep.applicable);
    CHECK(rep.verdict);
    CHECK(rep.lambda_star == doctest::Approx(0.7 / 2.4));
  }
  SUBCASE("boundary rho = sigma_a^2 is inapplicable (lambda* would be 0)") {
    auto rep = verify_improvement(ErrorStats{2.0, 1.0, 1.0}, 8, 99, 2000);
    CHECK_FALSE(rep.applicable);
    CHECK(rep.reason.find("inapplicable") != std::string::npos);
  }
  SUBCASE("near-degenerate curvature still validates with more samples") {
    ErrorStats s{1.0, 1.0, 0.999};
    CHECK(s.curvature() == doctest::Approx(0.002));
    auto rep = verify_improvement(s, 8, 7, 400000);
    CHECK(rep.applicable);
    CHECK(rep.verdict);
  }
}

TEST_CASE("noise model realizability check") {
  NoiseModel bad{4, ErrorStats{0.5, 0.5, -0.9}, 1};  // assumption-valid, unrealizable
  CHECK(bad.stats.valid());
  CHECK_THROWS_AS(bad.validate(), AssumptionError);
}

TEST_CASE("misclassification bound values and Monte Carlo domination") {
  SUBCASE("zero mse gives a zero bound") {
    auto p = generate_margin_problem(3, 4, 10, 1.0, 5);
    CHECK(misclassification_bound(p, 0.0).unclamped == 0.0);
  }
  SUBCASE("hand-evaluated bound") {
    MarginProblem p;
    p.num_classes = 2;
    p.b_norm = 1.0;
    p.gamma = 2.0;
    CHECK(misclassification_bound(p, 0.25).unclamped == doctest::Approx(0.25));
  }
  SUBCASE("gamma must be positive") {
    MarginProblem p;
    p.gamma = 0.0;
    CHECK_THROWS_AS(misclassification_bound(p, 0.1), AssumptionError);
  }
  SUBCASE("bound dominates the empirical error rate over problems and lambdas") {
    Rng seeds(31);
    for (int trial = 0; trial < 10; ++trial) {
      const int classes = 2 + static_cast<int>(seeds.next_below(4));
      const int dim = 2 + static_cast<int>(seeds.next_below(15));
      auto problem = generate_margin_problem(classes, dim, 12, 1.0, seeds.next_u64());
      ErrorStats s{0.05, 0.03, 0.01};
      NoiseModel model{dim, s, seeds.next_u64()};
      for (double lambda : {0.0, 0.3, optimal_lambda(s), 1.0}) {
        const double rate =
            empirical_misclassification(problem, model, lambda, 20000, seeds.next_u64());
        const double bound = misclassification_bound(problem, mse_curve(s, lambda)).unclamped;
        CHECK(rate <= bound);
      }
    }
  }
}

TEST_CASE("branch discrepancy diagnostics") {
  Rng rng(3);
  DenseMatrix h = DenseMatrix::gaussian(6, 4, 1.0, rng);
  SUBCASE("identical branches have zero mean discrepancy") {
    auto d = branch_discrepancy_stats(h, h);
    CHECK(d.mean_norm == 0.0);
  }
  SUBCASE("a constant shift is recovered exactly with sign") {
    DenseMatrix shifted = h;
    for (int i = 0; i < h.rows; ++i)
      for (int j = 0; j < h.cols; ++j) shifted.at(i, j) += 0.25 * (j + 1);
    auto d = branch_discrepancy_stats(h, shifted);
    for (int j = 0; j < 4; ++j)
      CHECK(d.mean[static_cast<std::size_t>(j)] == doctest::Approx(-0.25 * (j + 1)));
  }
}
