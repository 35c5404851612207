#pragma once

#include <span>

namespace infoneed {

/// I_x(a, b) for a, b > 0 and x in [0, 1], by continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with `df` degrees of freedom.
double student_t_cdf(double t, double df);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    double df = 0.0;
    /// Pooled variance was zero; t is 0 (equal means) or +-inf.
    bool degenerate_variance = false;
};

/// Equal-variance two-sample t-test, two-sided. Needs at least two values
/// on each side.
TTestResult t_test_independent(std::span<const double> a, std::span<const double> b);

}  // namespace infoneed
