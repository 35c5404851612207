#include "infoneed/stats.hpp"

#include <cmath>
#include <limits>

#include "infoneed/error.hpp"

namespace infoneed {
namespace {

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIterations = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) return h;
    }
    return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("incomplete beta: a and b must be > 0");
    if (x < 0.0 || x > 1.0 || std::isnan(x)) throw ValidationError("incomplete beta: x outside [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                             b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
    if (!(df > 0.0)) throw ValidationError("student t: df must be > 0");
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    const double x = df / (df + t * t);
    const double tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x);
    return t > 0 ? 1.0 - tail : tail;
}

TTestResult t_test_independent(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw ValidationError("t-test needs at least two values per sample");
    const auto mean = [](std::span<const double> v) {
        double s = 0;
        for (const double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    const auto sum_sq = [](std::span<const double> v, double m) {
        double s = 0;
        for (const double x : v) s += (x - m) * (x - m);
        return s;
    };
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double ma = mean(a);
    const double mb = mean(b);
    TTestResult r;
    r.df = na + nb - 2.0;
    const double pooled = (sum_sq(a, ma) + sum_sq(b, mb)) / r.df;
    if (pooled == 0.0) {
        r.degenerate_variance = true;
        if (ma == mb) {
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
            r.p = 0.0;
        }
        return r;
    }
    r.t = (ma - mb) / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
    // Two-sided tail: P(|T| >= |t|) = I_{df / (df + t^2)}(df / 2, 1 / 2).
    r.p = regularized_incomplete_beta(r.df / 2.0, 0.5, r.df / (r.df + r.t * r.t));
    if (r.p > 1.0) r.p = 1.0;
    if (r.p < 0.0) r.p = 0.0;
    return r;
}

}  // namespace infoneed
