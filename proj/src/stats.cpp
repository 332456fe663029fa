#include "fairaudit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fairaudit/error.hpp"

namespace fairaudit {

namespace {

// Continued-fraction kernel for the incomplete beta function, modified Lentz
// iteration, relative tolerance 1e-12.
double beta_continued_fraction(double a, double b, double x) {
    constexpr double kTolerance = 1e-12;
    constexpr double kTiny = 1e-300;
    constexpr int kMaxIterations = 500;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kTolerance) return h;
    }
    throw Error("incomplete beta continued fraction did not converge");
}

} // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw Error("incomplete beta requires positive parameters");
    if (x < 0.0 || x > 1.0) throw Error("incomplete beta requires x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, long df) {
    if (df < 1) throw Error("degrees of freedom must be at least 1");
    const double nu = static_cast<double>(df);
    const double x = nu / (nu + t * t);
    return regularized_incomplete_beta(nu / 2.0, 0.5, x);
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("paired t-test requires equal-length samples");
    const std::size_t n = a.size();
    if (n < 2) throw DataError("paired t-test requires at least two pairs");

    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    double mean = 0.0;
    for (double di : d) mean += di;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double di : d) ss += (di - mean) * (di - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) throw DataError("paired t-test undefined: differences have zero variance");

    TTestResult result;
    result.t_statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
    result.degrees_of_freedom = static_cast<long>(n) - 1;
    result.p_value = student_t_two_sided_p(result.t_statistic, result.degrees_of_freedom);
    result.significant = result.p_value < 0.05;
    return result;
}

Summary summarize_values(std::span<const double> values) {
    if (values.empty()) throw DataError("cannot summarize an empty series");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();

    auto quantile = [&](double p) {
        const double h = static_cast<double>(n - 1) * p;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const auto hi = static_cast<std::size_t>(std::ceil(h));
        if (lo == hi) return sorted[lo];
        const double frac = h - static_cast<double>(lo);
        return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
    };

    Summary s;
    double mean = 0.0;
    for (double v : sorted) mean += v;
    mean /= static_cast<double>(n);
    s.mean = mean;
    if (n > 1) {
        double ss = 0.0;
        for (double v : sorted) ss += (v - mean) * (v - mean);
        s.sd = std::sqrt(ss / static_cast<double>(n - 1));
    }
    s.min = sorted.front();
    s.q1 = quantile(0.25);
    s.median = quantile(0.5);
    s.q3 = quantile(0.75);
    s.max = sorted.back();
    return s;
}

double percent_change(double real, double synthetic) {
    if (real == 0.0) throw DataError("percent change undefined for a zero base value");
    return 100.0 * (synthetic - real) / real;
}

} // namespace fairaudit
