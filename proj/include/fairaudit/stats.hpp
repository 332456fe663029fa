#pragma once

#include <span>

namespace fairaudit {

struct TTestResult {
    double t_statistic = 0.0;
    long degrees_of_freedom = 0;
    double p_value = 1.0;
    bool significant = false;  // p < 0.05
};

// Two-sided paired t-test: d_i = a_i - b_i, t = mean(d) / (sd(d)/sqrt(n)) with
// the n-1 sample standard deviation, df = n-1. Errors on n < 2 and on zero
// variance of the differences.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

struct Summary {
    double mean = 0.0;
    double sd = 0.0;  // sample sd (n-1); 0 for a single value
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

// Five-number summary plus mean/sd. Quartiles use inclusive linear
// interpolation: the p-quantile sits at rank h = (n-1)p of the sorted values,
// interpolated between floor(h) and ceil(h).
Summary summarize_values(std::span<const double> values);

// 100 * (synthetic - real) / real. Errors when real == 0.
double percent_change(double real, double synthetic);

// Regularized incomplete beta function I_x(a, b), continued-fraction
// evaluation (modified Lentz) to ~1e-12.
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided Student-t tail probability for a given t and df.
double student_t_two_sided_p(double t, long df);

} // namespace fairaudit
