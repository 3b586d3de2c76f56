#pragma once

#include <vector>

namespace sdperl {

struct TTestResult {
    double t = 0;
    double p = 1;
    double cohens_d = 0;
    double df = 0;
};

// Classic independent two-sample t-test with pooled variance, two-sided p via
// the t-distribution survival function, Cohen's d on the pooled standard
// deviation. Requires two or more samples per group and non-zero pooled
// variance.
TTestResult independent_t_test(const std::vector<double>& a, const std::vector<double>& b);

// P(T > t) for Student's t with df degrees of freedom.
double student_t_sf(double t, double df);

// Regularized incomplete beta function I_x(a, b), continued-fraction form.
double incomplete_beta(double a, double b, double x);

}  // namespace sdperl
