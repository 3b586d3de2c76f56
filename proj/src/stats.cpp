#include "sdperl/stats.hpp"

#include <cmath>
#include <stdexcept>

#include "sdperl/errors.hpp"

namespace sdperl {

namespace {

// Continued fraction for the incomplete beta, evaluated with the modified
// Lentz scheme.
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
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
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_cf(a, b, x) / a;
    }
    return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(b) - std::lgamma(a) +
                          b * std::log1p(-x) + a * std::log(x)) *
                     beta_cf(b, a, 1.0 - x) / b;
}

double student_t_sf(double t, double df) {
    if (df <= 0) throw ConfigError("degrees of freedom must be positive");
    const double x = df / (df + t * t);
    const double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, x);
    return t >= 0 ? tail : 1.0 - tail;
}

TTestResult independent_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t na = a.size(), nb = b.size();
    if (na < 2 || nb < 2) throw DataError("t-test needs at least two samples per group");

    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    const double ma = mean(a), mb = mean(b);

    auto ss = [](const std::vector<double>& v, double m) {
        double s = 0;
        for (double x : v) s += (x - m) * (x - m);
        return s;
    };
    const double df = static_cast<double>(na + nb - 2);
    const double pooled_var = (ss(a, ma) + ss(b, mb)) / df;
    if (pooled_var <= 0) throw DataError("t-test is undefined for zero pooled variance");
    const double sp = std::sqrt(pooled_var);

    TTestResult r;
    r.df = df;
    r.t = (ma - mb) / (sp * std::sqrt(1.0 / static_cast<double>(na) + 1.0 / static_cast<double>(nb)));
    r.p = 2.0 * student_t_sf(std::fabs(r.t), df);
    r.cohens_d = (ma - mb) / sp;
    return r;
}

}  // namespace sdperl
