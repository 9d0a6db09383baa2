#include "nsl/stats.hpp"

#include <cfloat>
#include <cmath>
#include <string>

#include "nsl/errors.hpp"

namespace nsl {

namespace {

// Continued fraction for the incomplete beta (Lentz's method).
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIterations = 500;
    constexpr double kTolerance = 1e-12;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const int m2 = 2 * m;
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
        if (std::fabs(del - 1.0) < kTolerance) return h;
    }
    throw NonFinite("incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0) || !(b > 0)) throw OutOfRange("incomplete_beta: a, b must be > 0");
    if (x < 0.0 || x > 1.0) throw OutOfRange("incomplete_beta: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;

    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    // Use the continued fraction on the side where it converges fast.
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_cf(a, b, x) / a;
    }
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) {
        throw LengthMismatch("pearson: " + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()));
    }
    const size_t n = x.size();
    if (n < 3) throw TooFew("pearson: need at least 3 observations, got " + std::to_string(n));

    double mean_x = 0, mean_y = 0;
    for (size_t i = 0; i < n; ++i) {
        mean_x += x[i];
        mean_y += y[i];
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);

    double sxx = 0, syy = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mean_x;
        const double dy = y[i] - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0) throw ZeroVariance("pearson: x is constant");
    if (syy == 0.0) throw ZeroVariance("pearson: y is constant");

    double r = sxy / std::sqrt(sxx * syy);
    if (r > 1.0) r = 1.0;
    if (r < -1.0) r = -1.0;
    return r;
}

double pearson_pvalue(double r, long n) {
    if (n < 3) throw TooFew("pearson_pvalue: need n >= 3, got " + std::to_string(n));
    if (!(r >= -1.0 && r <= 1.0)) throw OutOfRange("pearson_pvalue: |r| > 1");

    const double df = static_cast<double>(n - 2);
    const double one_minus_r2 = (1.0 - r) * (1.0 + r);
    if (one_minus_r2 <= 0.0) return DBL_MIN;  // |r| == 1, divergent t

    // Two-sided tail of Student t with df degrees of freedom:
    // p = I_{df/(df+t^2)}(df/2, 1/2), with t^2 = r^2 df / (1-r^2), so the
    // beta argument simplifies to (1-r^2).
    double p = incomplete_beta(0.5 * df, 0.5, one_minus_r2);
    if (p < DBL_MIN) p = DBL_MIN;
    if (p > 1.0) p = 1.0;
    return p;
}

}  // namespace nsl
