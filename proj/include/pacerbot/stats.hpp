// One-way repeated-measures ANOVA and the F-distribution upper tail it
// needs, via the regularized incomplete beta function (Lentz continued
// fraction, converged to ~1e-15 so tail probabilities are good to well
// under 1e-10 absolute).
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace pacerbot {

namespace detail {

/// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;

    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
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
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("incomplete beta: a, b must be > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
    return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

/// P(F' > f) for F' ~ F(df1, df2).
inline double f_distribution_upper_tail(double f, double df1, double df2) {
    if (f <= 0.0) return 1.0;
    const double x = df2 / (df2 + df1 * f);
    return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, x);
}

struct RmAnovaResult {
    std::size_t n_subjects = 0;
    std::size_t n_conditions = 0;
    double ss_subjects = 0.0;
    double ss_conditions = 0.0;
    double ss_error = 0.0;
    double ss_total = 0.0;
    std::size_t df_conditions = 0;  // k - 1
    std::size_t df_error = 0;       // (k - 1)(n - 1)
    double ms_conditions = 0.0;
    double ms_error = 0.0;
    double f = 0.0;
    double p = 1.0;
    bool degenerate = false;  // zero error variance with a nonzero effect

    std::string format() const {
        std::string s = "F(" + std::to_string(df_conditions) + "," + std::to_string(df_error) + ")=";
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6g", f);
        s += buf;
        std::snprintf(buf, sizeof(buf), "%.6g", p);
        s += ", p=";
        s += buf;
        if (degenerate) s += " (degenerate: zero error variance)";
        return s;
    }
};

/// One-way repeated-measures ANOVA on a complete subjects x conditions
/// matrix. Variance is partitioned as SS_total = SS_subjects +
/// SS_conditions + SS_error; F = MS_conditions / MS_error with the subject
/// block removed. A zero SS_error with a real condition effect cannot
/// produce a finite F; it is reported with the degeneracy flag and a
/// below-epsilon p.
inline RmAnovaResult rm_anova(const std::vector<std::vector<double>>& data) {
    const std::size_t n = data.size();
    if (n < 2) throw std::invalid_argument("rm_anova: need at least 2 subjects");
    const std::size_t k = data[0].size();
    if (k < 2) throw std::invalid_argument("rm_anova: need at least 2 conditions");
    for (const auto& row : data)
        if (row.size() != k) throw std::invalid_argument("rm_anova: ragged matrix");

    double grand = 0.0;
    for (const auto& row : data)
        for (double v : row) grand += v;
    grand /= static_cast<double>(n * k);

    std::vector<double> col_mean(k, 0.0);
    double ss_total = 0.0, ss_subjects = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            col_mean[j] += data[i][j];
            const double d = data[i][j] - grand;
            ss_total += d * d;
            row_sum += data[i][j];
        }
        const double rd = row_sum / k - grand;
        ss_subjects += k * rd * rd;
    }
    double ss_conditions = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        const double cd = col_mean[j] / n - grand;
        ss_conditions += n * cd * cd;
    }
    const double ss_error = ss_total - ss_subjects - ss_conditions;

    RmAnovaResult r;
    r.n_subjects = n;
    r.n_conditions = k;
    r.ss_subjects = ss_subjects;
    r.ss_conditions = ss_conditions;
    r.ss_error = std::max(ss_error, 0.0);
    r.ss_total = ss_total;
    r.df_conditions = k - 1;
    r.df_error = (k - 1) * (n - 1);
    r.ms_conditions = ss_conditions / static_cast<double>(r.df_conditions);
    r.ms_error = r.ss_error / static_cast<double>(r.df_error);

    const double scale = std::max(ss_total, 1.0);
    if (r.ms_conditions <= 1e-14 * scale) {
        r.f = 0.0;
        r.p = 1.0;
    } else if (r.ms_error <= 1e-14 * scale) {
        r.degenerate = true;
        r.f = std::numeric_limits<double>::infinity();
        r.p = std::numeric_limits<double>::epsilon();
    } else {
        r.f = r.ms_conditions / r.ms_error;
        r.p = f_distribution_upper_tail(r.f, static_cast<double>(r.df_conditions),
                                        static_cast<double>(r.df_error));
    }
    return r;
}

}  // namespace pacerbot
