#include "cvfusion/evalstat.hpp"

#include "cvfusion/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cvfusion {

std::int64_t ConfusionMatrix::total() const {
    std::int64_t n = 0;
    for (const auto& row : counts) {
        for (auto c : row) n += c;
    }
    return n;
}

std::int64_t ConfusionMatrix::trace() const {
    std::int64_t n = 0;
    for (int i = 0; i < kNumClasses; ++i) n += counts[i][i];
    return n;
}

ConfusionMatrix confusion(std::span<const ClassLabel> preds, std::span<const ClassLabel> truths) {
    if (preds.size() != truths.size()) throw ParamError("confusion: prediction and truth counts differ");
    if (preds.empty()) throw ParamError("confusion: no samples");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < preds.size(); ++i) ++cm.counts[truths[i].index()][preds[i].index()];
    return cm;
}

namespace {

std::optional<double> ratio(std::int64_t num, std::int64_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ClassMetrics metrics_from_counts(std::int64_t tp, std::int64_t tn, std::int64_t fp, std::int64_t fn) {
    ClassMetrics m;
    m.tp = tp;
    m.tn = tn;
    m.fp = fp;
    m.fn = fn;
    m.accuracy = ratio(tp + tn, tp + tn + fp + fn);
    m.sensitivity = ratio(tp, tp + fn);
    m.specificity = ratio(tn, tn + fp);
    return m;
}

ClassMetrics one_vs_rest_metrics(const ConfusionMatrix& cm, const ClassLabel& positive) {
    const int k = positive.index();
    std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (int t = 0; t < kNumClasses; ++t) {
        for (int p = 0; p < kNumClasses; ++p) {
            const auto c = cm.counts[t][p];
            if (t == k && p == k) tp += c;
            else if (t == k) fn += c;
            else if (p == k) fp += c;
            else tn += c;
        }
    }
    return metrics_from_counts(tp, tn, fp, fn);
}

OverallMetrics overall_metrics(const ConfusionMatrix& cm) {
    OverallMetrics o;
    o.accuracy = ratio(cm.trace(), cm.total());
    double sens = 0.0, spec = 0.0;
    int n_sens = 0, n_spec = 0;
    for (int k = 0; k < kNumClasses; ++k) {
        const auto m = one_vs_rest_metrics(cm, ClassLabel::from_index(k));
        if (m.sensitivity) {
            sens += *m.sensitivity;
            ++n_sens;
        }
        if (m.specificity) {
            spec += *m.specificity;
            ++n_spec;
        }
    }
    if (n_sens > 0) o.sensitivity = sens / n_sens;
    if (n_spec > 0) o.specificity = spec / n_spec;
    return o;
}

// ---------------------------------------------------------------------------

AnovaResult anova_f(const std::vector<std::vector<double>>& groups, std::string feature_name) {
    if (groups.size() < 2) throw ParamError("anova: need at least 2 groups");
    std::size_t n = 0;
    double grand = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].size() < 2) {
            throw ParamError("anova: group " + std::to_string(g) + " has fewer than 2 values");
        }
        for (double v : groups[g]) {
            if (!std::isfinite(v)) throw ParamError("anova: non-finite value");
            grand += v;
        }
        n += groups[g].size();
    }
    grand /= static_cast<double>(n);

    double ssb = 0.0, ssw = 0.0;
    for (const auto& group : groups) {
        double mean = 0.0;
        for (double v : group) mean += v;
        mean /= static_cast<double>(group.size());
        ssb += static_cast<double>(group.size()) * (mean - grand) * (mean - grand);
        for (double v : group) ssw += (v - mean) * (v - mean);
    }

    AnovaResult r;
    r.feature_name = std::move(feature_name);
    r.df_between = static_cast<std::int64_t>(groups.size()) - 1;
    r.df_within = static_cast<std::int64_t>(n - groups.size());
    if (!(ssw > 0.0)) {
        throw DegenerateError("anova: zero within-group variance" +
                              (r.feature_name.empty() ? std::string() : " for '" + r.feature_name + "'"));
    }
    r.f_stat = (ssb / static_cast<double>(r.df_between)) / (ssw / static_cast<double>(r.df_within));
    r.p_value = f_sf(r.f_stat, static_cast<double>(r.df_between), static_cast<double>(r.df_within));
    r.significant = r.p_value < kSignificanceLevel;
    return r;
}

namespace {

// Continued fraction for I_x(a, b) (modified Lentz).
double beta_cf(double x, double a, double b) {
    constexpr int kMaxIter = 10000;
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
    for (int m = 1; m <= kMaxIter; ++m) {
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
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double x, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw ParamError("incomplete_beta: a and b must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw ParamError("incomplete_beta: x outside [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    if (x > (a + 1.0) / (a + b + 2.0)) {
        return 1.0 - std::exp(log_front) * beta_cf(1.0 - x, b, a) / b;
    }
    return std::exp(log_front) * beta_cf(x, a, b) / a;
}

double f_sf(double f, double d1, double d2) {
    if (!(d1 >= 1.0) || !(d2 >= 1.0)) throw ParamError("f_sf: degrees of freedom must be >= 1");
    if (std::isnan(f)) throw ParamError("f_sf: F is NaN");
    if (f <= 0.0) return 1.0;
    if (std::isinf(f)) return 0.0;
    const double x = d2 / (d2 + d1 * f);
    return std::clamp(incomplete_beta(x, d2 / 2.0, d1 / 2.0), 0.0, 1.0);
}

// ---------------------------------------------------------------------------

double quantile(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw ParamError("quantile: empty input");
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

QuartileSummary quartile_summary(std::span<const double> values) {
    if (values.empty()) throw ParamError("quartile_summary: empty input");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    return QuartileSummary{v.front(), quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75), v.back()};
}

}  // namespace cvfusion
