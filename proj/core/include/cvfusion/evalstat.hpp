#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cvfusion/dataio.hpp"

namespace cvfusion {

// Rows are the true class, columns the predicted class.
struct ConfusionMatrix {
    std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> counts{};

    std::int64_t total() const;
    std::int64_t trace() const;
};

// Throws ParamError on length mismatch or empty input.
ConfusionMatrix confusion(std::span<const ClassLabel> preds, std::span<const ClassLabel> truths);

// A metric is nullopt when its denominator is zero.
struct ClassMetrics {
    std::optional<double> accuracy;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
    std::int64_t tp = 0;
    std::int64_t tn = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
};

// Builds the metrics from binary counts:
//   accuracy = (tp + tn) / (tp + tn + fp + fn)
//   sensitivity = tp / (tp + fn)
//   specificity = tn / (tn + fp)
ClassMetrics metrics_from_counts(std::int64_t tp, std::int64_t tn, std::int64_t fp, std::int64_t fn);

// One-vs-rest binarization of the matrix for `positive`.
ClassMetrics one_vs_rest_metrics(const ConfusionMatrix& cm, const ClassLabel& positive);

struct OverallMetrics {
    std::optional<double> accuracy;     // trace / N
    std::optional<double> sensitivity;  // mean over classes where defined
    std::optional<double> specificity;
};

OverallMetrics overall_metrics(const ConfusionMatrix& cm);

// ---------------------------------------------------------------------------
// One-way ANOVA

struct AnovaResult {
    std::string feature_name;
    double f_stat = 0.0;
    double p_value = 1.0;
    std::int64_t df_between = 0;
    std::int64_t df_within = 0;
    bool significant = false;  // p < 0.05
};

inline constexpr double kSignificanceLevel = 0.05;

/// F = (SSB / (k - 1)) / (SSW / (N - k)).
/// Throws ParamError with fewer than 2 groups or a group of fewer than 2
/// values, DegenerateError when SSW = 0.
AnovaResult anova_f(const std::vector<std::vector<double>>& groups, std::string feature_name = {});

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction,
/// switching to 1 - I_{1-x}(b, a) when x > (a + 1) / (a + b + 2).
double incomplete_beta(double x, double a, double b);

// F-distribution survival: I_{d2 / (d2 + d1 F)}(d2 / 2, d1 / 2).
double f_sf(double f, double d1, double d2);

// ---------------------------------------------------------------------------
// Five-number summary

struct QuartileSummary {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

// Linear interpolation between order statistics at position (n - 1) p.
double quantile(std::span<const double> sorted, double p);

// Throws ParamError on an empty list.
QuartileSummary quartile_summary(std::span<const double> values);

}  // namespace cvfusion
