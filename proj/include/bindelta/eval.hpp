#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bindelta/so3.hpp"

namespace bindelta::eval {

/// Geodesic angle between the rotations of two axis-angle poses, radians.
double angle_error(const AxisAngle& y_pred, const AxisAngle& y_star);

enum class MedianRule { lower_middle, interpolated };

/// Median of `values` (copied); lower-middle order statistic on even
/// counts unless interpolation is requested.
double median(std::vector<double> values, MedianRule rule = MedianRule::lower_middle);

/// Fraction of errors strictly below `threshold` radians.
double accuracy_at(std::span<const double> errors, double threshold);

struct CategoryMetrics {
    std::string name;
    double mederr_deg = 0.0;
    double acc_pi6 = 0.0; // fraction with error strictly below pi/6
    std::size_t count = 0;
};

struct MetricReport {
    std::vector<CategoryMetrics> categories;
    double mean_mederr_deg = 0.0; // unweighted mean over categories
    double mean_acc = 0.0;
    std::string variant; // config echo, may be empty
};

/// Per-category MedErr (degrees) and Acc_{pi/6}; the mean row averages
/// categories with equal weight.
MetricReport compute_metrics(std::span<const AxisAngle> preds,
                             std::span<const AxisAngle> gts,
                             std::span<const int> categories,
                             MedianRule rule = MedianRule::lower_middle);

/// CSV layout (per-category columns then "mean"):
///   category,<name>,...,mean
///   mederr_deg,…       2 decimals
///   acc_pi6,…          4 decimals
///   count,…            (optional on load)
void emit_report_csv(const MetricReport& r, const std::filesystem::path& path);
void emit_report_json(const MetricReport& r, const std::filesystem::path& path);
MetricReport load_report_csv(const std::filesystem::path& path);
MetricReport load_report_json(const std::filesystem::path& path);

/// Parse the CSV layout from a string (fixtures, tests).
MetricReport parse_report_csv(const std::string& text);
std::string report_to_csv(const MetricReport& r);

} // namespace bindelta::eval
