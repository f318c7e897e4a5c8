#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "poisonguard/metrics.hpp"
#include "poisonguard/scenario.hpp"

namespace poisonguard {

enum class ReportFormat { Csv, Json, Markdown };

ReportFormat parse_report_format(const std::string& name);

// One labelled baseline-vs-proposed pair; labels are attack fractions for
// sweep reports or scenario names for implementation comparisons.
struct ComparisonRow {
    std::string label;
    MetricsReport baseline;
    MetricsReport proposed;
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;
};

ComparisonTable to_comparison_table(const SweepResult& sweep);

// "0.1%" for 0.001, "10%" for 0.10.
std::string fraction_label(double fraction);

// 100 * (proposed - baseline) / baseline; defined as 0 when baseline == 0.
double percent_delta(double baseline, double proposed);

// Signed, two decimals: "+36.00%" / "-11.24%".
std::string format_delta(double delta);

// Deterministic rendering; identical inputs produce identical bytes. Every
// format carries the metric table and the signed percent-delta matrix.
std::string render_report(const ComparisonTable& table, ReportFormat format);

void emit_report(const ComparisonTable& table, ReportFormat format,
                 const std::filesystem::path& path);

}  // namespace poisonguard
