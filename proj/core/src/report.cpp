#include "poisonguard/report.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "poisonguard/error.hpp"

namespace poisonguard {

namespace {

constexpr const char* kMetricNames[6] = {"accuracy", "precision", "recall",
                                         "f1",       "fpr",       "fnr"};

std::array<double, 6> metric_values(const MetricsReport& r) {
    return {r.accuracy, r.precision, r.recall, r.f1, r.fpr, r.fnr};
}

std::string format_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

ReportFormat parse_report_format(const std::string& name) {
    if (name == "csv") return ReportFormat::Csv;
    if (name == "json") return ReportFormat::Json;
    if (name == "md" || name == "markdown") return ReportFormat::Markdown;
    throw std::invalid_argument("unknown report format '" + name + "'");
}

ComparisonTable to_comparison_table(const SweepResult& sweep) {
    ComparisonTable table;
    for (const auto& row : sweep.rows) {
        table.rows.push_back({fraction_label(row.fraction), row.default_impl, row.proposed_impl});
    }
    return table;
}

std::string fraction_label(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g%%", fraction * 100.0);
    return buf;
}

double percent_delta(double baseline, double proposed) {
    if (baseline == 0.0) return 0.0;
    return 100.0 * (proposed - baseline) / baseline;
}

std::string format_delta(double delta) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%+.2f%%", delta);
    return buf;
}

namespace {

std::array<std::string, 6> delta_strings(const ComparisonRow& row) {
    auto base = metric_values(row.baseline);
    auto prop = metric_values(row.proposed);
    std::array<std::string, 6> out;
    for (std::size_t i = 0; i < 6; ++i) out[i] = format_delta(percent_delta(base[i], prop[i]));
    return out;
}

std::string render_csv(const ComparisonTable& table) {
    std::string out = "fraction,impl,accuracy,precision,recall,f1,fpr,fnr\n";
    for (const auto& row : table.rows) {
        for (int which = 0; which < 2; ++which) {
            out += row.label;
            out += which == 0 ? ",default" : ",proposed";
            for (double v : metric_values(which == 0 ? row.baseline : row.proposed)) {
                out += ',';
                out += format_metric(v);
            }
            out += '\n';
        }
    }
    out += "# percent delta, proposed vs default\n";
    out += "fraction,accuracy,precision,recall,f1,fpr,fnr\n";
    for (const auto& row : table.rows) {
        out += row.label;
        for (const auto& d : delta_strings(row)) {
            out += ',';
            out += d;
        }
        out += '\n';
    }
    return out;
}

std::string render_json(const ComparisonTable& table) {
    nlohmann::ordered_json doc;
    doc["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
        nlohmann::ordered_json entry;
        entry["fraction"] = row.label;
        for (int which = 0; which < 2; ++which) {
            nlohmann::ordered_json metrics;
            auto values = metric_values(which == 0 ? row.baseline : row.proposed);
            for (std::size_t i = 0; i < 6; ++i) metrics[kMetricNames[i]] = values[i];
            entry[which == 0 ? "default" : "proposed"] = metrics;
        }
        doc["rows"].push_back(entry);
    }
    doc["delta_percent"] = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
        nlohmann::ordered_json entry;
        entry["fraction"] = row.label;
        auto deltas = delta_strings(row);
        for (std::size_t i = 0; i < 6; ++i) entry[kMetricNames[i]] = deltas[i];
        doc["delta_percent"].push_back(entry);
    }
    return doc.dump(2) + "\n";
}

std::string render_markdown(const ComparisonTable& table) {
    std::string out = "| fraction | impl | accuracy | precision | recall | f1 | fpr | fnr |\n";
    out += "|---|---|---|---|---|---|---|---|\n";
    for (const auto& row : table.rows) {
        for (int which = 0; which < 2; ++which) {
            out += "| " + row.label + " | ";
            out += which == 0 ? "default" : "proposed";
            for (double v : metric_values(which == 0 ? row.baseline : row.proposed)) {
                out += " | " + format_metric(v);
            }
            out += " |\n";
        }
    }
    out += "\nPercent delta, proposed vs default:\n\n";
    out += "| fraction | accuracy | precision | recall | f1 | fpr | fnr |\n";
    out += "|---|---|---|---|---|---|---|\n";
    for (const auto& row : table.rows) {
        out += "| " + row.label;
        for (const auto& d : delta_strings(row)) out += " | " + d;
        out += " |\n";
    }
    return out;
}

}  // namespace

std::string render_report(const ComparisonTable& table, ReportFormat format) {
    switch (format) {
        case ReportFormat::Csv: return render_csv(table);
        case ReportFormat::Json: return render_json(table);
        case ReportFormat::Markdown: return render_markdown(table);
    }
    throw std::invalid_argument("bad report format");
}

void emit_report(const ComparisonTable& table, ReportFormat format,
                 const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    std::string body = render_report(table, format);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace poisonguard
