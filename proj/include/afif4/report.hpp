#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "afif4/error.hpp"

namespace afif4 {

struct DetectionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
};

struct DetectionMetrics {
    double recall_pct = 0.0;
    double precision_pct = 0.0;
    double f_measure_pct = 0.0;
};

// recall = TP/(TP+FN), precision = TP/(TP+FP), F = 2PR/(P+R), all in
// percent. Throws when a denominator is zero.
inline DetectionMetrics detection_metrics(const DetectionCounts& c) {
    if (c.tp < 0 || c.fp < 0 || c.fn < 0) throw Error("detection_metrics: negative counts");
    if (c.tp + c.fn <= 0) throw Error("detection_metrics: recall undefined (TP+FN = 0)");
    if (c.tp + c.fp <= 0) throw Error("detection_metrics: precision undefined (TP+FP = 0)");
    DetectionMetrics m;
    m.recall_pct = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    m.precision_pct = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    m.f_measure_pct = (m.recall_pct + m.precision_pct) == 0.0
                          ? 0.0
                          : 2.0 * m.precision_pct * m.recall_pct /
                                (m.precision_pct + m.recall_pct);
    return m;
}

struct CrossCell {
    std::string train_dataset;
    std::string test_dataset;
    double accuracy_pct = 0.0;
};

struct RunReport {
    std::string dataset;
    std::vector<double> fold_accuracy_pct;
    double mean_accuracy_pct = 0.0;
    std::optional<DetectionMetrics> detection;
    std::vector<CrossCell> cross_cells;
    std::vector<std::pair<std::string, std::string>> config_echo;
    std::uint64_t master_seed = 0;
};

inline void finalize_report_mean(RunReport& r) {
    double sum = 0.0;
    for (double a : r.fold_accuracy_pct) sum += a;
    r.mean_accuracy_pct =
        r.fold_accuracy_pct.empty() ? 0.0 : sum / static_cast<double>(r.fold_accuracy_pct.size());
}

enum class ReportFormat { Csv, Markdown };

inline ReportFormat report_format_from_name(const std::string& name) {
    if (name == "csv") return ReportFormat::Csv;
    if (name == "markdown" || name == "md") return ReportFormat::Markdown;
    throw Error("unknown report format '" + name + "' (csv|markdown)");
}

namespace detail {

inline std::string fixed2(double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << v;
    return s.str();
}

}  // namespace detail

inline void emit_report(const RunReport& r, std::ostream& out, ReportFormat format) {
    if (format == ReportFormat::Markdown) {
        out << "# Run report: " << r.dataset << "\n\n";
        out << "Master seed: " << r.master_seed << "\n\n";
        if (!r.fold_accuracy_pct.empty()) {
            out << "| Fold | Accuracy (%) |\n|---|---|\n";
            for (std::size_t i = 0; i < r.fold_accuracy_pct.size(); ++i)
                out << "| " << i << " | " << detail::fixed2(r.fold_accuracy_pct[i]) << " |\n";
            out << "| mean | " << detail::fixed2(r.mean_accuracy_pct) << " |\n\n";
        }
        if (r.detection) {
            out << "| Recall (%) | Precision (%) | F-Measure (%) |\n|---|---|---|\n";
            out << "| " << detail::fixed2(r.detection->recall_pct) << " | "
                << detail::fixed2(r.detection->precision_pct) << " | "
                << detail::fixed2(r.detection->f_measure_pct) << " |\n\n";
        }
        if (!r.cross_cells.empty()) {
            out << "| Training | Testing | Accuracy (%) |\n|---|---|---|\n";
            for (const CrossCell& c : r.cross_cells)
                out << "| " << c.train_dataset << " | " << c.test_dataset << " | "
                    << detail::fixed2(c.accuracy_pct) << " |\n";
            out << "\n";
        }
        if (!r.config_echo.empty()) {
            out << "| Config key | Value |\n|---|---|\n";
            for (const auto& [k, v] : r.config_echo) out << "| " << k << " | " << v << " |\n";
        }
    } else {
        out << "section,key,value\n";
        out << "meta,dataset," << r.dataset << "\n";
        out << "meta,master_seed," << r.master_seed << "\n";
        for (std::size_t i = 0; i < r.fold_accuracy_pct.size(); ++i)
            out << "fold," << i << "," << detail::fixed2(r.fold_accuracy_pct[i]) << "\n";
        if (!r.fold_accuracy_pct.empty())
            out << "fold,mean," << detail::fixed2(r.mean_accuracy_pct) << "\n";
        if (r.detection) {
            out << "detection,recall," << detail::fixed2(r.detection->recall_pct) << "\n";
            out << "detection,precision," << detail::fixed2(r.detection->precision_pct) << "\n";
            out << "detection,f_measure," << detail::fixed2(r.detection->f_measure_pct) << "\n";
        }
        for (const CrossCell& c : r.cross_cells)
            out << "cross," << c.train_dataset << ">" << c.test_dataset << ","
                << detail::fixed2(c.accuracy_pct) << "\n";
        for (const auto& [k, v] : r.config_echo) out << "config," << k << "," << v << "\n";
    }
}

inline void emit_report(const RunReport& r, const std::string& path, ReportFormat format) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write report: " + path);
    emit_report(r, out, format);
    if (!out) throw Error("short write: " + path);
}

// Lossless JSON form, used to hand reports between CLI invocations.
inline nlohmann::json report_to_json(const RunReport& r) {
    nlohmann::json j;
    j["dataset"] = r.dataset;
    j["fold_accuracy_pct"] = r.fold_accuracy_pct;
    j["mean_accuracy_pct"] = r.mean_accuracy_pct;
    j["master_seed"] = r.master_seed;
    if (r.detection) {
        j["detection"] = {{"recall_pct", r.detection->recall_pct},
                          {"precision_pct", r.detection->precision_pct},
                          {"f_measure_pct", r.detection->f_measure_pct}};
    }
    j["cross"] = nlohmann::json::array();
    for (const CrossCell& c : r.cross_cells)
        j["cross"].push_back(
            {{"train", c.train_dataset}, {"test", c.test_dataset}, {"accuracy_pct", c.accuracy_pct}});
    j["config"] = nlohmann::json::array();
    for (const auto& [k, v] : r.config_echo) j["config"].push_back({{"key", k}, {"value", v}});
    return j;
}

inline RunReport report_from_json(const nlohmann::json& j) {
    RunReport r;
    r.dataset = j.value("dataset", std::string());
    r.fold_accuracy_pct = j.value("fold_accuracy_pct", std::vector<double>());
    r.mean_accuracy_pct = j.value("mean_accuracy_pct", 0.0);
    r.master_seed = j.value("master_seed", std::uint64_t{0});
    if (j.contains("detection")) {
        DetectionMetrics m;
        m.recall_pct = j["detection"].value("recall_pct", 0.0);
        m.precision_pct = j["detection"].value("precision_pct", 0.0);
        m.f_measure_pct = j["detection"].value("f_measure_pct", 0.0);
        r.detection = m;
    }
    if (j.contains("cross"))
        for (const auto& c : j["cross"])
            r.cross_cells.push_back(CrossCell{c.value("train", std::string()),
                                              c.value("test", std::string()),
                                              c.value("accuracy_pct", 0.0)});
    if (j.contains("config"))
        for (const auto& c : j["config"])
            r.config_echo.emplace_back(c.value("key", std::string()),
                                       c.value("value", std::string()));
    return r;
}

inline void save_report_json(const RunReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write report: " + path);
    out << report_to_json(r).dump(2) << "\n";
}

inline RunReport load_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open report: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": bad report json: " + e.what());
    }
    return report_from_json(j);
}

}  // namespace afif4
