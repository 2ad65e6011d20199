#pragma once
// Per-case per-class metric report with aggregation rules: mean DSC over all
// included values, mean boundary distance over defined entries only, with an
// explicit count of skipped (undefined) entries.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spgcde/serialize.hpp"

namespace spgcde {

struct ClassMetrics {
    double dsc = 0.0;
    std::optional<double> hd95;
};

struct MetricReport {
    // case_id -> metrics for foreground classes 1..C-1, in class order.
    std::map<std::string, std::vector<ClassMetrics>> per_case;
    int num_classes = 0;

    double mean_dsc() const {
        double sum = 0.0;
        int64_t n = 0;
        for (const auto& [id, rows] : per_case)
            for (const auto& m : rows) {
                sum += m.dsc;
                ++n;
            }
        return n ? sum / static_cast<double>(n) : 0.0;
    }

    // Mean over defined entries; undefined distances are skipped, not imputed.
    std::optional<double> mean_hd95() const {
        double sum = 0.0;
        int64_t n = 0;
        for (const auto& [id, rows] : per_case)
            for (const auto& m : rows)
                if (m.hd95) {
                    sum += *m.hd95;
                    ++n;
                }
        if (!n) return std::nullopt;
        return sum / static_cast<double>(n);
    }

    int64_t hd95_skipped() const {
        int64_t n = 0;
        for (const auto& [id, rows] : per_case)
            for (const auto& m : rows)
                if (!m.hd95) ++n;
        return n;
    }

    // Mean DSC of one foreground class across cases.
    double class_mean_dsc(int cls_index) const {
        double sum = 0.0;
        int64_t n = 0;
        for (const auto& [id, rows] : per_case) {
            if (cls_index < static_cast<int>(rows.size())) {
                sum += rows[static_cast<size_t>(cls_index)].dsc;
                ++n;
            }
        }
        return n ? sum / static_cast<double>(n) : 0.0;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["num_classes"] = num_classes;
        j["mean_dsc_pct"] = fmt_fixed(mean_dsc() * 100.0, 4);
        const auto hd = mean_hd95();
        j["mean_hd95"] = hd ? nlohmann::ordered_json(fmt_fixed(*hd, 4))
                            : nlohmann::ordered_json(nullptr);
        j["hd95_skipped"] = hd95_skipped();
        nlohmann::ordered_json cls = nlohmann::ordered_json::array();
        for (int c = 0; c + 1 < num_classes; ++c)
            cls.push_back(fmt_fixed(class_mean_dsc(c) * 100.0, 4));
        j["class_mean_dsc_pct"] = cls;
        nlohmann::ordered_json cases;
        for (const auto& [id, rows] : per_case) {
            nlohmann::ordered_json rc = nlohmann::ordered_json::array();
            for (const auto& m : rows) {
                nlohmann::ordered_json e;
                e["dsc"] = fmt_fixed(m.dsc, 6);
                e["hd95"] = m.hd95 ? nlohmann::ordered_json(fmt_fixed(*m.hd95, 6))
                                   : nlohmann::ordered_json(nullptr);
                rc.push_back(e);
            }
            cases[id] = rc;
        }
        j["cases"] = cases;
        return j;
    }

    // Fixed-width table, columns: DSC(%) first, distance second, then the
    // per-class DSC columns.
    std::string to_table(const std::string& row_label) const {
        std::string out;
        out += pad("run", 18) + pad("DSC(%)", 10) + pad("HD95", 10);
        for (int c = 1; c < num_classes; ++c) out += pad("class" + std::to_string(c), 10);
        out += "\n";
        out += pad(row_label, 18) + pad(fmt_fixed(mean_dsc() * 100.0, 2), 10);
        const auto hd = mean_hd95();
        out += pad(hd ? fmt_fixed(*hd, 2) : std::string("n/a"), 10);
        for (int c = 0; c + 1 < num_classes; ++c)
            out += pad(fmt_fixed(class_mean_dsc(c) * 100.0, 2), 10);
        out += "\n";
        return out;
    }

    static std::string pad(const std::string& s, size_t width) {
        std::string r = s;
        while (r.size() < width) r += ' ';
        return r;
    }
};

}  // namespace spgcde
