#include "slotwise/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace slotwise {
namespace {

struct Column {
    const char* name;
    std::optional<double> CellScores::*score;
    double lo;
    double hi;
};

// BERTScore can go negative with a learned embedder.
constexpr Column kColumns[] = {
    {"bleu", &CellScores::bleu, 0.0, 1.0},      {"rouge_l", &CellScores::rouge_l, 0.0, 1.0},
    {"bert_score", &CellScores::bert_score, -1.0, 1.0}, {"fs", &CellScores::fs, 1.0, 5.0},
    {"cas", &CellScores::cas, 1.0, 5.0},        {"ics", &CellScores::ics, 0.0, 1.0},
    {"wrr", &CellScores::wrr, 0.0, 1.0},
};

std::string describe(const CellKey& k) { return k.dataset + "/" + k.model + "/" + k.strategy + "/" + k.role; }

}  // namespace

std::vector<std::string> MetricReport::range_violations() const {
    std::vector<std::string> out;
    for (const auto& [key, scores] : cells) {
        if (scores.instance_count == 0) out.push_back(describe(key) + ": no instances");
        for (const auto& col : kColumns) {
            const auto& value = scores.*col.score;
            if (!value) continue;
            if (!std::isfinite(*value) || *value < col.lo || *value > col.hi) {
                out.push_back(describe(key) + ": " + col.name + " = " + std::to_string(*value) + " outside [" +
                              std::to_string(col.lo) + ", " + std::to_string(col.hi) + "]");
            }
        }
    }
    return out;
}

nlohmann::json MetricReport::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [key, scores] : cells) {
        nlohmann::json row{{"dataset", key.dataset}, {"model", key.model}, {"strategy", key.strategy},
                           {"role", key.role}, {"instance_count", scores.instance_count},
                           {"warnings", scores.warnings}};
        for (const auto& col : kColumns) {
            const auto& value = scores.*col.score;
            row[col.name] = value ? nlohmann::json(*value) : nlohmann::json(nullptr);
        }
        rows.push_back(std::move(row));
    }
    return {{"cells", rows}, {"warnings", warnings}};
}

std::string MetricReport::to_table() const {
    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-14s %-18s %-18s %-9s %5s", "dataset", "model", "strategy", "role", "n");
    out << buf;
    for (const auto& col : kColumns) {
        std::snprintf(buf, sizeof buf, " %10s", col.name);
        out << buf;
    }
    out << '\n';
    for (const auto& [key, scores] : cells) {
        std::snprintf(buf, sizeof buf, "%-14s %-18s %-18s %-9s %5zu", key.dataset.c_str(), key.model.c_str(),
                      key.strategy.c_str(), key.role.c_str(), scores.instance_count);
        out << buf;
        for (const auto& col : kColumns) {
            const auto& value = scores.*col.score;
            if (value) {
                std::snprintf(buf, sizeof buf, " %10.4f", *value);
            } else {
                std::snprintf(buf, sizeof buf, " %10s", "-");
            }
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace slotwise
