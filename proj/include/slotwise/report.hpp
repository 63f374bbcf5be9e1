#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

namespace slotwise {

struct CellKey {
    std::string dataset;
    std::string model;
    std::string strategy;
    std::string role;

    auto operator<=>(const CellKey&) const = default;
};

// Absent scores are nullopt: no reference, no facts, or no successful
// instance for that metric.
struct CellScores {
    std::optional<double> bleu;
    std::optional<double> rouge_l;
    std::optional<double> bert_score;
    std::optional<double> fs;
    std::optional<double> cas;
    std::optional<double> ics;
    std::optional<double> wrr;
    std::size_t instance_count = 0;
    std::vector<std::string> warnings;
};

struct MetricReport {
    std::map<CellKey, CellScores> cells;
    std::vector<std::string> warnings;

    // Human-readable range violations; empty when every populated score is
    // within its range and every cell has at least one instance.
    std::vector<std::string> range_violations() const;

    nlohmann::json to_json() const;
    // Fixed-width table: dataset, model, strategy, role, n, then the seven
    // scores; "-" marks an absent score.
    std::string to_table() const;
};

}  // namespace slotwise
