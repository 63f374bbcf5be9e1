#pragma once

#include "slotwise/llm_gateway.hpp"
#include "slotwise/metrics.hpp"
#include "slotwise/prompt_composer.hpp"
#include "slotwise/prompt_synth.hpp"
#include "slotwise/report.hpp"
#include "slotwise/slot_engine.hpp"
#include "slotwise/judge.hpp"
#include "slotwise/text.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace slotwise {

enum class Strategy { ZeroShot, FewShot, SystemInstruction, Rpe };

inline constexpr std::array<Strategy, 4> kAllStrategies = {
    Strategy::ZeroShot, Strategy::FewShot, Strategy::SystemInstruction, Strategy::Rpe};

std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view text);

struct DatasetSpec {
    std::string name;
    std::string path;
    RecordFormat format = RecordFormat::Jsonl;
    ColumnMap columns;
};

struct EvalConfig {
    std::vector<DatasetSpec> datasets;
    std::vector<Strategy> strategies{kAllStrategies.begin(), kAllStrategies.end()};
    std::vector<std::string> roles{"patient", "provider"};
    BackendConfig model;
    std::optional<BackendConfig> judge;     // defaults to the model backend
    std::optional<BackendConfig> embedder;  // remote embeddings; one-hot when absent
    double sample_fraction = 0.15;
    std::uint64_t seed = 42;
    std::string output_path = "eval_report.json";
    std::string run_log_path;  // defaults to <output_path>.runlog.jsonl
    std::size_t parallelism = 4;
    bool synthesize_with_model = false;

    // Relative paths resolve against base_dir. Throws Error(Config).
    static EvalConfig from_json(const nlohmann::json& j, const std::string& base_dir = "");
    static EvalConfig load_file(const std::string& path);
};

// What the three baseline strategies send besides the query.
struct StrategyAssets {
    std::vector<ExamplePair> exemplars;
    std::string system_instruction;

    static StrategyAssets defaults();
};

// The exact request one strategy sends. Zero-shot and few-shot send a single
// prompt, system-instruction sends [system, user]; rpe goes through the full
// pipeline and fills `messages` afterwards.
struct StrategyRequest {
    std::optional<std::string> prompt;
    std::vector<Message> messages;

    // Flattened text handed to the compliance judge as prompt_i.
    std::string as_text() const;
};

StrategyRequest build_baseline_request(Strategy strategy, const std::string& query,
                                       const StrategyAssets& assets);

struct EvalDeps {
    const LlmBackend* model = nullptr;
    const Generator* judge = nullptr;
    const Embedder* embedder = nullptr;
    StrategyAssets assets = StrategyAssets::defaults();
    TemplateSet templates;
    CompositionTemplate composition = CompositionTemplate::defaults_shipped();
    JudgeTemplates judge_templates = JudgeTemplates::defaults();
    Clock clock = now_utc;
};

// Per-(instance, strategy, role) outcome, one JSON line in the run log.
struct InstanceResult {
    std::string dataset;
    std::string record_id;
    std::string strategy;
    std::string role;
    nlohmann::json request;  // what was sent to the model
    std::optional<std::string> output;
    std::string error;
    std::optional<double> bleu;
    std::optional<double> rouge_l;
    std::optional<double> bert_score;
    std::optional<int> fs;
    std::optional<int> cas;
    std::optional<bool> compliant;
    std::optional<std::array<bool, 6>> rubric;
    std::vector<std::string> warnings;

    std::string key() const;
    nlohmann::json to_json() const;
    static InstanceResult from_json(const nlohmann::json& j);
};

// Synthesizes prompt pairs, runs every strategy for every role, scores each
// output, and aggregates per (dataset, model, strategy, role). Instances
// already present in the run log are not re-run. Writes the JSON report to
// output_path and the table next to it (.txt).
MetricReport run_eval(const EvalConfig& config, const EvalDeps& deps);
// Builds backends, judge and embedder from the config.
MetricReport run_eval(const EvalConfig& config);

}  // namespace slotwise
