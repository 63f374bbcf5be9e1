#include "slotwise/eval_harness.hpp"

#include "slotwise/concurrency.hpp"
#include "slotwise/error.hpp"
#include "slotwise/inference_pipeline.hpp"
#include "slotwise/resources.hpp"
#include "slotwise/session.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

namespace slotwise {
namespace {

using nlohmann::json;

std::string resolve(const std::string& base_dir, const std::string& path) {
    if (path.empty() || base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
    return (std::filesystem::path(base_dir) / path).string();
}

json optional_json(const auto& value) { return value ? json(*value) : json(nullptr); }

template <class T>
std::optional<T> optional_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

json messages_json(const std::vector<Message>& messages) {
    json out = json::array();
    for (const auto& m : messages) out.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return out;
}

struct WorkItem {
    std::string dataset;
    const DatasetRecord* record;
    std::string query;
    Strategy strategy;
    std::string role;
};

// Mean of the populated values, nullopt if none, or if any instance hit a
// hard error for this metric.
template <class Get>
std::optional<double> cell_mean(const std::vector<const InstanceResult*>& results, Get get, bool failed) {
    if (failed) return std::nullopt;
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto* r : results) {
        if (const auto v = get(*r)) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

class RunLog {
public:
    explicit RunLog(std::string path) : path_(std::move(path)) {}

    std::map<std::string, InstanceResult> load() const {
        std::map<std::string, InstanceResult> done;
        std::ifstream in(path_, std::ios::binary);
        if (!in) return done;
        std::string line;
        while (std::getline(in, line)) {
            const auto j = json::parse(line, nullptr, false);
            if (j.is_discarded()) continue;  // torn final line from an interrupted run
            try {
                auto r = InstanceResult::from_json(j);
                done[r.key()] = std::move(r);
            } catch (const Error&) {
            }
        }
        return done;
    }

    void append(const InstanceResult& r) {
        std::lock_guard lock(mutex_);
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        if (!out) throw Error(ErrorCode::Config, "cannot append to run log " + path_);
        out << r.to_json().dump() << '\n';
        out.flush();
    }

private:
    std::string path_;
    std::mutex mutex_;
};

}  // namespace

std::string_view to_string(Strategy strategy) {
    switch (strategy) {
        case Strategy::ZeroShot: return "zero_shot";
        case Strategy::FewShot: return "few_shot";
        case Strategy::SystemInstruction: return "system_instruction";
        case Strategy::Rpe: return "rpe";
    }
    return "rpe";
}

Strategy parse_strategy(std::string_view text) {
    for (const auto s : kAllStrategies) {
        if (to_string(s) == text) return s;
    }
    throw Error(ErrorCode::Config, "unknown strategy \"" + std::string(text) + "\"");
}

EvalConfig EvalConfig::from_json(const json& j, const std::string& base_dir) {
    if (!j.is_object()) throw Error(ErrorCode::Config, "eval config must be an object");
    EvalConfig c;
    try {
        for (const auto& d : j.at("datasets")) {
            DatasetSpec spec;
            spec.name = d.at("name").get<std::string>();
            spec.path = resolve(base_dir, d.at("path").get<std::string>());
            spec.format = parse_record_format(d.value("format", std::string("jsonl")));
            spec.columns = ColumnMap::from_json(d.at("columns"));
            c.datasets.push_back(std::move(spec));
        }
        if (j.contains("strategies")) {
            c.strategies.clear();
            for (const auto& s : j.at("strategies")) c.strategies.push_back(parse_strategy(s.get<std::string>()));
        }
        if (j.contains("roles")) c.roles = j.at("roles").get<std::vector<std::string>>();
        c.model = BackendConfig::from_json(j.at("model"), base_dir);
        if (j.contains("judge")) c.judge = BackendConfig::from_json(j.at("judge"), base_dir);
        if (j.contains("embedder")) c.embedder = BackendConfig::from_json(j.at("embedder"), base_dir);
        c.sample_fraction = j.value("sample_fraction", c.sample_fraction);
        c.seed = j.value("seed", c.seed);
        c.output_path = resolve(base_dir, j.value("output_path", c.output_path));
        if (j.contains("run_log_path")) c.run_log_path = resolve(base_dir, j.at("run_log_path").get<std::string>());
        c.parallelism = j.value("parallelism", c.parallelism);
        c.synthesize_with_model = j.value("synthesize_with_model", c.synthesize_with_model);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Config, std::string("eval config: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Config) throw;
        throw Error(ErrorCode::Config, std::string("eval config: ") + e.what());
    }
    if (c.datasets.empty()) throw Error(ErrorCode::Config, "eval config lists no datasets");
    if (c.strategies.empty()) throw Error(ErrorCode::Config, "eval config lists no strategies");
    if (c.roles.empty()) throw Error(ErrorCode::Config, "eval config lists no roles");
    for (const auto& r : c.roles) {
        if (r != PromptPair::kPatientRole && r != PromptPair::kProviderRole) {
            throw Error(ErrorCode::Config, "role must be patient or provider, got \"" + r + "\"");
        }
    }
    if (c.sample_fraction <= 0.0 || c.sample_fraction > 1.0) throw Error(ErrorCode::Config, "sample_fraction must be in (0, 1]");
    if (c.parallelism == 0) throw Error(ErrorCode::Config, "parallelism must be >= 1");
    return c;
}

EvalConfig EvalConfig::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Config, "cannot read " + path);
    const auto j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::Config, path + " is not valid JSON");
    return from_json(j, std::filesystem::path(path).parent_path().string());
}

StrategyAssets StrategyAssets::defaults() {
    StrategyAssets assets;
    const auto j = json::parse(resources::get("strategies/few_shot_exemplars.json"));
    for (const auto& e : j.at("exemplars")) {
        assets.exemplars.push_back({e.at("query").get<std::string>(), e.at("response").get<std::string>()});
    }
    assets.system_instruction = trim(resources::get("strategies/system_instruction.txt"));
    return assets;
}

std::string StrategyRequest::as_text() const {
    if (prompt) return *prompt;
    std::string out;
    for (const auto& m : messages) {
        if (!out.empty()) out += "\n\n";
        out += std::string(to_string(m.role)) + ": " + m.content;
    }
    return out;
}

StrategyRequest build_baseline_request(Strategy strategy, const std::string& query, const StrategyAssets& assets) {
    StrategyRequest request;
    switch (strategy) {
        case Strategy::ZeroShot:
            request.prompt = query;
            break;
        case Strategy::FewShot: {
            std::string prompt;
            for (const auto& e : assets.exemplars) prompt += "Q: " + e.query + "\nA: " + e.response + "\n\n";
            request.prompt = prompt + "Q: " + query + "\nA:";
            break;
        }
        case Strategy::SystemInstruction:
            request.messages = {{Role::System, assets.system_instruction}, {Role::User, query}};
            break;
        case Strategy::Rpe:
            throw Error(ErrorCode::InvalidArgument, "rpe requests are built by the inference pipeline");
    }
    return request;
}

std::string InstanceResult::key() const { return dataset + "/" + record_id + "/" + strategy + "/" + role; }

json InstanceResult::to_json() const {
    return {{"dataset", dataset},
            {"record_id", record_id},
            {"strategy", strategy},
            {"role", role},
            {"request", request},
            {"output", optional_json(output)},
            {"error", error},
            {"bleu", optional_json(bleu)},
            {"rouge_l", optional_json(rouge_l)},
            {"bert_score", optional_json(bert_score)},
            {"fs", optional_json(fs)},
            {"cas", optional_json(cas)},
            {"compliant", optional_json(compliant)},
            {"rubric", optional_json(rubric)},
            {"warnings", warnings}};
}

InstanceResult InstanceResult::from_json(const json& j) {
    try {
        InstanceResult r;
        r.dataset = j.at("dataset").get<std::string>();
        r.record_id = j.at("record_id").get<std::string>();
        r.strategy = j.at("strategy").get<std::string>();
        r.role = j.at("role").get<std::string>();
        r.request = j.value("request", json());
        r.output = optional_from<std::string>(j, "output");
        r.error = j.value("error", std::string());
        r.bleu = optional_from<double>(j, "bleu");
        r.rouge_l = optional_from<double>(j, "rouge_l");
        r.bert_score = optional_from<double>(j, "bert_score");
        r.fs = optional_from<int>(j, "fs");
        r.cas = optional_from<int>(j, "cas");
        r.compliant = optional_from<bool>(j, "compliant");
        r.rubric = optional_from<std::array<bool, 6>>(j, "rubric");
        r.warnings = j.value("warnings", std::vector<std::string>());
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Schema, std::string("instance result: ") + e.what());
    }
}

namespace {

InstanceResult run_instance(const WorkItem& item, const EvalDeps& deps) {
    InstanceResult r;
    r.dataset = item.dataset;
    r.record_id = item.record->record_id;
    r.strategy = std::string(to_string(item.strategy));
    r.role = item.role;

    StrategyRequest request;
    try {
        if (item.strategy == Strategy::Rpe) {
            PipelineDeps pd;
            pd.backend = deps.model;
            pd.composition = deps.composition;
            pd.clock = deps.clock;
            Session session("eval", deps.templates, {});
            const auto turn = InferencePipeline(std::move(pd)).run(UserInput{item.query, std::nullopt}, session,
                                                                   InferenceFlags());
            request.messages = assemble_messages(turn.system_instruction, turn.grounding, turn.user_prompt);
            r.output = turn.response;
            for (const auto& w : turn.warnings) r.warnings.push_back(w);
        } else {
            request = build_baseline_request(item.strategy, item.query, deps.assets);
            r.output = request.prompt ? deps.model->generate(*request.prompt) : deps.model->generate_chat(request.messages);
        }
    } catch (const Error& e) {
        r.error = e.what();
    }
    r.request = request.prompt ? json{{"prompt", *request.prompt}} : json{{"messages", messages_json(request.messages)}};
    if (!r.output) return r;
    const auto& output = *r.output;

    if (const auto& ref = item.record->reference_response) {
        const auto gen_tokens = TokenSeq::from_text(output);
        const auto ref_tokens = TokenSeq::from_text(*ref);
        const auto metric = [&](const char* name, auto fn, std::optional<double>& slot) {
            try {
                slot = fn();
            } catch (const Error& e) {
                r.warnings.push_back(std::string(name) + ": " + e.what());
            }
        };
        metric("bleu", [&] { return bleu(gen_tokens, ref_tokens); }, r.bleu);
        metric("rouge_l", [&] { return rouge_l(gen_tokens, ref_tokens); }, r.rouge_l);
        metric("bert_score", [&] { return bert_score(gen_tokens, ref_tokens, *deps.embedder); }, r.bert_score);
    }

    JudgeOptions options{deps.judge_templates, 1};
    const auto judge_metric = [&](const char* name, auto fn) {
        try {
            fn();
        } catch (const BackendUnavailable&) {
            throw;
        } catch (const Error& e) {
            r.warnings.push_back(std::string(name) + " failed: " + e.what());
        }
    };
    if (const auto& facts = item.record->reference_facts) {
        judge_metric("fs", [&] {
            r.fs = static_cast<int>(factuality_score({{output, *facts}}, *deps.judge, options).value);
        });
    }
    judge_metric("cas", [&] {
        r.cas = static_cast<int>(
            contextual_appropriateness({{output, describe_attributes(item.record->attributes)}}, *deps.judge, options)
                .value);
    });
    judge_metric("ics", [&] {
        const auto result = instructional_compliance({{output, request.as_text()}}, *deps.judge, options);
        r.compliant = result.value == 1.0;
        for (const auto& w : result.warnings) r.warnings.push_back(w);
    });
    judge_metric("wrr", [&] {
        const auto reply = deps.judge->generate(
            replace_all(deps.judge_templates.rubric, "{output}", output));
        if (const auto v = parse_rubric_reply(reply)) {
            r.rubric = v->rubric;
        } else {
            r.rubric = std::array<bool, 6>{};
            r.warnings.push_back("rubric reply unparseable; scored all zeros");
        }
    });
    return r;
}

}  // namespace

MetricReport run_eval(const EvalConfig& config, const EvalDeps& deps) {
    if (!deps.model || !deps.judge || !deps.embedder) throw Error(ErrorCode::Config, "eval needs model, judge and embedder");
    MetricReport report;

    // Records are kept alive here; work items point into them.
    std::vector<std::pair<std::string, std::vector<DatasetRecord>>> sampled;
    std::vector<std::pair<std::string, SynthesisRun>> synthesized;
    for (const auto& ds : config.datasets) {
        auto loaded = load_records(ds.path, ds.format, ds.columns);
        for (const auto& w : loaded.warnings) report.warnings.push_back(ds.name + ": " + w);
        sampled.emplace_back(ds.name, sample_records(loaded.records, config.sample_fraction, config.seed));
    }

    std::vector<WorkItem> items;
    std::map<std::pair<std::string, std::string>, const DatasetRecord*> by_id;
    for (const auto& [name, records] : sampled) {
        for (const auto& rec : records) by_id[{name, rec.record_id}] = &rec;
        auto run = synthesize_all(records, config.synthesize_with_model ? deps.model : nullptr);
        for (const auto& f : run.failures) report.warnings.push_back(name + ": synthesis failed for " + f);
        synthesized.emplace_back(name, std::move(run));
    }
    for (const auto& [name, run] : synthesized) {
        for (const auto& pair : run.pairs) {
            const auto* record = by_id.at({name, pair.source_record_id});
            for (const auto strategy : config.strategies) {
                for (const auto& role : config.roles) {
                    const auto& query = role == PromptPair::kPatientRole ? pair.patient_prompt : pair.provider_prompt;
                    items.push_back({name, record, query, strategy, role});
                }
            }
        }
    }

    const auto log_path = config.run_log_path.empty() ? config.output_path + ".runlog.jsonl" : config.run_log_path;
    RunLog log(log_path);
    auto done = log.load();
    std::vector<std::optional<InstanceResult>> fresh(items.size());
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto key = items[i].dataset + "/" + items[i].record->record_id + "/" +
                         std::string(to_string(items[i].strategy)) + "/" + items[i].role;
        if (!done.count(key)) pending.push_back(i);
    }
    parallel_for(pending.size(), config.parallelism, [&](std::size_t p) {
        const auto i = pending[p];
        auto result = run_instance(items[i], deps);
        log.append(result);
        fresh[i] = std::move(result);
    });
    for (auto& r : fresh) {
        if (r) done[r->key()] = std::move(*r);
    }

    // Aggregate in key order so the result is independent of completion order.
    std::map<CellKey, std::vector<const InstanceResult*>> cells;
    for (const auto& item : items) {
        const auto key = item.dataset + "/" + item.record->record_id + "/" + std::string(to_string(item.strategy)) +
                         "/" + item.role;
        const auto& r = done.at(key);
        cells[{item.dataset, deps.model->model_id(), std::string(to_string(item.strategy)), item.role}].push_back(&r);
    }
    for (const auto& [key, results] : cells) {
        std::vector<const InstanceResult*> ok;
        CellScores scores;
        bool fs_failed = false, cas_failed = false;
        for (const auto* r : results) {
            if (!r->output) {
                scores.warnings.push_back(r->record_id + ": " + r->error);
                continue;
            }
            ok.push_back(r);
            for (const auto& w : r->warnings) {
                if (w.starts_with("fs failed")) fs_failed = true;
                if (w.starts_with("cas failed")) cas_failed = true;
                scores.warnings.push_back(r->record_id + ": " + w);
            }
        }
        if (ok.empty()) {
            report.warnings.push_back(key.dataset + "/" + key.strategy + "/" + key.role + ": no successful instances");
            continue;
        }
        scores.instance_count = ok.size();
        scores.bleu = cell_mean(ok, [](const InstanceResult& r) { return r.bleu; }, false);
        scores.rouge_l = cell_mean(ok, [](const InstanceResult& r) { return r.rouge_l; }, false);
        scores.bert_score = cell_mean(ok, [](const InstanceResult& r) { return r.bert_score; }, false);
        scores.fs = cell_mean(
            ok, [](const InstanceResult& r) { return r.fs ? std::optional<double>(*r.fs) : std::nullopt; }, fs_failed);
        scores.cas = cell_mean(
            ok, [](const InstanceResult& r) { return r.cas ? std::optional<double>(*r.cas) : std::nullopt; }, cas_failed);
        scores.ics = cell_mean(
            ok, [](const InstanceResult& r) { return r.compliant ? std::optional<double>(*r.compliant ? 1.0 : 0.0) : std::nullopt; },
            false);
        scores.wrr = cell_mean(
            ok,
            [](const InstanceResult& r) -> std::optional<double> {
                if (!r.rubric) return std::nullopt;
                double ones = 0;
                for (const bool b : *r.rubric) ones += b ? 1 : 0;
                return ones / 6.0;
            },
            false);
        if (fs_failed) scores.warnings.push_back("fs absent: at least one judge reply failed");
        if (cas_failed) scores.warnings.push_back("cas absent: at least one judge reply failed");
        report.cells[key] = std::move(scores);
    }

    if (!config.output_path.empty()) {
        std::ofstream out(config.output_path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Config, "cannot write " + config.output_path);
        out << report.to_json().dump(2) << '\n';
        std::ofstream table(std::filesystem::path(config.output_path).replace_extension(".txt"),
                            std::ios::binary | std::ios::trunc);
        table << report.to_table();
    }
    return report;
}

MetricReport run_eval(const EvalConfig& config) {
    const auto model = make_backend(config.model);
    const auto judge = config.judge ? make_backend(*config.judge) : model;
    std::unique_ptr<Embedder> embedder;
    if (config.embedder) {
        embedder = std::make_unique<RemoteEmbedder>(*config.embedder, make_http_transport());
    } else {
        embedder = std::make_unique<OneHotEmbedder>();
    }
    EvalDeps deps;
    deps.model = model.get();
    deps.judge = judge.get();
    deps.embedder = embedder.get();
    return run_eval(config, deps);
}

}  // namespace slotwise
