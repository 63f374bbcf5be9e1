// slotwise command-line entry point.
#include "slotwise/agents.hpp"
#include "slotwise/error.hpp"
#include "slotwise/eval_harness.hpp"
#include "slotwise/feedback.hpp"
#include "slotwise/inference_pipeline.hpp"
#include "slotwise/prompt_composer.hpp"
#include "slotwise/prompt_synth.hpp"
#include "slotwise/service.hpp"
#include "slotwise/slot_engine.hpp"

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI/CLI.hpp>
#include <pthread.h>

namespace {

using namespace slotwise;

std::string read_text(const std::string& path) {
    if (path == "-") {
        std::stringstream buf;
        buf << std::cin.rdbuf();
        return buf.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Config, "cannot read " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct EngineOptions {
    std::string backend;
    std::string templates;
    std::string docs;
    std::string search_fixture;
    std::string outbox = "outbox";
    bool model_keywords = false;
};

void add_engine_options(CLI::App* cmd, EngineOptions& o) {
    cmd->add_option("--backend", o.backend, "Backend config JSON file")->envname("SLOTWISE_BACKEND")->required();
    cmd->add_option("--templates", o.templates, "Slot template JSON file (defaults to the shipped set)")
        ->envname("SLOTWISE_TEMPLATES");
    cmd->add_option("--docs", o.docs, "Document store JSON for retrieval")->envname("SLOTWISE_DOCS");
    cmd->add_option("--search-fixture", o.search_fixture, "Canned web search results JSON")
        ->envname("SLOTWISE_SEARCH_FIXTURE");
    cmd->add_option("--outbox", o.outbox, "Directory for outgoing email files")->envname("SLOTWISE_OUTBOX");
    cmd->add_flag("--model-keywords", o.model_keywords, "Ask the model for retrieval keywords");
}

struct Engine {
    std::shared_ptr<LlmBackend> backend;
    TemplateSet templates;
    std::shared_ptr<DocumentStore> store;
    std::shared_ptr<SearchProvider> search;
    std::shared_ptr<AgentRegistry> agents;
};

Engine build_engine(const EngineOptions& o) {
    Engine e;
    e.backend = make_backend(BackendConfig::load_file(o.backend));
    e.templates = o.templates.empty() ? TemplateSet::defaults() : TemplateSet::load_file(o.templates);
    if (!o.docs.empty()) e.store = DocumentStore::load(o.docs);
    if (!o.search_fixture.empty()) {
        e.search = std::make_shared<FixtureSearchProvider>(
            FixtureSearchProvider::from_json(nlohmann::json::parse(read_text(o.search_fixture))));
    }
    e.agents = std::make_shared<AgentRegistry>();
    e.agents->register_handler(std::string(kSendEmail), make_email_handler(std::make_shared<EmailOutbox>(o.outbox)));
    return e;
}

int cmd_extract(const EngineOptions& o, const std::string& text, const std::string& input) {
    const auto engine = build_engine(o);
    const auto source = text.empty() ? read_text(input.empty() ? "-" : input) : text;
    const auto result = extract_all_slots(trim(source), engine.templates, *engine.backend);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << result.slots.to_json().dump(2) << '\n';
    return 0;
}

int cmd_compose(const std::string& slots_path, const std::string& composition_path) {
    const auto slots = SlotSet::from_json(nlohmann::json::parse(read_text(slots_path)));
    const auto tmpl = composition_path.empty() ? CompositionTemplate::defaults_shipped()
                                               : CompositionTemplate::load_file(composition_path);
    const auto composed = compose(slots, tmpl);
    nlohmann::ordered_json out;
    out["user_prompt"] = composed.user_prompt;
    out["system_instruction"] = composed.system_instruction;
    out["warnings"] = composed.warnings;
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_chat(const EngineOptions& o, const std::string& session_id, const std::string& sessions_dir,
             bool use_rag, bool use_web, bool use_agent) {
    const InferenceFlags flags(use_rag, use_web, use_agent);
    const auto engine = build_engine(o);
    SessionStore store(sessions_dir, engine.templates);
    PipelineDeps deps;
    deps.backend = engine.backend.get();
    deps.store = engine.store.get();
    deps.search = engine.search.get();
    deps.agents = engine.agents.get();
    deps.keyword_mode = o.model_keywords ? KeywordMode::Model : KeywordMode::Heuristic;
    const InferencePipeline pipeline(std::move(deps));

    std::cerr << "session " << session_id << ". Commands: /feedback <text>, /like, /dislike, /quit\n";
    std::string line;
    while (std::cerr << "> " && std::getline(std::cin, line)) {
        line = trim(line);
        if (line.empty()) continue;
        if (line == "/quit") break;
        try {
            auto lease = store.open(session_id);
            if (line.starts_with("/")) {
                FeedbackInput fb;
                if (line == "/like" || line == "/dislike") {
                    fb.kind = FeedbackInput::Kind::Rating;
                    fb.rating = line == "/like" ? FeedbackInput::Rating::Like : FeedbackInput::Rating::Dislike;
                } else if (line.starts_with("/feedback ")) {
                    fb.text = trim(line.substr(10));
                } else {
                    std::cerr << "unknown command\n";
                    continue;
                }
                const auto& history = lease->state().history;
                if (history.empty()) {
                    std::cerr << "no turn to give feedback on yet\n";
                    continue;
                }
                fb.target_turn_index = static_cast<int>(history.size() - 1);
                lease->record_feedback(fb);
                const auto update = update_slots_from_feedback(fb, *lease, *engine.backend);
                for (const auto& w : update.warnings) std::cerr << "warning: " << w << '\n';
                if (update.changed) {
                    std::cout << "[" << to_string(*update.slot) << "] " << update.directive << '\n';
                } else {
                    std::cout << "[no change]\n";
                }
                continue;
            }
            const auto turn = pipeline.run(UserInput{line, std::nullopt}, *lease, flags);
            for (const auto& w : turn.warnings) std::cerr << "warning: " << w << '\n';
            std::cout << turn.response << '\n';
        } catch (const Error& e) {
            std::cerr << "error: " << e.what() << '\n';
        }
    }
    return 0;
}

int cmd_eval(const std::string& config_path) {
    const auto config = EvalConfig::load_file(config_path);
    const auto report = run_eval(config);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << report.to_table();
    std::cerr << "report written to " << config.output_path << '\n';
    return report.cells.empty() ? 1 : 0;
}

int cmd_synth(const std::string& input, const std::string& format, const std::string& columns_path,
              const std::string& output, double fraction, std::uint64_t seed) {
    const auto columns = ColumnMap::from_json(nlohmann::json::parse(read_text(columns_path)));
    const auto resolved = !format.empty()                                             ? format
                          : std::filesystem::path(input).extension() == ".csv" ? "csv"
                                                                                 : "jsonl";
    const auto loaded = load_records(input, parse_record_format(resolved), columns);
    for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << '\n';
    const auto run = synthesize_all(sample_records(loaded.records, fraction, seed), nullptr);
    for (const auto& f : run.failures) std::cerr << "synthesis failed: " << f << '\n';
    write_pairs_jsonl(output, run.pairs);
    std::cerr << run.pairs.size() << " pairs written to " << output << '\n';
    return 0;
}

int cmd_serve(const EngineOptions& o, const std::string& host, int port, const std::string& sessions_dir) {
    // Block termination signals before any thread starts; a dedicated thread
    // waits for them and shuts the listener down.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    const auto engine = build_engine(o);
    ServiceConfig config;
    config.sessions_dir = sessions_dir;
    config.templates = engine.templates;
    config.backend = engine.backend;
    config.store = engine.store;
    config.search = engine.search;
    config.agents = engine.agents;
    config.keyword_mode = o.model_keywords ? KeywordMode::Model : KeywordMode::Heuristic;
    Service service(std::move(config));
    HttpServer server(service);
    const int bound = server.bind(host, port);
    if (bound < 0) {
        std::cerr << "error: cannot bind " << host << ":" << port << '\n';
        return 1;
    }
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });
    waiter.detach();
    std::cout << "listening on " << host << ":" << bound << std::endl;
    server.listen();
    service.join_jobs();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"slotwise: slot-based prompt engine for health assistants"};
    app.set_config("--config", "", "TOML file with default option values");
    app.require_subcommand(1);

    EngineOptions engine;

    auto* extract = app.add_subcommand("extract", "Extract the seven prompt slots from a request");
    std::string text, input;
    add_engine_options(extract, engine);
    extract->add_option("--text", text, "Request text");
    extract->add_option("--input", input, "File holding the request ('-' for stdin)");

    auto* compose_cmd = app.add_subcommand("compose", "Compose prompts from a slot set JSON file");
    std::string slots_path, composition_path;
    compose_cmd->add_option("slots", slots_path, "Slot set JSON file")->required();
    compose_cmd->add_option("--composition", composition_path, "Composition template JSON file");

    auto* chat = app.add_subcommand("chat", "Interactive chat session");
    std::string session_id = "cli", sessions_dir = "sessions";
    bool use_rag = false, use_web = false, use_agent = false;
    add_engine_options(chat, engine);
    chat->add_option("--session", session_id, "Session id");
    chat->add_option("--sessions-dir", sessions_dir, "Session log directory")->envname("SLOTWISE_SESSIONS_DIR");
    chat->add_flag("--use-rag", use_rag, "Ground answers in the document store");
    chat->add_flag("--use-web", use_web, "Ground answers in web search results");
    chat->add_flag("--use-agent", use_agent, "Let the model request agent actions");

    auto* eval = app.add_subcommand("eval", "Run a strategy comparison");
    std::string eval_config;
    eval->add_option("config", eval_config, "Eval config JSON file")->required();

    auto* synth = app.add_subcommand("synth", "Synthesize patient/provider prompt pairs from a dataset");
    std::string synth_input, synth_format, synth_columns, synth_output = "pairs.jsonl";
    double fraction = 1.0;
    std::uint64_t seed = 42;
    synth->add_option("input", synth_input, "Dataset file")->required();
    synth->add_option("--format", synth_format, "csv or jsonl (default: from the file extension)");
    synth->add_option("--columns", synth_columns, "Column map JSON file")->required();
    synth->add_option("--output", synth_output, "Output JSON Lines file");
    synth->add_option("--sample-fraction", fraction, "Fraction of records to keep");
    synth->add_option("--seed", seed, "Sampling seed");

    auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
    std::string host = "127.0.0.1";
    int port = 8080;
    add_engine_options(serve, engine);
    serve->add_option("--host", host, "Listen address")->envname("SLOTWISE_HOST");
    serve->add_option("--port", port, "Listen port (0 picks a free one)")->envname("SLOTWISE_PORT");
    serve->add_option("--sessions-dir", sessions_dir, "Session log directory")->envname("SLOTWISE_SESSIONS_DIR");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*extract) return cmd_extract(engine, text, input);
        if (*compose_cmd) return cmd_compose(slots_path, composition_path);
        if (*chat) return cmd_chat(engine, session_id, sessions_dir, use_rag, use_web, use_agent);
        if (*eval) return cmd_eval(eval_config);
        if (*synth) return cmd_synth(synth_input, synth_format, synth_columns, synth_output, fraction, seed);
        if (*serve) return cmd_serve(engine, host, port, sessions_dir);
    } catch (const LocatedError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
