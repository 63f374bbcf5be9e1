#include "slotwise/inference_pipeline.hpp"

#include "slotwise/error.hpp"

namespace slotwise {

InferenceFlags::InferenceFlags(bool use_rag, bool use_web, bool use_agent)
    : use_rag_(use_rag), use_web_(use_web), use_agent_(use_agent) {
    if (use_rag && use_web) throw Error(ErrorCode::InvalidArgument, "use_rag and use_web are mutually exclusive");
}

std::vector<Message> assemble_messages(const std::string& system_instruction, const std::vector<Snippet>& snippets,
                                       const std::string& user_prompt) {
    if (system_instruction.empty()) throw Error(ErrorCode::ProtocolError, "empty system instruction");
    if (user_prompt.empty()) throw Error(ErrorCode::ProtocolError, "empty user prompt");
    std::vector<Message> messages{{Role::System, system_instruction}};
    if (!snippets.empty()) {
        std::string evidence(kEvidencePrefix);
        for (std::size_t i = 0; i < snippets.size(); ++i) {
            if (i) evidence.push_back('\n');
            evidence += snippets[i].text;
        }
        messages.push_back({Role::Assistant, std::move(evidence)});
    }
    messages.push_back({Role::User, user_prompt});
    return messages;
}

InferencePipeline::InferencePipeline(PipelineDeps deps) : deps_(std::move(deps)) {
    if (!deps_.backend) throw Error(ErrorCode::Config, "pipeline needs a backend");
    if (!deps_.clock) deps_.clock = now_utc;
}

TurnRecord InferencePipeline::run(const MediaInput& input, Session& session, const InferenceFlags& flags) const {
    if (input.kind == MediaKind::Text) return run(UserInput{input.payload, std::nullopt}, session, flags);
    return run(UserInput{"", input}, session, flags);
}

TurnRecord InferencePipeline::run(const UserInput& input, Session& session, const InferenceFlags& flags) const {
    const auto& backend = *deps_.backend;
    TurnRecord turn;
    turn.timestamp = deps_.clock();
    turn.slot_templates = session.state().current_templates;

    if (!is_valid_utf8(input.text)) throw Error(ErrorCode::InvalidArgument, "input text is not valid UTF-8");
    std::string text = trim(input.text);
    if (input.media) {
        try {
            const auto description = trim(convert_to_text(*input.media, backend));
            if (!description.empty()) text = text.empty() ? description : text + "\n" + description;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::UnsupportedModality || text.empty()) throw;
            turn.warnings.push_back(std::string("media ignored: ") + e.what());
        }
    }
    if (text.empty()) throw Error(ErrorCode::InvalidArgument, "input is empty");
    turn.user_input_text = text;

    auto extraction = extract_all_slots(text, turn.slot_templates, backend);
    turn.slot_set = std::move(extraction.slots);
    for (auto& w : extraction.warnings) turn.warnings.push_back(std::move(w));

    turn.user_prompt = compose_user_prompt(turn.slot_set, deps_.composition);
    turn.system_instruction = compose_system_instruction(turn.slot_set, deps_.composition, &turn.warnings);

    if (flags.use_rag() || flags.use_web()) {
        try {
            // Section labels are layout, not content, so they never become search terms.
            std::vector<std::string> content;
            for (const auto& section : deps_.composition.user_sections) {
                if (!turn.slot_set[section.slot].empty()) content.push_back(turn.slot_set[section.slot]);
            }
            const auto keywords =
                extract_keywords(join(content, "\n"), deps_.keyword_mode, &backend, deps_.stopwords);
            if (flags.use_rag()) {
                if (!deps_.store) throw Error(ErrorCode::Config, "no document store configured");
                turn.grounding = rag_search(*deps_.store, keywords, kMaxGroundingSnippets);
            } else {
                if (!deps_.search) throw Error(ErrorCode::WebSearchUnavailable, "no search provider configured");
                turn.grounding = web_search(*deps_.search, keywords, kMaxGroundingSnippets);
            }
        } catch (const BackendUnavailable&) {
            throw;
        } catch (const Error& e) {
            turn.warnings.push_back(std::string("grounding skipped: ") + e.what());
            turn.grounding.clear();
        }
    }

    if (flags.use_agent()) {
        try {
            if (!deps_.agents) throw Error(ErrorCode::Config, "no agent registry configured");
            auto parsed = identify_agent_tasks(turn.user_prompt, turn.system_instruction, backend);
            for (auto& w : parsed.warnings) turn.warnings.push_back(std::move(w));
            const TaskContext context{turn.user_prompt, turn.grounding, &backend};
            for (const auto& task : parsed.tasks) {
                turn.agent_results.push_back(execute_task(task, context, *deps_.agents));
            }
        } catch (const BackendUnavailable&) {
            throw;
        } catch (const Error& e) {
            turn.warnings.push_back(std::string("agent tasks skipped: ") + e.what());
        }
    }

    const auto messages = assemble_messages(turn.system_instruction, turn.grounding, turn.user_prompt);
    turn.response = backend.generate_chat(messages);
    if (turn.response.empty()) throw Error(ErrorCode::ProtocolError, "backend returned an empty response");
    if (!turn.agent_results.empty()) {
        turn.response += kAgentActionsHeader;
        for (std::size_t i = 0; i < turn.agent_results.size(); ++i) {
            if (i) turn.response.push_back('\n');
            turn.response += turn.agent_results[i].summary_line();
        }
    }

    session.append_turn(turn);
    return turn;
}

}  // namespace slotwise
