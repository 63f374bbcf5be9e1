#pragma once

#include "slotwise/agents.hpp"
#include "slotwise/grounding.hpp"
#include "slotwise/llm_gateway.hpp"
#include "slotwise/prompt_composer.hpp"
#include "slotwise/session.hpp"
#include "slotwise/text.hpp"

#include <optional>
#include <string>
#include <vector>

namespace slotwise {

class InferenceFlags {
public:
    // Throws Error(InvalidArgument) when both retrieval sources are requested.
    explicit InferenceFlags(bool use_rag = false, bool use_web = false, bool use_agent = false);

    bool use_rag() const { return use_rag_; }
    bool use_web() const { return use_web_; }
    bool use_agent() const { return use_agent_; }

private:
    bool use_rag_;
    bool use_web_;
    bool use_agent_;
};

inline constexpr std::string_view kEvidencePrefix = "[Retrieved Evidence] ";
inline constexpr std::string_view kAgentActionsHeader = "\n[Agent Actions]\n";

// [system, assistant evidence (only with snippets), user].
// Throws Error(ProtocolError) for an empty instruction or prompt.
std::vector<Message> assemble_messages(const std::string& system_instruction,
                                       const std::vector<Snippet>& snippets,
                                       const std::string& user_prompt);

struct UserInput {
    std::string text;
    std::optional<MediaInput> media;
};

struct PipelineDeps {
    const LlmBackend* backend = nullptr;
    CompositionTemplate composition = CompositionTemplate::defaults_shipped();
    const DocumentStore* store = nullptr;
    const SearchProvider* search = nullptr;
    const AgentRegistry* agents = nullptr;
    KeywordMode keyword_mode = KeywordMode::Heuristic;
    StopwordList stopwords = StopwordList::defaults();
    Clock clock = now_utc;
};

class InferencePipeline {
public:
    explicit InferencePipeline(PipelineDeps deps);

    // One full turn against `session`, which the caller holds exclusively.
    // BackendUnavailable (and protocol errors) abort without touching the
    // session; grounding and agent failures become warnings on the record.
    TurnRecord run(const UserInput& input, Session& session, const InferenceFlags& flags) const;
    TurnRecord run(const MediaInput& input, Session& session, const InferenceFlags& flags) const;

    const PipelineDeps& deps() const { return deps_; }

private:
    PipelineDeps deps_;
};

}  // namespace slotwise
