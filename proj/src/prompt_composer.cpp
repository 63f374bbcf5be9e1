#include "slotwise/prompt_composer.hpp"

#include "slotwise/error.hpp"
#include "slotwise/resources.hpp"
#include "slotwise/text.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace slotwise {
namespace {

std::vector<CompositionTemplate::Section> parse_sections(const nlohmann::json& j, const char* field) {
    const auto it = j.find(field);
    if (it == j.end() || !it->is_array() || it->empty()) {
        throw Error(ErrorCode::Schema, std::string("composition: \"") + field + "\" must be a non-empty array");
    }
    std::vector<CompositionTemplate::Section> out;
    for (const auto& entry : *it) {
        if (!entry.is_object() || !entry.contains("slot") || !entry.contains("label") ||
            !entry["slot"].is_string() || !entry["label"].is_string()) {
            throw Error(ErrorCode::Schema, std::string("composition: bad section in \"") + field + "\"");
        }
        const auto name = parse_slot_name(entry["slot"].get<std::string>());
        if (!name) throw Error(ErrorCode::Schema, "composition: unknown slot " + entry["slot"].dump());
        auto label = entry["label"].get<std::string>();
        if (trim(label).empty()) throw Error(ErrorCode::Schema, "composition: empty label");
        out.push_back({*name, std::move(label)});
    }
    return out;
}

std::string render_section(const std::string& label, const std::string& value) {
    if (value.find('\n') != std::string::npos) return label + ":\n" + value;
    return label + ": " + value;
}

std::optional<std::string> prefixed(std::string_view line, std::initializer_list<std::string_view> prefixes) {
    const auto lower = to_lower_ascii(line);
    for (auto p : prefixes) {
        if (lower.rfind(p, 0) == 0) return trim(line.substr(p.size()));
    }
    return std::nullopt;
}

std::optional<std::vector<ExamplePair>> parse_json_examples(std::string_view text) {
    const auto doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_array() || doc.empty()) return std::nullopt;
    std::vector<ExamplePair> pairs;
    for (const auto& item : doc) {
        ExamplePair pair;
        if (item.is_object()) {
            auto field = [&](const char* a, const char* b) -> std::optional<std::string> {
                for (const char* key : {a, b}) {
                    const auto it = item.find(key);
                    if (it != item.end() && it->is_string()) return trim(it->get<std::string>());
                }
                return std::nullopt;
            };
            const auto q = field("query", "input");
            const auto r = field("response", "output");
            if (!q || !r) return std::nullopt;
            pair = {*q, *r};
        } else if (item.is_array() && item.size() == 2 && item[0].is_string() && item[1].is_string()) {
            pair = {trim(item[0].get<std::string>()), trim(item[1].get<std::string>())};
        } else {
            return std::nullopt;
        }
        if (pair.query.empty() || pair.response.empty()) return std::nullopt;
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

}  // namespace

CompositionTemplate CompositionTemplate::from_json_text(std::string_view text) {
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::Schema, "composition: invalid JSON document");
    if (!j.contains("version") || j["version"] != 1) {
        throw Error(ErrorCode::Schema, "composition: unsupported or missing \"version\" (expected 1)");
    }
    CompositionTemplate tmpl;
    tmpl.user_sections = parse_sections(j, "user_prompt");
    tmpl.system_sections = parse_sections(j, "system_instruction");
    if (j.contains("section_separator")) {
        if (!j["section_separator"].is_string()) throw Error(ErrorCode::Schema, "composition: bad separator");
        tmpl.separator = j["section_separator"].get<std::string>();
    }

    std::set<SlotName> seen;
    bool has_query = false;
    for (const auto& list : {&tmpl.user_sections, &tmpl.system_sections}) {
        for (const auto& s : *list) {
            if (!seen.insert(s.slot).second) {
                throw Error(ErrorCode::Schema, "composition: slot " + std::string(to_string(s.slot)) +
                                                   " appears more than once");
            }
        }
    }
    for (const auto& s : tmpl.user_sections) has_query = has_query || s.slot == SlotName::UQ;
    if (!has_query) throw Error(ErrorCode::Schema, "composition: user_prompt must include UQ");

    if (j.contains("defaults")) {
        if (!j["defaults"].is_object()) throw Error(ErrorCode::Schema, "composition: \"defaults\" must be an object");
        for (const auto& [key, value] : j["defaults"].items()) {
            const auto name = parse_slot_name(key);
            if (!name || (*name != SlotName::ROLE && *name != SlotName::TONE && *name != SlotName::FILT)) {
                throw Error(ErrorCode::Schema, "composition: defaults allowed only for ROLE, TONE, FILT");
            }
            if (!value.is_string() || trim(value.get<std::string>()).empty()) {
                throw Error(ErrorCode::Schema, "composition: default for " + key + " must be non-empty text");
            }
            tmpl.defaults[*name] = value.get<std::string>();
        }
    }
    return tmpl;
}

CompositionTemplate CompositionTemplate::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Config, "cannot read composition template " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

CompositionTemplate CompositionTemplate::defaults_shipped() {
    static const CompositionTemplate shipped = from_json_text(resources::get("composition.json"));
    return shipped;
}

std::vector<std::string> CompositionTemplate::labels() const {
    std::vector<std::string> out;
    for (const auto& s : user_sections) out.push_back(s.label);
    for (const auto& s : system_sections) out.push_back(s.label);
    return out;
}

std::optional<std::vector<ExamplePair>> parse_examples(std::string_view text) {
    const auto body = trim(text);
    if (body.empty()) return std::nullopt;
    if (body.front() == '[') return parse_json_examples(body);

    std::vector<ExamplePair> pairs;
    std::optional<std::string> pending_query;
    for (const auto& raw : split_lines(body)) {
        const auto line = trim(raw);
        if (line.empty()) continue;
        if (auto q = prefixed(line, {"query:", "q:"})) {
            if (pending_query || q->empty()) return std::nullopt;
            pending_query = std::move(*q);
        } else if (auto r = prefixed(line, {"response:", "a:"})) {
            if (!pending_query || r->empty()) return std::nullopt;
            pairs.push_back({std::move(*pending_query), std::move(*r)});
            pending_query.reset();
        } else {
            return std::nullopt;
        }
    }
    if (pending_query || pairs.empty()) return std::nullopt;
    return pairs;
}

std::string compose_user_prompt(const SlotSet& slots, const CompositionTemplate& tmpl) {
    if (trim(slots[SlotName::UQ]).empty()) {
        throw Error(ErrorCode::MissingQuery, "user prompt needs a non-empty UQ slot");
    }
    bool has_optional = false;
    for (const auto& s : tmpl.user_sections) {
        if (s.slot != SlotName::UQ && !slots[s.slot].empty()) has_optional = true;
    }
    if (!has_optional) return slots[SlotName::UQ];

    std::vector<std::string> parts;
    for (const auto& s : tmpl.user_sections) {
        if (slots[s.slot].empty()) continue;
        parts.push_back(render_section(s.label, slots[s.slot]));
    }
    return join(parts, tmpl.separator);
}

std::string compose_system_instruction(const SlotSet& slots, const CompositionTemplate& tmpl,
                                       std::vector<std::string>* warnings) {
    std::vector<std::string> parts;
    for (const auto& s : tmpl.system_sections) {
        std::string value = slots[s.slot];
        if (s.slot == SlotName::FE) {
            if (value.empty()) continue;
            const auto pairs = parse_examples(value);
            if (!pairs) {
                if (warnings) warnings->push_back("FE slot is not a list of query/response pairs; examples omitted");
                continue;
            }
            std::vector<std::string> rendered;
            for (const auto& p : *pairs) rendered.push_back("Q: " + p.query + "\nA: " + p.response);
            value = join(rendered, "\n");
        }
        if (value.empty()) {
            const auto d = tmpl.defaults.find(s.slot);
            if (d == tmpl.defaults.end()) continue;
            value = d->second;
        }
        parts.push_back(render_section(s.label, value));
    }
    if (parts.empty()) {
        // A template without defaults and an all-empty slot set still yields
        // a usable instruction.
        parts.push_back(render_section("Role", "well-being assistant"));
    }
    return join(parts, tmpl.separator);
}

ComposedPrompt compose(const SlotSet& slots, const CompositionTemplate& tmpl) {
    ComposedPrompt out;
    out.user_prompt = compose_user_prompt(slots, tmpl);
    out.system_instruction = compose_system_instruction(slots, tmpl, &out.warnings);
    return out;
}

}  // namespace slotwise
