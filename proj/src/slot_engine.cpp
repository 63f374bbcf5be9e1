#include "slotwise/slot_engine.hpp"

#include "slotwise/error.hpp"
#include "slotwise/resources.hpp"
#include "slotwise/text.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <iterator>
#include <sstream>

namespace slotwise {
namespace {

constexpr std::array<std::string_view, kSlotCount> kNames = {"UQ", "CP", "J", "ROLE", "TONE", "FILT", "FE"};

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = haystack.find(needle); pos != std::string_view::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

std::size_t line_of(std::string_view text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Forward iterator over the raw text that publishes how far the JSON lexer
// has read, so parse callbacks can be mapped back to line numbers.
class TrackingIterator {
public:
    using iterator_category = std::input_iterator_tag;
    using value_type = char;
    using difference_type = std::ptrdiff_t;
    using pointer = const char*;
    using reference = const char&;

    TrackingIterator(const char* p, const char** cursor) : p_(p), cursor_(cursor) {}

    reference operator*() const { return *p_; }
    TrackingIterator& operator++() {
        ++p_;
        *cursor_ = p_;
        return *this;
    }
    TrackingIterator operator++(int) {
        auto copy = *this;
        ++*this;
        return copy;
    }
    bool operator==(const TrackingIterator& o) const { return p_ == o.p_; }
    bool operator!=(const TrackingIterator& o) const { return p_ != o.p_; }

private:
    const char* p_;
    const char** cursor_;
};

std::string require_string(const nlohmann::json& entry, const char* field, std::size_t line) {
    const auto it = entry.find(field);
    if (it == entry.end() || !it->is_string()) {
        throw LocatedError(ErrorCode::Schema, std::string("slot entry needs string field \"") + field + "\"", line);
    }
    return it->get<std::string>();
}

SlotTemplate parse_entry(const nlohmann::json& entry, std::size_t line) {
    if (!entry.is_object()) throw LocatedError(ErrorCode::Schema, "slot entry must be an object", line);
    for (const auto& [key, _] : entry.items()) {
        if (key != "name" && key != "template" && key != "start_tag" && key != "end_tag") {
            throw LocatedError(ErrorCode::Schema, "unknown field \"" + key + "\" in slot entry", line);
        }
    }
    const auto name_text = require_string(entry, "name", line);
    const auto name = parse_slot_name(name_text);
    if (!name) throw LocatedError(ErrorCode::Schema, "unknown slot name \"" + name_text + "\"", line);
    SlotTemplate tmpl{*name, require_string(entry, "template", line), require_string(entry, "start_tag", line),
                      require_string(entry, "end_tag", line)};
    try {
        tmpl.validate();
    } catch (const Error& e) {
        throw LocatedError(ErrorCode::Schema, e.what(), line);
    }
    return tmpl;
}

}  // namespace

std::string_view to_string(SlotName name) { return kNames[index_of(name)]; }

std::optional<SlotName> parse_slot_name(std::string_view text) {
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (kNames[i] == text) return kAllSlots[i];
    }
    return std::nullopt;
}

void SlotTemplate::validate() const {
    const std::string who = "slot " + std::string(to_string(name)) + ": ";
    const auto placeholders = count_occurrences(template_text, kPlaceholder);
    if (placeholders != 1) {
        throw Error(ErrorCode::Schema, who + "template must contain {TextInput} exactly once (found " +
                                           std::to_string(placeholders) + ")");
    }
    if (start_tag.empty() || end_tag.empty()) throw Error(ErrorCode::Schema, who + "tags must be non-empty");
    if (start_tag == end_tag) throw Error(ErrorCode::Schema, who + "start_tag and end_tag must differ");
    if (start_tag.find(end_tag) != std::string::npos || end_tag.find(start_tag) != std::string::npos) {
        throw Error(ErrorCode::Schema, who + "one tag contains the other");
    }
}

TemplateSet::TemplateSet() : TemplateSet(defaults()) {}

TemplateSet::TemplateSet(std::vector<SlotTemplate> templates) {
    std::array<bool, kSlotCount> seen{};
    for (auto& t : templates) {
        t.validate();
        auto& flag = seen[index_of(t.name)];
        if (flag) throw Error(ErrorCode::Schema, "duplicate slot " + std::string(to_string(t.name)));
        flag = true;
        slots_[index_of(t.name)] = std::move(t);
    }
    for (std::size_t i = 0; i < kSlotCount; ++i) {
        if (!seen[i]) throw Error(ErrorCode::Schema, "missing slot " + std::string(kNames[i]));
    }
}

TemplateSet TemplateSet::from_json_text(std::string_view text) {
    const char* cursor = text.data();
    std::vector<std::size_t> entry_lines;
    std::size_t slots_line = 1;
    std::string current_key;

    auto callback = [&](int depth, nlohmann::json::parse_event_t event, nlohmann::json& parsed) {
        using E = nlohmann::json::parse_event_t;
        const auto offset = static_cast<std::size_t>(cursor - text.data());
        if (event == E::key && depth == 1) {
            current_key = parsed.get<std::string>();
        } else if (event == E::array_start && depth == 1 && current_key == "slots") {
            slots_line = line_of(text, offset == 0 ? 0 : offset - 1);
        } else if (event == E::object_start && depth == 2 && current_key == "slots") {
            entry_lines.push_back(line_of(text, offset == 0 ? 0 : offset - 1));
        }
        return true;
    };

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(TrackingIterator(text.data(), &cursor),
                                    TrackingIterator(text.data() + text.size(), &cursor), callback);
    } catch (const nlohmann::json::parse_error& e) {
        throw LocatedError(ErrorCode::Schema, "invalid JSON: " + std::string(e.what()),
                           line_of(text, e.byte == 0 ? 0 : e.byte - 1));
    }

    if (!doc.is_object()) throw LocatedError(ErrorCode::Schema, "document must be an object", 1);
    const auto version = doc.find("version");
    if (version == doc.end() || !version->is_number_integer() || version->get<int>() != 1) {
        throw LocatedError(ErrorCode::Schema, "unsupported or missing \"version\" (expected 1)", 1);
    }
    const auto slots = doc.find("slots");
    if (slots == doc.end() || !slots->is_array()) {
        throw LocatedError(ErrorCode::Schema, "\"slots\" must be an array", 1);
    }

    TemplateSet set{Unvalidated{}};
    std::array<bool, kSlotCount> seen{};
    for (std::size_t i = 0; i < slots->size(); ++i) {
        const std::size_t line = i < entry_lines.size() ? entry_lines[i] : slots_line;
        auto tmpl = parse_entry((*slots)[i], line);
        auto& flag = seen[index_of(tmpl.name)];
        if (flag) {
            throw LocatedError(ErrorCode::Schema, "duplicate slot \"" + std::string(to_string(tmpl.name)) + "\"",
                               line);
        }
        flag = true;
        set.slots_[index_of(tmpl.name)] = std::move(tmpl);
    }
    for (std::size_t i = 0; i < kSlotCount; ++i) {
        if (!seen[i]) {
            throw LocatedError(ErrorCode::Schema, "missing slot \"" + std::string(kNames[i]) + "\"", slots_line);
        }
    }
    return set;
}

TemplateSet TemplateSet::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Config, "cannot read slot templates " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return from_json_text(buf.str());
    } catch (const LocatedError& e) {
        throw LocatedError(ErrorCode::Schema, path + ": " + e.detail(), e.line());
    }
}

TemplateSet TemplateSet::defaults() {
    static const TemplateSet shipped = from_json_text(resources::get("slot_templates.json"));
    return shipped;
}

void TemplateSet::set(SlotTemplate tmpl) {
    tmpl.validate();
    slots_[index_of(tmpl.name)] = std::move(tmpl);
}

nlohmann::json TemplateSet::to_json() const {
    nlohmann::json slots = nlohmann::json::array();
    for (const auto& t : slots_) {
        slots.push_back({{"name", to_string(t.name)},
                         {"template", t.template_text},
                         {"start_tag", t.start_tag},
                         {"end_tag", t.end_tag}});
    }
    return {{"version", 1}, {"slots", std::move(slots)}};
}

TemplateSet TemplateSet::from_json(const nlohmann::json& j) {
    return from_json_text(j.dump());
}

nlohmann::json SlotSet::to_json() const {
    nlohmann::json out = nlohmann::json::object();
    for (auto name : kAllSlots) out[std::string(to_string(name))] = (*this)[name];
    return out;
}

SlotSet SlotSet::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "slot set must be an object");
    SlotSet set;
    for (const auto& [key, value] : j.items()) {
        const auto name = parse_slot_name(key);
        if (!name) throw Error(ErrorCode::InvalidArgument, "unknown slot \"" + key + "\"");
        if (!value.is_string()) throw Error(ErrorCode::InvalidArgument, "slot \"" + key + "\" must be a string");
        set[*name] = value.get<std::string>();
    }
    return set;
}

std::string render_slot_prompt(const SlotTemplate& tmpl, std::string_view input_text) {
    const auto pos = tmpl.template_text.find(kPlaceholder);
    if (pos == std::string::npos) {
        throw Error(ErrorCode::Schema, "template for slot " + std::string(to_string(tmpl.name)) +
                                           " has no {TextInput} placeholder");
    }
    std::string out;
    out.reserve(tmpl.template_text.size() + input_text.size());
    out.append(tmpl.template_text, 0, pos);
    out.append(input_text);
    out.append(tmpl.template_text, pos + kPlaceholder.size());
    return out;
}

std::string extract_span(std::string_view output_text, std::string_view start_tag, std::string_view end_tag) {
    if (start_tag.empty() || end_tag.empty()) return {};
    const auto start = output_text.find(start_tag);
    if (start == std::string_view::npos) return {};
    auto begin = start + start_tag.size();
    const auto end = output_text.find(end_tag, begin);
    if (end == std::string_view::npos) return {};
    auto span = output_text.substr(begin, end - begin);
    if (const auto inner = span.rfind(start_tag); inner != std::string_view::npos) {
        span.remove_prefix(inner + start_tag.size());
    }
    return trim(span);
}

SlotExtraction extract_all_slots(std::string_view input_text, const TemplateSet& templates,
                                 const Generator& generator) {
    SlotExtraction result;
    std::exception_ptr last_failure;
    std::size_t failures = 0;

    for (auto name : kAllSlots) {
        const auto& tmpl = templates[name];
        const auto prompt = render_slot_prompt(tmpl, input_text);
        std::string output;
        try {
            output = generator.generate(prompt);
        } catch (const std::exception& e) {
            ++failures;
            last_failure = std::current_exception();
            result.warnings.push_back("slot " + std::string(to_string(name)) + ": generation failed: " + e.what());
            continue;
        }
        std::string value = extract_span(output, tmpl.start_tag, tmpl.end_tag);
        // No tag of any slot may survive into a value.
        bool stripped = false;
        for (bool again = true; again;) {
            again = false;
            for (const auto& other : templates.all()) {
                for (const auto* tag : {&other.start_tag, &other.end_tag}) {
                    if (value.find(*tag) != std::string::npos) {
                        value = replace_all(std::move(value), *tag, "");
                        stripped = again = true;
                    }
                }
            }
        }
        if (stripped) {
            value = trim(value);
            result.warnings.push_back("slot " + std::string(to_string(name)) + ": stray tags removed from value");
        }
        result.slots[name] = std::move(value);
    }

    if (failures == kSlotCount && last_failure) std::rethrow_exception(last_failure);
    return result;
}

}  // namespace slotwise
