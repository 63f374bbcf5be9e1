#include "slotwise/prompt_synth.hpp"

#include "slotwise/error.hpp"
#include "slotwise/resources.hpp"
#include "slotwise/slot_engine.hpp"
#include "slotwise/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace slotwise {
namespace {

using Row = std::map<std::string, std::string>;

std::size_t line_at(std::string_view text, std::size_t offset) {
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

void reject_binary(std::string_view content) {
    const auto nul = content.find('\0');
    if (nul != std::string_view::npos) {
        throw LocatedError(ErrorCode::IngestError, "binary content (NUL byte)", line_at(content, nul));
    }
    if (!is_valid_utf8(content)) {
        // Locate the first bad line for the message.
        std::size_t line = 1, start = 0;
        for (std::size_t i = 0; i <= content.size(); ++i) {
            if (i == content.size() || content[i] == '\n') {
                if (!is_valid_utf8(content.substr(start, i - start))) break;
                start = i + 1;
                ++line;
            }
        }
        throw LocatedError(ErrorCode::IngestError, "content is not valid UTF-8", line);
    }
}

std::string json_scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return "";
    return v.dump();
}

// Replaces {name} placeholders; nullopt if one is not available.
std::optional<std::string> fill_frame(std::string_view frame, const std::map<std::string, std::string>& values) {
    std::string out;
    std::size_t pos = 0;
    while (pos < frame.size()) {
        const auto open = frame.find('{', pos);
        if (open == std::string_view::npos) break;
        const auto close = frame.find('}', open);
        if (close == std::string_view::npos) break;
        const auto it = values.find(std::string(frame.substr(open + 1, close - open - 1)));
        if (it == values.end() || it->second.empty()) return std::nullopt;
        out.append(frame.substr(pos, open - pos));
        out += it->second;
        pos = close + 1;
    }
    out.append(frame.substr(pos));
    return out;
}

std::map<std::string, std::string> frame_values(const DatasetRecord& record) {
    auto values = record.attributes;
    values["attributes"] = describe_attributes(record.attributes);
    values["domain"] = std::string(to_string(record.domain));
    return values;
}

std::optional<std::string> optional_cell(const Row& row, const std::optional<std::string>& column) {
    if (!column) return std::nullopt;
    const auto it = row.find(*column);
    if (it == row.end() || trim(it->second).empty()) return std::nullopt;
    return it->second;
}

// Uniform integer in [0, bound) from raw engine output (rejection sampling),
// so results do not depend on the standard library's distributions.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    for (;;) {
        const auto x = rng();
        if (x < limit) return x % bound;
    }
}

}  // namespace

std::string_view to_string(Domain domain) {
    switch (domain) {
        case Domain::MentalHealth: return "mental_health";
        case Domain::Clinical: return "clinical";
        case Domain::Nutrition: return "nutrition";
        case Domain::Lifestyle: return "lifestyle";
    }
    return "lifestyle";
}

Domain parse_domain(std::string_view text) {
    const auto t = to_lower_ascii(trim(text));
    if (t == "mental_health") return Domain::MentalHealth;
    if (t == "clinical") return Domain::Clinical;
    if (t == "nutrition") return Domain::Nutrition;
    if (t == "lifestyle") return Domain::Lifestyle;
    throw Error(ErrorCode::InvalidArgument, "unknown domain \"" + std::string(text) + "\"");
}

ColumnMap ColumnMap::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Config, "column map must be an object");
    ColumnMap m;
    try {
        m.id_column = j.value("id_column", m.id_column);
        if (j.contains("domain")) m.domain = parse_domain(j.at("domain").get<std::string>());
        if (j.contains("domain_column")) m.domain_column = j.at("domain_column").get<std::string>();
        if (j.contains("attribute_columns")) {
            const auto& cols = j.at("attribute_columns");
            if (cols.is_array()) {
                for (const auto& c : cols) m.attribute_columns[c.get<std::string>()] = c.get<std::string>();
            } else {
                m.attribute_columns = cols.get<std::map<std::string, std::string>>();
            }
        }
        if (j.contains("required_columns")) m.required_columns = j.at("required_columns").get<std::vector<std::string>>();
        if (j.contains("reference_column")) m.reference_column = j.at("reference_column").get<std::string>();
        if (j.contains("facts_column")) m.facts_column = j.at("facts_column").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Config, std::string("column map: ") + e.what());
    }
    if (!m.domain && !m.domain_column) throw Error(ErrorCode::Config, "column map needs domain or domain_column");
    return m;
}

RecordFormat parse_record_format(std::string_view text) {
    if (text == "csv") return RecordFormat::Csv;
    if (text == "jsonl") return RecordFormat::Jsonl;
    throw Error(ErrorCode::InvalidArgument, "record format must be csv or jsonl");
}

std::vector<std::vector<std::string>> parse_csv(std::string_view content) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t line = 1;
    std::size_t quote_line = 1;

    const auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    const auto end_row = [&] {
        end_field();
        if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
        row.clear();
    };

    for (std::size_t i = 0; i < content.size(); ++i) {
        const char c = content[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                    if (i + 1 < content.size() && content[i + 1] != ',' && content[i + 1] != '\n' &&
                        content[i + 1] != '\r') {
                        throw LocatedError(ErrorCode::IngestError, "unexpected character after closing quote", line);
                    }
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started) throw LocatedError(ErrorCode::IngestError, "quote inside unquoted field", line);
                quoted = true;
                field_started = true;
                quote_line = line;
                break;
            case ',':
                end_field();
                break;
            case '\r':
                if (i + 1 < content.size() && content[i + 1] == '\n') break;
                end_row();
                ++line;
                break;
            case '\n':
                end_row();
                ++line;
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (quoted) throw LocatedError(ErrorCode::IngestError, "unterminated quoted field", quote_line);
    if (field_started || !row.empty()) end_row();
    return rows;
}

LoadResult parse_records(std::string_view content, RecordFormat format, const ColumnMap& columns) {
    if (!columns.domain && !columns.domain_column) throw Error(ErrorCode::Config, "column map needs domain or domain_column");
    reject_binary(content);

    std::vector<std::pair<std::size_t, Row>> rows;
    if (format == RecordFormat::Csv) {
        const auto table = parse_csv(content);
        if (table.empty()) throw LocatedError(ErrorCode::IngestError, "missing header row", 1);
        const auto& header = table.front();
        for (std::size_t r = 1; r < table.size(); ++r) {
            Row row;
            for (std::size_t c = 0; c < header.size() && c < table[r].size(); ++c) row[trim(header[c])] = table[r][c];
            rows.emplace_back(r + 1, std::move(row));
        }
    } else {
        std::size_t line_no = 0;
        for (const auto& line : split_lines(content)) {
            ++line_no;
            if (trim(line).empty()) continue;
            const auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object()) {
                throw LocatedError(ErrorCode::IngestError, "expected one JSON object per line", line_no);
            }
            Row row;
            for (const auto& [key, value] : j.items()) {
                if (!value.is_null()) row[key] = json_scalar(value);
            }
            rows.emplace_back(line_no, std::move(row));
        }
    }

    LoadResult result;
    std::set<std::string> seen;
    const auto skip = [&](std::size_t line, const std::string& why) {
        result.warnings.push_back("line " + std::to_string(line) + ": " + why + "; row skipped");
        ++result.skipped;
    };
    for (const auto& [line, row] : rows) {
        const auto id = optional_cell(row, columns.id_column);
        if (!id) {
            skip(line, "missing id column \"" + columns.id_column + "\"");
            continue;
        }
        const auto missing = std::find_if(columns.required_columns.begin(), columns.required_columns.end(),
                                          [&](const std::string& c) { return !optional_cell(row, c); });
        if (missing != columns.required_columns.end()) {
            skip(line, "missing required column \"" + *missing + "\"");
            continue;
        }
        DatasetRecord record;
        record.record_id = trim(*id);
        if (columns.domain) {
            record.domain = *columns.domain;
        } else {
            const auto cell = optional_cell(row, columns.domain_column);
            try {
                if (!cell) throw Error(ErrorCode::InvalidArgument, "missing domain");
                record.domain = parse_domain(*cell);
            } catch (const Error& e) {
                skip(line, e.what());
                continue;
            }
        }
        if (columns.attribute_columns.empty()) {
            for (const auto& [key, value] : row) {
                if (key == columns.id_column || key == columns.domain_column || key == columns.reference_column ||
                    key == columns.facts_column || trim(value).empty()) {
                    continue;
                }
                record.attributes[key] = trim(value);
            }
        } else {
            for (const auto& [source, name] : columns.attribute_columns) {
                if (const auto cell = optional_cell(row, source)) record.attributes[name] = trim(*cell);
            }
        }
        record.reference_response = optional_cell(row, columns.reference_column);
        record.reference_facts = optional_cell(row, columns.facts_column);
        if (!seen.insert(record.record_id).second) {
            throw LocatedError(ErrorCode::IngestError, "duplicate record id \"" + record.record_id + "\"", line);
        }
        result.records.push_back(std::move(record));
    }
    return result;
}

LoadResult load_records(const std::string& path, RecordFormat format, const ColumnMap& columns) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IngestError, "cannot read " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_records(buf.str(), format, columns);
    } catch (const LocatedError& e) {
        throw LocatedError(ErrorCode::IngestError, path + ": " + e.detail(), e.line());
    }
}

nlohmann::json PromptPair::to_json() const {
    return {{"source_record_id", source_record_id},
            {"patient_prompt", patient_prompt},
            {"provider_prompt", provider_prompt},
            {"role_labels", {kPatientRole, kProviderRole}}};
}

SynthTemplates SynthTemplates::defaults() {
    static const SynthTemplates shipped = from_json_text(resources::get("synth_templates.json"));
    return shipped;
}

SynthTemplates SynthTemplates::from_json_text(std::string_view text) {
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::Config, "synthesis templates are not valid JSON");
    SynthTemplates t;
    try {
        if (j.at("version").get<int>() != 1) throw Error(ErrorCode::Config, "unsupported synthesis template version");
        t.patient_generation_ = j.at("generation").at("patient").get<std::string>();
        t.provider_generation_ = j.at("generation").at("provider").get<std::string>();
        for (const auto& [name, frames] : j.at("fallback").items()) {
            auto& out = t.frames_[parse_domain(name)];
            for (const auto& f : frames) out.push_back({f.at("patient").get<std::string>(), f.at("provider").get<std::string>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Config, std::string("synthesis templates: ") + e.what());
    }
    return t;
}

const std::vector<SynthTemplates::Frame>& SynthTemplates::frames(Domain domain) const {
    static const std::vector<Frame> none;
    const auto it = frames_.find(domain);
    return it == frames_.end() ? none : it->second;
}

std::string describe_attributes(const std::map<std::string, std::string>& attributes) {
    std::string out;
    for (const auto& [key, value] : attributes) {
        if (!out.empty()) out += "; ";
        out += key + ": " + value;
    }
    return out;
}

std::optional<PromptPair> fallback_prompt_pair(const DatasetRecord& record, const SynthTemplates& templates) {
    if (record.attributes.empty()) return std::nullopt;
    const auto values = frame_values(record);
    for (const auto& frame : templates.frames(record.domain)) {
        auto patient = fill_frame(frame.patient, values);
        auto provider = fill_frame(frame.provider, values);
        if (patient && provider) return PromptPair{*patient, *provider, record.record_id};
    }
    return std::nullopt;
}

PromptPair generate_prompt_pair(const DatasetRecord& record, const Generator* generator, const SynthTemplates& templates) {
    if (record.attributes.empty()) {
        throw Error(ErrorCode::SynthesisError, "record " + record.record_id + " has no attributes");
    }
    std::string patient, provider;
    if (generator) {
        const auto values = frame_values(record);
        const auto ask = [&](const std::string& tmpl, std::string_view start, std::string_view end) -> std::string {
            const auto prompt = fill_frame(tmpl, values);
            if (!prompt) return "";
            try {
                return extract_span(generator->generate(*prompt), start, end);
            } catch (const Error&) {
                return "";
            }
        };
        patient = ask(templates.patient_generation(), "<PATIENT>", "</PATIENT>");
        provider = ask(templates.provider_generation(), "<PROVIDER>", "</PROVIDER>");
    }
    if (patient.empty() || provider.empty()) {
        const auto fallback = fallback_prompt_pair(record, templates);
        if (!fallback) throw Error(ErrorCode::SynthesisError, "no fallback frame fits record " + record.record_id);
        if (patient.empty()) patient = fallback->patient_prompt;
        if (provider.empty()) provider = fallback->provider_prompt;
    }
    if (patient == provider) {
        throw Error(ErrorCode::SynthesisError, "record " + record.record_id + " produced identical prompts");
    }
    return {patient, provider, record.record_id};
}

SynthesisRun synthesize_all(const std::vector<DatasetRecord>& records, const Generator* generator,
                            const SynthTemplates& templates) {
    SynthesisRun run;
    for (const auto& record : records) {
        try {
            run.pairs.push_back(generate_prompt_pair(record, generator, templates));
        } catch (const Error& e) {
            run.failures.push_back(record.record_id + ": " + e.what());
        }
    }
    return run;
}

std::vector<DatasetRecord> sample_records(const std::vector<DatasetRecord>& records, double fraction,
                                          std::uint64_t seed) {
    if (!std::isfinite(fraction) || fraction < 0.0 || fraction > 1.0) {
        throw Error(ErrorCode::InvalidArgument, "sample fraction must be within [0, 1]");
    }
    const auto n = records.size();
    if (n == 0 || fraction == 0.0) return {};
    auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    k = std::clamp<std::size_t>(k, 1, n);

    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(bounded(rng, n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    std::vector<DatasetRecord> out;
    out.reserve(k);
    for (const auto i : idx) out.push_back(records[i]);
    return out;
}

void write_pairs_jsonl(const std::string& path, const std::vector<PromptPair>& pairs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Config, "cannot write " + path);
    for (const auto& p : pairs) out << p.to_json().dump() << '\n';
    if (!out) throw Error(ErrorCode::Config, "write failed for " + path);
}

}  // namespace slotwise
