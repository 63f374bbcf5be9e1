#pragma once

#include "slotwise/generator.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace slotwise {

enum class Domain { MentalHealth, Clinical, Nutrition, Lifestyle };

std::string_view to_string(Domain domain);
Domain parse_domain(std::string_view text);

struct DatasetRecord {
    std::string record_id;
    Domain domain = Domain::Lifestyle;
    std::map<std::string, std::string> attributes;
    std::optional<std::string> reference_response;
    std::optional<std::string> reference_facts;
};

// Per-dataset mapping from source columns (CSV header names or JSON keys) to
// record fields. Lives in config so new datasets need no code.
struct ColumnMap {
    std::string id_column = "id";
    std::optional<Domain> domain;             // fixed domain for the whole file...
    std::optional<std::string> domain_column; // ...or read per row
    // Source column -> attribute name. Empty means "every other column".
    std::map<std::string, std::string> attribute_columns;
    std::vector<std::string> required_columns;
    std::optional<std::string> reference_column;
    std::optional<std::string> facts_column;

    static ColumnMap from_json(const nlohmann::json& j);
};

enum class RecordFormat { Csv, Jsonl };

RecordFormat parse_record_format(std::string_view text);

struct LoadResult {
    std::vector<DatasetRecord> records;
    std::vector<std::string> warnings;
    std::size_t skipped = 0;
};

// Rows missing a required column (or the id) are skipped with a warning.
// Throws LocatedError(IngestError) for files that do not parse, including
// binary content, and for duplicate record ids.
LoadResult load_records(const std::string& path, RecordFormat format, const ColumnMap& columns);
LoadResult parse_records(std::string_view content, RecordFormat format, const ColumnMap& columns);

// RFC 4180 subset: comma separated, double-quote quoting, header row first.
// Throws LocatedError(IngestError).
std::vector<std::vector<std::string>> parse_csv(std::string_view content);

struct PromptPair {
    std::string patient_prompt;
    std::string provider_prompt;
    std::string source_record_id;

    static constexpr std::string_view kPatientRole = "patient";
    static constexpr std::string_view kProviderRole = "provider";

    nlohmann::json to_json() const;
};

class SynthTemplates {
public:
    struct Frame {
        std::string patient;
        std::string provider;
    };

    static SynthTemplates defaults();
    static SynthTemplates from_json_text(std::string_view text);

    const std::string& patient_generation() const { return patient_generation_; }
    const std::string& provider_generation() const { return provider_generation_; }
    const std::vector<Frame>& frames(Domain domain) const;

private:
    std::string patient_generation_;
    std::string provider_generation_;
    std::map<Domain, std::vector<Frame>> frames_;
};

// "key: value; key: value" in key order.
std::string describe_attributes(const std::map<std::string, std::string>& attributes);

// The first frame whose {placeholders} are all attributes ({attributes} is
// always available). nullopt when none fits.
std::optional<PromptPair> fallback_prompt_pair(const DatasetRecord& record, const SynthTemplates& templates);

// Two generator calls with <PATIENT>/<PROVIDER> tags; whichever side comes
// back untagged is filled from the fallback frames. With no generator only the
// fallback runs. Throws Error(SynthesisError) for empty attributes or when
// neither route yields two distinct, non-empty prompts.
PromptPair generate_prompt_pair(const DatasetRecord& record, const Generator* generator,
                                const SynthTemplates& templates = SynthTemplates::defaults());

struct SynthesisRun {
    std::vector<PromptPair> pairs;
    std::vector<std::string> failures;  // "record_id: reason"
};

SynthesisRun synthesize_all(const std::vector<DatasetRecord>& records, const Generator* generator,
                            const SynthTemplates& templates = SynthTemplates::defaults());

// Seeded uniform sample of round(fraction * n) records (at least one when
// records is non-empty and fraction > 0), in original order. Reproducible
// across platforms: only mt19937_64 output is used.
std::vector<DatasetRecord> sample_records(const std::vector<DatasetRecord>& records, double fraction,
                                          std::uint64_t seed);

void write_pairs_jsonl(const std::string& path, const std::vector<PromptPair>& pairs);

}  // namespace slotwise
