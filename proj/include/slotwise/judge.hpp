#pragma once

#include "slotwise/generator.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace slotwise {

inline constexpr std::array<std::string_view, 6> kRubricCriteria = {
    "Safety", "Transparency", "Explainability", "Fairness", "Human Agency", "Accountability"};

struct JudgeVerdict {
    enum class Kind { Likert, Compliance, Rubric };

    Kind kind = Kind::Likert;
    int likert = 0;
    bool compliant = false;
    std::array<bool, 6> rubric{};

    static JudgeVerdict make_likert(int rating);  // throws Error(VerdictOutOfRange)
    static JudgeVerdict make_compliance(bool compliant);
    static JudgeVerdict make_rubric(std::array<bool, 6> criteria);
};

// Tag parsers for judge replies. nullopt when the reply is unparseable; a
// parseable rating outside 1..5 throws Error(VerdictOutOfRange).
std::optional<JudgeVerdict> parse_likert_reply(std::string_view reply);
std::optional<JudgeVerdict> parse_compliance_reply(std::string_view reply);
std::optional<JudgeVerdict> parse_rubric_reply(std::string_view reply);

// Rubric prompt texts with {output}, {reference}, {context}, {prompt} slots.
struct JudgeTemplates {
    std::string factuality;
    std::string appropriateness;
    std::string compliance;
    std::string rubric;

    static JudgeTemplates defaults();
    static JudgeTemplates load_dir(const std::string& directory);
};

struct MetricResult {
    double value = 0.0;
    std::size_t instances = 0;
    std::vector<std::string> warnings;
};

// Formula level: the arithmetic each judge metric reduces to.
double mean_likert(const std::vector<JudgeVerdict>& verdicts);        // FS, CAS
double compliance_rate(const std::vector<JudgeVerdict>& verdicts);    // ICS
double rubric_score(const std::vector<JudgeVerdict>& verdicts);       // WRR

struct FactualityInstance {
    std::string output;
    std::string reference_facts;
};
struct ContextInstance {
    std::string output;
    std::string context;
};
struct ComplianceInstance {
    std::string output;
    std::string prompt;
};

struct JudgeOptions {
    JudgeTemplates templates = JudgeTemplates::defaults();
    std::size_t parallelism = 1;
};

// Mean Likert rating. Unparseable or out-of-range verdicts fail the whole
// evaluation; no clamping. Throws Error(EmptyEvaluation) for no instances.
MetricResult factuality_score(const std::vector<FactualityInstance>& instances, const Generator& judge,
                              const JudgeOptions& options = {});
MetricResult contextual_appropriateness(const std::vector<ContextInstance>& instances,
                                        const Generator& judge, const JudgeOptions& options = {});
// Fraction compliant; an unparseable verdict counts as noncompliant with a
// warning.
MetricResult instructional_compliance(const std::vector<ComplianceInstance>& instances,
                                      const Generator& judge, const JudgeOptions& options = {});
// (1 / 6N) sum_i sum_j w_ij; an unparseable rubric scores all zeros with a
// warning.
MetricResult who_responsibility_rubric(const std::vector<std::string>& outputs, const Generator& judge,
                                       const JudgeOptions& options = {});

}  // namespace slotwise
