#include "slotwise/judge.hpp"

#include "slotwise/concurrency.hpp"
#include "slotwise/error.hpp"
#include "slotwise/resources.hpp"
#include "slotwise/slot_engine.hpp"
#include "slotwise/text.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace slotwise {
namespace {

// Single left-to-right pass, so placeholder-looking text inside a value is
// never expanded again.
std::string fill(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values) {
    std::string out;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const auto open = tmpl.find('{', pos);
        if (open == std::string_view::npos) break;
        const auto close = tmpl.find('}', open);
        if (close == std::string_view::npos) break;
        const auto it = values.find(tmpl.substr(open + 1, close - open - 1));
        out.append(tmpl.substr(pos, open - pos));
        if (it == values.end()) {
            out.append(tmpl.substr(open, close - open + 1));
        } else {
            out += it->second;
        }
        pos = close + 1;
    }
    out.append(tmpl.substr(pos));
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Config, "cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

template <class Instance, class Prompt, class Parse>
std::vector<std::optional<JudgeVerdict>> ask_all(const std::vector<Instance>& instances, const Generator& judge,
                                                 std::size_t parallelism, Prompt prompt, Parse parse) {
    std::vector<std::optional<JudgeVerdict>> verdicts(instances.size());
    parallel_for(instances.size(), parallelism,
                 [&](std::size_t i) { verdicts[i] = parse(judge.generate(prompt(instances[i]))); });
    return verdicts;
}

MetricResult likert_metric(const std::vector<std::optional<JudgeVerdict>>& replies, const char* metric) {
    std::vector<JudgeVerdict> verdicts;
    for (std::size_t i = 0; i < replies.size(); ++i) {
        if (!replies[i]) {
            throw Error(ErrorCode::VerdictUnparseable,
                        std::string(metric) + ": judge reply for instance " + std::to_string(i) + " has no rating");
        }
        verdicts.push_back(*replies[i]);
    }
    return {mean_likert(verdicts), verdicts.size(), {}};
}

}  // namespace

JudgeVerdict JudgeVerdict::make_likert(int rating) {
    if (rating < 1 || rating > 5) {
        throw Error(ErrorCode::VerdictOutOfRange, "rating " + std::to_string(rating) + " is outside 1..5");
    }
    JudgeVerdict v;
    v.kind = Kind::Likert;
    v.likert = rating;
    return v;
}

JudgeVerdict JudgeVerdict::make_compliance(bool compliant) {
    JudgeVerdict v;
    v.kind = Kind::Compliance;
    v.compliant = compliant;
    return v;
}

JudgeVerdict JudgeVerdict::make_rubric(std::array<bool, 6> criteria) {
    JudgeVerdict v;
    v.kind = Kind::Rubric;
    v.rubric = criteria;
    return v;
}

std::optional<JudgeVerdict> parse_likert_reply(std::string_view reply) {
    auto span = extract_span(reply, "<RATING>", "</RATING>");
    if (span.empty() || span.size() > 6) return std::nullopt;
    std::size_t start = span[0] == '-' || span[0] == '+' ? 1 : 0;
    if (start == span.size()) return std::nullopt;
    int value = 0;
    for (std::size_t i = start; i < span.size(); ++i) {
        if (span[i] < '0' || span[i] > '9') return std::nullopt;
        value = value * 10 + (span[i] - '0');
    }
    if (span[0] == '-') value = -value;
    return JudgeVerdict::make_likert(value);
}

std::optional<JudgeVerdict> parse_compliance_reply(std::string_view reply) {
    const auto label = to_lower_ascii(extract_span(reply, "<VERDICT>", "</VERDICT>"));
    if (label == "compliant") return JudgeVerdict::make_compliance(true);
    if (label == "noncompliant" || label == "non-compliant") return JudgeVerdict::make_compliance(false);
    return std::nullopt;
}

std::optional<JudgeVerdict> parse_rubric_reply(std::string_view reply) {
    const auto span = extract_span(reply, "<RUBRIC>", "</RUBRIC>");
    std::array<bool, 6> criteria{};
    std::size_t count = 0;
    std::stringstream in(span);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto v = trim(item);
        if (count >= criteria.size() || (v != "0" && v != "1")) return std::nullopt;
        criteria[count++] = v == "1";
    }
    if (count != criteria.size()) return std::nullopt;
    return JudgeVerdict::make_rubric(criteria);
}

JudgeTemplates JudgeTemplates::defaults() {
    return {std::string(resources::get("judge/factuality.txt")), std::string(resources::get("judge/appropriateness.txt")),
            std::string(resources::get("judge/compliance.txt")), std::string(resources::get("judge/rubric.txt"))};
}

JudgeTemplates JudgeTemplates::load_dir(const std::string& directory) {
    const std::filesystem::path dir(directory);
    auto t = defaults();
    const auto load = [&](const char* name, std::string& field) {
        if (std::filesystem::exists(dir / name)) field = read_file(dir / name);
    };
    load("factuality.txt", t.factuality);
    load("appropriateness.txt", t.appropriateness);
    load("compliance.txt", t.compliance);
    load("rubric.txt", t.rubric);
    return t;
}

double mean_likert(const std::vector<JudgeVerdict>& verdicts) {
    if (verdicts.empty()) throw Error(ErrorCode::EmptyEvaluation, "no verdicts to average");
    double sum = 0.0;
    for (const auto& v : verdicts) sum += v.likert;
    return sum / static_cast<double>(verdicts.size());
}

double compliance_rate(const std::vector<JudgeVerdict>& verdicts) {
    if (verdicts.empty()) throw Error(ErrorCode::EmptyEvaluation, "no verdicts to average");
    std::size_t ok = 0;
    for (const auto& v : verdicts) ok += v.compliant ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(verdicts.size());
}

double rubric_score(const std::vector<JudgeVerdict>& verdicts) {
    if (verdicts.empty()) throw Error(ErrorCode::EmptyEvaluation, "no verdicts to average");
    std::size_t ones = 0;
    for (const auto& v : verdicts) {
        for (const bool w : v.rubric) ones += w ? 1 : 0;
    }
    return static_cast<double>(ones) / (6.0 * static_cast<double>(verdicts.size()));
}

MetricResult factuality_score(const std::vector<FactualityInstance>& instances, const Generator& judge,
                              const JudgeOptions& options) {
    if (instances.empty()) throw Error(ErrorCode::EmptyEvaluation, "factuality needs at least one instance");
    for (const auto& inst : instances) {
        if (trim(inst.reference_facts).empty()) throw Error(ErrorCode::EmptyReference, "factuality needs reference facts");
    }
    const auto replies = ask_all(
        instances, judge, options.parallelism,
        [&](const FactualityInstance& inst) {
            return fill(options.templates.factuality, {{"reference", inst.reference_facts}, {"output", inst.output}});
        },
        parse_likert_reply);
    return likert_metric(replies, "factuality");
}

MetricResult contextual_appropriateness(const std::vector<ContextInstance>& instances, const Generator& judge,
                                        const JudgeOptions& options) {
    if (instances.empty()) throw Error(ErrorCode::EmptyEvaluation, "appropriateness needs at least one instance");
    const auto replies = ask_all(
        instances, judge, options.parallelism,
        [&](const ContextInstance& inst) {
            return fill(options.templates.appropriateness, {{"context", inst.context}, {"output", inst.output}});
        },
        parse_likert_reply);
    return likert_metric(replies, "appropriateness");
}

MetricResult instructional_compliance(const std::vector<ComplianceInstance>& instances, const Generator& judge,
                                      const JudgeOptions& options) {
    if (instances.empty()) throw Error(ErrorCode::EmptyEvaluation, "compliance needs at least one instance");
    const auto replies = ask_all(
        instances, judge, options.parallelism,
        [&](const ComplianceInstance& inst) {
            return fill(options.templates.compliance, {{"prompt", inst.prompt}, {"output", inst.output}});
        },
        parse_compliance_reply);
    MetricResult result;
    std::vector<JudgeVerdict> verdicts;
    for (std::size_t i = 0; i < replies.size(); ++i) {
        if (replies[i]) {
            verdicts.push_back(*replies[i]);
        } else {
            result.warnings.push_back("compliance verdict " + std::to_string(i) + " unparseable; counted noncompliant");
            verdicts.push_back(JudgeVerdict::make_compliance(false));
        }
    }
    result.value = compliance_rate(verdicts);
    result.instances = verdicts.size();
    return result;
}

MetricResult who_responsibility_rubric(const std::vector<std::string>& outputs, const Generator& judge,
                                       const JudgeOptions& options) {
    if (outputs.empty()) throw Error(ErrorCode::EmptyEvaluation, "rubric needs at least one instance");
    const auto replies = ask_all(
        outputs, judge, options.parallelism,
        [&](const std::string& output) { return fill(options.templates.rubric, {{"output", output}}); },
        parse_rubric_reply);
    MetricResult result;
    std::vector<JudgeVerdict> verdicts;
    for (std::size_t i = 0; i < replies.size(); ++i) {
        if (replies[i]) {
            verdicts.push_back(*replies[i]);
        } else {
            result.warnings.push_back("rubric reply " + std::to_string(i) + " unparseable; scored all zeros");
            verdicts.push_back(JudgeVerdict::make_rubric({}));
        }
    }
    result.value = rubric_score(verdicts);
    result.instances = verdicts.size();
    return result;
}

}  // namespace slotwise
