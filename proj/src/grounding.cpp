#include "slotwise/grounding.hpp"

#include "slotwise/error.hpp"
#include "slotwise/llm_gateway.hpp"
#include "slotwise/resources.hpp"
#include "slotwise/slot_engine.hpp"
#include "slotwise/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

namespace slotwise {
namespace {

std::vector<std::string> dedupe_capped(std::vector<std::string> words, std::size_t cap) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto& w : words) {
        if (out.size() >= cap) break;
        if (w.empty() || !seen.insert(w).second) continue;
        out.push_back(std::move(w));
    }
    return out;
}

bool valid_snippet(const Snippet& s) {
    return !trim(s.text).empty() && is_valid_utf8(s.text) && is_valid_utf8(s.source_id) && std::isfinite(s.score);
}

}  // namespace

nlohmann::json to_json(const Snippet& s) {
    return {{"text", s.text}, {"source_id", s.source_id}, {"score", s.score}};
}

Snippet snippet_from_json(const nlohmann::json& j) {
    try {
        return {j.at("text").get<std::string>(), j.at("source_id").get<std::string>(),
                j.value("score", 0.0)};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Schema, std::string("snippet: ") + e.what());
    }
}

StopwordList StopwordList::from_text(std::string_view text) {
    StopwordList list;
    for (const auto& raw : split_lines(text)) {
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        list.words_.insert(to_lower_ascii(line));
    }
    return list;
}

StopwordList StopwordList::defaults() {
    static const StopwordList shipped = from_text(resources::get("stopwords.txt"));
    return shipped;
}

std::vector<std::string> heuristic_keywords(std::string_view text, const StopwordList& stopwords) {
    auto tokens = tokenize(text);
    std::erase_if(tokens, [&](const std::string& t) { return stopwords.contains(t); });
    return dedupe_capped(std::move(tokens), kMaxKeywords);
}

std::vector<std::string> extract_keywords(std::string_view user_prompt, KeywordMode mode,
                                          const Generator* generator, const StopwordList& stopwords) {
    if (mode == KeywordMode::Model && generator) {
        const std::string prompt = "Extract up to " + std::to_string(kMaxKeywords) +
                                   " search keywords from the request below.\nRequest: " +
                                   std::string(user_prompt) + "\nOutput: <KW>keyword, keyword</KW>";
        try {
            const auto span = extract_span(generator->generate(prompt), "<KW>", "</KW>");
            std::vector<std::string> words;
            std::string current;
            std::istringstream in(span);
            while (std::getline(in, current, ',')) words.push_back(to_lower_ascii(trim(current)));
            auto keywords = dedupe_capped(std::move(words), kMaxKeywords);
            if (!keywords.empty()) return keywords;
        } catch (const Error&) {
            // fall through to the heuristic
        }
    }
    return heuristic_keywords(user_prompt, stopwords);
}

void DocumentStore::index_document(const std::string& doc_id, const std::string& text) {
    if (doc_id.empty()) throw Error(ErrorCode::InvalidArgument, "document id must be non-empty");
    if (!is_valid_utf8(text)) throw Error(ErrorCode::InvalidArgument, "document " + doc_id + " is not valid UTF-8");
    Document doc;
    doc.id = doc_id;
    doc.text = text;
    for (auto& token : tokenize(text)) {
        ++doc.term_freq[std::move(token)];
        ++doc.length;
    }

    std::unique_lock lock(mutex_);
    for (const auto& existing : docs_) {
        if (existing.id == doc_id) throw Error(ErrorCode::DuplicateDocument, "document " + doc_id + " already indexed");
    }
    for (const auto& [term, tf] : doc.term_freq) ++doc_freq_[term];
    total_length_ += doc.length;
    docs_.push_back(std::move(doc));
}

std::size_t DocumentStore::size() const {
    std::shared_lock lock(mutex_);
    return docs_.size();
}

std::vector<Snippet> DocumentStore::search(const std::vector<std::string>& keywords, std::size_t max_results) const {
    std::set<std::string> terms;
    for (const auto& k : keywords) {
        for (auto& t : tokenize(k)) terms.insert(std::move(t));
    }

    std::shared_lock lock(mutex_);
    if (docs_.empty() || terms.empty() || max_results == 0) return {};
    const double n = static_cast<double>(docs_.size());
    const double avgdl = std::max(1.0, static_cast<double>(total_length_) / n);

    std::vector<Snippet> hits;
    for (const auto& doc : docs_) {
        double score = 0.0;
        bool matched = false;
        for (const auto& term : terms) {
            const auto tf_it = doc.term_freq.find(term);
            if (tf_it == doc.term_freq.end()) continue;
            matched = true;
            const double df = static_cast<double>(doc_freq_.at(term));
            const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            const double tf = static_cast<double>(tf_it->second);
            const double norm = params_.k1 * (1.0 - params_.b + params_.b * static_cast<double>(doc.length) / avgdl);
            score += idf * tf * (params_.k1 + 1.0) / (tf + norm);
        }
        if (matched) hits.push_back({utf8_prefix(doc.text, kSnippetChars), doc.id, score});
    }
    std::sort(hits.begin(), hits.end(), [](const Snippet& a, const Snippet& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.source_id < b.source_id;
    });
    if (hits.size() > max_results) hits.resize(max_results);
    return hits;
}

nlohmann::json DocumentStore::to_json() const {
    std::shared_lock lock(mutex_);
    nlohmann::json docs = nlohmann::json::array();
    for (const auto& d : docs_) docs.push_back({{"id", d.id}, {"text", d.text}});
    return {{"version", 1}, {"k1", params_.k1}, {"b", params_.b}, {"documents", docs}};
}

std::unique_ptr<DocumentStore> DocumentStore::from_json(const nlohmann::json& j) {
    try {
        Bm25Params params{j.value("k1", 1.2), j.value("b", 0.75)};
        auto store = std::make_unique<DocumentStore>(params);
        for (const auto& d : j.at("documents")) {
            store->index_document(d.at("id").get<std::string>(), d.at("text").get<std::string>());
        }
        return store;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Schema, std::string("document store: ") + e.what());
    }
}

void DocumentStore::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Config, "cannot write " + path);
    out << to_json().dump();
    if (!out) throw Error(ErrorCode::Config, "write failed for " + path);
}

std::unique_ptr<DocumentStore> DocumentStore::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Config, "cannot read " + path);
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::Schema, path + " is not valid JSON");
    return from_json(j);
}

std::vector<Snippet> rag_search(const DocumentStore& store, const std::vector<std::string>& keywords,
                                std::size_t max_results) {
    return store.search(keywords, std::min(max_results, kMaxGroundingSnippets));
}

FixtureSearchProvider FixtureSearchProvider::from_json(const nlohmann::json& j) {
    std::vector<Snippet> results;
    try {
        for (const auto& r : j.at("results")) {
            results.push_back({r.at("text").get<std::string>(), r.value("source", r.value("source_id", std::string())),
                               r.value("score", 0.0)});
        }
        return FixtureSearchProvider(std::move(results), j.value("reachable", true));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Config, std::string("search fixture: ") + e.what());
    }
}

std::vector<Snippet> FixtureSearchProvider::search(const std::vector<std::string>&, std::size_t max_results) const {
    if (!reachable_) throw Error(ErrorCode::WebSearchUnavailable, "search provider unreachable");
    std::vector<Snippet> out(results_.begin(), results_.begin() + static_cast<std::ptrdiff_t>(
                                                                       std::min(max_results, results_.size())));
    return out;
}

HttpSearchProvider::HttpSearchProvider(std::string url, std::shared_ptr<HttpTransport> transport)
    : transport_(std::move(transport)) {
    if (!transport_) throw Error(ErrorCode::Config, "search provider needs a transport");
    std::tie(origin_, path_) = split_base_url(url);
}

std::vector<Snippet> HttpSearchProvider::search(const std::vector<std::string>& keywords,
                                                std::size_t max_results) const {
    nlohmann::ordered_json body;
    body["query"] = join(keywords, " ");
    body["max_results"] = max_results;
    HttpRequest request;
    request.base_url = origin_;
    request.path = path_;
    request.body = body.dump();
    request.headers = {{"Content-Type", "application/json"}};
    HttpResponse response;
    try {
        response = transport_->post(request);
    } catch (const TransportError& e) {
        throw Error(ErrorCode::WebSearchUnavailable, e.what());
    }
    if (response.status < 200 || response.status >= 300) {
        throw Error(ErrorCode::WebSearchUnavailable, "search provider returned HTTP " + std::to_string(response.status));
    }
    const auto j = nlohmann::json::parse(response.body, nullptr, false);
    if (j.is_discarded() || !j.contains("results") || !j["results"].is_array()) {
        throw Error(ErrorCode::WebSearchUnavailable, "search provider reply is malformed");
    }
    std::vector<Snippet> out;
    for (const auto& r : j["results"]) {
        if (!r.is_object() || !r.contains("text") || !r["text"].is_string()) continue;
        const auto score = r.contains("score") && r["score"].is_number() ? r["score"].get<double>() : 0.0;
        const auto source = r.contains("source") && r["source"].is_string() ? r["source"].get<std::string>() : "";
        out.push_back({r["text"].get<std::string>(), source, score});
    }
    return out;
}

std::vector<Snippet> web_search(const SearchProvider& provider, const std::vector<std::string>& keywords,
                                std::size_t max_results) {
    const auto cap = std::min(max_results, kMaxGroundingSnippets);
    std::vector<Snippet> out;
    for (auto& s : provider.search(keywords, cap)) {
        if (out.size() >= cap) break;
        if (!valid_snippet(s)) continue;
        s.text = utf8_prefix(s.text, kSnippetChars);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace slotwise
