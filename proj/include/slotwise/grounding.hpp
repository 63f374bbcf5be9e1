#pragma once

#include "slotwise/generator.hpp"

#include <cstddef>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

namespace slotwise {

class HttpTransport;

struct Snippet {
    std::string text;
    std::string source_id;
    double score = 0.0;

    bool operator==(const Snippet&) const = default;
};

nlohmann::json to_json(const Snippet& s);
Snippet snippet_from_json(const nlohmann::json& j);

inline constexpr std::size_t kMaxGroundingSnippets = 5;
inline constexpr std::size_t kMaxKeywords = 8;
inline constexpr std::size_t kSnippetChars = 400;

class StopwordList {
public:
    // One word per line; blank lines and lines starting with '#' are ignored.
    static StopwordList from_text(std::string_view text);
    static StopwordList defaults();

    bool contains(std::string_view word) const { return words_.count(std::string(word)) != 0; }
    std::size_t size() const { return words_.size(); }

private:
    std::unordered_set<std::string> words_;
};

enum class KeywordMode { Heuristic, Model };

// Lowercase, split on non-alphanumerics, drop stopwords, dedupe keeping first
// occurrence, keep at most kMaxKeywords.
std::vector<std::string> heuristic_keywords(std::string_view text, const StopwordList& stopwords);

// Model mode asks the generator for <KW>a, b</KW> and falls back to the
// heuristic when nothing parseable comes back (or no generator is given).
std::vector<std::string> extract_keywords(std::string_view user_prompt, KeywordMode mode,
                                          const Generator* generator,
                                          const StopwordList& stopwords = StopwordList::defaults());

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

// Lexical BM25 index. Concurrent reads, one writer at a time.
//   idf(t)    = ln(1 + (N - df + 0.5) / (df + 0.5))
//   score(d)  = sum over distinct query terms t in d of
//               idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))
class DocumentStore {
public:
    explicit DocumentStore(Bm25Params params = {}) : params_(params) {}

    DocumentStore(const DocumentStore&) = delete;
    DocumentStore& operator=(const DocumentStore&) = delete;

    // Throws Error(DuplicateDocument).
    void index_document(const std::string& doc_id, const std::string& text);

    std::size_t size() const;

    // Ranked by score descending, ties by doc_id ascending; zero-match
    // documents are never returned.
    std::vector<Snippet> search(const std::vector<std::string>& keywords,
                                std::size_t max_results) const;

    const Bm25Params& params() const { return params_; }

    nlohmann::json to_json() const;
    static std::unique_ptr<DocumentStore> from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static std::unique_ptr<DocumentStore> load(const std::string& path);

private:
    struct Document {
        std::string id;
        std::string text;
        std::map<std::string, std::size_t> term_freq;
        std::size_t length = 0;
    };

    Bm25Params params_;
    mutable std::shared_mutex mutex_;
    std::vector<Document> docs_;
    std::map<std::string, std::size_t> doc_freq_;
    std::size_t total_length_ = 0;
};

std::vector<Snippet> rag_search(const DocumentStore& store, const std::vector<std::string>& keywords,
                                std::size_t max_results);

// Throws Error(WebSearchUnavailable) when the provider cannot be reached.
class SearchProvider {
public:
    virtual ~SearchProvider() = default;
    virtual std::vector<Snippet> search(const std::vector<std::string>& keywords,
                                        std::size_t max_results) const = 0;
};

// Canned results, returned in order. An unreachable fixture always throws.
class FixtureSearchProvider final : public SearchProvider {
public:
    explicit FixtureSearchProvider(std::vector<Snippet> results, bool reachable = true)
        : results_(std::move(results)), reachable_(reachable) {}

    static FixtureSearchProvider from_json(const nlohmann::json& j);

    std::vector<Snippet> search(const std::vector<std::string>& keywords,
                                std::size_t max_results) const override;

private:
    std::vector<Snippet> results_;
    bool reachable_;
};

// POST {url} {"query": "...", "max_results": n}
//   -> {"results": [{"text": ..., "source": ..., "score": ...}]}
class HttpSearchProvider final : public SearchProvider {
public:
    HttpSearchProvider(std::string url, std::shared_ptr<HttpTransport> transport);

    std::vector<Snippet> search(const std::vector<std::string>& keywords,
                                std::size_t max_results) const override;

private:
    std::string origin_;
    std::string path_;
    std::shared_ptr<HttpTransport> transport_;
};

// Provider results in provider order, invalid snippets dropped, capped.
std::vector<Snippet> web_search(const SearchProvider& provider, const std::vector<std::string>& keywords,
                                std::size_t max_results);

}  // namespace slotwise
