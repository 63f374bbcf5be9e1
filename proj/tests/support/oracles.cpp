#include "oracles.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

namespace slotwise::oracle {

std::size_t lcs_bruteforce(const Tokens& a, const Tokens& b) {
    std::size_t best = 0;
    const std::size_t subsets = std::size_t{1} << a.size();
    for (std::size_t mask = 0; mask < subsets; ++mask) {
        Tokens sub;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (mask & (std::size_t{1} << i)) sub.push_back(a[i]);
        }
        if (sub.size() <= best) continue;
        // Greedy scan decides whether sub is a subsequence of b.
        std::size_t k = 0;
        for (const auto& t : b) {
            if (k < sub.size() && t == sub[k]) ++k;
        }
        if (k == sub.size()) best = sub.size();
    }
    return best;
}

namespace {

std::map<std::string, int> gram_counts(const Tokens& t, std::size_t n) {
    std::map<std::string, int> counts;
    for (std::size_t i = 0; i + n <= t.size(); ++i) {
        std::string key;
        for (std::size_t k = 0; k < n; ++k) key += t[i + k] + '\x1f';
        counts[key] += 1;
    }
    return counts;
}

}  // namespace

double bleu_straight(const Tokens& candidate, const Tokens& reference) {
    const double c = static_cast<double>(candidate.size());
    const double r = static_cast<double>(reference.size());
    const std::size_t orders = std::min<std::size_t>(4, candidate.size());
    double product = 1.0;
    for (std::size_t n = 1; n <= orders; ++n) {
        const auto cand = gram_counts(candidate, n);
        const auto ref = gram_counts(reference, n);
        int matched = 0;
        int total = 0;
        for (const auto& [g, count] : cand) {
            total += count;
            const auto it = ref.find(g);
            matched += it == ref.end() ? 0 : std::min(count, it->second);
        }
        const double p = matched == 0 ? 1.0 / (2.0 * c) : static_cast<double>(matched) / total;
        product *= p;
    }
    const double geo = std::pow(product, 1.0 / static_cast<double>(orders));
    const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return bp * geo;
}

double overlap_fraction(const Tokens& candidate, const Tokens& reference) {
    const std::set<std::string> ref(reference.begin(), reference.end());
    std::size_t hits = 0;
    for (const auto& t : candidate) hits += ref.count(t);
    return static_cast<double>(hits) / static_cast<double>(candidate.size());
}

Tokens simple_tokens(const std::string& text) {
    Tokens out;
    std::string cur;
    for (const unsigned char ch : text) {
        if (std::isalnum(ch) || ch >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<std::pair<std::string, double>> bm25_ranking(const std::vector<Doc>& docs, const Tokens& query_terms) {
    const double k1 = 1.2, b = 0.75;
    std::vector<Tokens> tokens;
    double total = 0;
    for (const auto& d : docs) {
        tokens.push_back(simple_tokens(d.text));
        total += static_cast<double>(tokens.back().size());
    }
    const double n = static_cast<double>(docs.size());
    const double avgdl = std::max(1.0, total / n);
    const std::set<std::string> terms(query_terms.begin(), query_terms.end());

    std::vector<std::pair<std::string, double>> out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        double score = 0;
        bool any = false;
        for (const auto& term : terms) {
            const double tf = static_cast<double>(std::count(tokens[i].begin(), tokens[i].end(), term));
            if (tf == 0) continue;
            any = true;
            double df = 0;
            for (const auto& t : tokens) df += std::count(t.begin(), t.end(), term) > 0 ? 1 : 0;
            const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            const double len = static_cast<double>(tokens[i].size());
            score += idf * (tf * (k1 + 1)) / (tf + k1 * (1 - b + b * len / avgdl));
        }
        if (any) out.emplace_back(docs[i].id, score);
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
        return x.second != y.second ? x.second > y.second : x.first < y.first;
    });
    return out;
}

Tokens random_tokens(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len, std::size_t vocab) {
    const auto len = min_len + rng() % (max_len - min_len + 1);
    Tokens t;
    for (std::size_t i = 0; i < len; ++i) t.push_back("w" + std::to_string(rng() % vocab));
    return t;
}

}  // namespace slotwise::oracle
