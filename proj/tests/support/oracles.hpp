#pragma once

// Independent reference implementations used to check the library. They are
// written for obviousness, not speed, and share no code with src/.

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace slotwise::oracle {

using Tokens = std::vector<std::string>;

// Longest common subsequence by enumerating every subset of `a`.
std::size_t lcs_bruteforce(const Tokens& a, const Tokens& b);

// Smoothed sentence BLEU written out term by term: clipped n-gram precision
// for n = 1..min(4, c), zero precisions replaced by 1/(2c), geometric mean
// with equal weights, brevity penalty exp(1 - r/c) unless c > r.
double bleu_straight(const Tokens& candidate, const Tokens& reference);

// Fraction of candidate tokens that occur anywhere in the reference.
double overlap_fraction(const Tokens& candidate, const Tokens& reference);

struct Doc {
    std::string id;
    std::string text;
};

// Recomputes BM25 (k1 = 1.2, b = 0.75, idf = ln(1 + (N - df + 0.5)/(df + 0.5)))
// from scratch for every query; returns (id, score) sorted by score desc then
// id asc, dropping documents that match no query term.
std::vector<std::pair<std::string, double>> bm25_ranking(const std::vector<Doc>& docs, const Tokens& query_terms);

// Lowercases ASCII and splits on ASCII non-alphanumerics.
Tokens simple_tokens(const std::string& text);

// Random token sequence of length [min_len, max_len] over "w0".."w{vocab-1}".
Tokens random_tokens(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len, std::size_t vocab);

}  // namespace slotwise::oracle
