#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace slotwise {

class HttpTransport;
struct BackendConfig;

// Output of the canonical tokenizer: lowercase, no empty tokens.
class TokenSeq {
public:
    TokenSeq() = default;
    // Throws Error(InvalidArgument) for empty or non-lowercase tokens.
    explicit TokenSeq(std::vector<std::string> tokens);
    static TokenSeq from_text(std::string_view text);

    const std::vector<std::string>& tokens() const { return tokens_; }
    std::size_t size() const { return tokens_.size(); }
    bool empty() const { return tokens_.empty(); }
    const std::string& operator[](std::size_t i) const { return tokens_[i]; }

private:
    std::vector<std::string> tokens_;
};

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b);

// LCS(X, Y) / |Y|: the recall form, not the F-measure most toolkits report.
// Throws Error(EmptyReference) for an empty reference.
double rouge_l(const TokenSeq& generated, const TokenSeq& reference);

// BP * exp(sum_n w_n log p_n) over n = 1..4 with clipped precisions.
//   BP = 1 if c > r else exp(1 - r/c)
//   p_n == 0 is replaced by 1 / (2c)
//   orders with no candidate n-grams (c < n) are dropped and the remaining
//   weights renormalized to sum to one
// Throws Error(EmptyOperand).
double bleu(const TokenSeq& generated, const TokenSeq& reference);

// Maps tokens to vectors. All vectors returned by one call share a space.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& tokens) const = 0;
};

// One axis per distinct token of the call; cosine is 1 for equal tokens and 0
// otherwise.
class OneHotEmbedder final : public Embedder {
public:
    std::vector<std::vector<double>> embed(const std::vector<std::string>& tokens) const override;
};

// Embeddings endpoint: POST {base}/embeddings {"model", "input": [...]}
//   -> {"data": [{"embedding": [...]}, ...]}
class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(const BackendConfig& config, std::shared_ptr<HttpTransport> transport);
    std::vector<std::vector<double>> embed(const std::vector<std::string>& tokens) const override;

private:
    std::string model_;
    std::string origin_;
    std::string path_;
    std::string api_key_;
    int timeout_ms_;
    std::shared_ptr<HttpTransport> transport_;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

// (1/|X|) sum over x in X of max over y in Y of cosine(E(x), E(y)), the
// precision form. Throws Error(EmptyOperand) or Error(EmbedderError) for a
// zero-norm or non-finite embedding.
double bert_score(const TokenSeq& generated, const TokenSeq& reference, const Embedder& embedder);

}  // namespace slotwise
