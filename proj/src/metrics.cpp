#include "slotwise/metrics.hpp"

#include "slotwise/error.hpp"
#include "slotwise/llm_gateway.hpp"
#include "slotwise/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace slotwise {
namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const std::vector<std::string>& tokens, std::size_t n) {
    NgramCounts counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                          tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return counts;
}

}  // namespace

TokenSeq::TokenSeq(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (const auto& t : tokens_) {
        if (t.empty()) throw Error(ErrorCode::InvalidArgument, "token sequence holds an empty token");
        if (std::any_of(t.begin(), t.end(), [](char c) { return c >= 'A' && c <= 'Z'; })) {
            throw Error(ErrorCode::InvalidArgument, "token \"" + t + "\" is not lowercase");
        }
    }
}

TokenSeq TokenSeq::from_text(std::string_view text) { return TokenSeq(tokenize(text)); }

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(const TokenSeq& generated, const TokenSeq& reference) {
    if (reference.empty()) throw Error(ErrorCode::EmptyReference, "ROUGE-L needs a non-empty reference");
    return static_cast<double>(lcs_length(generated, reference)) / static_cast<double>(reference.size());
}

double bleu(const TokenSeq& generated, const TokenSeq& reference) {
    if (generated.empty()) throw Error(ErrorCode::EmptyOperand, "BLEU needs a non-empty candidate");
    if (reference.empty()) throw Error(ErrorCode::EmptyOperand, "BLEU needs a non-empty reference");
    const double c = static_cast<double>(generated.size());
    const double r = static_cast<double>(reference.size());
    const std::size_t max_order = std::min<std::size_t>(4, generated.size());

    double log_sum = 0.0;
    for (std::size_t n = 1; n <= max_order; ++n) {
        const auto cand = ngrams(generated.tokens(), n);
        const auto ref = ngrams(reference.tokens(), n);
        std::size_t clipped = 0;
        for (const auto& [gram, count] : cand) {
            const auto it = ref.find(gram);
            if (it != ref.end()) clipped += std::min(count, it->second);
        }
        const double total = static_cast<double>(generated.size() - n + 1);
        const double p = clipped == 0 ? 1.0 / (2.0 * c) : static_cast<double>(clipped) / total;
        log_sum += std::log(p) / static_cast<double>(max_order);
    }
    const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return bp * std::exp(log_sum);
}

std::vector<std::vector<double>> OneHotEmbedder::embed(const std::vector<std::string>& tokens) const {
    std::unordered_map<std::string, std::size_t> axis;
    for (const auto& t : tokens) axis.emplace(t, axis.size());
    std::vector<std::vector<double>> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        std::vector<double> v(axis.size(), 0.0);
        v[axis.at(t)] = 1.0;
        out.push_back(std::move(v));
    }
    return out;
}

RemoteEmbedder::RemoteEmbedder(const BackendConfig& config, std::shared_ptr<HttpTransport> transport)
    : model_(config.model_id),
      timeout_ms_(static_cast<int>(config.timeout.count())),
      transport_(std::move(transport)) {
    if (!transport_) throw Error(ErrorCode::Config, "embedder needs a transport");
    if (config.base_url.empty() || config.api_key_env.empty()) {
        throw Error(ErrorCode::Config, "embedder needs base_url and api_key_env");
    }
    const char* key = std::getenv(config.api_key_env.c_str());
    if (!key || !*key) throw Error(ErrorCode::Config, "environment variable " + config.api_key_env + " is not set");
    api_key_ = key;
    std::tie(origin_, path_) = split_base_url(config.base_url);
    path_ += "/embeddings";
}

std::vector<std::vector<double>> RemoteEmbedder::embed(const std::vector<std::string>& tokens) const {
    nlohmann::ordered_json body;
    body["model"] = model_;
    body["input"] = tokens;
    HttpRequest request;
    request.base_url = origin_;
    request.path = path_;
    request.body = body.dump();
    request.headers = {{"Authorization", "Bearer " + api_key_}, {"Content-Type", "application/json"}};
    request.timeout = std::chrono::milliseconds(timeout_ms_);
    HttpResponse response;
    try {
        response = transport_->post(request);
    } catch (const TransportError& e) {
        throw Error(ErrorCode::EmbedderError, e.what());
    }
    if (response.status < 200 || response.status >= 300) {
        throw Error(ErrorCode::EmbedderError, "embeddings endpoint returned HTTP " + std::to_string(response.status));
    }
    const auto j = nlohmann::json::parse(response.body, nullptr, false);
    try {
        if (j.is_discarded()) throw Error(ErrorCode::EmbedderError, "embeddings reply is not JSON");
        std::vector<std::vector<double>> out;
        for (const auto& item : j.at("data")) out.push_back(item.at("embedding").get<std::vector<double>>());
        if (out.size() != tokens.size()) throw Error(ErrorCode::EmbedderError, "embeddings reply has the wrong length");
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::EmbedderError, std::string("embeddings reply: ") + e.what());
    }
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw Error(ErrorCode::EmbedderError, "embedding dimensions differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (!std::isfinite(dot) || !std::isfinite(na) || !std::isfinite(nb)) {
        throw Error(ErrorCode::EmbedderError, "non-finite embedding");
    }
    if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::EmbedderError, "zero-norm embedding");
    // One square root of the product keeps cosine(v, v) at exactly 1.
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

double bert_score(const TokenSeq& generated, const TokenSeq& reference, const Embedder& embedder) {
    if (generated.empty() || reference.empty()) throw Error(ErrorCode::EmptyOperand, "BERTScore needs two non-empty texts");
    std::vector<std::string> all = generated.tokens();
    all.insert(all.end(), reference.tokens().begin(), reference.tokens().end());
    const auto vectors = embedder.embed(all);
    if (vectors.size() != all.size()) throw Error(ErrorCode::EmbedderError, "embedder returned the wrong count");

    double sum = 0.0;
    for (std::size_t i = 0; i < generated.size(); ++i) {
        double best = -1.0;
        for (std::size_t j = 0; j < reference.size(); ++j) {
            best = std::max(best, cosine(vectors[i], vectors[generated.size() + j]));
        }
        sum += best;
    }
    return sum / static_cast<double>(generated.size());
}

}  // namespace slotwise
