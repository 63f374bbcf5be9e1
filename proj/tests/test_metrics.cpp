#include "slotwise/error.hpp"
#include "slotwise/llm_gateway.hpp"
#include "slotwise/metrics.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

using namespace slotwise;
using slotwise::testing::FakeTransport;

namespace {

TokenSeq toks(std::initializer_list<const char*> words) {
    std::vector<std::string> v;
    for (auto w : words) v.emplace_back(w);
    return TokenSeq(std::move(v));
}

}  // namespace

TEST(TokenSeq, RejectsNonCanonicalTokens) {
    EXPECT_THROW(TokenSeq({"Upper"}), Error);
    EXPECT_THROW(TokenSeq({""}), Error);
    EXPECT_EQ(TokenSeq::from_text("Hello, World!").tokens(), (std::vector<std::string>{"hello", "world"}));
}

TEST(RougeL, WorkedExamples) {
    EXPECT_DOUBLE_EQ(rouge_l(toks({"a", "b", "c"}), toks({"a", "c", "d"})), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(rouge_l(toks({"x"}), toks({"a", "b"})), 0.0);
    EXPECT_DOUBLE_EQ(rouge_l(toks({}), toks({"a"})), 0.0);
    EXPECT_DOUBLE_EQ(rouge_l(toks({"a", "b"}), toks({"a", "b"})), 1.0);
    try {
        rouge_l(toks({"a"}), toks({}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyReference);
    }
}

TEST(Bleu, WorkedExamples) {
    const double expected = std::pow(0.75 * (2.0 / 3.0) * 0.5 * 0.125, 0.25);
    EXPECT_NEAR(bleu(toks({"a", "b", "c", "d"}), toks({"a", "b", "c", "e"})), expected, 1e-12);
    EXPECT_NEAR(bleu(toks({"a", "b"}), toks({"a", "b", "c", "d"})), std::exp(-1.0), 1e-12);
    EXPECT_DOUBLE_EQ(bleu(toks({"a", "b", "c", "d", "e"}), toks({"a", "b", "c", "d", "e"})), 1.0);
    EXPECT_THROW(bleu(toks({}), toks({"a"})), Error);
    EXPECT_THROW(bleu(toks({"a"}), toks({})), Error);
}

TEST(Metrics, MatchOraclesOnRandomPairs) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 300; ++i) {
        const auto a = oracle::random_tokens(rng, 1, 10, 6);
        const auto b = oracle::random_tokens(rng, 1, 10, 6);
        EXPECT_EQ(lcs_length(TokenSeq(a), TokenSeq(b)), oracle::lcs_bruteforce(a, b));
        EXPECT_NEAR(bleu(TokenSeq(a), TokenSeq(b)), oracle::bleu_straight(a, b), 1e-9);
        EXPECT_EQ(bert_score(TokenSeq(a), TokenSeq(b), OneHotEmbedder()), oracle::overlap_fraction(a, b));
    }
}

TEST(BertScore, OneHotIdentityAndEmpty) {
    OneHotEmbedder e;
    EXPECT_EQ(bert_score(toks({"a", "b", "a"}), toks({"a", "b", "a"}), e), 1.0);
    EXPECT_EQ(bert_score(toks({"a", "z"}), toks({"a"}), e), 0.5);
    EXPECT_THROW(bert_score(toks({}), toks({"a"}), e), Error);
}

TEST(BertScore, ZeroNormEmbeddingFails) {
    struct Zero final : Embedder {
        std::vector<std::vector<double>> embed(const std::vector<std::string>& t) const override {
            return std::vector<std::vector<double>>(t.size(), std::vector<double>{0.0, 0.0});
        }
    };
    try {
        bert_score(toks({"a"}), toks({"b"}), Zero());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmbedderError);
    }
}

TEST(Cosine, BasicValues) {
    EXPECT_DOUBLE_EQ(cosine({1, 0}, {1, 0}), 1.0);
    EXPECT_DOUBLE_EQ(cosine({1, 0}, {0, 1}), 0.0);
    EXPECT_NEAR(cosine({1, 1}, {-1, -1}), -1.0, 1e-15);
}

TEST(RemoteEmbedder, ParsesEmbeddings) {
    BackendConfig cfg;
    cfg.kind = BackendConfig::Kind::Remote;
    cfg.model_id = "emb";
    cfg.base_url = "http://emb.test/v1";
    cfg.api_key_env = "SLOTWISE_TEST_EMBED_KEY";
    ::setenv("SLOTWISE_TEST_EMBED_KEY", "k", 1);
    auto transport = std::make_shared<FakeTransport>(std::vector<HttpResponse>{
        {200, R"({"data": [{"embedding": [1, 0]}, {"embedding": [0, 1]}]})"}, {200, R"({"data": []})"}});
    RemoteEmbedder e(cfg, transport);
    const auto v = e.embed({"a", "b"});
    ASSERT_EQ(v.size(), 2u);
    EXPECT_EQ(v[1], (std::vector<double>{0, 1}));
    EXPECT_EQ(transport->requests()[0].path, "/v1/embeddings");
    EXPECT_EQ(transport->requests()[0].headers.at(0).second, "Bearer k");
    EXPECT_THROW(e.embed({"a"}), Error);
}
