#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "infoneed/error.hpp"
#include "infoneed/index.hpp"
#include "infoneed/providers.hpp"
#include "infoneed/scorers.hpp"
#include "test_util.hpp"

using namespace infoneed;

namespace {

EmbeddingVector vec(std::vector<double> v) { return EmbeddingVector{std::move(v)}; }

EmbeddingVector random_vec(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    EmbeddingVector v;
    for (std::size_t i = 0; i < dim; ++i) v.values.push_back(n(rng));
    return v;
}

}  // namespace

TEST(Cosine, ClosedForms) {
    EXPECT_DOUBLE_EQ(cosine_similarity(vec({1, 2, 3}), vec({1, 2, 3})), 1.0);
    EXPECT_DOUBLE_EQ(cosine_similarity(vec({1, 0}), vec({0, 1})), 0.0);
    EXPECT_NEAR(cosine_similarity(vec({1, 1}), vec({1, 0})), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_THROW(cosine_similarity(vec({1, 0}), vec({1, 0, 0})), ValidationError);
    EXPECT_THROW(cosine_similarity(vec({0, 0}), vec({1, 0})), ValidationError);
}

TEST(Loss, Fixtures) {
    const auto a = vec({0.3, 0.4});
    EXPECT_EQ(cosine_embedding_loss(a, a, PairLabel::Positive), 0.0);
    // cos = 0.8 and cos = 0.2 pairs
    const auto u = vec({1, 0});
    const auto v08 = vec({0.8, 0.6});
    const auto v02 = vec({0.2, std::sqrt(1 - 0.04)});
    EXPECT_NEAR(cosine_embedding_loss(u, v08, PairLabel::Negative, {0.5}), 0.3, 1e-12);
    EXPECT_EQ(cosine_embedding_loss(u, v02, PairLabel::Negative, {0.5}), 0.0);
    EXPECT_EQ(mse_label_loss(1.0, PairLabel::Positive), 0.0);
    EXPECT_EQ(mse_label_loss(0.0, PairLabel::Positive), 1.0);
    EXPECT_NEAR(mse_label_loss(0.3, PairLabel::Negative), 0.09, 1e-15);
    EXPECT_THROW(cosine_embedding_loss(u, v08, PairLabel::Negative, {1.5}), ValidationError);
}

TEST(Loss, NonIncreasingInMarginForNegatives) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> m(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const auto a = random_vec(rng, 8);
        const auto b = random_vec(rng, 8);
        double lo = m(rng), hi = m(rng);
        if (lo > hi) std::swap(lo, hi);
        const double l_lo = cosine_embedding_loss(a, b, PairLabel::Negative, {lo});
        const double l_hi = cosine_embedding_loss(a, b, PairLabel::Negative, {hi});
        EXPECT_GE(l_lo, l_hi);
        EXPECT_GE(l_hi, 0.0);
        EXPECT_GE(cosine_embedding_loss(a, b, PairLabel::Positive), 0.0);
    }
}

TEST(Loss, CosineIsScaleInvariant) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const auto a = random_vec(rng, 6);
        const auto b = random_vec(rng, 6);
        auto scaled = a;
        const double c = 0.01 + static_cast<double>(rng() % 1000);
        for (double& x : scaled.values) x *= c;
        EXPECT_NEAR(cosine_similarity(scaled, b), cosine_similarity(a, b), 1e-12);
    }
}

TEST(Export, RowsLabelsAndDeterminism) {
    infoneed::testing::TempDir tmp;
    std::vector<Document> docs;
    std::vector<TrainingPair> pairs;
    for (int i = 0; i < 11; ++i) {
        docs.push_back({"d" + std::to_string(i), "passage " + std::to_string(i), {}});
        pairs.push_back({"s1", "robin eggs | hatching time", "d" + std::to_string(i),
                         i == 0 ? PairLabel::Positive : PairLabel::Negative, Split::Train});
    }
    const auto corpus = Corpus::create(docs);
    EXPECT_EQ(export_training_pairs(pairs, corpus, ExportFormat::Jsonl, tmp / "a.jsonl"), 11u);
    const auto rows = read_jsonl(tmp / "a.jsonl");
    ASSERT_EQ(rows.size(), 11u);
    EXPECT_EQ(rows[0]["label"], 1);
    EXPECT_EQ(rows[1]["label"], 0);
    EXPECT_EQ(rows[0]["target_text"], "passage 0");
    export_training_pairs(pairs, corpus, ExportFormat::Jsonl, tmp / "b.jsonl");
    EXPECT_EQ(read_file(tmp / "a.jsonl"), read_file(tmp / "b.jsonl"));
    EXPECT_EQ(export_training_pairs(pairs, corpus, ExportFormat::Tsv, tmp / "a.tsv"), 11u);
    EXPECT_EQ(read_file(tmp / "a.tsv").rfind(
        "sample_id\tinput_text\ttarget_doc_id\ttarget_text\tlabel\n"
        "s1\trobin eggs | hatching time\td0\tpassage 0\t1\n",
        0),
              0u);
    pairs[0].target_doc_id = "missing";
    EXPECT_THROW(export_training_pairs(pairs, corpus, ExportFormat::Jsonl, tmp / "c.jsonl"), ValidationError);
}

TEST(Scorer, ThreeFamiliesUnderFallback) {
    const std::vector<Document> docs = {{"d1", "robin eggs hatch", {}}, {"d2", "eggs hatch fast", {}},
                                        {"d3", "fire stone route", {}}};
    auto index = std::make_shared<const InvertedIndex>(InvertedIndex::build(docs));
    auto offline = std::make_shared<OfflineProvider>();
    const Scorer lexical(ScorerKind::Lexical, offline, index);
    const Scorer embedding(ScorerKind::Embedding, offline, index);
    const Scorer cross(ScorerKind::Cross, offline, index);
    EXPECT_EQ(lexical.score("parrot", docs[2]).score, 0.0);
    EXPECT_GT(lexical.score("robin", docs[0]).score, 0.0);
    EXPECT_NEAR(embedding.score("robin eggs hatch", docs[0]).score, 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(cross.score("robin eggs hatch", docs[1]).score, 0.5);
    std::vector<const Document*> ptrs = {&docs[0], &docs[1], &docs[2]};
    embedding.warm(ptrs);
    const auto all = embedding.score_all("robin eggs", ptrs);
    for (std::size_t i = 0; i < docs.size(); ++i)
        EXPECT_DOUBLE_EQ(all[i].score, embedding.score("robin eggs", docs[i]).score);
    EXPECT_EQ(parse_scorer_kind("bm25"), ScorerKind::Lexical);
    EXPECT_EQ(parse_scorer_kind("cross-encoder"), ScorerKind::Cross);
}
