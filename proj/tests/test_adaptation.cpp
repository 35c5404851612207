#include <map>
#include <set>

#include <gtest/gtest.h>

#include "infoneed/adaptation.hpp"
#include "infoneed/error.hpp"
#include "infoneed/synth.hpp"
#include "mock_server.hpp"
#include "test_util.hpp"

using namespace infoneed;
using infoneed::testing::TempDir;

namespace {

// Answers reformulation prompts the way an instruction-tuned model would for
// the two worked examples.
class ScriptedProvider final : public Provider {
  public:
    std::string name() const override { return "scripted"; }
    Generation generate(const GenerationRequest& r) override {
        if (r.prompt.find("when do robin eggs hatch") != std::string::npos)
            return {"Context: robin eggs\nIntent: hatching time", "scripted"};
        if (r.prompt.find("Where do these rumours come from?") != std::string::npos)
            return {"source\n(the question asks where the rumours originate)", "scripted"};
        return {"no idea", "scripted"};
    }
    std::vector<EmbeddingVector> embed(const std::vector<std::string>&) override { return {}; }
    double score_pair(std::string_view, std::string_view) override { return 0; }
};

Sample with_target(std::string id, std::string target, Split split) {
    Sample s;
    s.sample_id = std::move(id);
    s.source = "src";
    s.context = "ctx";
    s.intent = "what";
    s.question = "what ctx";
    s.target_doc_id = std::move(target);
    s.split = split;
    return s;
}

}  // namespace

TEST(SourceSimulation, PicksNonAnsweringPassage) {
    const auto corpus = Corpus::create(
        {{"hatch", "robin eggs hatch after about two weeks of incubation", {}},
         {"nest", "robin nests are built from mud and grass, eggs are blue", {}},
         {"fire", "fire stone route", {}}},
        {{"q1", "when do robin eggs hatch"}}, {{"q1", "hatch", 1}});
    const auto idx = InvertedIndex::build(corpus.documents());
    const auto sim = simulate_source(idx, corpus.queries()[0], corpus.judgments(), 10);
    EXPECT_EQ(sim.source_doc_id, "nest");
    for (const auto& e : sim.candidates.entries) EXPECT_NE(e.doc_id, "hatch");
    const auto again = simulate_source(idx, corpus.queries()[0], corpus.judgments(), 10);
    EXPECT_EQ(again.candidates, sim.candidates);
}

TEST(SourceSimulation, SkipsWhenOnlyTheJudgedPassageMatches) {
    const auto corpus = Corpus::create({{"hatch", "robin eggs hatch", {}}, {"fire", "fire stone route", {}}},
                                       {{"q1", "when do robin eggs hatch"}}, {{"q1", "hatch", 1}});
    const auto idx = InvertedIndex::build(corpus.documents());
    EXPECT_THROW(simulate_source(idx, corpus.queries()[0], corpus.judgments(), 10), SampleSkipped);
}

TEST(RuleReformulator, LeadingWhGroup) {
    RuleBasedReformulator rule;
    const auto r = reformulate("when do robin eggs hatch", rule);
    EXPECT_EQ(r.intent, "when do");
    EXPECT_EQ(r.context, "robin eggs hatch");
    EXPECT_TRUE(r.flag_reason.empty());
    const auto how = reformulate("How many eggs does a robin lay?", rule);
    EXPECT_EQ(how.intent, "how many");
    EXPECT_EQ(how.context, "eggs robin lay");
    const auto none = reformulate("robin eggs hatching", rule);
    EXPECT_EQ(none.intent, "what");
    EXPECT_FALSE(none.flag_reason.empty());
    EXPECT_THROW(reformulate("   ", rule), ValidationError);
    EXPECT_THROW(reformulate("?!", rule), ReformulationRejected);
}

TEST(ProviderReformulator, TableOneExamples) {
    ProviderReformulator llm(std::make_shared<ScriptedProvider>());
    const auto r = reformulate("when do robin eggs hatch", llm);
    EXPECT_EQ(r.context, "robin eggs");
    EXPECT_EQ(r.intent, "hatching time");
    const auto i = llm.extract_intent("Where do these rumours come from?", "who has been rumored");
    EXPECT_EQ(i.intent, "source");
    EXPECT_THROW(reformulate("unrelated question", llm), ReformulationRejected);
}

TEST(ProviderReformulator, WorksOverHttp) {
    infoneed::testing::MockServer mock;
    mock.post_json("/v1/generate", [](const Json&) { return Json{{"text", "Context: robin eggs\nIntent: hatching time"}}; });
    mock.start();
    EndpointConfig cfg;
    cfg.name = "llm";
    cfg.kind = "http";
    cfg.base_url = mock.url();
    cfg.model = "mock-8b";
    ProviderReformulator llm(make_provider(cfg));
    const auto r = reformulate("when do robin eggs hatch", llm);
    EXPECT_EQ(r.intent, "hatching time");
    EXPECT_EQ(llm.model_id(), "mock-8b");
}

TEST(Marco, SoundnessOnSyntheticCorpus) {
    const auto corpus = make_synthetic_corpus();
    const auto idx = InvertedIndex::build(corpus.documents());
    RuleBasedReformulator rule;
    const auto result = adapt_marco(corpus, idx, rule);
    ASSERT_EQ(result.samples.size() + result.skipped.size(), 100u);
    EXPECT_EQ(result.samples.size(), 100u);
    for (const auto& s : result.samples) {
        ASSERT_TRUE(s.source_doc_id);
        for (const auto& rel : corpus.relevant_docs(s.sample_id)) EXPECT_NE(*s.source_doc_id, rel);
        EXPECT_EQ(s.source, corpus.find_document(*s.source_doc_id)->text);
        EXPECT_EQ(s.question, corpus.find_query(s.sample_id)->text);
        EXPECT_TRUE(s.provenance.low_fidelity);
    }
    std::map<Split, int> counts;
    for (const auto& s : result.samples) ++counts[s.split];
    EXPECT_EQ(counts[Split::Train], 80);
    EXPECT_EQ(counts[Split::Validation], 10);
    EXPECT_EQ(counts[Split::Test], 10);
}

TEST(Marco, ByteDeterministicWithRules) {
    const auto corpus = make_synthetic_corpus();
    const auto idx = InvertedIndex::build(corpus.documents());
    RuleBasedReformulator rule;
    MarcoOptions o;
    o.parallelism = 3;
    const auto a = format_samples(adapt_marco(corpus, idx, rule).samples);
    const auto b = format_samples(adapt_marco(corpus, idx, rule, o).samples);
    EXPECT_EQ(a, b);
}

TEST(Marco, MaxQueriesSubsets) {
    const auto corpus = make_synthetic_corpus();
    const auto idx = InvertedIndex::build(corpus.documents());
    RuleBasedReformulator rule;
    MarcoOptions o;
    o.max_queries = 20;
    EXPECT_EQ(adapt_marco(corpus, idx, rule, o).samples.size(), 20u);
}

TEST(Pairs, CountsAndHygiene) {
    std::vector<Sample> samples;
    for (int i = 0; i < 12; ++i) samples.push_back(with_target("s" + std::to_string(i), "t" + std::to_string(i), Split::Train));
    samples.push_back(with_target("v0", "tv0", Split::Validation));
    PairOptions none;
    none.negatives_per_positive = 0;
    EXPECT_THROW(assemble_pairs(samples), ValidationError);  // validation has one target only
    const auto positives = assemble_pairs(samples, none);
    EXPECT_EQ(positives.size(), 13u);

    samples.pop_back();
    PairOptions ten;
    const auto pairs = assemble_pairs(samples, ten);
    EXPECT_EQ(pairs.size(), 12u * 11u);
    std::map<std::string, Split> split_of;
    for (const auto& s : samples) split_of[*s.target_doc_id] = s.split;
    for (const auto& p : pairs) {
        EXPECT_EQ(split_of.at(p.target_doc_id), p.split);
        if (p.label == PairLabel::Negative) EXPECT_NE(p.target_doc_id, "t" + p.sample_id.substr(1));
    }
    EXPECT_EQ(assemble_pairs(samples, ten), pairs);
}

TEST(Pairs, PigeonholeAndShortfall) {
    std::vector<Sample> eleven;
    for (int i = 0; i < 11; ++i) eleven.push_back(with_target("s" + std::to_string(i), "t" + std::to_string(i), Split::Train));
    const std::vector<Sample> one = {eleven[0]};
    // one sample, but the split's other samples provide 10 other targets
    auto pairs = assemble_pairs(eleven, {});
    std::set<std::string> negs;
    for (const auto& p : pairs)
        if (p.sample_id == "s0" && p.label == PairLabel::Negative) EXPECT_TRUE(negs.insert(p.target_doc_id).second);
    EXPECT_EQ(negs.size(), 10u);

    const std::vector<Sample> five(eleven.begin(), eleven.begin() + 5);
    try {
        assemble_pairs(five, {});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("short by 6"), std::string::npos);
    }
}

TEST(Inquisitive, FieldMappingAndLabels) {
    TempDir tmp;
    write_file(tmp / "inq.jsonl",
               R"({"article_id":"a1","sentence_id":"3","sentence":"Rumours spread fast in the town.","span":"Rumours spread","question":"Where do these rumours come from?","split":"dev"})"
               "\n"
               R"({"article_id":"a1","sentence_id":"3","sentence":"Rumours spread fast in the town.","span":"not present","question":"Why so fast?","split":"dev"})"
               "\n");
    const auto records = load_inquisitive(tmp / "inq.jsonl");
    ProviderReformulator llm(std::make_shared<ScriptedProvider>());
    RuleBasedReformulator rule;
    const auto with_llm = adapt_inquisitive(records, llm);
    ASSERT_EQ(with_llm.samples.size(), 2u);
    const auto& s = with_llm.samples[0];
    EXPECT_EQ(s.sample_id, "a1_3_0");
    EXPECT_EQ(s.source, "Rumours spread fast in the town.");
    EXPECT_EQ(s.context, "Rumours spread");
    EXPECT_EQ(s.intent, "source");
    EXPECT_FALSE(s.target_doc_id);
    EXPECT_EQ(s.split, Split::Validation);
    EXPECT_EQ(s.metadata["split_label"], "dev");

    const auto with_rule = adapt_inquisitive(records, rule);
    ASSERT_EQ(with_rule.samples.size(), 2u);
    EXPECT_EQ(with_rule.samples[1].intent, "why");
    bool flagged = false;
    for (const auto& a : with_rule.audit) flagged |= a.flag_reason.find("span not found") != std::string::npos;
    EXPECT_TRUE(flagged);
}

TEST(Samples, JsonRoundTrip) {
    TempDir tmp;
    auto s = with_target("s1", "d1", Split::Test);
    s.source_doc_id = "d5";
    s.provenance = {"llm", "m", false};
    s.metadata = {{"k", 1}};
    write_samples(tmp / "s.jsonl", std::vector<Sample>{s});
    EXPECT_EQ(read_samples(tmp / "s.jsonl"), std::vector<Sample>{s});
    const TrainingPair p{"s1", "in", "d1", PairLabel::Negative, Split::Test};
    write_pairs(tmp / "p.jsonl", std::vector<TrainingPair>{p});
    EXPECT_EQ(read_pairs(tmp / "p.jsonl"), std::vector<TrainingPair>{p});
}
