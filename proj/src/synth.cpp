#include "infoneed/synth.hpp"

#include <set>
#include <string>
#include <vector>

#include "infoneed/error.hpp"
#include "infoneed/rng.hpp"
#include "infoneed/text.hpp"

namespace infoneed {
namespace {

std::vector<std::string> make_vocabulary(std::size_t count, DeterministicRng& rng) {
    static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "sk", "pl"};
    static const char* vowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
    static const char* codas[] = {"", "n", "r", "s", "l", "k"};
    std::vector<std::string> syllables;
    for (const auto* o : onsets)
        for (const auto* v : vowels)
            for (const auto* c : codas) syllables.push_back(std::string(o) + v + c);

    std::set<std::string> seen;
    std::vector<std::string> words;
    while (words.size() < count) {
        const std::size_t n = 2 + rng.uniform_index(2);
        std::string w;
        for (std::size_t i = 0; i < n; ++i) w += syllables[rng.uniform_index(syllables.size())];
        if (is_wh_word(w) || !seen.insert(w).second) continue;
        words.push_back(w);
    }
    return words;
}

std::string filler_sentence(const std::vector<std::string>& filler, DeterministicRng& rng) {
    const std::size_t n = 6 + rng.uniform_index(6);
    std::vector<std::string> words;
    for (std::size_t i = 0; i < n; ++i) words.push_back(filler[rng.uniform_index(filler.size())]);
    return join(words, " ") + ".";
}

}  // namespace

Corpus make_synthetic_corpus(const SynthOptions& options) {
    const std::size_t topical = options.queries * (1 + options.distractors_per_query);
    if (options.queries == 0) throw ValidationError("synthetic corpus needs at least one query");
    if (topical > options.passages)
        throw ValidationError("synthetic corpus: " + std::to_string(options.passages) +
                              " passages cannot hold the targets and distractors of " +
                              std::to_string(options.queries) + " queries");

    DeterministicRng rng(options.seed);
    constexpr std::size_t kFiller = 400;
    constexpr std::size_t kTopicWords = 3;
    const auto vocab = make_vocabulary(kFiller + kTopicWords * options.queries, rng);
    const std::vector<std::string> filler(vocab.begin(), vocab.begin() + kFiller);

    static const char* wh[] = {"when do", "why do", "how do", "what makes", "where do", "how many", "who uses", "how long do"};

    std::vector<Document> docs;
    std::vector<Query> queries;
    std::vector<Judgment> judgments;
    std::size_t next_doc = 0;
    const auto doc_id = [&] { return "p" + std::to_string(next_doc++); };

    for (std::size_t q = 0; q < options.queries; ++q) {
        const auto topic = std::vector<std::string>(vocab.begin() + static_cast<std::ptrdiff_t>(kFiller + q * kTopicWords),
                                                    vocab.begin() + static_cast<std::ptrdiff_t>(kFiller + (q + 1) * kTopicWords));
        const std::string question = std::string(wh[rng.uniform_index(std::size(wh))]) + " " + join(topic, " ");
        const std::string qid = "q" + std::to_string(q);
        queries.push_back({qid, question});

        // Target: filler with the question's text as one of its sentences.
        std::vector<std::string> sentences;
        const std::size_t n = 2 + rng.uniform_index(3);
        const std::size_t key_at = rng.uniform_index(n + 1);
        for (std::size_t i = 0; i <= n; ++i)
            sentences.push_back(i == key_at ? question + "." : filler_sentence(filler, rng));
        const std::string target_id = doc_id();
        docs.push_back({target_id, join(sentences, " "), std::nullopt});
        judgments.push_back({qid, target_id, 1});

        for (std::size_t d = 0; d < options.distractors_per_query; ++d) {
            // Two topic words at most, so the passage is on topic but never answers.
            std::vector<std::string> words = {topic[d % kTopicWords]};
            if (rng.uniform_index(2) == 0) words.push_back(topic[(d + 1) % kTopicWords]);
            std::vector<std::string> parts;
            const std::size_t m = 2 + rng.uniform_index(3);
            for (std::size_t i = 0; i < m; ++i) parts.push_back(filler_sentence(filler, rng));
            parts.push_back("the " + join(words, " and the ") + " are discussed here.");
            const std::string id = doc_id();
            docs.push_back({id, join(parts, " "), std::nullopt});
            if (d == 0) judgments.push_back({qid, id, 0});
        }
    }
    while (docs.size() < options.passages) {
        std::vector<std::string> parts;
        const std::size_t m = 2 + rng.uniform_index(4);
        for (std::size_t i = 0; i < m; ++i) parts.push_back(filler_sentence(filler, rng));
        docs.push_back({doc_id(), join(parts, " "), std::nullopt});
    }
    return Corpus::create(std::move(docs), std::move(queries), std::move(judgments));
}

void write_synthetic_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    save_collection(corpus, dir / "passages.tsv", dir / "queries.tsv", dir / "qrels.txt");
}

}  // namespace infoneed
