#include "infoneed/scorers.hpp"

#include <algorithm>
#include <cmath>

#include "infoneed/error.hpp"
#include "infoneed/io.hpp"
#include "infoneed/text.hpp"

namespace infoneed {

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension())
        throw ValidationError("cosine: dimension mismatch (" + std::to_string(a.dimension()) + " vs " +
                              std::to_string(b.dimension()) + ")");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) throw ValidationError("cosine: zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double cosine_embedding_loss(const EmbeddingVector& a, const EmbeddingVector& b, PairLabel label,
                             const LossSpec& spec) {
    if (spec.margin < 0.0 || spec.margin > 1.0) throw ValidationError("margin must be in [0, 1]");
    const double cos = cosine_similarity(a, b);
    if (label == PairLabel::Positive) return 1.0 - cos;
    return std::max(0.0, cos - spec.margin);
}

double mse_label_loss(double predicted, PairLabel label) noexcept {
    const double y = label == PairLabel::Positive ? 1.0 : 0.0;
    return (predicted - y) * (predicted - y);
}

ExportFormat parse_export_format(std::string_view name) {
    if (name == "jsonl") return ExportFormat::Jsonl;
    if (name == "tsv") return ExportFormat::Tsv;
    throw ValidationError("unknown export format '" + std::string(name) + "'");
}

namespace {

std::string tsv_clean(std::string_view s) {
    std::string out(s);
    std::replace_if(out.begin(), out.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
    return out;
}

}  // namespace

std::size_t export_training_pairs(std::span<const TrainingPair> pairs, const Corpus& corpus,
                                  ExportFormat format, const std::filesystem::path& out) {
    std::string body;
    if (format == ExportFormat::Tsv) body = "sample_id\tinput_text\ttarget_doc_id\ttarget_text\tlabel\n";
    for (const auto& p : pairs) {
        const Document* doc = corpus.find_document(p.target_doc_id);
        if (!doc) throw ValidationError("pair references unknown doc_id \"" + p.target_doc_id + "\"");
        if (format == ExportFormat::Jsonl) {
            Json row{{"sample_id", p.sample_id},
                     {"input_text", p.input_text},
                     {"target_doc_id", p.target_doc_id},
                     {"target_text", doc->text},
                     {"label", label_value(p.label)}};
            body += row.dump();
        } else {
            body += tsv_clean(p.sample_id) + '\t' + tsv_clean(p.input_text) + '\t' +
                    tsv_clean(p.target_doc_id) + '\t' + tsv_clean(doc->text) + '\t' +
                    std::to_string(label_value(p.label));
        }
        body += '\n';
    }
    write_file(out, body);
    return pairs.size();
}

std::string_view to_string(ScorerKind kind) noexcept {
    switch (kind) {
        case ScorerKind::Lexical: return "lexical";
        case ScorerKind::Embedding: return "embedding";
        case ScorerKind::Cross: return "cross";
    }
    return "lexical";
}

ScorerKind parse_scorer_kind(std::string_view name) {
    if (name == "lexical" || name == "bm25") return ScorerKind::Lexical;
    if (name == "embedding" || name == "bi-encoder" || name == "bi_encoder") return ScorerKind::Embedding;
    if (name == "cross" || name == "cross-encoder" || name == "cross_encoder") return ScorerKind::Cross;
    throw ValidationError("unknown scorer kind '" + std::string(name) + "'");
}

Scorer::Scorer(ScorerKind kind, std::shared_ptr<Provider> provider,
               std::shared_ptr<const InvertedIndex> index)
    : kind_(kind), provider_(std::move(provider)), index_(std::move(index)) {
    if (kind_ == ScorerKind::Lexical && !index_) throw ValidationError("lexical scorer needs an index");
    if (kind_ != ScorerKind::Lexical && !provider_)
        throw ValidationError(std::string(to_string(kind_)) + " scorer needs a provider");
}

namespace {

bool is_zero(const EmbeddingVector& v) {
    return std::all_of(v.values.begin(), v.values.end(), [](double x) { return x == 0.0; });
}

ScoreDetail embedding_score(const EmbeddingVector& q, const EmbeddingVector& d) {
    if (is_zero(q) || is_zero(d)) return {0.0, 0.0};
    const double cos = cosine_similarity(q, d);
    return {(cos + 1.0) / 2.0, cos};
}

}  // namespace

const EmbeddingVector& Scorer::doc_embedding(const Document& doc) const {
    {
        std::lock_guard lock(cache_mutex_);
        const auto it = cache_.find(doc.doc_id);
        if (it != cache_.end()) return it->second;
    }
    auto v = provider_->embed({doc.text});
    std::lock_guard lock(cache_mutex_);
    return cache_.emplace(doc.doc_id, std::move(v.front())).first->second;
}

void Scorer::warm(std::span<const Document* const> docs) const {
    if (kind_ != ScorerKind::Embedding) return;
    constexpr std::size_t kBatch = 64;
    std::vector<const Document*> missing;
    {
        std::lock_guard lock(cache_mutex_);
        for (const auto* d : docs)
            if (!cache_.contains(d->doc_id)) missing.push_back(d);
    }
    for (std::size_t i = 0; i < missing.size(); i += kBatch) {
        std::vector<std::string> texts;
        const std::size_t end = std::min(missing.size(), i + kBatch);
        for (std::size_t k = i; k < end; ++k) texts.push_back(missing[k]->text);
        auto vectors = provider_->embed(texts);
        if (vectors.size() != texts.size()) throw ProviderError("embed returned wrong batch size", false);
        std::lock_guard lock(cache_mutex_);
        for (std::size_t k = i; k < end; ++k) {
            if (!cache_.empty() && cache_.begin()->second.dimension() != vectors[k - i].dimension())
                throw ValidationError("embedding dimension mismatch across batches");
            cache_.emplace(missing[k]->doc_id, std::move(vectors[k - i]));
        }
    }
}

ScoreDetail Scorer::score(const std::string& input_text, const Document& doc) const {
    switch (kind_) {
        case ScorerKind::Lexical: {
            const double s = index_->bm25_score(tokenize(input_text), doc.doc_id);
            return {s, s};
        }
        case ScorerKind::Embedding: {
            const auto q = provider_->embed({input_text});
            return embedding_score(q.front(), doc_embedding(doc));
        }
        case ScorerKind::Cross: {
            const double s = std::clamp(provider_->score_pair(input_text, doc.text), 0.0, 1.0);
            return {s, s};
        }
    }
    return {};
}

std::vector<ScoreDetail> Scorer::score_all(const std::string& input_text,
                                           std::span<const Document* const> docs) const {
    std::vector<ScoreDetail> out;
    out.reserve(docs.size());
    switch (kind_) {
        case ScorerKind::Lexical: {
            const auto tokens = tokenize(input_text);
            for (const auto* d : docs) {
                const double s = index_->bm25_score(tokens, d->doc_id);
                out.push_back({s, s});
            }
            break;
        }
        case ScorerKind::Embedding: {
            warm(docs);
            const auto q = provider_->embed({input_text});
            for (const auto* d : docs) out.push_back(embedding_score(q.front(), doc_embedding(*d)));
            break;
        }
        case ScorerKind::Cross:
            for (const auto* d : docs) out.push_back(score(input_text, *d));
            break;
    }
    return out;
}

}  // namespace infoneed
