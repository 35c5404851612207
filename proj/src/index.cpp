#include "infoneed/index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>

#include "infoneed/error.hpp"
#include "infoneed/io.hpp"

namespace infoneed {
namespace {

constexpr char kMagic[8] = {'I', 'N', 'I', 'D', 'X', '\0', '\r', '\n'};

class Writer {
  public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void f64(double v) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, &v, sizeof bits);
        u64(bits);
    }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out_.append(s);
    }
    void raw(const char* p, std::size_t n) { out_.append(p, n); }
    std::string take() { return std::move(out_); }

  private:
    std::string out_;
};

class Reader {
  public:
    explicit Reader(std::string_view in) : in_(in) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() {
        const auto bits = u64();
        double v = 0;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    std::string str() {
        const auto n = u32();
        need(n);
        std::string s(in_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::string_view raw(std::size_t n) {
        need(n);
        auto s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == in_.size(); }

  private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw ValidationError("index file truncated");
    }
    std::string_view in_;
    std::size_t pos_ = 0;
};

}  // namespace

InvertedIndex InvertedIndex::build(std::span<const Document> docs, Bm25Params params) {
    if (docs.empty()) throw ValidationError("cannot build an index over an empty corpus");
    if (params.k1 < 0 || params.b < 0 || params.b > 1)
        throw ValidationError("BM25 parameters out of range (need k1 >= 0, 0 <= b <= 1)");

    InvertedIndex idx;
    idx.params_ = params;
    std::map<std::string, std::vector<Posting>> postings;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (!idx.doc_pos_.emplace(docs[i].doc_id, static_cast<std::uint32_t>(i)).second)
            throw ValidationError("duplicate doc_id \"" + docs[i].doc_id + "\"");
        idx.doc_ids_.push_back(docs[i].doc_id);
        const auto tokens = tokenize(docs[i].text);
        idx.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
        std::map<std::string_view, std::uint32_t> tf;
        for (const auto& t : tokens) ++tf[t];
        for (const auto& [term, count] : tf)
            postings[std::string(term)].push_back({static_cast<std::uint32_t>(i), count});
    }
    for (auto& [term, list] : postings) {
        idx.terms_.push_back(term);
        idx.postings_.push_back(std::move(list));
    }
    idx.finalize();
    return idx;
}

void InvertedIndex::finalize() {
    term_ids_.clear();
    for (std::size_t i = 0; i < terms_.size(); ++i) term_ids_.emplace(terms_[i], static_cast<std::uint32_t>(i));
    doc_pos_.clear();
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) doc_pos_.emplace(doc_ids_[i], static_cast<std::uint32_t>(i));

    std::vector<std::uint32_t> by_id(doc_ids_.size());
    std::iota(by_id.begin(), by_id.end(), 0U);
    std::sort(by_id.begin(), by_id.end(),
              [&](std::uint32_t a, std::uint32_t b) { return doc_ids_[a] < doc_ids_[b]; });
    doc_order_.assign(doc_ids_.size(), 0);
    for (std::size_t r = 0; r < by_id.size(); ++r) doc_order_[by_id[r]] = static_cast<std::uint32_t>(r);

    const double total = std::accumulate(doc_lengths_.begin(), doc_lengths_.end(), 0.0);
    avg_doc_length_ = doc_ids_.empty() ? 0.0 : total / static_cast<double>(doc_ids_.size());
}

double InvertedIndex::term_weight(std::size_t df, std::uint32_t tf, std::uint32_t len) const {
    const double n = static_cast<double>(doc_ids_.size());
    const double idf = std::log(1.0 + (n - static_cast<double>(df) + 0.5) / (static_cast<double>(df) + 0.5));
    // Every document has zero length only if the whole corpus is token-free.
    const double norm = avg_doc_length_ > 0 ? static_cast<double>(len) / avg_doc_length_ : 0.0;
    const double t = static_cast<double>(tf);
    return idf * t * (params_.k1 + 1.0) / (t + params_.k1 * (1.0 - params_.b + params_.b * norm));
}

double InvertedIndex::idf(std::string_view term) const {
    const double n = static_cast<double>(doc_ids_.size());
    const double df = static_cast<double>(document_frequency(term));
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double InvertedIndex::bm25_score(const TokenStream& query, std::string_view doc_id) const {
    const auto pos = doc_pos_.find(std::string(doc_id));
    if (pos == doc_pos_.end()) throw ValidationError("unknown doc_id \"" + std::string(doc_id) + "\"");
    const std::uint32_t doc = pos->second;
    double score = 0.0;
    for (const auto& term : query) {
        const auto list = postings(term);
        const auto it = std::lower_bound(list.begin(), list.end(), doc,
                                         [](const Posting& p, std::uint32_t d) { return p.doc < d; });
        if (it == list.end() || it->doc != doc) continue;
        score += term_weight(list.size(), it->tf, doc_lengths_[doc]);
    }
    return score;
}

RankedList InvertedIndex::search(std::string_view query_text, std::size_t k,
                                 const std::unordered_set<std::string>& exclude) const {
    return search_tokens(tokenize(query_text), k, exclude);
}

RankedList InvertedIndex::search_tokens(const TokenStream& query, std::size_t k,
                                        const std::unordered_set<std::string>& exclude) const {
    RankedList result;
    if (k == 0) throw ValidationError("search depth k must be >= 1");

    // Term-at-a-time accumulation in query-token order, the same summation
    // order bm25_score uses, so both paths produce identical doubles.
    std::vector<double> acc(doc_ids_.size(), 0.0);
    std::vector<char> hit(doc_ids_.size(), 0);
    std::vector<std::uint32_t> touched;
    for (const auto& term : query) {
        const auto list = postings(term);
        for (const auto& p : list) {
            if (!hit[p.doc]) {
                hit[p.doc] = 1;
                touched.push_back(p.doc);
            }
            acc[p.doc] += term_weight(list.size(), p.tf, doc_lengths_[p.doc]);
        }
    }
    if (!exclude.empty()) {
        std::erase_if(touched, [&](std::uint32_t d) { return exclude.contains(doc_ids_[d]); });
    }
    const auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (acc[a] != acc[b]) return acc[a] > acc[b];
        return doc_order_[a] < doc_order_[b];
    };
    const std::size_t take = std::min(k, touched.size());
    std::partial_sort(touched.begin(), touched.begin() + static_cast<std::ptrdiff_t>(take), touched.end(), better);
    result.entries.reserve(take);
    for (std::size_t i = 0; i < take; ++i) result.entries.push_back({doc_ids_[touched[i]], acc[touched[i]]});
    return result;
}

bool InvertedIndex::contains_doc(std::string_view doc_id) const {
    return doc_pos_.contains(std::string(doc_id));
}

std::uint32_t InvertedIndex::doc_length(std::string_view doc_id) const {
    const auto it = doc_pos_.find(std::string(doc_id));
    if (it == doc_pos_.end()) throw ValidationError("unknown doc_id \"" + std::string(doc_id) + "\"");
    return doc_lengths_[it->second];
}

std::size_t InvertedIndex::document_frequency(std::string_view term) const {
    return postings(term).size();
}

std::span<const Posting> InvertedIndex::postings(std::string_view term) const {
    const auto it = term_ids_.find(std::string(term));
    if (it == term_ids_.end()) return {};
    return postings_[it->second];
}

std::string InvertedIndex::serialize() const {
    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.u32(kFormatVersion);
    w.f64(params_.k1);
    w.f64(params_.b);
    w.u64(doc_ids_.size());
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
        w.str(doc_ids_[i]);
        w.u32(doc_lengths_[i]);
    }
    w.u64(terms_.size());
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        w.str(terms_[t]);
        w.u32(static_cast<std::uint32_t>(postings_[t].size()));
        for (const auto& p : postings_[t]) {
            w.u32(p.doc);
            w.u32(p.tf);
        }
    }
    return w.take();
}

InvertedIndex InvertedIndex::deserialize(std::string_view bytes) {
    Reader r(bytes);
    if (r.raw(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic))
        throw ValidationError("not an index file (bad magic)");
    const auto version = r.u32();
    if (version != kFormatVersion)
        throw ValidationError("unsupported index version " + std::to_string(version));
    InvertedIndex idx;
    idx.params_.k1 = r.f64();
    idx.params_.b = r.f64();
    const auto n_docs = r.u64();
    for (std::uint64_t i = 0; i < n_docs; ++i) {
        idx.doc_ids_.push_back(r.str());
        idx.doc_lengths_.push_back(r.u32());
    }
    const auto n_terms = r.u64();
    for (std::uint64_t t = 0; t < n_terms; ++t) {
        idx.terms_.push_back(r.str());
        const auto n = r.u32();
        std::vector<Posting> list(n);
        for (auto& p : list) {
            p.doc = r.u32();
            p.tf = r.u32();
            if (p.doc >= n_docs) throw ValidationError("index posting references unknown document");
        }
        idx.postings_.push_back(std::move(list));
    }
    if (!r.done()) throw ValidationError("trailing bytes after index payload");
    idx.finalize();
    return idx;
}

void InvertedIndex::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
    return deserialize(read_file(path));
}

}  // namespace infoneed
