#include "infoneed/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "infoneed/error.hpp"
#include "infoneed/io.hpp"
#include "infoneed/rng.hpp"
#include "infoneed/text.hpp"

namespace infoneed {

std::string_view to_string(Split split) noexcept {
    switch (split) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "train";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::Train;
    if (name == "validation" || name == "dev" || name == "val") return Split::Validation;
    if (name == "test") return Split::Test;
    throw ValidationError("unknown split '" + std::string(name) + "'");
}

namespace {

std::string list_offenders(const std::vector<std::string>& ids) {
    constexpr std::size_t kShown = 20;
    std::string out;
    for (std::size_t i = 0; i < ids.size() && i < kShown; ++i) {
        if (i) out += ", ";
        out += '"' + ids[i] + '"';
    }
    if (ids.size() > kShown) out += ", ... (" + std::to_string(ids.size()) + " total)";
    return out;
}

}  // namespace

Corpus Corpus::create(std::vector<Document> documents, std::vector<Query> queries,
                      std::vector<Judgment> judgments) {
    Corpus c;
    c.documents_ = std::move(documents);
    c.queries_ = std::move(queries);
    c.judgments_ = std::move(judgments);

    for (std::size_t i = 0; i < c.documents_.size(); ++i) {
        const auto& d = c.documents_[i];
        if (d.doc_id.empty()) throw ValidationError("document with empty doc_id");
        if (trim(d.text).empty()) throw ValidationError("document \"" + d.doc_id + "\" has empty text");
        if (!c.doc_pos_.emplace(d.doc_id, i).second)
            throw ValidationError("duplicate doc_id \"" + d.doc_id + "\"");
    }
    for (std::size_t i = 0; i < c.queries_.size(); ++i) {
        const auto& q = c.queries_[i];
        if (q.query_id.empty()) throw ValidationError("query with empty query_id");
        if (trim(q.text).empty()) throw ValidationError("query \"" + q.query_id + "\" has empty text");
        if (!c.query_pos_.emplace(q.query_id, i).second)
            throw ValidationError("duplicate query_id \"" + q.query_id + "\"");
    }

    std::set<std::pair<std::string, std::string>> seen;
    std::set<std::string> missing_docs;
    std::set<std::string> missing_queries;
    for (std::size_t i = 0; i < c.judgments_.size(); ++i) {
        const auto& j = c.judgments_[i];
        if (!seen.emplace(j.query_id, j.doc_id).second)
            throw ValidationError("duplicate judgment (" + j.query_id + ", " + j.doc_id + ")");
        if (!c.doc_pos_.contains(j.doc_id)) missing_docs.insert(j.doc_id);
        if (!c.query_pos_.contains(j.query_id)) missing_queries.insert(j.query_id);
        c.judgments_by_query_[j.query_id].push_back(i);
    }
    if (!missing_docs.empty() || !missing_queries.empty()) {
        std::string msg = "judgments reference unknown ids;";
        if (!missing_docs.empty())
            msg += " doc_ids: " + list_offenders({missing_docs.begin(), missing_docs.end()}) + ";";
        if (!missing_queries.empty())
            msg += " query_ids: " + list_offenders({missing_queries.begin(), missing_queries.end()}) + ";";
        throw ValidationError(msg);
    }
    return c;
}

const Document* Corpus::find_document(std::string_view doc_id) const {
    const auto it = doc_pos_.find(std::string(doc_id));
    return it == doc_pos_.end() ? nullptr : &documents_[it->second];
}

const Query* Corpus::find_query(std::string_view query_id) const {
    const auto it = query_pos_.find(std::string(query_id));
    return it == query_pos_.end() ? nullptr : &queries_[it->second];
}

std::vector<std::string> Corpus::relevant_docs(std::string_view query_id) const {
    std::vector<std::string> out;
    for (const auto& j : judgments_for(query_id))
        if (j.grade >= 1) out.push_back(j.doc_id);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Judgment> Corpus::judgments_for(std::string_view query_id) const {
    std::vector<Judgment> out;
    const auto it = judgments_by_query_.find(std::string(query_id));
    if (it == judgments_by_query_.end()) return out;
    for (const auto i : it->second) out.push_back(judgments_[i]);
    return out;
}

std::vector<Document> load_passages(const std::filesystem::path& path) {
    std::vector<Document> docs;
    for_each_line(path, [&](std::string_view line, std::size_t number) {
        if (line.empty()) return;
        const auto fields = split(line, '\t');
        if (fields.size() < 2 || fields.size() > 3)
            throw ParseError(path.string(), number,
                             "expected doc_id<TAB>text[<TAB>title], got " +
                                 std::to_string(fields.size()) + " field(s)");
        Document d{std::string(fields[0]), std::string(fields[1]), std::nullopt};
        if (fields.size() == 3) d.title = std::string(fields[2]);
        if (d.doc_id.empty()) throw ParseError(path.string(), number, "empty doc_id");
        if (trim(d.text).empty()) throw ParseError(path.string(), number, "empty passage text");
        docs.push_back(std::move(d));
    });
    return docs;
}

std::vector<Query> load_queries(const std::filesystem::path& path) {
    std::vector<Query> queries;
    for_each_line(path, [&](std::string_view line, std::size_t number) {
        if (line.empty()) return;
        const auto fields = split(line, '\t');
        if (fields.size() != 2)
            throw ParseError(path.string(), number,
                             "expected query_id<TAB>text, got " + std::to_string(fields.size()) +
                                 " field(s)");
        if (fields[0].empty()) throw ParseError(path.string(), number, "empty query_id");
        if (trim(fields[1]).empty()) throw ParseError(path.string(), number, "empty query text");
        queries.push_back({std::string(fields[0]), std::string(fields[1])});
    });
    return queries;
}

std::vector<Judgment> load_judgments(const std::filesystem::path& path) {
    std::vector<Judgment> judgments;
    for_each_line(path, [&](std::string_view line, std::size_t number) {
        const auto fields = split_whitespace(line);
        if (fields.empty()) return;
        if (fields.size() != 4)
            throw ParseError(path.string(), number,
                             "expected 'query_id 0 doc_id grade', got " +
                                 std::to_string(fields.size()) + " field(s)");
        int grade = 0;
        const auto g = fields[3];
        const auto [ptr, ec] = std::from_chars(g.data(), g.data() + g.size(), grade);
        if (ec != std::errc{} || ptr != g.data() + g.size())
            throw ParseError(path.string(), number, "grade is not an integer: " + std::string(g));
        judgments.push_back({std::string(fields[0]), std::string(fields[2]), grade});
    });
    return judgments;
}

Corpus load_collection(const std::filesystem::path& passages_path,
                       const std::filesystem::path& queries_path,
                       const std::filesystem::path& judgments_path) {
    return Corpus::create(load_passages(passages_path), load_queries(queries_path),
                          load_judgments(judgments_path));
}

namespace {

void check_field(std::string_view value, std::string_view what, std::string_view id) {
    if (value.find_first_of("\t\n\r") != std::string_view::npos)
        throw ValidationError(std::string(what) + " of \"" + std::string(id) +
                              "\" contains a tab or newline and cannot be written as TSV");
}

}  // namespace

std::string format_passages(std::span<const Document> docs) {
    std::string out;
    for (const auto& d : docs) {
        check_field(d.doc_id, "doc_id", d.doc_id);
        check_field(d.text, "text", d.doc_id);
        out += d.doc_id + '\t' + d.text;
        if (d.title) {
            check_field(*d.title, "title", d.doc_id);
            out += '\t' + *d.title;
        }
        out += '\n';
    }
    return out;
}

std::string format_queries(std::span<const Query> queries) {
    std::string out;
    for (const auto& q : queries) {
        check_field(q.query_id, "query_id", q.query_id);
        check_field(q.text, "text", q.query_id);
        out += q.query_id + '\t' + q.text + '\n';
    }
    return out;
}

std::string format_judgments(std::span<const Judgment> judgments) {
    std::string out;
    for (const auto& j : judgments)
        out += j.query_id + " 0 " + j.doc_id + ' ' + std::to_string(j.grade) + '\n';
    return out;
}

void save_collection(const Corpus& corpus, const std::filesystem::path& passages_path,
                     const std::filesystem::path& queries_path,
                     const std::filesystem::path& judgments_path) {
    write_file(passages_path, format_passages(corpus.documents()));
    write_file(queries_path, format_queries(corpus.queries()));
    write_file(judgments_path, format_judgments(corpus.judgments()));
}

std::vector<SplitAssignment> assign_splits(std::span<const std::string> query_ids,
                                           const SplitRatios& ratios, std::uint64_t seed) {
    if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0)
        throw ValidationError("split ratios must be nonnegative");
    if (std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9)
        throw ValidationError("split ratios must sum to 1");

    std::vector<std::string> ids(query_ids.begin(), query_ids.end());
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw ValidationError("duplicate query id in split assignment");

    const auto n = static_cast<double>(ids.size());
    const auto n_val = static_cast<std::size_t>(std::floor(ratios.validation * n + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(ratios.test * n + 1e-9));

    std::vector<std::string> order = ids;
    DeterministicRng rng(seed);
    rng.shuffle(order);

    std::unordered_map<std::string, Split> chosen;
    for (std::size_t i = 0; i < order.size(); ++i) {
        Split s = Split::Train;
        if (i < n_val) s = Split::Validation;
        else if (i < n_val + n_test) s = Split::Test;
        chosen.emplace(order[i], s);
    }
    std::vector<SplitAssignment> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back({id, chosen.at(id)});
    return out;
}

void write_splits(const std::filesystem::path& path, std::span<const SplitAssignment> splits) {
    std::vector<Json> rows;
    rows.reserve(splits.size());
    for (const auto& s : splits) rows.push_back({{"query_id", s.query_id}, {"split", to_string(s.split)}});
    write_file(path, to_jsonl(rows));
}

std::vector<SplitAssignment> read_splits(const std::filesystem::path& path) {
    std::vector<SplitAssignment> out;
    for (const auto& row : read_jsonl(path)) {
        out.push_back({row.at("query_id").get<std::string>(),
                       parse_split(row.at("split").get<std::string>())});
    }
    return out;
}

std::vector<std::string> sample_ids(std::vector<std::string> ids, std::size_t max_count,
                                    std::uint64_t seed) {
    std::sort(ids.begin(), ids.end());
    if (ids.size() > max_count) {
        DeterministicRng rng(seed);
        const auto picks = rng.sample_without_replacement(ids.size(), max_count);
        std::vector<std::string> chosen;
        chosen.reserve(picks.size());
        for (const auto i : picks) chosen.push_back(ids[i]);
        ids = std::move(chosen);
        std::sort(ids.begin(), ids.end());
    }
    return ids;
}

}  // namespace infoneed
