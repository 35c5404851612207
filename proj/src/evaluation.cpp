#include "infoneed/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "infoneed/error.hpp"

namespace infoneed {
namespace {

using NGramCounts = std::map<std::vector<std::string>, std::size_t>;

NGramCounts count_ngrams(const TokenStream& tokens, int n) {
    NGramCounts counts;
    const auto un = static_cast<std::size_t>(n);
    if (tokens.size() < un) return counts;
    for (std::size_t i = 0; i + un <= tokens.size(); ++i)
        ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                          tokens.begin() + static_cast<std::ptrdiff_t>(i + un))];
    return counts;
}

struct Overlap {
    std::size_t matched = 0;
    std::size_t hyp_total = 0;
    std::size_t ref_total = 0;
};

Overlap overlap(const TokenStream& hyp, const TokenStream& ref, int n) {
    const auto h = count_ngrams(hyp, n);
    const auto r = count_ngrams(ref, n);
    Overlap o;
    for (const auto& [gram, c] : h) {
        o.hyp_total += c;
        const auto it = r.find(gram);
        if (it != r.end()) o.matched += std::min(c, it->second);
    }
    for (const auto& [gram, c] : r) o.ref_total += c;
    return o;
}

double f1(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

void check_order(int n) {
    if (n < 1 || n > 4) throw ValidationError("BLEU order must be in 1..4");
}

double combine_bleu(const std::vector<Overlap>& per_order, std::size_t hyp_len, std::size_t ref_len,
                    BleuSmoothing smoothing) {
    if (hyp_len == 0) return 0.0;
    double log_sum = 0.0;
    for (const auto& o : per_order) {
        double p = 0.0;
        if (smoothing == BleuSmoothing::AddEpsilon) {
            p = (static_cast<double>(o.matched) + kBleuEpsilon) / (static_cast<double>(o.hyp_total) + kBleuEpsilon);
        } else {
            if (o.matched == 0) return 0.0;
            p = static_cast<double>(o.matched) / static_cast<double>(o.hyp_total);
        }
        log_sum += std::log(p);
    }
    const double bp =
        std::min(1.0, std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len)));
    return bp * std::exp(log_sum / static_cast<double>(per_order.size()));
}

}  // namespace

double bleu_n(const TokenStream& hypothesis, const TokenStream& reference, int n, BleuSmoothing smoothing) {
    check_order(n);
    if (hypothesis.empty()) return 0.0;
    std::vector<Overlap> orders;
    for (int i = 1; i <= n; ++i) orders.push_back(overlap(hypothesis, reference, i));
    return combine_bleu(orders, hypothesis.size(), reference.size(), smoothing);
}

double corpus_bleu(std::span<const std::pair<TokenStream, TokenStream>> pairs, int n, BleuSmoothing smoothing) {
    check_order(n);
    std::vector<Overlap> orders(static_cast<std::size_t>(n));
    std::size_t hyp_len = 0;
    std::size_t ref_len = 0;
    for (const auto& [hyp, ref] : pairs) {
        hyp_len += hyp.size();
        ref_len += ref.size();
        for (int i = 1; i <= n; ++i) {
            const auto o = overlap(hyp, ref, i);
            orders[static_cast<std::size_t>(i - 1)].matched += o.matched;
            orders[static_cast<std::size_t>(i - 1)].hyp_total += o.hyp_total;
        }
    }
    return combine_bleu(orders, hyp_len, ref_len, smoothing);
}

double rouge_n(const TokenStream& hypothesis, const TokenStream& reference, int n, RougeMode mode) {
    if (n < 1) throw ValidationError("ROUGE order must be >= 1");
    const auto o = overlap(hypothesis, reference, n);
    if (o.ref_total == 0) return 0.0;
    const double r = static_cast<double>(o.matched) / static_cast<double>(o.ref_total);
    if (mode == RougeMode::Recall) return r;
    if (o.hyp_total == 0) return 0.0;
    const double p = static_cast<double>(o.matched) / static_cast<double>(o.hyp_total);
    return f1(p, r);
}

std::size_t lcs_length(const TokenStream& a, const TokenStream& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(const TokenStream& hypothesis, const TokenStream& reference, RougeMode mode) {
    if (reference.empty()) return 0.0;
    const double l = static_cast<double>(lcs_length(hypothesis, reference));
    const double r = l / static_cast<double>(reference.size());
    if (mode == RougeMode::Recall) return r;
    if (hypothesis.empty()) return 0.0;
    return f1(l / static_cast<double>(hypothesis.size()), r);
}

std::size_t rank_of(const RankedList& ranked, std::string_view target) {
    for (std::size_t i = 0; i < ranked.entries.size(); ++i)
        if (ranked.entries[i].doc_id == target) return i + 1;
    return 0;
}

std::size_t rank_of(const RankedList& ranked, const std::set<std::string>& targets) {
    for (std::size_t i = 0; i < ranked.entries.size(); ++i)
        if (targets.contains(ranked.entries[i].doc_id)) return i + 1;
    return 0;
}

namespace {

void check_cutoff(std::size_t k) {
    if (k == 0) throw ValidationError("cutoff must be >= 1");
}

double recall_from_rank(std::size_t rank, std::size_t k) { return rank != 0 && rank <= k ? 1.0 : 0.0; }
double rr_from_rank(std::size_t rank, std::size_t k) {
    return rank != 0 && rank <= k ? 1.0 / static_cast<double>(rank) : 0.0;
}

}  // namespace

double recall_at_k(const RankedList& ranked, std::string_view target, std::size_t k) {
    check_cutoff(k);
    return recall_from_rank(rank_of(ranked, target), k);
}

double mrr(const RankedList& ranked, std::string_view target, std::size_t cutoff) {
    check_cutoff(cutoff);
    return rr_from_rank(rank_of(ranked, target), cutoff);
}

double recall_at_k(const RankedList& ranked, const std::set<std::string>& targets, std::size_t k) {
    check_cutoff(k);
    return recall_from_rank(rank_of(ranked, targets), k);
}

double mrr(const RankedList& ranked, const std::set<std::string>& targets, std::size_t cutoff) {
    check_cutoff(cutoff);
    return rr_from_rank(rank_of(ranked, targets), cutoff);
}

std::string_view to_string(Task task) noexcept { return task == Task::Generation ? "generation" : "retrieval"; }

Task parse_task(std::string_view name) {
    if (name == "generation" || name == "gen") return Task::Generation;
    if (name == "retrieval" || name == "ret") return Task::Retrieval;
    throw ValidationError("unknown task '" + std::string(name) + "'");
}

std::vector<std::string> significance_metrics(Task task, std::size_t cutoff) {
    if (task == Task::Generation) return {"rouge1", "rouge2", "rougeL"};
    return {"mrr@" + std::to_string(cutoff)};
}

std::vector<std::string> table_columns(Task task, std::size_t cutoff) {
    if (task == Task::Generation) return {"bleu1", "bleu2", "bleu3", "bleu4", "rouge1", "rouge2", "rougeL"};
    return {"recall@" + std::to_string(cutoff), "mrr@" + std::to_string(cutoff)};
}

namespace {

void fill_aggregate(MetricReport& r) {
    std::map<std::string, double> sums;
    for (const auto& [id, metrics] : r.per_sample)
        for (const auto& [name, value] : metrics) sums[name] += value;
    const double n = static_cast<double>(r.per_sample.size());
    for (const auto& [name, sum] : sums) r.aggregate[name] = n > 0 ? sum / n : 0.0;
}

void add_baselines(MetricReport& r, std::span<const MetricReport* const> baselines) {
    for (const auto* base : baselines) {
        auto rows = compare_reports(r, *base);
        r.significance.insert(r.significance.end(), rows.begin(), rows.end());
    }
}

std::string describe_difference(const std::set<std::string>& a, const std::set<std::string>& b,
                                std::string_view a_name, std::string_view b_name) {
    std::vector<std::string> only_a;
    std::vector<std::string> only_b;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(only_a));
    std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::back_inserter(only_b));
    const auto list = [](const std::vector<std::string>& ids) {
        std::string s;
        for (std::size_t i = 0; i < ids.size() && i < 10; ++i) s += (i ? ", " : "") + ids[i];
        if (ids.size() > 10) s += ", ... (" + std::to_string(ids.size()) + " total)";
        return s;
    };
    std::string msg;
    if (!only_a.empty()) msg += " only in " + std::string(a_name) + ": [" + list(only_a) + "]";
    if (!only_b.empty()) msg += " only in " + std::string(b_name) + ": [" + list(only_b) + "]";
    return msg;
}

}  // namespace

MetricReport build_generation_report(std::string run_tag, std::span<const GenerationEvalRecord> records,
                                     const GenerationEvalOptions& options,
                                     std::span<const MetricReport* const> baselines) {
    MetricReport r;
    r.run_tag = std::move(run_tag);
    r.task = Task::Generation;
    r.settings = {{"bleu", options.bleu_mode == BleuMode::Sentence ? "sentence" : "sentence+corpus"},
                  {"bleu_smoothing", options.smoothing == BleuSmoothing::None ? "none" : "add-epsilon"},
                  {"rouge", options.rouge_mode == RougeMode::F1 ? "f1" : "recall"},
                  {"tokenizer", "lowercase, split on non-alphanumeric"},
                  {"significance_unit", "per-sample sentence scores"}};
    std::vector<std::pair<TokenStream, TokenStream>> corpus;
    for (const auto& rec : records) {
        if (trim(rec.reference).empty())
            throw ValidationError("sample \"" + rec.sample_id + "\" has an empty reference");
        const auto hyp = tokenize(rec.hypothesis);
        const auto ref = tokenize(rec.reference);
        auto& m = r.per_sample[rec.sample_id];
        if (!m.empty()) throw ValidationError("duplicate sample id \"" + rec.sample_id + "\" in generation run");
        for (int n = 1; n <= 4; ++n) m["bleu" + std::to_string(n)] = bleu_n(hyp, ref, n, options.smoothing);
        m["rouge1"] = rouge_n(hyp, ref, 1, options.rouge_mode);
        m["rouge2"] = rouge_n(hyp, ref, 2, options.rouge_mode);
        m["rougeL"] = rouge_l(hyp, ref, options.rouge_mode);
        if (options.bleu_mode == BleuMode::Corpus) corpus.emplace_back(hyp, ref);
    }
    fill_aggregate(r);
    if (options.bleu_mode == BleuMode::Corpus)
        for (int n = 1; n <= 4; ++n)
            r.aggregate["corpus_bleu" + std::to_string(n)] = corpus_bleu(corpus, n, options.smoothing);
    add_baselines(r, baselines);
    return r;
}

MetricReport build_retrieval_report(std::string run_tag, const std::map<std::string, RankedList>& runs,
                                    const std::map<std::string, std::set<std::string>>& targets,
                                    std::size_t cutoff, std::span<const MetricReport* const> baselines) {
    check_cutoff(cutoff);
    std::set<std::string> run_ids;
    std::set<std::string> target_ids;
    for (const auto& [id, _] : runs) run_ids.insert(id);
    for (const auto& [id, _] : targets) target_ids.insert(id);
    if (run_ids != target_ids)
        throw ValidationError("run and targets cover different queries:" +
                              describe_difference(run_ids, target_ids, "run", "targets"));
    MetricReport r;
    r.run_tag = std::move(run_tag);
    r.task = Task::Retrieval;
    r.settings = {{"cutoff", cutoff}, {"significance_unit", "per-query reciprocal rank"}};
    const std::string rk = "recall@" + std::to_string(cutoff);
    const std::string mk = "mrr@" + std::to_string(cutoff);
    for (const auto& [id, list] : runs) {
        const auto& t = targets.at(id);
        auto& m = r.per_sample[id];
        m[rk] = recall_at_k(list, t, cutoff);
        m[mk] = mrr(list, t, cutoff);
    }
    fill_aggregate(r);
    add_baselines(r, baselines);
    return r;
}

std::vector<SignificanceRow> compare_reports(const MetricReport& a, const MetricReport& b) {
    if (a.task != b.task) throw ValidationError("cannot compare a generation report with a retrieval report");
    std::set<std::string> ids_a;
    std::set<std::string> ids_b;
    for (const auto& [id, _] : a.per_sample) ids_a.insert(id);
    for (const auto& [id, _] : b.per_sample) ids_b.insert(id);
    if (ids_a != ids_b)
        throw ValidationError("reports '" + a.run_tag + "' and '" + b.run_tag + "' cover different samples:" +
                              describe_difference(ids_a, ids_b, a.run_tag, b.run_tag));
    std::size_t cutoff = 10;
    if (a.task == Task::Retrieval) cutoff = a.settings.value("cutoff", std::size_t{10});
    std::vector<SignificanceRow> rows;
    for (const auto& metric : significance_metrics(a.task, cutoff)) {
        std::vector<double> va;
        std::vector<double> vb;
        for (const auto& id : ids_a) {
            const auto& ma = a.per_sample.at(id);
            const auto& mb = b.per_sample.at(id);
            if (!ma.contains(metric) || !mb.contains(metric))
                throw ValidationError("metric '" + metric + "' missing for sample \"" + id + "\"");
            va.push_back(ma.at(metric));
            vb.push_back(mb.at(metric));
        }
        const auto res = t_test_independent(va, vb);
        rows.push_back({metric, b.run_tag, res.t, res.p, res.degenerate_variance});
    }
    return rows;
}

namespace {

Json number(double v) {
    if (std::isinf(v)) return v > 0 ? Json("inf") : Json("-inf");
    return Json(v);
}

double number_from(const Json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw ValidationError("bad number '" + s + "' in report");
    }
    return j.get<double>();
}

}  // namespace

Json report_to_json(const MetricReport& r) {
    Json j;
    j["run_tag"] = r.run_tag;
    j["task"] = to_string(r.task);
    j["settings"] = r.settings;
    j["aggregate"] = Json::object();
    for (const auto& [k, v] : r.aggregate) j["aggregate"][k] = v;
    j["significance"] = Json::array();
    for (const auto& s : r.significance)
        j["significance"].push_back({{"metric", s.metric},
                                     {"other_run_tag", s.other_run_tag},
                                     {"t", number(s.t)},
                                     {"p", s.p},
                                     {"degenerate_variance", s.degenerate_variance}});
    j["per_sample"] = Json::object();
    for (const auto& [id, metrics] : r.per_sample) {
        Json m = Json::object();
        for (const auto& [k, v] : metrics) m[k] = v;
        j["per_sample"][id] = m;
    }
    return j;
}

MetricReport report_from_json(const Json& j) {
    MetricReport r;
    r.run_tag = j.at("run_tag").get<std::string>();
    r.task = parse_task(j.at("task").get<std::string>());
    r.settings = j.value("settings", Json::object());
    for (const auto& [k, v] : j.at("aggregate").items()) r.aggregate[k] = v.get<double>();
    for (const auto& s : j.value("significance", Json::array()))
        r.significance.push_back({s.at("metric").get<std::string>(), s.at("other_run_tag").get<std::string>(),
                                  number_from(s.at("t")), s.at("p").get<double>(),
                                  s.value("degenerate_variance", false)});
    for (const auto& [id, metrics] : j.at("per_sample").items())
        for (const auto& [k, v] : metrics.items()) r.per_sample[id][k] = v.get<double>();
    return r;
}

MetricReport load_report(const std::filesystem::path& path) {
    try {
        return report_from_json(Json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), 0, std::string("bad report: ") + e.what());
    }
}

void save_report(const std::filesystem::path& path, const MetricReport& r) {
    write_file(path, report_to_json(r).dump(1) + "\n");
}

std::string render_table(std::span<const TableRow> rows, const std::vector<std::string>& columns) {
    std::vector<std::vector<std::string>> cells;
    std::vector<std::string> header = {"Model", "Input"};
    for (const auto& c : columns) {
        std::string label = c;
        if (c.rfind("bleu", 0) == 0) label = "BLEU-" + c.substr(4);
        else if (c.rfind("rouge", 0) == 0) label = "ROUGE-" + c.substr(5);
        else if (c.rfind("recall@", 0) == 0) label = "R@" + c.substr(7);
        else if (c.rfind("mrr@", 0) == 0) label = "MRR";
        header.push_back(label);
    }
    cells.push_back(header);
    for (const auto& row : rows) {
        std::vector<std::string> line = {row.model, row.input};
        for (const auto& c : columns) {
            char buf[32] = "-";
            if (row.report && row.report->aggregate.contains(c))
                std::snprintf(buf, sizeof buf, "%.4f", row.report->aggregate.at(c));
            line.emplace_back(buf);
        }
        cells.push_back(std::move(line));
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& line : cells)
        for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());

    const auto format_line = [&](const std::vector<std::string>& line) {
        std::string s;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (i) s += " | ";
            s += line[i];
            if (i + 1 < line.size()) s.append(width[i] - line[i].size(), ' ');
        }
        return s + '\n';
    };
    std::size_t total = 0;
    for (const auto w : width) total += w;
    total += 3 * (width.size() - 1);
    const std::string rule(total, '-');

    std::string out = format_line(cells[0]) + rule + '\n';
    for (std::size_t r = 1; r < cells.size(); ++r) {
        if (r > 1 && cells[r][1] != cells[r - 1][1]) out += rule + '\n';
        out += format_line(cells[r]);
    }
    return out;
}

}  // namespace infoneed
