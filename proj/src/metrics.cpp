#include "winsel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "winsel/error.hpp"
#include "winsel/text.hpp"

namespace winsel {
namespace {

using nlohmann::json;

bool is_ascii_punct(unsigned char c) {
    return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
           (c >= 123 && c <= 126);
}

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

std::string pct(double v) { return text::format_fixed(v * 100.0, 2); }

template <typename Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& fn) {
    const std::string content = read_file(path);
    std::size_t line_no = 0;
    for (std::string_view line : text::split_lines(content)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error&) {
            throw InputError(path.string() + ": malformed JSON at line " + std::to_string(line_no));
        }
        if (!obj.is_object() || !obj.contains("query_id") || !obj["query_id"].is_string()) {
            throw InputError(path.string() + ": missing query_id at line " +
                             std::to_string(line_no));
        }
        fn(obj, line_no);
    }
}

}  // namespace

std::vector<std::string> normalize_answer(std::string_view text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (char c : text::ascii_lower(text)) {
        if (!is_ascii_punct(static_cast<unsigned char>(c))) cleaned.push_back(c);
    }
    std::vector<std::string> tokens;
    for (std::string_view tok : text::split_ws(cleaned)) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        tokens.emplace_back(tok);
    }
    return tokens;
}

AnswerScore answer_em_f1(std::string_view prediction, const std::vector<std::string>& gold) {
    if (gold.empty()) throw std::invalid_argument("answer_em_f1: no reference answers");
    const auto pred = normalize_answer(prediction);
    AnswerScore best;
    for (const auto& ref : gold) {
        const auto g = normalize_answer(ref);
        if (pred == g) best.em = 1.0;

        double f1 = 0.0;
        if (pred.empty() && g.empty()) {
            f1 = 1.0;
        } else if (!pred.empty() && !g.empty()) {
            std::unordered_map<std::string, int> bag;
            for (const auto& t : g) ++bag[t];
            std::size_t same = 0;
            for (const auto& t : pred) {
                auto it = bag.find(t);
                if (it != bag.end() && it->second > 0) {
                    --it->second;
                    ++same;
                }
            }
            if (same > 0) {
                const double p = static_cast<double>(same) / static_cast<double>(pred.size());
                const double r = static_cast<double>(same) / static_cast<double>(g.size());
                f1 = 2.0 * p * r / (p + r);
            }
        }
        best.f1 = std::max(best.f1, f1);
    }
    return best;
}

Predictions load_predictions(const std::filesystem::path& path) {
    Predictions out;
    for_each_json_line(path, [&](const json& obj, std::size_t line_no) {
        auto it = obj.find("answer");
        if (it == obj.end() || !it->is_string()) {
            throw InputError(path.string() + ": missing answer at line " + std::to_string(line_no));
        }
        if (!out.emplace(obj["query_id"].get<std::string>(), it->get<std::string>()).second) {
            throw InputError(path.string() + ": duplicate query_id at line " +
                             std::to_string(line_no));
        }
    });
    return out;
}

Selections load_selections(const std::filesystem::path& path) {
    Selections out;
    for_each_json_line(path, [&](const json& obj, std::size_t line_no) {
        auto it = obj.find("selected");
        if (it == obj.end() || !it->is_array()) {
            throw InputError(path.string() + ": missing selected at line " +
                             std::to_string(line_no));
        }
        std::vector<std::string> ids;
        for (const auto& d : *it) {
            if (!d.is_string()) {
                throw InputError(path.string() + ": non-string doc_id at line " +
                                 std::to_string(line_no));
            }
            ids.push_back(d.get<std::string>());
        }
        if (!out.emplace(obj["query_id"].get<std::string>(), std::move(ids)).second) {
            throw InputError(path.string() + ": duplicate query_id at line " +
                             std::to_string(line_no));
        }
    });
    return out;
}

EvidenceCounts evidence_counts(const std::vector<std::string>& selected,
                               const std::set<std::string>& gold) {
    EvidenceCounts c;
    std::set<std::string> unique(selected.begin(), selected.end());
    for (const auto& d : unique) (gold.count(d) ? c.tp : c.fp)++;
    c.fn = gold.size() - c.tp;
    return c;
}

namespace {

EvidenceScores aggregate_evidence(const std::vector<EvidenceCounts>& counts) {
    EvidenceScores s;
    s.queries = counts.size();
    if (counts.empty()) return s;
    double tp = 0, fp = 0, fn = 0, rsum = 0, psum = 0;
    for (const auto& c : counts) {
        rsum += safe_div(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
        psum += safe_div(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
        tp += static_cast<double>(c.tp);
        fp += static_cast<double>(c.fp);
        fn += static_cast<double>(c.fn);
    }
    const double n = static_cast<double>(counts.size());
    s.recall = rsum / n;
    s.precision = psum / n;
    s.micro_f1 = safe_div(2.0 * tp, 2.0 * tp + fp + fn);
    s.micro_recall = safe_div(tp, tp + fn);
    s.micro_precision = safe_div(tp, tp + fp);
    return s;
}

}  // namespace

EvidenceScores evidence_scores(const Selections& selected, const GoldEvidence& gold) {
    std::vector<EvidenceCounts> counts;
    static const std::vector<std::string> none;
    for (const auto& [qid, ids] : gold) {
        auto it = selected.find(qid);
        counts.push_back(evidence_counts(it == selected.end() ? none : it->second, ids));
    }
    return aggregate_evidence(counts);
}

double ndcg_at_k(std::span<const std::string> ranking, const std::map<std::string, int>* judged,
                 std::size_t k) {
    if (k < 1) throw std::invalid_argument("ndcg_at_k: k must be >= 1");
    if (!judged) return 0.0;
    auto gain = [](int g) { return std::exp2(static_cast<double>(g)) - 1.0; };
    auto discount = [](std::size_t pos) { return std::log2(static_cast<double>(pos) + 1.0); };

    double dcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
        auto it = judged->find(ranking[i]);
        const int g = it == judged->end() ? 0 : it->second;
        dcg += gain(g) / discount(i + 1);
    }
    std::vector<int> ideal;
    for (const auto& [doc, g] : *judged) ideal.push_back(g);
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) idcg += gain(ideal[i]) / discount(i + 1);
    return idcg > 0.0 ? dcg / idcg : 0.0;
}

double mean_ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k) {
    if (run.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [qid, list] : run) {
        const auto ids = list.doc_ids();
        sum += ndcg_at_k(ids, qrels.judgments(qid), k);
    }
    return sum / static_cast<double>(run.size());
}

MetricsReport evaluate(const MetricsInputs& in) {
    MetricsReport report;

    if (in.predictions && in.answers) {
        double em = 0, f1 = 0;
        for (const auto& [qid, refs] : *in.answers) {
            auto& q = report.per_query[qid];
            auto it = in.predictions->find(qid);
            AnswerScore s;
            if (it == in.predictions->end()) {
                q.answer_missing = true;
            } else {
                s = answer_em_f1(it->second, refs);
            }
            q.answer = s;
            em += s.em;
            f1 += s.f1;
        }
        for (const auto& [qid, _] : *in.predictions) {
            if (!in.answers->count(qid)) report.predictions_without_gold.push_back(qid);
        }
        report.answer_queries = in.answers->size();
        const double n = static_cast<double>(std::max<std::size_t>(1, report.answer_queries));
        report.mean_em = em / n;
        report.mean_f1 = f1 / n;
    }

    if (in.selections && in.evidence) {
        std::vector<EvidenceCounts> counts;
        static const std::vector<std::string> none;
        for (const auto& [qid, gold] : *in.evidence) {
            auto& q = report.per_query[qid];
            auto it = in.selections->find(qid);
            q.selection_missing = it == in.selections->end();
            q.evidence = evidence_counts(q.selection_missing ? none : it->second, gold);
            counts.push_back(*q.evidence);
        }
        for (const auto& [qid, _] : *in.selections) {
            if (!in.evidence->count(qid)) report.selections_without_gold.push_back(qid);
        }
        report.evidence = aggregate_evidence(counts);
    }

    if (in.run && in.qrels) {
        for (std::size_t k : in.ndcg_cuts) {
            double sum = 0.0;
            for (const auto& [qid, list] : *in.run) {
                const auto ids = list.doc_ids();
                const double v = ndcg_at_k(ids, in.qrels->judgments(qid), k);
                report.per_query[qid].ndcg[k] = v;
                sum += v;
            }
            report.ndcg[k] = in.run->empty() ? 0.0 : sum / static_cast<double>(in.run->size());
        }
        report.ndcg_queries = in.run->size();
    }
    return report;
}

nlohmann::json MetricsReport::to_json() const {
    json doc = json::object();
    if (mean_em) {
        json missing = json::array();
        for (const auto& [qid, q] : per_query) {
            if (q.answer_missing) missing.push_back(qid);
        }
        doc["answer"] = {
            {"queries", answer_queries},
            {"em", *mean_em},
            {"f1", *mean_f1},
            {"em_pct", pct(*mean_em)},
            {"f1_pct", pct(*mean_f1)},
            {"missing_predictions", missing},
            {"predictions_without_gold", predictions_without_gold},
        };
    }
    if (evidence) {
        json missing = json::array();
        for (const auto& [qid, q] : per_query) {
            if (q.evidence && q.selection_missing) missing.push_back(qid);
        }
        doc["evidence"] = {
            {"queries", evidence->queries},
            {"recall", evidence->recall},
            {"precision", evidence->precision},
            {"micro_f1", evidence->micro_f1},
            {"micro_recall", evidence->micro_recall},
            {"micro_precision", evidence->micro_precision},
            {"recall_pct", pct(evidence->recall)},
            {"precision_pct", pct(evidence->precision)},
            {"micro_f1_pct", pct(evidence->micro_f1)},
            {"missing_selections", missing},
            {"selections_without_gold", selections_without_gold},
        };
    }
    if (!ndcg.empty()) {
        json cuts = json::object(), pcts = json::object();
        for (const auto& [k, v] : ndcg) {
            cuts["ndcg@" + std::to_string(k)] = v;
            pcts["ndcg@" + std::to_string(k)] = pct(v);
        }
        doc["ranking"] = {{"queries", ndcg_queries}, {"values", cuts}, {"pct", pcts}};
    }
    doc["conventions"] = {
        {"answer_normalization", "lowercase, strip ASCII punctuation, drop a/an/the"},
        {"evidence_averaging", "recall/precision per-query mean; micro_* pooled"},
        {"empty_selection_precision", 0},
        {"ndcg_gain", "2^g - 1"},
        {"ndcg_discount", "log2(rank + 1)"},
        {"ndcg_no_relevant", 0},
    };

    json rows = json::array();
    for (const auto& [qid, q] : per_query) {
        json row{{"query_id", qid}};
        if (q.answer) {
            row["em"] = q.answer->em;
            row["f1"] = q.answer->f1;
        }
        if (q.evidence) {
            row["tp"] = q.evidence->tp;
            row["fp"] = q.evidence->fp;
            row["fn"] = q.evidence->fn;
        }
        for (const auto& [k, v] : q.ndcg) row["ndcg@" + std::to_string(k)] = v;
        rows.push_back(std::move(row));
    }
    doc["per_query"] = std::move(rows);
    return doc;
}

std::string MetricsReport::to_tsv() const {
    std::ostringstream out;
    out << "query_id\tem\tf1\ttp\tfp\tfn\trecall\tprecision";
    for (const auto& [k, _] : ndcg) out << "\tndcg@" << k;
    out << '\n';
    auto num = [](double v) { return text::format_fixed(v, 6); };
    for (const auto& [qid, q] : per_query) {
        out << qid << '\t';
        if (q.answer) out << num(q.answer->em) << '\t' << num(q.answer->f1);
        else out << '\t';
        out << '\t';
        if (q.evidence) {
            const auto& e = *q.evidence;
            out << e.tp << '\t' << e.fp << '\t' << e.fn << '\t'
                << num(safe_div(static_cast<double>(e.tp), static_cast<double>(e.tp + e.fn))) << '\t'
                << num(safe_div(static_cast<double>(e.tp), static_cast<double>(e.tp + e.fp)));
        } else {
            out << "\t\t\t\t";
        }
        for (const auto& [k, _] : ndcg) {
            out << '\t';
            if (auto it = q.ndcg.find(k); it != q.ndcg.end()) out << num(it->second);
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace winsel
