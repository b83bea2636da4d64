#include "winsel/pipeline.hpp"

#include "winsel/error.hpp"
#include "winsel/jsonl.hpp"
#include "winsel/parallel.hpp"

namespace winsel {
namespace {

std::vector<const CandidateList*> runnable(const QuerySet& queries, const Run& run) {
    std::vector<const CandidateList*> lists;
    for (const auto& [qid, list] : run) {
        if (!queries.find(qid)) throw InputError("run query " + qid + " missing from query set");
        lists.push_back(&list);
    }
    return lists;
}

}  // namespace

std::vector<RerankOutcome> rerank_all(const QuerySet& queries, const Run& run,
                                      const WindowEngine& engine, const WindowConfig& cfg,
                                      std::size_t parallel) {
    cfg.validate();
    const auto lists = runnable(queries, run);
    std::vector<RerankOutcome> out(lists.size());
    parallel_for(lists.size(), parallel, [&](std::size_t i) {
        const CandidateList& list = *lists[i];
        RerankOutcome& o = out[i];
        o.query_id = list.query_id;
        try {
            auto r = engine.rerank(*queries.find(list.query_id), list, cfg);
            o.ranked = std::move(r.ranked);
            o.trace = std::move(r.trace);
        } catch (const QueryAborted& e) {
            o.error = e.what();
            o.trace = e.trace;
        }
    });
    return out;
}

std::vector<SelectOutcome> select_all(const QuerySet& queries, const Run& run,
                                      const WindowEngine& engine, const WindowConfig& cfg,
                                      std::size_t parallel) {
    cfg.validate();
    const auto lists = runnable(queries, run);
    std::vector<SelectOutcome> out(lists.size());
    parallel_for(lists.size(), parallel, [&](std::size_t i) {
        const CandidateList& list = *lists[i];
        SelectOutcome& o = out[i];
        o.query_id = list.query_id;
        try {
            auto r = engine.select(*queries.find(list.query_id), list, cfg);
            o.selected.assign(r.queue.items().begin(), r.queue.items().end());
            o.pseudo_answers = std::move(r.pseudo_answers);
            o.trace = std::move(r.trace);
        } catch (const QueryAborted& e) {
            o.error = e.what();
            o.trace = e.trace;
        }
    });
    return out;
}

Run ranked_run(const std::vector<RerankOutcome>& outcomes) {
    Run run;
    for (const auto& o : outcomes) {
        if (o.error) continue;
        CandidateList list{o.query_id, {}};
        for (std::size_t i = 0; i < o.ranked.size(); ++i) {
            const int rank = static_cast<int>(i + 1);
            list.entries.push_back({o.ranked[i], 1.0 / rank, rank});
        }
        run.emplace(o.query_id, std::move(list));
    }
    return run;
}

Selections top_k(const std::vector<RerankOutcome>& outcomes, std::size_t k) {
    Selections sel;
    for (const auto& o : outcomes) {
        if (o.error) continue;
        sel[o.query_id] = cut(o.ranked, std::min(k, o.ranked.size()));
    }
    return sel;
}

Selections selections_of(const std::vector<SelectOutcome>& outcomes) {
    Selections sel;
    for (const auto& o : outcomes) {
        if (!o.error) sel[o.query_id] = o.selected;
    }
    return sel;
}

void write_selections(std::ostream& out, const std::vector<SelectOutcome>& outcomes) {
    for (const auto& o : outcomes) {
        if (o.error) continue;
        nlohmann::json line{{"query_id", o.query_id},
                            {"selected", o.selected},
                            {"pseudo_answers", o.pseudo_answers},
                            {"windows", o.trace.window_count()}};
        out << dump_line(line) << '\n';
    }
}

void write_top_k(std::ostream& out, const std::vector<RerankOutcome>& outcomes, std::size_t k) {
    for (const auto& o : outcomes) {
        if (o.error) continue;
        nlohmann::json line{{"query_id", o.query_id},
                            {"selected", cut(o.ranked, std::min(k, o.ranked.size()))},
                            {"pseudo_answers", nlohmann::json::array()},
                            {"windows", o.trace.window_count()}};
        out << dump_line(line) << '\n';
    }
}

nlohmann::json window_json(const WindowTrace& trace, const WindowRecord& rec) {
    nlohmann::json j{
        {"query_id", trace.query_id},
        {"kind", std::string(to_string(trace.kind))},
        {"window", rec.index},
        {"carried", rec.carried},
        {"fresh", rec.fresh},
        {"raw_text", rec.verdict.raw_text},
        {"repairs", rec.verdict.repairs.names()},
        {"after", rec.after},
        {"prompt_chars", rec.prompt_chars},
    };
    if (trace.kind == JudgeKind::ranking) {
        j["permutation"] = rec.verdict.permutation;
    } else {
        j["selected"] = rec.verdict.selected;
        j["pseudo_answer"] = rec.verdict.pseudo_answer
                                 ? nlohmann::json(*rec.verdict.pseudo_answer)
                                 : nlohmann::json(nullptr);
    }
    return j;
}

void write_traces(std::ostream& out, const std::vector<const WindowTrace*>& traces) {
    for (const WindowTrace* t : traces) {
        for (const auto& rec : t->windows) out << dump_line(window_json(*t, rec)) << '\n';
    }
}

}  // namespace winsel
