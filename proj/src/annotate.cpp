#include "winsel/annotate.hpp"

#include <algorithm>
#include <set>

#include "winsel/error.hpp"
#include "winsel/parallel.hpp"
#include "winsel/text.hpp"

namespace winsel {
namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

/// Accepts "[d] > [d] > ... > [d]" with optional spaces around '>'.
bool strict_ranking_list(std::string_view s) {
    std::size_t i = 0;
    auto item = [&] {
        if (i >= s.size() || s[i] != '[') return false;
        std::size_t j = ++i;
        while (i < s.size() && is_digit(s[i])) ++i;
        if (i == j || i >= s.size() || s[i] != ']') return false;
        ++i;
        return true;
    };
    auto spaces = [&] {
        while (i < s.size() && s[i] == ' ') ++i;
    };
    if (!item()) return false;
    while (true) {
        spaces();
        if (i == s.size()) return true;
        if (s[i] != '>') return false;
        ++i;
        spaces();
        if (!item()) return false;
    }
}

void add(Validation& v, Defect d) {
    if (std::find(v.defects.begin(), v.defects.end(), d) == v.defects.end()) v.defects.push_back(d);
    v.pass = false;
}

}  // namespace

std::string_view to_string(Defect d) {
    switch (d) {
        case Defect::improper_format: return "improper_format";
        case Defect::missing_identifiers: return "missing_identifiers";
        case Defect::repetitive: return "repetitive";
        case Defect::transport: return "transport";
    }
    return "unknown";
}

std::vector<std::string> Validation::names() const {
    std::vector<std::string> out;
    for (Defect d : defects) out.emplace_back(to_string(d));
    return out;
}

Validation validate_generation(std::string_view raw, JudgeKind kind, int n) {
    if (n < 1) throw std::invalid_argument("validate_generation: window size must be >= 1");
    Validation v;
    if (kind == JudgeKind::ranking) {
        const std::string_view body = text::trim(raw);
        const std::vector<int> ids = bracketed_identifiers(body);
        if (ids.empty() || !strict_ranking_list(body)) add(v, Defect::improper_format);
        if (ids.empty()) return v;

        std::set<int> distinct(ids.begin(), ids.end());
        if (distinct.size() != ids.size()) add(v, Defect::repetitive);
        const bool exact = static_cast<int>(distinct.size()) == n && *distinct.begin() == 1 &&
                           *distinct.rbegin() == n;
        if (!exact) add(v, Defect::missing_identifiers);
        std::sort(v.defects.begin(), v.defects.end());
        return v;
    }

    const SelectionParse parsed = parse_selection(raw, n);
    const RepairSet& r = parsed.repairs;
    if (r.contains(Repair::unparseable) || r.contains(Repair::free_text_stripped) ||
        r.contains(Repair::out_of_range_dropped) || !parsed.pseudo_answer) {
        add(v, Defect::improper_format);
    }
    if (r.contains(Repair::dedup)) add(v, Defect::repetitive);
    std::sort(v.defects.begin(), v.defects.end());
    return v;
}

nlohmann::json training_json(const TrainingRecord& record) {
    using nlohmann::json;
    return json{
        {"query_id", record.query_id},
        {"kind", std::string(to_string(record.kind))},
        {"messages", json::array({
                         {{"role", "system"}, {"content", record.prompt.system}},
                         {{"role", "user"}, {"content", record.prompt.user}},
                         {{"role", "assistant"}, {"content", record.target_text}},
                     })},
    };
}

nlohmann::json rejected_json(const TrainingRecord& record) {
    nlohmann::json j{
        {"query_id", record.query_id},
        {"kind", std::string(to_string(record.kind))},
        {"defects", record.validation.names()},
        {"raw_text", record.raw_text},
    };
    if (!record.error.empty()) j["error"] = record.error;
    return j;
}

std::vector<TrainingRecord> annotate(const QuerySet& queries, const Run& run, const Corpus& corpus,
                                     Judge& teacher, JudgeKind kind, const WindowConfig& cfg,
                                     const TemplateSet& templates, const PromptBudget& budget,
                                     std::size_t parallel) {
    cfg.validate();
    if (cfg.depth > cfg.window) {
        throw ConfigError("annotation judges a single window: depth (" + std::to_string(cfg.depth) +
                          ") must not exceed window (" + std::to_string(cfg.window) + ")");
    }

    std::vector<const CandidateList*> lists;
    for (const auto& [qid, list] : run) {
        if (list.entries.empty()) throw InputError("query " + qid + " has no candidates");
        if (!queries.find(qid)) throw InputError("run query " + qid + " missing from query set");
        lists.push_back(&list);
    }

    std::vector<TrainingRecord> records(lists.size());
    parallel_for(lists.size(), parallel, [&](std::size_t i) {
        const CandidateList& list = *lists[i];
        const Query& query = *queries.find(list.query_id);
        std::vector<std::string> ids = list.doc_ids();
        if (ids.size() > cfg.depth) ids.resize(cfg.depth);
        std::vector<const Passage*> window;
        for (const auto& id : ids) window.push_back(&corpus.at(id));

        TrainingRecord& rec = records[i];
        rec.query_id = list.query_id;
        rec.kind = kind;
        rec.prompt = render(templates.get(kind), query, window, budget);
        const int n = static_cast<int>(ids.size());
        try {
            rec.raw_text = teacher.complete({list.query_id, ids, &rec.prompt, kind, 0});
        } catch (const TransportError& e) {
            rec.error = e.what();
            rec.validation.pass = false;
            rec.validation.defects = {Defect::transport};
            return;
        }
        rec.validation = validate_generation(rec.raw_text, kind, n);
        if (!rec.validation.pass) return;
        if (kind == JudgeKind::ranking) {
            rec.target_text = format_ranking(parse_ranking(rec.raw_text, n).permutation);
        } else {
            const auto parsed = parse_selection(rec.raw_text, n);
            rec.target_text = format_selection(parsed.selected, parsed.pseudo_answer);
        }
    });
    return records;
}

}  // namespace winsel
