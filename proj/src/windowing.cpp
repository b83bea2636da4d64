#include "winsel/windowing.hpp"

#include <algorithm>

namespace winsel {
namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

std::vector<std::string> truncated_ids(const CandidateList& candidates, std::size_t depth) {
    std::vector<std::string> ids = candidates.doc_ids();
    if (ids.size() > depth) ids.resize(depth);
    return ids;
}

}  // namespace

void WindowConfig::validate() const {
    if (depth < 1 || window < 1 || stride < 1) {
        throw ConfigError("window geometry needs depth, window and stride >= 1");
    }
    if (depth > window && stride >= window) {
        throw ConfigError("stride (" + std::to_string(stride) + ") must be smaller than window (" +
                          std::to_string(window) + ")");
    }
}

WindowConfig WindowConfig::clipped(std::size_t candidates) const {
    WindowConfig c = *this;
    c.depth = std::min(depth, candidates);
    return c;
}

std::vector<WindowRange> plan_ranking_windows(const WindowConfig& cfg) {
    cfg.validate();
    const std::size_t m = cfg.depth, w = cfg.window, s = cfg.stride;
    if (m <= w) return {{0, m}};
    std::vector<WindowRange> plan;
    std::size_t start = m - w;
    while (true) {
        plan.push_back({start, start + w});
        if (start == 0) break;
        start = start > s ? start - s : 0;
    }
    return plan;
}

WindowBounds window_count_bounds(const WindowConfig& cfg) {
    cfg.validate();
    const std::size_t m = cfg.depth, w = cfg.window, s = cfg.stride;
    if (m <= w) return {1, 1};
    return {ceil_div(m, w), 1 + ceil_div(m - w, w - s)};
}

std::vector<std::string> cut(std::span<const std::string> ranked, std::size_t k) {
    if (k < 1 || k > ranked.size()) {
        throw ConfigError("cut k=" + std::to_string(k) + " outside 1.." +
                          std::to_string(ranked.size()));
    }
    return {ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k)};
}

void PreselectedQueue::prepend(std::span<const std::string> selected) {
    std::vector<std::string> next;
    next.reserve(selected.size() + items_.size());
    std::unordered_set<std::string> seen;
    for (const auto& id : selected) {
        if (seen.insert(id).second) next.push_back(id);
    }
    for (auto& id : items_) {
        if (seen.insert(id).second) next.push_back(std::move(id));
    }
    items_ = std::move(next);
    members_ = std::move(seen);
}

std::span<const std::string> PreselectedQueue::head(std::size_t count) const {
    return std::span<const std::string>(items_).first(std::min(count, items_.size()));
}

WindowEngine::WindowEngine(const Corpus& corpus, const TemplateSet& templates, PromptBudget budget,
                           Judge& judge)
    : corpus_(corpus), templates_(templates), budget_(budget), judge_(judge) {}

JudgeVerdict WindowEngine::judge(const Query& query, std::span<const std::string> window,
                                 JudgeKind kind, std::size_t window_index, WindowTrace& trace,
                                 std::size_t& chars) const {
    std::vector<const Passage*> passages;
    passages.reserve(window.size());
    for (const auto& id : window) passages.push_back(&corpus_.at(id));

    const RenderedPrompt prompt = render(templates_.get(kind), query, passages, budget_);
    chars = prompt.char_count();
    JudgeRequest req{query.query_id, window, &prompt, kind, static_cast<int>(window_index)};
    try {
        return judge_window(judge_, req);
    } catch (const TransportError& e) {
        throw QueryAborted(e.what(), trace);
    }
}

RankingResult WindowEngine::rerank(const Query& query, const CandidateList& candidates,
                                   const WindowConfig& cfg) const {
    cfg.validate();
    RankingResult result;
    result.ranked = truncated_ids(candidates, cfg.depth);
    if (result.ranked.empty()) throw InputError("query " + query.query_id + " has no candidates");
    WindowTrace& trace = result.trace;
    trace.query_id = query.query_id;
    trace.kind = JudgeKind::ranking;

    const auto plan = plan_ranking_windows(cfg.clipped(result.ranked.size()));
    std::size_t seen_from = result.ranked.size();  // positions >= seen_from were judged
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto [start, end] = plan[i];
        const auto first = result.ranked.begin() + static_cast<std::ptrdiff_t>(start);
        const auto last = result.ranked.begin() + static_cast<std::ptrdiff_t>(end);
        std::vector<std::string> slice(first, last);

        WindowRecord rec;
        rec.index = i;
        const std::size_t fresh_end = std::min(seen_from, end);
        rec.fresh.assign(slice.begin(), slice.begin() + static_cast<std::ptrdiff_t>(fresh_end - start));
        rec.carried.assign(slice.begin() + static_cast<std::ptrdiff_t>(fresh_end - start), slice.end());
        seen_from = start;

        rec.verdict = judge(query, slice, JudgeKind::ranking, i, trace, rec.prompt_chars);
        for (std::size_t j = 0; j < slice.size(); ++j) {
            *(first + static_cast<std::ptrdiff_t>(j)) =
                slice[static_cast<std::size_t>(rec.verdict.permutation[j] - 1)];
        }
        rec.after.assign(first, last);

        trace.judged_passage_count += slice.size();
        trace.prompt_char_count += rec.prompt_chars;
        trace.windows.push_back(std::move(rec));
    }
    return result;
}

SelectionResult WindowEngine::select(const Query& query, const CandidateList& candidates,
                                     const WindowConfig& cfg) const {
    cfg.validate();
    const std::vector<std::string> ids = truncated_ids(candidates, cfg.depth);
    if (ids.empty()) throw InputError("query " + query.query_id + " has no candidates");
    const std::size_t w = cfg.window, s = cfg.stride;

    SelectionResult result;
    WindowTrace& trace = result.trace;
    trace.query_id = query.query_id;
    trace.kind = JudgeKind::selection;

    std::size_t next = 0;
    for (std::size_t i = 0; next < ids.size(); ++i) {
        WindowRecord rec;
        rec.index = i;
        const auto carried = result.queue.head(std::min(s, w - 1));
        rec.carried.assign(carried.begin(), carried.end());
        const std::size_t take = std::min(w - rec.carried.size(), ids.size() - next);
        rec.fresh.assign(ids.begin() + static_cast<std::ptrdiff_t>(next),
                         ids.begin() + static_cast<std::ptrdiff_t>(next + take));
        next += take;

        std::vector<std::string> window = rec.carried;
        window.insert(window.end(), rec.fresh.begin(), rec.fresh.end());

        rec.verdict = judge(query, window, JudgeKind::selection, i, trace, rec.prompt_chars);
        std::vector<std::string> chosen;
        chosen.reserve(rec.verdict.selected.size());
        for (int k : rec.verdict.selected) chosen.push_back(window[static_cast<std::size_t>(k - 1)]);
        result.queue.prepend(chosen);
        result.pseudo_answers.push_back(rec.verdict.pseudo_answer.value_or(std::string{}));
        rec.after.assign(result.queue.items().begin(), result.queue.items().end());

        trace.judged_passage_count += window.size();
        trace.prompt_char_count += rec.prompt_chars;
        trace.windows.push_back(std::move(rec));
    }
    return result;
}

}  // namespace winsel
