#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "winsel/corpus.hpp"
#include "winsel/error.hpp"
#include "winsel/judge.hpp"
#include "winsel/prompting.hpp"

namespace winsel {

/// Sliding-window geometry: candidate depth M, window size w, stride s.
struct WindowConfig {
    std::size_t depth = 100;
    std::size_t window = 20;
    std::size_t stride = 10;

    /// Requires all three >= 1 and stride < window whenever depth > window.
    void validate() const;
    /// Same geometry with depth clipped to the available candidates.
    WindowConfig clipped(std::size_t candidates) const;
    bool operator==(const WindowConfig&) const = default;
};

/// Half-open position range [start, end).
struct WindowRange {
    std::size_t start = 0;
    std::size_t end = 0;
    bool operator==(const WindowRange&) const = default;
};

/// Back-to-front plan: [M-w, M), then start moves back by s (clamped at 0)
/// until a window starting at 0 has been emitted. One window [0, M) when M <= w.
std::vector<WindowRange> plan_ranking_windows(const WindowConfig& cfg);

struct WindowBounds {
    std::size_t min_windows = 0;
    std::size_t max_windows = 0;
    bool operator==(const WindowBounds&) const = default;
};

/// Window counts the selection engine can produce: ceil(M/w) when nothing is
/// ever selected, 1 + ceil((M-w)/(w-s)) when s docs are always carried.
WindowBounds window_count_bounds(const WindowConfig& cfg);

/// First k ids; throws ConfigError unless 1 <= k <= ids.size().
std::vector<std::string> cut(std::span<const std::string> ranked, std::size_t k);

/// Ordered, duplicate-free pool of selected doc ids. Members are never removed.
class PreselectedQueue {
public:
    /// queue <- dedup_first_occurrence(selected ++ queue)
    void prepend(std::span<const std::string> selected);

    std::span<const std::string> head(std::size_t count) const;
    std::span<const std::string> items() const { return items_; }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    bool contains(const std::string& doc_id) const { return members_.count(doc_id) != 0; }

private:
    std::vector<std::string> items_;
    std::unordered_set<std::string> members_;
};

struct WindowRecord {
    std::size_t index = 0;
    /// Docs already seen by an earlier window (ranking overlap or queue carry).
    std::vector<std::string> carried;
    /// Docs judged for the first time in this window.
    std::vector<std::string> fresh;
    JudgeVerdict verdict;
    /// Ranking: the window slice after reordering. Selection: the queue.
    std::vector<std::string> after;
    std::size_t prompt_chars = 0;
};

struct WindowTrace {
    std::string query_id;
    JudgeKind kind = JudgeKind::ranking;
    std::vector<WindowRecord> windows;
    std::size_t judged_passage_count = 0;
    std::size_t prompt_char_count = 0;

    std::size_t window_count() const { return windows.size(); }
};

/// A judge failure that stopped a query; carries the windows completed so far.
class QueryAborted : public TransportError {
public:
    QueryAborted(const std::string& what, WindowTrace partial)
        : TransportError(what), trace(std::move(partial)) {}
    WindowTrace trace;
};

struct RankingResult {
    std::vector<std::string> ranked;
    WindowTrace trace;
};

struct SelectionResult {
    PreselectedQueue queue;
    /// One entry per window; empty when the judge gave no pseudo-answer.
    std::vector<std::string> pseudo_answers;
    WindowTrace trace;
};

/// Runs both sliding-window strategies against a judge. Stateless between
/// calls, so one engine may serve many queries concurrently as long as the
/// judge is thread-safe.
class WindowEngine {
public:
    WindowEngine(const Corpus& corpus, const TemplateSet& templates, PromptBudget budget,
                 Judge& judge);

    /// Listwise re-ranking, last window first. Each verdict reorders its
    /// slice in place before the next window is cut.
    RankingResult rerank(const Query& query, const CandidateList& candidates,
                         const WindowConfig& cfg) const;

    /// Utility selection, first window first. Selected docs are prepended to
    /// the preselected queue; the next window is the queue head (up to s
    /// docs) followed by unseen candidates in rank order.
    SelectionResult select(const Query& query, const CandidateList& candidates,
                           const WindowConfig& cfg) const;

private:
    JudgeVerdict judge(const Query& query, std::span<const std::string> window, JudgeKind kind,
                       std::size_t window_index, WindowTrace& trace, std::size_t& chars) const;

    const Corpus& corpus_;
    const TemplateSet& templates_;
    PromptBudget budget_;
    Judge& judge_;
};

}  // namespace winsel
