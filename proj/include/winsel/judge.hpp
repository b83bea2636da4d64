#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "winsel/corpus.hpp"
#include "winsel/prompting.hpp"

namespace winsel {

/// Fixes applied while turning raw judge text into a verdict. The
/// enumerator order is the order tags are reported in.
enum class Repair {
    dedup,
    out_of_range_dropped,
    missing_appended,
    free_text_stripped,
    unparseable,
};

std::string_view to_string(Repair r);

/// Sorted, duplicate-free set of repair tags.
class RepairSet {
public:
    void add(Repair r);
    bool contains(Repair r) const;
    bool empty() const { return tags_.empty(); }
    const std::vector<Repair>& tags() const { return tags_; }
    std::vector<std::string> names() const;
    bool operator==(const RepairSet&) const = default;

private:
    std::vector<Repair> tags_;
};

struct JudgeVerdict {
    JudgeKind kind = JudgeKind::ranking;
    /// 1-based window-local indices; a permutation of 1..n (ranking only).
    std::vector<int> permutation;
    /// 1-based window-local indices, unique, in emitted order (selection only).
    std::vector<int> selected;
    std::optional<std::string> pseudo_answer;
    std::string raw_text;
    RepairSet repairs;
};

struct RankingParse {
    std::vector<int> permutation;
    RepairSet repairs;
};

struct SelectionParse {
    std::vector<int> selected;
    std::optional<std::string> pseudo_answer;
    RepairSet repairs;
};

/// Total: always returns a permutation of 1..n. Throws std::invalid_argument
/// only when n < 1.
RankingParse parse_ranking(std::string_view text, int n);

/// Total: always returns a duplicate-free subset of 1..n.
SelectionParse parse_selection(std::string_view text, int n);

/// "[a] > [b] > ..."
std::string format_ranking(std::span<const int> permutation);
/// Optional pseudo-answer line(s) followed by "Selected: [a], [b]" or
/// "Selected: none".
std::string format_selection(std::span<const int> selected,
                             const std::optional<std::string>& pseudo_answer);

/// Bracketed identifiers "[k]" in emitted order. Values that do not fit in
/// an int are reported as -1.
std::vector<int> bracketed_identifiers(std::string_view text);

/// Everything a judge may look at for one window.
struct JudgeRequest {
    std::string query_id;
    std::span<const std::string> doc_ids;
    const RenderedPrompt* prompt = nullptr;
    JudgeKind kind = JudgeKind::ranking;
    int window_index = 0;
};

/// Produces raw judge text for a window. Implementations must be safe to
/// call concurrently; transport failures throw TransportError.
class Judge {
public:
    virtual ~Judge() = default;
    virtual std::string complete(const JudgeRequest& request) = 0;
};

/// Calls the judge and parses its text. The prompt must have been rendered
/// for exactly doc_ids.size() passages.
JudgeVerdict judge_window(Judge& judge, const JudgeRequest& request);

/// Relevance-label judge backed by qrels. Ranking sorts by grade descending
/// (stable); selection keeps grades >= threshold in that same order.
class OracleJudge final : public Judge {
public:
    OracleJudge(const Qrels& qrels, int threshold = 1, const GoldAnswers* answers = nullptr);
    std::string complete(const JudgeRequest& request) override;

private:
    const Qrels& qrels_;
    int threshold_;
    const GoldAnswers* answers_;
};

/// Replays responses keyed by prompt hash from a JSONL transcript of
/// {prompt_sha256, response_text}. A missing key raises TransportError.
class ReplayJudge final : public Judge {
public:
    explicit ReplayJudge(const std::filesystem::path& transcript);
    static ReplayJudge from_string(std::string_view content);
    std::string complete(const JudgeRequest& request) override;
    std::size_t size() const { return responses_.size(); }

private:
    ReplayJudge() = default;
    void load(std::string_view content);
    std::unordered_map<std::string, std::string> responses_;
};

/// Forwards to another judge and appends each response to a transcript.
class RecordingJudge final : public Judge {
public:
    RecordingJudge(Judge& inner, const std::filesystem::path& transcript);
    std::string complete(const JudgeRequest& request) override;

private:
    Judge& inner_;
    std::mutex mutex_;
    std::ofstream out_;
};

}  // namespace winsel
