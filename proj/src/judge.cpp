#include "winsel/judge.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>

#include <json.hpp>

#include "winsel/error.hpp"
#include "winsel/jsonl.hpp"
#include "winsel/text.hpp"

namespace winsel {
namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) {
    return is_digit(c) || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

int to_index(std::string_view digits) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) return -1;
    return v;
}

/// Digit runs not glued to letters, e.g. "1,3,2" or "passages 4 and 2".
std::vector<int> bare_integers(std::string_view text) {
    std::vector<int> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_digit(text[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && is_digit(text[j])) ++j;
        const bool glued = (i > 0 && is_alnum(text[i - 1])) || (j < text.size() && is_alnum(text[j]));
        if (!glued) out.push_back(to_index(text.substr(i, j - i)));
        i = j;
    }
    return out;
}

/// Keep first occurrences, then drop identifiers outside 1..n.
std::vector<int> dedup_and_clip(const std::vector<int>& ids, int n, RepairSet& repairs) {
    std::vector<int> out;
    std::vector<bool> seen(static_cast<std::size_t>(n) + 1, false);
    std::vector<int> kept_out_of_range;
    for (int id : ids) {
        if (id >= 1 && id <= n) {
            if (seen[static_cast<std::size_t>(id)]) {
                repairs.add(Repair::dedup);
                continue;
            }
            seen[static_cast<std::size_t>(id)] = true;
            out.push_back(id);
        } else {
            if (std::find(kept_out_of_range.begin(), kept_out_of_range.end(), id) !=
                kept_out_of_range.end()) {
                repairs.add(Repair::dedup);
            } else {
                kept_out_of_range.push_back(id);
            }
        }
    }
    if (!kept_out_of_range.empty()) repairs.add(Repair::out_of_range_dropped);
    return out;
}

std::vector<int> identity(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), 1);
    return v;
}

/// Returns the text after "Selected:" when `line` is a selection line.
std::optional<std::string_view> selection_payload(std::string_view line) {
    std::string_view t = text::trim(line);
    while (!t.empty() && (t.front() == '*' || t.front() == '#')) t.remove_prefix(1);
    t = text::trim(t);
    constexpr std::string_view kw = "selected";
    if (t.size() < kw.size() || !text::iequals(t.substr(0, kw.size()), kw)) return std::nullopt;
    t.remove_prefix(kw.size());
    while (!t.empty() && (t.front() == ' ' || t.front() == '*')) t.remove_prefix(1);
    if (t.empty() || t.front() != ':') return std::nullopt;
    t.remove_prefix(1);
    while (!t.empty() && t.front() == '*') t.remove_prefix(1);
    return text::trim(t);
}

std::string join_lines(std::span<const std::string_view> lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += '\n';
        out += lines[i];
    }
    return std::string(text::trim(out));
}

bool only_list_punctuation(std::string_view payload) {
    // After removing "[k]" tokens, only separators may remain.
    std::size_t i = 0;
    while (i < payload.size()) {
        char c = payload[i];
        if (c == '[') {
            std::size_t close = payload.find(']', i);
            if (close == std::string_view::npos) return false;
            i = close + 1;
            continue;
        }
        if (c != ',' && !text::is_space(c)) return false;
        ++i;
    }
    return true;
}

}  // namespace

std::string_view to_string(Repair r) {
    switch (r) {
        case Repair::dedup: return "dedup";
        case Repair::out_of_range_dropped: return "out_of_range_dropped";
        case Repair::missing_appended: return "missing_appended";
        case Repair::free_text_stripped: return "free_text_stripped";
        case Repair::unparseable: return "unparseable";
    }
    return "unknown";
}

void RepairSet::add(Repair r) {
    auto it = std::lower_bound(tags_.begin(), tags_.end(), r);
    if (it == tags_.end() || *it != r) tags_.insert(it, r);
}

bool RepairSet::contains(Repair r) const {
    return std::binary_search(tags_.begin(), tags_.end(), r);
}

std::vector<std::string> RepairSet::names() const {
    std::vector<std::string> out;
    for (Repair r : tags_) out.emplace_back(to_string(r));
    return out;
}

std::vector<int> bracketed_identifiers(std::string_view text) {
    std::vector<int> out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '[') continue;
        std::size_t j = i + 1;
        while (j < text.size() && text[j] == ' ') ++j;
        const std::size_t d = j;
        while (j < text.size() && is_digit(text[j])) ++j;
        if (j == d) continue;
        const std::size_t e = j;
        while (j < text.size() && text[j] == ' ') ++j;
        if (j < text.size() && text[j] == ']') {
            out.push_back(to_index(text.substr(d, e - d)));
            i = j;
        }
    }
    return out;
}

RankingParse parse_ranking(std::string_view text, int n) {
    if (n < 1) throw std::invalid_argument("parse_ranking: window size must be >= 1");
    RankingParse result;
    std::vector<int> ids = bracketed_identifiers(text);
    if (ids.empty()) {
        ids = bare_integers(text);
        if (ids.empty()) {
            result.permutation = identity(n);
            result.repairs.add(Repair::unparseable);
            return result;
        }
        result.repairs.add(Repair::free_text_stripped);
    }
    result.permutation = dedup_and_clip(ids, n, result.repairs);
    if (static_cast<int>(result.permutation.size()) < n) {
        std::vector<bool> present(static_cast<std::size_t>(n) + 1, false);
        for (int id : result.permutation) present[static_cast<std::size_t>(id)] = true;
        for (int id = 1; id <= n; ++id) {
            if (!present[static_cast<std::size_t>(id)]) result.permutation.push_back(id);
        }
        result.repairs.add(Repair::missing_appended);
    }
    return result;
}

SelectionParse parse_selection(std::string_view text, int n) {
    if (n < 1) throw std::invalid_argument("parse_selection: window size must be >= 1");
    SelectionParse result;
    const auto lines = text::split_lines(text);

    std::optional<std::size_t> sel_line;
    std::string_view payload;
    for (std::size_t i = lines.size(); i-- > 0;) {
        if (auto p = selection_payload(lines[i])) {
            sel_line = i;
            payload = *p;
            break;
        }
    }

    std::vector<int> ids;
    if (sel_line) {
        const std::span<const std::string_view> all(lines);
        std::string before = join_lines(all.subspan(0, *sel_line));
        std::string after = join_lines(all.subspan(*sel_line + 1));
        if (!before.empty()) {
            result.pseudo_answer = std::move(before);
        } else if (!after.empty()) {
            result.pseudo_answer = std::move(after);
        }
        std::string_view bare = payload;
        while (!bare.empty() && (bare.back() == '.' || bare.back() == '*')) bare.remove_suffix(1);
        if (bare.empty() || text::iequals(text::trim(bare), "none")) return result;

        ids = bracketed_identifiers(payload);
        if (ids.empty()) {
            ids = bare_integers(payload);
            if (ids.empty()) {
                result.repairs.add(Repair::unparseable);
                return result;
            }
            result.repairs.add(Repair::free_text_stripped);
        } else if (!only_list_punctuation(payload)) {
            result.repairs.add(Repair::free_text_stripped);
        }
    } else {
        ids = bracketed_identifiers(text);
        if (ids.empty()) {
            result.repairs.add(Repair::unparseable);
            return result;
        }
        result.repairs.add(Repair::free_text_stripped);
    }
    result.selected = dedup_and_clip(ids, n, result.repairs);
    return result;
}

std::string format_ranking(std::span<const int> permutation) {
    std::string out;
    for (std::size_t i = 0; i < permutation.size(); ++i) {
        if (i) out += " > ";
        out += '[' + std::to_string(permutation[i]) + ']';
    }
    return out;
}

std::string format_selection(std::span<const int> selected,
                             const std::optional<std::string>& pseudo_answer) {
    std::string out;
    if (pseudo_answer) {
        std::string_view answer = text::trim(*pseudo_answer);
        if (!answer.empty()) {
            out += answer;
            out += '\n';
        }
    }
    out += "Selected: ";
    if (selected.empty()) {
        out += "none";
    } else {
        for (std::size_t i = 0; i < selected.size(); ++i) {
            if (i) out += ", ";
            out += '[' + std::to_string(selected[i]) + ']';
        }
    }
    return out;
}

JudgeVerdict judge_window(Judge& judge, const JudgeRequest& request) {
    const int n = static_cast<int>(request.doc_ids.size());
    if (n < 1) throw std::invalid_argument("judge_window: empty window");
    if (!request.prompt || request.prompt->passage_count != request.doc_ids.size()) {
        throw std::invalid_argument("judge_window: prompt not rendered for this window");
    }
    JudgeVerdict v;
    v.kind = request.kind;
    v.raw_text = judge.complete(request);
    if (request.kind == JudgeKind::ranking) {
        auto parsed = parse_ranking(v.raw_text, n);
        v.permutation = std::move(parsed.permutation);
        v.repairs = parsed.repairs;
    } else {
        auto parsed = parse_selection(v.raw_text, n);
        v.selected = std::move(parsed.selected);
        v.pseudo_answer = std::move(parsed.pseudo_answer);
        v.repairs = parsed.repairs;
    }
    return v;
}

OracleJudge::OracleJudge(const Qrels& qrels, int threshold, const GoldAnswers* answers)
    : qrels_(qrels), threshold_(threshold), answers_(answers) {}

std::string OracleJudge::complete(const JudgeRequest& request) {
    const int n = static_cast<int>(request.doc_ids.size());
    std::vector<int> grades;
    grades.reserve(request.doc_ids.size());
    for (const auto& d : request.doc_ids) grades.push_back(qrels_.grade(request.query_id, d));

    std::vector<int> order = identity(n);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return grades[static_cast<std::size_t>(a - 1)] > grades[static_cast<std::size_t>(b - 1)];
    });
    if (request.kind == JudgeKind::ranking) return format_ranking(order);

    std::vector<int> selected;
    for (int i : order) {
        if (grades[static_cast<std::size_t>(i - 1)] >= threshold_) selected.push_back(i);
    }
    std::optional<std::string> answer;
    if (answers_) {
        if (auto it = answers_->find(request.query_id); it != answers_->end() && !it->second.empty()) {
            answer = it->second.front();
        }
    }
    return format_selection(selected, answer);
}

ReplayJudge::ReplayJudge(const std::filesystem::path& transcript) { load(read_file(transcript)); }

ReplayJudge ReplayJudge::from_string(std::string_view content) {
    ReplayJudge j;
    j.load(content);
    return j;
}

void ReplayJudge::load(std::string_view content) {
    std::size_t line_no = 0;
    for (std::string_view line : text::split_lines(content)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw InputError("malformed transcript line " + std::to_string(line_no));
        }
        if (!obj.is_object() || !obj.contains("prompt_sha256") || !obj.contains("response_text") ||
            !obj["prompt_sha256"].is_string() || !obj["response_text"].is_string()) {
            throw InputError("transcript line " + std::to_string(line_no) +
                             " needs prompt_sha256 and response_text");
        }
        responses_.emplace(obj["prompt_sha256"].get<std::string>(),
                           obj["response_text"].get<std::string>());
    }
}

std::string ReplayJudge::complete(const JudgeRequest& request) {
    const std::string key = request.prompt->key();
    auto it = responses_.find(key);
    if (it == responses_.end()) {
        throw TransportError("no transcript entry for prompt " + key + " (query " +
                             request.query_id + ")");
    }
    return it->second;
}

RecordingJudge::RecordingJudge(Judge& inner, const std::filesystem::path& transcript)
    : inner_(inner), out_(transcript, std::ios::app) {
    if (!out_) throw InputError("cannot open transcript " + transcript.string());
}

std::string RecordingJudge::complete(const JudgeRequest& request) {
    std::string response = inner_.complete(request);
    nlohmann::json line{{"prompt_sha256", request.prompt->key()}, {"response_text", response}};
    std::lock_guard lock(mutex_);
    out_ << dump_line(line) << '\n';
    out_.flush();
    return response;
}

}  // namespace winsel
