#include "winsel/prompting.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "winsel/error.hpp"
#include "winsel/hashing.hpp"
#include "winsel/text.hpp"

namespace winsel {
namespace {

constexpr std::string_view kRankingSystem =
    "You are an intelligent assistant that ranks passages by their relevance to a search "
    "query. I will provide you with {count} passages, each indicated by a numerical "
    "identifier []. Rank the passages based on their relevance to the query: {query}.";

constexpr std::string_view kSelectionSystem =
    "You are an intelligent assistant that judges the utility of passages for answering a "
    "question. I will provide you with {count} passages, each indicated by a numerical "
    "identifier []. Judge which passages are useful for answering the question: {query}.";

constexpr std::string_view kPassage = "[{index}] {text}";

constexpr std::string_view kRankingInstruction =
    "Search Query: {query}\n\n"
    "Rank the {count} passages above based on their relevance to the search query. List "
    "all the passages using their identifiers, in descending order of relevance. The output "
    "format should be [] > [], e.g., [i] > [j] > [k]. Only respond with the ranking results, "
    "do not say any word or explain.";

constexpr std::string_view kSelectionInstruction =
    "Question: {query}\n\n"
    "Using the {count} passages above, first write a concise answer to the question. Then "
    "judge which passages have utility, meaning they help produce a correct and complete "
    "answer. On the final line, output the identifiers of the useful passages as "
    "`Selected: [i], [j]`, or `Selected: none` if no passage is useful.";

struct Placeholder {
    std::size_t pos;
    std::size_t len;  // including braces
    std::string name;
};

std::vector<Placeholder> find_placeholders(std::string_view s) {
    std::vector<Placeholder> out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '{') continue;
        std::size_t j = i + 1;
        while (j < s.size() && ((s[j] >= 'a' && s[j] <= 'z') || s[j] == '_')) ++j;
        if (j < s.size() && s[j] == '}' && j > i + 1) {
            out.push_back({i, j - i + 1, std::string(s.substr(i + 1, j - i - 1))});
            i = j;
        }
    }
    return out;
}

std::string substitute(std::string_view s, const std::map<std::string, std::string_view>& vars) {
    std::string out;
    std::size_t last = 0;
    for (const auto& ph : find_placeholders(s)) {
        auto it = vars.find(ph.name);
        if (it == vars.end()) continue;
        out.append(s.substr(last, ph.pos - last));
        out.append(it->second);
        last = ph.pos + ph.len;
    }
    out.append(s.substr(last));
    return out;
}

bool has_bracketed_number(std::string_view s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '[') continue;
        std::size_t j = i + 1;
        while (j < s.size() && s[j] == ' ') ++j;
        std::size_t d = j;
        while (j < s.size() && s[j] >= '0' && s[j] <= '9') ++j;
        if (j == d) continue;
        while (j < s.size() && s[j] == ' ') ++j;
        if (j < s.size() && s[j] == ']') return true;
    }
    return false;
}

void check_section(std::string_view section, std::string_view s,
                   const std::set<std::string>& allowed, const std::set<std::string>& required) {
    std::set<std::string> present;
    for (const auto& ph : find_placeholders(s)) {
        if (!allowed.count(ph.name)) {
            throw ConfigError("unknown placeholder {" + ph.name + "} in " + std::string(section));
        }
        present.insert(ph.name);
    }
    for (const auto& r : required) {
        if (!present.count(r)) {
            throw ConfigError("missing placeholder {" + r + "} in " + std::string(section));
        }
    }
    if (has_bracketed_number(s)) {
        throw ConfigError(std::string(section) +
                          " contains a literal bracketed number, which would collide with "
                          "passage identifiers");
    }
}

std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string_view::npos;
         pos = hay.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

RenderedPrompt render_with(const PromptTemplate& tmpl, const Query& query,
                           std::span<const Passage* const> window, std::size_t per_passage_tokens,
                           const TokenCounter& counter) {
    const std::string count = std::to_string(window.size());
    const std::map<std::string, std::string_view> header_vars{{"query", query.text},
                                                              {"count", count}};
    RenderedPrompt out;
    out.kind = tmpl.kind;
    out.passage_count = window.size();
    out.system = substitute(tmpl.system_text, header_vars);

    for (std::size_t i = 0; i < window.size(); ++i) {
        const Passage& p = *window[i];
        const std::string index = std::to_string(i + 1);
        const std::string body = truncate_to_budget(p.text, per_passage_tokens, counter);
        const std::string_view title = p.title ? std::string_view(*p.title) : std::string_view{};
        out.user += substitute(tmpl.passage_text,
                               {{"index", index}, {"title", title}, {"text", body}});
        out.user += '\n';
    }
    out.user += '\n';
    out.user += substitute(tmpl.instruction_text, header_vars);
    return out;
}

}  // namespace

std::string_view to_string(JudgeKind kind) {
    return kind == JudgeKind::ranking ? "ranking" : "selection";
}

JudgeKind judge_kind_from_string(std::string_view name) {
    if (name == "ranking") return JudgeKind::ranking;
    if (name == "selection") return JudgeKind::selection;
    throw ConfigError("unknown judge kind '" + std::string(name) + "'");
}

void validate_template(const PromptTemplate& tmpl) {
    const std::set<std::string> header{"query", "count"};
    check_section("system", tmpl.system_text, header, {});
    check_section("instruction", tmpl.instruction_text, header, {"query"});
    check_section("passage", tmpl.passage_text, {"index", "title", "text"}, {"index", "text"});
    if (count_occurrences(tmpl.passage_text, "[{index}]") != 1 ||
        count_occurrences(tmpl.passage_text, "{index}") != 1) {
        throw ConfigError("passage text must contain the identifier \"[{index}]\" exactly once");
    }
}

TemplateSet default_templates() {
    TemplateSet set{
        {JudgeKind::ranking, std::string(kRankingSystem), std::string(kPassage),
         std::string(kRankingInstruction)},
        {JudgeKind::selection, std::string(kSelectionSystem), std::string(kPassage),
         std::string(kSelectionInstruction)},
    };
    return set;
}

TemplateSet parse_templates(std::string_view content) {
    static const std::set<std::string> known{
        "system",  "system:ranking",      "system:selection",
        "passage", "instruction:ranking", "instruction:selection"};

    std::map<std::string, std::string> sections;
    std::string current;
    std::vector<std::string_view> body;
    auto flush = [&] {
        if (current.empty()) return;
        while (!body.empty() && text::trim(body.front()).empty()) body.erase(body.begin());
        while (!body.empty() && text::trim(body.back()).empty()) body.pop_back();
        std::string joined;
        for (std::size_t i = 0; i < body.size(); ++i) {
            if (i) joined += '\n';
            joined += body[i];
        }
        if (!sections.emplace(current, std::move(joined)).second) {
            throw ConfigError("duplicate template section [" + current + "]");
        }
        body.clear();
    };

    std::size_t line_no = 0;
    for (std::string_view line : text::split_lines(content)) {
        ++line_no;
        std::string_view t = text::trim(line);
        const bool header = t.size() > 2 && t.front() == '[' && t.back() == ']' &&
                            std::all_of(t.begin() + 1, t.end() - 1, [](char c) {
                                return (c >= 'a' && c <= 'z') || c == ':' || c == '_';
                            });
        if (header) {
            std::string name(t.substr(1, t.size() - 2));
            if (!known.count(name)) {
                throw ConfigError("unknown template section [" + name + "] at line " +
                                  std::to_string(line_no));
            }
            flush();
            current = std::move(name);
            continue;
        }
        if (current.empty()) {
            if (!t.empty()) {
                throw ConfigError("text before the first section at line " +
                                  std::to_string(line_no));
            }
            continue;
        }
        body.push_back(line);
    }
    flush();

    TemplateSet set = default_templates();
    auto apply = [&](const char* name, std::string& field) {
        if (auto it = sections.find(name); it != sections.end()) field = it->second;
    };
    apply("system", set.ranking.system_text);
    apply("system", set.selection.system_text);
    apply("system:ranking", set.ranking.system_text);
    apply("system:selection", set.selection.system_text);
    apply("passage", set.ranking.passage_text);
    apply("passage", set.selection.passage_text);
    apply("instruction:ranking", set.ranking.instruction_text);
    apply("instruction:selection", set.selection.instruction_text);
    validate_template(set.ranking);
    validate_template(set.selection);
    return set;
}

TemplateSet load_templates(const std::optional<std::filesystem::path>& path) {
    if (!path) return default_templates();
    try {
        return parse_templates(read_file(*path));
    } catch (const InputError& e) {
        throw ConfigError(e.what());
    }
}

std::size_t CharApproxCounter::count(std::string_view text) const {
    const std::size_t n = text::utf8_length(text);
    return (n + chars_per_token_ - 1) / chars_per_token_;
}

std::string truncate_to_budget(std::string_view text, std::size_t max_tokens,
                               const TokenCounter& counter) {
    if (counter.count(text) <= max_tokens) return std::string(text);

    // Word-end boundaries: prefixes ending right before a whitespace run.
    std::vector<std::size_t> cuts;
    for (std::size_t i = 1; i < text.size(); ++i) {
        if (text::is_space(text[i]) && !text::is_space(text[i - 1])) cuts.push_back(i);
    }
    auto fits = [&](std::size_t end) { return counter.count(text.substr(0, end)) <= max_tokens; };

    auto it = std::partition_point(cuts.begin(), cuts.end(), fits);
    if (it != cuts.begin()) {
        return std::string(text::trim(text.substr(0, *std::prev(it))));
    }

    // No whole word fits: cut inside the first word at a scalar boundary.
    std::vector<std::size_t> scalar_ends;
    for (std::size_t i = 1; i <= text.size(); ++i) {
        if (text::utf8_floor(text, i) == i) scalar_ends.push_back(i);
    }
    auto sit = std::partition_point(scalar_ends.begin(), scalar_ends.end(), fits);
    if (sit == scalar_ends.begin()) return {};
    return std::string(text::trim(text.substr(0, *std::prev(sit))));
}

std::size_t RenderedPrompt::char_count() const {
    return text::utf8_length(system) + text::utf8_length(user);
}

std::string RenderedPrompt::key() const {
    std::string material = system;
    material += '\x1f';
    material += user;
    return sha256_hex(material);
}

RenderedPrompt render(const PromptTemplate& tmpl, const Query& query,
                      std::span<const Passage* const> window, const PromptBudget& budget) {
    if (window.empty()) throw std::invalid_argument("render: empty window");
    if (budget.per_passage_tokens == 0) {
        throw ConfigError("per-passage token budget must be at least 1");
    }
    static const CharApproxCounter default_counter;
    const TokenCounter& counter = budget.counter ? *budget.counter : default_counter;

    RenderedPrompt full = render_with(tmpl, query, window, budget.per_passage_tokens, counter);
    if (budget.max_prompt_chars == 0 || full.char_count() <= budget.max_prompt_chars) {
        return full;
    }
    // Shrink the per-passage budget until the whole prompt fits.
    std::size_t lo = 1, hi = budget.per_passage_tokens - 1;
    std::optional<RenderedPrompt> best;
    while (lo <= hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        RenderedPrompt p = render_with(tmpl, query, window, mid, counter);
        if (p.char_count() <= budget.max_prompt_chars) {
            best = std::move(p);
            lo = mid + 1;
        } else {
            hi = mid - 1;
        }
    }
    if (!best) {
        throw ConfigError("prompt budget of " + std::to_string(budget.max_prompt_chars) +
                          " characters cannot hold the query and " +
                          std::to_string(window.size()) + " passages");
    }
    return *std::move(best);
}

}  // namespace winsel
