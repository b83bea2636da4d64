#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "winsel/corpus.hpp"

namespace winsel {

enum class JudgeKind { ranking, selection };

std::string_view to_string(JudgeKind kind);
JudgeKind judge_kind_from_string(std::string_view name);

/// A prompt layout for one judge kind.
///
/// Placeholders: `{query}` and `{count}` in the system and instruction text;
/// `{index}`, `{title}` and `{text}` in the per-passage text. The per-passage
/// text must contain `[{index}]` exactly once, and no static text may carry a
/// literal bracketed number, so that a rendered window of n passages holds
/// the identifiers [1]..[n] exactly once each.
struct PromptTemplate {
    JudgeKind kind = JudgeKind::ranking;
    std::string system_text;
    std::string passage_text;
    std::string instruction_text;
};

struct TemplateSet {
    PromptTemplate ranking;
    PromptTemplate selection;

    const PromptTemplate& get(JudgeKind kind) const {
        return kind == JudgeKind::ranking ? ranking : selection;
    }
};

/// Throws ConfigError naming the offending placeholder or text.
void validate_template(const PromptTemplate& tmpl);

TemplateSet default_templates();

/// Parses a sectioned template file. Recognized sections: [system],
/// [system:ranking], [system:selection], [passage], [instruction:ranking],
/// [instruction:selection]. Missing sections keep their defaults.
TemplateSet parse_templates(std::string_view content);
TemplateSet load_templates(const std::optional<std::filesystem::path>& path);

/// Token counting plug-in used for passage truncation.
class TokenCounter {
public:
    virtual ~TokenCounter() = default;
    virtual std::size_t count(std::string_view text) const = 0;
};

/// ceil(unicode scalars / chars_per_token).
class CharApproxCounter final : public TokenCounter {
public:
    explicit CharApproxCounter(std::size_t chars_per_token = 4) : chars_per_token_(chars_per_token) {}
    std::size_t count(std::string_view text) const override;

private:
    std::size_t chars_per_token_;
};

struct PromptBudget {
    std::size_t per_passage_tokens = 300;
    /// Upper bound on rendered prompt length in unicode scalars; 0 disables it.
    std::size_t max_prompt_chars = 0;
    /// Defaults to CharApproxCounter(4) when null.
    const TokenCounter* counter = nullptr;
};

/// Longest prefix of `text` that fits in `max_tokens`, cut at a whitespace
/// boundary when one fits, otherwise at a unicode scalar boundary.
std::string truncate_to_budget(std::string_view text, std::size_t max_tokens,
                               const TokenCounter& counter);

struct RenderedPrompt {
    JudgeKind kind = JudgeKind::ranking;
    std::string system;
    std::string user;
    std::size_t passage_count = 0;

    std::size_t char_count() const;
    /// Hex SHA-256 over system, a 0x1F separator, and user.
    std::string key() const;
};

RenderedPrompt render(const PromptTemplate& tmpl, const Query& query,
                      std::span<const Passage* const> window, const PromptBudget& budget);

}  // namespace winsel
