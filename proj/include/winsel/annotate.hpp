#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "winsel/corpus.hpp"
#include "winsel/judge.hpp"
#include "winsel/prompting.hpp"
#include "winsel/windowing.hpp"

namespace winsel {

/// Reasons a teacher generation is kept out of the training data.
enum class Defect { improper_format, missing_identifiers, repetitive, transport };

std::string_view to_string(Defect d);

struct Validation {
    bool pass = true;
    std::vector<Defect> defects;

    std::vector<std::string> names() const;
};

/// Strict check with no repair.
///
/// Ranking output must be exactly "[a] > [b] > ..." (improper_format), name
/// every identifier 1..n and nothing else (missing_identifiers), and name no
/// identifier twice (repetitive). Selection output must carry a pseudo-answer
/// and a clean "Selected: [a], [b]" / "Selected: none" line with in-range
/// identifiers (improper_format), again without repeats (repetitive).
Validation validate_generation(std::string_view text, JudgeKind kind, int n);

struct TrainingRecord {
    std::string query_id;
    JudgeKind kind = JudgeKind::ranking;
    RenderedPrompt prompt;
    std::string raw_text;
    /// Canonical teacher output; empty for failed records.
    std::string target_text;
    Validation validation;
    std::string error;
};

/// {messages: [system, user, assistant]} for a passing record.
nlohmann::json training_json(const TrainingRecord& record);
/// Audit line for a rejected record.
nlohmann::json rejected_json(const TrainingRecord& record);

/// Runs the teacher once per query over its top candidates (a single window,
/// so cfg.depth must not exceed cfg.window). Records come back ordered by
/// query_id regardless of `parallel`.
std::vector<TrainingRecord> annotate(const QuerySet& queries, const Run& run, const Corpus& corpus,
                                     Judge& teacher, JudgeKind kind, const WindowConfig& cfg,
                                     const TemplateSet& templates, const PromptBudget& budget,
                                     std::size_t parallel = 1);

}  // namespace winsel
