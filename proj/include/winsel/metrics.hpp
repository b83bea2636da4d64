#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "winsel/corpus.hpp"

namespace winsel {

/// SQuAD-style answer normalization: lowercase, drop ASCII punctuation,
/// drop the articles a/an/the, split on whitespace.
std::vector<std::string> normalize_answer(std::string_view text);

struct AnswerScore {
    double em = 0.0;
    double f1 = 0.0;
};

/// Max over references of exact match and token-bag F1. Throws
/// std::invalid_argument when `gold` is empty.
AnswerScore answer_em_f1(std::string_view prediction, const std::vector<std::string>& gold);

using Predictions = std::map<std::string, std::string>;
/// JSONL {query_id, answer}.
Predictions load_predictions(const std::filesystem::path& path);

using Selections = std::map<std::string, std::vector<std::string>>;
/// Selection JSONL {query_id, selected: [...], ...}.
Selections load_selections(const std::filesystem::path& path);

struct EvidenceCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

struct EvidenceScores {
    /// Per-query means.
    double recall = 0.0;
    double precision = 0.0;
    /// F1 over counts pooled across queries.
    double micro_f1 = 0.0;
    double micro_recall = 0.0;
    double micro_precision = 0.0;
    std::size_t queries = 0;
};

EvidenceCounts evidence_counts(const std::vector<std::string>& selected,
                               const std::set<std::string>& gold);

/// Scores every query in `gold`. Queries without a selection count as an
/// empty selection. Precision of an empty selection is 0.
EvidenceScores evidence_scores(const Selections& selected, const GoldEvidence& gold);

/// nDCG@k per query with gain 2^g - 1 and discount log2(i + 1).
double ndcg_at_k(std::span<const std::string> ranking, const std::map<std::string, int>* judged,
                 std::size_t k);

/// Mean nDCG@k over the run's queries; queries absent from qrels score 0.
double mean_ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k);

struct QueryMetrics {
    std::optional<AnswerScore> answer;
    bool answer_missing = false;
    std::optional<EvidenceCounts> evidence;
    bool selection_missing = false;
    std::map<std::size_t, double> ndcg;
};

struct MetricsInputs {
    const Predictions* predictions = nullptr;
    const GoldAnswers* answers = nullptr;
    const Selections* selections = nullptr;
    const GoldEvidence* evidence = nullptr;
    const Run* run = nullptr;
    const Qrels* qrels = nullptr;
    std::vector<std::size_t> ndcg_cuts;
};

/// Per-query records plus aggregates recomputed from them.
struct MetricsReport {
    std::map<std::string, QueryMetrics> per_query;

    std::optional<double> mean_em;
    std::optional<double> mean_f1;
    std::size_t answer_queries = 0;
    std::vector<std::string> predictions_without_gold;

    std::optional<EvidenceScores> evidence;
    std::vector<std::string> selections_without_gold;

    std::map<std::size_t, double> ndcg;
    std::size_t ndcg_queries = 0;

    nlohmann::json to_json() const;
    /// One row per query; empty cells where a metric does not apply.
    std::string to_tsv() const;
};

MetricsReport evaluate(const MetricsInputs& inputs);

}  // namespace winsel
