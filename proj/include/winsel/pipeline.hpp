#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "winsel/corpus.hpp"
#include "winsel/metrics.hpp"
#include "winsel/windowing.hpp"

namespace winsel {

struct RerankOutcome {
    std::string query_id;
    /// Empty when the query was aborted.
    std::vector<std::string> ranked;
    WindowTrace trace;
    std::optional<std::string> error;
};

struct SelectOutcome {
    std::string query_id;
    std::vector<std::string> selected;
    std::vector<std::string> pseudo_answers;
    WindowTrace trace;
    std::optional<std::string> error;
};

template <typename Outcome>
std::vector<std::string> aborted_ids(const std::vector<Outcome>& outcomes) {
    std::vector<std::string> ids;
    for (const auto& o : outcomes) {
        if (o.error) ids.push_back(o.query_id);
    }
    return ids;
}

/// Runs the ranking engine over every run query, `parallel` queries at a
/// time. Judge transport failures abort only the affected query. Output is
/// ordered by query_id.
std::vector<RerankOutcome> rerank_all(const QuerySet& queries, const Run& run,
                                      const WindowEngine& engine, const WindowConfig& cfg,
                                      std::size_t parallel = 1);

std::vector<SelectOutcome> select_all(const QuerySet& queries, const Run& run,
                                      const WindowEngine& engine, const WindowConfig& cfg,
                                      std::size_t parallel = 1);

/// Completed rankings as a run with score 1/rank.
Run ranked_run(const std::vector<RerankOutcome>& outcomes);

/// The first k ids of each completed ranking (fewer if the list is shorter).
Selections top_k(const std::vector<RerankOutcome>& outcomes, std::size_t k);

Selections selections_of(const std::vector<SelectOutcome>& outcomes);

/// Selection JSONL: {query_id, selected, pseudo_answers, windows}.
void write_selections(std::ostream& out, const std::vector<SelectOutcome>& outcomes);
/// Same layout for top-k cuts of a ranking, with the ranking's window count.
void write_top_k(std::ostream& out, const std::vector<RerankOutcome>& outcomes, std::size_t k);

nlohmann::json window_json(const WindowTrace& trace, const WindowRecord& record);
/// One line per window, queries in the given order.
void write_traces(std::ostream& out, const std::vector<const WindowTrace*>& traces);

}  // namespace winsel
