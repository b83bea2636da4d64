#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace winsel {

struct Passage {
    std::string doc_id;
    std::string text;
    std::optional<std::string> title;
};

struct Query {
    std::string query_id;
    std::string text;
};

enum class TextFormat { jsonl, tsv };

/// Picks jsonl for ".jsonl"/".json" extensions, tsv otherwise.
TextFormat format_from_extension(const std::filesystem::path& path);

/// Passages indexed by doc_id. Immutable once loaded.
class Corpus {
public:
    /// Throws InputError on duplicate doc_id or empty text.
    void add(Passage passage);

    const Passage* find(std::string_view doc_id) const;
    const Passage& at(std::string_view doc_id) const;
    std::size_t size() const { return passages_.size(); }
    const std::vector<Passage>& passages() const { return passages_; }

private:
    std::vector<Passage> passages_;
    std::unordered_map<std::string, std::size_t> index_;
};

class QuerySet {
public:
    void add(Query query);
    const Query* find(std::string_view query_id) const;
    std::size_t size() const { return queries_.size(); }
    const std::vector<Query>& queries() const { return queries_; }

private:
    std::vector<Query> queries_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct CandidateEntry {
    std::string doc_id;
    double score = 0.0;
    int rank = 0;

    bool operator==(const CandidateEntry&) const = default;
};

/// Ordered candidates for one query; ranks are 1..N.
struct CandidateList {
    std::string query_id;
    std::vector<CandidateEntry> entries;

    std::vector<std::string> doc_ids() const;
    bool operator==(const CandidateList&) const = default;
};

using Run = std::map<std::string, CandidateList>;

/// Graded judgments. Absent pairs have grade 0.
class Qrels {
public:
    void set(const std::string& query_id, const std::string& doc_id, int grade);
    int grade(std::string_view query_id, std::string_view doc_id) const;
    bool has_query(std::string_view query_id) const;
    const std::map<std::string, int>* judgments(std::string_view query_id) const;
    const std::map<std::string, std::map<std::string, int>, std::less<>>& all() const {
        return grades_;
    }

private:
    std::map<std::string, std::map<std::string, int>, std::less<>> grades_;
};

using GoldAnswers = std::map<std::string, std::vector<std::string>>;
using GoldEvidence = std::map<std::string, std::set<std::string>>;

Corpus load_corpus(const std::filesystem::path& path, TextFormat format);
QuerySet load_queries(const std::filesystem::path& path, TextFormat format);

/// Reads a TREC six-column run. Entries are ordered by file rank and cut to
/// max_depth per query. Non-fatal oddities (line order disagreeing with rank,
/// scores increasing with rank) are appended to `warnings` when provided.
Run load_run(const std::filesystem::path& path, std::size_t max_depth = 100,
             std::vector<std::string>* warnings = nullptr);
Run parse_run(std::string_view content, std::size_t max_depth = 100,
              std::vector<std::string>* warnings = nullptr);

Qrels load_qrels(const std::filesystem::path& path);
Qrels parse_qrels(std::string_view content);

GoldAnswers load_answers(const std::filesystem::path& path);
GoldEvidence load_evidence(const std::filesystem::path& path);

/// Gold evidence taken from qrels entries with grade >= min_grade. Queries
/// without any such entry are omitted.
GoldEvidence evidence_from_qrels(const Qrels& qrels, int min_grade = 1);

/// Writes lists in TREC run format, preserving entry scores and ranks.
void write_run(std::ostream& out, const Run& run, std::string_view tag);

/// Throws InputError listing every candidate doc_id missing from the corpus.
void check_resolved(const Corpus& corpus, const Run& run);

std::string read_file(const std::filesystem::path& path);

}  // namespace winsel
