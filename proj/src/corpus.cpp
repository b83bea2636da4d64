#include "winsel/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "winsel/error.hpp"
#include "winsel/text.hpp"

namespace winsel {
namespace {

using nlohmann::json;

std::string at_line(std::size_t line) { return " at line " + std::to_string(line); }

template <typename Fn>
void for_each_line(std::string_view content, Fn&& fn) {
    std::size_t line_no = 0;
    for (std::string_view line : text::split_lines(content)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        fn(line, line_no);
    }
}

json parse_json_line(std::string_view line, std::size_t line_no) {
    try {
        json obj = json::parse(line);
        if (!obj.is_object()) throw InputError("expected a JSON object" + at_line(line_no));
        return obj;
    } catch (const json::parse_error& e) {
        throw InputError("malformed JSON" + at_line(line_no) + ": " + e.what());
    }
}

std::string string_field(const json& obj, std::initializer_list<const char*> names,
                         std::size_t line_no) {
    for (const char* name : names) {
        auto it = obj.find(name);
        if (it == obj.end()) continue;
        if (it->is_string()) return it->get<std::string>();
        if (it->is_number_integer()) return std::to_string(it->get<long long>());
        throw InputError(std::string("field ") + name + " is not a string" + at_line(line_no));
    }
    throw InputError(std::string("missing field ") + *names.begin() + at_line(line_no));
}

int parse_int(std::string_view field, const char* what, std::size_t line_no) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw InputError(std::string("non-numeric ") + what + " '" + std::string(field) + "'" +
                         at_line(line_no));
    }
    return value;
}

double parse_double(std::string_view field, const char* what, std::size_t line_no) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw InputError(std::string("non-numeric ") + what + " '" + std::string(field) + "'" +
                         at_line(line_no));
    }
    return value;
}

}  // namespace

TextFormat format_from_extension(const std::filesystem::path& path) {
    auto ext = text::ascii_lower(path.extension().string());
    return (ext == ".jsonl" || ext == ".json") ? TextFormat::jsonl : TextFormat::tsv;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void Corpus::add(Passage passage) {
    if (passage.doc_id.empty()) throw InputError("empty doc_id");
    if (text::trim(passage.text).empty()) {
        throw InputError("empty text for doc_id " + passage.doc_id);
    }
    if (index_.count(passage.doc_id)) throw InputError("duplicate doc_id " + passage.doc_id);
    index_.emplace(passage.doc_id, passages_.size());
    passages_.push_back(std::move(passage));
}

const Passage* Corpus::find(std::string_view doc_id) const {
    auto it = index_.find(std::string(doc_id));
    return it == index_.end() ? nullptr : &passages_[it->second];
}

const Passage& Corpus::at(std::string_view doc_id) const {
    const Passage* p = find(doc_id);
    if (!p) throw InputError("unknown doc_id " + std::string(doc_id));
    return *p;
}

void QuerySet::add(Query query) {
    if (query.query_id.empty()) throw InputError("empty query_id");
    if (index_.count(query.query_id)) throw InputError("duplicate query_id " + query.query_id);
    index_.emplace(query.query_id, queries_.size());
    queries_.push_back(std::move(query));
}

const Query* QuerySet::find(std::string_view query_id) const {
    auto it = index_.find(std::string(query_id));
    return it == index_.end() ? nullptr : &queries_[it->second];
}

std::vector<std::string> CandidateList::doc_ids() const {
    std::vector<std::string> ids;
    ids.reserve(entries.size());
    for (const auto& e : entries) ids.push_back(e.doc_id);
    return ids;
}

void Qrels::set(const std::string& query_id, const std::string& doc_id, int grade) {
    grades_[query_id][doc_id] = grade;
}

int Qrels::grade(std::string_view query_id, std::string_view doc_id) const {
    auto q = grades_.find(query_id);
    if (q == grades_.end()) return 0;
    auto d = q->second.find(std::string(doc_id));
    return d == q->second.end() ? 0 : d->second;
}

bool Qrels::has_query(std::string_view query_id) const {
    return grades_.find(query_id) != grades_.end();
}

const std::map<std::string, int>* Qrels::judgments(std::string_view query_id) const {
    auto q = grades_.find(query_id);
    return q == grades_.end() ? nullptr : &q->second;
}

Corpus load_corpus(const std::filesystem::path& path, TextFormat format) {
    const std::string content = read_file(path);
    Corpus corpus;
    for_each_line(content, [&](std::string_view line, std::size_t line_no) {
        Passage p;
        if (format == TextFormat::jsonl) {
            json obj = parse_json_line(line, line_no);
            p.doc_id = string_field(obj, {"doc_id", "_id"}, line_no);
            p.text = string_field(obj, {"text"}, line_no);
            if (auto t = obj.find("title"); t != obj.end() && t->is_string()) {
                p.title = t->get<std::string>();
            }
        } else {
            auto tab = line.find('\t');
            if (tab == std::string_view::npos) {
                throw InputError("missing field text" + at_line(line_no));
            }
            p.doc_id = std::string(line.substr(0, tab));
            p.text = std::string(line.substr(tab + 1));
        }
        if (p.doc_id.empty()) throw InputError("missing field doc_id" + at_line(line_no));
        if (text::trim(p.text).empty()) throw InputError("empty text" + at_line(line_no));
        if (corpus.find(p.doc_id)) {
            throw InputError("duplicate doc_id " + p.doc_id + at_line(line_no));
        }
        corpus.add(std::move(p));
    });
    return corpus;
}

QuerySet load_queries(const std::filesystem::path& path, TextFormat format) {
    const std::string content = read_file(path);
    QuerySet queries;
    for_each_line(content, [&](std::string_view line, std::size_t line_no) {
        Query q;
        if (format == TextFormat::jsonl) {
            json obj = parse_json_line(line, line_no);
            q.query_id = string_field(obj, {"query_id", "_id"}, line_no);
            q.text = string_field(obj, {"text"}, line_no);
        } else {
            auto tab = line.find('\t');
            if (tab == std::string_view::npos) {
                throw InputError("missing field text" + at_line(line_no));
            }
            q.query_id = std::string(line.substr(0, tab));
            q.text = std::string(line.substr(tab + 1));
        }
        if (queries.find(q.query_id)) {
            throw InputError("duplicate query_id " + q.query_id + at_line(line_no));
        }
        queries.add(std::move(q));
    });
    return queries;
}

Run load_run(const std::filesystem::path& path, std::size_t max_depth,
             std::vector<std::string>* warnings) {
    return parse_run(read_file(path), max_depth, warnings);
}

Run parse_run(std::string_view content, std::size_t max_depth,
              std::vector<std::string>* warnings) {
    if (max_depth == 0) throw ConfigError("max_depth must be positive");
    auto warn = [&](std::string msg) {
        if (warnings) warnings->push_back(std::move(msg));
    };

    Run run;
    std::map<std::string, std::set<std::string>> seen;
    for_each_line(content, [&](std::string_view line, std::size_t line_no) {
        auto f = text::split_ws(line);
        if (f.size() != 6) {
            throw InputError("expected 6 columns (qid Q0 docid rank score tag)" +
                             at_line(line_no));
        }
        std::string qid(f[0]);
        std::string did(f[2]);
        CandidateEntry e{did, parse_double(f[4], "score", line_no),
                         parse_int(f[3], "rank", line_no)};
        if (!seen[qid].insert(did).second) {
            throw InputError("duplicate (" + qid + ", " + did + ")" + at_line(line_no));
        }
        auto& list = run[qid];
        list.query_id = qid;
        list.entries.push_back(std::move(e));
    });

    for (auto& [qid, list] : run) {
        auto& entries = list.entries;
        if (!std::is_sorted(entries.begin(), entries.end(),
                            [](const auto& a, const auto& b) { return a.rank < b.rank; })) {
            warn(qid + ": line order disagrees with rank order; rank order used");
            std::stable_sort(entries.begin(), entries.end(),
                             [](const auto& a, const auto& b) { return a.rank < b.rank; });
        }
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].rank != static_cast<int>(i + 1)) {
                throw InputError(qid + ": non-contiguous rank " +
                                 std::to_string(entries[i].rank) + " (expected " +
                                 std::to_string(i + 1) + ")");
            }
        }
        for (std::size_t i = 1; i < entries.size(); ++i) {
            if (entries[i].score > entries[i - 1].score) {
                warn(qid + ": score increases at rank " + std::to_string(entries[i].rank));
                break;
            }
        }
        if (entries.size() > max_depth) entries.resize(max_depth);
    }
    return run;
}

Qrels load_qrels(const std::filesystem::path& path) { return parse_qrels(read_file(path)); }

Qrels parse_qrels(std::string_view content) {
    Qrels qrels;
    std::set<std::pair<std::string, std::string>> seen;
    for_each_line(content, [&](std::string_view line, std::size_t line_no) {
        auto f = text::split_ws(line);
        if (f.size() != 4) {
            throw InputError("expected 4 columns (qid iter docid grade)" + at_line(line_no));
        }
        int grade = parse_int(f[3], "grade", line_no);
        if (grade < 0) throw InputError("negative grade" + at_line(line_no));
        std::string qid(f[0]), did(f[2]);
        if (!seen.emplace(qid, did).second) {
            throw InputError("duplicate qrels entry (" + qid + ", " + did + ")" +
                             at_line(line_no));
        }
        qrels.set(qid, did, grade);
    });
    return qrels;
}

GoldAnswers load_answers(const std::filesystem::path& path) {
    const std::string content = read_file(path);
    GoldAnswers gold;
    for_each_line(content, [&](std::string_view line, std::size_t line_no) {
        json obj = parse_json_line(line, line_no);
        std::string qid = string_field(obj, {"query_id"}, line_no);
        auto it = obj.find("answers");
        if (it == obj.end() || !it->is_array()) {
            throw InputError("missing field answers" + at_line(line_no));
        }
        std::vector<std::string> answers;
        for (const auto& a : *it) {
            if (!a.is_string()) throw InputError("non-string answer" + at_line(line_no));
            answers.push_back(a.get<std::string>());
        }
        if (answers.empty()) throw InputError("empty answers for " + qid + at_line(line_no));
        if (!gold.emplace(qid, std::move(answers)).second) {
            throw InputError("duplicate query_id " + qid + at_line(line_no));
        }
    });
    return gold;
}

GoldEvidence load_evidence(const std::filesystem::path& path) {
    const std::string content = read_file(path);
    GoldEvidence gold;
    for_each_line(content, [&](std::string_view line, std::size_t line_no) {
        json obj = parse_json_line(line, line_no);
        std::string qid = string_field(obj, {"query_id"}, line_no);
        auto it = obj.find("evidence");
        if (it == obj.end() || !it->is_array()) {
            throw InputError("missing field evidence" + at_line(line_no));
        }
        std::set<std::string> ids;
        for (const auto& d : *it) {
            if (!d.is_string()) throw InputError("non-string doc_id" + at_line(line_no));
            ids.insert(d.get<std::string>());
        }
        if (ids.empty()) throw InputError("empty evidence for " + qid + at_line(line_no));
        if (!gold.emplace(qid, std::move(ids)).second) {
            throw InputError("duplicate query_id " + qid + at_line(line_no));
        }
    });
    return gold;
}

GoldEvidence evidence_from_qrels(const Qrels& qrels, int min_grade) {
    GoldEvidence gold;
    for (const auto& [qid, docs] : qrels.all()) {
        std::set<std::string> ids;
        for (const auto& [did, grade] : docs) {
            if (grade >= min_grade) ids.insert(did);
        }
        if (!ids.empty()) gold.emplace(qid, std::move(ids));
    }
    return gold;
}

void write_run(std::ostream& out, const Run& run, std::string_view tag) {
    for (const auto& [qid, list] : run) {
        for (const auto& e : list.entries) {
            out << qid << " Q0 " << e.doc_id << ' ' << e.rank << ' '
                << text::format_double(e.score) << ' ' << tag << '\n';
        }
    }
}

void check_resolved(const Corpus& corpus, const Run& run) {
    std::vector<std::string> missing;
    for (const auto& [qid, list] : run) {
        for (const auto& e : list.entries) {
            if (!corpus.find(e.doc_id)) missing.push_back(qid + ":" + e.doc_id);
        }
    }
    if (missing.empty()) return;
    std::string msg = std::to_string(missing.size()) + " candidate doc_id(s) not in corpus:";
    for (const auto& m : missing) msg += " " + m;
    throw InputError(msg);
}

}  // namespace winsel
