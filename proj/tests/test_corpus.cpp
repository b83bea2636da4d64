#include <doctest.h>

#include <sstream>

#include "test_support.hpp"
#include "winsel/corpus.hpp"
#include "winsel/error.hpp"

using namespace winsel;
using winsel::testing::TempDir;

TEST_CASE("load_corpus reads JSONL records") {
    TempDir tmp;
    auto p = tmp.write("c.jsonl",
                       "{\"doc_id\":\"d1\",\"text\":\"one\"}\n"
                       "{\"_id\":\"d2\",\"text\":\"two\",\"title\":\"T\"}\n"
                       "\n"
                       "{\"doc_id\":\"d3\",\"text\":\"three\"}\n");
    Corpus c = load_corpus(p, TextFormat::jsonl);
    CHECK(c.size() == 3);
    REQUIRE(c.find("d2"));
    CHECK(c.find("d2")->title == "T");
    CHECK(c.find("d9") == nullptr);
}

TEST_CASE("load_corpus rejects duplicates with id and line") {
    TempDir tmp;
    auto p = tmp.write("c.jsonl",
                       "{\"doc_id\":\"d1\",\"text\":\"one\"}\n"
                       "{\"doc_id\":\"d1\",\"text\":\"again\"}\n");
    CHECK_THROWS_WITH_AS(load_corpus(p, TextFormat::jsonl), "duplicate doc_id d1 at line 2",
                         InputError);
}

TEST_CASE("load_corpus reports missing fields with line number") {
    TempDir tmp;
    auto p = tmp.write("c.jsonl", "{\"doc_id\":\"d1\",\"text\":\"x\"}\n{\"doc_id\":\"d2\"}\n");
    CHECK_THROWS_WITH_AS(load_corpus(p, TextFormat::jsonl), "missing field text at line 2",
                         InputError);
    auto blank = tmp.write("b.jsonl", "{\"doc_id\":\"d1\",\"text\":\"   \"}\n");
    CHECK_THROWS_AS(load_corpus(blank, TextFormat::jsonl), InputError);
}

TEST_CASE("load_corpus maps TSV rows") {
    TempDir tmp;
    auto p = tmp.write("c.tsv", "d9\tHello world\n");
    Corpus c = load_corpus(p, TextFormat::tsv);
    REQUIRE(c.size() == 1);
    const Passage& d = c.at("d9");
    CHECK(d.doc_id == "d9");
    CHECK(d.text == "Hello world");
    CHECK_FALSE(d.title.has_value());
    CHECK(format_from_extension("x.tsv") == TextFormat::tsv);
    CHECK(format_from_extension("x.JSONL") == TextFormat::jsonl);
}

TEST_CASE("parse_run maps fields and orders by rank") {
    std::vector<std::string> warnings;
    Run run = parse_run("q1 Q0 d7 1 12.5 bm25\n", 100, &warnings);
    REQUIRE(run.count("q1"));
    const auto& e = run.at("q1").entries;
    REQUIRE(e.size() == 1);
    CHECK(e[0] == CandidateEntry{"d7", 12.5, 1});
    CHECK(warnings.empty());

    run = parse_run("q1 Q0 b 2 1.0 t\nq1 Q0 a 1 2.0 t\n", 100, &warnings);
    CHECK(run.at("q1").doc_ids() == std::vector<std::string>{"a", "b"});
    CHECK(warnings.size() == 1);
}

TEST_CASE("parse_run truncates to max_depth") {
    std::string content;
    for (int r = 1; r <= 150; ++r) {
        content += "q1 Q0 d" + std::to_string(r) + " " + std::to_string(r) + " " +
                   std::to_string(200 - r) + " bm25\n";
    }
    Run run = parse_run(content, 100);
    CHECK(run.at("q1").entries.size() == 100);
    CHECK(run.at("q1").entries.back().doc_id == "d100");
}

TEST_CASE("parse_run errors") {
    CHECK_THROWS_WITH_AS(parse_run("q1 Q0 a 1 1 t\nq1 Q0 b 3 0.5 t\n"),
                         doctest::Contains("non-contiguous rank"), InputError);
    CHECK_THROWS_WITH_AS(parse_run("q1 Q0 a x 1 t\n"), doctest::Contains("non-numeric rank"),
                         InputError);
    CHECK_THROWS_WITH_AS(parse_run("q1 Q0 a 1 abc t\n"), doctest::Contains("non-numeric score"),
                         InputError);
    CHECK_THROWS_WITH_AS(parse_run("q1 Q0 a 1 2 t\nq1 Q0 a 2 1 t\n"),
                         doctest::Contains("duplicate (q1, a)"), InputError);
    CHECK_THROWS_AS(parse_run("q1 Q0 a 1\n"), InputError);
}

TEST_CASE("parse_run flags increasing scores but keeps file order") {
    std::vector<std::string> warnings;
    Run run = parse_run("q1 Q0 a 1 1.0 t\nq1 Q0 b 2 5.0 t\n", 100, &warnings);
    CHECK(run.at("q1").doc_ids() == std::vector<std::string>{"a", "b"});
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("score increases") != std::string::npos);
}

TEST_CASE("run round-trips through write_run") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> score(-50.0, 50.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::string content;
        for (int q = 0; q < 3; ++q) {
            std::vector<double> scores(1 + rng() % 12);
            for (auto& s : scores) s = score(rng);
            std::sort(scores.rbegin(), scores.rend());
            for (std::size_t i = 0; i < scores.size(); ++i) {
                std::ostringstream line;
                line.precision(17);
                line << "q" << q << " Q0 doc" << q << "_" << i << " " << i + 1 << " " << scores[i]
                     << " tag\n";
                content += line.str();
            }
        }
        Run first = parse_run(content);
        std::ostringstream out;
        write_run(out, first, "tag");
        CHECK(parse_run(out.str()) == first);
    }
}

TEST_CASE("qrels grades and defaults") {
    Qrels q = parse_qrels("q1 0 d7 2\nq1 0 d8 0\n");
    CHECK(q.grade("q1", "d7") == 2);
    CHECK(q.grade("q1", "d9") == 0);
    CHECK(q.grade("q2", "d7") == 0);
    REQUIRE(q.judgments("q1"));
    CHECK(q.judgments("q1")->size() == 2);  // grade-0 lines retained
    CHECK_THROWS_AS(parse_qrels("q1 0 d7 -1\n"), InputError);
    CHECK_THROWS_AS(parse_qrels("q1 0 d7 x\n"), InputError);
}

TEST_CASE("gold evidence from qrels uses grade >= 1") {
    Qrels q = parse_qrels("q1 0 a 2\nq1 0 b 0\nq1 0 c 1\nq2 0 z 0\n");
    GoldEvidence g = evidence_from_qrels(q);
    CHECK(g.size() == 1);
    CHECK(g.at("q1") == std::set<std::string>{"a", "c"});
}

TEST_CASE("gold answers and evidence files") {
    TempDir tmp;
    auto a = tmp.write("a.jsonl", "{\"query_id\":\"q1\",\"answers\":[\"x\",\"y\"]}\n");
    CHECK(load_answers(a).at("q1").size() == 2);
    auto bad = tmp.write("b.jsonl", "{\"query_id\":\"q1\",\"answers\":[]}\n");
    CHECK_THROWS_AS(load_answers(bad), InputError);
    auto e = tmp.write("e.jsonl", "{\"query_id\":\"q1\",\"evidence\":[\"d1\",\"d2\"]}\n");
    CHECK(load_evidence(e).at("q1").size() == 2);
}

TEST_CASE("check_resolved lists every unresolved id") {
    Corpus c;
    c.add({"a", "text", std::nullopt});
    Run run = parse_run("q1 Q0 a 1 3 t\nq1 Q0 b 2 2 t\nq2 Q0 c 1 1 t\n");
    try {
        check_resolved(c, run);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("q1:b") != std::string::npos);
        CHECK(msg.find("q2:c") != std::string::npos);
        CHECK(msg.find("q1:a") == std::string::npos);
    }
}

TEST_CASE("queries load from JSONL and reject duplicates") {
    TempDir tmp;
    auto p = tmp.write("q.jsonl", "{\"query_id\":\"q1\",\"text\":\"who?\"}\n");
    CHECK(load_queries(p, TextFormat::jsonl).find("q1")->text == "who?");
    auto d = tmp.write("d.tsv", "q1\ta\nq1\tb\n");
    CHECK_THROWS_AS(load_queries(d, TextFormat::tsv), InputError);
}
