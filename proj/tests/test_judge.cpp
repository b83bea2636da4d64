#include <doctest.h>

#include <numeric>
#include <random>
#include <set>

#include "test_support.hpp"
#include "winsel/error.hpp"
#include "winsel/judge.hpp"

using namespace winsel;
using winsel::testing::ScriptedJudge;

namespace {

RenderedPrompt prompt_for(std::size_t n, JudgeKind kind, std::string tag = "p") {
    RenderedPrompt p;
    p.kind = kind;
    p.system = "sys";
    p.user = std::move(tag);
    p.passage_count = n;
    return p;
}

std::vector<std::string> names(std::initializer_list<Repair> rs) {
    std::vector<std::string> out;
    for (Repair r : rs) out.emplace_back(to_string(r));
    return out;
}

std::string random_text(std::mt19937& rng) {
    static const std::vector<std::string> atoms{
        "[", "]", ">", ",", " ", "\n", "1", "2", "3", "17", "0", "-", "Selected:", "selected :",
        "none", "é", "中", "\xff", "[2]", "[ 4 ]", "99999999999999", "answer", "**", "\r\n"};
    std::string s;
    const int n = static_cast<int>(rng() % 24);
    for (int i = 0; i < n; ++i) s += atoms[rng() % atoms.size()];
    return s;
}

}  // namespace

TEST_CASE("oracle ranking sorts by grade, ties by window order") {
    Qrels q = parse_qrels("q 0 a 0\nq 0 b 3\nq 0 c 1\n");
    OracleJudge judge(q);
    std::vector<std::string> ids{"a", "b", "c"};
    auto p = prompt_for(3, JudgeKind::ranking);
    auto v = judge_window(judge, {"q", ids, &p, JudgeKind::ranking});
    CHECK(v.permutation == std::vector<int>{2, 3, 1});
    CHECK(v.repairs.empty());

    std::vector<std::string> tied{"x", "y", "b"};
    v = judge_window(judge, {"q", tied, &p, JudgeKind::ranking});
    CHECK(v.permutation == std::vector<int>{3, 1, 2});
}

TEST_CASE("oracle selection filters by threshold in grade order") {
    Qrels q = parse_qrels("q 0 a 0\nq 0 b 3\nq 0 c 1\n");
    std::vector<std::string> ids{"a", "b", "c"};
    auto p = prompt_for(3, JudgeKind::selection);
    OracleJudge judge(q, 1);
    auto v = judge_window(judge, {"q", ids, &p, JudgeKind::selection});
    CHECK(v.selected == std::vector<int>{2, 3});
    CHECK(v.repairs.empty());
    CHECK_FALSE(v.pseudo_answer.has_value());

    OracleJudge strict(q, 2);
    CHECK(judge_window(strict, {"q", ids, &p, JudgeKind::selection}).selected == std::vector<int>{2});

    GoldAnswers answers{{"q", {"Paris", "paris city"}}};
    OracleJudge with_answer(q, 1, &answers);
    auto va = judge_window(with_answer, {"q", ids, &p, JudgeKind::selection});
    CHECK(va.pseudo_answer == "Paris");
    CHECK(va.repairs.empty());
}

TEST_CASE("oracle verdicts are deterministic") {
    Qrels q = parse_qrels("q 0 a 2\nq 0 b 2\nq 0 c 1\nq 0 d 3\n");
    OracleJudge judge(q);
    std::vector<std::string> ids{"a", "b", "c", "d"};
    auto p = prompt_for(4, JudgeKind::ranking);
    const auto first = judge.complete({"q", ids, &p, JudgeKind::ranking});
    for (int i = 0; i < 10; ++i) CHECK(judge.complete({"q", ids, &p, JudgeKind::ranking}) == first);
}

TEST_CASE("remote-style prose around a ranking needs no repair") {
    ScriptedJudge judge([](const JudgeRequest&) { return "I think [2] > [1] > [3]"; });
    std::vector<std::string> ids{"a", "b", "c"};
    auto p = prompt_for(3, JudgeKind::ranking);
    auto v = judge_window(judge, {"q", ids, &p, JudgeKind::ranking});
    CHECK(v.permutation == std::vector<int>{2, 1, 3});
    CHECK(v.repairs.empty());
    CHECK(v.raw_text == "I think [2] > [1] > [3]");
}

TEST_CASE("parse_ranking fixtures") {
    auto ok = parse_ranking("[3] > [1] > [2]", 3);
    CHECK(ok.permutation == std::vector<int>{3, 1, 2});
    CHECK(ok.repairs.empty());

    auto fixed = parse_ranking("[2] > [2] > [5]", 3);
    CHECK(fixed.permutation == std::vector<int>{2, 1, 3});
    CHECK(fixed.repairs.names() ==
          names({Repair::dedup, Repair::out_of_range_dropped, Repair::missing_appended}));

    auto bare = parse_ranking("ranking: 1,3,2", 3);
    CHECK(bare.permutation == std::vector<int>{1, 3, 2});
    CHECK(bare.repairs.names() == names({Repair::free_text_stripped}));

    auto none = parse_ranking("no idea", 4);
    CHECK(none.permutation == std::vector<int>{1, 2, 3, 4});
    CHECK(none.repairs.names() == names({Repair::unparseable}));

    auto huge = parse_ranking("[99999999999999999999] > [1]", 2);
    CHECK(huge.permutation == std::vector<int>{1, 2});
    CHECK(huge.repairs.contains(Repair::out_of_range_dropped));

    CHECK_THROWS(parse_ranking("[1]", 0));
}

TEST_CASE("parse_selection fixtures") {
    auto ok = parse_selection("Napoleon died in 1821.\nSelected: [2], [4]", 5);
    CHECK(ok.selected == std::vector<int>{2, 4});
    CHECK(ok.pseudo_answer == "Napoleon died in 1821.");
    CHECK(ok.repairs.empty());

    auto empty = parse_selection("Selected: none", 5);
    CHECK(empty.selected.empty());
    CHECK_FALSE(empty.pseudo_answer.has_value());
    CHECK(empty.repairs.empty());

    auto prose = parse_selection("Useful passages are [4] and [4] and [9]", 5);
    CHECK(prose.selected == std::vector<int>{4});
    CHECK_FALSE(prose.pseudo_answer.has_value());
    CHECK(prose.repairs.names() ==
          names({Repair::dedup, Repair::out_of_range_dropped, Repair::free_text_stripped}));
}

TEST_CASE("parse_selection tolerates answer after the Selected line") {
    auto r = parse_selection("Selected: [3], [1]\nThe answer is 42.", 3);
    CHECK(r.selected == std::vector<int>{3, 1});
    CHECK(r.pseudo_answer == "The answer is 42.");
    CHECK(r.repairs.empty());

    auto md = parse_selection("It is blue.\n**Selected:** [2]", 3);
    CHECK(md.selected == std::vector<int>{2});
    CHECK(md.repairs.empty());

    auto unbracketed = parse_selection("x\nSelected: 2, 3", 3);
    CHECK(unbracketed.selected == std::vector<int>{2, 3});
    CHECK(unbracketed.repairs.names() == names({Repair::free_text_stripped}));

    auto garbage = parse_selection("hmm\nSelected: maybe", 3);
    CHECK(garbage.selected.empty());
    CHECK(garbage.repairs.contains(Repair::unparseable));

    auto nothing = parse_selection("", 3);
    CHECK(nothing.selected.empty());
    CHECK(nothing.repairs.names() == names({Repair::unparseable}));
}

TEST_CASE("parsers are total and canonical output re-parses cleanly") {
    std::mt19937 rng(2024);
    for (int trial = 0; trial < 5000; ++trial) {
        const std::string text = random_text(rng);
        const int n = 1 + static_cast<int>(rng() % 20);

        auto r = parse_ranking(text, n);
        std::vector<int> sorted = r.permutation;
        std::sort(sorted.begin(), sorted.end());
        std::vector<int> expect(static_cast<std::size_t>(n));
        std::iota(expect.begin(), expect.end(), 1);
        REQUIRE(sorted == expect);
        auto again = parse_ranking(format_ranking(r.permutation), n);
        CHECK(again.permutation == r.permutation);
        CHECK(again.repairs.empty());

        auto s = parse_selection(text, n);
        std::set<int> uniq(s.selected.begin(), s.selected.end());
        REQUIRE(uniq.size() == s.selected.size());
        for (int id : s.selected) REQUIRE((id >= 1 && id <= n));
        auto sagain = parse_selection(format_selection(s.selected, s.pseudo_answer), n);
        CHECK(sagain.selected == s.selected);
        CHECK(sagain.pseudo_answer == s.pseudo_answer);
        CHECK(sagain.repairs.empty());
    }
}

TEST_CASE("judge_window rejects mismatched prompts") {
    ScriptedJudge judge([](const JudgeRequest&) { return "[1]"; });
    std::vector<std::string> ids{"a", "b"};
    auto p = prompt_for(3, JudgeKind::ranking);
    CHECK_THROWS_AS(judge_window(judge, {"q", ids, &p, JudgeKind::ranking}), std::invalid_argument);
    CHECK_THROWS_AS(judge_window(judge, {"q", ids, nullptr, JudgeKind::ranking}), std::invalid_argument);
    CHECK(judge.calls == 0);
}

TEST_CASE("recording then replaying reproduces responses") {
    winsel::testing::TempDir tmp;
    const auto transcript = tmp.path() / "t.jsonl";
    ScriptedJudge live([](const JudgeRequest& r) { return "reply to " + r.prompt->user; });
    std::vector<std::string> ids{"a"};
    auto p1 = prompt_for(1, JudgeKind::ranking, "first");
    auto p2 = prompt_for(1, JudgeKind::ranking, "second");
    {
        RecordingJudge rec(live, transcript);
        CHECK(rec.complete({"q", ids, &p1, JudgeKind::ranking}) == "reply to first");
        CHECK(rec.complete({"q", ids, &p2, JudgeKind::ranking}) == "reply to second");
    }
    ReplayJudge replay(transcript);
    CHECK(replay.size() == 2);
    CHECK(replay.complete({"q", ids, &p2, JudgeKind::ranking}) == "reply to second");
    CHECK(replay.complete({"q", ids, &p1, JudgeKind::ranking}) == "reply to first");

    auto p3 = prompt_for(1, JudgeKind::ranking, "unseen");
    CHECK_THROWS_AS(replay.complete({"q", ids, &p3, JudgeKind::ranking}), TransportError);
    CHECK_THROWS_AS(ReplayJudge::from_string("{\"prompt_sha256\": 1}\n"), InputError);
}
