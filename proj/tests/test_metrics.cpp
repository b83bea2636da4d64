#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "test_support.hpp"
#include "winsel/error.hpp"
#include "winsel/metrics.hpp"

using namespace winsel;

namespace {

// Straight transcription of DCG/IDCG over explicit gain lists.
double reference_ndcg(const std::vector<int>& ranked_grades, std::vector<int> all_grades, std::size_t k) {
    auto dcg = [k](const std::vector<int>& g) {
        double s = 0.0;
        for (std::size_t i = 0; i < g.size() && i < k; ++i) {
            s += (std::pow(2.0, g[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
        }
        return s;
    };
    std::sort(all_grades.rbegin(), all_grades.rend());
    const double ideal = dcg(all_grades);
    return ideal == 0.0 ? 0.0 : dcg(ranked_grades) / ideal;
}

}  // namespace

TEST_CASE("answer normalization") {
    CHECK(normalize_answer("The  Eiffel-Tower!") == std::vector<std::string>{"eiffeltower"});
    CHECK(normalize_answer("an apple, a pear") == std::vector<std::string>{"apple", "pear"});
    CHECK(normalize_answer("").empty());
}

TEST_CASE("exact match and F1") {
    auto s = answer_em_f1("Paris France", {"Paris"});
    CHECK(s.em == 0.0);
    CHECK(s.f1 == doctest::Approx(2.0 / 3.0));

    auto exact = answer_em_f1("the Paris.", {"London", "paris"});
    CHECK(exact.em == 1.0);
    CHECK(exact.f1 == 1.0);

    auto zero = answer_em_f1("", {"x"});
    CHECK(zero.em == 0.0);
    CHECK(zero.f1 == 0.0);

    auto both_empty = answer_em_f1("the", {"a"});
    CHECK(both_empty.em == 1.0);

    auto repeated = answer_em_f1("x y y", {"y y z"});
    CHECK(repeated.f1 == doctest::Approx(2.0 / 3.0));

    // "the" is dropped before counting: P = 2/2, R = 2/3.
    auto article = answer_em_f1("the cat sat", {"cat sat down"});
    CHECK(article.em == 0.0);
    CHECK(article.f1 == doctest::Approx(0.8));

    CHECK_THROWS_AS(answer_em_f1("x", {}), std::invalid_argument);
}

TEST_CASE("evidence counts and pooled F1") {
    auto c = evidence_counts({"a", "b", "c"}, {"a", "d"});
    CHECK(c.tp == 1);
    CHECK(c.fp == 2);
    CHECK(c.fn == 1);

    Selections sel{{"q1", {"a", "b"}}, {"q2", {"c"}}};
    GoldEvidence gold{{"q1", {"a"}}, {"q2", {"c", "d"}}};
    auto s = evidence_scores(sel, gold);
    // tp=2 fp=1 fn=1 pooled
    CHECK(s.micro_f1 == doctest::Approx(2.0 / 3.0));
    CHECK(s.micro_precision == doctest::Approx(2.0 / 3.0));
    CHECK(s.micro_recall == doctest::Approx(2.0 / 3.0));
    CHECK(s.recall == doctest::Approx((1.0 + 0.5) / 2.0));
    CHECK(s.precision == doctest::Approx((0.5 + 1.0) / 2.0));
    CHECK(s.queries == 2);

    auto single = evidence_scores({{"q", {"d1", "d2"}}}, {{"q", {"d1"}}});
    CHECK(single.recall == 1.0);
    CHECK(single.precision == 0.5);
    CHECK(single.micro_f1 == doctest::Approx(2.0 / 3.0));

    GoldEvidence extra = gold;
    extra["q3"] = {"z"};
    auto missing = evidence_scores(sel, extra);
    CHECK(missing.queries == 3);
    CHECK(missing.recall == doctest::Approx(1.5 / 3.0));
    CHECK(missing.precision == doctest::Approx(1.5 / 3.0));
}

TEST_CASE("nDCG fixtures") {
    std::map<std::string, int> judged{{"b", 3}};
    std::vector<std::string> ranking{"a", "b"};
    CHECK(ndcg_at_k(ranking, &judged, 2) == doctest::Approx(0.6309).epsilon(1e-4));
    CHECK(ndcg_at_k(ranking, &judged, 1) == 0.0);
    std::vector<std::string> ideal{"b", "a"};
    CHECK(ndcg_at_k(ideal, &judged, 2) == doctest::Approx(1.0));
    CHECK(ndcg_at_k(ranking, nullptr, 2) == 0.0);

    std::map<std::string, int> outside{{"b", 2}, {"zz", 3}};
    CHECK(ndcg_at_k(ranking, &outside, 10) == doctest::Approx(reference_ndcg({0, 2}, {2, 3}, 10)));
}

TEST_CASE("nDCG matches a direct computation") {
    std::mt19937 rng(99);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng() % 30;
        const std::size_t k = 1 + rng() % 15;
        std::map<std::string, int> judged;
        std::vector<std::string> ranking;
        std::vector<int> ranked_grades, all_grades;
        for (std::size_t i = 0; i < n; ++i) {
            const std::string id = "d" + std::to_string(i);
            ranking.push_back(id);
            const int g = static_cast<int>(rng() % 4);
            if (rng() % 3) judged[id] = g;
            ranked_grades.push_back(judged.count(id) ? judged[id] : 0);
        }
        for (std::size_t j = 0; j < rng() % 4; ++j) judged["unranked" + std::to_string(j)] = 1 + static_cast<int>(rng() % 3);
        for (const auto& [_, g] : judged) all_grades.push_back(g);
        std::shuffle(ranking.begin(), ranking.end(), rng);
        ranked_grades.clear();
        for (const auto& id : ranking) ranked_grades.push_back(judged.count(id) ? judged[id] : 0);
        CHECK(std::abs(ndcg_at_k(ranking, &judged, k) - reference_ndcg(ranked_grades, all_grades, k)) < 1e-9);
    }
}

TEST_CASE("evaluate combines every family") {
    Predictions preds{{"q1", "Paris"}, {"q9", "stray"}};
    GoldAnswers answers{{"q1", {"Paris"}}, {"q2", {"Rome"}}};
    Selections sel{{"q1", {"a"}}};
    GoldEvidence gold{{"q1", {"a"}}, {"q2", {"b"}}};
    Run run = parse_run("q1 Q0 a 1 2.0 t\nq1 Q0 b 2 1.0 t\n");
    Qrels qrels = parse_qrels("q1 0 b 1\n");

    MetricsInputs in;
    in.predictions = &preds;
    in.answers = &answers;
    in.selections = &sel;
    in.evidence = &gold;
    in.run = &run;
    in.qrels = &qrels;
    in.ndcg_cuts = {1, 10};
    auto report = evaluate(in);

    CHECK(*report.mean_em == doctest::Approx(0.5));
    CHECK(report.answer_queries == 2);
    CHECK(report.predictions_without_gold == std::vector<std::string>{"q9"});
    CHECK(report.per_query.at("q2").answer_missing);
    CHECK(report.evidence->recall == doctest::Approx(0.5));
    CHECK(report.per_query.at("q2").selection_missing);
    CHECK(report.ndcg.at(1) == 0.0);
    CHECK(report.ndcg.at(10) == doctest::Approx(1.0 / std::log2(3.0)));

    auto j = report.to_json();
    CHECK(j["answer"]["em_pct"] == "50.00");
    CHECK(j["evidence"]["missing_selections"] == nlohmann::json::array({"q2"}));
    CHECK(j["ranking"]["values"].contains("ndcg@10"));
    CHECK(j["per_query"].size() == 2);
    CHECK(report.to_json().dump() == j.dump());

    const auto tsv = report.to_tsv();
    CHECK(tsv.rfind("query_id", 0) == 0);
    CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 3);
}

TEST_CASE("prediction and selection files load") {
    winsel::testing::TempDir tmp;
    auto p = tmp.write("p.jsonl", "{\"query_id\": \"q1\", \"answer\": \"x\"}\n\n");
    CHECK(load_predictions(p).at("q1") == "x");
    auto s = tmp.write("s.jsonl", "{\"query_id\": \"q1\", \"selected\": [\"a\", \"b\"], \"windows\": 2}\n");
    CHECK(load_selections(s).at("q1") == std::vector<std::string>{"a", "b"});
    auto bad = tmp.write("b.jsonl", "{\"query_id\": \"q1\"}\n");
    CHECK_THROWS_AS(load_selections(bad), InputError);
}
