#include <doctest.h>

#include <random>

#include "test_support.hpp"
#include "winsel/error.hpp"
#include "winsel/costsim.hpp"

using namespace winsel;

TEST_CASE("degenerate profiles hit the bounds exactly") {
    const WindowConfig cfg{100, 20, 10};
    for (auto model : {CarryModel::uniform, CarryModel::sticky}) {
        auto never = simulate(cfg, SelectionProfile::never(), 200, 1, model);
        CHECK(never.mean_windows == 5.0);
        CHECK(never.stddev == 0.0);
        auto always = simulate(cfg, SelectionProfile::always(), 200, 1, model);
        CHECK(always.mean_windows == 9.0);
        CHECK(always.histogram == std::map<std::size_t, std::size_t>{{9, 200}});
    }
    auto saturating = SelectionProfile::histogram({{20, 1.0}});
    CHECK(simulate(cfg, saturating, 100, 3).mean_windows == 9.0);
}

TEST_CASE("simulation stays within bounds and is reproducible") {
    const WindowConfig cfg{100, 20, 10};
    auto profile = SelectionProfile::histogram({{0, 0.4}, {1, 0.3}, {3, 0.2}, {8, 0.1}});
    auto a = simulate(cfg, profile, 2000, 42);
    auto b = simulate(cfg, profile, 2000, 42, CarryModel::uniform, 4);
    CHECK(a.mean_windows == b.mean_windows);
    CHECK(a.histogram == b.histogram);
    CHECK(a.to_json().dump() == b.to_json().dump());
    CHECK(a.min_observed >= 5);
    CHECK(a.max_observed <= 9);
    CHECK(a.ci95_low <= a.mean_windows);
    CHECK(a.ci95_high >= a.mean_windows);
    auto c = simulate(cfg, profile, 2000, 43);
    CHECK(c.histogram != a.histogram);

    auto sticky = simulate(cfg, profile, 2000, 42, CarryModel::sticky);
    CHECK(sticky.mean_windows >= a.mean_windows);
}

TEST_CASE("bernoulli profile moves between the bounds") {
    const WindowConfig cfg{100, 20, 10};
    double prev = 0.0;
    for (double p : {0.0, 0.05, 0.2, 1.0}) {
        auto r = simulate(cfg, SelectionProfile::bernoulli(p), 500, 7);
        CHECK(r.mean_windows >= prev);
        prev = r.mean_windows;
    }
    CHECK(prev == 9.0);
}

TEST_CASE("profiles are validated") {
    CHECK_THROWS_AS(SelectionProfile::histogram({{0, 0.5}, {1, 0.4}}).validate(20), ConfigError);
    CHECK_THROWS_AS(SelectionProfile::histogram({{21, 1.0}}).validate(20), ConfigError);
    CHECK_NOTHROW(SelectionProfile::histogram({{20, 1.0}}).validate(20));
    CHECK_THROWS_AS(SelectionProfile::bernoulli(1.5).validate(20), ConfigError);
    CHECK_THROWS_AS(simulate({100, 20, 10}, SelectionProfile::never(), 0, 1), ConfigError);

    auto parsed = parse_profile_json(R"({"counts": {"0": 0.25, "2": 0.75}})");
    CHECK(parsed.kind == SelectionProfile::Kind::histogram);
    REQUIRE(parsed.probs.size() == 3);
    CHECK(parsed.probs[2] == 0.75);
    CHECK_THROWS_AS(parse_profile_json(R"({"counts": {"x": 1}})"), ConfigError);
    CHECK_THROWS_AS(parse_profile_json("[1]"), ConfigError);

    CHECK(profile_from_arg("never").kind == SelectionProfile::Kind::never);
    CHECK(profile_from_arg("always").kind == SelectionProfile::Kind::always);
    CHECK(profile_from_arg("bernoulli:0.3").p == 0.3);
    CHECK_THROWS_AS(profile_from_arg("bernoulli:abc"), ConfigError);
    winsel::testing::TempDir tmp;
    auto path = tmp.write("p.json", R"({"counts": {"1": 1.0}})");
    CHECK(profile_from_arg(path.string()).probs.size() == 2);
}

TEST_CASE("cursor arithmetic") {
    SelectionCursor cur({8, 4, 2});
    CHECK(cur.carried() == 0);
    CHECK(cur.fresh() == 4);
    cur.advance(4);
    CHECK(cur.carried() == 2);
    CHECK(cur.fresh() == 2);
    CHECK_THROWS(cur.advance(3));
    cur.advance(1);
    cur.advance(0);
    CHECK(cur.done());
    CHECK(cur.windows() == 3);
    CHECK(cur.queue_size() == 5);
}

TEST_CASE("replay agrees with the engine on real traces") {
    std::mt19937 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 1 + rng() % 40;
        const std::size_t w = 2 + rng() % 8;
        const std::size_t s = 1 + rng() % (w - 1);
        Corpus corpus = winsel::testing::numbered_corpus(m);
        auto cands = winsel::testing::numbered_candidates("q", m);
        const unsigned seed = static_cast<unsigned>(rng());
        winsel::testing::ScriptedJudge judge([seed](const JudgeRequest& r) {
            std::mt19937 local(seed ^ static_cast<unsigned>(r.window_index * 7919));
            std::vector<int> picks;
            for (std::size_t i = 1; i <= r.doc_ids.size(); ++i) {
                if (local() % 3 == 0) picks.push_back(static_cast<int>(i));
            }
            return format_selection(picks, std::nullopt);
        });
        auto templates = default_templates();
        WindowEngine engine(corpus, templates, PromptBudget{}, judge);
        const WindowConfig cfg{m, w, s};
        auto result = engine.select({"q", "x"}, cands, cfg);
        CHECK(replay_window_count(cfg, result.trace) == result.trace.window_count());
    }
}

TEST_CASE("ranking cost and report rendering") {
    CHECK(ranking_cost({100, 20, 10}) == 9);
    CHECK(ranking_cost({8, 4, 2}) == 3);
    auto r = simulate({100, 20, 10}, SelectionProfile::always(), 10, 5);
    auto j = r.to_json();
    CHECK(j["bounds"]["min"] == 5);
    CHECK(j["bounds"]["max"] == 9);
    CHECK(j["ranking_windows"] == 9);
    CHECK(r.to_table().find("mean 9.000") != std::string::npos);
}
