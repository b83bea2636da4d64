#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <thread>

#include "winsel/error.hpp"
#include "winsel/parallel.hpp"
#include "winsel/remote_judge.hpp"

using namespace winsel;
using nlohmann::json;

namespace {

class FakeEndpoint {
public:
    explicit FakeEndpoint(httplib::Server::Handler handler) {
        server_.Post("/v1/chat/completions", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeEndpoint() {
        server_.stop();
        thread_.join();
    }
    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

std::string completion(const std::string& content) {
    return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}
        .dump();
}

JudgeEndpointConfig config_for(const FakeEndpoint& ep) {
    JudgeEndpointConfig c;
    c.base_url = ep.base_url();
    c.model_name = "test-model";
    c.api_key = "secret";
    c.timeout = std::chrono::milliseconds(5000);
    c.backoff_initial = std::chrono::milliseconds(1);
    c.backoff_max = std::chrono::milliseconds(4);
    return c;
}

struct Fixture {
    RenderedPrompt prompt;
    std::vector<std::string> ids{"a", "b"};
    Fixture() {
        prompt.kind = JudgeKind::ranking;
        prompt.system = "system text";
        prompt.user = "user text";
        prompt.passage_count = 2;
    }
    JudgeRequest request() const { return {"q7", ids, &prompt, JudgeKind::ranking, 3}; }
};

}  // namespace

TEST_CASE("remote judge sends chat request and returns content") {
    json seen;
    std::string auth;
    FakeEndpoint ep([&](const httplib::Request& req, httplib::Response& res) {
        seen = json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.set_content(completion("[2] > [1]"), "application/json");
    });
    RemoteJudge judge(config_for(ep));
    Fixture f;
    auto v = judge_window(judge, f.request());
    CHECK(v.permutation == std::vector<int>{2, 1});
    CHECK(auth == "Bearer secret");
    CHECK(seen["model"] == "test-model");
    CHECK(seen["temperature"] == 0.0);
    REQUIRE(seen["messages"].size() == 2);
    CHECK(seen["messages"][0]["role"] == "system");
    CHECK(seen["messages"][0]["content"] == "system text");
    CHECK(seen["messages"][1]["role"] == "user");
    CHECK(seen["messages"][1]["content"] == "user text");
    CHECK(judge.attempts() == 1);
}

TEST_CASE("server errors are retried, client errors are not") {
    std::atomic<int> hits{0};
    FakeEndpoint flaky([&](const httplib::Request&, httplib::Response& res) {
        if (hits++ < 2) {
            res.status = hits == 1 ? 500 : 429;
            return;
        }
        res.set_content(completion("[1] > [2]"), "application/json");
    });
    Fixture f;
    RemoteJudge judge(config_for(flaky));
    CHECK(judge.complete(f.request()) == "[1] > [2]");
    CHECK(judge.attempts() == 3);

    std::atomic<int> bad_hits{0};
    FakeEndpoint bad([&](const httplib::Request&, httplib::Response& res) {
        ++bad_hits;
        res.status = 400;
    });
    RemoteJudge rejecting(config_for(bad));
    try {
        rejecting.complete(f.request());
        FAIL("expected TransportError");
    } catch (const TransportError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("q7") != std::string::npos);
        CHECK(msg.find("window 3") != std::string::npos);
    }
    CHECK(bad_hits == 1);
}

TEST_CASE("retries are bounded") {
    std::atomic<int> hits{0};
    FakeEndpoint down([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 503;
    });
    auto cfg = config_for(down);
    cfg.max_retries = 2;
    RemoteJudge judge(cfg);
    Fixture f;
    CHECK_THROWS_AS(judge.complete(f.request()), TransportError);
    CHECK(hits == 3);
}

TEST_CASE("malformed body is a transport error") {
    FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"choices\": []}", "application/json");
    });
    RemoteJudge judge(config_for(ep));
    Fixture f;
    CHECK_THROWS_AS(judge.complete(f.request()), TransportError);
}

TEST_CASE("unreachable endpoint fails after retries") {
    JudgeEndpointConfig cfg;
    cfg.base_url = "http://127.0.0.1:1/v1";
    cfg.model_name = "m";
    cfg.max_retries = 1;
    cfg.timeout = std::chrono::milliseconds(500);
    cfg.backoff_initial = std::chrono::milliseconds(1);
    RemoteJudge judge(cfg);
    Fixture f;
    CHECK_THROWS_AS(judge.complete(f.request()), TransportError);
    CHECK(judge.attempts() == 2);
}

TEST_CASE("in-flight requests never exceed the bound") {
    std::atomic<int> current{0};
    std::atomic<int> peak{0};
    FakeEndpoint ep([&](const httplib::Request&, httplib::Response& res) {
        const int now = ++current;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        --current;
        res.set_content(completion("[1] > [2]"), "application/json");
    });
    auto cfg = config_for(ep);
    cfg.max_in_flight = 2;
    RemoteJudge judge(cfg);
    Fixture f;
    parallel_for(12, 6, [&](std::size_t) { judge.complete(f.request()); });
    CHECK(peak.load() <= 2);
    CHECK(peak.load() >= 1);
    CHECK(judge.attempts() == 12);
}
