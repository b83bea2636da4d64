#include "winsel/remote_judge.hpp"

#include <algorithm>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "winsel/error.hpp"
#include "winsel/jsonl.hpp"

namespace winsel {

class RemoteJudge::Slot {
public:
    explicit Slot(RemoteJudge& owner) : owner_(owner) {
        std::unique_lock lock(owner_.mutex_);
        owner_.cv_.wait(lock, [&] { return owner_.in_flight_ < owner_.config_.max_in_flight; });
        ++owner_.in_flight_;
    }
    ~Slot() {
        {
            std::lock_guard lock(owner_.mutex_);
            --owner_.in_flight_;
        }
        owner_.cv_.notify_one();
    }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

private:
    RemoteJudge& owner_;
};

RemoteJudge::RemoteJudge(JudgeEndpointConfig config) : config_(std::move(config)) {
    if (config_.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (config_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (config_.model_name.empty()) throw ConfigError("endpoint judge needs a model name");

    std::string url = config_.base_url;
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) {
        throw ConfigError("endpoint url must start with http:// or https://: " + url);
    }
    const auto slash = url.find('/', scheme + 3);
    origin_ = url.substr(0, slash);
    path_ = slash == std::string::npos ? std::string{} : url.substr(slash);
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
    path_ += "/chat/completions";
}

std::size_t RemoteJudge::attempts() const {
    std::lock_guard lock(mutex_);
    return attempts_;
}

std::string RemoteJudge::complete(const JudgeRequest& request) {
    const nlohmann::json body{
        {"model", config_.model_name},
        {"temperature", config_.temperature},
        {"messages",
         nlohmann::json::array({{{"role", "system"}, {"content", request.prompt->system}},
                                {{"role", "user"}, {"content", request.prompt->user}}})},
    };
    const std::string payload = dump_line(body);
    const std::string where =
        "query " + request.query_id + " window " + std::to_string(request.window_index);

    thread_local std::mt19937_64 rng{std::random_device{}()};
    std::uniform_real_distribution<double> jitter(0.5, 1.0);

    Slot slot(*this);
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            const double base = static_cast<double>(config_.backoff_initial.count()) *
                                static_cast<double>(1LL << std::min(attempt - 1, 20));
            const double capped = std::min(base, static_cast<double>(config_.backoff_max.count()));
            std::this_thread::sleep_for(
                std::chrono::milliseconds(static_cast<long long>(capped * jitter(rng))));
        }
        {
            std::lock_guard lock(mutex_);
            ++attempts_;
        }

        httplib::Client client(origin_);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());
        httplib::Headers headers;
        if (!config_.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + config_.api_key);
        }

        auto res = client.Post(path_, headers, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw TransportError(where + ": endpoint returned HTTP " + std::to_string(res->status) +
                                 ": " + res->body.substr(0, 200));
        }
        try {
            auto doc = nlohmann::json::parse(res->body);
            const auto& content = doc.at("choices").at(0).at("message").at("content");
            return content.is_null() ? std::string{} : content.get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(where + ": malformed chat-completions response: " + e.what());
        }
    }
    throw TransportError(where + ": endpoint unreachable after " +
                         std::to_string(config_.max_retries + 1) + " attempts (" + last_error + ")");
}

}  // namespace winsel
