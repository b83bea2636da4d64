#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <mutex>
#include <string>

#include "winsel/judge.hpp"

namespace winsel {

struct JudgeEndpointConfig {
    /// e.g. "http://localhost:8000/v1"; requests go to {base_url}/chat/completions.
    std::string base_url;
    std::string model_name;
    std::string api_key;
    int max_retries = 3;
    std::chrono::milliseconds timeout{60'000};
    std::size_t max_in_flight = 4;
    double temperature = 0.0;
    std::chrono::milliseconds backoff_initial{500};
    std::chrono::milliseconds backoff_max{8'000};
};

/// Environment variable holding the endpoint key.
inline constexpr const char* kApiKeyEnv = "WINSEL_API_KEY";

/// OpenAI-compatible chat-completions judge.
///
/// At most `max_in_flight` requests are outstanding at once across all
/// callers. Connection failures, timeouts, HTTP 429 and 5xx are retried with
/// exponential backoff and jitter; any other response is final. The first
/// choice's message content is returned verbatim.
class RemoteJudge final : public Judge {
public:
    explicit RemoteJudge(JudgeEndpointConfig config);
    std::string complete(const JudgeRequest& request) override;

    /// Number of HTTP attempts made so far (for diagnostics and tests).
    std::size_t attempts() const;

private:
    class Slot;

    JudgeEndpointConfig config_;
    std::string origin_;
    std::string path_;

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::size_t in_flight_ = 0;
    std::size_t attempts_ = 0;
};

}  // namespace winsel
