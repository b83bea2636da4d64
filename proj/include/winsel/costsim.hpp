#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "winsel/windowing.hpp"

namespace winsel {

/// Distribution of how many passages the judge selects in one window.
struct SelectionProfile {
    enum class Kind { never, always, bernoulli, histogram };

    Kind kind = Kind::never;
    /// Per-passage selection probability (bernoulli only).
    double p = 0.0;
    /// probs[c] = P(c passages selected) (histogram only).
    std::vector<double> probs;

    static SelectionProfile never();
    static SelectionProfile always();
    static SelectionProfile bernoulli(double p);
    static SelectionProfile histogram(const std::map<std::size_t, double>& counts);

    /// Throws ConfigError if probabilities do not sum to 1 within 1e-9 or the
    /// support exceeds `window`.
    void validate(std::size_t window) const;
    std::string describe() const;
};

/// Parses {"counts": {"0": p0, "1": p1, ...}}.
SelectionProfile parse_profile_json(std::string_view content);
/// "never", "always", "bernoulli:P", or a path to a histogram file.
SelectionProfile profile_from_arg(std::string_view arg);

/// How a drawn count is placed inside a window.
enum class CarryModel {
    /// The count covers the whole window; positions are uniform, so the
    /// number of fresh picks is hypergeometric.
    uniform,
    /// Carried docs are treated as reselected; the count applies to the
    /// fresh docs only.
    sticky,
};

/// Window-advance arithmetic of the selection engine, tracking only the
/// queue length.
class SelectionCursor {
public:
    explicit SelectionCursor(const WindowConfig& cfg);

    bool done() const { return next_ >= cfg_.depth; }
    /// Docs carried from the queue head into the next window.
    std::size_t carried() const;
    /// Unseen candidates entering the next window.
    std::size_t fresh() const;
    /// Records one judged window in which `new_members` docs joined the queue.
    void advance(std::size_t new_members);

    std::size_t windows() const { return windows_; }
    std::size_t queue_size() const { return queue_; }

private:
    WindowConfig cfg_;
    std::size_t next_ = 0;
    std::size_t queue_ = 0;
    std::size_t windows_ = 0;
};

struct SimulationResult {
    WindowConfig config;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    double mean_windows = 0.0;
    double stddev = 0.0;
    double ci95_low = 0.0;
    double ci95_high = 0.0;
    std::size_t min_observed = 0;
    std::size_t max_observed = 0;
    std::map<std::size_t, std::size_t> histogram;

    nlohmann::json to_json() const;
    std::string to_table() const;
};

/// Monte Carlo over the selection engine's window arithmetic. Trial i draws
/// from its own generator seeded by (seed, i), so results do not depend on
/// `parallel`.
SimulationResult simulate(const WindowConfig& cfg, const SelectionProfile& profile,
                          std::size_t trials, std::uint64_t seed,
                          CarryModel model = CarryModel::uniform, std::size_t parallel = 1);

/// Window count of the back-to-front ranking plan.
std::size_t ranking_cost(const WindowConfig& cfg);

/// Re-derives a selection trace's window count from its queue growth.
std::size_t replay_window_count(const WindowConfig& cfg, const WindowTrace& trace);

}  // namespace winsel
