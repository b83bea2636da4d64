#include "winsel/costsim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "winsel/corpus.hpp"
#include "winsel/error.hpp"
#include "winsel/parallel.hpp"
#include "winsel/text.hpp"

namespace winsel {
namespace {

constexpr double kProbTolerance = 1e-9;

/// Number of fresh docs among `draws` positions picked without replacement
/// from a window of `total` positions, `fresh` of which are fresh.
std::size_t hypergeometric(std::size_t total, std::size_t fresh, std::size_t draws,
                           std::mt19937_64& rng) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < draws; ++i) {
        std::uniform_int_distribution<std::size_t> pick(0, total - 1);
        if (pick(rng) < fresh) {
            ++hits;
            --fresh;
        }
        --total;
    }
    return hits;
}

std::size_t draw_count(const SelectionProfile& profile, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(rng);
    double acc = 0.0;
    for (std::size_t c = 0; c < profile.probs.size(); ++c) {
        acc += profile.probs[c];
        if (x < acc) return c;
    }
    // Rounding slack: fall back to the largest count with mass.
    for (std::size_t c = profile.probs.size(); c-- > 0;) {
        if (profile.probs[c] > 0.0) return c;
    }
    return 0;
}

std::size_t new_members(const SelectionProfile& profile, CarryModel model, std::size_t carried,
                        std::size_t fresh, std::mt19937_64& rng) {
    switch (profile.kind) {
        case SelectionProfile::Kind::never: return 0;
        case SelectionProfile::Kind::always: return fresh;
        case SelectionProfile::Kind::bernoulli: {
            std::binomial_distribution<std::size_t> b(fresh, profile.p);
            return b(rng);
        }
        case SelectionProfile::Kind::histogram: {
            const std::size_t window = carried + fresh;
            const std::size_t k = draw_count(profile, rng);
            if (model == CarryModel::sticky) return std::min(k, fresh);
            return hypergeometric(window, fresh, std::min(k, window), rng);
        }
    }
    return 0;
}

}  // namespace

SelectionProfile SelectionProfile::never() { return {Kind::never, 0.0, {}}; }
SelectionProfile SelectionProfile::always() { return {Kind::always, 1.0, {}}; }

SelectionProfile SelectionProfile::bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("bernoulli probability must lie in [0, 1]");
    return {Kind::bernoulli, p, {}};
}

SelectionProfile SelectionProfile::histogram(const std::map<std::size_t, double>& counts) {
    if (counts.empty()) throw ConfigError("empty selection-count histogram");
    SelectionProfile prof{Kind::histogram, 0.0, {}};
    prof.probs.assign(counts.rbegin()->first + 1, 0.0);
    double sum = 0.0;
    for (const auto& [c, p] : counts) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw ConfigError("histogram probability for count " + std::to_string(c) +
                              " must be finite and non-negative");
        }
        prof.probs[c] = p;
        sum += p;
    }
    if (std::abs(sum - 1.0) > kProbTolerance) {
        throw ConfigError("histogram probabilities sum to " + text::format_double(sum) +
                          ", expected 1");
    }
    return prof;
}

void SelectionProfile::validate(std::size_t window) const {
    if (kind != Kind::histogram) return;
    for (std::size_t c = window + 1; c < probs.size(); ++c) {
        if (probs[c] > 0.0) {
            throw ConfigError("profile support includes count " + std::to_string(c) +
                              " beyond window size " + std::to_string(window));
        }
    }
}

std::string SelectionProfile::describe() const {
    switch (kind) {
        case Kind::never: return "never";
        case Kind::always: return "always";
        case Kind::bernoulli: return "bernoulli:" + text::format_double(p);
        case Kind::histogram: return "histogram";
    }
    return "unknown";
}

SelectionProfile parse_profile_json(std::string_view content) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(content);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("malformed profile JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("counts") || !doc["counts"].is_object()) {
        throw ConfigError("profile JSON needs a \"counts\" object");
    }
    std::map<std::size_t, double> counts;
    for (const auto& [key, value] : doc["counts"].items()) {
        std::size_t c = 0;
        try {
            std::size_t used = 0;
            c = std::stoul(key, &used);
            if (used != key.size()) throw std::invalid_argument(key);
        } catch (const std::exception&) {
            throw ConfigError("profile count key '" + key + "' is not a non-negative integer");
        }
        if (!value.is_number()) throw ConfigError("profile value for '" + key + "' is not a number");
        counts[c] = value.get<double>();
    }
    return SelectionProfile::histogram(counts);
}

SelectionProfile profile_from_arg(std::string_view arg) {
    if (arg == "never") return SelectionProfile::never();
    if (arg == "always") return SelectionProfile::always();
    constexpr std::string_view bern = "bernoulli:";
    if (arg.substr(0, bern.size()) == bern) {
        try {
            return SelectionProfile::bernoulli(std::stod(std::string(arg.substr(bern.size()))));
        } catch (const std::logic_error&) {
            throw ConfigError("bad bernoulli probability in '" + std::string(arg) + "'");
        }
    }
    try {
        return parse_profile_json(read_file(std::filesystem::path(arg)));
    } catch (const InputError& e) {
        throw ConfigError(e.what());
    }
}

SelectionCursor::SelectionCursor(const WindowConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

std::size_t SelectionCursor::carried() const {
    return std::min({cfg_.stride, cfg_.window - 1, queue_});
}

std::size_t SelectionCursor::fresh() const {
    return std::min(cfg_.window - carried(), cfg_.depth - next_);
}

void SelectionCursor::advance(std::size_t new_members) {
    const std::size_t f = fresh();
    if (new_members > f) throw std::invalid_argument("more new queue members than fresh docs");
    next_ += f;
    queue_ += new_members;
    ++windows_;
}

SimulationResult simulate(const WindowConfig& cfg, const SelectionProfile& profile,
                          std::size_t trials, std::uint64_t seed, CarryModel model,
                          std::size_t parallel) {
    cfg.validate();
    if (trials < 1) throw ConfigError("trials must be >= 1");
    profile.validate(cfg.window);

    std::vector<std::size_t> counts(trials);
    parallel_for(trials, parallel, [&](std::size_t t) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32)};
        std::mt19937_64 rng(seq);
        SelectionCursor cursor(cfg);
        while (!cursor.done()) {
            cursor.advance(new_members(profile, model, cursor.carried(), cursor.fresh(), rng));
        }
        counts[t] = cursor.windows();
    });

    SimulationResult r;
    r.config = cfg;
    r.trials = trials;
    r.seed = seed;
    double sum = 0.0;
    for (std::size_t c : counts) {
        sum += static_cast<double>(c);
        ++r.histogram[c];
    }
    r.mean_windows = sum / static_cast<double>(trials);
    double sq = 0.0;
    for (std::size_t c : counts) {
        const double d = static_cast<double>(c) - r.mean_windows;
        sq += d * d;
    }
    r.stddev = trials > 1 ? std::sqrt(sq / static_cast<double>(trials - 1)) : 0.0;
    const double half = 1.96 * r.stddev / std::sqrt(static_cast<double>(trials));
    r.ci95_low = r.mean_windows - half;
    r.ci95_high = r.mean_windows + half;
    r.min_observed = r.histogram.begin()->first;
    r.max_observed = r.histogram.rbegin()->first;
    return r;
}

nlohmann::json SimulationResult::to_json() const {
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [w, n] : histogram) hist[std::to_string(w)] = n;
    const auto bounds = window_count_bounds(config);
    return {
        {"config", {{"depth", config.depth}, {"window", config.window}, {"stride", config.stride}}},
        {"trials", trials},
        {"seed", seed},
        {"mean_windows", mean_windows},
        {"stddev", stddev},
        {"ci95", {ci95_low, ci95_high}},
        {"min_observed", min_observed},
        {"max_observed", max_observed},
        {"bounds", {{"min", bounds.min_windows}, {"max", bounds.max_windows}}},
        {"ranking_windows", ranking_cost(config)},
        {"histogram", hist},
    };
}

std::string SimulationResult::to_table() const {
    const auto bounds = window_count_bounds(config);
    std::ostringstream out;
    out << "M=" << config.depth << " w=" << config.window << " s=" << config.stride
        << "  trials=" << trials << " seed=" << seed << '\n';
    out << "selection windows  mean " << text::format_fixed(mean_windows, 3) << "  95% CI ["
        << text::format_fixed(ci95_low, 3) << ", " << text::format_fixed(ci95_high, 3) << "]\n";
    out << "bounds             [" << bounds.min_windows << ", " << bounds.max_windows << "]\n";
    out << "ranking windows    " << ranking_cost(config) << '\n';
    out << "windows  trials\n";
    for (const auto& [w, n] : histogram) {
        std::string col = std::to_string(w);
        out << col << std::string(col.size() < 9 ? 9 - col.size() : 1, ' ') << n << '\n';
    }
    return out.str();
}

std::size_t ranking_cost(const WindowConfig& cfg) { return plan_ranking_windows(cfg).size(); }

std::size_t replay_window_count(const WindowConfig& cfg, const WindowTrace& trace) {
    SelectionCursor cursor(cfg);
    std::size_t prev = 0;
    for (const auto& rec : trace.windows) {
        if (cursor.done()) return cursor.windows() + 1;  // trace has extra windows
        cursor.advance(rec.after.size() - prev);
        prev = rec.after.size();
    }
    while (!cursor.done()) cursor.advance(0);
    return cursor.windows();
}

}  // namespace winsel
