#pragma once

#include <stdexcept>
#include <string>

namespace winsel {

/// Malformed or inconsistent input data (corpus, run, qrels, gold files).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration: window geometry, templates, profiles, flags.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A judge could not produce a response (endpoint down, retries exhausted,
/// replay transcript miss).
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace winsel
