#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>

namespace useg {

// Library-wide warning sink. Defaults to stderr; tests may swap it out to
// capture diagnostics. Not thread-safe to reassign while workers run.
inline std::function<void(const std::string&)>& warn_sink() {
    static std::function<void(const std::string&)> sink = [](const std::string& msg) {
        std::fprintf(stderr, "[useg] warning: %s\n", msg.c_str());
    };
    return sink;
}

inline void warn(const std::string& msg) { warn_sink()(msg); }

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename T>
bool is_finite(T v) {
    return std::isfinite(static_cast<double>(v));
}

}  // namespace useg
