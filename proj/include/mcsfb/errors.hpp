#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>

namespace mcsfb {

/// Malformed or inconsistent input (bad files, dimension mismatch, invalid parameters).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public InputError {
public:
    using InputError::InputError;
};

/// A numerical procedure could not produce a trustworthy result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using WarningHandler = std::function<void(const std::string&)>;

inline WarningHandler& warning_handler()
{
    static WarningHandler handler = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    return handler;
}

inline void set_warning_handler(WarningHandler handler) { warning_handler() = std::move(handler); }

inline void warn(const std::string& msg)
{
    if (warning_handler())
        warning_handler()(msg);
}

inline void require_same_length(long expected, long actual, const char* what)
{
    if (expected != actual)
        throw DimensionError(std::string(what) + ": expected length " + std::to_string(expected) + ", got " +
                             std::to_string(actual));
}

} // namespace mcsfb
