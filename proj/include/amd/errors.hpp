#pragma once

#include <stdexcept>
#include <string>

namespace amd {

// Base error for all toolkit failures. CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input data (corpus lines, run files, provider output, ...).
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Transient provider/transport failure; callers may retry before giving up.
class TransportError : public Error {
public:
    explicit TransportError(const std::string& msg) : Error(msg) {}
};

}  // namespace amd
