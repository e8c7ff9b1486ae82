#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace toki {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input file could not be parsed. `line` is 1-based; 0 when not line-oriented.
struct ParseError : Error {
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + (line ? ":" + std::to_string(line) : std::string{}) + ": " + what),
          line(line) {}
    std::size_t line;
};

// Operation needs something the predictor does not offer (e.g. gradients).
struct CapabilityError : Error {
    using Error::Error;
};

// External predictor process misbehaved.
struct TransportError : Error {
    TransportError(long request_id, const std::string& what)
        : Error("plugin request " + std::to_string(request_id) + ": " + what),
          request_id(request_id) {}
    long request_id;
};

}  // namespace toki
