#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace survey {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad arguments to an operation (empty keyword, dim mismatch, zero vector, ...).
struct ArgumentError : Error {
    using Error::Error;
};

// Malformed input file or unparseable model output at the file level.
struct ParseError : Error {
    using Error::Error;
};

// Backend unreachable or failed after retries. Carries the indices of a batch
// request that did not complete, when applicable.
struct TransportError : Error {
    explicit TransportError(const std::string& what, std::vector<std::size_t> indices = {})
        : Error(what), failed_indices(std::move(indices)) {}
    std::vector<std::size_t> failed_indices;
};

// Judge response unusable after the reprompt.
struct JudgmentError : Error {
    using Error::Error;
};

// Outline/draft generation violated a structural invariant.
struct CompositionError : Error {
    using Error::Error;
};

// Attribute extraction produced nothing usable for a document.
struct ExtractionError : Error {
    using Error::Error;
};

// Survey rendering hit a dangling citation or invalid artifact spec.
struct RenderError : Error {
    using Error::Error;
};

}  // namespace survey
