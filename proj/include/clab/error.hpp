#pragma once

#include <stdexcept>
#include <string>

namespace clab {

// Base for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input: bad scenario, non-prime p, dependent basis, ...
struct InvalidInput : Error {
    explicit InvalidInput(const std::string& msg) : Error(msg) {}
};

// Operands live in different ambient groups.
struct AmbientMismatch : InvalidInput {
    explicit AmbientMismatch(const std::string& msg) : InvalidInput(msg) {}
};

// Domain error in exact arithmetic (division by zero etc).
struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

// A configured enumeration cap was exceeded.
struct BudgetExceeded : Error {
    explicit BudgetExceeded(const std::string& msg) : Error(msg) {}
};

// Interval arithmetic could not separate two values at the maximum precision.
struct PrecisionExhausted : Error {
    explicit PrecisionExhausted(const std::string& msg) : Error(msg) {}
};

// Shift supports escape the metric window, so the truncated answer would lie.
struct WindowTruncation : Error {
    explicit WindowTruncation(const std::string& msg) : Error(msg) {}
};

// Requested operation is not defined for this ambient group.
struct NotImplementedForAmbient : Error {
    explicit NotImplementedForAmbient(const std::string& msg) : Error(msg) {}
};

}  // namespace clab
