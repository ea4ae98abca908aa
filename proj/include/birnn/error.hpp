#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace birnn {

enum class ErrorKind {
    InvalidParams,
    InvalidConfig,
    DegenerateData,
    NonConvergence,
    UnsatisfiableSchedule,
    UnstableConfiguration,
    ShapeMismatch,
    EmptyInput,
    NonFiniteGradient,
    Divergence,
    PatientCountMismatch,
    ProvenanceMismatch,
    Io,
};

std::string_view to_string(ErrorKind kind);

// Every failure surfaced by the library carries one of the kinds above so
// callers (and tests) can branch on it without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }
    // Message without the kind prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

} // namespace birnn
