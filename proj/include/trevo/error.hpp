#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trevo {

// Stable machine-readable codes. The string forms are part of the API and
// the CLI diagnostics output; do not rename.
enum class ErrorCode {
    SyntaxError,
    MissingBranchLength,
    NonPositiveBranchLength,
    DuplicateLabel,
    CsvFormat,
    InvalidRow,
    UnknownNode,
    UnknownLeaf,
    UnknownTrait,
    MissingTrait,
    ProbabilitySum,
    IntervalOrder,
    Strictness,
    Polytomy,
    NonUltrametric,
    NotAnAncestor,
    EmptySelection,
    KindMismatch,
    EmptyInput,
    SamePair,
    MismatchedRoot,
    NoContinuousTrait,
    TooFewLeaves,
    PairTooClose,
    InvalidQuery,
    Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace trevo
