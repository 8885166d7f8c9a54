#include "trevo/error.hpp"

namespace trevo {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::SyntaxError: return "SyntaxError";
        case ErrorCode::MissingBranchLength: return "MissingBranchLength";
        case ErrorCode::NonPositiveBranchLength: return "NonPositiveBranchLength";
        case ErrorCode::DuplicateLabel: return "DuplicateLabel";
        case ErrorCode::CsvFormat: return "CsvFormat";
        case ErrorCode::InvalidRow: return "InvalidRow";
        case ErrorCode::UnknownNode: return "UnknownNode";
        case ErrorCode::UnknownLeaf: return "UnknownLeaf";
        case ErrorCode::UnknownTrait: return "UnknownTrait";
        case ErrorCode::MissingTrait: return "MissingTrait";
        case ErrorCode::ProbabilitySum: return "ProbabilitySumError";
        case ErrorCode::IntervalOrder: return "IntervalOrder";
        case ErrorCode::Strictness: return "StrictnessError";
        case ErrorCode::Polytomy: return "Polytomy";
        case ErrorCode::NonUltrametric: return "NonUltrametric";
        case ErrorCode::NotAnAncestor: return "NotAnAncestor";
        case ErrorCode::EmptySelection: return "EmptySelection";
        case ErrorCode::KindMismatch: return "KindMismatch";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::SamePair: return "SamePair";
        case ErrorCode::MismatchedRoot: return "MismatchedRoot";
        case ErrorCode::NoContinuousTrait: return "NoContinuousTrait";
        case ErrorCode::TooFewLeaves: return "TooFewLeaves";
        case ErrorCode::PairTooClose: return "PairTooClose";
        case ErrorCode::InvalidQuery: return "InvalidQuery";
        case ErrorCode::Io: return "IoError";
    }
    return "Unknown";
}

}  // namespace trevo
