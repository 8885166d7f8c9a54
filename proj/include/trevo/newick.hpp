#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "trevo/error.hpp"
#include "trevo/tree.hpp"

namespace trevo {

// Newick syntax failure with the byte offset where parsing stopped.
class ParseError : public Error {
public:
    ParseError(ErrorCode code, std::size_t position, const std::string& what)
        : Error(code, "position " + std::to_string(position) + ": " + what), position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

// Branch lengths are mandatory on every non-root edge. Unlabelled internal
// nodes are named "_in<preorder index>". Throws ParseError (SyntaxError,
// MissingBranchLength, NonPositiveBranchLength) or Error{DuplicateLabel}.
PhyloTree parse_newick(std::string_view text);

// Labels outside [A-Za-z0-9_.-] are single-quoted; lengths use the shortest
// decimal form that reads back to the same double.
std::string serialize_newick(const PhyloTree& tree);

// Shortest round-trip decimal rendering shared by the Newick and CSV writers.
std::string format_double(double value);

bool is_plain_label(std::string_view label);

}  // namespace trevo
