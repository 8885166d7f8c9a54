#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "trevo/dataset.hpp"
#include "trevo/pattern.hpp"
#include "trevo/summaries.hpp"

namespace trevo::api {

using nlohmann::json;

// Upper-snake machine-readable form of an ErrorCode, e.g. EMPTY_SELECTION.
std::string error_code(ErrorCode code);
json error_body(std::string_view code, std::string_view message, json detail = nullptr);

json dataset_summary(const Dataset& ds);
json to_json(const Dataset& ds, const SubtreeSelection& sel, std::string_view name);
json to_json(const Dataset& ds, const BinSummary& s);
json to_json(const Dataset& ds, const Trajectory& tr);
json to_json(const PatternQuery& q);
json to_json(const Preset& p);
json to_json(const Diagnostic& d);
json presets_json();

// Bins for a selection plus one summary column per trait.
struct BinsRequest {
    std::string selection;
    int k = kDefaultBinCount;
    std::vector<std::string> traits;  // empty means every trait
    std::optional<std::string> color_key;
};
BinsRequest parse_bins_request(const json& body);
json bins_response(const Dataset& ds, const SubtreeSelection& sel, const BinsRequest& req);

enum class RankOrder { Score, Frequency };

struct RankRequest {
    PatternQuery query;
    std::size_t top = 50;
    RankOrder order = RankOrder::Score;
};

// Fills the query from an optional preset id, then applies explicit
// targets/weights/alpha. The primary trait defaults to the first continuous
// trait. Throws Error{InvalidQuery}.
RankRequest parse_rank_request(const Dataset& ds, const json& body);
json rank_response(const Dataset& ds, const RankRequest& req, const std::vector<RankedPair>& ranked);

}  // namespace trevo::api
