#include "trevo/api_json.hpp"

#include <algorithm>
#include <cctype>

namespace trevo::api {
namespace {

json node_names(const PhyloTree& tree, const std::vector<NodeIndex>& nodes) {
    json out = json::array();
    for (NodeIndex v : nodes) out.push_back(tree.node(v).id);
    return out;
}

json tree_json(const PhyloTree& tree, NodeIndex v) {
    const auto& node = tree.node(v);
    json children = json::array();
    for (NodeIndex c : node.children) children.push_back(tree_json(tree, c));
    return {{"id", node.id}, {"time", node.time}, {"branch_length", node.branch_length}, {"children", children}};
}

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidQuery, what); }

const json* member(const json& obj, std::string_view key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return nullptr;
    return &*it;
}

std::string string_field(const json& obj, std::string_view key) {
    const json* v = member(obj, key);
    if (!v || !v->is_string()) invalid("'" + std::string(key) + "' must be a string");
    return v->get<std::string>();
}

double number_field(const json& v, std::string_view key) {
    if (!v.is_number()) invalid("'" + std::string(key) + "' must be a number");
    return v.get<double>();
}

std::vector<std::string> string_list(const json& v, std::string_view key) {
    if (!v.is_array()) invalid("'" + std::string(key) + "' must be an array of strings");
    std::vector<std::string> out;
    for (const auto& item : v) {
        if (!item.is_string()) invalid("'" + std::string(key) + "' must be an array of strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

std::int64_t integer_field(const json& v, std::string_view key) {
    if (!v.is_number_integer()) invalid("'" + std::string(key) + "' must be an integer");
    return v.get<std::int64_t>();
}

}  // namespace

std::string error_code(ErrorCode code) {
    const std::string_view name = to_string(code);
    std::string out;
    for (std::size_t i = 0; i < name.size(); ++i) {
        const char c = name[i];
        if (std::isupper(static_cast<unsigned char>(c)) && i > 0) out.push_back('_');
        out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return out;
}

json error_body(std::string_view code, std::string_view message, json detail) {
    return {{"code", code}, {"message", message}, {"detail", std::move(detail)}};
}

json dataset_summary(const Dataset& ds) {
    json defs = json::array();
    for (const auto& def : ds.trait_defs()) {
        defs.push_back({{"name", def.name}, {"kind", to_string(def.kind)}, {"states", def.states}});
    }
    return {{"leaves", ds.tree.leaves().size()},
            {"internal_count", ds.tree.internal_count()},
            {"present_time", ds.tree.present_time()},
            {"trait_defs", defs},
            {"tree", tree_json(ds.tree, ds.tree.root())}};
}

json to_json(const Dataset& ds, const SubtreeSelection& sel, std::string_view name) {
    return {{"name", name},
            {"origin", to_string(sel.origin)},
            {"label", sel.label},
            {"color_key", sel.color_key ? json(*sel.color_key) : json(nullptr)},
            {"mrca", ds.tree.node(sel.mrca).id},
            {"leaves", node_names(ds.tree, sel.leaf_ids)},
            {"induced_nodes", node_names(ds.tree, sel.induced_nodes)}};
}

json to_json(const Dataset& ds, const BinSummary& s) {
    const auto& tree = ds.tree;
    json intervals = json::array();
    for (const auto& m : s.intervals) {
        intervals.push_back({{"node", tree.node(m.node).id},
                             {"estimate", m.estimate},
                             {"lower", m.lower},
                             {"upper", m.upper}});
    }
    json values = json::array();
    for (const auto& [node, value] : s.values) values.push_back({{"node", tree.node(node).id}, {"value", value}});
    json states = json::array();
    for (const auto& st : s.states) {
        json dots = json::array();
        for (const auto& d : st.dots) {
            dots.push_back({{"node", tree.node(d.node).id}, {"p", d.probability}, {"jitter", d.jitter}});
        }
        states.push_back({{"state", st.state}, {"mean", st.mean}, {"dots", dots}});
    }
    json kde = nullptr;
    if (s.kde_curve) {
        kde = {{"bandwidth", s.kde_curve->bandwidth}, {"x", s.kde_curve->x}, {"density", s.kde_curve->density}};
    }
    json hist = nullptr;
    if (s.histogram) hist = {{"edges", s.histogram->edges}, {"counts", s.histogram->counts}};
    json categories = json::array();
    for (const auto& c : s.categories) {
        categories.push_back({{"category", c.category}, {"summary", to_json(ds, c.summary)}});
    }
    return {{"bin", s.bin},
            {"trait", s.trait},
            {"kind", to_string(s.kind)},
            {"leaf_bin", s.leaf_bin},
            {"nodes", node_names(tree, s.nodes)},
            {"intervals", intervals},
            {"kde", kde},
            {"values", values},
            {"histogram", hist},
            {"states", states},
            {"outliers", node_names(tree, s.outlier_ids)},
            {"categories", categories}};
}

json to_json(const Dataset& ds, const Trajectory& tr) {
    // Columnar: one array per field, mrca first.
    json nodes = json::array(), time = json::array(), estimate = json::array(), lower = json::array(),
         upper = json::array();
    for (const auto& s : tr.samples) {
        nodes.push_back(ds.tree.node(s.node).id);
        time.push_back(s.time);
        estimate.push_back(s.estimate);
        lower.push_back(s.lower);
        upper.push_back(s.upper);
    }
    json out = json::object();
    out["leaf"] = ds.tree.node(tr.leaf).id;
    out["nodes"] = std::move(nodes);
    out["time"] = std::move(time);
    out["estimate"] = std::move(estimate);
    out["lower"] = std::move(lower);
    out["upper"] = std::move(upper);
    return out;
}

json to_json(const PatternQuery& q) {
    json targets = json::object();
    json weights = json::object();
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        targets[std::string(kMetricNames[k])] = to_string(q.targets[k]);
        weights[std::string(kMetricNames[k])] = q.weights[k];
    }
    return {{"trait", q.primary_trait},
            {"preset", q.preset_id ? json(*q.preset_id) : json(nullptr)},
            {"targets", targets},
            {"weights", weights},
            {"alpha", q.distance_mix},
            {"min_distance", q.min_distance_time ? json(*q.min_distance_time) : json(nullptr)}};
}

json to_json(const Preset& p) {
    json q = to_json(p.query);
    q.erase("trait");
    return {{"id", p.id}, {"name", p.name}, {"query", q}};
}

json to_json(const Diagnostic& d) {
    return {{"severity", to_string(d.severity)},
            {"code", to_string(d.code)},
            {"node", d.node},
            {"trait", d.trait},
            {"message", d.message}};
}

json presets_json() {
    json out = json::array();
    for (const auto& p : presets()) out.push_back(to_json(p));
    return out;
}

BinsRequest parse_bins_request(const json& body) {
    if (!body.is_object()) invalid("request body must be a JSON object");
    BinsRequest req;
    req.selection = string_field(body, "selection");
    if (const json* k = member(body, "k")) {
        const auto v = integer_field(*k, "k");
        if (v < 1 || v > kMaxBinCount) invalid("'k' must be in 1.." + std::to_string(kMaxBinCount));
        req.k = static_cast<int>(v);
    }
    if (const json* t = member(body, "traits")) req.traits = string_list(*t, "traits");
    if (const json* c = member(body, "color_key")) {
        if (!c->is_string()) invalid("'color_key' must be a string");
        req.color_key = c->get<std::string>();
    }
    return req;
}

json bins_response(const Dataset& ds, const SubtreeSelection& sel, const BinsRequest& req) {
    const auto bins = bin_by_time(ds, sel, req.k);
    std::vector<std::string> traits = req.traits;
    if (traits.empty()) {
        for (const auto& def : ds.trait_defs()) traits.push_back(def.name);
    }
    SummaryOptions opts;
    opts.color_key = req.color_key ? req.color_key : sel.color_key;

    json assignment = json::object();
    for (const auto& [node, bin] : bins.internal_assignment) assignment[ds.tree.node(node).id] = bin;
    json bin_list = json::array();
    for (int j = 0; j < bins.bin_count(); ++j) {
        bin_list.push_back({{"index", j},
                            {"start", bins.edges[static_cast<std::size_t>(j)]},
                            {"end", bins.edges[static_cast<std::size_t>(j) + 1]},
                            {"nodes", node_names(ds.tree, bins.internal_bins[static_cast<std::size_t>(j)])}});
    }
    json summaries = json::array();
    for (const auto& trait : traits) {
        const std::size_t t = ds.traits.index_of(trait);
        json per_bin = json::array();
        for (int j = 0; j <= bins.leaf_bin_index(); ++j) {
            per_bin.push_back(to_json(ds, summarize_bin(ds, bins, j, trait, opts)));
        }
        summaries.push_back({{"trait", trait},
                             {"kind", to_string(ds.traits.column(t).def.kind)},
                             {"bins", per_bin}});
    }
    return {{"selection", req.selection},
            {"k", req.k},
            {"edges", bins.edges},
            {"internal_assignment", assignment},
            {"bins", bin_list},
            {"leaf_bin", {{"index", bins.leaf_bin_index()}, {"nodes", node_names(ds.tree, bins.leaf_bin)}}},
            {"summaries", summaries}};
}

RankRequest parse_rank_request(const Dataset& ds, const json& body) {
    if (!body.is_object()) invalid("request body must be a JSON object");
    RankRequest req;
    const json* qj = member(body, "query");
    if (!qj) invalid("'query' is required");
    if (!qj->is_object()) invalid("'query' must be an object");
    const json& q = *qj;

    if (const json* p = member(q, "preset")) {
        if (!p->is_string()) invalid("'preset' must be a string");
        auto preset = find_preset(p->get<std::string>());
        if (!preset) invalid("unknown preset '" + p->get<std::string>() + "'");
        req.query = preset->query;
    }
    if (const json* t = member(q, "trait")) {
        if (!t->is_string()) invalid("'trait' must be a string");
        req.query.primary_trait = t->get<std::string>();
    } else {
        const auto cont = ds.continuous_traits();
        if (cont.empty()) throw Error(ErrorCode::NoContinuousTrait, "dataset has no continuous trait");
        req.query.primary_trait = ds.traits.column(cont.front()).def.name;
    }
    bool customized = false;
    if (const json* targets = member(q, "targets")) {
        if (!targets->is_object()) invalid("'targets' must be an object");
        for (const auto& [key, value] : targets->items()) {
            auto it = std::find(kMetricNames.begin(), kMetricNames.end(), key);
            if (it == kMetricNames.end()) invalid("unknown metric '" + key + "'");
            if (!value.is_string()) invalid("target for '" + key + "' must be a string");
            auto target = target_from(value.get<std::string>());
            if (!target) invalid("target for '" + key + "' must be high, low or ignore");
            req.query.targets[static_cast<std::size_t>(it - kMetricNames.begin())] = *target;
            customized = true;
        }
    }
    if (const json* weights = member(q, "weights")) {
        if (!weights->is_object()) invalid("'weights' must be an object");
        for (const auto& [key, value] : weights->items()) {
            auto it = std::find(kMetricNames.begin(), kMetricNames.end(), key);
            if (it == kMetricNames.end()) invalid("unknown metric '" + key + "'");
            req.query.weights[static_cast<std::size_t>(it - kMetricNames.begin())] = number_field(value, key);
            customized = true;
        }
    }
    if (const json* a = member(q, "alpha")) {
        req.query.distance_mix = number_field(*a, "alpha");
        customized = true;
    }
    if (const json* m = member(q, "min_distance")) req.query.min_distance_time = number_field(*m, "min_distance");
    // A refined preset is no longer the preset itself.
    if (customized && req.query.preset_id) {
        const auto preset = find_preset(*req.query.preset_id);
        if (preset->query.targets != req.query.targets || preset->query.weights != req.query.weights ||
            preset->query.distance_mix != req.query.distance_mix) {
            req.query.preset_id.reset();
        }
    }

    if (const json* top = member(body, "top")) {
        const auto v = integer_field(*top, "top");
        if (v < 1) invalid("'top' must be >= 1");
        req.top = static_cast<std::size_t>(v);
    }
    if (const json* sort = member(body, "sort")) {
        if (!sort->is_string()) invalid("'sort' must be a string");
        const auto s = sort->get<std::string>();
        if (s == "score") {
            req.order = RankOrder::Score;
        } else if (s == "frequency") {
            req.order = RankOrder::Frequency;
        } else {
            invalid("'sort' must be 'score' or 'frequency'");
        }
    }
    validate_query(req.query);
    return req;
}

json rank_response(const Dataset& ds, const RankRequest& req, const std::vector<RankedPair>& ranked) {
    const auto& tree = ds.tree;
    const std::size_t total = ranked.size();
    const std::size_t shown = std::min(req.top, total);
    json trait_names = json::array();
    for (std::size_t t : ds.continuous_traits()) trait_names.push_back(ds.traits.column(t).def.name);

    json pairs = json::array();
    for (std::size_t i = 0; i < shown; ++i) {
        const auto& rp = ranked[i];
        const auto& m = rp.metrics;
        json normalized = json::object();
        json desirability = json::object();
        for (std::size_t k = 0; k < kMetricCount; ++k) {
            const std::string key(kMetricNames[k]);
            normalized[key] = rp.normalized[k];
            desirability[key] = rp.desirability[k] ? json(*rp.desirability[k]) : json(nullptr);
        }
        // Columnar, aligned with the top-level "traits" list.
        json ranks = json::array(), top1pct = json::array(), saturation = json::array();
        for (const auto& cell : rp.heatmap) {
            ranks.push_back(cell.rank);
            top1pct.push_back(cell.top1pct);
            saturation.push_back(cell.saturation(total));
        }
        json heatmap = json::object();
        heatmap["rank"] = std::move(ranks);
        heatmap["top1pct"] = std::move(top1pct);
        heatmap["saturation"] = std::move(saturation);
        pairs.push_back(
            {{"leaf_a", tree.node(m.leaf_a).id},
             {"leaf_b", tree.node(m.leaf_b).id},
             {"mrca", tree.node(m.mrca).id},
             {"rank", rp.rank},
             {"score", rp.score},
             {"filtered", rp.filtered},
             {"metrics",
              {{"distance_time", m.distance_time},
               {"topo_edges", m.topo_edges},
               {"delta", m.delta},
               {"closeness", m.closeness}}},
             {"normalized", normalized},
             {"desirability", desirability},
             {"heatmap", heatmap},
             {"top_rank_frequency", rp.top_rank_frequency},
             {"trajectories",
              {{"a", to_json(ds, trajectory(ds, m.mrca, m.leaf_a, req.query.primary_trait))},
               {"b", to_json(ds, trajectory(ds, m.mrca, m.leaf_b, req.query.primary_trait))}}}});
    }
    return {{"trait", req.query.primary_trait},
            {"query", to_json(req.query)},
            {"sort", req.order == RankOrder::Score ? "score" : "frequency"},
            {"total_pairs", total},
            {"top", shown},
            {"top_threshold", top_percent_threshold(total)},
            {"traits", trait_names},
            {"pairs", pairs}};
}

}  // namespace trevo::api
