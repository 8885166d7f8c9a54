#include "trevo/service.hpp"

#include <mutex>

#include <httplib.h>

namespace trevo::api {
namespace {

constexpr const char* kJsonType = "application/json; charset=utf-8";

ApiResponse failure(int status, std::string_view code, std::string_view message, json detail = nullptr) {
    return {status, error_body(code, message, std::move(detail))};
}

ApiResponse no_dataset() { return failure(409, "NO_DATASET", "no dataset is loaded"); }

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::Io: return 500;
        default: return 422;
    }
}

ApiResponse from_error(const Error& e) { return failure(status_for(e.code()), error_code(e.code()), e.what()); }

template <typename F>
ApiResponse guarded(F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        return from_error(e);
    } catch (const json::exception& e) {
        return failure(400, "BAD_REQUEST", e.what());
    }
}

std::optional<std::string> optional_string(const json& body, const char* key) {
    auto it = body.find(key);
    if (it == body.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw Error(ErrorCode::InvalidQuery, std::string("'") + key + "' must be a string");
    return it->get<std::string>();
}

}  // namespace

SubtreeSelection parse_selection(const Dataset& ds, const json& body) {
    if (!body.is_object()) throw Error(ErrorCode::InvalidQuery, "request body must be a JSON object");
    // The predicate may be nested or given inline next to name/origin.
    const json& pred = body.contains("predicate") && body["predicate"].is_object() ? body["predicate"] : body;

    std::optional<SelectionOrigin> origin;
    if (auto o = optional_string(body, "origin")) {
        origin = selection_origin_from(*o);
        if (!origin) throw Error(ErrorCode::InvalidQuery, "unknown origin '" + *o + "'");
    } else if (body.contains("node")) {
        origin = SelectionOrigin::Clade;
    } else if (body.contains("leaves")) {
        origin = SelectionOrigin::Brush;
    } else {
        origin = SelectionOrigin::TraitFilter;
    }

    SubtreeSelection sel;
    switch (*origin) {
        case SelectionOrigin::Clade: {
            auto node = optional_string(body, "node");
            if (!node) throw Error(ErrorCode::InvalidQuery, "clade selection needs 'node'");
            sel = select_clade(ds, *node);
            break;
        }
        case SelectionOrigin::Brush: {
            auto it = body.find("leaves");
            if (it == body.end() || !it->is_array()) {
                throw Error(ErrorCode::InvalidQuery, "brush selection needs a 'leaves' array");
            }
            std::vector<NodeIndex> leaves;
            for (const auto& leaf : *it) {
                if (!leaf.is_string()) throw Error(ErrorCode::InvalidQuery, "'leaves' must hold strings");
                leaves.push_back(ds.tree.leaf_index(leaf.get<std::string>()));
            }
            sel = select_leaves(ds, std::move(leaves), SelectionOrigin::Brush);
            break;
        }
        case SelectionOrigin::TraitFilter: {
            auto trait = optional_string(pred, "trait");
            if (!trait) throw Error(ErrorCode::InvalidQuery, "trait selection needs 'trait'");
            TraitPredicate p;
            if (auto it = pred.find("states"); it != pred.end() && !it->is_null()) {
                if (!it->is_array()) throw Error(ErrorCode::InvalidQuery, "'states' must be an array");
                StatePredicate sp;
                for (const auto& s : *it) {
                    if (!s.is_string()) throw Error(ErrorCode::InvalidQuery, "'states' must hold strings");
                    sp.states.push_back(s.get<std::string>());
                }
                p.states = std::move(sp);
            }
            if (auto it = pred.find("range"); it != pred.end() && !it->is_null()) {
                if (!it->is_object() || !it->contains("min") || !it->contains("max") ||
                    !(*it)["min"].is_number() || !(*it)["max"].is_number()) {
                    throw Error(ErrorCode::InvalidQuery, "'range' must be {min, max}");
                }
                p.range = RangePredicate{(*it)["min"].get<double>(), (*it)["max"].get<double>()};
            }
            sel = select_by_trait(ds, *trait, p);
            break;
        }
    }
    if (auto label = optional_string(body, "label")) sel.label = *label;
    if (auto key = optional_string(body, "color_key")) {
        const auto& def = ds.traits.column(ds.traits.index_of(*key)).def;
        if (def.is_continuous()) throw Error(ErrorCode::KindMismatch, "color key '" + *key + "' must be discrete");
        sel.color_key = *key;
    }
    return sel;
}

Service::Service(std::shared_ptr<const Dataset> dataset) : dataset_(std::move(dataset)) {}

ApiResponse Service::get_dataset() const {
    if (!dataset_) return no_dataset();
    return {200, dataset_summary(*dataset_)};
}

ApiResponse Service::get_presets() const { return {200, presets_json()}; }

ApiResponse Service::get_selections() const {
    if (!dataset_) return no_dataset();
    std::shared_lock lock(selections_mutex_);
    json out = json::array();
    for (const auto& [name, sel] : selections_) out.push_back(to_json(*dataset_, sel, name));
    return {200, out};
}

ApiResponse Service::post_selection(const json& body) {
    if (!dataset_) return no_dataset();
    return guarded([&]() -> ApiResponse {
        if (!body.is_object()) throw Error(ErrorCode::InvalidQuery, "request body must be a JSON object");
        auto name = optional_string(body, "name");
        if (!name || name->empty()) throw Error(ErrorCode::InvalidQuery, "selection needs a non-empty 'name'");
        {
            std::shared_lock lock(selections_mutex_);
            if (selections_.count(*name)) {
                return failure(409, "DUPLICATE_SELECTION", "selection '" + *name + "' already exists");
            }
        }
        SubtreeSelection sel = parse_selection(*dataset_, body);
        if (sel.label.empty()) sel.label = *name;
        std::unique_lock lock(selections_mutex_);
        auto [it, inserted] = selections_.emplace(*name, std::move(sel));
        if (!inserted) return failure(409, "DUPLICATE_SELECTION", "selection '" + *name + "' already exists");
        return {201, to_json(*dataset_, it->second, it->first)};
    });
}

std::optional<SubtreeSelection> Service::selection(const std::string& name) const {
    std::shared_lock lock(selections_mutex_);
    auto it = selections_.find(name);
    if (it == selections_.end()) return std::nullopt;
    return it->second;
}

ApiResponse Service::post_bins(const json& body) const {
    if (!dataset_) return no_dataset();
    return guarded([&]() -> ApiResponse {
        const BinsRequest req = parse_bins_request(body);
        auto sel = selection(req.selection);
        if (!sel) return failure(404, "UNKNOWN_SELECTION", "no selection named '" + req.selection + "'");
        return {200, bins_response(*dataset_, *sel, req)};
    });
}

ApiResponse Service::post_rank(const json& body) const {
    if (!dataset_) return no_dataset();
    return guarded([&]() -> ApiResponse {
        const RankRequest req = parse_rank_request(*dataset_, body);
        auto ranked = score_all_pairs(*dataset_, req.query);
        if (req.order == RankOrder::Frequency) ranked = sort_by_rank_frequency(std::move(ranked));
        return {200, rank_response(*dataset_, req, ranked)};
    });
}

ApiResponse Service::handle(std::string_view method, std::string_view path, std::string_view body) {
    auto parse = [&](json& out) -> std::optional<ApiResponse> {
        out = json::parse(body.empty() ? std::string_view("{}") : body, nullptr, false);
        if (out.is_discarded()) return failure(400, "BAD_JSON", "request body is not valid JSON");
        return std::nullopt;
    };
    const bool get = method == "GET";
    const bool post = method == "POST";
    json parsed;
    if (path == "/api/dataset") {
        if (get) return get_dataset();
    } else if (path == "/api/presets") {
        if (get) return get_presets();
    } else if (path == "/api/selection" || path == "/api/selections") {
        if (get) return get_selections();
        if (post) {
            if (auto err = parse(parsed)) return *err;
            return post_selection(parsed);
        }
    } else if (path == "/api/bins") {
        if (post) {
            if (auto err = parse(parsed)) return *err;
            return post_bins(parsed);
        }
    } else if (path == "/api/pattern/rank") {
        if (post) {
            if (auto err = parse(parsed)) return *err;
            return post_rank(parsed);
        }
    } else {
        return failure(404, "NOT_FOUND", "no route for " + std::string(path));
    }
    return failure(405, "METHOD_NOT_ALLOWED", std::string(method) + " is not allowed on " + std::string(path));
}

HttpServer::HttpServer(Service& service, ServerConfig config)
    : service_(service), config_(std::move(config)), server_(std::make_unique<httplib::Server>()) {
    // httplib defaults to SO_REUSEPORT, which lets a second server share the
    // port silently.
    server_->set_socket_options([](auto sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
        const ApiResponse r = service_.handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body.dump(), kJsonType);
    };
    server_->Get(R"(/api/.*)", route);
    server_->Post(R"(/api/.*)", route);
    server_->Put(R"(/api/.*)", route);
    server_->Delete(R"(/api/.*)", route);
    if (!config_.static_dir.empty() && !server_->set_mount_point("/", config_.static_dir)) {
        throw Error(ErrorCode::Io, "static directory '" + config_.static_dir + "' does not exist");
    }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
    if (config_.port == 0) {
        port_ = server_->bind_to_any_port(config_.host);
        if (port_ < 0) throw Error(ErrorCode::Io, "cannot bind to " + config_.host);
    } else {
        if (!server_->bind_to_port(config_.host, config_.port)) {
            throw Error(ErrorCode::Io, "cannot bind to " + config_.host + ":" + std::to_string(config_.port));
        }
        port_ = config_.port;
    }
    return port_;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::start() {
    bind();
    thread_ = std::thread([this] { listen(); });
    server_->wait_until_ready();
}

void HttpServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace trevo::api
