#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>

#include "trevo/api_json.hpp"

namespace httplib {
class Server;
}

namespace trevo::api {

struct ApiResponse {
    int status = 200;
    json body;
};

// Request handling without any transport. The dataset is immutable once
// loaded; only the named-selection registry is written after construction.
class Service {
public:
    explicit Service(std::shared_ptr<const Dataset> dataset = nullptr);

    bool has_dataset() const { return dataset_ != nullptr; }
    const Dataset* dataset() const { return dataset_.get(); }

    ApiResponse get_dataset() const;
    ApiResponse get_presets() const;
    ApiResponse get_selections() const;
    ApiResponse post_selection(const json& body);
    ApiResponse post_bins(const json& body) const;
    ApiResponse post_rank(const json& body) const;

    // Routes by method and path; body is raw request text.
    ApiResponse handle(std::string_view method, std::string_view path, std::string_view body);

    std::optional<SubtreeSelection> selection(const std::string& name) const;

private:
    std::shared_ptr<const Dataset> dataset_;
    mutable std::shared_mutex selections_mutex_;
    std::map<std::string, SubtreeSelection, std::less<>> selections_;
};

// Builds the selection a POST /api/selection body describes, without
// registering it. Throws Error.
SubtreeSelection parse_selection(const Dataset& ds, const json& body);

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::string static_dir;
};

// HTTP/1.1 front end over a Service.
class HttpServer {
public:
    HttpServer(Service& service, ServerConfig config);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // Binds and returns the bound port. Throws Error{Io}.
    int bind();
    void listen();  // blocks until stop()
    void start();   // bind + listen on a background thread
    void stop();
    int port() const { return port_; }

private:
    Service& service_;
    ServerConfig config_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

}  // namespace trevo::api
