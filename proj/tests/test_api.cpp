#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <future>
#include <random>
#include <thread>

#include <httplib.h>

#include "schema_check.hpp"
#include "support.hpp"
#include "trevo/service.hpp"

using namespace trevo;
using namespace trevo::api;

namespace {

const testing::SchemaChecker& schema() {
    static const auto checker = testing::SchemaChecker::load(TREVO_SCHEMA);
    return checker;
}

void expect_schema(const std::string& route, const ApiResponse& r) {
    const auto def = schema().definition_for(route, r.status);
    REQUIRE_MESSAGE(!def.empty(), route << " status " << r.status);
    const auto errors = schema().check(r.body, def);
    CHECK_MESSAGE(errors.empty(), route << ": " << (errors.empty() ? "" : errors.front()));
}

std::shared_ptr<const Dataset> shared(const Dataset& ds) { return std::make_shared<const Dataset>(ds); }

ApiResponse call(Service& s, std::string_view method, std::string_view path, const json& body = nullptr) {
    return s.handle(method, path, body.is_null() ? std::string() : body.dump());
}

}  // namespace

TEST_CASE("error codes are upper snake case") {
    CHECK(error_code(ErrorCode::EmptySelection) == "EMPTY_SELECTION");
    CHECK(error_code(ErrorCode::InvalidQuery) == "INVALID_QUERY");
    CHECK(error_code(ErrorCode::Io) == "IO_ERROR");
}

TEST_CASE("schema checker rejects what it should") {
    // Guard against a checker that accepts everything.
    const auto& sc = schema();
    CHECK_FALSE(sc.check(json{{"code", "x"}, {"message", "m"}, {"detail", nullptr}}, "error").empty());
    CHECK_FALSE(sc.check(json{{"code", "X"}, {"message", "m"}}, "error").empty());
    CHECK_FALSE(sc.check(json{{"code", "X"}, {"message", "m"}, {"detail", 1}, {"extra", 1}}, "error").empty());
    CHECK(sc.check(json{{"code", "X_Y"}, {"message", "m"}, {"detail", 1}}, "error").empty());
    CHECK_FALSE(sc.check(json::array(), "presets").empty());
}

TEST_CASE("no dataset loaded") {
    Service s;
    for (auto [method, path] : std::vector<std::pair<std::string, std::string>>{{"GET", "/api/dataset"},
                                                                                 {"GET", "/api/selections"},
                                                                                 {"POST", "/api/selection"},
                                                                                 {"POST", "/api/bins"},
                                                                                 {"POST", "/api/pattern/rank"}}) {
        const auto r = s.handle(method, path, "{}");
        CHECK(r.status == 409);
        CHECK(r.body["code"] == "NO_DATASET");
        expect_schema(method + " " + path, r);
    }
    CHECK(s.handle("GET", "/api/presets", "").status == 200);
}

TEST_CASE("dataset and presets match direct calls") {
    const auto& ds = testing::fixture7();
    Service s(shared(ds));
    const auto d = call(s, "GET", "/api/dataset");
    CHECK(d.status == 200);
    CHECK(d.body == dataset_summary(ds));
    CHECK(d.body["leaves"] == 4);
    CHECK(d.body["tree"]["id"] == "R");
    expect_schema("GET /api/dataset", d);

    const auto p = call(s, "GET", "/api/presets");
    CHECK(p.body.size() == 6);
    CHECK(p.body[0]["id"] == "convergence");
    CHECK(p.body[0]["query"]["targets"] == json{{"distance", "high"}, {"delta", "high"}, {"closeness", "low"}});
    expect_schema("GET /api/presets", p);
}

TEST_CASE("selections") {
    const auto& ds = testing::fixture7();
    Service s(shared(ds));

    const auto clade = call(s, "POST", "/api/selection", {{"name", "all"}, {"origin", "clade"}, {"node", "R"}});
    CHECK(clade.status == 201);
    const auto direct = select_clade(ds, "R");
    CHECK(clade.body == to_json(ds, direct, "all"));
    expect_schema("POST /api/selection", clade);

    const auto cuba = call(s, "POST", "/api/selection",
                           {{"name", "cuba"}, {"trait", "island"}, {"states", {"Cuba"}}, {"label", "Cuban"}});
    CHECK(cuba.status == 201);
    CHECK(cuba.body["origin"] == "trait_filter");
    CHECK(cuba.body["leaves"] == json{"A", "B"});
    CHECK(cuba.body["label"] == "Cuban");

    const auto nested = call(s, "POST", "/api/selection",
                             {{"name", "big"}, {"predicate", {{"trait", "svl"}, {"range", {{"min", 12.5}, {"max", 20}}}}}});
    CHECK(nested.status == 201);
    CHECK(nested.body["leaves"] == json{"A", "B"});

    const auto brush = call(s, "POST", "/api/selection", {{"name", "bc"}, {"leaves", {"B", "C"}}, {"color_key", "island"}});
    CHECK(brush.status == 201);
    CHECK(brush.body["origin"] == "brush");
    CHECK(brush.body["mrca"] == "R");
    CHECK(brush.body["induced_nodes"] == json{"R", "N1", "N2"});
    CHECK(brush.body["color_key"] == "island");

    const auto dup = call(s, "POST", "/api/selection", {{"name", "all"}, {"node", "N1"}});
    CHECK(dup.status == 409);
    CHECK(dup.body["code"] == "DUPLICATE_SELECTION");
    expect_schema("POST /api/selection", dup);

    auto code = [&](const json& body) {
        const auto r = call(s, "POST", "/api/selection", body);
        expect_schema("POST /api/selection", r);
        return std::make_pair(r.status, r.body.value("code", std::string()));
    };
    CHECK(code({{"node", "R"}}) == std::make_pair(422, std::string("INVALID_QUERY")));
    CHECK(code({{"name", "x"}, {"origin", "lasso"}}) == std::make_pair(422, std::string("INVALID_QUERY")));
    CHECK(code({{"name", "x"}, {"node", "Q"}}) == std::make_pair(422, std::string("UNKNOWN_NODE")));
    CHECK(code({{"name", "x"}, {"trait", "island"}, {"states", {"Mars"}}}) ==
          std::make_pair(422, std::string("INVALID_QUERY")));
    CHECK(code({{"name", "x"}, {"trait", "svl"}, {"range", {{"min", 100}, {"max", 200}}}}) ==
          std::make_pair(422, std::string("EMPTY_SELECTION")));
    CHECK(code({{"name", "x"}, {"trait", "svl"}, {"states", {"Cuba"}}}) ==
          std::make_pair(422, std::string("KIND_MISMATCH")));
    CHECK(code({{"name", "x"}, {"node", "R"}, {"color_key", "svl"}}) ==
          std::make_pair(422, std::string("KIND_MISMATCH")));
    CHECK(code({{"name", "x"}, {"leaves", {"A", "N1"}}}) == std::make_pair(422, std::string("UNKNOWN_LEAF")));

    const auto list = call(s, "GET", "/api/selections");
    CHECK(list.body.size() == 4);
    CHECK(list.body[0]["name"] == "all");  // sorted by name
    expect_schema("GET /api/selections", list);
}

TEST_CASE("bins match direct calls") {
    const auto& ds = testing::fixture7();
    Service s(shared(ds));
    REQUIRE(call(s, "POST", "/api/selection", {{"name", "all"}, {"node", "R"}}).status == 201);

    const json body = {{"selection", "all"}, {"k", 2}, {"traits", {"svl", "island"}}, {"color_key", "island"}};
    const auto r = call(s, "POST", "/api/bins", body);
    REQUIRE(r.status == 200);
    CHECK(r.body == bins_response(ds, *s.selection("all"), parse_bins_request(body)));
    CHECK(r.body["edges"] == json{0.0, 1.0, 2.0});
    CHECK(r.body["bins"][0]["nodes"] == json{"R", "N2"});
    CHECK(r.body["leaf_bin"]["index"] == 2);
    CHECK(r.body["summaries"].size() == 2);
    CHECK(r.body["summaries"][0]["bins"].size() == 3);
    CHECK(r.body["summaries"][1]["kind"] == "discrete");
    expect_schema("POST /api/bins", r);

    const auto every = call(s, "POST", "/api/bins", {{"selection", "all"}});
    CHECK(every.body["k"] == kDefaultBinCount);
    CHECK(every.body["summaries"].size() == 3);
    expect_schema("POST /api/bins", every);

    auto status = [&](const json& b) {
        const auto res = call(s, "POST", "/api/bins", b);
        expect_schema("POST /api/bins", res);
        return res.status;
    };
    CHECK(status({{"selection", "none"}}) == 404);
    CHECK(status({{"selection", "all"}, {"k", 0}}) == 422);
    CHECK(status({{"selection", "all"}, {"k", 33}}) == 422);
    CHECK(status({{"selection", "all"}, {"k", 2.5}}) == 422);
    CHECK(status({{"selection", "all"}, {"traits", {"mass"}}}) == 422);
    CHECK(status({{"k", 2}}) == 422);
}

TEST_CASE("rank matches direct calls") {
    const auto& ds = testing::fixture64();
    Service s(shared(ds));
    const json body = {{"query", {{"preset", "convergence"}, {"trait", "trait1"}}}, {"top", 5}};
    const auto r = call(s, "POST", "/api/pattern/rank", body);
    REQUIRE(r.status == 200);
    const auto req = parse_rank_request(ds, body);
    CHECK(r.body == rank_response(ds, req, score_all_pairs(ds, req.query)));
    CHECK(r.body["total_pairs"] == 64 * 63 / 2);
    CHECK(r.body["top_threshold"] == 21);
    CHECK(r.body["pairs"].size() == 5);
    CHECK(r.body["pairs"][0]["leaf_a"] == "sp45");
    CHECK(r.body["pairs"][0]["leaf_b"] == "sp49");
    CHECK(r.body["query"]["preset"] == "convergence");
    CHECK(r.body["traits"].size() == 6);
    expect_schema("POST /api/pattern/rank", r);
    for (const auto& pair : r.body["pairs"]) {
        // columnar fields stay aligned
        for (const char* col : {"rank", "top1pct", "saturation"}) CHECK(pair["heatmap"][col].size() == 6);
        for (const char* side : {"a", "b"}) {
            const auto& tr = pair["trajectories"][side];
            CHECK(tr["nodes"].front() == pair["mrca"]);
            CHECK(tr["nodes"].back() == tr["leaf"]);
            for (const char* col : {"time", "estimate", "lower", "upper"}) CHECK(tr[col].size() == tr["nodes"].size());
        }
    }

    SUBCASE("top beyond the pair count clamps") {
        Service small(shared(testing::fixture7()));
        const auto all = call(small, "POST", "/api/pattern/rank", {{"query", {{"preset", "convergence"}}}, {"top", 1000}});
        CHECK(all.body["top"] == 6);
        CHECK(all.body["pairs"].size() == 6);
        CHECK(all.body["trait"] == "svl");
        expect_schema("POST /api/pattern/rank", all);
    }
    SUBCASE("refining a preset drops its id") {
        const auto refined = call(s, "POST", "/api/pattern/rank",
                                  {{"query", {{"preset", "convergence"}, {"weights", {{"delta", 2}}}}}, {"top", 1}});
        CHECK(refined.body["query"]["preset"].is_null());
        CHECK(refined.body["query"]["weights"]["delta"] == 2.0);
    }
    SUBCASE("frequency order") {
        const auto f = call(s, "POST", "/api/pattern/rank", {{"query", {{"preset", "convergence"}}}, {"sort", "frequency"}});
        CHECK(f.body["sort"] == "frequency");
        const auto& pairs = f.body["pairs"];
        for (std::size_t i = 1; i < pairs.size(); ++i) {
            CHECK(pairs[i - 1]["top_rank_frequency"].get<int>() >= pairs[i]["top_rank_frequency"].get<int>());
        }
    }
    SUBCASE("errors") {
        auto status_code = [&](std::string_view method, std::string_view path, std::string_view text) {
            const auto res = s.handle(method, path, text);
            const std::string route = std::string(method) + " " + std::string(path);
            if (res.status >= 400) expect_schema(route, res);
            return std::make_pair(res.status, res.body.value("code", std::string()));
        };
        using P = std::pair<int, std::string>;
        CHECK(status_code("POST", "/api/pattern/rank", "{not json") == P{400, "BAD_JSON"});
        CHECK(status_code("POST", "/api/pattern/rank", "{}") == P{422, "INVALID_QUERY"});
        CHECK(status_code("POST", "/api/pattern/rank", R"({"query":{"preset":"nope"}})") == P{422, "INVALID_QUERY"});
        CHECK(status_code("POST", "/api/pattern/rank", R"({"query":{"alpha":1.5}})") == P{422, "INVALID_QUERY"});
        CHECK(status_code("POST", "/api/pattern/rank", R"({"query":{"weights":{"delta":-1}}})") == P{422, "INVALID_QUERY"});
        CHECK(status_code("POST", "/api/pattern/rank", R"({"query":{"targets":{"delta":"up"}}})") == P{422, "INVALID_QUERY"});
        CHECK(status_code("POST", "/api/pattern/rank", R"({"query":{},"top":0})") == P{422, "INVALID_QUERY"});
        CHECK(status_code("POST", "/api/pattern/rank", R"({"query":{"trait":"region"}})") == P{422, "KIND_MISMATCH"});
        CHECK(status_code("POST", "/api/pattern/rank", R"({"query":{"trait":"mass"}})") == P{422, "UNKNOWN_TRAIT"});
        CHECK(status_code("GET", "/api/pattern/rank", "") == P{405, "METHOD_NOT_ALLOWED"});
        CHECK(status_code("DELETE", "/api/dataset", "") == P{405, "METHOD_NOT_ALLOWED"});
        CHECK(status_code("GET", "/api/nothing", "") == P{404, "NOT_FOUND"});
    }
}

TEST_CASE("request fuzzing never escapes the error contract") {
    const auto& ds = testing::fixture7();
    Service s(shared(ds));
    REQUIRE(call(s, "POST", "/api/selection", {{"name", "all"}, {"node", "R"}}).status == 201);

    std::ofstream samples;
    if (const char* out = std::getenv("TREVO_API_SAMPLES")) samples.open(out);
    auto record = [&](const std::string& route, const ApiResponse& r) {
        expect_schema(route, r);
        if (samples) samples << json{{"route", route}, {"status", r.status}, {"body", r.body}}.dump() << '\n';
    };
    // well-formed requests first so every success shape is recorded
    record("GET /api/dataset", call(s, "GET", "/api/dataset"));
    record("GET /api/presets", call(s, "GET", "/api/presets"));
    record("POST /api/selection", call(s, "POST", "/api/selection", {{"name", "c"}, {"trait", "island"}, {"states", {"Cuba"}}}));
    record("GET /api/selections", call(s, "GET", "/api/selections"));
    record("POST /api/bins", call(s, "POST", "/api/bins", {{"selection", "all"}, {"k", 3}, {"color_key", "island"}}));
    record("POST /api/pattern/rank", call(s, "POST", "/api/pattern/rank", {{"query", {{"preset", "recent-stasis"}}}}));

    const std::vector<json> atoms = {nullptr, true, 0, -3, 2, 7, 40, 0.5, 1.5, -1e9, "", "all", "svl", "island",
                                     "Cuba", "R", "A", "high", "low", "ignore", "convergence", "frequency",
                                     json::array(), json::object(), json{"A", "B"}, json{"Cuba"}};
    const std::vector<std::string> keys = {"name", "origin", "node", "leaves", "trait", "states", "range", "min",
                                           "max", "selection", "k", "traits", "color_key", "query", "preset",
                                           "targets", "weights", "alpha", "min_distance", "distance", "delta",
                                           "closeness", "top", "sort", "predicate", "label"};
    std::mt19937_64 rng(2024);
    std::function<json(int)> gen = [&](int depth) -> json {
        if (depth == 0 || rng() % 3 == 0) return atoms[rng() % atoms.size()];
        json obj = json::object();
        const auto n = rng() % 5;
        for (std::size_t i = 0; i < n; ++i) obj[keys[rng() % keys.size()]] = gen(depth - 1);
        return obj;
    };
    const std::vector<std::pair<std::string, std::string>> routes = {
        {"POST", "/api/selection"}, {"POST", "/api/bins"}, {"POST", "/api/pattern/rank"},
        {"GET", "/api/dataset"},    {"GET", "/api/presets"}, {"GET", "/api/selections"}};

    int ok = 0;
    for (int i = 0; i < 200; ++i) {
        const auto& [method, path] = routes[i < 180 ? rng() % 3 : rng() % routes.size()];
        std::string text = gen(3).dump();
        if (rng() % 10 == 0) text = text.substr(0, text.size() / 2);  // truncated JSON
        const auto r = s.handle(method, path, text);
        CHECK(r.status < 500);
        if (r.status < 300) ++ok;
        record(method + " " + path, r);
    }
    CHECK(ok > 0);
}

TEST_CASE("live HTTP matches in-process responses") {
    const auto& ds = testing::fixture64();
    Service s(shared(ds));
    Service mirror(shared(ds));
    HttpServer server(s, {"127.0.0.1", 0, ""});
    server.start();
    REQUIRE(server.port() > 0);
    httplib::Client client("127.0.0.1", server.port());

    auto post = [&](const std::string& path, const json& body) {
        auto res = client.Post(path, body.dump(), "application/json");
        REQUIRE(res);
        const auto local = mirror.handle("POST", path, body.dump());
        CHECK(res->status == local.status);
        CHECK(json::parse(res->body) == local.body);
        CHECK(res->get_header_value("Content-Type").find("application/json") == 0);
        return local;
    };
    auto get = [&](const std::string& path) {
        auto res = client.Get(path);
        REQUIRE(res);
        const auto local = mirror.handle("GET", path, "");
        CHECK(res->status == local.status);
        CHECK(json::parse(res->body) == local.body);
    };

    get("/api/dataset");
    get("/api/presets");
    post("/api/selection", {{"name", "north"}, {"trait", "region"}, {"states", {"north"}}});
    post("/api/selection", {{"name", "north"}, {"node", "n1"}});  // 409 on both
    get("/api/selections");
    post("/api/bins", {{"selection", "north"}, {"k", 6}});
    post("/api/pattern/rank", {{"query", {{"preset", "deep-divergence"}, {"trait", "trait3"}}}, {"top", 25}});
    post("/api/pattern/rank", {{"query", {{"preset", "bogus"}}}});
    get("/api/missing");

    auto raw = client.Post("/api/bins", "{{", "application/json");
    REQUIRE(raw);
    CHECK(raw->status == 400);

    SUBCASE("concurrent interleaved requests equal serial results") {
        std::vector<json> bodies;
        std::vector<std::string> paths;
        for (int i = 0; i < 16; ++i) {
            if (i % 2 == 0) {
                paths.push_back("/api/pattern/rank");
                bodies.push_back({{"query", {{"preset", presets()[static_cast<std::size_t>(i / 2) % 6].id},
                                             {"trait", "trait" + std::to_string(1 + i % 6)}}},
                                  {"top", 10}});
            } else {
                paths.push_back("/api/bins");
                bodies.push_back({{"selection", "north"}, {"k", 1 + i}});
            }
        }
        std::vector<json> serial;
        for (std::size_t i = 0; i < bodies.size(); ++i) serial.push_back(mirror.handle("POST", paths[i], bodies[i].dump()).body);

        std::vector<std::future<std::pair<int, std::string>>> futures;
        for (std::size_t i = 0; i < bodies.size(); ++i) {
            futures.push_back(std::async(std::launch::async, [&, i] {
                httplib::Client c("127.0.0.1", server.port());
                auto res = c.Post(paths[i], bodies[i].dump(), "application/json");
                return res ? std::make_pair(res->status, res->body) : std::make_pair(-1, httplib::to_string(res.error()));
            }));
        }
        for (std::size_t i = 0; i < futures.size(); ++i) {
            const auto [status, text] = futures[i].get();
            REQUIRE_MESSAGE(status == 200, text);
            CHECK(json::parse(text) == serial[i]);
        }
    }
    server.stop();
}

TEST_CASE("concurrent selection registration") {
    Service s(shared(testing::fixture7()));
    std::vector<std::thread> threads;
    std::atomic<int> created{0}, conflicts{0};
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&, t] {
            for (int i = 0; i < 20; ++i) {
                // every thread races for the same 20 names
                const auto r = s.post_selection({{"name", "s" + std::to_string(i)}, {"node", t % 2 ? "N1" : "N2"}});
                (r.status == 201 ? created : conflicts)++;
                s.get_selections();
            }
        });
    }
    for (auto& th : threads) th.join();
    CHECK(created == 20);
    CHECK(conflicts == 140);
    CHECK(s.get_selections().body.size() == 20);
}

TEST_CASE("server reports bind failures") {
    Service s(shared(testing::fixture7()));
    HttpServer a(s, {"127.0.0.1", 0, ""});
    const int port = a.bind();
    HttpServer b(s, {"127.0.0.1", port, ""});
    try {
        b.bind();
        FAIL("second bind succeeded");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Io);
    }
    CHECK_THROWS_AS(HttpServer(s, {"127.0.0.1", 0, "/nonexistent/static"}), Error);
}
