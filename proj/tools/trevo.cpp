// trevo: command-line front door to the dataset checks, rankings, trait
// bins, synthetic data and the HTTP service.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "trevo/api_json.hpp"
#include "trevo/newick.hpp"
#include "trevo/service.hpp"
#include "trevo/synth.hpp"

namespace {

using trevo::api::json;

enum Exit : int {
    kOk = 0,
    kInvalidData = 1,  // validate found error diagnostics
    kUsage = 2,
    kDataError = 3,    // dataset missing, unreadable or invalid
    kQueryError = 4,   // query, selection or parameter rejected
    kServerError = 5,
};

struct ExitError {
    int code;
    std::string message;
};

trevo::Dataset load(const std::string& dir, bool lenient) {
    try {
        return trevo::load_dataset_dir(dir, {.strict = !lenient});
    } catch (const trevo::Error& e) {
        throw ExitError{kDataError, e.what()};
    }
}

std::vector<std::string> split(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(item);
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

int cmd_validate(const std::string& dir, bool lenient) {
    trevo::CheckedDataset checked;
    try {
        checked = trevo::check_dataset_dir(dir, {.strict = !lenient});
    } catch (const trevo::Error& e) {
        throw ExitError{kDataError, e.what()};
    }
    std::size_t errors = 0;
    std::size_t warnings = 0;
    for (const auto& d : checked.diagnostics) {
        std::cerr << trevo::describe(d) << '\n';
        (d.severity == trevo::Severity::Error ? errors : warnings) += 1;
    }
    if (errors > 0) {
        std::cout << "invalid: " << errors << " error(s), " << warnings << " warning(s)\n";
        return kInvalidData;
    }
    const auto& ds = *checked.dataset;
    std::cout << "ok: " << ds.tree.leaves().size() << " leaves, " << ds.traits.trait_count() << " traits, "
              << warnings << " warning(s)\n";
    return kOk;
}

struct RankArgs {
    std::string dir;
    std::string preset = "convergence";
    std::string trait;
    std::size_t top = 20;
    std::string format = "json";
    std::string targets;
    std::string weights;
    std::optional<double> alpha;
    std::optional<double> min_distance;
    std::string sort = "score";
    bool lenient = false;
};

int cmd_rank(const RankArgs& a) {
    const auto ds = load(a.dir, a.lenient);
    json query = {{"preset", a.preset}};
    if (!a.trait.empty()) query["trait"] = a.trait;
    if (!a.targets.empty()) {
        const auto parts = split(a.targets);
        if (parts.size() != trevo::kMetricCount) {
            throw ExitError{kQueryError, "--targets needs three comma-separated values"};
        }
        for (std::size_t k = 0; k < parts.size(); ++k) {
            query["targets"][std::string(trevo::kMetricNames[k])] = parts[k];
        }
    }
    if (!a.weights.empty()) {
        const auto parts = split(a.weights);
        if (parts.size() != trevo::kMetricCount) {
            throw ExitError{kQueryError, "--weights needs three comma-separated values"};
        }
        for (std::size_t k = 0; k < parts.size(); ++k) {
            try {
                query["weights"][std::string(trevo::kMetricNames[k])] = std::stod(parts[k]);
            } catch (const std::exception&) {
                throw ExitError{kQueryError, "--weights: '" + parts[k] + "' is not a number"};
            }
        }
    }
    if (a.alpha) query["alpha"] = *a.alpha;
    if (a.min_distance) query["min_distance"] = *a.min_distance;
    const json body = {{"query", query}, {"top", a.top}, {"sort", a.sort}};

    json out;
    try {
        const auto req = trevo::api::parse_rank_request(ds, body);
        auto ranked = trevo::score_all_pairs(ds, req.query);
        if (req.order == trevo::api::RankOrder::Frequency) ranked = trevo::sort_by_rank_frequency(std::move(ranked));
        out = trevo::api::rank_response(ds, req, ranked);
    } catch (const trevo::Error& e) {
        throw ExitError{kQueryError, e.what()};
    }
    if (a.format == "json") {
        std::cout << out.dump(2) << '\n';
        return kOk;
    }
    std::cout << "rank,leaf_a,leaf_b,mrca,score,distance_time,topo_edges,delta,closeness,top_rank_frequency\n";
    for (const auto& p : out["pairs"]) {
        const auto& m = p["metrics"];
        std::cout << p["rank"].get<std::size_t>() << ',' << csv_field(p["leaf_a"]) << ','
                  << csv_field(p["leaf_b"]) << ',' << csv_field(p["mrca"]) << ','
                  << trevo::format_double(p["score"]) << ',' << trevo::format_double(m["distance_time"]) << ','
                  << m["topo_edges"].get<int>() << ',' << trevo::format_double(m["delta"]) << ','
                  << trevo::format_double(m["closeness"]) << ',' << p["top_rank_frequency"].get<int>() << '\n';
    }
    return kOk;
}

struct BinsArgs {
    std::string dir;
    std::string selection_trait;
    std::string states;
    std::string range;
    std::string clade;
    std::string leaves;
    int k = trevo::kDefaultBinCount;
    std::string traits;
    std::string color_key;
    std::string format = "json";
    bool lenient = false;
};

int cmd_bins(const BinsArgs& a) {
    const auto ds = load(a.dir, a.lenient);
    const int modes = !a.selection_trait.empty() + !a.clade.empty() + !a.leaves.empty();
    if (modes != 1) throw ExitError{kUsage, "give exactly one of --selection-trait, --clade or --leaves"};
    json sel_body = {{"name", "cli"}};
    if (!a.clade.empty()) {
        sel_body["origin"] = "clade";
        sel_body["node"] = a.clade;
    } else if (!a.leaves.empty()) {
        sel_body["origin"] = "brush";
        sel_body["leaves"] = split(a.leaves);
    } else {
        sel_body["origin"] = "trait_filter";
        sel_body["trait"] = a.selection_trait;
        if (!a.states.empty()) sel_body["states"] = split(a.states);
        if (!a.range.empty()) {
            const auto parts = split(a.range);
            try {
                if (parts.size() != 2) throw std::invalid_argument("range");
                sel_body["range"] = {{"min", std::stod(parts[0])}, {"max", std::stod(parts[1])}};
            } catch (const std::exception&) {
                throw ExitError{kUsage, "--range needs MIN,MAX"};
            }
        }
    }
    if (!a.color_key.empty()) sel_body["color_key"] = a.color_key;
    json bins_body = {{"selection", "cli"}, {"k", a.k}};
    if (!a.traits.empty()) bins_body["traits"] = split(a.traits);

    try {
        const auto sel = trevo::api::parse_selection(ds, sel_body);
        const auto req = trevo::api::parse_bins_request(bins_body);
        json out = trevo::api::bins_response(ds, sel, req);
        out["selection_detail"] = trevo::api::to_json(ds, sel, "cli");
        std::cout << out.dump(2) << '\n';
    } catch (const trevo::Error& e) {
        throw ExitError{kQueryError, e.what()};
    }
    return kOk;
}

struct SimulateArgs {
    int leaves = 64;
    int traits = 6;
    std::uint64_t seed = 42;
    double sigma = 1.0;
    bool inject = false;
    std::string pair;
    double strength = 0.9;
    std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
    trevo::synth::SimConfig cfg;
    cfg.n_leaves = a.leaves;
    cfg.n_traits = a.traits;
    cfg.seed = a.seed;
    cfg.sigma = a.sigma;
    if (a.inject || !a.pair.empty()) {
        trevo::synth::InjectSpec spec;
        spec.strength = a.strength;
        if (!a.pair.empty()) {
            const auto parts = split(a.pair);
            if (parts.size() != 2) throw ExitError{kUsage, "--pair needs LEAF_A,LEAF_B"};
            spec.pair = std::make_pair(parts[0], parts[1]);
        }
        cfg.inject = spec;
    }
    auto sim = [&] {
        try {
            return trevo::synth::simulate(cfg);
        } catch (const trevo::Error& e) {
            throw ExitError{kQueryError, e.what()};
        }
    }();
    try {
        trevo::write_dataset_dir(sim.dataset, a.out);
        trevo::write_file(std::filesystem::path(a.out) / "meta.txt", sim.meta);
    } catch (const trevo::Error& e) {
        throw ExitError{kDataError, e.what()};
    }
    std::cout << "wrote " << a.out;
    if (sim.injected) std::cout << " (injected pair " << sim.injected->first << ' ' << sim.injected->second << ')';
    std::cout << '\n';
    return kOk;
}

struct ServeArgs {
    std::string dir;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string static_dir;
    bool lenient = false;
};

trevo::api::HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

int cmd_serve(ServeArgs a) {
    if (const char* env = std::getenv("TREVO_PORT"); env && *env) {
        try {
            a.port = std::stoi(env);
        } catch (const std::exception&) {
            throw ExitError{kUsage, std::string("TREVO_PORT is not a port number: ") + env};
        }
    }
    std::shared_ptr<const trevo::Dataset> ds;
    if (!a.dir.empty()) ds = std::make_shared<const trevo::Dataset>(load(a.dir, a.lenient));
    trevo::api::Service service(ds);
    try {
        trevo::api::HttpServer server(service, {a.host, a.port, a.static_dir});
        const int port = server.bind();
        std::cerr << "listening on http://" << a.host << ':' << port << '\n';
        g_server = &server;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        server.listen();
        g_server = nullptr;
    } catch (const trevo::Error& e) {
        throw ExitError{kServerError, e.what()};
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trevo: pattern queries over trait evolution on phylogenies"};
    app.require_subcommand(1);

    std::string validate_dir;
    bool validate_lenient = false;
    auto* validate = app.add_subcommand("validate", "check a dataset directory (tree.nwk + traits.csv)");
    validate->add_option("dir", validate_dir, "dataset directory")->required();
    validate->add_flag("--lenient", validate_lenient, "accept internal nodes without intervals");

    RankArgs rank_args;
    auto* rank = app.add_subcommand("rank", "rank all leaf pairs by a pattern query");
    rank->add_option("dir", rank_args.dir, "dataset directory")->required();
    rank->add_option("--preset", rank_args.preset, "preset id")->capture_default_str();
    rank->add_option("--trait", rank_args.trait, "primary continuous trait (default: first)");
    rank->add_option("--top", rank_args.top, "pairs to print")->capture_default_str()->check(CLI::PositiveNumber);
    rank->add_option("--format", rank_args.format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    rank->add_option("--targets", rank_args.targets, "distance,delta,closeness as high|low|ignore");
    rank->add_option("--weights", rank_args.weights, "distance,delta,closeness weights");
    rank->add_option("--alpha", rank_args.alpha, "time share of the distance metric");
    rank->add_option("--min-distance", rank_args.min_distance, "score 0 below this distance_time");
    rank->add_option("--sort", rank_args.sort)->check(CLI::IsMember({"score", "frequency"}))->capture_default_str();
    rank->add_flag("--lenient", rank_args.lenient);

    BinsArgs bins_args;
    auto* bins = app.add_subcommand("bins", "time bins and trait summaries for a selection");
    bins->add_option("dir", bins_args.dir, "dataset directory")->required();
    bins->add_option("--selection-trait", bins_args.selection_trait, "select leaves by this trait");
    bins->add_option("--states", bins_args.states, "comma-separated states (discrete trait)");
    bins->add_option("--range", bins_args.range, "MIN,MAX (continuous trait)");
    bins->add_option("--clade", bins_args.clade, "select the clade below this node");
    bins->add_option("--leaves", bins_args.leaves, "comma-separated leaves");
    bins->add_option("--k", bins_args.k, "number of time bins")->capture_default_str();
    bins->add_option("--traits", bins_args.traits, "comma-separated traits (default: all)");
    bins->add_option("--color-key", bins_args.color_key, "discrete trait splitting the summaries");
    bins->add_option("--format", bins_args.format)->check(CLI::IsMember({"json"}))->capture_default_str();
    bins->add_flag("--lenient", bins_args.lenient);

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "write a synthetic Brownian-motion dataset");
    simulate->add_option("--leaves", sim_args.leaves)->capture_default_str();
    simulate->add_option("--traits", sim_args.traits, "continuous traits")->capture_default_str();
    simulate->add_option("--seed", sim_args.seed)->capture_default_str();
    simulate->add_option("--sigma", sim_args.sigma, "Brownian rate")->capture_default_str();
    simulate->add_flag("--inject-convergence", sim_args.inject, "plant a convergent pair on trait1");
    simulate->add_option("--pair", sim_args.pair, "LEAF_A,LEAF_B for the planted pair");
    simulate->add_option("--strength", sim_args.strength, "pull strength in [0, 1]")->capture_default_str();
    simulate->add_option("--out", sim_args.out, "output directory")->required();

    ServeArgs serve_args;
    auto* serve = app.add_subcommand("serve", "serve the JSON API (and optionally a UI bundle)");
    serve->add_option("dir", serve_args.dir, "dataset directory");
    serve->add_option("--host", serve_args.host)->capture_default_str();
    serve->add_option("--port", serve_args.port, "port; TREVO_PORT overrides")->capture_default_str();
    serve->add_option("--static", serve_args.static_dir, "directory served at /");
    serve->add_flag("--lenient", serve_args.lenient);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*validate) return cmd_validate(validate_dir, validate_lenient);
        if (*rank) return cmd_rank(rank_args);
        if (*bins) return cmd_bins(bins_args);
        if (*simulate) return cmd_simulate(sim_args);
        if (*serve) return cmd_serve(serve_args);
    } catch (const ExitError& e) {
        std::cerr << "trevo: " << e.message << '\n';
        return e.code;
    }
    return kUsage;
}
