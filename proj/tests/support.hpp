#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "trevo/dataset.hpp"
#include "trevo/newick.hpp"
#include "trevo/synth.hpp"

#ifndef TREVO_TEST_DATA
#error "TREVO_TEST_DATA must point at tests/data"
#endif

namespace testing {

inline std::filesystem::path data_dir(const std::string& name) {
    return std::filesystem::path(TREVO_TEST_DATA) / name;
}

inline const trevo::Dataset& fixture7() {
    static const trevo::Dataset ds = trevo::load_dataset_dir(data_dir("fixture7"));
    return ds;
}

inline const trevo::Dataset& fixture64() {
    static const trevo::Dataset ds = trevo::load_dataset_dir(data_dir("fixture64"));
    return ds;
}

inline trevo::NodeIndex idx(const trevo::Dataset& ds, const std::string& id) { return ds.tree.index_of(id); }

inline trevo::Dataset random_dataset(int leaves, int traits, std::uint64_t seed) {
    trevo::synth::SimConfig cfg;
    cfg.n_leaves = leaves;
    cfg.n_traits = traits;
    cfg.seed = seed;
    return trevo::synth::simulate(cfg).dataset;
}

// Random tree with integer node times: breakpoints land on a dense grid.
inline trevo::Dataset integer_time_dataset(std::mt19937_64& rng, int leaves, int max_len = 12) {
    std::vector<trevo::NodeSpec> specs{{"r", std::nullopt, 0.0}};
    std::vector<std::size_t> open{0};
    std::uniform_int_distribution<int> len(1, max_len);
    int made = 0;
    while (static_cast<int>(open.size()) < leaves) {
        const std::size_t k = rng() % open.size();
        const std::size_t parent = open[k];
        open.erase(open.begin() + static_cast<std::ptrdiff_t>(k));
        for (int c = 0; c < 2; ++c) {
            specs.push_back({"v" + std::to_string(made++), parent, static_cast<double>(len(rng))});
            open.push_back(specs.size() - 1);
        }
    }
    auto tree = trevo::PhyloTree::build(std::move(specs));
    std::normal_distribution<double> normal(0.0, 3.0);
    trevo::TraitColumn col;
    col.def = {"x", trevo::TraitKind::Continuous, {}};
    for (trevo::NodeIndex v = 0; v < tree.size(); ++v) {
        const double e = normal(rng);
        col.continuous.push_back(tree.node(v).is_leaf() ? trevo::ContinuousValue::known(e)
                                                        : trevo::ContinuousValue::uncertain(e, e - 1, e + 1));
    }
    return trevo::Dataset{std::move(tree), trevo::TraitMatrix({col})};
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("trevo-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
