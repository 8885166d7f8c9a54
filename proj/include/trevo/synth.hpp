#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>

#include "trevo/dataset.hpp"

namespace trevo::synth {

// Portable random source: std::mt19937_64 (its output sequence is fixed by
// the standard) with explicit uniform, exponential and Box-Muller normal
// conversions, so streams do not depend on the standard library's
// distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform();       // [0, 1), 53-bit resolution
    double uniform_open();  // (0, 1]
    double normal();
    double exponential(double rate);
    std::size_t index(std::size_t n);  // [0, n)

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

struct InjectSpec {
    // Explicit pair, or the automatic choice of choose_convergence_pair.
    std::optional<std::pair<std::string, std::string>> pair;
    double strength = 0.9;
    std::optional<std::string> trait;  // defaults to the first continuous trait
};

struct SimConfig {
    int n_leaves = 64;
    int n_traits = 6;
    double sigma = 1.0;
    std::uint64_t seed = 42;
    std::optional<InjectSpec> inject;
};

// Ultrametric binary tree by random sequential (Kingman) coalescence. Leaves
// are sp01..spNN, internal nodes n1..n(N-1) in merge order.
PhyloTree random_tree(int n, std::uint64_t seed);

// Brownian motion from root value 0: child = parent + N(0, sigma^2 * length)
// for traits trait1..traitK. Internal intervals are value +- 1.96 sigma
// sqrt(time), a stand-in for reconstruction uncertainty. Adds the discrete
// trait "region" (north when trait1 >= 0) with logistic internal
// probabilities.
Dataset simulate_traits(const PhyloTree& tree, const SimConfig& cfg);

// Pulls the two root-to-leaf paths toward their shared midpoint after the
// first post-root segment, with a transient excursion that keeps the early
// difference large. strength 0 is the identity. Throws Error{PairTooClose}
// unless the pair's MRCA is the root.
Dataset inject_convergence(Dataset ds, std::string_view leaf_a, std::string_view leaf_b, double strength,
                           std::optional<std::string> trait = std::nullopt);

// Cross-root pair with the most edges between them, then the closest leaf
// values.
std::pair<std::string, std::string> choose_convergence_pair(const Dataset& ds, std::string_view trait);

struct Simulation {
    Dataset dataset;
    std::optional<std::pair<std::string, std::string>> injected;
    std::string meta;  // free text for meta.txt
};

Simulation simulate(const SimConfig& cfg);

}  // namespace trevo::synth
