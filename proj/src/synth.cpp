#include "trevo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "trevo/newick.hpp"
#include "trevo/pattern.hpp"

namespace trevo::synth {
namespace {

constexpr std::uint64_t kTraitStream = 0x9E3779B97F4A7C15ULL;
constexpr double kZ95 = 1.96;

std::string padded(int value, int width) {
    std::string s = std::to_string(value);
    return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

void check_config(const SimConfig& cfg) {
    if (cfg.n_leaves < 2) throw Error(ErrorCode::InvalidQuery, "simulation needs at least two leaves");
    if (cfg.n_traits < 1) throw Error(ErrorCode::InvalidQuery, "simulation needs at least one trait");
    if (!(cfg.sigma > 0.0) || !std::isfinite(cfg.sigma)) {
        throw Error(ErrorCode::InvalidQuery, "sigma must be positive");
    }
}

}  // namespace

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform_open() { return 1.0 - uniform(); }

double Rng::normal() {
    if (spare_) {
        const double v = *spare_;
        spare_.reset();
        return v;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    return r * std::cos(theta);
}

double Rng::exponential(double rate) { return -std::log(uniform_open()) / rate; }

std::size_t Rng::index(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
}

PhyloTree random_tree(int n, std::uint64_t seed) {
    if (n < 2) throw Error(ErrorCode::InvalidQuery, "random tree needs at least two leaves");
    Rng rng(seed);
    const int width = static_cast<int>(std::to_string(n).size());
    std::vector<NodeSpec> specs;
    std::vector<double> height;
    specs.reserve(static_cast<std::size_t>(2 * n - 1));
    for (int i = 1; i <= n; ++i) {
        specs.push_back({"sp" + padded(i, std::max(width, 2)), std::nullopt, 0.0});
        height.push_back(0.0);
    }
    std::vector<std::size_t> lineages(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < lineages.size(); ++i) lineages[i] = i;

    double now = 0.0;
    int merges = 0;
    while (lineages.size() > 1) {
        const double k = static_cast<double>(lineages.size());
        now += rng.exponential(k * (k - 1.0) / 2.0);
        const std::size_t i = rng.index(lineages.size());
        std::size_t j = rng.index(lineages.size() - 1);
        if (j >= i) ++j;
        const std::size_t left = lineages[std::min(i, j)];
        const std::size_t right = lineages[std::max(i, j)];
        const std::size_t parent = specs.size();
        specs.push_back({"n" + std::to_string(++merges), std::nullopt, 0.0});
        height.push_back(now);
        for (std::size_t c : {left, right}) specs[c].parent = parent;
        lineages.erase(lineages.begin() + static_cast<std::ptrdiff_t>(std::max(i, j)));
        lineages[std::min(i, j)] = parent;
    }
    // Lengths from heights, nudged so that root-down sums hit every target
    // time exactly; all leaves then share one present time bit for bit.
    // Parents always have larger indices than their children.
    std::vector<double> time(specs.size(), 0.0);
    for (std::size_t c = specs.size() - 1; c-- > 0;) {
        const std::size_t p = *specs[c].parent;
        const double target = now - height[c];
        double len = target - time[p];
        while (time[p] + len < target) len = std::nextafter(len, std::numeric_limits<double>::infinity());
        while (time[p] + len > target) len = std::nextafter(len, 0.0);
        specs[c].branch_length = len;
        time[c] = time[p] + len;
    }
    return PhyloTree::build(std::move(specs));
}

Dataset simulate_traits(const PhyloTree& tree, const SimConfig& cfg) {
    check_config(cfg);
    Rng rng(cfg.seed + kTraitStream);
    const std::size_t n = tree.size();
    std::vector<TraitColumn> columns;
    std::vector<double> first_values;
    for (int k = 1; k <= cfg.n_traits; ++k) {
        std::vector<double> value(n, 0.0);
        // Preorder: parents are drawn before children.
        for (NodeIndex v = 1; v < n; ++v) {
            const auto& node = tree.node(v);
            value[v] = value[*node.parent] + cfg.sigma * std::sqrt(node.branch_length) * rng.normal();
        }
        TraitColumn col;
        col.def = {"trait" + std::to_string(k), TraitKind::Continuous, {}};
        col.continuous.resize(n);
        for (NodeIndex v = 0; v < n; ++v) {
            const auto& node = tree.node(v);
            if (node.is_leaf()) {
                col.continuous[v] = ContinuousValue::known(value[v]);
            } else {
                const double half = kZ95 * cfg.sigma * std::sqrt(node.time);
                col.continuous[v] = ContinuousValue::uncertain(value[v], value[v] - half, value[v] + half);
            }
        }
        if (k == 1) first_values = value;
        columns.push_back(std::move(col));
    }

    TraitColumn region;
    region.def = {"region", TraitKind::Discrete, {"north", "south"}};
    region.discrete.resize(n);
    for (NodeIndex v = 0; v < n; ++v) {
        if (tree.node(v).is_leaf()) {
            region.discrete[v] = first_values[v] >= 0.0 ? StateProbabilities{1.0, 0.0}
                                                        : StateProbabilities{0.0, 1.0};
        } else {
            const double north = 1.0 / (1.0 + std::exp(-first_values[v] / cfg.sigma));
            region.discrete[v] = StateProbabilities{north, 1.0 - north};
        }
    }
    columns.push_back(std::move(region));
    return Dataset{tree, TraitMatrix(std::move(columns))};
}

std::pair<std::string, std::string> choose_convergence_pair(const Dataset& ds, std::string_view trait) {
    const auto& tree = ds.tree;
    const auto& root = tree.node(tree.root());
    if (root.children.size() < 2) throw Error(ErrorCode::PairTooClose, "root has a single child");
    const std::size_t t = ds.traits.index_of(trait);

    std::vector<NodeIndex> left, right;
    for (NodeIndex leaf : tree.leaves()) {
        if (tree.is_ancestor_or_self(root.children[0], leaf)) left.push_back(leaf);
        if (tree.is_ancestor_or_self(root.children[1], leaf)) right.push_back(leaf);
    }
    // Deepest pair first (largest topological distance), then closest values.
    auto key = [&](NodeIndex a, NodeIndex b) {
        const double gap = std::abs(ds.traits.continuous(t, a).estimate - ds.traits.continuous(t, b).estimate);
        return std::make_tuple(-static_cast<long>(tree.node(a).depth + tree.node(b).depth), gap,
                               std::min(tree.node(a).id, tree.node(b).id),
                               std::max(tree.node(a).id, tree.node(b).id));
    };
    std::optional<std::pair<NodeIndex, NodeIndex>> best;
    for (NodeIndex a : left) {
        for (NodeIndex b : right) {
            if (!best || key(a, b) < key(best->first, best->second)) best = {a, b};
        }
    }
    if (!best) throw Error(ErrorCode::PairTooClose, "no pair spans the root");
    auto x = tree.node(best->first).id;
    auto y = tree.node(best->second).id;
    if (y < x) std::swap(x, y);
    return {x, y};
}

Dataset inject_convergence(Dataset ds, std::string_view leaf_a, std::string_view leaf_b, double strength,
                           std::optional<std::string> trait) {
    if (!(strength >= 0.0) || !std::isfinite(strength)) {
        throw Error(ErrorCode::InvalidQuery, "pull strength must be >= 0");
    }
    const auto& tree = ds.tree;
    const NodeIndex a = tree.leaf_index(leaf_a);
    const NodeIndex b = tree.leaf_index(leaf_b);
    if (a == b || tree.mrca(a, b) != tree.root()) {
        throw Error(ErrorCode::PairTooClose, "injected pair must have the root as its MRCA");
    }
    const auto continuous = ds.continuous_traits();
    if (continuous.empty()) throw Error(ErrorCode::NoContinuousTrait, "dataset has no continuous trait");
    const std::size_t t = trait ? ds.traits.index_of(*trait) : continuous.front();
    auto& col = ds.traits.column(t);
    if (!col.def.is_continuous()) throw Error(ErrorCode::KindMismatch, "injection needs a continuous trait");

    auto est = [&](NodeIndex v) { return col.continuous.at(v).value().estimate; };
    double lo = est(tree.leaves().front());
    double hi = lo;
    for (NodeIndex leaf : tree.leaves()) {
        lo = std::min(lo, est(leaf));
        hi = std::max(hi, est(leaf));
    }
    const double amplitude = hi - lo;
    const double target = (est(a) + est(b)) / 2.0;
    const auto path_a = tree.root_path(a);
    const auto path_b = tree.root_path(b);
    const double side_a = path_a.size() > 1 && path_b.size() > 1 && est(path_a[1]) < est(path_b[1]) ? -1.0 : 1.0;

    auto deform = [&](const std::vector<NodeIndex>& path, double side) {
        if (path.size() < 3) return;  // the leaf hangs directly below the first segment
        // Position along the path by node count, not time: coalescent trees
        // bunch internal nodes near the present.
        const double steps = static_cast<double>(path.size() - 2);
        for (std::size_t i = 2; i < path.size(); ++i) {
            auto& cell = *col.continuous.at(path[i]);
            const double u = static_cast<double>(i - 1) / steps;
            const double excursion = i + 1 == path.size() ? 0.0 : side * amplitude * std::sin(std::numbers::pi * u);
            const double shift = strength * u * (target - cell.estimate) + strength * excursion;
            cell.estimate += shift;
            cell.lower += shift;
            cell.upper += shift;
        }
    };
    deform(path_a, side_a);
    deform(path_b, -side_a);
    return ds;
}

Simulation simulate(const SimConfig& cfg) {
    check_config(cfg);
    Simulation sim{simulate_traits(random_tree(cfg.n_leaves, cfg.seed), cfg), std::nullopt, {}};
    sim.meta = "synthetic dataset\nleaves: " + std::to_string(cfg.n_leaves) +
               "\ntraits: " + std::to_string(cfg.n_traits) + "\nsigma: " + format_double(cfg.sigma) +
               "\nseed: " + std::to_string(cfg.seed) + "\nrng: mt19937_64\n";
    if (cfg.inject) {
        const auto& spec = *cfg.inject;
        const std::string trait = spec.trait.value_or("trait1");
        const auto pair = spec.pair ? *spec.pair : choose_convergence_pair(sim.dataset, trait);
        sim.dataset = inject_convergence(std::move(sim.dataset), pair.first, pair.second, spec.strength, trait);
        sim.injected = pair;
        sim.meta += "injected_convergence: " + pair.first + " " + pair.second + "\ninjected_trait: " + trait +
                    "\nstrength: " + format_double(spec.strength) + "\n";
    }
    return sim;
}

}  // namespace trevo::synth
