#include "trevo/summaries.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace trevo {
namespace {

std::size_t most_probable_state(const StateProbabilities& p) {
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

// Index of the half-open interval [edges[j], edges[j+1]) holding x, clamped
// to the first and last interval.
int locate(std::span<const double> edges, double x) {
    const int k = static_cast<int>(edges.size()) - 1;
    const auto it = std::upper_bound(edges.begin(), edges.end() - 1, x);
    const int j = static_cast<int>(it - edges.begin()) - 1;
    return std::clamp(j, 0, k - 1);
}

std::vector<double> even_edges(double lo, double hi, std::size_t k) {
    std::vector<double> edges(k + 1);
    const double span = hi - lo;
    for (std::size_t j = 0; j < k; ++j) {
        edges[j] = lo + span * static_cast<double>(j) / static_cast<double>(k);
    }
    edges[k] = hi;
    return edges;
}

std::vector<double> sorted_copy(std::span<const double> values) {
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    return v;
}

double sorted_quantile(const std::vector<double>& v, double q) {
    const double h = static_cast<double>(v.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

BinSummary summarize_nodes(const Dataset& ds, std::vector<NodeIndex> nodes, bool leaf_bin,
                           std::size_t t, const SummaryOptions& opts) {
    const auto& col = ds.traits.column(t);
    BinSummary s;
    s.trait = col.def.name;
    s.kind = col.def.kind;
    s.leaf_bin = leaf_bin;
    s.nodes = std::move(nodes);

    if (col.def.is_continuous()) {
        std::vector<double> estimates;
        estimates.reserve(s.nodes.size());
        for (NodeIndex v : s.nodes) {
            const auto& cell = ds.traits.continuous(t, v);
            estimates.push_back(cell.estimate);
            if (leaf_bin) {
                s.values.emplace_back(v, cell.estimate);
            } else {
                s.intervals.push_back({v, cell.estimate, cell.lower, cell.upper});
            }
        }
        if (!estimates.empty()) {
            if (leaf_bin) {
                s.histogram = histogram(estimates);
            } else {
                s.kde_curve = kde(estimates);
            }
        }
        for (std::size_t i : find_outliers(estimates)) s.outlier_ids.push_back(s.nodes[i]);
        return s;
    }

    for (std::size_t k = 0; k < col.def.states.size(); ++k) {
        StateSummary st;
        st.state = col.def.states[k];
        double sum = 0.0;
        for (NodeIndex v : s.nodes) {
            const double p = ds.traits.discrete(t, v)[k];
            sum += p;
            st.dots.push_back({v, p, jitter_offset(ds.tree.node(v).id, st.state, opts.jitter_seed)});
        }
        st.mean = st.dots.empty() ? 0.0 : sum / static_cast<double>(st.dots.size());
        s.states.push_back(std::move(st));
    }
    return s;
}

}  // namespace

std::string_view to_string(SelectionOrigin origin) {
    switch (origin) {
        case SelectionOrigin::Clade: return "clade";
        case SelectionOrigin::TraitFilter: return "trait_filter";
        case SelectionOrigin::Brush: return "brush";
    }
    return "clade";
}

std::optional<SelectionOrigin> selection_origin_from(std::string_view s) {
    if (s == "clade") return SelectionOrigin::Clade;
    if (s == "trait_filter") return SelectionOrigin::TraitFilter;
    if (s == "brush") return SelectionOrigin::Brush;
    return std::nullopt;
}

SubtreeSelection select_leaves(const Dataset& ds, std::vector<NodeIndex> leaves,
                               SelectionOrigin origin, std::string label) {
    const auto& tree = ds.tree;
    if (leaves.empty()) throw Error(ErrorCode::EmptySelection, "selection contains no leaves");
    std::sort(leaves.begin(), leaves.end());
    leaves.erase(std::unique(leaves.begin(), leaves.end()), leaves.end());
    for (NodeIndex v : leaves) {
        if (v >= tree.size() || !tree.node(v).is_leaf()) {
            throw Error(ErrorCode::UnknownLeaf, "selection member is not a leaf");
        }
    }

    SubtreeSelection sel;
    sel.mrca = leaves.front();
    for (NodeIndex v : leaves) sel.mrca = tree.mrca(sel.mrca, v);

    std::vector<char> induced(tree.size(), 0);
    for (NodeIndex leaf : leaves) {
        // Climb until reaching the mrca or a node some earlier leaf already marked.
        NodeIndex cur = leaf;
        while (cur != sel.mrca) {
            cur = *tree.node(cur).parent;
            if (induced[cur]) break;
            induced[cur] = 1;
        }
    }
    for (NodeIndex v = 0; v < tree.size(); ++v) {
        if (induced[v]) sel.induced_nodes.push_back(v);
    }
    sel.leaf_ids = std::move(leaves);
    sel.origin = origin;
    sel.label = std::move(label);
    return sel;
}

SubtreeSelection select_by_trait(const Dataset& ds, std::string_view trait, const TraitPredicate& pred) {
    const std::size_t t = ds.traits.index_of(trait);
    const auto& def = ds.traits.column(t).def;
    if (pred.states.has_value() == pred.range.has_value()) {
        throw Error(ErrorCode::InvalidQuery, "predicate needs exactly one of a state set or a range");
    }
    if (def.is_continuous() != pred.range.has_value()) {
        throw Error(ErrorCode::KindMismatch, "predicate type does not match trait '" + def.name + "' (" +
                                                 std::string(to_string(def.kind)) + ")");
    }

    std::vector<NodeIndex> leaves;
    if (pred.range) {
        for (NodeIndex leaf : ds.tree.leaves()) {
            const double v = ds.traits.continuous(t, leaf).estimate;
            if (v >= pred.range->min && v <= pred.range->max) leaves.push_back(leaf);
        }
    } else {
        std::vector<char> wanted(def.states.size(), 0);
        for (const auto& s : pred.states->states) {
            auto it = std::find(def.states.begin(), def.states.end(), s);
            if (it == def.states.end()) {
                throw Error(ErrorCode::InvalidQuery, "trait '" + def.name + "' has no state '" + s + "'");
            }
            wanted[static_cast<std::size_t>(it - def.states.begin())] = 1;
        }
        for (NodeIndex leaf : ds.tree.leaves()) {
            if (wanted[most_probable_state(ds.traits.discrete(t, leaf))]) leaves.push_back(leaf);
        }
    }
    if (leaves.empty()) {
        throw Error(ErrorCode::EmptySelection, "no leaf satisfies the predicate on '" + def.name + "'");
    }
    return select_leaves(ds, std::move(leaves), SelectionOrigin::TraitFilter, def.name);
}

SubtreeSelection select_clade(const Dataset& ds, std::string_view node) {
    const NodeIndex top = ds.tree.index_of(node);
    std::vector<NodeIndex> leaves;
    for (NodeIndex leaf : ds.tree.leaves()) {
        if (ds.tree.is_ancestor_or_self(top, leaf)) leaves.push_back(leaf);
    }
    return select_leaves(ds, std::move(leaves), SelectionOrigin::Clade, std::string(node));
}

TimeBins bin_by_time(const Dataset& ds, const SubtreeSelection& sel, int k) {
    if (k < 1 || k > kMaxBinCount) {
        throw Error(ErrorCode::InvalidQuery, "bin count must be in 1.." + std::to_string(kMaxBinCount));
    }
    const double t0 = ds.tree.node(sel.mrca).time;
    const double present = ds.tree.present_time();
    TimeBins bins;
    // A selection whose mrca sits at the present (a single leaf) has no
    // internal nodes; give it a unit span so edges stay increasing.
    bins.edges = present > t0 ? even_edges(t0, present, static_cast<std::size_t>(k))
                              : even_edges(t0, t0 + 1.0, static_cast<std::size_t>(k));
    bins.internal_bins.resize(static_cast<std::size_t>(k));
    for (NodeIndex v : sel.induced_nodes) {
        const int j = locate(bins.edges, ds.tree.node(v).time);
        bins.internal_assignment.emplace(v, j);
        bins.internal_bins[static_cast<std::size_t>(j)].push_back(v);
    }
    bins.leaf_bin = sel.leaf_ids;
    return bins;
}

double quantile(std::span<const double> values, double q) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "quantile of empty input");
    return sorted_quantile(sorted_copy(values), q);
}

double silverman_bandwidth(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n == 0) throw Error(ErrorCode::EmptyInput, "bandwidth of empty input");
    double sd = 0.0;
    if (n > 1) {
        const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
        double ss = 0.0;
        for (double x : values) ss += (x - mean) * (x - mean);
        sd = std::sqrt(ss / static_cast<double>(n - 1));
    }
    if (!(sd > 0.0)) return std::max(std::abs(values[0]), 1.0) * 0.1;
    const auto v = sorted_copy(values);
    const double iqr = sorted_quantile(v, 0.75) - sorted_quantile(v, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    // Heavily tied data can have zero IQR with positive sd.
    if (!(spread > 0.0)) spread = sd;
    return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

KdeCurve kde(std::span<const double> values, std::optional<double> bandwidth) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "KDE of empty input");
    if (bandwidth && !(*bandwidth > 0.0 && std::isfinite(*bandwidth))) {
        throw Error(ErrorCode::InvalidQuery, "bandwidth must be positive");
    }
    KdeCurve curve;
    curve.bandwidth = bandwidth ? *bandwidth : silverman_bandwidth(values);
    const double h = curve.bandwidth;
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    // 4h rather than 3h: a lone kernel keeps only 99.73% of its mass within 3h.
    const double lo = *lo_it - kKdeReach * h;
    const double hi = *hi_it + kKdeReach * h;
    const double norm = 1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    curve.x.resize(kKdeGridSize);
    curve.density.resize(kKdeGridSize);
    for (std::size_t i = 0; i < kKdeGridSize; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(kKdeGridSize - 1);
        double sum = 0.0;
        for (double v : values) {
            const double z = (x - v) / h;
            sum += std::exp(-0.5 * z * z);
        }
        curve.x[i] = x;
        curve.density[i] = sum * norm;
    }
    return curve;
}

std::vector<std::size_t> find_outliers(std::span<const double> values, OutlierParams params) {
    std::vector<std::size_t> out;
    if (values.size() < params.min_count) return out;
    const auto v = sorted_copy(values);
    const double q1 = sorted_quantile(v, 0.25);
    const double q3 = sorted_quantile(v, 0.75);
    const double iqr = q3 - q1;
    const double lo = q1 - params.fence * iqr;
    const double hi = q3 + params.fence * iqr;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] < lo || values[i] > hi) out.push_back(i);
    }
    return out;
}

Histogram histogram(std::span<const double> values, std::optional<std::size_t> bins) {
    Histogram hist;
    if (values.empty()) return hist;
    std::size_t nb = bins.value_or(static_cast<std::size_t>(
                         std::ceil(std::log2(static_cast<double>(values.size())))) + 1);
    nb = std::max<std::size_t>(nb, 1);
    auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    double lo = *lo_it;
    double hi = *hi_it;
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    hist.edges = even_edges(lo, hi, nb);
    hist.counts.assign(nb, 0);
    for (double x : values) ++hist.counts[static_cast<std::size_t>(locate(hist.edges, x))];
    return hist;
}

double jitter_offset(std::string_view node_id, std::string_view state, std::uint64_t seed) {
    // FNV-1a over (seed, node id, separator, state), then a splitmix finalizer.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](unsigned char byte) {
        h ^= byte;
        h *= 0x100000001b3ULL;
    };
    for (int i = 0; i < 8; ++i) feed(static_cast<unsigned char>(seed >> (8 * i)));
    for (char c : node_id) feed(static_cast<unsigned char>(c));
    feed(0x1f);
    for (char c : state) feed(static_cast<unsigned char>(c));
    const double u = static_cast<double>(mix64(h) >> 11) * 0x1.0p-53;
    return -0.4 + 0.8 * u;
}

BinSummary summarize_bin(const Dataset& ds, const TimeBins& bins, int bin, std::string_view trait,
                         const SummaryOptions& opts) {
    if (bin < 0 || bin > bins.leaf_bin_index()) {
        throw Error(ErrorCode::InvalidQuery, "bin index " + std::to_string(bin) + " out of range");
    }
    const std::size_t t = ds.traits.index_of(trait);
    const bool leaf_bin = bin == bins.leaf_bin_index();
    const auto& nodes = leaf_bin ? bins.leaf_bin : bins.internal_bins[static_cast<std::size_t>(bin)];
    BinSummary s = summarize_nodes(ds, nodes, leaf_bin, t, opts);
    s.bin = bin;

    if (opts.color_key) {
        const std::size_t key = ds.traits.index_of(*opts.color_key);
        const auto& key_def = ds.traits.column(key).def;
        if (key_def.is_continuous()) {
            throw Error(ErrorCode::KindMismatch, "color key '" + key_def.name + "' must be discrete");
        }
        std::vector<std::vector<NodeIndex>> groups(key_def.states.size());
        for (NodeIndex v : nodes) groups[most_probable_state(ds.traits.discrete(key, v))].push_back(v);
        for (std::size_t g = 0; g < groups.size(); ++g) {
            if (groups[g].empty()) continue;
            CategorySummary cat{key_def.states[g], summarize_nodes(ds, std::move(groups[g]), leaf_bin, t, opts)};
            cat.summary.bin = bin;
            s.categories.push_back(std::move(cat));
        }
    }
    return s;
}

}  // namespace trevo
