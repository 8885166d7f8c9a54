#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trevo/dataset.hpp"

namespace trevo {

enum class SelectionOrigin { Clade, TraitFilter, Brush };

std::string_view to_string(SelectionOrigin origin);
std::optional<SelectionOrigin> selection_origin_from(std::string_view s);

struct SubtreeSelection {
    std::vector<NodeIndex> leaf_ids;       // sorted, non-empty
    std::vector<NodeIndex> induced_nodes;  // sorted internal nodes between mrca and the leaves
    NodeIndex mrca = 0;
    SelectionOrigin origin = SelectionOrigin::Clade;
    std::string label;
    std::optional<std::string> color_key;
};

// Leaf predicate for select_by_trait: a state set for discrete traits (a
// leaf matches when its most probable state is in the set) or a closed range
// for continuous traits.
struct StatePredicate {
    std::vector<std::string> states;
};
struct RangePredicate {
    double min = 0.0;
    double max = 0.0;
};
struct TraitPredicate {
    std::optional<StatePredicate> states;
    std::optional<RangePredicate> range;
};

// Builds a selection from explicit leaves: induced nodes are every internal
// node on a path from the leaves' collective MRCA down to a leaf.
SubtreeSelection select_leaves(const Dataset& ds, std::vector<NodeIndex> leaves,
                               SelectionOrigin origin, std::string label = {});

// Throws Error{EmptySelection, KindMismatch, UnknownTrait}.
SubtreeSelection select_by_trait(const Dataset& ds, std::string_view trait, const TraitPredicate& pred);

// Throws Error{UnknownNode}.
SubtreeSelection select_clade(const Dataset& ds, std::string_view node);

constexpr int kDefaultBinCount = 8;
constexpr int kMaxBinCount = 32;

struct TimeBins {
    std::vector<double> edges;  // k + 1 strictly increasing values
    std::map<NodeIndex, int> internal_assignment;
    std::vector<std::vector<NodeIndex>> internal_bins;  // k entries
    std::vector<NodeIndex> leaf_bin;

    int bin_count() const noexcept { return static_cast<int>(internal_bins.size()); }
    // Index of the dedicated leaf bin in summarize_bin.
    int leaf_bin_index() const noexcept { return bin_count(); }
};

// Equal-width half-open bins over [time(mrca), present_time); the last bin is
// closed on the right. Leaves go to the separate leaf bin. Throws
// Error{InvalidQuery} when k is outside 1..kMaxBinCount.
TimeBins bin_by_time(const Dataset& ds, const SubtreeSelection& sel, int k);

struct KdeCurve {
    double bandwidth = 0.0;
    std::vector<double> x;
    std::vector<double> density;
};

constexpr std::size_t kKdeGridSize = 128;
constexpr double kKdeReach = 4.0;  // grid margin in bandwidths

// Silverman's rule of thumb; see kde().
double silverman_bandwidth(std::span<const double> values);

// Gaussian KDE on kKdeGridSize points spanning [min - 4h, max + 4h].
// Throws Error{EmptyInput}.
KdeCurve kde(std::span<const double> values, std::optional<double> bandwidth = std::nullopt);

// Linear-interpolation quantile (type 7) of unsorted data.
double quantile(std::span<const double> values, double q);

// Tukey fences: indices outside [Q1 - 1.5 IQR, Q3 + 1.5 IQR]. Fewer than four
// values give no outliers.
struct OutlierParams {
    double fence = 1.5;
    std::size_t min_count = 4;
};
std::vector<std::size_t> find_outliers(std::span<const double> values, OutlierParams params = {});

struct Histogram {
    std::vector<double> edges;
    std::vector<std::size_t> counts;
};

// Sturges bin count (ceil(log2 n) + 1) unless bins is given.
Histogram histogram(std::span<const double> values, std::optional<std::size_t> bins = std::nullopt);

// Deterministic vertical offset in [-0.4, 0.4] of a dot-plot lane.
double jitter_offset(std::string_view node_id, std::string_view state, std::uint64_t seed = 0);

struct IntervalMark {
    NodeIndex node = 0;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct StateDot {
    NodeIndex node = 0;
    double probability = 0.0;
    double jitter = 0.0;
};

struct StateSummary {
    std::string state;
    std::vector<StateDot> dots;
    double mean = 0.0;
};

struct CategorySummary;

struct BinSummary {
    int bin = 0;
    std::string trait;
    TraitKind kind = TraitKind::Continuous;
    bool leaf_bin = false;
    std::vector<NodeIndex> nodes;
    // continuous, internal bins
    std::vector<IntervalMark> intervals;
    std::optional<KdeCurve> kde_curve;
    // continuous, leaf bin
    std::vector<std::pair<NodeIndex, double>> values;
    std::optional<Histogram> histogram;
    // discrete
    std::vector<StateSummary> states;
    std::vector<NodeIndex> outlier_ids;
    // per-category breakdown when a color key is set
    std::vector<CategorySummary> categories;
};

// Nodes grouped by their most probable state of the color-key trait.
struct CategorySummary {
    std::string category;
    BinSummary summary;
};

struct SummaryOptions {
    std::uint64_t jitter_seed = 0;
    std::optional<std::string> color_key;
};

// Bin index == bins.leaf_bin_index() summarizes the leaf bin. Empty bins give
// a summary with empty collections. Throws Error{InvalidQuery} for an
// out-of-range bin index and Error{UnknownTrait}.
BinSummary summarize_bin(const Dataset& ds, const TimeBins& bins, int bin, std::string_view trait,
                         const SummaryOptions& opts = {});

}  // namespace trevo
