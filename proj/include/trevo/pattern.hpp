#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trevo/dataset.hpp"

namespace trevo {

// Pattern metrics, in the order used by every per-metric array below.
enum class Metric : std::size_t { Distance = 0, Delta = 1, Closeness = 2 };
constexpr std::size_t kMetricCount = 3;
constexpr std::array<std::string_view, kMetricCount> kMetricNames = {"distance", "delta", "closeness"};

enum class Target { High, Low, Ignore };

std::string_view to_string(Target t);
std::optional<Target> target_from(std::string_view s);

struct PatternQuery {
    std::string primary_trait;
    std::array<Target, kMetricCount> targets{Target::High, Target::High, Target::Low};
    std::array<double, kMetricCount> weights{1.0, 1.0, 1.0};
    double distance_mix = 0.5;  // share of time (vs topology) inside distance
    std::optional<std::string> preset_id;
    // Pairs whose MRCA is more recent than this (distance_time below it) are
    // kept in the ranking with score 0. Off by default.
    std::optional<double> min_distance_time;

    Target target(Metric m) const { return targets[static_cast<std::size_t>(m)]; }
    double weight(Metric m) const { return weights[static_cast<std::size_t>(m)]; }
};

// Throws Error{InvalidQuery}.
void validate_query(const PatternQuery& q);

struct Preset {
    std::string id;
    std::string name;
    PatternQuery query;  // primary_trait left empty
};

// The six feasible {high, low} target triples over (distance, delta,
// closeness); delta = low with closeness = high cannot occur because
// closeness never exceeds delta.
const std::vector<Preset>& presets();
std::optional<Preset> find_preset(std::string_view id);

struct TrajectorySample {
    NodeIndex node = 0;
    double time = 0.0;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct Trajectory {
    NodeIndex leaf = 0;
    std::vector<TrajectorySample> samples;  // mrca first, leaf last
};

// Throws Error{KindMismatch, NotAnAncestor, UnknownTrait}.
Trajectory trajectory(const Dataset& ds, NodeIndex mrca, NodeIndex leaf, std::string_view trait);

struct DistanceMetric {
    double distance_time = 0.0;
    int topo_edges = 0;
};

// Throws Error{SamePair, UnknownLeaf}.
DistanceMetric metric_distance(const PhyloTree& tree, NodeIndex a, NodeIndex b);

// Largest |fA(t) - fB(t)| over [t_mrca, present], f being the piecewise-linear
// interpolation of the estimates and held at the leaf value after the leaf's
// time. present defaults to the later of the two leaf times. Throws
// Error{MismatchedRoot}.
double metric_delta(const Trajectory& a, const Trajectory& b, std::optional<double> present = std::nullopt);

// Throws Error{KindMismatch, UnknownLeaf}.
double metric_closeness(const Dataset& ds, NodeIndex a, NodeIndex b, std::string_view trait);

struct PairMetrics {
    NodeIndex leaf_a = 0;  // leaf_a's label sorts before leaf_b's
    NodeIndex leaf_b = 0;
    NodeIndex mrca = 0;
    double distance_time = 0.0;
    int topo_edges = 0;
    double delta = 0.0;
    double closeness = 0.0;
};

PairMetrics pair_metrics(const Dataset& ds, NodeIndex a, NodeIndex b, std::string_view trait);

struct HeatmapCell {
    std::size_t trait = 0;  // trait index in the dataset
    std::size_t rank = 0;
    bool top1pct = false;

    // Colour saturation for the UI: 1 for rank 1, falling linearly.
    double saturation(std::size_t total_pairs) const {
        return 1.0 - static_cast<double>(rank - 1) / static_cast<double>(total_pairs);
    }
};

struct RankedPair {
    PairMetrics metrics;  // primary trait
    double score = 0.0;
    std::size_t rank = 0;
    std::array<double, kMetricCount> normalized{};                  // distance already mixed
    std::array<std::optional<double>, kMetricCount> desirability{};  // nullopt when ignored
    bool filtered = false;
    std::vector<HeatmapCell> heatmap;  // one per continuous trait, dataset order
    int top_rank_frequency = 0;
};

// max(1, ceil(P / 100)).
std::size_t top_percent_threshold(std::size_t total_pairs);

// Ranks every unordered leaf pair by the query on its primary trait; ties go
// to the lexicographically smaller (leaf_a, leaf_b). Each pair also carries
// its rank under the same query for every continuous trait. Result is in rank
// order. Throws Error{InvalidQuery, UnknownTrait, KindMismatch,
// NoContinuousTrait, TooFewLeaves}.
std::vector<RankedPair> score_all_pairs(const Dataset& ds, const PatternQuery& q);

// Descending top_rank_frequency, then primary score, then pair order.
std::vector<RankedPair> sort_by_rank_frequency(std::vector<RankedPair> ranked);

}  // namespace trevo
