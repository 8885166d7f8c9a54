#include "trevo/pattern.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace trevo {
namespace {

// Value of the piecewise-linear function (times, values) at t, held constant
// after the last breakpoint. cursor only moves forward, so a caller sweeping
// increasing t pays O(n) in total.
// Correctly rounded sum of at most 2 * kMetricCount values (Shewchuk
// partials, as in Python's math.fsum).
double exact_sum(std::span<const double> xs) {
    std::array<double, 2 * kMetricCount> partials{};
    std::size_t count = 0;
    for (double x : xs) {
        std::size_t used = 0;
        for (std::size_t j = 0; j < count; ++j) {
            double y = partials[j];
            if (std::abs(x) < std::abs(y)) std::swap(x, y);
            const double hi = x + y;
            const double lo = y - (hi - x);
            if (lo != 0.0) partials[used++] = lo;
            x = hi;
        }
        partials[used] = x;
        count = used + 1;
    }
    if (count == 0) return 0.0;
    std::size_t n = count - 1;
    double hi = partials[n];
    double lo = 0.0;
    while (n > 0) {
        const double x = hi;
        const double y = partials[--n];
        hi = x + y;
        lo = y - (hi - x);
        if (lo != 0.0) break;
    }
    // half-way case: round toward the sign of the remaining partials
    if (n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0))) {
        const double y = lo * 2.0;
        const double x = hi + y;
        if (y == x - hi) hi = x;
    }
    return hi;
}

double value_at(std::span<const double> times, std::span<const double> values, double t,
                std::size_t& cursor) {
    while (cursor + 1 < times.size() && times[cursor + 1] <= t) ++cursor;
    if (cursor + 1 == times.size()) return values[cursor];
    const double t0 = times[cursor];
    const double t1 = times[cursor + 1];
    const double v0 = values[cursor];
    const double v1 = values[cursor + 1];
    return v0 + (v1 - v0) * ((t - t0) / (t1 - t0));
}

// Maximum absolute difference of two piecewise-linear functions sharing their
// first breakpoint, evaluated at the union of breakpoints plus `present`.
double max_gap(std::span<const double> ta, std::span<const double> va, std::span<const double> tb,
               std::span<const double> vb, double present) {
    std::size_t ia = 0, ib = 0;        // next unvisited breakpoint
    std::size_t ca = 0, cb = 0;        // interpolation cursors
    double best = 0.0;
    double last = -std::numeric_limits<double>::infinity();
    constexpr double kInf = std::numeric_limits<double>::infinity();
    while (ia < ta.size() || ib < tb.size()) {
        const double xa = ia < ta.size() ? ta[ia] : kInf;
        const double xb = ib < tb.size() ? tb[ib] : kInf;
        const double t = std::min(xa, xb);
        if (xa == t) ++ia;
        if (xb == t) ++ib;
        best = std::max(best, std::abs(value_at(ta, va, t, ca) - value_at(tb, vb, t, cb)));
        last = t;
    }
    if (present > last) {
        best = std::max(best, std::abs(value_at(ta, va, present, ca) - value_at(tb, vb, present, cb)));
    }
    return best;
}

std::vector<double> min_max_normalize(const std::vector<double>& raw) {
    const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<double> out(raw.size());
    if (!(hi > lo)) {
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    const double span = hi - lo;
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - lo) / span;
    return out;
}

std::size_t continuous_trait(const Dataset& ds, std::string_view trait) {
    const std::size_t t = ds.traits.index_of(trait);
    if (!ds.traits.column(t).def.is_continuous()) {
        throw Error(ErrorCode::KindMismatch, "trait '" + std::string(trait) + "' is not continuous");
    }
    return t;
}

// Trait-independent part of the all-pairs table.
struct PairTable {
    std::vector<NodeIndex> a, b, mrca;
    std::vector<double> distance_time;
    std::vector<double> topo_edges;
    std::vector<std::vector<NodeIndex>> root_paths;  // by leaf position
    std::vector<std::size_t> pos_a, pos_b;            // leaf positions of each pair

    std::size_t size() const { return a.size(); }
};

PairTable build_pair_table(const PhyloTree& tree) {
    std::vector<NodeIndex> leaves(tree.leaves().begin(), tree.leaves().end());
    std::sort(leaves.begin(), leaves.end(),
              [&](NodeIndex x, NodeIndex y) { return tree.node(x).id < tree.node(y).id; });
    PairTable table;
    const std::size_t n = leaves.size();
    const std::size_t p = n * (n - 1) / 2;
    for (auto* v : {&table.a, &table.b, &table.mrca}) v->reserve(p);
    table.distance_time.reserve(p);
    table.topo_edges.reserve(p);
    table.root_paths.reserve(n);
    for (NodeIndex leaf : leaves) table.root_paths.push_back(tree.root_path(leaf));
    const double present = tree.present_time();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const NodeIndex m = tree.mrca(leaves[i], leaves[j]);
            table.a.push_back(leaves[i]);
            table.b.push_back(leaves[j]);
            table.mrca.push_back(m);
            table.distance_time.push_back(present - tree.node(m).time);
            table.topo_edges.push_back(static_cast<double>(
                tree.node(leaves[i]).depth + tree.node(leaves[j]).depth - 2 * tree.node(m).depth));
            table.pos_a.push_back(i);
            table.pos_b.push_back(j);
        }
    }
    return table;
}

struct TraitMetrics {
    std::vector<double> delta;
    std::vector<double> closeness;
};

TraitMetrics compute_trait_metrics(const Dataset& ds, const PairTable& table, std::size_t t) {
    const auto& tree = ds.tree;
    const auto& col = ds.traits.column(t);
    std::vector<double> est(tree.size());
    std::vector<double> time(tree.size());
    for (NodeIndex v = 0; v < tree.size(); ++v) {
        est[v] = col.continuous.at(v).value().estimate;
        time[v] = tree.node(v).time;
    }
    const double present = tree.present_time();

    TraitMetrics out;
    out.delta.resize(table.size());
    out.closeness.resize(table.size());
    std::vector<double> ta, va, tb, vb;
    for (std::size_t p = 0; p < table.size(); ++p) {
        const std::size_t dm = tree.node(table.mrca[p]).depth;
        const auto& pa = table.root_paths[table.pos_a[p]];
        const auto& pb = table.root_paths[table.pos_b[p]];
        ta.clear(); va.clear(); tb.clear(); vb.clear();
        for (std::size_t k = dm; k < pa.size(); ++k) {
            ta.push_back(time[pa[k]]);
            va.push_back(est[pa[k]]);
        }
        for (std::size_t k = dm; k < pb.size(); ++k) {
            tb.push_back(time[pb[k]]);
            vb.push_back(est[pb[k]]);
        }
        out.delta[p] = max_gap(ta, va, tb, vb, present);
        out.closeness[p] = std::abs(est[table.a[p]] - est[table.b[p]]);
    }
    return out;
}

struct TraitScores {
    std::vector<std::array<double, kMetricCount>> normalized;
    std::vector<double> score;
    std::vector<char> filtered;
    std::vector<std::size_t> order;  // pair indices by rank
    std::vector<std::size_t> rank;   // 1-based, by pair index
};

TraitScores score_trait(const PairTable& table, const TraitMetrics& m, const PatternQuery& q) {
    const std::size_t p = table.size();
    const auto n_time = min_max_normalize(table.distance_time);
    const auto n_topo = min_max_normalize(table.topo_edges);
    const auto n_delta = min_max_normalize(m.delta);
    const auto n_close = min_max_normalize(m.closeness);
    const double alpha = q.distance_mix;

    TraitScores s;
    s.normalized.resize(p);
    s.score.resize(p);
    s.filtered.assign(p, 0);
    for (std::size_t i = 0; i < p; ++i) {
        const std::array<double, kMetricCount> norm{alpha * n_time[i] + (1.0 - alpha) * n_topo[i],
                                                    n_delta[i], n_close[i]};
        s.normalized[i] = norm;
        // Numerator terms: w*n for high, w and -w*n for low. Summed exactly so
        // that equal terms cancel and tied pairs get bit-identical scores.
        std::array<double, 2 * kMetricCount> terms{};
        std::size_t used = 0;
        double den = 0.0;
        for (std::size_t k = 0; k < kMetricCount; ++k) {
            if (q.targets[k] == Target::Ignore) continue;
            const double wn = q.weights[k] * norm[k];
            if (q.targets[k] == Target::High) {
                terms[used++] = wn;
            } else {
                terms[used++] = q.weights[k];
                terms[used++] = -wn;
            }
            den += q.weights[k];
        }
        s.score[i] = exact_sum(std::span<const double>(terms.data(), used)) / den;
        if (q.min_distance_time && table.distance_time[i] < *q.min_distance_time) {
            s.score[i] = 0.0;
            s.filtered[i] = 1;
        }
    }
    s.order.resize(p);
    std::iota(s.order.begin(), s.order.end(), std::size_t{0});
    // Pair indices already follow lexicographic (leaf_a, leaf_b) order.
    std::sort(s.order.begin(), s.order.end(), [&](std::size_t x, std::size_t y) {
        if (s.score[x] != s.score[y]) return s.score[x] > s.score[y];
        return x < y;
    });
    s.rank.resize(p);
    for (std::size_t r = 0; r < p; ++r) s.rank[s.order[r]] = r + 1;
    return s;
}

}  // namespace

std::string_view to_string(Target t) {
    switch (t) {
        case Target::High: return "high";
        case Target::Low: return "low";
        case Target::Ignore: return "ignore";
    }
    return "ignore";
}

std::optional<Target> target_from(std::string_view s) {
    if (s == "high") return Target::High;
    if (s == "low") return Target::Low;
    if (s == "ignore") return Target::Ignore;
    return std::nullopt;
}

void validate_query(const PatternQuery& q) {
    double active = 0.0;
    bool any = false;
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        const double w = q.weights[k];
        if (!std::isfinite(w) || w < 0.0) {
            throw Error(ErrorCode::InvalidQuery,
                        "weight for " + std::string(kMetricNames[k]) + " must be a finite value >= 0");
        }
        if (q.targets[k] != Target::Ignore) {
            any = true;
            active += w;
        }
    }
    if (!any) throw Error(ErrorCode::InvalidQuery, "at least one metric target must not be 'ignore'");
    if (!(active > 0.0)) throw Error(ErrorCode::InvalidQuery, "active weights must sum to a positive value");
    if (!(q.distance_mix >= 0.0 && q.distance_mix <= 1.0)) {
        throw Error(ErrorCode::InvalidQuery, "distance mix must lie in [0, 1]");
    }
    if (q.min_distance_time && !std::isfinite(*q.min_distance_time)) {
        throw Error(ErrorCode::InvalidQuery, "minimum distance must be finite");
    }
}

const std::vector<Preset>& presets() {
    static const std::vector<Preset> catalog = [] {
        using T = Target;
        auto make = [](std::string id, std::string name, T d, T dl, T c) {
            Preset p;
            p.id = std::move(id);
            p.name = std::move(name);
            p.query.targets = {d, dl, c};
            p.query.weights = {1.0, 1.0, 1.0};
            p.query.distance_mix = 0.5;
            p.query.preset_id = p.id;
            return p;
        };
        return std::vector<Preset>{
            make("convergence", "Convergence", T::High, T::High, T::Low),
            make("deep-divergence", "Deep divergence", T::High, T::High, T::High),
            make("ancient-stasis", "Ancient stasis", T::High, T::Low, T::Low),
            make("recent-rapid-divergence", "Recent rapid divergence", T::Low, T::High, T::High),
            make("transient-excursion", "Transient excursion", T::Low, T::High, T::Low),
            make("recent-stasis", "Recent stasis", T::Low, T::Low, T::Low),
        };
    }();
    return catalog;
}

std::optional<Preset> find_preset(std::string_view id) {
    for (const auto& p : presets()) {
        if (p.id == id) return p;
    }
    return std::nullopt;
}

Trajectory trajectory(const Dataset& ds, NodeIndex mrca, NodeIndex leaf, std::string_view trait) {
    const std::size_t t = continuous_trait(ds, trait);
    Trajectory traj;
    traj.leaf = leaf;
    for (NodeIndex v : path_from(ds.tree, mrca, leaf)) {
        const auto& cell = ds.traits.continuous(t, v);
        TrajectorySample s{v, ds.tree.node(v).time, cell.estimate, cell.lower, cell.upper};
        if (ds.tree.node(v).is_leaf()) s.lower = s.upper = s.estimate;
        traj.samples.push_back(s);
    }
    return traj;
}

DistanceMetric metric_distance(const PhyloTree& tree, NodeIndex a, NodeIndex b) {
    if (a >= tree.size() || !tree.node(a).is_leaf() || b >= tree.size() || !tree.node(b).is_leaf()) {
        throw Error(ErrorCode::UnknownLeaf, "distance needs two leaves");
    }
    if (a == b) throw Error(ErrorCode::SamePair, "distance needs two distinct leaves");
    const NodeIndex m = tree.mrca(a, b);
    return {tree.present_time() - tree.node(m).time, topo_edges(tree, a, b)};
}

double metric_delta(const Trajectory& a, const Trajectory& b, std::optional<double> present) {
    if (a.samples.empty() || b.samples.empty() || a.samples.front().node != b.samples.front().node ||
        a.samples.front().time != b.samples.front().time) {
        throw Error(ErrorCode::MismatchedRoot, "trajectories must start at the same ancestor");
    }
    auto split = [](const Trajectory& tr, std::vector<double>& times, std::vector<double>& values) {
        for (const auto& s : tr.samples) {
            times.push_back(s.time);
            values.push_back(s.estimate);
        }
    };
    std::vector<double> ta, va, tb, vb;
    split(a, ta, va);
    split(b, tb, vb);
    const double end = present.value_or(std::max(ta.back(), tb.back()));
    return max_gap(ta, va, tb, vb, end);
}

double metric_closeness(const Dataset& ds, NodeIndex a, NodeIndex b, std::string_view trait) {
    const std::size_t t = continuous_trait(ds, trait);
    for (NodeIndex v : {a, b}) {
        if (v >= ds.tree.size() || !ds.tree.node(v).is_leaf()) {
            throw Error(ErrorCode::UnknownLeaf, "closeness needs two leaves");
        }
    }
    return std::abs(ds.traits.continuous(t, a).estimate - ds.traits.continuous(t, b).estimate);
}

PairMetrics pair_metrics(const Dataset& ds, NodeIndex a, NodeIndex b, std::string_view trait) {
    if (ds.tree.node(b).id < ds.tree.node(a).id) std::swap(a, b);
    const auto dist = metric_distance(ds.tree, a, b);
    const NodeIndex m = ds.tree.mrca(a, b);
    PairMetrics pm;
    pm.leaf_a = a;
    pm.leaf_b = b;
    pm.mrca = m;
    pm.distance_time = dist.distance_time;
    pm.topo_edges = dist.topo_edges;
    pm.delta = metric_delta(trajectory(ds, m, a, trait), trajectory(ds, m, b, trait), ds.tree.present_time());
    pm.closeness = metric_closeness(ds, a, b, trait);
    return pm;
}

std::size_t top_percent_threshold(std::size_t total_pairs) {
    return std::max<std::size_t>(1, (total_pairs + 99) / 100);
}

std::vector<RankedPair> score_all_pairs(const Dataset& ds, const PatternQuery& q) {
    validate_query(q);
    const auto traits = ds.continuous_traits();
    if (traits.empty()) throw Error(ErrorCode::NoContinuousTrait, "dataset has no continuous trait");
    const std::size_t primary = continuous_trait(ds, q.primary_trait);
    if (ds.tree.leaves().size() < 2) throw Error(ErrorCode::TooFewLeaves, "ranking needs at least two leaves");

    const PairTable table = build_pair_table(ds.tree);
    const std::size_t total = table.size();
    const std::size_t threshold = top_percent_threshold(total);

    std::vector<TraitMetrics> metrics;
    std::vector<TraitScores> scores;
    metrics.reserve(traits.size());
    scores.reserve(traits.size());
    std::size_t primary_slot = 0;
    for (std::size_t k = 0; k < traits.size(); ++k) {
        if (traits[k] == primary) primary_slot = k;
        metrics.push_back(compute_trait_metrics(ds, table, traits[k]));
        scores.push_back(score_trait(table, metrics.back(), q));
    }

    const auto& main = scores[primary_slot];
    const auto& main_metrics = metrics[primary_slot];
    std::vector<RankedPair> out;
    out.reserve(total);
    for (std::size_t r = 0; r < total; ++r) {
        const std::size_t p = main.order[r];
        RankedPair rp;
        rp.metrics = {table.a[p],
                      table.b[p],
                      table.mrca[p],
                      table.distance_time[p],
                      static_cast<int>(table.topo_edges[p]),
                      main_metrics.delta[p],
                      main_metrics.closeness[p]};
        rp.score = main.score[p];
        rp.rank = r + 1;
        rp.normalized = main.normalized[p];
        for (std::size_t k = 0; k < kMetricCount; ++k) {
            if (q.targets[k] == Target::Ignore) continue;
            rp.desirability[k] = q.targets[k] == Target::High ? rp.normalized[k] : 1.0 - rp.normalized[k];
        }
        rp.filtered = main.filtered[p] != 0;
        rp.heatmap.reserve(traits.size());
        for (std::size_t k = 0; k < traits.size(); ++k) {
            const std::size_t rank = scores[k].rank[p];
            const bool top = rank <= threshold;
            rp.heatmap.push_back({traits[k], rank, top});
            rp.top_rank_frequency += top ? 1 : 0;
        }
        out.push_back(std::move(rp));
    }
    return out;
}

std::vector<RankedPair> sort_by_rank_frequency(std::vector<RankedPair> ranked) {
    // Equal scores were ranked by pair order, so rank finishes the tie-break.
    std::stable_sort(ranked.begin(), ranked.end(), [](const RankedPair& x, const RankedPair& y) {
        if (x.top_rank_frequency != y.top_rank_frequency) return x.top_rank_frequency > y.top_rank_frequency;
        if (x.score != y.score) return x.score > y.score;
        return x.rank < y.rank;
    });
    return ranked;
}

}  // namespace trevo
