#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trevo/error.hpp"
#include "trevo/tree.hpp"

namespace trevo {

enum class TraitKind { Continuous, Discrete };

std::string_view to_string(TraitKind kind);

// One line of traits.csv.
struct TraitRow {
    std::string node_id;
    std::string trait;
    TraitKind kind = TraitKind::Continuous;
    std::optional<std::string> state;
    double value = 0.0;
    std::optional<double> lower;
    std::optional<double> upper;
};

struct TraitDef {
    std::string name;
    TraitKind kind = TraitKind::Continuous;
    std::vector<std::string> states;  // declared order; empty for continuous

    bool is_continuous() const noexcept { return kind == TraitKind::Continuous; }
};

// Known values have lower == upper == estimate and no interval.
struct ContinuousValue {
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    bool has_interval = false;

    static ContinuousValue known(double v) { return {v, v, v, false}; }
    static ContinuousValue uncertain(double v, double lo, double hi) { return {v, lo, hi, true}; }
};

using StateProbabilities = std::vector<double>;

// Values for one trait across all nodes (indexed by NodeIndex). Exactly one of
// the two vectors is populated, matching def.kind; nullopt marks a missing
// value.
struct TraitColumn {
    TraitDef def;
    std::vector<std::optional<ContinuousValue>> continuous;
    std::vector<std::optional<StateProbabilities>> discrete;
};

class TraitMatrix {
public:
    TraitMatrix() = default;
    explicit TraitMatrix(std::vector<TraitColumn> columns) : columns_(std::move(columns)) {}

    std::size_t trait_count() const noexcept { return columns_.size(); }
    const TraitColumn& column(std::size_t t) const { return columns_.at(t); }
    TraitColumn& column(std::size_t t) { return columns_.at(t); }
    const std::vector<TraitColumn>& columns() const noexcept { return columns_; }

    std::optional<std::size_t> find(std::string_view trait) const;
    // Throws Error{UnknownTrait}.
    std::size_t index_of(std::string_view trait) const;

    // Throws Error{MissingTrait} when the cell is empty.
    const ContinuousValue& continuous(std::size_t t, NodeIndex node) const;
    const StateProbabilities& discrete(std::size_t t, NodeIndex node) const;

private:
    std::vector<TraitColumn> columns_;
};

struct Dataset {
    PhyloTree tree;
    TraitMatrix traits;

    std::vector<TraitDef> trait_defs() const;
    std::vector<std::size_t> continuous_traits() const;
};

// Parses traits.csv text. Header must be exactly
// node_id,trait,kind,state,value,lower,upper. Throws Error{CsvFormat} with the
// 1-based line number in the message.
std::vector<TraitRow> parse_traits_csv(std::string_view text);

// Groups rows into a complete node x trait matrix. Discrete states keep the
// order of first appearance; states a node does not list get probability 0.
// Strict mode rejects leaf intervals and internal continuous values without
// bounds; lenient mode turns the latter into zero-width intervals.
TraitMatrix load_traits(const std::vector<TraitRow>& rows, const PhyloTree& tree, bool strict);

// Rows in node preorder, trait order, then state order. Inverse of
// parse_traits_csv + load_traits.
std::string write_traits_csv(const Dataset& ds);

enum class Severity { Error, Warning };

struct Diagnostic {
    Severity severity = Severity::Error;
    ErrorCode code = ErrorCode::InvalidRow;
    std::string node;
    std::string trait;
    std::string message;

    bool operator==(const Diagnostic&) const = default;
};

std::string_view to_string(Severity s);

// "error MissingTrait [node 'A' trait 'svl']: missing value"
std::string describe(const Diagnostic& d);

constexpr double kProbabilityTolerance = 1e-6;
constexpr double kUltrametricTolerance = 1e-6;  // relative to tree depth

// Empty iff every dataset invariant holds. Polytomies and unary nodes are
// errors in strict mode and warnings otherwise; non-ultrametric leaves are
// always warnings.
std::vector<Diagnostic> validate_dataset(const Dataset& ds, bool strict = true);

bool has_errors(const std::vector<Diagnostic>& diags);

// Canonical directory layout: tree.nwk + traits.csv (+ ignored meta.txt).
struct LoadOptions {
    bool strict = true;
};

// Throws Error{Io} for unreadable files, and the parse/load errors above.
Dataset load_dataset_dir(const std::filesystem::path& dir, LoadOptions opts = {});

// Like load_dataset_dir but reports every failure as a diagnostic. The
// dataset is present only when loading succeeded.
struct CheckedDataset {
    std::optional<Dataset> dataset;
    std::vector<Diagnostic> diagnostics;
};
CheckedDataset check_dataset_dir(const std::filesystem::path& dir, LoadOptions opts = {});
CheckedDataset check_dataset_text(std::string_view newick, std::string_view traits_csv,
                                  LoadOptions opts = {});

void write_dataset_dir(const Dataset& ds, const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace trevo
