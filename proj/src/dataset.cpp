#include "trevo/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "trevo/newick.hpp"

namespace trevo {
namespace {

constexpr std::string_view kHeader = "node_id,trait,kind,state,value,lower,upper";

std::string where(std::string_view node, std::string_view trait) {
    return "node '" + std::string(node) + "' trait '" + std::string(trait) + "'";
}

std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"' && cur.empty() && !was_quoted) {
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
            was_quoted = false;
        } else if (was_quoted) {
            throw Error(ErrorCode::CsvFormat,
                        "line " + std::to_string(line_no) + ": text after closing quote");
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) {
        throw Error(ErrorCode::CsvFormat, "line " + std::to_string(line_no) + ": unterminated quote");
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::optional<double> parse_real(std::string_view s) {
    if (s.empty()) return std::nullopt;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

bool is_one_hot(const StateProbabilities& p) {
    return !p.empty() && *std::max_element(p.begin(), p.end()) >= 1.0 - kProbabilityTolerance;
}

}  // namespace

std::string_view to_string(TraitKind kind) {
    return kind == TraitKind::Continuous ? "continuous" : "discrete";
}

std::string_view to_string(Severity s) { return s == Severity::Error ? "error" : "warning"; }

std::string describe(const Diagnostic& d) {
    std::string out = std::string(to_string(d.severity)) + " " + std::string(to_string(d.code));
    if (!d.node.empty() || !d.trait.empty()) {
        out += " [";
        if (!d.node.empty()) out += "node '" + d.node + "'";
        if (!d.node.empty() && !d.trait.empty()) out += " ";
        if (!d.trait.empty()) out += "trait '" + d.trait + "'";
        out += "]";
    }
    return out + ": " + d.message;
}

std::optional<std::size_t> TraitMatrix::find(std::string_view trait) const {
    for (std::size_t t = 0; t < columns_.size(); ++t) {
        if (columns_[t].def.name == trait) return t;
    }
    return std::nullopt;
}

std::size_t TraitMatrix::index_of(std::string_view trait) const {
    if (auto t = find(trait)) return *t;
    throw Error(ErrorCode::UnknownTrait, "unknown trait '" + std::string(trait) + "'");
}

const ContinuousValue& TraitMatrix::continuous(std::size_t t, NodeIndex node) const {
    const auto& col = column(t);
    if (!col.def.is_continuous()) {
        throw Error(ErrorCode::KindMismatch, "trait '" + col.def.name + "' is discrete");
    }
    const auto& cell = col.continuous.at(node);
    if (!cell) throw Error(ErrorCode::MissingTrait, "missing value for trait '" + col.def.name + "'");
    return *cell;
}

const StateProbabilities& TraitMatrix::discrete(std::size_t t, NodeIndex node) const {
    const auto& col = column(t);
    if (col.def.is_continuous()) {
        throw Error(ErrorCode::KindMismatch, "trait '" + col.def.name + "' is continuous");
    }
    const auto& cell = col.discrete.at(node);
    if (!cell) throw Error(ErrorCode::MissingTrait, "missing value for trait '" + col.def.name + "'");
    return *cell;
}

std::vector<TraitDef> Dataset::trait_defs() const {
    std::vector<TraitDef> defs;
    for (const auto& col : traits.columns()) defs.push_back(col.def);
    return defs;
}

std::vector<std::size_t> Dataset::continuous_traits() const {
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < traits.trait_count(); ++t) {
        if (traits.column(t).def.is_continuous()) out.push_back(t);
    }
    return out;
}

std::vector<TraitRow> parse_traits_csv(std::string_view text) {
    if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
    std::vector<TraitRow> rows;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        if (line.ends_with('\r')) line.remove_suffix(1);
        if (!header_seen) {
            if (line != kHeader) {
                throw Error(ErrorCode::CsvFormat, "line 1: header must be '" + std::string(kHeader) + "'");
            }
            header_seen = true;
            continue;
        }
        if (line.empty()) continue;
        auto f = split_csv_line(line, line_no);
        const std::string at = "line " + std::to_string(line_no) + ": ";
        if (f.size() != 7) {
            throw Error(ErrorCode::CsvFormat, at + "expected 7 fields, found " + std::to_string(f.size()));
        }
        TraitRow row;
        row.node_id = f[0];
        row.trait = f[1];
        if (row.node_id.empty() || row.trait.empty()) {
            throw Error(ErrorCode::CsvFormat, at + "node_id and trait are required");
        }
        if (f[2] == "continuous") {
            row.kind = TraitKind::Continuous;
        } else if (f[2] == "discrete") {
            row.kind = TraitKind::Discrete;
        } else {
            throw Error(ErrorCode::CsvFormat, at + "kind must be 'continuous' or 'discrete'");
        }
        if (!f[3].empty()) row.state = f[3];
        auto value = parse_real(f[4]);
        if (!value) throw Error(ErrorCode::CsvFormat, at + "value '" + f[4] + "' is not a number");
        row.value = *value;
        for (int k : {5, 6}) {
            if (f[k].empty()) continue;
            auto bound = parse_real(f[k]);
            if (!bound) throw Error(ErrorCode::CsvFormat, at + "bound '" + f[k] + "' is not a number");
            (k == 5 ? row.lower : row.upper) = *bound;
        }
        rows.push_back(std::move(row));
    }
    if (!header_seen) throw Error(ErrorCode::CsvFormat, "line 1: missing header");
    return rows;
}

TraitMatrix load_traits(const std::vector<TraitRow>& rows, const PhyloTree& tree, bool strict) {
    std::vector<TraitColumn> columns;
    std::map<std::string, std::size_t, std::less<>> by_name;
    for (const auto& row : rows) {
        auto [it, inserted] = by_name.try_emplace(row.trait, columns.size());
        if (inserted) {
            TraitColumn col;
            col.def.name = row.trait;
            col.def.kind = row.kind;
            columns.push_back(std::move(col));
        }
        auto& def = columns[it->second].def;
        if (def.kind != row.kind) {
            throw Error(ErrorCode::InvalidRow, "trait '" + row.trait + "' declared both continuous and discrete");
        }
        if (row.kind == TraitKind::Discrete && row.state &&
            std::find(def.states.begin(), def.states.end(), *row.state) == def.states.end()) {
            def.states.push_back(*row.state);
        }
    }

    const std::size_t n = tree.size();
    for (auto& col : columns) {
        if (col.def.is_continuous()) {
            col.continuous.assign(n, std::nullopt);
        } else {
            col.discrete.assign(n, std::nullopt);
        }
    }
    std::set<std::tuple<NodeIndex, std::size_t, std::size_t>> seen_states;

    for (const auto& row : rows) {
        const auto node = tree.find(row.node_id);
        if (!node) {
            throw Error(ErrorCode::UnknownNode, "unknown node '" + row.node_id + "'");
        }
        const bool leaf = tree.node(*node).is_leaf();
        const std::size_t t = by_name.find(row.trait)->second;
        auto& col = columns[t];
        const std::string loc = where(row.node_id, row.trait);

        if (row.kind == TraitKind::Continuous) {
            if (row.state) throw Error(ErrorCode::InvalidRow, loc + ": continuous row with a state");
            if (row.lower.has_value() != row.upper.has_value()) {
                throw Error(ErrorCode::InvalidRow, loc + ": lower and upper must be given together");
            }
            if (col.continuous[*node]) throw Error(ErrorCode::InvalidRow, loc + ": duplicate row");
            const bool bounded = row.lower.has_value();
            if (bounded && !(*row.lower <= row.value && row.value <= *row.upper)) {
                throw Error(ErrorCode::IntervalOrder, loc + ": requires lower <= value <= upper");
            }
            if (strict && leaf && bounded) {
                throw Error(ErrorCode::Strictness, loc + ": leaf values are measured and take no interval");
            }
            if (strict && !leaf && !bounded) {
                throw Error(ErrorCode::Strictness, loc + ": internal estimates need lower and upper bounds");
            }
            if (bounded) {
                col.continuous[*node] = ContinuousValue::uncertain(row.value, *row.lower, *row.upper);
            } else if (leaf) {
                col.continuous[*node] = ContinuousValue::known(row.value);
            } else {
                col.continuous[*node] = ContinuousValue::uncertain(row.value, row.value, row.value);
            }
        } else {
            if (!row.state) throw Error(ErrorCode::InvalidRow, loc + ": discrete row without a state");
            if (row.lower || row.upper) throw Error(ErrorCode::InvalidRow, loc + ": discrete row with bounds");
            if (!(row.value >= 0.0 && row.value <= 1.0)) {
                throw Error(ErrorCode::InvalidRow, loc + ": probability outside [0,1]");
            }
            const auto& states = col.def.states;
            const std::size_t s = static_cast<std::size_t>(
                std::find(states.begin(), states.end(), *row.state) - states.begin());
            if (!seen_states.emplace(*node, t, s).second) {
                throw Error(ErrorCode::InvalidRow, loc + ": duplicate row for state '" + *row.state + "'");
            }
            auto& cell = col.discrete[*node];
            if (!cell) cell = StateProbabilities(states.size(), 0.0);
            (*cell)[s] = row.value;
        }
    }

    for (NodeIndex v = 0; v < n; ++v) {
        const auto& node = tree.node(v);
        for (auto& col : columns) {
            const std::string loc = where(node.id, col.def.name);
            if (col.def.is_continuous()) {
                if (!col.continuous[v]) throw Error(ErrorCode::MissingTrait, loc + ": missing value");
                continue;
            }
            auto& cell = col.discrete[v];
            if (!cell) throw Error(ErrorCode::MissingTrait, loc + ": missing value");
            // States declared after this node's rows were read.
            cell->resize(col.def.states.size(), 0.0);
            double sum = 0.0;
            for (double p : *cell) sum += p;
            if (std::abs(sum - 1.0) > kProbabilityTolerance) {
                throw Error(ErrorCode::ProbabilitySum,
                            loc + ": probabilities sum to " + format_double(sum));
            }
            if (strict && node.is_leaf() && !is_one_hot(*cell)) {
                throw Error(ErrorCode::Strictness, loc + ": leaf state must be known (probability 1)");
            }
        }
    }
    return TraitMatrix(std::move(columns));
}

std::string write_traits_csv(const Dataset& ds) {
    std::string out(kHeader);
    out.push_back('\n');
    for (NodeIndex v = 0; v < ds.tree.size(); ++v) {
        const std::string node = csv_field(ds.tree.node(v).id);
        for (const auto& col : ds.traits.columns()) {
            const std::string trait = csv_field(col.def.name);
            if (col.def.is_continuous()) {
                const auto& cell = col.continuous.at(v);
                if (!cell) continue;
                out += node + "," + trait + ",continuous,," + format_double(cell->estimate);
                if (cell->has_interval) {
                    out += "," + format_double(cell->lower) + "," + format_double(cell->upper) + "\n";
                } else {
                    out += ",,\n";
                }
                continue;
            }
            const auto& cell = col.discrete.at(v);
            if (!cell) continue;
            for (std::size_t s = 0; s < col.def.states.size(); ++s) {
                out += node + "," + trait + ",discrete," + csv_field(col.def.states[s]) + "," +
                       format_double((*cell)[s]) + ",,\n";
            }
        }
    }
    return out;
}

std::vector<Diagnostic> validate_dataset(const Dataset& ds, bool strict) {
    std::vector<Diagnostic> out;
    const auto& tree = ds.tree;
    const Severity shape = strict ? Severity::Error : Severity::Warning;

    for (NodeIndex v = 0; v < tree.size(); ++v) {
        const auto& node = tree.node(v);
        const auto k = node.children.size();
        if (k > 2) {
            out.push_back({shape, ErrorCode::Polytomy, node.id, "",
                           "node has " + std::to_string(k) + " children; trees must be binary"});
        } else if (k == 1) {
            out.push_back({shape, ErrorCode::Polytomy, node.id, "", "unary node; trees must be binary"});
        }
    }

    const double depth = tree.present_time();
    for (NodeIndex leaf : tree.leaves()) {
        const double t = tree.node(leaf).time;
        if (std::abs(depth - t) > kUltrametricTolerance * depth) {
            out.push_back({Severity::Warning, ErrorCode::NonUltrametric, tree.node(leaf).id, "",
                           "leaf time " + format_double(t) + " differs from present time " +
                               format_double(depth)});
        }
    }

    for (const auto& col : ds.traits.columns()) {
        const auto& name = col.def.name;
        for (NodeIndex v = 0; v < tree.size(); ++v) {
            const auto& node = tree.node(v);
            const bool leaf = node.is_leaf();
            auto report = [&](ErrorCode code, std::string msg) {
                out.push_back({Severity::Error, code, node.id, name, std::move(msg)});
            };
            if (col.def.is_continuous()) {
                const auto* cell = v < col.continuous.size() && col.continuous[v] ? &*col.continuous[v] : nullptr;
                if (!cell) {
                    report(ErrorCode::MissingTrait, "missing value");
                    continue;
                }
                if (!std::isfinite(cell->estimate) || !std::isfinite(cell->lower) || !std::isfinite(cell->upper)) {
                    report(ErrorCode::InvalidRow, "non-finite value");
                } else if (!(cell->lower <= cell->estimate && cell->estimate <= cell->upper)) {
                    report(ErrorCode::IntervalOrder, "requires lower <= estimate <= upper");
                }
                if (strict && leaf && cell->has_interval) {
                    report(ErrorCode::Strictness, "leaf carries an interval");
                }
                if (strict && !leaf && !cell->has_interval) {
                    report(ErrorCode::Strictness, "internal node lacks an interval");
                }
                continue;
            }
            const auto* cell = v < col.discrete.size() && col.discrete[v] ? &*col.discrete[v] : nullptr;
            if (!cell) {
                report(ErrorCode::MissingTrait, "missing value");
                continue;
            }
            if (cell->size() != col.def.states.size()) {
                report(ErrorCode::InvalidRow, "probability vector does not match declared states");
                continue;
            }
            double sum = 0.0;
            bool in_range = true;
            for (double p : *cell) {
                sum += p;
                in_range = in_range && p >= 0.0 && p <= 1.0;
            }
            if (!in_range) report(ErrorCode::InvalidRow, "probability outside [0,1]");
            if (!(std::abs(sum - 1.0) <= kProbabilityTolerance)) {
                report(ErrorCode::ProbabilitySum, "probabilities sum to " + format_double(sum));
            }
            if (strict && leaf && !is_one_hot(*cell)) {
                report(ErrorCode::Strictness, "leaf state is not known");
            }
        }
    }
    return out;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
    return std::any_of(diags.begin(), diags.end(),
                       [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

CheckedDataset check_dataset_text(std::string_view newick, std::string_view traits_csv, LoadOptions opts) {
    CheckedDataset result;
    auto fail = [&](const Error& e, std::string_view file) {
        result.diagnostics.push_back({Severity::Error, e.code(), "", "", std::string(file) + ": " + e.what()});
    };
    std::optional<PhyloTree> tree;
    std::optional<std::vector<TraitRow>> rows;
    try {
        tree.emplace(parse_newick(newick));
    } catch (const Error& e) {
        fail(e, "tree.nwk");
    }
    try {
        rows.emplace(parse_traits_csv(traits_csv));
    } catch (const Error& e) {
        fail(e, "traits.csv");
    }
    if (!tree || !rows) return result;
    try {
        auto matrix = load_traits(*rows, *tree, opts.strict);
        Dataset ds{std::move(*tree), std::move(matrix)};
        auto diags = validate_dataset(ds, opts.strict);
        result.diagnostics.insert(result.diagnostics.end(), diags.begin(), diags.end());
        result.dataset.emplace(std::move(ds));
    } catch (const Error& e) {
        fail(e, "traits.csv");
    }
    return result;
}

CheckedDataset check_dataset_dir(const std::filesystem::path& dir, LoadOptions opts) {
    const std::string newick = read_file(dir / "tree.nwk");
    const std::string csv = read_file(dir / "traits.csv");
    return check_dataset_text(newick, csv, opts);
}

Dataset load_dataset_dir(const std::filesystem::path& dir, LoadOptions opts) {
    auto checked = check_dataset_dir(dir, opts);
    for (const auto& d : checked.diagnostics) {
        if (d.severity == Severity::Error) throw Error(d.code, describe(d));
    }
    return std::move(*checked.dataset);
}

void write_dataset_dir(const Dataset& ds, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
    write_file(dir / "tree.nwk", serialize_newick(ds.tree) + "\n");
    write_file(dir / "traits.csv", write_traits_csv(ds));
}

}  // namespace trevo
