#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace trevo {

using NodeIndex = std::uint32_t;

struct Node {
    std::string id;
    std::optional<NodeIndex> parent;
    std::vector<NodeIndex> children;
    double branch_length = 0.0;  // time units; 0 for the root
    double time = 0.0;           // cumulative time from the root
    std::uint32_t depth = 0;     // edge count from the root

    bool is_leaf() const noexcept { return children.empty(); }
};

// Input record for PhyloTree::build. Children keep the order in which they
// appear in the list.
struct NodeSpec {
    std::string id;
    std::optional<std::size_t> parent;
    double branch_length = 0.0;
};

// Rooted, time-calibrated tree. Immutable after construction; node indices
// are preorder positions, so every parent index is smaller than its
// children's.
class PhyloTree {
public:
    // Throws Error{DuplicateLabel, NonPositiveBranchLength, SyntaxError} when
    // the specs do not describe a single rooted tree with unique labels and
    // strictly positive non-root branch lengths.
    static PhyloTree build(std::vector<NodeSpec> specs);

    std::size_t size() const noexcept { return nodes_.size(); }
    NodeIndex root() const noexcept { return 0; }
    const Node& node(NodeIndex i) const { return nodes_.at(i); }
    std::span<const Node> nodes() const noexcept { return nodes_; }

    // Leaves in preorder.
    std::span<const NodeIndex> leaves() const noexcept { return leaves_; }
    std::size_t internal_count() const noexcept { return nodes_.size() - leaves_.size(); }

    std::optional<NodeIndex> find(std::string_view id) const;
    // Throws Error{UnknownNode}.
    NodeIndex index_of(std::string_view id) const;
    // Throws Error{UnknownLeaf} when id is missing or not a leaf.
    NodeIndex leaf_index(std::string_view id) const;

    // Deepest common ancestor-or-self of two nodes; O(1) after construction.
    NodeIndex mrca(NodeIndex a, NodeIndex b) const;
    bool is_ancestor_or_self(NodeIndex ancestor, NodeIndex node) const;

    double present_time() const noexcept { return present_time_; }

    // Root-to-node index path, root first.
    std::vector<NodeIndex> root_path(NodeIndex node) const;

private:
    PhyloTree() = default;
    void index();

    std::vector<Node> nodes_;
    std::vector<NodeIndex> leaves_;
    std::unordered_map<std::string, NodeIndex> by_id_;
    double present_time_ = 0.0;

    // Euler tour + sparse table over depths for constant-time LCA.
    std::vector<NodeIndex> euler_;
    std::vector<std::uint32_t> first_visit_;
    std::vector<std::uint32_t> exit_visit_;
    std::vector<std::vector<std::uint32_t>> sparse_;  // positions into euler_
};

// Name-based queries used by the pattern engine and the API.

// Throws Error{UnknownLeaf}.
NodeIndex mrca(const PhyloTree& tree, std::string_view a, std::string_view b);

// Nodes from ancestor down to leaf inclusive. Throws Error{NotAnAncestor}.
std::vector<NodeIndex> path_from(const PhyloTree& tree, NodeIndex ancestor, NodeIndex leaf);

// Edge count between two leaves through their MRCA. Throws Error{UnknownLeaf}.
int topo_edges(const PhyloTree& tree, std::string_view a, std::string_view b);
int topo_edges(const PhyloTree& tree, NodeIndex a, NodeIndex b);

double present_time(const PhyloTree& tree);

// Same nodes, parents, labels and branch lengths (children order included).
bool structurally_equal(const PhyloTree& lhs, const PhyloTree& rhs);

}  // namespace trevo
