#include "trevo/tree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "trevo/error.hpp"

namespace trevo {

PhyloTree PhyloTree::build(std::vector<NodeSpec> specs) {
    if (specs.empty()) {
        throw Error(ErrorCode::SyntaxError, "tree has no nodes");
    }
    const std::size_t n = specs.size();
    std::optional<std::size_t> root;
    std::vector<std::vector<std::size_t>> children(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& parent = specs[i].parent;
        if (!parent) {
            if (root) {
                throw Error(ErrorCode::SyntaxError, "tree has more than one root");
            }
            root = i;
            continue;
        }
        if (*parent >= n || *parent == i) {
            throw Error(ErrorCode::SyntaxError, "node '" + specs[i].id + "' has an invalid parent");
        }
        const double len = specs[i].branch_length;
        if (!std::isfinite(len) || len <= 0.0) {
            throw Error(ErrorCode::NonPositiveBranchLength,
                        "branch above '" + specs[i].id + "' must have positive length");
        }
        children[*parent].push_back(i);
    }
    if (!root) {
        throw Error(ErrorCode::SyntaxError, "tree has no root");
    }

    // Preorder relabelling; parents always precede children.
    std::vector<std::size_t> order;
    order.reserve(n);
    std::vector<std::size_t> stack{*root};
    while (!stack.empty()) {
        const std::size_t cur = stack.back();
        stack.pop_back();
        order.push_back(cur);
        if (order.size() > n) break;
        const auto& ch = children[cur];
        for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
    }
    if (order.size() != n) {
        throw Error(ErrorCode::SyntaxError, "parent links do not form a single rooted tree");
    }
    std::vector<NodeIndex> new_index(n);
    for (std::size_t k = 0; k < n; ++k) new_index[order[k]] = static_cast<NodeIndex>(k);

    PhyloTree tree;
    tree.nodes_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        auto& spec = specs[order[k]];
        Node& node = tree.nodes_[k];
        if (spec.id.empty()) {
            throw Error(ErrorCode::SyntaxError, "node without a label");
        }
        node.id = std::move(spec.id);
        if (spec.parent) {
            node.parent = new_index[*spec.parent];
            node.branch_length = spec.branch_length;
        }
        for (std::size_t c : children[order[k]]) node.children.push_back(new_index[c]);
    }
    tree.index();
    return tree;
}

void PhyloTree::index() {
    const std::size_t n = nodes_.size();
    by_id_.reserve(n);
    for (NodeIndex i = 0; i < n; ++i) {
        Node& node = nodes_[i];
        if (!by_id_.emplace(node.id, i).second) {
            throw Error(ErrorCode::DuplicateLabel, "duplicate label '" + node.id + "'");
        }
        if (node.parent) {
            const Node& parent = nodes_[*node.parent];
            node.time = parent.time + node.branch_length;
            node.depth = parent.depth + 1;
        }
        if (node.is_leaf()) {
            leaves_.push_back(i);
            present_time_ = std::max(present_time_, node.time);
        }
    }

    // Euler tour (iterative) recording each node on entry and after every child.
    euler_.reserve(2 * n);
    first_visit_.assign(n, 0);
    exit_visit_.assign(n, 0);
    std::vector<std::pair<NodeIndex, std::size_t>> stack{{root(), 0}};
    first_visit_[root()] = 0;
    euler_.push_back(root());
    while (!stack.empty()) {
        auto& [cur, next_child] = stack.back();
        const auto& ch = nodes_[cur].children;
        if (next_child < ch.size()) {
            const NodeIndex c = ch[next_child++];
            first_visit_[c] = static_cast<std::uint32_t>(euler_.size());
            euler_.push_back(c);
            stack.emplace_back(c, 0);
        } else {
            exit_visit_[cur] = static_cast<std::uint32_t>(euler_.size() - 1);
            stack.pop_back();
            if (!stack.empty()) euler_.push_back(stack.back().first);
        }
    }

    const std::size_t m = euler_.size();
    const std::size_t levels = std::bit_width(m);
    sparse_.assign(levels, {});
    sparse_[0].resize(m);
    for (std::uint32_t i = 0; i < m; ++i) sparse_[0][i] = i;
    for (std::size_t k = 1; k < levels; ++k) {
        const std::size_t span = std::size_t{1} << k;
        const std::size_t half = span >> 1;
        auto& row = sparse_[k];
        const auto& prev = sparse_[k - 1];
        row.resize(m - span + 1);
        for (std::size_t i = 0; i + span <= m; ++i) {
            const auto l = prev[i];
            const auto r = prev[i + half];
            row[i] = nodes_[euler_[l]].depth <= nodes_[euler_[r]].depth ? l : r;
        }
    }
}

std::optional<NodeIndex> PhyloTree::find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

NodeIndex PhyloTree::index_of(std::string_view id) const {
    if (auto i = find(id)) return *i;
    throw Error(ErrorCode::UnknownNode, "unknown node '" + std::string(id) + "'");
}

NodeIndex PhyloTree::leaf_index(std::string_view id) const {
    auto i = find(id);
    if (!i || !nodes_[*i].is_leaf()) {
        throw Error(ErrorCode::UnknownLeaf, "unknown leaf '" + std::string(id) + "'");
    }
    return *i;
}

NodeIndex PhyloTree::mrca(NodeIndex a, NodeIndex b) const {
    std::uint32_t l = first_visit_.at(a);
    std::uint32_t r = first_visit_.at(b);
    if (l > r) std::swap(l, r);
    const std::size_t k = std::bit_width(std::size_t{r - l + 1}) - 1;
    const auto x = sparse_[k][l];
    const auto y = sparse_[k][r + 1 - (std::size_t{1} << k)];
    return nodes_[euler_[x]].depth <= nodes_[euler_[y]].depth ? euler_[x] : euler_[y];
}

bool PhyloTree::is_ancestor_or_self(NodeIndex ancestor, NodeIndex node) const {
    return first_visit_.at(ancestor) <= first_visit_.at(node) &&
           exit_visit_[node] <= exit_visit_[ancestor];
}

std::vector<NodeIndex> PhyloTree::root_path(NodeIndex node) const {
    std::vector<NodeIndex> path(nodes_.at(node).depth + 1);
    for (std::size_t k = path.size(); k-- > 0;) {
        path[k] = node;
        if (nodes_[node].parent) node = *nodes_[node].parent;
    }
    return path;
}

NodeIndex mrca(const PhyloTree& tree, std::string_view a, std::string_view b) {
    return tree.mrca(tree.leaf_index(a), tree.leaf_index(b));
}

std::vector<NodeIndex> path_from(const PhyloTree& tree, NodeIndex ancestor, NodeIndex leaf) {
    if (!tree.is_ancestor_or_self(ancestor, leaf)) {
        throw Error(ErrorCode::NotAnAncestor, "'" + tree.node(ancestor).id +
                                                  "' is not an ancestor of '" +
                                                  tree.node(leaf).id + "'");
    }
    const std::size_t len = tree.node(leaf).depth - tree.node(ancestor).depth + 1;
    std::vector<NodeIndex> path(len);
    NodeIndex cur = leaf;
    for (std::size_t k = len; k-- > 0;) {
        path[k] = cur;
        if (k > 0) cur = *tree.node(cur).parent;
    }
    return path;
}

int topo_edges(const PhyloTree& tree, NodeIndex a, NodeIndex b) {
    const NodeIndex m = tree.mrca(a, b);
    return static_cast<int>(tree.node(a).depth + tree.node(b).depth - 2 * tree.node(m).depth);
}

int topo_edges(const PhyloTree& tree, std::string_view a, std::string_view b) {
    return topo_edges(tree, tree.leaf_index(a), tree.leaf_index(b));
}

double present_time(const PhyloTree& tree) { return tree.present_time(); }

bool structurally_equal(const PhyloTree& lhs, const PhyloTree& rhs) {
    if (lhs.size() != rhs.size()) return false;
    for (NodeIndex i = 0; i < lhs.size(); ++i) {
        const Node& x = lhs.node(i);
        const Node& y = rhs.node(i);
        if (x.id != y.id || x.parent != y.parent || x.children != y.children ||
            x.branch_length != y.branch_length || x.time != y.time) {
            return false;
        }
    }
    return true;
}

}  // namespace trevo
