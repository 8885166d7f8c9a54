#include "trevo/newick.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <vector>

namespace trevo {
namespace {

constexpr std::size_t kMaxNesting = 10000;

bool is_label_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '.' || c == '-';
}

bool is_number_char(char c) {
    return (c >= '0' && c <= '9') || c == '.' || c == '-' || c == '+' || c == 'e' || c == 'E';
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

class NewickParser {
public:
    explicit NewickParser(std::string_view text) : text_(text) {}

    PhyloTree run() {
        skip_space();
        if (at_end()) fail("empty input");
        parse_subtree(std::nullopt, 0);
        skip_space();
        if (peek() == ':') {
            ++pos_;
            skip_space();
            parse_length();  // root length is accepted and discarded
            skip_space();
        }
        if (at_end()) fail("expected ';' at end of input");
        if (peek() != ';') fail(std::string("unexpected '") + peek() + "'");
        ++pos_;
        skip_space();
        if (!at_end()) fail("trailing characters after ';'");

        for (std::size_t i = 0; i < specs_.size(); ++i) {
            if (specs_[i].id.empty()) specs_[i].id = "_in" + std::to_string(i);
        }
        return PhyloTree::build(std::move(specs_));
    }

private:
    [[noreturn]] void fail(const std::string& what, ErrorCode code = ErrorCode::SyntaxError) const {
        throw ParseError(code, pos_, what);
    }

    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return at_end() ? '\0' : text_[pos_]; }
    void skip_space() {
        while (!at_end() && is_space(text_[pos_])) ++pos_;
    }

    // Creates the node in preorder, then its children, then reads its label.
    void parse_subtree(std::optional<std::size_t> parent, std::size_t nesting) {
        if (nesting > kMaxNesting) fail("nesting too deep");
        const std::size_t self = specs_.size();
        specs_.push_back(NodeSpec{"", parent, 0.0});

        if (peek() == '(') {
            ++pos_;
            for (;;) {
                skip_space();
                parse_branch(self, nesting + 1);
                skip_space();
                if (peek() == ',') {
                    ++pos_;
                    continue;
                }
                if (peek() == ')') {
                    ++pos_;
                    break;
                }
                if (at_end()) fail("unbalanced parenthesis at end of input");
                fail(std::string("unexpected '") + peek() + "' in child list");
            }
            skip_space();
            if (peek() == '\'' || is_label_char(peek())) specs_[self].id = parse_label();
            return;
        }
        if (at_end()) fail("unexpected end of input");
        if (peek() != '\'' && !is_label_char(peek())) {
            fail(std::string("unexpected '") + peek() + "'");
        }
        specs_[self].id = parse_label();
        if (specs_[self].id.empty()) fail("leaf without a label");
    }

    void parse_branch(std::size_t parent, std::size_t nesting) {
        const std::size_t child = specs_.size();
        parse_subtree(parent, nesting);
        skip_space();
        if (peek() != ':') fail("branch without length", ErrorCode::MissingBranchLength);
        ++pos_;
        skip_space();
        const std::size_t at = pos_;
        const double len = parse_length();
        if (!(len > 0.0)) {
            throw ParseError(ErrorCode::NonPositiveBranchLength, at,
                             "branch length must be positive");
        }
        specs_[child].branch_length = len;
    }

    double parse_length() {
        const std::size_t start = pos_;
        while (!at_end() && is_number_char(text_[pos_])) ++pos_;
        if (start == pos_) fail("branch without length", ErrorCode::MissingBranchLength);
        const char* first = text_.data() + start;
        const char* last = text_.data() + pos_;
        if (*first == '+') ++first;
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
            pos_ = start;
            fail("malformed branch length");
        }
        return value;
    }

    std::string parse_label() {
        std::string out;
        if (peek() == '\'') {
            ++pos_;
            for (;;) {
                if (at_end()) fail("unterminated quoted label");
                const char c = text_[pos_++];
                if (c == '\'') {
                    if (peek() == '\'') {
                        out.push_back('\'');
                        ++pos_;
                        continue;
                    }
                    break;
                }
                out.push_back(c);
            }
            if (out.empty()) fail("empty quoted label");
            return out;
        }
        while (!at_end() && is_label_char(text_[pos_])) out.push_back(text_[pos_++]);
        return out;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::vector<NodeSpec> specs_;
};

void append_label(std::string& out, std::string_view label) {
    if (is_plain_label(label)) {
        out.append(label);
        return;
    }
    out.push_back('\'');
    for (char c : label) {
        if (c == '\'') out.push_back('\'');
        out.push_back(c);
    }
    out.push_back('\'');
}

}  // namespace

bool is_plain_label(std::string_view label) {
    return !label.empty() && std::all_of(label.begin(), label.end(), is_label_char);
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

PhyloTree parse_newick(std::string_view text) { return NewickParser(text).run(); }

std::string serialize_newick(const PhyloTree& tree) {
    std::string out;
    // (node, next child) frames; avoids recursion on deep caterpillars.
    std::vector<std::pair<NodeIndex, std::size_t>> stack{{tree.root(), 0}};
    while (!stack.empty()) {
        auto& [cur, next] = stack.back();
        const Node& node = tree.node(cur);
        if (next == 0 && !node.is_leaf()) out.push_back('(');
        if (next < node.children.size()) {
            if (next > 0) out.push_back(',');
            const NodeIndex child = node.children[next++];
            stack.emplace_back(child, 0);
            continue;
        }
        if (!node.is_leaf()) out.push_back(')');
        append_label(out, node.id);
        if (node.parent) {
            out.push_back(':');
            out += format_double(node.branch_length);
        }
        stack.pop_back();
    }
    out.push_back(';');
    return out;
}

}  // namespace trevo
