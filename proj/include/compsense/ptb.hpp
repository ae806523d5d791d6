#pragma once

// Penn-Treebank s-expression reader and writer.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "compsense/common.hpp"

namespace compsense {

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : DataError(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// A node is either a leaf (surface set, no children, empty label) or an
// internal node with at least one child. Preterminals have a single leaf
// child and carry the POS tag as their label.
struct PtbTree {
  std::string label;
  std::vector<PtbTree> children;
  std::optional<std::string> leaf;

  static PtbTree make_leaf(std::string surface) {
    PtbTree t;
    t.leaf = std::move(surface);
    return t;
  }
  static PtbTree make_node(std::string label, std::vector<PtbTree> children) {
    PtbTree t;
    t.label = std::move(label);
    t.children = std::move(children);
    return t;
  }

  bool is_leaf() const noexcept { return leaf.has_value(); }
  bool is_preterminal() const noexcept {
    return children.size() == 1 && children.front().is_leaf();
  }

  friend bool operator==(const PtbTree&, const PtbTree&) = default;
};

struct TaggedToken {
  std::string surface;
  std::string pos;
  friend bool operator==(const TaggedToken&, const TaggedToken&) = default;
};

namespace detail {

class PtbReader {
 public:
  explicit PtbReader(std::string_view text) : text_(text) {}

  PtbTree read_document() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("empty parse", pos_);
    if (text_[pos_] != '(') throw ParseError("expected '('", pos_);
    PtbTree tree = read_node();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError("trailing input after tree", pos_);
    return tree;
  }

 private:
  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
  static bool is_delim(char c) { return is_space(c) || c == '(' || c == ')'; }

  void skip_ws() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  std::string read_atom() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_delim(text_[pos_])) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  // Precondition: text_[pos_] == '('.
  PtbTree read_node() {
    const std::size_t open = pos_;
    ++pos_;
    if (++depth_ > kMaxDepth) throw ParseError("tree too deep", open);
    skip_ws();
    PtbTree node;
    if (pos_ < text_.size() && !is_delim(text_[pos_])) node.label = read_atom();
    for (;;) {
      skip_ws();
      if (pos_ >= text_.size()) throw ParseError("unbalanced parentheses: missing ')'", pos_);
      const char c = text_[pos_];
      if (c == ')') {
        if (node.children.empty()) throw ParseError("empty node", open);
        ++pos_;
        --depth_;
        return node;
      }
      if (c == '(') {
        node.children.push_back(read_node());
      } else {
        node.children.push_back(PtbTree::make_leaf(read_atom()));
      }
    }
  }

  static constexpr int kMaxDepth = 10000;
  std::string_view text_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

inline void render_into(const PtbTree& t, std::string& out) {
  if (t.is_leaf()) {
    out += *t.leaf;
    return;
  }
  out += '(';
  out += t.label;
  for (const PtbTree& c : t.children) {
    out += ' ';
    render_into(c, out);
  }
  out += ')';
}

inline void collect_leaves(const PtbTree& node, std::vector<TaggedToken>& out) {
  for (const PtbTree& c : node.children) {
    if (c.is_leaf()) {
      out.push_back({*c.leaf, node.label});
    } else {
      collect_leaves(c, out);
    }
  }
}

}  // namespace detail

// Throws ParseError (with byte offset) on unbalanced input or empty nodes.
inline PtbTree parse_ptb(std::string_view s_expression) {
  return detail::PtbReader(s_expression).read_document();
}

inline std::string render_ptb(const PtbTree& tree) {
  std::string out;
  detail::render_into(tree, out);
  return out;
}

// Left-to-right leaves paired with the label of their parent node.
inline std::vector<TaggedToken> leaves_with_pos(const PtbTree& tree) {
  std::vector<TaggedToken> out;
  if (tree.is_leaf()) {
    out.push_back({*tree.leaf, ""});
    return out;
  }
  detail::collect_leaves(tree, out);
  return out;
}

// Leaf atoms may not contain whitespace or parentheses; map brackets to the
// treebank escapes.
inline std::string escape_ptb_atom(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '(') {
      out += "-LRB-";
    } else if (c == ')') {
      out += "-RRB-";
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      out += '_';
    } else {
      out += c;
    }
  }
  return out;
}

// "(FLAT (TAG tok) ...)": a parse-free carrier for a tagged token sequence.
inline std::string render_flat_parse(const std::vector<TaggedToken>& tokens) {
  std::string out = "(FLAT";
  for (const TaggedToken& t : tokens) {
    out += " (";
    out += escape_ptb_atom(t.pos.empty() ? std::string("UNK") : t.pos);
    out += ' ';
    out += escape_ptb_atom(t.surface);
    out += ')';
  }
  out += ')';
  return out;
}

}  // namespace compsense
