#pragma once

// CoNLL-U dependency parses.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "compsense/common.hpp"

namespace compsense {

struct DepToken {
  int index = 0;  // 1-based
  std::string form;
  std::string lemma;
  std::string upos;
  std::string xpos;
  int head = 0;  // 0 = root
  std::string deprel;

  friend bool operator==(const DepToken&, const DepToken&) = default;
};

struct DepTree {
  std::vector<DepToken> tokens;
  std::optional<std::string> pair_id;
  std::optional<std::string> side;  // "# side = premise|hypothesis"
  std::size_t ordinal = 0;          // 1-based sentence number in the file

  const DepToken& at(int index) const { return tokens.at(static_cast<std::size_t>(index - 1)); }
  std::size_t size() const noexcept { return tokens.size(); }

  std::vector<int> children(int index) const {
    std::vector<int> out;
    for (const DepToken& t : tokens) {
      if (t.head == index) out.push_back(t.index);
    }
    return out;
  }

  // Sorted token indices of the subtree rooted at `index`.
  std::vector<int> yield(int index) const {
    std::vector<int> out;
    std::vector<int> stack{index};
    while (!stack.empty()) {
      const int n = stack.back();
      stack.pop_back();
      out.push_back(n);
      for (const DepToken& t : tokens) {
        if (t.head == n) stack.push_back(t.index);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  friend bool operator==(const DepTree&, const DepTree&) = default;
};

struct ConlluRejection {
  std::size_t ordinal = 0;
  std::string reason;
};

// UD v1 "dobj" becomes v2 "obj"; every other relation is kept verbatim.
inline std::string normalize_deprel(std::string_view rel) {
  if (rel == "dobj") return "obj";
  return std::string(rel);
}

// PTB-style tag for a token: xpos when present, else a coarse mapping of
// the universal tag.
inline std::string ptb_tag(const DepToken& t) {
  if (!t.xpos.empty() && t.xpos != "_") return t.xpos;
  if (t.upos == "NOUN") return "NN";
  if (t.upos == "PROPN") return "NNP";
  if (t.upos == "VERB" || t.upos == "AUX") return "VB";
  if (t.upos == "ADJ") return "JJ";
  if (t.upos == "ADV") return "RB";
  if (t.upos == "PRON") return "PRP";
  if (t.upos == "DET") return "DT";
  return t.upos;
}

// Empty string when the tree is well formed, else the reason it is not.
inline std::string validate_dep_tree(const DepTree& tree) {
  const int n = static_cast<int>(tree.tokens.size());
  if (n == 0) return "empty sentence";
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const DepToken& t = tree.tokens[static_cast<std::size_t>(i)];
    if (t.index != i + 1) return "token ids not contiguous from 1";
    if (t.head < 0 || t.head > n) return "head out of range at token " + std::to_string(t.index);
    if (t.head == t.index) return "self-loop at token " + std::to_string(t.index);
    if (t.head == 0) ++roots;
  }
  if (roots != 1) return roots == 0 ? "no root (cyclic heads)" : "multiple roots";
  // Every token must reach the root within n steps.
  for (const DepToken& t : tree.tokens) {
    int cur = t.index;
    int steps = 0;
    while (cur != 0) {
      cur = tree.at(cur).head;
      if (++steps > n) return "cyclic heads at token " + std::to_string(t.index);
    }
  }
  return {};
}

// Streaming reader. Malformed sentences are recorded as rejections and
// reading continues with the next block.
class ConlluReader {
 public:
  explicit ConlluReader(const std::filesystem::path& path) : in_(open_input(path)) {}
  explicit ConlluReader(std::istream& in) : borrowed_(&in) {}

  bool next(DepTree& out) {
    std::istream& in = borrowed_ ? *borrowed_ : in_;
    std::string line;
    for (;;) {
      DepTree tree;
      std::string error;
      bool any = false;
      while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) {
          if (any) break;
          continue;
        }
        any = true;
        if (line.front() == '#') {
          read_comment(line, tree);
          continue;
        }
        if (!error.empty()) continue;
        error = read_token_line(line, tree);
      }
      if (!any) return false;
      tree.ordinal = ++ordinal_;
      if (error.empty()) error = validate_dep_tree(tree);
      if (error.empty()) {
        out = std::move(tree);
        return true;
      }
      rejections_.push_back({tree.ordinal, error});
    }
  }

  const std::vector<ConlluRejection>& rejections() const noexcept { return rejections_; }

 private:
  static void read_comment(const std::string& line, DepTree& tree) {
    std::string_view body = trim(std::string_view(line).substr(1));
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) return;
    const std::string_view key = trim(body.substr(0, eq));
    const std::string value(trim(body.substr(eq + 1)));
    if (key == "pair_id") tree.pair_id = value;
    if (key == "side") tree.side = value;
  }

  static std::string read_token_line(const std::string& line, DepTree& tree) {
    const auto cols = split_view(line, '\t');
    if (cols.size() != 10) return "expected 10 columns, got " + std::to_string(cols.size());
    // Multi-word tokens ("1-2") and empty nodes ("1.1") are not syntactic words.
    if (cols[0].find('-') != std::string_view::npos || cols[0].find('.') != std::string_view::npos) {
      return {};
    }
    DepToken t;
    try {
      t.index = parse_int<int>(cols[0]);
    } catch (const DataError&) {
      return "non-integer id '" + std::string(cols[0]) + "'";
    }
    try {
      t.head = parse_int<int>(cols[6]);
    } catch (const DataError&) {
      return "non-integer head '" + std::string(cols[6]) + "'";
    }
    t.form = std::string(cols[1]);
    t.lemma = std::string(cols[2]);
    t.upos = std::string(cols[3]);
    t.xpos = std::string(cols[4]);
    t.deprel = normalize_deprel(cols[7]);
    tree.tokens.push_back(std::move(t));
    return {};
  }

  std::ifstream in_;
  std::istream* borrowed_ = nullptr;
  std::size_t ordinal_ = 0;
  std::vector<ConlluRejection> rejections_;
};

inline std::vector<DepTree> load_conllu(const std::filesystem::path& path,
                                        std::vector<ConlluRejection>* rejections = nullptr) {
  ConlluReader reader(path);
  std::vector<DepTree> out;
  DepTree t;
  while (reader.next(t)) out.push_back(std::move(t));
  if (rejections) *rejections = reader.rejections();
  return out;
}

inline std::string render_conllu(const DepTree& tree) {
  std::string out;
  if (tree.pair_id) out += "# pair_id = " + *tree.pair_id + "\n";
  if (tree.side) out += "# side = " + *tree.side + "\n";
  for (const DepToken& t : tree.tokens) {
    out += std::to_string(t.index) + '\t' + t.form + '\t' + t.lemma + '\t' + t.upos + '\t' +
           t.xpos + "\t_\t" + std::to_string(t.head) + '\t' + t.deprel + "\t_\t_\n";
  }
  out += '\n';
  return out;
}

}  // namespace compsense
