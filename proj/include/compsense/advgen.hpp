#pragma once

// Rule-based adversaries over dependency parses:
//   SOswap  - exchange the subject and object phrases of an SVO premise;
//             the pair (p, p') is a contradiction.
//   AddAmod - insert one adjective before two different nouns of the same
//             premise; the pair (p', h) is neutral.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include <json.hpp>

#include "compsense/common.hpp"
#include "compsense/conllu.hpp"
#include "compsense/corpus.hpp"
#include "compsense/label.hpp"
#include "compsense/ptb.hpp"

namespace compsense {

enum class Rule { kSoSwap, kAddAmod };

constexpr std::string_view rule_name(Rule r) noexcept { return r == Rule::kSoSwap ? "soswap" : "addamod"; }

inline std::optional<Rule> parse_rule(std::string_view s) {
  if (s == "soswap") return Rule::kSoSwap;
  if (s == "addamod") return Rule::kAddAmod;
  return std::nullopt;
}

constexpr Label expected_label(Rule r) noexcept {
  return r == Rule::kSoSwap ? Label::kContradiction : Label::kNeutral;
}

// Half-open range of 0-based token positions.
struct TokenSpan {
  int begin = 0;
  int end = 0;
  int size() const noexcept { return end - begin; }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

// Token indices are the tree's 1-based ids; spans are 0-based positions.
struct SvoFrame {
  int verb_index = 0;
  int subj_index = 0;
  int obj_index = 0;
  TokenSpan subj_span;
  TokenSpan obj_span;
  friend bool operator==(const SvoFrame&, const SvoFrame&) = default;
};

// ---------------------------------------------------------------------------
// Token predicates

inline std::string lemma_of(const DepToken& t) {
  return ascii_lower(t.lemma.empty() || t.lemma == "_" ? t.form : t.lemma);
}

inline bool is_common_noun(const DepToken& t) {
  const std::string tag = ptb_tag(t);
  return tag == "NN" || tag == "NNS";
}

inline bool is_proper_noun(const DepToken& t) {
  const std::string tag = ptb_tag(t);
  return tag == "NNP" || tag == "NNPS" || t.upos == "PROPN";
}

inline bool is_pronoun(const DepToken& t) {
  const std::string tag = ptb_tag(t);
  return t.upos == "PRON" || tag == "PRP" || tag == "PRP$" || tag == "WP" || tag == "WP$";
}

inline bool is_verb(const DepToken& t) { return ptb_tag(t).starts_with("VB"); }

inline std::string capitalize_first(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

inline std::string lowercase_first(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
  return s;
}

// ---------------------------------------------------------------------------
// SVO frames

enum class SvoReject { kNone, kNoFrame, kPronoun, kNotCommonNoun, kSameLemma, kNonContiguous };

constexpr std::string_view svo_reject_name(SvoReject r) noexcept {
  switch (r) {
    case SvoReject::kNone: return "none";
    case SvoReject::kNoFrame: return "no_svo_frame";
    case SvoReject::kPronoun: return "pronoun_argument";
    case SvoReject::kNotCommonNoun: return "argument_not_common_noun";
    case SvoReject::kSameLemma: return "same_lemma";
    case SvoReject::kNonContiguous: return "noncontiguous_span";
  }
  return "none";
}

struct SvoSearch {
  std::optional<SvoFrame> frame;
  SvoReject reason = SvoReject::kNoFrame;  // first failing candidate's reason
};

namespace detail {

inline std::optional<TokenSpan> contiguous_yield(const DepTree& tree, int head) {
  const std::vector<int> y = tree.yield(head);
  if (y.back() - y.front() + 1 != static_cast<int>(y.size())) return std::nullopt;
  return TokenSpan{y.front() - 1, y.back()};
}

inline int first_child_with(const DepTree& tree, int head, std::string_view rel) {
  for (const DepToken& t : tree.tokens) {
    if (t.head == head && normalize_deprel(t.deprel) == rel) return t.index;
  }
  return 0;
}

}  // namespace detail

// First verb, in sentence order, with an nsubj and an obj child that are
// non-pronominal common nouns with distinct lemmas and contiguous yields.
inline SvoSearch find_svo_detailed(const DepTree& tree) {
  SvoSearch out;
  bool have_reason = false;
  auto reject = [&](SvoReject r) {
    if (!have_reason) {
      out.reason = r;
      have_reason = true;
    }
  };
  for (const DepToken& v : tree.tokens) {
    if (!is_verb(v)) continue;
    const int subj = detail::first_child_with(tree, v.index, "nsubj");
    const int obj = detail::first_child_with(tree, v.index, "obj");
    if (subj == 0 || obj == 0) continue;
    const DepToken& s = tree.at(subj);
    const DepToken& o = tree.at(obj);
    if (is_pronoun(s) || is_pronoun(o)) {
      reject(SvoReject::kPronoun);
      continue;
    }
    if (!is_common_noun(s) || !is_common_noun(o)) {
      reject(SvoReject::kNotCommonNoun);
      continue;
    }
    if (lemma_of(s) == lemma_of(o)) {
      reject(SvoReject::kSameLemma);
      continue;
    }
    auto subj_span = detail::contiguous_yield(tree, subj);
    auto obj_span = detail::contiguous_yield(tree, obj);
    if (!subj_span || !obj_span) {
      reject(SvoReject::kNonContiguous);
      continue;
    }
    out.frame = SvoFrame{v.index, subj, obj, *subj_span, *obj_span};
    out.reason = SvoReject::kNone;
    return out;
  }
  return out;
}

inline std::optional<SvoFrame> find_svo(const DepTree& tree) { return find_svo_detailed(tree).frame; }

// ---------------------------------------------------------------------------
// Adversarial pairs

struct SwapEdit {
  TokenSpan premise_subj;
  TokenSpan premise_obj;
  TokenSpan hypothesis_subj;  // where the subject phrase ended up
  TokenSpan hypothesis_obj;
  friend bool operator==(const SwapEdit&, const SwapEdit&) = default;
};

// Positions refer to the source sentence.
struct InsertEdit {
  std::string adjective;
  int premise_noun = 0;
  int hypothesis_noun = 0;
  int premise_insert_at = 0;
  int hypothesis_insert_at = 0;
  bool premise_article_changed = false;
  bool hypothesis_article_changed = false;
  friend bool operator==(const InsertEdit&, const InsertEdit&) = default;
};

struct AdversarialPair {
  std::string source_pair_id;
  std::vector<TaggedToken> premise;
  std::vector<TaggedToken> hypothesis;
  Label expected = Label::kContradiction;
  Rule rule = Rule::kSoSwap;
  std::variant<SwapEdit, InsertEdit> edits;

  std::string premise_text() const { return surface_text(premise); }
  std::string hypothesis_text() const { return surface_text(hypothesis); }
};

inline std::vector<TaggedToken> tagged_tokens(const DepTree& tree) {
  std::vector<TaggedToken> out;
  out.reserve(tree.tokens.size());
  for (const DepToken& t : tree.tokens) out.push_back({t.form, ptb_tag(t)});
  return out;
}

struct SwapResult {
  std::vector<TaggedToken> tokens;
  TokenSpan first_moved;   // new location of the span that came second
  TokenSpan second_moved;  // new location of the span that came first
};

// Exchanges two disjoint spans in place (other tokens keep their order) and
// repairs capitalization: the new sentence-initial token is capitalized and
// the previously initial token is lowercased unless it is a proper noun.
inline SwapResult swap_spans(const std::vector<TaggedToken>& tokens, TokenSpan a, TokenSpan b,
                             const std::vector<bool>& proper) {
  if (b.begin < a.begin) std::swap(a, b);
  std::vector<int> order;  // source position for each output position
  for (int i = 0; i < a.begin; ++i) order.push_back(i);
  for (int i = b.begin; i < b.end; ++i) order.push_back(i);
  for (int i = a.end; i < b.begin; ++i) order.push_back(i);
  for (int i = a.begin; i < a.end; ++i) order.push_back(i);
  for (int i = b.end; i < static_cast<int>(tokens.size()); ++i) order.push_back(i);

  SwapResult r;
  for (int src : order) r.tokens.push_back(tokens[static_cast<std::size_t>(src)]);
  if (!order.empty() && order.front() != 0) {
    r.tokens.front().surface = capitalize_first(r.tokens.front().surface);
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (order[i] == 0 && !proper[0]) r.tokens[i].surface = lowercase_first(r.tokens[i].surface);
    }
  }
  r.first_moved = {a.begin, a.begin + b.size()};
  const int second_begin = a.begin + b.size() + (b.begin - a.end);
  r.second_moved = {second_begin, second_begin + a.size()};
  return r;
}

inline std::vector<bool> proper_flags(const DepTree& tree) {
  std::vector<bool> out;
  for (const DepToken& t : tree.tokens) out.push_back(is_proper_noun(t));
  return out;
}

inline std::optional<AdversarialPair> gen_soswap(const DepTree& tree, const std::string& source_pair_id,
                                                 SvoReject* reason = nullptr) {
  const SvoSearch s = find_svo_detailed(tree);
  if (reason) *reason = s.reason;
  if (!s.frame) return std::nullopt;
  const SvoFrame& f = *s.frame;
  AdversarialPair pair;
  pair.source_pair_id = source_pair_id;
  pair.rule = Rule::kSoSwap;
  pair.expected = expected_label(Rule::kSoSwap);
  pair.premise = tagged_tokens(tree);
  const SwapResult swapped = swap_spans(pair.premise, f.subj_span, f.obj_span, proper_flags(tree));
  pair.hypothesis = swapped.tokens;
  SwapEdit e;
  e.premise_subj = f.subj_span;
  e.premise_obj = f.obj_span;
  const bool subj_first = f.subj_span.begin < f.obj_span.begin;
  e.hypothesis_subj = subj_first ? swapped.second_moved : swapped.first_moved;
  e.hypothesis_obj = subj_first ? swapped.first_moved : swapped.second_moved;
  pair.edits = e;
  return pair;
}

// ---------------------------------------------------------------------------
// Adjective modifier statistics

class AmodMap {
 public:
  using AdjCounts = std::map<std::string, std::uint64_t>;

  void add(const std::string& noun, const std::string& adj, std::uint64_t n = 1) {
    if (n == 0) return;
    counts_[noun][adj] += n;
  }

  // Records every amod edge whose head is a noun and dependent an adjective.
  void add_tree(const DepTree& tree) {
    for (const DepToken& t : tree.tokens) {
      if (t.deprel != "amod" || t.head == 0) continue;
      if (!ptb_tag(t).starts_with("JJ")) continue;
      const DepToken& head = tree.at(t.head);
      if (!ptb_tag(head).starts_with("NN")) continue;
      add(lemma_of(head), lemma_of(t));
    }
  }

  void merge(const AmodMap& other) {
    for (const auto& [noun, adjs] : other.counts_) {
      for (const auto& [adj, n] : adjs) add(noun, adj, n);
    }
  }

  const AdjCounts* adjectives(const std::string& noun) const {
    auto it = counts_.find(noun);
    return it == counts_.end() ? nullptr : &it->second;
  }

  std::uint64_t count(const std::string& noun, const std::string& adj) const {
    const AdjCounts* a = adjectives(noun);
    if (!a) return 0;
    auto it = a->find(adj);
    return it == a->end() ? 0 : it->second;
  }

  bool empty() const noexcept { return counts_.empty(); }
  std::size_t nouns() const noexcept { return counts_.size(); }
  const std::map<std::string, AdjCounts>& data() const noexcept { return counts_; }

  // "noun<TAB>adjective<TAB>count" lines, sorted.
  std::string serialize() const {
    std::string out;
    for (const auto& [noun, adjs] : counts_) {
      for (const auto& [adj, n] : adjs) out += noun + '\t' + adj + '\t' + std::to_string(n) + '\n';
    }
    return out;
  }

  static AmodMap parse(std::string_view text) {
    AmodMap m;
    std::size_t lineno = 0;
    for (std::string_view line : split_view(text, '\n')) {
      ++lineno;
      if (trim(line).empty()) continue;
      auto cols = split_view(line, '\t');
      if (cols.size() != 3 || cols[0].empty() || cols[1].empty()) {
        throw DataError("malformed amod map line " + std::to_string(lineno));
      }
      const auto n = parse_int<std::uint64_t>(cols[2]);
      if (n == 0) throw DataError("zero count in amod map line " + std::to_string(lineno));
      m.add(std::string(cols[0]), std::string(cols[1]), n);
    }
    return m;
  }

  void save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }
  static AmodMap load(const std::filesystem::path& path) { return parse(read_file(path)); }

  friend bool operator==(const AmodMap&, const AmodMap&) = default;

 private:
  std::map<std::string, AdjCounts> counts_;
};

inline AmodMap mine_amod_map(const std::vector<DepTree>& corpus) {
  AmodMap m;
  for (const DepTree& t : corpus) m.add_tree(t);
  return m;
}

// ---------------------------------------------------------------------------
// AddAmod

enum class AmodReject { kNone, kFewerThanTwoNouns, kEmptyIntersection, kAdjectivePresent };

constexpr std::string_view amod_reject_name(AmodReject r) noexcept {
  switch (r) {
    case AmodReject::kNone: return "none";
    case AmodReject::kFewerThanTwoNouns: return "fewer_than_two_nouns";
    case AmodReject::kEmptyIntersection: return "no_shared_adjective";
    case AmodReject::kAdjectivePresent: return "adjective_already_present";
  }
  return "none";
}

inline bool starts_with_vowel(std::string_view w) {
  if (w.empty()) return false;
  const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(w[0])));
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

namespace detail {

// Position before `noun_pos` where an adjective goes: directly before the
// noun, but ahead of compound modifiers attached to it.
inline int insertion_point(const DepTree& tree, int noun_pos) {
  int q = noun_pos;
  const int noun_index = noun_pos + 1;
  while (q > 0) {
    const DepToken& prev = tree.tokens[static_cast<std::size_t>(q - 1)];
    if (prev.head == noun_index && prev.deprel == "compound") {
      --q;
    } else {
      break;
    }
  }
  return q;
}

struct Insertion {
  std::vector<TaggedToken> tokens;
  bool article_changed = false;
};

inline Insertion insert_adjective(const DepTree& tree, int at, const std::string& adj) {
  Insertion r;
  r.tokens = tagged_tokens(tree);
  std::string surface = adj;
  if (at == 0) {
    surface = capitalize_first(surface);
    if (!is_proper_noun(tree.tokens.front())) r.tokens.front().surface = lowercase_first(r.tokens.front().surface);
  }
  r.tokens.insert(r.tokens.begin() + at, TaggedToken{surface, "JJ"});
  if (at > 0) {
    std::string& article = r.tokens[static_cast<std::size_t>(at - 1)].surface;
    const std::string lower = ascii_lower(article);
    if (lower == "a" || lower == "an") {
      std::string want = starts_with_vowel(adj) ? "an" : "a";
      if (std::isupper(static_cast<unsigned char>(article[0]))) want = capitalize_first(want);
      r.article_changed = want != article;
      article = want;
    }
  }
  return r;
}

}  // namespace detail

struct AddAmodSearch {
  std::optional<AdversarialPair> pair;
  AmodReject reason = AmodReject::kFewerThanTwoNouns;
};

// Picks, over noun pairs (A before B, distinct lemmas, neither a compound
// modifier), the adjective seen with both nouns that has the highest joint
// count count(A, adj) + count(B, adj); ties by adjective, then by earliest
// pair. Adjectives already in the sentence are never used.
inline AddAmodSearch gen_addamod_detailed(const DepTree& tree, const AmodMap& amod,
                                          const std::string& source_pair_id) {
  AddAmodSearch out;
  std::vector<int> nouns;  // 0-based positions
  std::set<std::string> noun_lemmas;
  for (std::size_t i = 0; i < tree.tokens.size(); ++i) {
    const DepToken& t = tree.tokens[i];
    if (is_common_noun(t) && t.deprel != "compound") {
      nouns.push_back(static_cast<int>(i));
      noun_lemmas.insert(lemma_of(t));
    }
  }
  if (noun_lemmas.size() < 2) return out;

  std::unordered_set<std::string> present;
  for (const DepToken& t : tree.tokens) {
    present.insert(lemma_of(t));
    present.insert(ascii_lower(t.form));
  }

  struct Choice {
    std::uint64_t joint = 0;
    std::string adj;
    int a = -1;
    int b = -1;
  };
  std::optional<Choice> best;
  bool any_shared = false;
  for (std::size_t x = 0; x < nouns.size(); ++x) {
    for (std::size_t y = x + 1; y < nouns.size(); ++y) {
      const DepToken& ta = tree.tokens[static_cast<std::size_t>(nouns[x])];
      const DepToken& tb = tree.tokens[static_cast<std::size_t>(nouns[y])];
      const std::string la = lemma_of(ta);
      const std::string lb = lemma_of(tb);
      if (la == lb) continue;
      const AmodMap::AdjCounts* sa = amod.adjectives(la);
      const AmodMap::AdjCounts* sb = amod.adjectives(lb);
      if (!sa || !sb) continue;
      for (const auto& [adj, na] : *sa) {
        auto it = sb->find(adj);
        if (it == sb->end()) continue;
        any_shared = true;
        if (present.count(adj)) continue;
        Choice c{na + it->second, adj, nouns[x], nouns[y]};
        if (!best || c.joint > best->joint || (c.joint == best->joint && c.adj < best->adj)) best = c;
      }
    }
  }
  if (!best) {
    out.reason = any_shared ? AmodReject::kAdjectivePresent : AmodReject::kEmptyIntersection;
    return out;
  }

  const int at_a = detail::insertion_point(tree, best->a);
  const int at_b = detail::insertion_point(tree, best->b);
  detail::Insertion p = detail::insert_adjective(tree, at_a, best->adj);
  detail::Insertion h = detail::insert_adjective(tree, at_b, best->adj);

  AdversarialPair pair;
  pair.source_pair_id = source_pair_id;
  pair.rule = Rule::kAddAmod;
  pair.expected = expected_label(Rule::kAddAmod);
  pair.premise = std::move(p.tokens);
  pair.hypothesis = std::move(h.tokens);
  pair.edits = InsertEdit{best->adj, best->a, best->b, at_a, at_b, p.article_changed, h.article_changed};
  out.pair = std::move(pair);
  out.reason = AmodReject::kNone;
  return out;
}

inline std::optional<AdversarialPair> gen_addamod(const DepTree& tree, const AmodMap& amod,
                                                  const std::string& source_pair_id = {}) {
  return gen_addamod_detailed(tree, amod, source_pair_id).pair;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json span_json(const TokenSpan& s) { return nlohmann::json::array({s.begin, s.end}); }

inline nlohmann::json edits_json(const AdversarialPair& p) {
  nlohmann::json e;
  if (const auto* s = std::get_if<SwapEdit>(&p.edits)) {
    e["premise_subj"] = span_json(s->premise_subj);
    e["premise_obj"] = span_json(s->premise_obj);
    e["hypothesis_subj"] = span_json(s->hypothesis_subj);
    e["hypothesis_obj"] = span_json(s->hypothesis_obj);
  } else {
    const auto& a = std::get<InsertEdit>(p.edits);
    e["adjective"] = a.adjective;
    e["premise_noun"] = a.premise_noun;
    e["hypothesis_noun"] = a.hypothesis_noun;
    e["premise_insert_at"] = a.premise_insert_at;
    e["hypothesis_insert_at"] = a.hypothesis_insert_at;
    e["premise_article_changed"] = a.premise_article_changed;
    e["hypothesis_article_changed"] = a.hypothesis_article_changed;
  }
  return e;
}

// NLI corpus schema plus rule, source_pairID and edits.
inline nlohmann::json adversarial_to_json(const AdversarialPair& p) {
  nlohmann::json j;
  j["pairID"] = p.source_pair_id + ":" + std::string(rule_name(p.rule));
  j["sentence1"] = p.premise_text();
  j["sentence2"] = p.hypothesis_text();
  j["sentence1_parse"] = render_flat_parse(p.premise);
  j["sentence2_parse"] = render_flat_parse(p.hypothesis);
  j["gold_label"] = std::string(label_name(p.expected));
  j["annotator_labels"] = nlohmann::json::array();
  j["rule"] = std::string(rule_name(p.rule));
  j["source_pairID"] = p.source_pair_id;
  j["edits"] = edits_json(p);
  return j;
}

// ---------------------------------------------------------------------------
// Corpus-level generation

struct GenerationReport {
  Rule rule = Rule::kSoSwap;
  std::size_t considered = 0;
  std::size_t emitted = 0;
  std::map<std::string, std::size_t> rejections;

  std::size_t rejected() const {
    std::size_t n = 0;
    for (const auto& [reason, c] : rejections) n += c;
    return n;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["rule"] = std::string(rule_name(rule));
    j["considered"] = considered;
    j["emitted"] = emitted;
    j["rejections"] = rejections;
    return j;
  }
};

struct GenerationOptions {
  Rule rule = Rule::kSoSwap;
  std::size_t limit = 0;  // 0 = unlimited
  unsigned threads = 1;
  std::size_t chunk = 4096;
};

// Premise parses keyed by pair id; hypothesis-side trees are ignored.
inline std::unordered_map<std::string, DepTree> index_premise_trees(std::vector<DepTree> trees) {
  std::unordered_map<std::string, DepTree> out;
  for (DepTree& t : trees) {
    if (!t.pair_id) continue;
    if (t.side && *t.side != "premise") continue;
    out.try_emplace(*t.pair_id, std::move(t));
  }
  return out;
}

namespace detail {

struct GenOutcome {
  std::optional<AdversarialPair> pair;
  std::string reason;
};

inline GenOutcome generate_one(const DepTree& tree, const std::string& pair_id, Rule rule, const AmodMap* amod) {
  GenOutcome o;
  if (rule == Rule::kSoSwap) {
    SvoReject r = SvoReject::kNone;
    o.pair = gen_soswap(tree, pair_id, &r);
    if (!o.pair) o.reason = std::string(svo_reject_name(r));
  } else {
    AddAmodSearch s = gen_addamod_detailed(tree, *amod, pair_id);
    o.pair = std::move(s.pair);
    if (!o.pair) o.reason = std::string(amod_reject_name(s.reason));
  }
  return o;
}

}  // namespace detail

// Streams the corpus in order. Each example either yields one pair or one
// rejection reason; repeated premises (SNLI pairs share captions) are
// generated once. Output order and bytes do not depend on `threads`.
inline GenerationReport emit_adversary_set(const ExampleSource& corpus,
                                           const std::unordered_map<std::string, DepTree>& trees,
                                           const AmodMap* amod, const GenerationOptions& opts,
                                           const std::function<void(const AdversarialPair&)>& sink) {
  if (opts.rule == Rule::kAddAmod && amod == nullptr) throw UsageError("addamod requires an amod map");
  GenerationReport report;
  report.rule = opts.rule;
  std::unordered_set<std::string> seen_premises;
  bool done = false;

  struct Item {
    const DepTree* tree = nullptr;
    std::string pair_id;
    std::string reason;  // set when rejected before generation
  };
  std::vector<Item> chunk;
  std::vector<detail::GenOutcome> outcomes;

  auto drain = [&]() {
    outcomes.assign(chunk.size(), {});
    const unsigned threads = std::max(1u, opts.threads);
    auto work = [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        if (chunk[i].tree) outcomes[i] = detail::generate_one(*chunk[i].tree, chunk[i].pair_id, opts.rule, amod);
      }
    };
    if (threads == 1 || chunk.size() < 2) {
      work(0, chunk.size());
    } else {
      std::vector<std::thread> pool;
      const std::size_t per = (chunk.size() + threads - 1) / threads;
      for (std::size_t b = 0; b < chunk.size(); b += per) pool.emplace_back(work, b, std::min(chunk.size(), b + per));
      for (auto& t : pool) t.join();
    }
    for (std::size_t i = 0; i < chunk.size() && !done; ++i) {
      ++report.considered;
      const std::string& reason = chunk[i].tree ? outcomes[i].reason : chunk[i].reason;
      if (chunk[i].tree && outcomes[i].pair) {
        sink(*outcomes[i].pair);
        ++report.emitted;
        if (opts.limit && report.emitted >= opts.limit) done = true;
      } else {
        ++report.rejections[reason];
      }
    }
    chunk.clear();
  };

  corpus([&](const NliExample& ex) {
    if (done) return;
    Item item;
    item.pair_id = ex.pair_id;
    auto it = trees.find(ex.pair_id);
    if (ex.parse_missing) {
      item.reason = "missing_constituency_parse";
    } else if (it == trees.end()) {
      item.reason = "missing_dependency_parse";
    } else {
      std::string key;
      for (const DepToken& t : it->second.tokens) key += t.form + ' ';
      if (!seen_premises.insert(key).second) {
        item.reason = "duplicate_premise";
      } else {
        item.tree = &it->second;
      }
    }
    chunk.push_back(std::move(item));
    if (chunk.size() >= std::max<std::size_t>(opts.chunk, 1)) drain();
  });
  if (!done) drain();
  return report;
}

}  // namespace compsense
