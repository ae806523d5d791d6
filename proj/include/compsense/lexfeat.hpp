#pragma once

// Lexical feature space: premise unigrams, hypothesis unigrams and ordered
// premise x hypothesis cross-unigrams over content words, as sparse
// indicator vectors.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "compsense/common.hpp"
#include "compsense/corpus.hpp"

namespace compsense {

// True iff the tag starts with NN, VB, JJ or RB.
constexpr bool is_content_word(std::string_view pos) noexcept {
  if (pos.size() < 2) return false;
  const std::string_view p = pos.substr(0, 2);
  return p == "NN" || p == "VB" || p == "JJ" || p == "RB";
}

enum class FeatureKind : std::uint8_t { kPremiseUnigram = 0, kHypothesisUnigram = 1, kCrossUnigram = 2 };

constexpr std::string_view kind_tag(FeatureKind k) noexcept {
  switch (k) {
    case FeatureKind::kPremiseUnigram: return "premise";
    case FeatureKind::kHypothesisUnigram: return "hypothesis";
    case FeatureKind::kCrossUnigram: return "cross";
  }
  return "cross";
}

inline std::optional<FeatureKind> parse_kind_tag(std::string_view s) {
  if (s == "premise") return FeatureKind::kPremiseUnigram;
  if (s == "hypothesis") return FeatureKind::kHypothesisUnigram;
  if (s == "cross") return FeatureKind::kCrossUnigram;
  return std::nullopt;
}

// `second` is empty for unigrams; for cross-unigrams (first, second) is
// (premise word, hypothesis word).
struct FeatureKey {
  FeatureKind kind = FeatureKind::kPremiseUnigram;
  std::string first;
  std::string second;

  friend bool operator==(const FeatureKey&, const FeatureKey&) = default;
  friend auto operator<=>(const FeatureKey&, const FeatureKey&) = default;
};

struct FeatureOptions {
  bool lowercase = true;
  friend bool operator==(const FeatureOptions&, const FeatureOptions&) = default;
};

inline std::string normalize_word(std::string_view w, const FeatureOptions& opts) {
  return opts.lowercase ? ascii_lower(w) : std::string(w);
}

// Distinct normalized content words in order of first appearance.
inline std::vector<std::string> content_words(const std::vector<TaggedToken>& tokens,
                                              const FeatureOptions& opts) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const TaggedToken& t : tokens) {
    if (!is_content_word(t.pos)) continue;
    std::string w = normalize_word(t.surface, opts);
    if (w.empty()) continue;
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

// Key set in canonical emission order: premise unigrams, hypothesis
// unigrams, then cross pairs premise-major. Duplicate-free.
inline std::vector<FeatureKey> extract_keys(const NliExample& ex, const FeatureOptions& opts = {}) {
  const auto prem = content_words(ex.premise_tokens, opts);
  const auto hyp = content_words(ex.hypothesis_tokens, opts);
  std::vector<FeatureKey> keys;
  keys.reserve(prem.size() + hyp.size() + prem.size() * hyp.size());
  for (const auto& w : prem) keys.push_back({FeatureKind::kPremiseUnigram, w, {}});
  for (const auto& w : hyp) keys.push_back({FeatureKind::kHypothesisUnigram, w, {}});
  for (const auto& p : prem) {
    for (const auto& h : hyp) keys.push_back({FeatureKind::kCrossUnigram, p, h});
  }
  return keys;
}

// Sorted, duplicate-free active indices of an indicator vector.
struct FeatureVector {
  std::vector<std::uint32_t> indices;
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

class VocabularyBuilder;

// Frozen bijection FeatureKey <-> [0, d), or (hash_bits > 0) a hashed
// feature space of size 2^hash_bits with no stored keys.
class Vocabulary {
 public:
  static constexpr std::string_view kMagic = "#compsense-vocab";
  static constexpr int kFormatVersion = 1;

  std::size_t dim() const noexcept { return dim_; }
  int min_count() const noexcept { return min_count_; }
  unsigned hash_bits() const noexcept { return hash_bits_; }
  const FeatureOptions& options() const noexcept { return options_; }
  std::uint64_t fingerprint() const noexcept { return fingerprint_; }
  bool hashed() const noexcept { return hash_bits_ > 0; }

  std::optional<std::uint32_t> find(const FeatureKey& key) const {
    if (hashed()) return hashed_index(key);
    auto packed = pack(key);
    if (!packed) return std::nullopt;
    auto it = index_.find(*packed);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Key stored at `index` (exact mode only).
  FeatureKey key(std::uint32_t index) const { return unpack(keys_.at(index)); }

  std::string serialize() const {
    std::ostringstream out;
    out << kMagic << '\t' << kFormatVersion << '\n';
    out << "d\t" << dim_ << '\n';
    out << "min_count\t" << min_count_ << '\n';
    out << "lowercase\t" << (options_.lowercase ? 1 : 0) << '\n';
    out << "hash_bits\t" << hash_bits_ << '\n';
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      const FeatureKey k = unpack(keys_[i]);
      out << kind_tag(k.kind) << '\t' << k.first;
      if (k.kind == FeatureKind::kCrossUnigram) out << '\t' << k.second;
      out << '\t' << i << '\n';
    }
    return out.str();
  }

  void save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

  static Vocabulary parse(std::string_view text) {
    Vocabulary v;
    std::vector<std::string_view> lines = split_view(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    auto header = [&](std::size_t i, std::string_view name) -> std::string_view {
      if (i >= lines.size()) throw DataError("vocabulary truncated in header");
      auto cols = split_view(lines[i], '\t');
      if (cols.size() != 2 || cols[0] != name) {
        throw DataError("vocabulary header line " + std::to_string(i + 1) + ": expected '" +
                        std::string(name) + "'");
      }
      return cols[1];
    };
    if (parse_int<int>(header(0, kMagic)) != kFormatVersion) {
      throw DataError("unsupported vocabulary format version");
    }
    const auto dim = parse_int<std::size_t>(header(1, "d"));
    v.min_count_ = parse_int<int>(header(2, "min_count"));
    v.options_.lowercase = parse_int<int>(header(3, "lowercase")) != 0;
    v.hash_bits_ = parse_int<unsigned>(header(4, "hash_bits"));
    if (v.hashed()) {
      if (v.hash_bits_ > 31 || dim != (std::size_t{1} << v.hash_bits_) || lines.size() != 5) {
        throw DataError("inconsistent hashed vocabulary header");
      }
      v.dim_ = dim;
    } else {
      if (lines.size() - 5 != dim) {
        throw DataError("vocabulary declares d=" + std::to_string(dim) + " but has " +
                        std::to_string(lines.size() - 5) + " keys");
      }
      for (std::size_t i = 5; i < lines.size(); ++i) {
        auto cols = split_view(lines[i], '\t');
        auto kind = cols.empty() ? std::nullopt : parse_kind_tag(cols[0]);
        const std::size_t want = kind == FeatureKind::kCrossUnigram ? 4 : 3;
        if (!kind || cols.size() != want) {
          throw DataError("malformed vocabulary line " + std::to_string(i + 1));
        }
        if (parse_int<std::size_t>(cols.back()) != i - 5) {
          throw DataError("vocabulary index out of sequence at line " + std::to_string(i + 1));
        }
        FeatureKey k{*kind, std::string(cols[1]), want == 4 ? std::string(cols[2]) : std::string()};
        if (k.first.empty() || (want == 4 && k.second.empty())) {
          throw DataError("empty term at vocabulary line " + std::to_string(i + 1));
        }
        v.insert(k);
      }
      if (v.index_.size() != dim) throw DataError("duplicate keys in vocabulary");
      v.dim_ = dim;
    }
    v.fingerprint_ = fnv1a64(v.serialize());
    return v;
  }

  static Vocabulary load(const std::filesystem::path& path) { return parse(read_file(path)); }

 private:
  friend class VocabularyBuilder;

  static constexpr std::uint64_t kNoWord = 0x7fffffffULL;

  std::optional<std::uint64_t> pack(const FeatureKey& k) const {
    auto a = words_.find(k.first);
    if (a == words_.end()) return std::nullopt;
    std::uint64_t b = kNoWord;
    if (k.kind == FeatureKind::kCrossUnigram) {
      auto it = words_.find(k.second);
      if (it == words_.end()) return std::nullopt;
      b = it->second;
    }
    return (static_cast<std::uint64_t>(k.kind) << 62) | (static_cast<std::uint64_t>(a->second) << 31) | b;
  }

  FeatureKey unpack(std::uint64_t packed) const {
    FeatureKey k;
    k.kind = static_cast<FeatureKind>(packed >> 62);
    k.first = word_list_[(packed >> 31) & kNoWord];
    if (k.kind == FeatureKind::kCrossUnigram) k.second = word_list_[packed & kNoWord];
    return k;
  }

  std::uint32_t intern(const std::string& w) {
    auto [it, inserted] = words_.try_emplace(w, static_cast<std::uint32_t>(word_list_.size()));
    if (inserted) word_list_.push_back(w);
    return it->second;
  }

  void insert(const FeatureKey& k) {
    const std::uint64_t a = intern(k.first);
    const std::uint64_t b = k.kind == FeatureKind::kCrossUnigram ? intern(k.second) : kNoWord;
    const std::uint64_t packed = (static_cast<std::uint64_t>(k.kind) << 62) | (a << 31) | b;
    if (index_.try_emplace(packed, static_cast<std::uint32_t>(keys_.size())).second) {
      keys_.push_back(packed);
    }
  }

  std::uint32_t hashed_index(const FeatureKey& k) const {
    Fnv1a64 h;
    h.update(kind_tag(k.kind)).update("\t").update(k.first).update("\t").update(k.second);
    return static_cast<std::uint32_t>(h.digest() & ((std::uint64_t{1} << hash_bits_) - 1));
  }

  std::size_t dim_ = 0;
  int min_count_ = 1;
  unsigned hash_bits_ = 0;
  FeatureOptions options_;
  std::uint64_t fingerprint_ = 0;
  std::unordered_map<std::string, std::uint32_t> words_;
  std::vector<std::string> word_list_;
  std::unordered_map<std::uint64_t, std::uint32_t> index_;
  std::vector<std::uint64_t> keys_;
};

// Single-pass counting builder: every key's example count and the ordinal of
// its first occurrence are tracked; freeze() keeps keys seen in at least
// min_count examples, indexed by first occurrence.
class VocabularyBuilder {
 public:
  explicit VocabularyBuilder(FeatureOptions opts = {}) : opts_(opts) {}

  void add(const NliExample& ex) {
    ++examples_;
    for (const FeatureKey& k : extract_keys(ex, opts_)) {
      const std::uint64_t packed = pack_interned(k);
      auto [it, inserted] = counts_.try_emplace(packed, Entry{0, next_ordinal_});
      if (inserted) ++next_ordinal_;
      ++it->second.count;
    }
  }

  std::size_t examples() const noexcept { return examples_; }

  Vocabulary freeze(int min_count) const {
    if (examples_ == 0) throw DataError("cannot build a vocabulary from an empty corpus");
    std::vector<std::pair<std::uint64_t, std::uint64_t>> kept;  // (first ordinal, packed)
    for (const auto& [packed, e] : counts_) {
      if (e.count >= static_cast<std::uint64_t>(std::max(min_count, 1))) kept.emplace_back(e.first, packed);
    }
    std::sort(kept.begin(), kept.end());
    Vocabulary v;
    v.min_count_ = min_count;
    v.options_ = opts_;
    for (const auto& [first, packed] : kept) {
      FeatureKey k;
      k.kind = static_cast<FeatureKind>(packed >> 62);
      k.first = words_[(packed >> 31) & Vocabulary::kNoWord];
      if (k.kind == FeatureKind::kCrossUnigram) k.second = words_[packed & Vocabulary::kNoWord];
      v.insert(k);
    }
    v.dim_ = v.keys_.size();
    v.fingerprint_ = fnv1a64(v.serialize());
    return v;
  }

 private:
  struct Entry {
    std::uint64_t count;
    std::uint64_t first;
  };

  std::uint64_t pack_interned(const FeatureKey& k) {
    auto intern = [&](const std::string& w) -> std::uint64_t {
      auto [it, inserted] = ids_.try_emplace(w, static_cast<std::uint32_t>(words_.size()));
      if (inserted) words_.push_back(w);
      return it->second;
    };
    const std::uint64_t a = intern(k.first);
    const std::uint64_t b = k.kind == FeatureKind::kCrossUnigram ? intern(k.second) : Vocabulary::kNoWord;
    return (static_cast<std::uint64_t>(k.kind) << 62) | (a << 31) | b;
  }

  FeatureOptions opts_;
  std::size_t examples_ = 0;
  std::uint64_t next_ordinal_ = 0;
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<std::string> words_;
  std::unordered_map<std::uint64_t, Entry> counts_;
};

struct VocabOptions {
  int min_count = 2;
  FeatureOptions features;
  unsigned hash_bits = 0;  // 0 = exact dictionary indexing
};

// Hashed vocabulary of dimension 2^bits; no corpus pass is needed.
inline Vocabulary hashed_vocabulary(unsigned bits, const FeatureOptions& opts) {
  if (bits == 0 || bits > 31) throw UsageError("hash_bits must be in [1, 31]");
  std::ostringstream s;
  s << Vocabulary::kMagic << '\t' << Vocabulary::kFormatVersion << "\nd\t" << (std::size_t{1} << bits)
    << "\nmin_count\t1\nlowercase\t" << (opts.lowercase ? 1 : 0) << "\nhash_bits\t" << bits << '\n';
  return Vocabulary::parse(s.str());
}

// Only determined-gold examples contribute.
inline Vocabulary build_vocab(const ExampleSource& source, const VocabOptions& opts) {
  if (opts.hash_bits > 0) {
    std::size_t n = 0;
    source([&](const NliExample& ex) { n += ex.gold ? 1 : 0; });
    if (n == 0) throw DataError("cannot build a vocabulary from an empty corpus");
    return hashed_vocabulary(opts.hash_bits, opts.features);
  }
  VocabularyBuilder builder(opts.features);
  source([&](const NliExample& ex) {
    if (ex.gold) builder.add(ex);
  });
  return builder.freeze(opts.min_count);
}

inline Vocabulary build_vocab(const std::vector<NliExample>& corpus, int min_count,
                              const FeatureOptions& features = {}) {
  return build_vocab(memory_source(corpus), VocabOptions{min_count, features, 0});
}

// Indices of extract_keys(ex) present in the vocabulary, sorted and unique.
inline FeatureVector featurize(const NliExample& ex, const Vocabulary& vocab) {
  FeatureVector v;
  for (const FeatureKey& k : extract_keys(ex, vocab.options())) {
    if (auto idx = vocab.find(k)) v.indices.push_back(*idx);
  }
  std::sort(v.indices.begin(), v.indices.end());
  v.indices.erase(std::unique(v.indices.begin(), v.indices.end()), v.indices.end());
  return v;
}

}  // namespace compsense
