#pragma once

// SNLI/MNLI-style JSONL ingestion and the word-shuffle transform.

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "compsense/common.hpp"
#include "compsense/label.hpp"
#include "compsense/ptb.hpp"

namespace compsense {

struct NliExample {
  std::string pair_id;
  std::string premise_text;
  std::string hypothesis_text;
  std::vector<TaggedToken> premise_tokens;
  std::vector<TaggedToken> hypothesis_tokens;
  Gold gold;
  std::vector<Gold> annotator_labels;
  std::optional<std::string> genre;
  // Set when a parse field was absent and tokens came from whitespace
  // splitting with POS "UNK".
  bool parse_missing = false;

  friend bool operator==(const NliExample&, const NliExample&) = default;
};

struct IngestStats {
  std::size_t lines = 0;
  std::size_t admitted = 0;
  std::size_t determined = 0;
  std::size_t skipped_malformed = 0;
  std::size_t missing_parse = 0;
};

inline constexpr std::size_t kMaxAnnotators = 5;

namespace detail {

inline std::vector<TaggedToken> tokens_from_parse(const std::string& parse) {
  return leaves_with_pos(parse_ptb(parse));
}

inline std::vector<TaggedToken> whitespace_tokens(const std::string& text) {
  std::vector<TaggedToken> out;
  for (std::string& w : split_whitespace(text)) out.push_back({std::move(w), "UNK"});
  return out;
}

inline Gold parse_gold_field(const std::string& s) {
  if (s == "-") return std::nullopt;
  auto l = parse_label(s);
  if (!l || s.size() == 1) throw DataError("unknown gold_label '" + s + "'");
  return l;
}

inline const std::string& require_string(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(std::string("missing field '") + key + "'");
  if (!it->is_string()) throw DataError(std::string("field '") + key + "' is not a string");
  return it->get_ref<const std::string&>();
}

}  // namespace detail

// The pair id a JSONL line is known by: its pairID field or "L<lineno>".
inline std::string pair_id_of(const nlohmann::json& obj, std::size_t lineno) {
  auto it = obj.find("pairID");
  if (it != obj.end() && it->is_string()) return it->get<std::string>();
  return "L" + std::to_string(lineno);
}

// Decodes one JSON object (already parsed) into an example. Throws DataError.
inline NliExample example_from_json(const nlohmann::json& obj, std::size_t lineno) {
  if (!obj.is_object()) throw DataError("line is not a JSON object");
  NliExample ex;
  ex.pair_id = pair_id_of(obj, lineno);
  ex.premise_text = detail::require_string(obj, "sentence1");
  ex.hypothesis_text = detail::require_string(obj, "sentence2");
  ex.gold = detail::parse_gold_field(detail::require_string(obj, "gold_label"));

  if (auto it = obj.find("annotator_labels"); it != obj.end()) {
    if (!it->is_array()) throw DataError("annotator_labels is not an array");
    if (it->size() > kMaxAnnotators) throw DataError("more than 5 annotator labels");
    for (const auto& a : *it) {
      if (!a.is_string()) throw DataError("annotator label is not a string");
      const std::string s = a.get<std::string>();
      ex.annotator_labels.push_back(s == "-" || s.empty() ? Gold{} : parse_label(s));
    }
  }
  if (auto it = obj.find("genre"); it != obj.end() && it->is_string()) {
    ex.genre = it->get<std::string>();
  }

  auto side_tokens = [&](const char* parse_key, const std::string& text) {
    auto it = obj.find(parse_key);
    if (it == obj.end() || it->is_null()) {
      ex.parse_missing = true;
      return detail::whitespace_tokens(text);
    }
    if (!it->is_string()) throw DataError(std::string("field '") + parse_key + "' is not a string");
    return detail::tokens_from_parse(it->get<std::string>());
  };
  ex.premise_tokens = side_tokens("sentence1_parse", ex.premise_text);
  ex.hypothesis_tokens = side_tokens("sentence2_parse", ex.hypothesis_text);
  if (ex.premise_tokens.empty()) throw DataError("premise has no tokens");
  if (ex.hypothesis_tokens.empty()) throw DataError("hypothesis has no tokens");
  return ex;
}

// Streaming reader. In strict mode the first malformed line throws a
// DataError naming the line; otherwise it is skipped and counted.
class NliJsonlReader {
 public:
  NliJsonlReader(const std::filesystem::path& path, bool strict)
      : path_(path), in_(open_input(path)), strict_(strict) {}

  bool next(NliExample& out) {
    std::string line;
    while (std::getline(in_, line)) {
      ++lineno_;
      if (trim(line).empty()) continue;
      ++stats_.lines;
      try {
        out = example_from_json(nlohmann::json::parse(line), lineno_);
      } catch (const nlohmann::json::exception& e) {
        fail(std::string("invalid JSON: ") + e.what());
        continue;
      } catch (const DataError& e) {
        fail(e.what());
        continue;
      }
      ++stats_.admitted;
      if (out.gold) ++stats_.determined;
      if (out.parse_missing) ++stats_.missing_parse;
      return true;
    }
    return false;
  }

  const IngestStats& stats() const noexcept { return stats_; }
  std::size_t line_number() const noexcept { return lineno_; }

 private:
  void fail(const std::string& why) {
    if (strict_) {
      throw DataError(path_.string() + ":" + std::to_string(lineno_) + ": " + why);
    }
    ++stats_.skipped_malformed;
  }

  std::filesystem::path path_;
  std::ifstream in_;
  bool strict_;
  std::size_t lineno_ = 0;
  IngestStats stats_;
};

inline IngestStats for_each_example(const std::filesystem::path& path, bool strict,
                                    const std::function<void(const NliExample&)>& fn) {
  NliJsonlReader reader(path, strict);
  NliExample ex;
  while (reader.next(ex)) fn(ex);
  return reader.stats();
}

inline std::vector<NliExample> load_nli_jsonl(const std::filesystem::path& path, bool strict,
                                              IngestStats* stats = nullptr) {
  std::vector<NliExample> out;
  IngestStats s = for_each_example(path, strict, [&](const NliExample& ex) { out.push_back(ex); });
  if (stats) *stats = s;
  return out;
}

// A replayable example source: each call streams the whole corpus again in
// the same order.
using ExampleSource = std::function<void(const std::function<void(const NliExample&)>&)>;

inline ExampleSource file_source(std::vector<std::filesystem::path> paths, bool strict = false) {
  return [paths = std::move(paths), strict](const std::function<void(const NliExample&)>& fn) {
    for (const auto& p : paths) for_each_example(p, strict, fn);
  };
}

inline ExampleSource memory_source(const std::vector<NliExample>& examples) {
  return [&examples](const std::function<void(const NliExample&)>& fn) {
    for (const NliExample& ex : examples) fn(ex);
  };
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string surface_text(const std::vector<TaggedToken>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i].surface;
  }
  return out;
}

// Same schema as the input corpus; parses are written as flat trees.
inline nlohmann::json example_to_json(const NliExample& ex) {
  nlohmann::json obj;
  obj["pairID"] = ex.pair_id;
  obj["sentence1"] = ex.premise_text;
  obj["sentence2"] = ex.hypothesis_text;
  obj["sentence1_parse"] = render_flat_parse(ex.premise_tokens);
  obj["sentence2_parse"] = render_flat_parse(ex.hypothesis_tokens);
  obj["gold_label"] = gold_name(ex.gold);
  nlohmann::json ann = nlohmann::json::array();
  for (const Gold& g : ex.annotator_labels) ann.push_back(gold_name(g));
  obj["annotator_labels"] = std::move(ann);
  if (ex.genre) obj["genre"] = *ex.genre;
  return obj;
}

// ---------------------------------------------------------------------------
// Word shuffle

// Per-side generator seed: SplitMix64(seed) split by FNV-1a(pair_id), then by
// side (0 premise, 1 hypothesis).
inline SplitMix64 shuffle_rng(std::uint64_t seed, const std::string& pair_id, int side) {
  return SplitMix64(seed).split(fnv1a64(pair_id)).split(static_cast<std::uint64_t>(side));
}

inline NliExample shuffle_words(const NliExample& example, std::uint64_t seed) {
  NliExample out = example;
  SplitMix64 premise_rng = shuffle_rng(seed, example.pair_id, 0);
  SplitMix64 hypothesis_rng = shuffle_rng(seed, example.pair_id, 1);
  fisher_yates(out.premise_tokens, premise_rng);
  fisher_yates(out.hypothesis_tokens, hypothesis_rng);
  out.premise_text = surface_text(out.premise_tokens);
  out.hypothesis_text = surface_text(out.hypothesis_tokens);
  return out;
}

inline nlohmann::json shuffled_to_json(const NliExample& shuffled) {
  nlohmann::json obj = example_to_json(shuffled);
  obj["transform"] = "word_shuffle";
  return obj;
}

}  // namespace compsense
