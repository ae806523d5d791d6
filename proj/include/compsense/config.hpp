#pragma once

// Pipeline configuration: "key = value" lines, '#' comments. Unknown keys
// are rejected; all problems are reported together.

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "compsense/bowreg.hpp"
#include "compsense/common.hpp"
#include "compsense/lexfeat.hpp"

namespace compsense {

inline constexpr std::string_view kToolVersion = "1.0.0";

struct PipelineConfig {
  std::vector<std::filesystem::path> train;
  std::optional<std::filesystem::path> eval;
  std::vector<std::filesystem::path> preds;
  std::vector<std::filesystem::path> adv;
  std::filesystem::path output_dir = "compsense-out";
  std::vector<double> lambda_grid{0.5, 0.6, 0.7};
  VocabOptions vocab;
  TrainConfig train_config;
  bool strict = false;
  std::string human_mode = "average";
  bool include_bow_row = true;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

namespace detail {

inline bool parse_bool(std::string_view v) {
  const std::string s = ascii_lower(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw DataError("expected a boolean, got '" + std::string(v) + "'");
}

inline std::vector<std::string> parse_list(std::string_view v) {
  std::vector<std::string> out;
  for (std::string_view part : split_view(v, ',')) {
    const auto t = trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline std::filesystem::path resolve(const std::filesystem::path& base, std::string_view p) {
  std::filesystem::path path{std::string(p)};
  if (path.is_relative()) path = base / path;
  return path.lexically_normal();
}

inline std::string path_list(const std::vector<std::filesystem::path>& ps) {
  std::vector<std::string> s;
  for (const auto& p : ps) s.push_back(p.string());
  return join(s, ",");
}

}  // namespace detail

inline void check_human_mode(std::string_view mode) {
  if (mode == "average") return;
  if (mode.starts_with("slot:")) {
    if (parse_int<std::size_t>(mode.substr(5)) >= kMaxAnnotators) throw DataError("annotator slot out of range");
    return;
  }
  if (mode.starts_with("seeded:")) {
    parse_int<std::uint64_t>(mode.substr(7));
    return;
  }
  throw DataError("human_mode must be average, slot:K or seeded:S");
}

namespace detail {

template <typename T>
T at_least(std::string_view key, std::string_view value, T lo) {
  const T v = parse_int<T>(value);
  if (v < lo) throw DataError(std::string(key) + " must be >= " + std::to_string(lo));
  return v;
}

}  // namespace detail

// Applies one key/value; throws DataError for bad values, UsageError for an
// unknown key.
inline void apply_config_value(PipelineConfig& c, std::string_view key, std::string_view value,
                               const std::filesystem::path& base) {
  using detail::parse_bool;
  using detail::parse_list;
  using detail::at_least;
  using detail::resolve;
  auto nonnegative = [](std::string_view k, std::string_view v) {
    const double d = parse_double(v);
    if (!std::isfinite(d) || d < 0.0) throw DataError(std::string(k) + " must be a finite nonnegative number");
    return d;
  };
  auto paths = [&] {
    std::vector<std::filesystem::path> out;
    for (const auto& s : parse_list(value)) out.push_back(resolve(base, s));
    return out;
  };
  if (key == "train") c.train = paths();
  else if (key == "eval") c.eval = resolve(base, value);
  else if (key == "preds") c.preds = paths();
  else if (key == "adv") c.adv = paths();
  else if (key == "output_dir") c.output_dir = resolve(base, value);
  else if (key == "lambda_grid") {
    c.lambda_grid.clear();
    for (const auto& s : parse_list(value)) {
      const double l = parse_double(s);
      if (!(l >= 0.0 && l <= 1.0)) throw DataError("lambda " + s + " outside [0, 1]");
      c.lambda_grid.push_back(l);
    }
  }
  else if (key == "min_count") c.vocab.min_count = at_least<int>(key, value, 1);
  else if (key == "lowercase") c.vocab.features.lowercase = parse_bool(value);
  else if (key == "hash_bits") {
    c.vocab.hash_bits = parse_int<unsigned>(value);
    if (c.vocab.hash_bits > 31) throw DataError("hash_bits must be <= 31");
  }
  else if (key == "l2") c.train_config.l2 = nonnegative(key, value);
  else if (key == "epochs") c.train_config.epochs = at_least<int>(key, value, 1);
  else if (key == "batch_size") c.train_config.batch_size = at_least<std::size_t>(key, value, 1);
  else if (key == "learning_rate") {
    c.train_config.learning_rate = nonnegative(key, value);
    if (c.train_config.learning_rate == 0.0) throw DataError("learning_rate must be positive");
  }
  else if (key == "lr_decay") c.train_config.lr_decay = nonnegative(key, value);
  else if (key == "seed") c.train_config.seed = parse_int<std::uint64_t>(value);
  else if (key == "bias") c.train_config.bias_enabled = parse_bool(value);
  else if (key == "shuffle_buffer") c.train_config.shuffle_buffer = at_least<std::size_t>(key, value, 1);
  else if (key == "strict") c.strict = parse_bool(value);
  else if (key == "human_mode") {
    check_human_mode(value);
    c.human_mode = std::string(value);
  }
  else if (key == "bow_row") c.include_bow_row = parse_bool(value);
  else throw UsageError("unknown config key '" + std::string(key) + "'");
}

// Parses config text; relative paths resolve against `base`. Every error
// (unknown keys, bad values, failed validation) is collected into one
// UsageError.
inline PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base,
                                   const std::vector<std::string>& overrides = {}) {
  PipelineConfig c;
  c.output_dir = detail::resolve(base, c.output_dir.string());
  std::vector<std::string> errors;
  auto apply = [&](std::string_view line, const std::string& where) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      errors.push_back(where + ": expected 'key = value'");
      return;
    }
    const std::string key(trim(line.substr(0, eq)));
    try {
      apply_config_value(c, key, trim(line.substr(eq + 1)), base);
    } catch (const Error& e) {
      errors.push_back(where + ": " + e.what());
    }
  };
  std::size_t lineno = 0;
  for (std::string_view raw : split_view(text, '\n')) {
    ++lineno;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    apply(line, "line " + std::to_string(lineno));
  }
  for (const std::string& o : overrides) apply(o, "override '" + o + "'");
  if (errors.empty()) c.train_config.validate();
  if (!errors.empty()) throw UsageError("invalid configuration:\n  " + join(errors, "\n  "));
  return c;
}

inline PipelineConfig validate_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  const auto base = std::filesystem::absolute(path).parent_path();
  return parse_config(read_file(path), base, overrides);
}

// Canonical form: every key with its effective value, sorted by key.
inline std::map<std::string, std::string> normalized_config(const PipelineConfig& c) {
  std::map<std::string, std::string> m;
  std::vector<std::string> grid;
  for (double l : c.lambda_grid) grid.push_back(format_double(l));
  m["train"] = detail::path_list(c.train);
  m["eval"] = c.eval ? c.eval->string() : "";
  m["preds"] = detail::path_list(c.preds);
  m["adv"] = detail::path_list(c.adv);
  m["output_dir"] = c.output_dir.string();
  m["lambda_grid"] = join(grid, ",");
  m["min_count"] = std::to_string(c.vocab.min_count);
  m["lowercase"] = c.vocab.features.lowercase ? "true" : "false";
  m["hash_bits"] = std::to_string(c.vocab.hash_bits);
  m["l2"] = format_double(c.train_config.l2);
  m["epochs"] = std::to_string(c.train_config.epochs);
  m["batch_size"] = std::to_string(c.train_config.batch_size);
  m["learning_rate"] = format_double(c.train_config.learning_rate);
  m["lr_decay"] = format_double(c.train_config.lr_decay);
  m["seed"] = std::to_string(c.train_config.seed);
  m["bias"] = c.train_config.bias_enabled ? "true" : "false";
  m["shuffle_buffer"] = std::to_string(c.train_config.shuffle_buffer);
  m["strict"] = c.strict ? "true" : "false";
  m["human_mode"] = c.human_mode;
  m["bow_row"] = c.include_bow_row ? "true" : "false";
  return m;
}

inline std::string normalized_config_text(const PipelineConfig& c) {
  std::string out;
  for (const auto& [k, v] : normalized_config(c)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace compsense
