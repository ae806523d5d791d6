#pragma once

// Scoring of external model predictions on whole-dev, CS_lambda and
// adversarial sets, with the majority-vote and human-agreement baselines.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "compsense/common.hpp"
#include "compsense/corpus.hpp"
#include "compsense/label.hpp"

namespace compsense {

struct Prediction {
  Label label = Label::kEntailment;
  std::optional<Probs> probs;
};

struct PredictionSet {
  std::string model_name;
  std::unordered_map<std::string, Prediction> by_id;

  const Prediction* find(const std::string& id) const {
    auto it = by_id.find(id);
    return it == by_id.end() ? nullptr : &it->second;
  }
  std::size_t size() const noexcept { return by_id.size(); }
};

enum class PredictionFormat { kAuto, kTsv, kJsonl };

namespace detail {

inline Probs checked_probs(double e, double c, double n) {
  const Probs p{e, c, n};
  for (double x : p) {
    if (!std::isfinite(x) || x < 0.0) throw DataError("probabilities must be finite and nonnegative");
  }
  const double s = e + c + n;
  if (std::fabs(s - 1.0) > 1e-6) throw DataError("probabilities sum to " + format_double(s) + ", not 1");
  return p;
}

inline Label checked_label(std::string_view s) {
  auto l = parse_label(trim(s));
  if (!l) throw DataError("unknown label '" + std::string(s) + "'");
  return *l;
}

}  // namespace detail

// TSV rows are "pairID<TAB>label[<TAB>pE<TAB>pC<TAB>pN]" with an optional
// "pairID" header; JSONL objects carry "pairID", "label" and optional
// "probs". Duplicate ids are an error listing every duplicate.
inline PredictionSet parse_predictions(std::string_view text, PredictionFormat format, std::string model_name) {
  PredictionSet set;
  set.model_name = std::move(model_name);
  std::vector<std::string> duplicates;
  std::size_t lineno = 0;
  for (std::string_view raw : split_view(text, '\n')) {
    ++lineno;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    std::string id;
    Prediction pred;
    try {
      if (format == PredictionFormat::kJsonl) {
        const auto j = nlohmann::json::parse(line);
        id = j.at("pairID").get<std::string>();
        pred.label = detail::checked_label(j.at("label").get<std::string>());
        if (auto it = j.find("probs"); it != j.end() && !it->is_null()) {
          if (!it->is_array() || it->size() != 3) throw DataError("probs must have three entries");
          pred.probs = detail::checked_probs((*it)[0].get<double>(), (*it)[1].get<double>(), (*it)[2].get<double>());
        }
      } else {
        auto cols = split_view(line, '\t');
        if (lineno == 1 && (cols[0] == "pairID" || cols[0] == "pair_id")) continue;
        if (cols.size() != 2 && cols.size() != 5) {
          throw DataError("expected 2 or 5 columns, got " + std::to_string(cols.size()));
        }
        id = std::string(cols[0]);
        pred.label = detail::checked_label(cols[1]);
        if (cols.size() == 5) {
          pred.probs = detail::checked_probs(parse_double(trim(cols[2])), parse_double(trim(cols[3])),
                                             parse_double(trim(cols[4])));
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("predictions line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("predictions line " + std::to_string(lineno) + ": " + e.what());
    }
    if (id.empty()) throw DataError("predictions line " + std::to_string(lineno) + ": empty pairID");
    if (!set.by_id.emplace(id, pred).second) duplicates.push_back(id);
  }
  if (!duplicates.empty()) throw DataError("duplicate pairID in predictions: " + join(duplicates, ", "));
  return set;
}

inline PredictionSet load_predictions(const std::filesystem::path& path,
                                      PredictionFormat format = PredictionFormat::kAuto) {
  if (format == PredictionFormat::kAuto) {
    const std::string ext = path.extension().string();
    format = (ext == ".jsonl" || ext == ".json") ? PredictionFormat::kJsonl : PredictionFormat::kTsv;
  }
  return parse_predictions(read_file(path), format, path.stem().string());
}

struct EvalItem {
  std::string pair_id;
  Label gold = Label::kEntailment;
};

using EvalSet = std::vector<EvalItem>;

// Determined-gold examples of a corpus in source order.
inline EvalSet eval_set_from(const std::vector<NliExample>& corpus) {
  EvalSet out;
  for (const NliExample& ex : corpus) {
    if (ex.gold) out.push_back({ex.pair_id, *ex.gold});
  }
  return out;
}

struct EvalResult {
  std::size_t n = 0;        // eval set size
  std::size_t covered = 0;  // ids with a prediction
  double accuracy = 0.0;    // over covered ids
  Probs distribution{0.0, 0.0, 0.0};
  double coverage = 0.0;
};

// Missing predictions reduce coverage and are excluded from accuracy; with
// strict set they are an error. Zero coverage is always an error.
inline EvalResult evaluate(const PredictionSet& preds, const EvalSet& eval_set, bool strict = false) {
  if (eval_set.empty()) throw DataError("cannot evaluate on an empty set");
  EvalResult r;
  r.n = eval_set.size();
  std::size_t correct = 0;
  std::array<std::size_t, 3> counts{};
  std::vector<std::string> missing;
  for (const EvalItem& item : eval_set) {
    const Prediction* p = preds.find(item.pair_id);
    if (!p) {
      if (strict) missing.push_back(item.pair_id);
      continue;
    }
    ++r.covered;
    ++counts[index_of(p->label)];
    if (p->label == item.gold) ++correct;
  }
  if (!missing.empty()) {
    throw DataError(std::to_string(missing.size()) + " eval ids have no prediction (first: " + missing.front() + ")");
  }
  if (r.covered == 0) throw DataError("predictions '" + preds.model_name + "' cover none of the eval set");
  const double cov = static_cast<double>(r.covered);
  r.accuracy = static_cast<double>(correct) / cov;
  for (std::size_t c = 0; c < 3; ++c) r.distribution[c] = static_cast<double>(counts[c]) / cov;
  r.coverage = cov / static_cast<double>(r.n);
  return r;
}

struct MajorityResult {
  double accuracy = 0.0;
  Label label = Label::kEntailment;
};

// Constant classifier predicting the set's most frequent gold label (ties
// by label order).
inline MajorityResult majority_vote_baseline(const EvalSet& eval_set) {
  if (eval_set.empty()) throw DataError("majority vote needs a nonempty set");
  std::array<std::size_t, 3> counts{};
  for (const EvalItem& item : eval_set) ++counts[index_of(item.gold)];
  std::size_t best = 0;
  for (std::size_t c = 1; c < 3; ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return {static_cast<double>(counts[best]) / static_cast<double>(eval_set.size()), kAllLabels[best]};
}

struct HumanMode {
  enum class Kind { kAverage, kSlot, kSeeded };
  Kind kind = Kind::kAverage;
  std::size_t slot = 0;
  std::uint64_t seed = 0;

  static HumanMode average() { return {}; }
  static HumanMode fixed_slot(std::size_t k) { return {Kind::kSlot, k, 0}; }
  static HumanMode seeded(std::uint64_t s) { return {Kind::kSeeded, 0, s}; }
};

struct HumanResult {
  double accuracy = 0.0;
  Probs distribution{0.0, 0.0, 0.0};  // share of determined votes used
  std::size_t examples = 0;
};

// Agreement of single annotator labels with gold. Average mode is the mean
// over annotator slots of each slot's accuracy; slot mode uses slot k; seeded
// mode picks one slot per example from SplitMix64(seed).split(fnv1a(id)).
// Undetermined votes count as wrong.
inline HumanResult human_estimate(const std::unordered_map<std::string, std::vector<Gold>>& annotations,
                                  const EvalSet& eval_set, const HumanMode& mode) {
  std::array<std::size_t, kMaxAnnotators> slot_n{};
  std::array<std::size_t, kMaxAnnotators> slot_correct{};
  std::array<std::size_t, 3> votes{};
  std::size_t picked_n = 0;
  std::size_t picked_correct = 0;
  HumanResult r;
  for (const EvalItem& item : eval_set) {
    auto it = annotations.find(item.pair_id);
    if (it == annotations.end() || it->second.empty()) continue;
    const std::vector<Gold>& ann = it->second;
    ++r.examples;
    auto tally = [&](const Gold& g) {
      if (g) ++votes[index_of(*g)];
      return g && *g == item.gold;
    };
    switch (mode.kind) {
      case HumanMode::Kind::kAverage:
        for (std::size_t k = 0; k < ann.size() && k < kMaxAnnotators; ++k) {
          ++slot_n[k];
          if (tally(ann[k])) ++slot_correct[k];
        }
        break;
      case HumanMode::Kind::kSlot:
        if (mode.slot < ann.size()) {
          ++picked_n;
          if (tally(ann[mode.slot])) ++picked_correct;
        }
        break;
      case HumanMode::Kind::kSeeded: {
        SplitMix64 rng = SplitMix64(mode.seed).split(fnv1a64(item.pair_id));
        ++picked_n;
        if (tally(ann[static_cast<std::size_t>(rng.below(ann.size()))])) ++picked_correct;
        break;
      }
    }
  }
  if (r.examples == 0) throw DataError("no annotator labels available for the human estimate");
  if (mode.kind == HumanMode::Kind::kAverage) {
    double sum = 0.0;
    std::size_t slots = 0;
    for (std::size_t k = 0; k < kMaxAnnotators; ++k) {
      if (slot_n[k] == 0) continue;
      sum += static_cast<double>(slot_correct[k]) / static_cast<double>(slot_n[k]);
      ++slots;
    }
    r.accuracy = sum / static_cast<double>(slots);
  } else {
    if (picked_n == 0) throw DataError("annotator slot " + std::to_string(mode.slot) + " is never filled");
    r.accuracy = static_cast<double>(picked_correct) / static_cast<double>(picked_n);
  }
  const std::size_t total_votes = votes[0] + votes[1] + votes[2];
  if (total_votes > 0) {
    for (std::size_t c = 0; c < 3; ++c) r.distribution[c] = static_cast<double>(votes[c]) / static_cast<double>(total_votes);
  }
  return r;
}

inline std::unordered_map<std::string, std::vector<Gold>> annotations_of(const std::vector<NliExample>& corpus) {
  std::unordered_map<std::string, std::vector<Gold>> out;
  for (const NliExample& ex : corpus) out.emplace(ex.pair_id, ex.annotator_labels);
  return out;
}

// ---------------------------------------------------------------------------
// Reports

struct ReportRow {
  std::string model;
  std::string set;
  std::size_t n = 0;
  double coverage = 1.0;
  double accuracy = 0.0;
  Probs distribution{0.0, 0.0, 0.0};  // shares in [0, 1]

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

inline ReportRow make_row(std::string model, std::string set, const EvalResult& r) {
  return {std::move(model), std::move(set), r.n, r.coverage, r.accuracy, r.distribution};
}

enum class ReportFormat { kCsv, kMarkdown, kJson };

inline std::optional<ReportFormat> parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "markdown" || s == "md") return ReportFormat::kMarkdown;
  if (s == "json") return ReportFormat::kJson;
  return std::nullopt;
}

inline constexpr std::array<std::string_view, 8> kReportColumns = {
    "model", "set", "n", "coverage", "accuracy", "pct_E", "pct_C", "pct_N"};

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> row_cells(const ReportRow& r) {
  return {r.model,
          r.set,
          std::to_string(r.n),
          format_double(r.coverage),
          format_double(r.accuracy),
          format_double(r.distribution[0]),
          format_double(r.distribution[1]),
          format_double(r.distribution[2])};
}

inline ReportRow row_from_cells(const std::vector<std::string>& c) {
  if (c.size() != kReportColumns.size()) throw DataError("report row has " + std::to_string(c.size()) + " cells");
  ReportRow r;
  r.model = c[0];
  r.set = c[1];
  r.n = parse_int<std::size_t>(c[2]);
  r.coverage = parse_double(c[3]);
  r.accuracy = parse_double(c[4]);
  for (std::size_t k = 0; k < 3; ++k) r.distribution[k] = parse_double(c[5 + k]);
  return r;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace detail

// Column order is fixed: model,set,n,coverage,accuracy,pct_E,pct_C,pct_N.
// Shares and accuracy are fractions written in shortest round-trip form.
inline std::string render_report(const std::vector<ReportRow>& rows, ReportFormat format,
                                 const nlohmann::json& metadata = nlohmann::json::object()) {
  std::string out;
  switch (format) {
    case ReportFormat::kCsv: {
      out = join(kReportColumns, ",") + "\n";
      for (const ReportRow& r : rows) {
        auto cells = detail::row_cells(r);
        for (auto& c : cells) c = detail::csv_field(c);
        out += join(cells, ",") + "\n";
      }
      break;
    }
    case ReportFormat::kMarkdown: {
      out = "| " + join(kReportColumns, " | ") + " |\n|";
      for (std::size_t i = 0; i < kReportColumns.size(); ++i) out += "---|";
      out += "\n";
      for (const ReportRow& r : rows) out += "| " + join(detail::row_cells(r), " | ") + " |\n";
      break;
    }
    case ReportFormat::kJson: {
      nlohmann::json j;
      j["columns"] = kReportColumns;
      j["rows"] = nlohmann::json::array();
      for (const ReportRow& r : rows) {
        j["rows"].push_back({{"model", r.model},
                             {"set", r.set},
                             {"n", r.n},
                             {"coverage", r.coverage},
                             {"accuracy", r.accuracy},
                             {"pct_E", r.distribution[0]},
                             {"pct_C", r.distribution[1]},
                             {"pct_N", r.distribution[2]}});
      }
      j["metadata"] = metadata;
      out = j.dump(2) + "\n";
      break;
    }
  }
  return out;
}

inline void write_report(const std::vector<ReportRow>& rows, ReportFormat format, const std::filesystem::path& out,
                         const nlohmann::json& metadata = nlohmann::json::object()) {
  write_file_atomic(out, render_report(rows, format, metadata));
}

inline std::vector<ReportRow> parse_report_csv(std::string_view text) {
  auto lines = split_view(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines[0] != join(kReportColumns, ",")) throw DataError("report CSV header mismatch");
  std::vector<ReportRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) rows.push_back(detail::row_from_cells(detail::split_csv_line(lines[i])));
  return rows;
}

inline std::vector<ReportRow> load_report_csv(const std::filesystem::path& path) {
  return parse_report_csv(read_file(path));
}

}  // namespace compsense
