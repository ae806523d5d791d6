#pragma once

// Lexically-misleading score: the highest probability the bag-of-words
// regression puts on a wrong label, and the CS_lambda subsets it induces.

#include <array>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "compsense/bowreg.hpp"
#include "compsense/common.hpp"
#include "compsense/corpus.hpp"
#include "compsense/label.hpp"

namespace compsense {

struct LmsRecord {
  std::string pair_id;
  Label gold = Label::kEntailment;
  Probs probs{0.0, 0.0, 0.0};
  double lms = 0.0;
  Label misleading_label = Label::kContradiction;

  friend bool operator==(const LmsRecord&, const LmsRecord&) = default;
};

// Max over the two non-gold labels; ties go to the earlier label in (E, C, N).
inline LmsRecord make_lms_record(std::string pair_id, Label gold, const Probs& probs) {
  LmsRecord r;
  r.pair_id = std::move(pair_id);
  r.gold = gold;
  r.probs = probs;
  bool have = false;
  for (Label c : kAllLabels) {
    if (c == gold) continue;
    const double p = probs[index_of(c)];
    if (!have || p > r.lms) {
      r.lms = p;
      r.misleading_label = c;
      have = true;
    }
  }
  return r;
}

struct LmsStats {
  std::size_t scored = 0;
  std::size_t skipped_undetermined = 0;
};

// One record per determined-gold example, in source order.
inline LmsStats compute_lms(const BowClassifier& classifier, const ExampleSource& source,
                            const std::function<void(const LmsRecord&)>& sink) {
  LmsStats stats;
  source([&](const NliExample& ex) {
    if (!ex.gold) {
      ++stats.skipped_undetermined;
      return;
    }
    sink(make_lms_record(ex.pair_id, *ex.gold, classifier(ex)));
    ++stats.scored;
  });
  return stats;
}

inline std::vector<LmsRecord> compute_lms(const BowClassifier& classifier, const std::vector<NliExample>& corpus,
                                          LmsStats* stats = nullptr) {
  std::vector<LmsRecord> out;
  LmsStats s = compute_lms(classifier, memory_source(corpus), [&](const LmsRecord& r) { out.push_back(r); });
  if (stats) *stats = s;
  return out;
}

struct SourceFingerprint {
  std::uint64_t model = 0;
  std::uint64_t corpus = 0;
  friend bool operator==(const SourceFingerprint&, const SourceFingerprint&) = default;
};

struct CsSubset {
  double lambda = 0.0;
  std::vector<std::string> member_ids;
  SourceFingerprint source;
};

inline void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw UsageError("lambda must lie in [0, 1], got " + format_double(lambda));
  }
}

// Members are the records with lms >= lambda, in record order.
inline CsSubset subset_cs(const std::vector<LmsRecord>& records, double lambda, SourceFingerprint source = {}) {
  check_lambda(lambda);
  CsSubset s;
  s.lambda = lambda;
  s.source = source;
  for (const LmsRecord& r : records) {
    if (r.lms >= lambda) s.member_ids.push_back(r.pair_id);
  }
  return s;
}

// ---------------------------------------------------------------------------
// LMS JSONL: {"pairID", "gold_label", "probs": [pE, pC, pN], "lms"}

inline nlohmann::json lms_to_json(const LmsRecord& r) {
  nlohmann::json j;
  j["pairID"] = r.pair_id;
  j["gold_label"] = std::string(label_name(r.gold));
  j["probs"] = {r.probs[0], r.probs[1], r.probs[2]};
  j["lms"] = r.lms;
  return j;
}

inline LmsRecord lms_from_json(const nlohmann::json& j) {
  try {
    const auto gold = parse_label(j.at("gold_label").get<std::string>());
    if (!gold) throw DataError("invalid gold_label in LMS record");
    const auto& p = j.at("probs");
    if (!p.is_array() || p.size() != 3) throw DataError("probs must have three entries");
    LmsRecord r = make_lms_record(j.at("pairID").get<std::string>(), *gold,
                                  {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    r.lms = j.at("lms").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed LMS record: ") + e.what());
  }
}

inline void write_lms(const std::vector<LmsRecord>& records, const std::filesystem::path& path) {
  AtomicWriter w(path);
  for (const LmsRecord& r : records) w.stream() << lms_to_json(r).dump() << '\n';
  w.commit();
}

inline std::vector<LmsRecord> read_lms(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<LmsRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(lms_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// Decile counts: bucket k holds lms in [k/10, (k+1)/10), the last bucket
// also holds lms == 1.
inline std::array<std::size_t, 10> lms_histogram(const std::vector<LmsRecord>& records) {
  std::array<std::size_t, 10> buckets{};
  for (const LmsRecord& r : records) {
    std::size_t k = 0;
    while (k < 9 && r.lms >= static_cast<double>(k + 1) / 10.0) ++k;
    ++buckets[k];
  }
  return buckets;
}

inline std::string histogram_json(const std::vector<LmsRecord>& records) {
  nlohmann::json j;
  j["n"] = records.size();
  j["bucket_lower_bounds"] = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  j["counts"] = lms_histogram(records);
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Subset export

// Id list: "# lambda=<l>", "# model=<hex> corpus=<hex>", then one id per line.
inline std::string subset_id_list(const CsSubset& s) {
  std::string out = "# lambda=" + format_double(s.lambda) + "\n";
  out += "# model=" + hex64(s.source.model) + " corpus=" + hex64(s.source.corpus) + "\n";
  for (const auto& id : s.member_ids) out += id + '\n';
  return out;
}

inline CsSubset parse_subset_id_list(std::string_view text) {
  auto lines = split_view(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() < 2 || !lines[0].starts_with("# lambda=") || !lines[1].starts_with("# model=")) {
    throw DataError("subset id list is missing its two-line header");
  }
  CsSubset s;
  s.lambda = parse_double(lines[0].substr(9));
  auto fp = split_view(lines[1].substr(2), ' ');
  if (fp.size() != 2 || !fp[0].starts_with("model=") || !fp[1].starts_with("corpus=")) {
    throw DataError("malformed subset fingerprint header");
  }
  s.source.model = parse_hex64(fp[0].substr(6));
  s.source.corpus = parse_hex64(fp[1].substr(7));
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const auto id = trim(lines[i]);
    if (!id.empty()) s.member_ids.emplace_back(id);
  }
  return s;
}

inline CsSubset load_subset(const std::filesystem::path& path) { return parse_subset_id_list(read_file(path)); }

// Copies the source JSONL lines whose pair id is a member, byte for byte.
inline std::size_t export_subset_jsonl(const CsSubset& s, const std::filesystem::path& source_jsonl,
                                       const std::filesystem::path& out_path) {
  const std::unordered_set<std::string> members(s.member_ids.begin(), s.member_ids.end());
  std::ifstream in = open_input(source_jsonl);
  AtomicWriter w(out_path);
  std::string line;
  std::size_t lineno = 0;
  std::size_t written = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::string id;
    try {
      id = pair_id_of(nlohmann::json::parse(line), lineno);
    } catch (const nlohmann::json::exception&) {
      continue;
    }
    if (members.count(id)) {
      w.stream() << line << '\n';
      ++written;
    }
  }
  w.commit();
  return written;
}

}  // namespace compsense
