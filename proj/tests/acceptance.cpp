// Acceptance run: one PASS/FAIL/SKIP line per criterion, exit status 1 if any fail.
// Criteria that need the real SNLI/MNLI downloads look for them under
// $COMPSENSE_SNLI_DIR and are skipped when it is unset.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <iostream>

#include "compsense/cli.hpp"
#include "oracles.hpp"

using namespace compsense;
namespace fs = std::filesystem;

namespace {

const fs::path kData = COMPSENSE_TEST_DATA;

// Tolerances and bounds.
constexpr double kGradRelTol = 1e-5;
constexpr double kGradH = 1e-5;
constexpr double kGradSeconds = 1.0;
constexpr double kSumTol = 1e-9;
constexpr double kPipelineSeconds = 10.0;
constexpr std::size_t kCs07Lo = 800, kCs07Hi = 1200;
constexpr std::size_t kCs095Lo = 100, kCs095Hi = 200;
constexpr double kMajority = 0.3382, kMajorityTol = 0.0005;
constexpr double kHuman = 0.883, kHumanTol = 0.015;
constexpr double kSoswapYield = 971, kAddamodYield = 1783, kYieldFactor = 2.0;

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome fail(std::string d) { return {Status::kFail, std::move(d)}; }
Outcome skip(std::string d) { return {Status::kSkip, std::move(d)}; }
Outcome check(bool ok, std::string d) { return {ok ? Status::kPass : Status::kFail, std::move(d)}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

FeatureVector random_vector(SplitMix64& rng, std::size_t dim, std::size_t max_active) {
  std::vector<std::uint32_t> all(dim);
  for (std::size_t i = 0; i < dim; ++i) all[i] = static_cast<std::uint32_t>(i);
  fisher_yates(all, rng);
  all.resize(std::min(dim, static_cast<std::size_t>(rng.below(max_active + 1))));
  std::sort(all.begin(), all.end());
  return {all};
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  SplitMix64 rng(2718);
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t dim = 1 + rng.below(50);
    SoftmaxModel m = SoftmaxModel::zeros(dim, 0, rng.below(2) == 0);
    for (double& w : m.weights) w = rng.uniform() * 2 - 1;
    if (m.bias_enabled) {
      for (double& b : m.bias) b = rng.uniform() * 2 - 1;
    }
    std::vector<LabeledVector> batch;
    const std::size_t n = 1 + rng.below(8);
    for (std::size_t i = 0; i < n; ++i) batch.push_back({random_vector(rng, dim, 6), kAllLabels[rng.below(3)]});
    const double l2 = rng.uniform() * 0.1;
    const auto lg = loss_and_grad(m, batch, l2);
    auto probe = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + kGradH;
      const double up = loss_and_grad(m, batch, l2).loss;
      param = saved - kGradH;
      const double down = loss_and_grad(m, batch, l2).loss;
      param = saved;
      const double numeric = (up - down) / (2 * kGradH);
      worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-3}));
    };
    for (std::size_t k = 0; k < m.weights.size(); ++k) probe(m.weights[k], lg.grad.weights[k]);
    if (m.bias_enabled) {
      for (std::size_t c = 0; c < 3; ++c) probe(m.bias[c], lg.grad.bias[c]);
    }
  }
  const double secs = seconds_since(t0);
  return check(worst < kGradRelTol && secs < kGradSeconds,
               "max rel err " + format_double(worst) + ", " + format_double(secs) + " s");
}

Outcome softmax_contracts() {
  SplitMix64 rng(12);
  double worst_sum = 0.0;
  int shift_mismatch = 0, non_finite = 0;
  for (int i = 0; i < 1000; ++i) {
    auto m = SoftmaxModel::zeros(8, 0, true);
    const double range = i % 2 ? 1e4 : 20.0;
    // Dyadic weights keep every logit sum exact, so an integer shift must be bit-identical.
    for (double& w : m.weights) w = std::round((rng.uniform() * 2 - 1) * range * 1024.0) / 1024.0;
    for (double& b : m.bias) b = std::round((rng.uniform() * 2 - 1) * range * 1024.0) / 1024.0;
    FeatureVector v = random_vector(rng, 8, 5);
    if (v.indices.empty()) v.indices = {static_cast<std::uint32_t>(rng.below(8))};
    const Probs before = predict_proba(m, v);
    double sum = 0.0;
    for (double p : before) {
      non_finite += !std::isfinite(p);
      sum += p;
    }
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    const std::uint32_t at = v.indices[rng.below(v.indices.size())];
    const double k = static_cast<double>(static_cast<std::int64_t>(rng.below(20001)) - 10000);
    for (std::size_t c = 0; c < 3; ++c) m.weights[3 * at + c] += k;
    const Probs after = predict_proba(m, v);
    for (std::size_t c = 0; c < 3; ++c) shift_mismatch += !same_bits(before[c], after[c]);
  }
  return check(worst_sum <= kSumTol && shift_mismatch == 0 && non_finite == 0,
               "max |sum-1| " + format_double(worst_sum) + ", shift mismatches " + std::to_string(shift_mismatch) +
                   ", non-finite " + std::to_string(non_finite));
}

Outcome lms_algebra() {
  SplitMix64 rng(404);
  int bad = 0;
  std::vector<LmsRecord> recs;
  for (int i = 0; i < 10000; ++i) {
    const double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
    const Probs p{a / (a + b + c), b / (a + b + c), c / (a + b + c)};
    const Label gold = kAllLabels[rng.below(3)];
    const auto r = make_lms_record("id" + std::to_string(i), gold, p);
    double expect = -1.0;
    for (Label l : kAllLabels) {
      if (l != gold) expect = std::max(expect, p[index_of(l)]);
    }
    const double pg = p[index_of(gold)];
    bad += r.lms != expect || r.lms < 0 || r.lms > 1 - pg + 1e-15 || r.lms < (1 - pg) / 2 - 1e-15;
    recs.push_back(r);
  }
  int nesting = 0;
  std::set<std::string> prev;
  for (int k = 0; k <= 10; ++k) {
    const auto ids = subset_cs(recs, k / 10.0).member_ids;
    const std::set<std::string> cur(ids.begin(), ids.end());
    if (k > 0 && !std::includes(prev.begin(), prev.end(), cur.begin(), cur.end())) ++nesting;
    prev = cur;
  }
  return check(bad == 0 && nesting == 0,
               std::to_string(bad) + " algebra violations, " + std::to_string(nesting) + " nesting violations");
}

Outcome feature_oracle() {
  std::set<std::string> accepted;
  for (const auto& t : oracle::ptb_tagset()) {
    if (is_content_word(t)) accepted.insert(t);
  }
  const std::set<std::string> sixteen = {"NN", "NNS", "NNP", "NNPS", "VB",  "VBD", "VBG", "VBN",
                                         "VBP", "VBZ", "JJ",  "JJR", "JJS",  "RB",  "RBR", "RBS"};
  SplitMix64 rng(8);
  std::vector<NliExample> train, probe;
  for (int i = 0; i < 400; ++i) {
    train.push_back(oracle::make_example("t" + std::to_string(i), oracle::random_toy_sentence(rng),
                                         oracle::random_toy_sentence(rng), kAllLabels[rng.below(3)]));
  }
  for (int i = 0; i < 500; ++i) {
    probe.push_back(oracle::make_example("p" + std::to_string(i), oracle::random_toy_sentence(rng),
                                         oracle::random_toy_sentence(rng), kAllLabels[rng.below(3)]));
  }
  const auto fixture = load_nli_jsonl(kData / "fixture.jsonl", true);
  int mismatches = 0;
  auto run_on = [&](const std::vector<NliExample>& examples, const Vocabulary& v) {
    for (const auto& ex : examples) {
      std::set<std::uint32_t> want;
      for (const auto& [kind, a, b] : oracle::brute_force_keys(ex)) {
        if (auto idx = v.find({static_cast<FeatureKind>(kind), a, b})) want.insert(*idx);
      }
      const auto fv = featurize(ex, v);
      mismatches += std::vector<std::uint32_t>(want.begin(), want.end()) != fv.indices;
    }
  };
  run_on(probe, build_vocab(train, 2));
  run_on(fixture, build_vocab(fixture, 2));
  return check(accepted == sixteen && mismatches == 0 && fixture.size() == 200,
               std::to_string(accepted.size()) + " content tags, " + std::to_string(mismatches) +
                   " mismatches over " + std::to_string(probe.size() + fixture.size()) + " pairs");
}

// Locates a file under $COMPSENSE_SNLI_DIR, either at the top or one level down.
std::optional<fs::path> snli_file(const std::string& name) {
  const char* dir = std::getenv("COMPSENSE_SNLI_DIR");
  if (!dir || !*dir) return std::nullopt;
  for (const fs::path& p : {fs::path(dir) / name, fs::path(dir) / "snli_1.0" / name, fs::path(dir) / "multinli_1.0" / name}) {
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

Outcome calibration() {
  const auto snli_train = snli_file("snli_1.0_train.jsonl");
  const auto mnli_train = snli_file("multinli_1.0_train.jsonl");
  const auto dev = snli_file("snli_1.0_dev.jsonl");
  if (!snli_train || !mnli_train || !dev) return skip("set COMPSENSE_SNLI_DIR to the SNLI 1.0 and MultiNLI 1.0 files");
  const std::vector<fs::path> train_files = {*snli_train, *mnli_train};
  const auto vocab = build_vocab(file_source(train_files, false), VocabOptions{});
  const auto model = train(file_source(train_files, false), vocab, TrainConfig{}).model;
  const auto recs = compute_lms(BowClassifier(model, vocab), load_nli_jsonl(*dev, false));
  const std::size_t n07 = subset_cs(recs, 0.7).member_ids.size();
  const std::size_t n095 = subset_cs(recs, 0.95).member_ids.size();
  return check(n07 >= kCs07Lo && n07 <= kCs07Hi && n095 >= kCs095Lo && n095 <= kCs095Hi,
               "|CS_0.7| = " + std::to_string(n07) + ", |CS_0.95| = " + std::to_string(n095));
}

Outcome dev_baselines() {
  const auto dev = snli_file("snli_1.0_dev.jsonl");
  if (!dev) return skip("set COMPSENSE_SNLI_DIR to the SNLI 1.0 files");
  const auto corpus = load_nli_jsonl(*dev, false);
  Annotations ann;
  const EvalSet set = load_eval_set(*dev, false, &ann);
  const auto maj = majority_vote_baseline(set);
  const auto human = human_estimate(ann, set, HumanMode::average());
  return check(corpus.size() == 10000 && set.size() == 9842 && std::abs(maj.accuracy - kMajority) <= kMajorityTol &&
                   std::abs(human.accuracy - kHuman) <= kHumanTol,
               std::to_string(corpus.size()) + " lines, " + std::to_string(set.size()) + " determined, majority " +
                   format_double(maj.accuracy) + ", human " + format_double(human.accuracy));
}

std::vector<std::string> fold_articles(std::vector<std::string> v) {
  for (auto& w : v) {
    w = oracle::lower(w);
    if (w == "an") w = "a";
  }
  return v;
}

std::string generate(Rule rule, const std::vector<DepTree>& trees_raw, const fs::path& corpus, const AmodMap& amod,
                     unsigned threads, std::vector<AdversarialPair>* keep = nullptr) {
  const auto trees = index_premise_trees(std::vector<DepTree>(trees_raw));
  GenerationOptions opts;
  opts.rule = rule;
  opts.threads = threads;
  opts.chunk = 16;
  std::string out;
  const auto report = emit_adversary_set(file_source({corpus}), trees, &amod, opts, [&](const AdversarialPair& p) {
    out += adversarial_to_json(p).dump() + "\n";
    if (keep) keep->push_back(p);
  });
  return out + report.to_json().dump() + "\n";
}

Outcome adversary_invariants() {
  int checked = 0, bad = 0, nondeterministic = 0;
  for (const auto& [corpus, conllu] : {std::pair{kData / "fixture.jsonl", kData / "fixture.conllu"},
                                       std::pair{kData / "adv10.jsonl", kData / "adv10.conllu"}}) {
    const auto trees = load_conllu(conllu);
    const AmodMap amod = mine_amod_map(trees);
    std::map<std::string, const DepTree*> by_id;
    for (const auto& t : trees) by_id[*t.pair_id] = &t;
    for (Rule rule : {Rule::kSoSwap, Rule::kAddAmod}) {
      std::vector<AdversarialPair> pairs;
      const std::string first = generate(rule, trees, corpus, amod, 1, &pairs);
      for (unsigned threads : {1u, 3u, 8u}) nondeterministic += generate(rule, trees, corpus, amod, threads) != first;
      for (const auto& p : pairs) {
        ++checked;
        if (rule == Rule::kSoSwap) {
          const auto& e = std::get<SwapEdit>(p.edits);
          std::vector<bool> proper;
          for (const auto& tok : p.hypothesis) proper.push_back(tok.pos.starts_with("NNP"));
          const auto back = swap_spans(p.hypothesis, e.hypothesis_subj, e.hypothesis_obj, proper);
          bad += oracle::surface_multiset(p.premise, true) != oracle::surface_multiset(p.hypothesis, true) ||
                 oracle::surfaces(back.tokens) != oracle::surfaces(p.premise);
        } else {
          const auto& e = std::get<InsertEdit>(p.edits);
          const auto source = fold_articles(oracle::surfaces(tagged_tokens(*by_id.at(p.source_pair_id))));
          auto removed = [](const std::vector<TaggedToken>& toks, int at) {
            auto s = oracle::surfaces(toks);
            s.erase(s.begin() + at);
            return fold_articles(s);
          };
          bad += removed(p.premise, e.premise_insert_at) != source ||
                 removed(p.hypothesis, e.hypothesis_insert_at) != source ||
                 oracle::lower(p.premise[static_cast<std::size_t>(e.premise_insert_at)].surface) != e.adjective;
        }
      }
    }
  }
  return check(checked > 0 && bad == 0 && nondeterministic == 0,
               std::to_string(checked) + " pairs, " + std::to_string(bad) + " invariant failures, " +
                   std::to_string(nondeterministic) + " nondeterministic runs");
}

Outcome adversary_yield() {
  const auto dev = snli_file("snli_1.0_dev.jsonl");
  const char* parses = std::getenv("COMPSENSE_SNLI_CONLLU");
  if (!dev || !parses || !*parses) return skip("set COMPSENSE_SNLI_DIR and COMPSENSE_SNLI_CONLLU (premise parses)");
  const auto trees = load_conllu(parses);
  const AmodMap amod = mine_amod_map(trees);
  const auto index = index_premise_trees(std::vector<DepTree>(trees));
  std::size_t yields[2] = {0, 0};
  int k = 0;
  for (Rule rule : {Rule::kSoSwap, Rule::kAddAmod}) {
    GenerationOptions opts;
    opts.rule = rule;
    yields[k++] = emit_adversary_set(file_source({*dev}), index, &amod, opts, [](const AdversarialPair&) {}).emitted;
  }
  auto within = [](double got, double ref) { return got >= ref / kYieldFactor && got <= ref * kYieldFactor; };
  return check(within(yields[0], kSoswapYield) && within(yields[1], kAddamodYield),
               "soswap " + std::to_string(yields[0]) + ", addamod " + std::to_string(yields[1]));
}

Outcome word_shuffle() {
  const auto corpus = load_nli_jsonl(kData / "fixture.jsonl", true);
  std::size_t bad = 0;
  std::string a, b;
  for (const auto& ex : corpus) {
    const auto s = shuffle_words(ex, 7);
    bad += oracle::surface_multiset(s.premise_tokens) != oracle::surface_multiset(ex.premise_tokens) ||
           oracle::surface_multiset(s.hypothesis_tokens) != oracle::surface_multiset(ex.hypothesis_tokens);
    a += shuffled_to_json(s).dump() + "\n";
    b += shuffled_to_json(shuffle_words(ex, 7)).dump() + "\n";
  }
  return check(bad == 0 && a == b,
               std::to_string(bad) + " of " + std::to_string(corpus.size()) + " multiset failures, " +
                   (a == b ? "identical bytes" : "bytes differ"));
}

Outcome golden_pipeline() {
  oracle::TempDir dir;
  const auto t0 = std::chrono::steady_clock::now();
  const std::string cmd = std::string("\"") + COMPSENSE_CLI + "\" pipeline --config \"" +
                          (kData / "pipeline.conf").string() + "\" --set output_dir=\"" + (dir / "out").string() +
                          "\" >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  const double secs = seconds_since(t0);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return fail("pipeline exited with status " + std::to_string(status));
  const bool same = read_file(dir / "out" / "report.csv") == read_file(kData / "golden_report.csv");
  return check(same && secs < kPipelineSeconds,
               std::string(same ? "byte-identical" : "report differs") + ", " + format_double(secs) + " s");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient matches central differences", gradient_check},
      {"softmax normalization and shift invariance", softmax_contracts},
      {"LMS algebra and CS chain nesting", lms_algebra},
      {"featurize agrees with brute-force keys", feature_oracle},
      {"CS subset sizes on SNLI dev", calibration},
      {"majority and human baselines on SNLI dev", dev_baselines},
      {"adversary invariants and determinism", adversary_invariants},
      {"adversary yield on SNLI", adversary_yield},
      {"word shuffle multiset and determinism", word_shuffle},
      {"golden pipeline report", golden_pipeline},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const char* tag = o.status == Status::kPass ? "[PASS]" : o.status == Status::kFail ? "[FAIL]" : "[SKIP]";
    failures += o.status == Status::kFail;
    std::cout << tag << ' ' << name << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
