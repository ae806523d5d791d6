#include <gtest/gtest.h>

#include <fstream>

#include "compsense/advgen.hpp"
#include "oracles.hpp"

using namespace compsense;

namespace {

const std::filesystem::path kData = COMPSENSE_TEST_DATA;

DepTree dog_chased_cat() {
  return oracle::dep_tree({"The/the/DT/2/det", "dog/dog/NN/3/nsubj", "chased/chase/VBD/0/root", "the/the/DT/5/det",
                           "cat/cat/NN/3/obj", "./././3/punct"});
}

// "a man walks a dog"
DepTree man_walks_dog() {
  return oracle::dep_tree({"a/a/DT/2/det", "man/man/NN/3/nsubj", "walks/walk/VBZ/0/root", "a/a/DT/5/det",
                           "dog/dog/NN/3/obj"});
}

// Token surfaces with position `at` removed.
std::vector<std::string> remove_insertion(const std::vector<TaggedToken>& toks, int at) {
  std::vector<std::string> out = oracle::surfaces(toks);
  out.erase(out.begin() + at);
  return out;
}

std::vector<std::string> fold_articles(std::vector<std::string> v) {
  for (auto& w : v) {
    w = oracle::lower(w);
    if (w == "an") w = "a";
  }
  return v;
}

}  // namespace

TEST(FindSvo, DogChasedCat) {
  const auto f = find_svo(dog_chased_cat());
  ASSERT_TRUE(f.has_value());
  EXPECT_EQ(f->verb_index, 3);
  EXPECT_EQ(f->subj_index, 2);
  EXPECT_EQ(f->obj_index, 5);
  EXPECT_EQ(f->subj_span, (TokenSpan{0, 2}));
  EXPECT_EQ(f->obj_span, (TokenSpan{3, 5}));
}

TEST(FindSvo, FilterRules) {
  SvoReject why{};
  EXPECT_FALSE(gen_soswap(oracle::dep_tree({"it/it/PRP/2/nsubj", "chased/chase/VBD/0/root", "the/the/DT/4/det",
                                            "cat/cat/NN/2/obj"}),
                          "p", &why));
  EXPECT_EQ(why, SvoReject::kPronoun);
  EXPECT_FALSE(gen_soswap(oracle::dep_tree({"the/the/DT/2/det", "dog/dog/NN/3/nsubj", "chased/chase/VBD/0/root",
                                            "the/the/DT/5/det", "dog/dog/NN/3/obj"}),
                          "p", &why));
  EXPECT_EQ(why, SvoReject::kSameLemma);
  EXPECT_FALSE(gen_soswap(oracle::dep_tree({"dogs/dog/NNS/2/nsubj", "run/run/VBP/0/root"}), "p", &why));
  EXPECT_EQ(why, SvoReject::kNoFrame);
  EXPECT_FALSE(gen_soswap(oracle::dep_tree({"John/John/NNP/2/nsubj", "saw/see/VBD/0/root", "Mary/Mary/NNP/2/obj"}),
                          "p", &why));
  EXPECT_EQ(why, SvoReject::kNotCommonNoun);
  // Object subtree interrupted by the verb's own adverb: non-contiguous yield.
  EXPECT_FALSE(gen_soswap(oracle::dep_tree({"dog/dog/NN/2/nsubj", "saw/see/VBD/0/root", "cat/cat/NN/2/obj",
                                            "today/today/NN/2/obl:tmod", "nearby/nearby/JJ/3/amod"}),
                          "p", &why));
  EXPECT_EQ(why, SvoReject::kNonContiguous);
}

TEST(SoSwap, HandApplication) {
  const auto pair = gen_soswap(dog_chased_cat(), "src");
  ASSERT_TRUE(pair.has_value());
  EXPECT_EQ(pair->premise_text(), "The dog chased the cat .");
  EXPECT_EQ(pair->hypothesis_text(), "The cat chased the dog .");
  EXPECT_EQ(pair->expected, Label::kContradiction);
  const auto j = adversarial_to_json(*pair);
  EXPECT_EQ(j.at("gold_label"), "contradiction");
  EXPECT_EQ(j.at("source_pairID"), "src");
  EXPECT_EQ(j.at("rule"), "soswap");
}

TEST(SoSwap, CapitalizationRepairKeepsProperNouns) {
  const auto t = oracle::dep_tree({"Rex/Rex/NNP/2/compound", "dogs/dog/NNS/3/nsubj", "chase/chase/VBP/0/root",
                                   "the/the/DT/5/det", "cat/cat/NN/3/obj"});
  const auto pair = gen_soswap(t, "p");
  ASSERT_TRUE(pair.has_value());
  EXPECT_EQ(pair->hypothesis_text(), "The cat chase Rex dogs");
}

TEST(SoSwap, InvariantsOverThousandSentences) {
  SplitMix64 rng(31337);
  int emitted = 0;
  for (int i = 0; i < 1000; ++i) {
    const DepTree t = oracle::random_svo_tree(rng, "r" + std::to_string(i));
    const auto pair = gen_soswap(t, *t.pair_id);
    if (!pair) continue;
    ++emitted;
    // Multiset equality up to the case changes made by capitalization repair.
    EXPECT_EQ(oracle::surface_multiset(pair->premise, true), oracle::surface_multiset(pair->hypothesis, true));
    EXPECT_NE(pair->premise_text(), pair->hypothesis_text());
    // Swapping the recorded hypothesis spans again recovers the premise.
    const auto& e = std::get<SwapEdit>(pair->edits);
    std::vector<bool> proper;
    for (const auto& tok : pair->hypothesis) proper.push_back(tok.pos.starts_with("NNP"));
    const auto back = swap_spans(pair->hypothesis, e.hypothesis_subj, e.hypothesis_obj, proper);
    EXPECT_EQ(oracle::surfaces(back.tokens), oracle::surfaces(pair->premise));
  }
  EXPECT_EQ(emitted, 1000);
}

TEST(AmodMap, DirectAccumulation) {
  AmodMap m;
  m.add("dog", "small");
  m.add("cat", "small");
  m.add("dog", "brown");
  ASSERT_NE(m.adjectives("dog"), nullptr);
  EXPECT_EQ(m.adjectives("dog")->size(), 2u);
  EXPECT_EQ(m.adjectives("cat")->size(), 1u);
  EXPECT_EQ(m.count("cat", "small"), 1u);
  EXPECT_TRUE(mine_amod_map({}).empty());
  EXPECT_EQ(AmodMap::parse(m.serialize()).serialize(), m.serialize());
}

TEST(AmodMap, RecountAgainstRawFile) {
  const auto trees = load_conllu(kData / "fixture.conllu");
  const AmodMap m = mine_amod_map(trees);
  // Independent recount: scan the raw file for amod rows and resolve heads
  // within each sentence block.
  std::ifstream in(kData / "fixture.conllu");
  std::string line;
  std::vector<std::vector<std::string>> rows;
  std::map<std::pair<std::string, std::string>, std::uint64_t> want;
  auto flush = [&] {
    for (const auto& r : rows) {
      if (r[7] != "amod" || r[4].rfind("JJ", 0) != 0) continue;
      const auto& head = rows[static_cast<std::size_t>(std::stoi(r[6]) - 1)];
      if (head[4] == "NN" || head[4] == "NNS") ++want[{oracle::lower(head[2]), oracle::lower(r[2])}];
    }
    rows.clear();
  };
  while (std::getline(in, line)) {
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    std::vector<std::string> cols;
    for (auto c : split_view(line, '\t')) cols.emplace_back(c);
    rows.push_back(cols);
  }
  flush();
  ASSERT_FALSE(want.empty());
  std::size_t total = 0;
  for (const auto& [noun, adjs] : m.data()) total += adjs.size();
  EXPECT_EQ(total, want.size());
  for (const auto& [k, n] : want) EXPECT_EQ(m.count(k.first, k.second), n) << k.first << " " << k.second;
}

TEST(AddAmod, HandApplication) {
  AmodMap m;
  m.add("man", "small");
  m.add("dog", "small");
  m.add("dog", "brown");
  const auto pair = gen_addamod(man_walks_dog(), m, "src");
  ASSERT_TRUE(pair.has_value());
  EXPECT_EQ(pair->premise_text(), "a small man walks a dog");
  EXPECT_EQ(pair->hypothesis_text(), "a man walks a small dog");
  EXPECT_EQ(pair->expected, Label::kNeutral);
}

TEST(AddAmod, ArticleRepair) {
  const auto t = oracle::dep_tree({"an/a/DT/2/det", "elephant/elephant/NN/3/nsubj", "pushed/push/VBD/0/root",
                                   "a/a/DT/5/det", "truck/truck/NN/3/obj"});
  AmodMap m;
  m.add("elephant", "enormous");
  m.add("truck", "enormous");
  const auto pair = gen_addamod(t, m, "p");
  ASSERT_TRUE(pair.has_value());
  EXPECT_EQ(pair->premise_text(), "an enormous elephant pushed a truck");
  EXPECT_EQ(pair->hypothesis_text(), "an elephant pushed an enormous truck");
  for (const auto* toks : {&pair->premise, &pair->hypothesis}) {
    for (std::size_t i = 0; i + 1 < toks->size(); ++i) {
      if ((*toks)[i].surface == "a") {
        EXPECT_FALSE(starts_with_vowel((*toks)[i + 1].surface));
      }
    }
  }
}

TEST(AddAmod, Rejections) {
  AmodMap m;
  m.add("dog", "small");
  AddAmodSearch s = gen_addamod_detailed(oracle::dep_tree({"dogs/dog/NNS/2/nsubj", "run/run/VBP/0/root"}), m, "p");
  EXPECT_EQ(s.reason, AmodReject::kFewerThanTwoNouns);
  s = gen_addamod_detailed(man_walks_dog(), m, "p");
  EXPECT_EQ(s.reason, AmodReject::kEmptyIntersection);
  m.add("man", "small");
  const auto present = oracle::dep_tree({"a/a/DT/3/det", "small/small/JJ/3/amod", "man/man/NN/4/nsubj",
                                         "walks/walk/VBZ/0/root", "a/a/DT/6/det", "dog/dog/NN/4/obj"});
  s = gen_addamod_detailed(present, m, "p");
  EXPECT_EQ(s.reason, AmodReject::kAdjectivePresent);
}

TEST(AddAmod, DeterministicChoiceByJointCount) {
  AmodMap m;
  m.add("man", "tall", 1);
  m.add("dog", "tall", 1);
  m.add("man", "old", 5);
  m.add("dog", "old", 1);
  m.add("man", "big", 3);
  m.add("dog", "big", 3);
  const auto pair = gen_addamod(man_walks_dog(), m, "p");
  ASSERT_TRUE(pair.has_value());
  // old and big both total 6; the tie goes to the alphabetically first.
  EXPECT_EQ(std::get<InsertEdit>(pair->edits).adjective, "big");
}

TEST(AddAmod, InsertionRemovalRecovers) {
  SplitMix64 rng(77);
  AmodMap m;
  for (const char* n : {"dog", "cat", "man", "woman", "ball", "kite", "boy", "girl", "horse", "elephant", "owl", "apple",
                        "park"}) {
    for (const char* a : {"small", "old", "enormous", "icy", "tall", "red"}) m.add(n, a, 1 + rng.below(4));
  }
  int emitted = 0;
  for (int i = 0; i < 1000; ++i) {
    const DepTree t = oracle::random_svo_tree(rng, "r" + std::to_string(i));
    const auto pair = gen_addamod(t, m, *t.pair_id);
    if (!pair) continue;
    ++emitted;
    const auto& e = std::get<InsertEdit>(pair->edits);
    const auto source = fold_articles(oracle::surfaces(tagged_tokens(t)));
    EXPECT_EQ(pair->premise.size(), t.size() + 1);
    EXPECT_EQ(pair->hypothesis.size(), pair->premise.size());
    EXPECT_EQ(fold_articles(remove_insertion(pair->premise, e.premise_insert_at)), source);
    EXPECT_EQ(fold_articles(remove_insertion(pair->hypothesis, e.hypothesis_insert_at)), source);
    EXPECT_EQ(oracle::lower(pair->premise[static_cast<std::size_t>(e.premise_insert_at)].surface), e.adjective);
    EXPECT_EQ(oracle::lower(pair->hypothesis[static_cast<std::size_t>(e.hypothesis_insert_at)].surface), e.adjective);
    EXPECT_NE(e.premise_insert_at, e.hypothesis_insert_at);
  }
  EXPECT_GT(emitted, 500);
}

TEST(EmitSet, TenSentenceFixture) {
  const auto trees = index_premise_trees(load_conllu(kData / "adv10.conllu"));
  std::vector<AdversarialPair> pairs;
  const auto report = emit_adversary_set(file_source({kData / "adv10.jsonl"}), trees, nullptr, {},
                                         [&](const AdversarialPair& p) { pairs.push_back(p); });
  EXPECT_EQ(report.considered, 10u);
  EXPECT_EQ(report.emitted, 4u);
  EXPECT_EQ(report.rejected(), 6u);
  EXPECT_EQ(report.rejections.at("pronoun_argument"), 2u);
  EXPECT_EQ(report.rejections.at("same_lemma"), 1u);
  EXPECT_EQ(report.rejections.at("argument_not_common_noun"), 1u);
  EXPECT_EQ(report.rejections.at("no_svo_frame"), 2u);
  ASSERT_EQ(pairs.size(), 4u);
  EXPECT_EQ(pairs[0].hypothesis_text(), "The cat chased the dog .");
  for (const auto& p : pairs) EXPECT_EQ(p.expected, Label::kContradiction);
}

TEST(EmitSet, LimitIsFirstCome) {
  const auto trees = index_premise_trees(load_conllu(kData / "adv10.conllu"));
  std::vector<std::string> ids;
  GenerationOptions opts;
  opts.limit = 2;
  const auto report = emit_adversary_set(file_source({kData / "adv10.jsonl"}), trees, nullptr, opts,
                                         [&](const AdversarialPair& p) { ids.push_back(p.source_pair_id); });
  EXPECT_EQ(report.emitted, 2u);
  EXPECT_EQ(ids, (std::vector<std::string>{"a01", "a02"}));
}

TEST(EmitSet, ThreadCountDoesNotChangeOutput) {
  const auto trees = index_premise_trees(load_conllu(kData / "fixture.conllu"));
  const AmodMap amod = mine_amod_map(load_conllu(kData / "fixture.conllu"));
  for (Rule rule : {Rule::kSoSwap, Rule::kAddAmod}) {
    std::string out[3];
    nlohmann::json rep[3];
    const unsigned threads[3] = {1, 4, 7};
    for (int k = 0; k < 3; ++k) {
      GenerationOptions opts;
      opts.rule = rule;
      opts.threads = threads[k];
      opts.chunk = 16;
      rep[k] = emit_adversary_set(file_source({kData / "fixture.jsonl"}), trees, &amod, opts,
                                  [&](const AdversarialPair& p) { out[k] += adversarial_to_json(p).dump() + "\n"; })
                   .to_json();
    }
    EXPECT_FALSE(out[0].empty());
    EXPECT_EQ(out[0], out[1]);
    EXPECT_EQ(out[0], out[2]);
    EXPECT_EQ(rep[0], rep[1]);
    EXPECT_EQ(rep[0], rep[2]);
  }
}

TEST(EmitSet, MissingParsesAreSkipped) {
  const auto trees = index_premise_trees(load_conllu(kData / "fixture.conllu"));
  const auto report = emit_adversary_set(file_source({kData / "fixture.jsonl"}), trees, nullptr, {},
                                         [](const AdversarialPair&) {});
  EXPECT_EQ(report.considered, 200u);
  EXPECT_EQ(report.rejections.at("missing_constituency_parse"), 2u);
  EXPECT_EQ(report.emitted + report.rejected(), report.considered);
}
