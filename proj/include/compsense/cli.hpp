#pragma once

// The `compsense` command line: one binary, one subcommand per pipeline
// stage, plus `pipeline` which runs vocab -> train -> lms -> subset ->
// evaluate from a config file. Every subcommand that writes a file also
// writes "<file>.manifest.json".
//
// Exit codes: 0 ok, 1 runtime error, 2 usage, 3 data validation,
// 4 fingerprint mismatch.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "compsense/advgen.hpp"
#include "compsense/bowreg.hpp"
#include "compsense/common.hpp"
#include "compsense/config.hpp"
#include "compsense/conllu.hpp"
#include "compsense/corpus.hpp"
#include "compsense/evalx.hpp"
#include "compsense/lexfeat.hpp"
#include "compsense/lms.hpp"
#include "compsense/manifest.hpp"

namespace compsense {

namespace fs = std::filesystem;

using Annotations = std::unordered_map<std::string, std::vector<Gold>>;

struct NamedEvalSet {
  std::string name;
  EvalSet items;
};

inline HumanMode parse_human_mode(std::string_view s) {
  check_human_mode(s);
  if (s.starts_with("slot:")) return HumanMode::fixed_slot(parse_int<std::size_t>(s.substr(5)));
  if (s.starts_with("seeded:")) return HumanMode::seeded(parse_int<std::uint64_t>(s.substr(7)));
  return HumanMode::average();
}

inline std::string cs_set_name(double lambda) { return "CS_" + format_double(lambda); }

// Rows per set: each prediction set, then the majority-vote baseline, then
// the human estimate when the set's examples carry annotator labels.
inline std::vector<ReportRow> build_report_rows(const std::vector<NamedEvalSet>& sets,
                                                const std::vector<PredictionSet>& preds,
                                                const Annotations& annotations, const HumanMode& human,
                                                bool strict, bool baselines = true,
                                                std::ostream* warn = nullptr) {
  std::vector<ReportRow> rows;
  for (const NamedEvalSet& s : sets) {
    if (s.items.empty()) continue;
    for (const PredictionSet& p : preds) {
      // A prediction file usually targets one corpus; outside strict mode a
      // set it does not touch at all is left out of the report.
      const bool touches = std::any_of(s.items.begin(), s.items.end(),
                                       [&](const EvalItem& it) { return p.find(it.pair_id) != nullptr; });
      if (!touches && !strict) {
        if (warn) *warn << "warning: " << p.model_name << " has no predictions for set " << s.name << "\n";
        continue;
      }
      rows.push_back(make_row(p.model_name, s.name, evaluate(p, s.items, strict)));
    }
    if (!baselines) continue;
    const MajorityResult maj = majority_vote_baseline(s.items);
    ReportRow mrow{"majority_vote", s.name, s.items.size(), 1.0, maj.accuracy, {0.0, 0.0, 0.0}};
    mrow.distribution[index_of(maj.label)] = 1.0;
    rows.push_back(mrow);
    const bool annotated = std::any_of(s.items.begin(), s.items.end(), [&](const EvalItem& it) {
      auto a = annotations.find(it.pair_id);
      return a != annotations.end() && !a->second.empty();
    });
    if (annotated) {
      const HumanResult h = human_estimate(annotations, s.items, human);
      rows.push_back({"human", s.name, s.items.size(),
                      static_cast<double>(h.examples) / static_cast<double>(s.items.size()), h.accuracy,
                      h.distribution});
    }
  }
  return rows;
}

// Determined-gold items of a corpus file, with annotator labels.
inline EvalSet load_eval_set(const fs::path& path, bool strict, Annotations* annotations = nullptr) {
  EvalSet out;
  for_each_example(path, strict, [&](const NliExample& ex) {
    if (!ex.gold) return;
    out.push_back({ex.pair_id, *ex.gold});
    if (annotations) annotations->emplace(ex.pair_id, ex.annotator_labels);
  });
  return out;
}

inline EvalSet restrict_to(const EvalSet& full, const std::vector<std::string>& ids) {
  std::unordered_map<std::string, Label> gold;
  for (const EvalItem& it : full) gold.emplace(it.pair_id, it.gold);
  EvalSet out;
  for (const std::string& id : ids) {
    auto g = gold.find(id);
    if (g == gold.end()) throw DataError("subset id '" + id + "' is not in the evaluation corpus");
    out.push_back({id, g->second});
  }
  return out;
}

inline PredictionSet predictions_from_lms(const std::vector<LmsRecord>& records, std::string name) {
  PredictionSet p;
  p.model_name = std::move(name);
  for (const LmsRecord& r : records) p.by_id.emplace(r.pair_id, Prediction{argmax_label(r.probs), r.probs});
  return p;
}

namespace cli {

struct Context {
  std::vector<std::string> argv;
  std::ostream& out;
  std::ostream& err;
  std::map<std::string, std::string> config{};  // pipeline snapshot, if any

  RunManifest manifest() const {
    RunManifest m;
    m.command = argv;
    m.config = config;
    return m;
  }
};

inline void set_config(RunManifest& m, const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) m.config.insert_or_assign(k, v);
}

inline std::map<std::string, std::string> train_config_map(const TrainConfig& c) {
  return {{"l2", format_double(c.l2)},
          {"epochs", std::to_string(c.epochs)},
          {"batch_size", std::to_string(c.batch_size)},
          {"learning_rate", format_double(c.learning_rate)},
          {"lr_decay", format_double(c.lr_decay)},
          {"seed", std::to_string(c.seed)},
          {"bias", c.bias_enabled ? "true" : "false"},
          {"shuffle_buffer", std::to_string(c.shuffle_buffer)}};
}

inline Vocabulary do_build_vocab(const Context& ctx, const std::vector<fs::path>& train, const VocabOptions& opts,
                                 bool strict, const fs::path& out) {
  Vocabulary vocab = build_vocab(file_source(train, strict), opts);
  vocab.save(out);
  RunManifest m = ctx.manifest();
  set_config(m, {{"min_count", std::to_string(opts.min_count)},
              {"lowercase", opts.features.lowercase ? "true" : "false"},
              {"hash_bits", std::to_string(opts.hash_bits)}});
  m.add_inputs("train", train);
  m.add_output("vocab", out);
  m.write_beside(out);
  ctx.err << "vocabulary d=" << vocab.dim() << " fingerprint=" << hex64(vocab.fingerprint()) << '\n';
  return vocab;
}

inline SoftmaxModel do_train(const Context& ctx, const std::vector<fs::path>& train, const fs::path& vocab_path,
                             const Vocabulary& vocab, const TrainConfig& cfg, bool strict, const fs::path& out) {
  TrainResult r = compsense::train(file_source(train, strict), vocab, cfg, [&](const EpochLog& e) {
    ctx.err << "epoch " << e.epoch << " examples=" << e.examples << " mean_nll=" << format_double(e.mean_nll)
            << " objective=" << format_double(e.objective) << '\n';
  });
  r.model.save(out);
  RunManifest m = ctx.manifest();
  set_config(m, train_config_map(cfg));
  m.seeds["train"] = cfg.seed;
  m.add_inputs("train", train);
  m.add_input("vocab", vocab_path);
  m.add_output("model", out);
  m.write_beside(out);
  return std::move(r.model);
}

inline std::vector<LmsRecord> do_score(const Context& ctx, const fs::path& model_path, const fs::path& vocab_path,
                                       const fs::path& corpus, bool strict, const fs::path& out,
                                       const std::optional<fs::path>& histogram) {
  const BowClassifier clf(SoftmaxModel::load(model_path), Vocabulary::load(vocab_path));
  std::vector<LmsRecord> records;
  const LmsStats stats =
      compute_lms(clf, file_source({corpus}, strict), [&](const LmsRecord& r) { records.push_back(r); });
  write_lms(records, out);
  RunManifest m = ctx.manifest();
  m.add_input("model", model_path);
  m.add_input("vocab", vocab_path);
  m.add_input("corpus", corpus);
  m.add_output("lms", out);
  if (histogram) {
    write_file_atomic(*histogram, histogram_json(records));
    m.add_output("histogram", *histogram);
  }
  m.write_beside(out);
  ctx.err << "scored " << stats.scored << " examples, skipped " << stats.skipped_undetermined
          << " undetermined\n";
  return records;
}

inline CsSubset do_subset(const Context& ctx, const fs::path& lms_path, const std::vector<LmsRecord>& records,
                          double lambda, const fs::path& out, const std::optional<fs::path>& source,
                          const std::string& format) {
  SourceFingerprint fp;
  fp.model = manifest_input_hash(lms_path, "model").value_or(0);
  fp.corpus = manifest_input_hash(lms_path, "corpus").value_or(0);
  const CsSubset s = subset_cs(records, lambda, fp);
  RunManifest m = ctx.manifest();
  set_config(m, {{"lambda", format_double(lambda)}, {"format", format}});
  m.add_input("lms", lms_path);
  if (format == "jsonl") {
    if (!source) throw UsageError("--format jsonl needs --source");
    export_subset_jsonl(s, *source, out);
    m.add_input("source", *source);
  } else {
    write_file_atomic(out, subset_id_list(s));
  }
  m.add_output("subset", out);
  m.write_beside(out);
  ctx.err << cs_set_name(lambda) << ": " << s.member_ids.size() << " of " << records.size() << " examples\n";
  return s;
}

// Set names: "full", "CS_<lambda>" for subset files, the file stem for
// adversary sets.
inline std::vector<ReportRow> do_evaluate(const Context& ctx, const std::vector<fs::path>& pred_paths,
                                          const fs::path& corpus, const std::vector<fs::path>& subsets,
                                          const std::vector<fs::path>& adv, const std::vector<PredictionSet>& extra,
                                          const HumanMode& human, bool strict, bool baselines, const fs::path& out,
                                          ReportFormat format) {
  Annotations annotations;
  std::vector<NamedEvalSet> sets;
  sets.push_back({"full", load_eval_set(corpus, strict, &annotations)});
  nlohmann::json lambdas = nlohmann::json::array();
  for (const fs::path& p : subsets) {
    const CsSubset s = load_subset(p);
    lambdas.push_back(s.lambda);
    sets.push_back({cs_set_name(s.lambda), restrict_to(sets.front().items, s.member_ids)});
  }
  for (const fs::path& p : adv) sets.push_back({p.stem().string(), load_eval_set(p, strict)});

  std::vector<PredictionSet> preds;
  for (const fs::path& p : pred_paths) preds.push_back(load_predictions(p));
  for (const PredictionSet& p : extra) preds.push_back(p);

  const auto rows = build_report_rows(sets, preds, annotations, human, strict, baselines, &ctx.err);
  nlohmann::json meta;
  meta["lambda_grid"] = lambdas;
  meta["corpus_fnv1a64"] = hex64(hash_file(corpus));
  write_report(rows, format, out, meta);

  RunManifest m = ctx.manifest();
  m.add_input("corpus", corpus);
  m.add_inputs("preds", pred_paths);
  m.add_inputs("subset", subsets);
  m.add_inputs("adv", adv);
  m.add_output("report", out);
  m.write_beside(out);
  return rows;
}

inline void do_pipeline(const Context& base_ctx, const fs::path& config_path,
                        const std::vector<std::string>& overrides) {
  const PipelineConfig cfg = validate_config(config_path, overrides);
  const Context ctx{base_ctx.argv, base_ctx.out, base_ctx.err, normalized_config(cfg)};
  if (cfg.train.empty()) throw UsageError("pipeline config needs 'train'");
  if (!cfg.eval) throw UsageError("pipeline config needs 'eval'");
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  write_file_atomic(dir / "config.normalized", normalized_config_text(cfg));

  const fs::path vocab_path = dir / "vocab.voc";
  const fs::path model_path = dir / "model.bow";
  const fs::path lms_path = dir / "lms.jsonl";
  const Vocabulary vocab = do_build_vocab(ctx, cfg.train, cfg.vocab, cfg.strict, vocab_path);
  do_train(ctx, cfg.train, vocab_path, vocab, cfg.train_config, cfg.strict, model_path);
  const auto records = do_score(ctx, model_path, vocab_path, *cfg.eval, cfg.strict, lms_path, dir / "lms.hist.json");

  std::vector<fs::path> subset_paths;
  for (double l : cfg.lambda_grid) {
    subset_paths.push_back(dir / ("cs_" + format_double(l) + ".ids"));
    do_subset(ctx, lms_path, records, l, subset_paths.back(), std::nullopt, "ids");
  }
  std::vector<PredictionSet> extra;
  if (cfg.include_bow_row) extra.push_back(predictions_from_lms(records, "bow_regression"));
  do_evaluate(ctx, cfg.preds, *cfg.eval, subset_paths, cfg.adv, extra, parse_human_mode(cfg.human_mode), cfg.strict,
              true, dir / "report.csv", ReportFormat::kCsv);
}

}  // namespace cli

// Parses and runs one command line. Errors are reported on `err` as a JSON
// object {"error", "exit_code"}.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  cli::Context ctx{args, out, err};
  CLI::App app{"compsense: compositionality-sensitivity analysis for NLI corpora", "compsense"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kToolVersion));

  bool strict = false;
  app.add_flag("--strict", strict, "Abort on the first malformed corpus line");

  // ingest-check
  std::vector<fs::path> ic_corpus;
  auto* ingest = app.add_subcommand("ingest-check", "Validate corpora and print ingestion statistics");
  ingest->add_option("--corpus", ic_corpus, "JSONL corpus")->required()->check(CLI::ExistingFile);

  // build-vocab
  std::vector<fs::path> bv_train;
  fs::path bv_out;
  VocabOptions bv_opts;
  bool bv_no_lower = false;
  auto* bv = app.add_subcommand("build-vocab", "Build the lexical feature vocabulary");
  bv->add_option("--train", bv_train, "Training JSONL (repeatable)")->required()->check(CLI::ExistingFile);
  bv->add_option("--min-count", bv_opts.min_count, "Minimum example count per feature")->capture_default_str();
  bv->add_option("--hash-bits", bv_opts.hash_bits, "Use a hashed feature space of 2^bits (0 = exact)");
  bv->add_flag("--no-lowercase", bv_no_lower, "Keep case when normalizing words");
  bv->add_option("--out", bv_out, "Vocabulary file")->required();

  // train-bow
  std::vector<fs::path> tb_train;
  fs::path tb_vocab, tb_out;
  TrainConfig tb_cfg;
  bool tb_no_bias = false;
  auto* tb = app.add_subcommand("train-bow", "Train the softmax regression");
  tb->add_option("--train", tb_train, "Training JSONL (repeatable)")->required()->check(CLI::ExistingFile);
  tb->add_option("--vocab", tb_vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  tb->add_option("--out", tb_out, "Model file")->required();
  tb->add_option("--l2", tb_cfg.l2, "L2 penalty")->capture_default_str();
  tb->add_option("--epochs", tb_cfg.epochs, "Passes over the data")->capture_default_str();
  tb->add_option("--batch", tb_cfg.batch_size, "Mini-batch size")->capture_default_str();
  tb->add_option("--lr", tb_cfg.learning_rate, "Initial learning rate")->capture_default_str();
  tb->add_option("--lr-decay", tb_cfg.lr_decay, "Inverse-time decay per step")->capture_default_str();
  tb->add_option("--seed", tb_cfg.seed, "Shuffling seed")->capture_default_str();
  tb->add_option("--shuffle-buffer", tb_cfg.shuffle_buffer, "Examples per shuffle window")->capture_default_str();
  tb->add_flag("--no-bias", tb_no_bias, "Disable bias terms");

  // score-lms
  fs::path sl_model, sl_vocab, sl_corpus, sl_out;
  std::optional<fs::path> sl_hist;
  auto* sl = app.add_subcommand("score-lms", "Compute lexically-misleading scores");
  sl->add_option("--model", sl_model)->required()->check(CLI::ExistingFile);
  sl->add_option("--vocab", sl_vocab)->required()->check(CLI::ExistingFile);
  sl->add_option("--corpus", sl_corpus)->required()->check(CLI::ExistingFile);
  sl->add_option("--out", sl_out, "LMS JSONL")->required();
  sl->add_option("--histogram", sl_hist, "Write decile histogram JSON");

  // subset
  fs::path ss_lms, ss_out;
  double ss_lambda = 0.7;
  std::optional<fs::path> ss_source;
  std::string ss_format = "ids";
  auto* ss = app.add_subcommand("subset", "Extract CS_lambda");
  ss->add_option("--lms", ss_lms)->required()->check(CLI::ExistingFile);
  ss->add_option("--lambda", ss_lambda)->required();
  ss->add_option("--out", ss_out)->required();
  ss->add_option("--source", ss_source, "Source corpus for --format jsonl")->check(CLI::ExistingFile);
  ss->add_option("--format", ss_format)->check(CLI::IsMember({"ids", "jsonl"}))->capture_default_str();

  // gen-adv
  std::string ga_rule;
  fs::path ga_corpus, ga_out;
  std::vector<fs::path> ga_conllu;
  std::optional<fs::path> ga_amod, ga_report;
  std::size_t ga_limit = 0;
  unsigned ga_threads = 1;
  auto* ga = app.add_subcommand("gen-adv", "Generate SOswap / AddAmod adversaries");
  ga->add_option("--rule", ga_rule)->required()->check(CLI::IsMember({"soswap", "addamod"}));
  ga->add_option("--corpus", ga_corpus)->required()->check(CLI::ExistingFile);
  ga->add_option("--conllu", ga_conllu, "Premise dependency parses (repeatable)")->required()->check(CLI::ExistingFile);
  ga->add_option("--amod-map", ga_amod, "Adjective map (default: mined from --conllu)")->check(CLI::ExistingFile);
  ga->add_option("--limit", ga_limit, "Stop after N pairs (0 = all)");
  ga->add_option("--threads", ga_threads, "Worker threads")->check(CLI::PositiveNumber);
  ga->add_option("--report", ga_report, "Generation report (default <out>.report.json)");
  ga->add_option("--out", ga_out)->required();

  // mine-amod
  std::vector<fs::path> ma_conllu;
  fs::path ma_out;
  auto* ma = app.add_subcommand("mine-amod", "Mine noun -> adjective modifier counts");
  ma->add_option("--conllu", ma_conllu)->required()->check(CLI::ExistingFile);
  ma->add_option("--out", ma_out)->required();

  // shuffle
  fs::path sh_corpus, sh_out;
  std::uint64_t sh_seed = 0;
  auto* sh = app.add_subcommand("shuffle", "Word-shuffle both sentences of every pair");
  sh->add_option("--corpus", sh_corpus)->required()->check(CLI::ExistingFile);
  sh->add_option("--seed", sh_seed)->required();
  sh->add_option("--out", sh_out)->required();

  // evaluate
  std::vector<fs::path> ev_preds, ev_subsets, ev_adv;
  fs::path ev_corpus, ev_out;
  std::string ev_human = "average", ev_format = "csv";
  bool ev_no_baselines = false;
  auto* ev = app.add_subcommand("evaluate", "Score prediction files on full, CS_lambda and adversary sets");
  ev->add_option("--preds", ev_preds, "Prediction TSV/JSONL (repeatable)")->check(CLI::ExistingFile);
  ev->add_option("--corpus", ev_corpus)->required()->check(CLI::ExistingFile);
  ev->add_option("--subset", ev_subsets, "Subset id list (repeatable)")->check(CLI::ExistingFile);
  ev->add_option("--adv", ev_adv, "Adversary JSONL (repeatable)")->check(CLI::ExistingFile);
  ev->add_option("--human-mode", ev_human, "average | slot:K | seeded:S")->capture_default_str();
  ev->add_option("--format", ev_format)->check(CLI::IsMember({"csv", "markdown", "json"}))->capture_default_str();
  ev->add_flag("--no-baselines", ev_no_baselines);
  ev->add_option("--out", ev_out)->required();

  // report
  fs::path rp_in, rp_out;
  std::string rp_format = "markdown";
  auto* rp = app.add_subcommand("report", "Re-render a report CSV");
  rp->add_option("--in", rp_in)->required()->check(CLI::ExistingFile);
  rp->add_option("--format", rp_format)->check(CLI::IsMember({"csv", "markdown", "json"}))->capture_default_str();
  rp->add_option("--out", rp_out)->required();

  // pipeline
  fs::path pl_config;
  std::vector<std::string> pl_set;
  auto* pl = app.add_subcommand("pipeline", "Run vocab, train, lms, subset and evaluate from a config file");
  pl->add_option("--config", pl_config)->required()->check(CLI::ExistingFile);
  pl->add_option("--set", pl_set, "Override a config key (key=value, repeatable)");

  // validate-config is a convenience alongside pipeline.
  fs::path vc_config;
  auto* vc = app.add_subcommand("validate-config", "Print the normalized configuration");
  vc->add_option("--config", vc_config)->required()->check(CLI::ExistingFile);

  auto fail = [&](const std::string& msg, ExitCode code) {
    nlohmann::json j;
    j["error"] = msg;
    j["exit_code"] = static_cast<int>(code);
    err << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    return static_cast<int>(code);
  };

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    return fail(e.what(), ExitCode::kUsage);
  }

  try {
    if (*ingest) {
      nlohmann::json all = nlohmann::json::array();
      for (const fs::path& p : ic_corpus) {
        const IngestStats s = for_each_example(p, strict, [](const NliExample&) {});
        all.push_back({{"path", p.string()},
                       {"lines", s.lines},
                       {"admitted", s.admitted},
                       {"determined", s.determined},
                       {"skipped_malformed", s.skipped_malformed},
                       {"missing_parse", s.missing_parse}});
      }
      out << all.dump(2) << '\n';
    } else if (*bv) {
      bv_opts.features.lowercase = !bv_no_lower;
      if (bv_opts.min_count < 1) throw UsageError("--min-count must be >= 1");
      cli::do_build_vocab(ctx, bv_train, bv_opts, strict, bv_out);
    } else if (*tb) {
      tb_cfg.bias_enabled = !tb_no_bias;
      tb_cfg.validate();
      const Vocabulary vocab = Vocabulary::load(tb_vocab);
      cli::do_train(ctx, tb_train, tb_vocab, vocab, tb_cfg, strict, tb_out);
    } else if (*sl) {
      cli::do_score(ctx, sl_model, sl_vocab, sl_corpus, strict, sl_out, sl_hist);
    } else if (*ss) {
      check_lambda(ss_lambda);
      cli::do_subset(ctx, ss_lms, read_lms(ss_lms), ss_lambda, ss_out, ss_source, ss_format);
    } else if (*ga) {
      const Rule rule = *parse_rule(ga_rule);
      std::vector<DepTree> trees;
      AmodMap amod;
      for (const fs::path& p : ga_conllu) {
        std::vector<ConlluRejection> rej;
        auto t = load_conllu(p, &rej);
        for (const auto& r : rej) err << p.string() << ": sentence " << r.ordinal << " rejected: " << r.reason << '\n';
        for (auto& tree : t) trees.push_back(std::move(tree));
      }
      if (rule == Rule::kAddAmod) amod = ga_amod ? AmodMap::load(*ga_amod) : mine_amod_map(trees);
      const auto index = index_premise_trees(std::move(trees));
      GenerationOptions opts;
      opts.rule = rule;
      opts.limit = ga_limit;
      opts.threads = ga_threads;
      AtomicWriter w(ga_out);
      const GenerationReport report =
          emit_adversary_set(file_source({ga_corpus}, strict), index, &amod, opts, [&](const AdversarialPair& p) {
            w.stream() << adversarial_to_json(p).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)
                       << '\n';
          });
      w.commit();
      const fs::path report_path = ga_report.value_or(fs::path(ga_out.string() + ".report.json"));
      write_file_atomic(report_path, report.to_json().dump(2) + "\n");
      RunManifest m = ctx.manifest();
      cli::set_config(m, {{"rule", ga_rule}, {"limit", std::to_string(ga_limit)}});
      m.add_input("corpus", ga_corpus);
      m.add_inputs("conllu", ga_conllu);
      if (ga_amod) m.add_input("amod_map", *ga_amod);
      m.add_output("adversaries", ga_out);
      m.add_output("report", report_path);
      m.write_beside(ga_out);
      err << rule_name(rule) << ": emitted " << report.emitted << " of " << report.considered << '\n';
    } else if (*ma) {
      AmodMap amod;
      for (const fs::path& p : ma_conllu) {
        ConlluReader reader(p);
        DepTree t;
        while (reader.next(t)) amod.add_tree(t);
      }
      amod.save(ma_out);
      RunManifest m = ctx.manifest();
      m.add_inputs("conllu", ma_conllu);
      m.add_output("amod_map", ma_out);
      m.write_beside(ma_out);
    } else if (*sh) {
      AtomicWriter w(sh_out);
      std::size_t n = 0;
      std::size_t skipped = 0;
      for_each_example(sh_corpus, strict, [&](const NliExample& ex) {
        if (!ex.gold) {
          ++skipped;
          return;
        }
        w.stream() << shuffled_to_json(shuffle_words(ex, sh_seed))
                          .dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)
                   << '\n';
        ++n;
      });
      w.commit();
      RunManifest m = ctx.manifest();
      m.seeds["shuffle"] = sh_seed;
      m.add_input("corpus", sh_corpus);
      m.add_output("shuffled", sh_out);
      m.write_beside(sh_out);
      err << "shuffled " << n << " examples, skipped " << skipped << " undetermined\n";
    } else if (*ev) {
      cli::do_evaluate(ctx, ev_preds, ev_corpus, ev_subsets, ev_adv, {}, parse_human_mode(ev_human), strict,
                       !ev_no_baselines, ev_out, *parse_report_format(ev_format));
    } else if (*rp) {
      write_report(load_report_csv(rp_in), *parse_report_format(rp_format), rp_out);
    } else if (*pl) {
      cli::do_pipeline(ctx, pl_config, pl_set);
    } else if (*vc) {
      out << normalized_config_text(validate_config(vc_config));
    }
  } catch (const Error& e) {
    return fail(e.what(), e.code());
  } catch (const std::exception& e) {
    return fail(e.what(), ExitCode::kRuntime);
  }
  return 0;
}

inline int run_cli(int argc, char** argv) {
  return run_cli(std::vector<std::string>(argv, argv + argc));
}

}  // namespace compsense
