#include "nuer/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nuer/annotate.hpp"
#include "nuer/corpus.hpp"
#include "nuer/encoder.hpp"
#include "nuer/errors.hpp"
#include "nuer/fitb.hpp"
#include "nuer/gradcheck.hpp"
#include "nuer/nn.hpp"
#include "nuer/qa.hpp"
#include "nuer/report.hpp"
#include "nuer/sha256.hpp"
#include "nuer/tagger.hpp"
#include "nuer/tokenizer.hpp"

namespace nuer::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

// Every command records its resolved configuration and input hashes next to
// its primary output, so reported numbers stay reproducible.
void write_manifest(const std::string& out_path, const std::string& command,
                    const ordered_json& config, const std::vector<std::string>& inputs) {
  ordered_json m;
  m["format"] = "nuer-manifest-v1";
  m["command"] = command;
  m["config"] = config;
  ordered_json in = ordered_json::object();
  for (const std::string& p : inputs) in[p] = sha256_file(p);
  m["inputs"] = in;
  std::ofstream out(out_path + ".manifest.json", std::ios::binary);
  if (!out) throw IoError("cannot write file: " + out_path + ".manifest.json");
  out << m.dump(2) << "\n";
}

ordered_json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  try {
    ordered_json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path + ": invalid JSON: " + e.what());
  }
}

GenConfig parse_gen_config(const ordered_json& j) {
  static const std::vector<std::string> known = {
      "n_sentences",  "entity_mix", "seed",        "templates_per_entity",
      "with_questions", "with_masks", "distractors", "value_ranges"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw SchemaError("generator config: unknown field \"" + key + "\"");
  }
  GenConfig cfg;
  cfg.entity_mix = default_entity_mix();
  cfg.n_sentences = j.at("n_sentences").get<int>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
  if (j.contains("templates_per_entity"))
    cfg.templates_per_entity = j["templates_per_entity"].get<int>();
  if (j.contains("with_questions")) cfg.with_questions = j["with_questions"].get<bool>();
  if (j.contains("with_masks")) cfg.with_masks = j["with_masks"].get<bool>();
  if (j.contains("distractors")) cfg.distractors = j["distractors"].get<int>();
  if (j.contains("entity_mix")) {
    cfg.entity_mix.clear();
    for (const auto& [name, w] : j["entity_mix"].items())
      cfg.entity_mix[label_from_name(name)] = w.get<double>();
  }
  if (j.contains("value_ranges")) {
    for (const auto& [name, r] : j["value_ranges"].items()) {
      if (!r.is_array() || r.size() != 2)
        throw SchemaError("generator config: value range for " + name + " must be [lo, hi]");
      const ValueRange vr{r[0].get<long>(), r[1].get<long>()};
      switch (label_from_name(name)) {
        case EntityLabel::YEAR: cfg.year_range = vr; break;
        case EntityLabel::AGE: cfg.age_range = vr; break;
        case EntityLabel::PERCENTAGE: cfg.percentage_range = vr; break;
        case EntityLabel::COUNT: cfg.count_range = vr; break;
        case EntityLabel::SIZE: cfg.size_range = vr; break;
        case EntityLabel::DATE: cfg.date_day_range = vr; break;
        case EntityLabel::OTHER:
          throw SchemaError("generator config: no value range for label O");
      }
    }
  }
  return cfg;
}

EncoderConfig parse_encoder_flags(int d_model, int layers, int heads, int ffn, int max_len,
                                  double dropout, uint64_t seed, int vocab_size) {
  EncoderConfig c;
  c.d_model = d_model;
  c.n_layers = layers;
  c.n_heads = heads;
  c.d_ffn = ffn;
  c.max_len = max_len;
  c.dropout = dropout;
  c.seed = seed;
  c.vocab_size = vocab_size;
  return c;
}

Vocabulary load_or_build_vocab(std::string& vocab_path, const Corpus& fallback_corpus,
                               const std::string& ckpt_path) {
  if (!vocab_path.empty()) return Vocabulary::load(vocab_path);
  Vocabulary v = build_vocab(fallback_corpus, 1);
  vocab_path = ckpt_path + ".vocab.json";
  v.save(vocab_path);
  return v;
}

struct CommonTrainFlags {
  std::string train_path, val_path, vocab_path, ckpt_path;
  int epochs = 0;
  double lr = 0.0;
  int batch = 0;
  uint64_t seed = 0;
  int shards = 4;
  int d_model = 64, layers = 2, heads = 4, ffn = 256, max_len = 64;
  double dropout = 0.1;
  bool quiet = false;
};

void add_train_flags(CLI::App* sub, CommonTrainFlags& f, int epochs, double lr, int batch) {
  f.epochs = epochs;
  f.lr = lr;
  f.batch = batch;
  sub->add_option("--train", f.train_path, "training dataset (nuer-v1 jsonl)")->required();
  sub->add_option("--val", f.val_path, "validation dataset")->required();
  sub->add_option("--vocab", f.vocab_path, "vocabulary file (built from train when omitted)");
  sub->add_option("--ckpt", f.ckpt_path, "output checkpoint")->required();
  sub->add_option("--epochs", f.epochs, "training epochs")->capture_default_str();
  sub->add_option("--lr", f.lr, "Adam learning rate")->capture_default_str();
  sub->add_option("--batch", f.batch, "batch size")->capture_default_str();
  sub->add_option("--seed", f.seed, "run seed")->capture_default_str();
  sub->add_option("--shards", f.shards, "gradient accumulation shards")->capture_default_str();
  sub->add_option("--d-model", f.d_model, "model width")->capture_default_str();
  sub->add_option("--layers", f.layers, "encoder layers")->capture_default_str();
  sub->add_option("--heads", f.heads, "attention heads")->capture_default_str();
  sub->add_option("--ffn", f.ffn, "feed-forward width")->capture_default_str();
  sub->add_option("--max-len", f.max_len, "maximum encoded length")->capture_default_str();
  sub->add_option("--dropout", f.dropout, "dropout probability (training only)")
      ->capture_default_str();
  sub->add_flag("--quiet", f.quiet, "suppress per-epoch logs");
}

ordered_json train_flags_json(const CommonTrainFlags& f) {
  ordered_json c;
  c["train"] = f.train_path;
  c["val"] = f.val_path;
  c["vocab"] = f.vocab_path;
  c["epochs"] = f.epochs;
  c["lr"] = f.lr;
  c["batch"] = f.batch;
  c["seed"] = f.seed;
  c["shards"] = f.shards;
  c["d_model"] = f.d_model;
  c["layers"] = f.layers;
  c["heads"] = f.heads;
  c["ffn"] = f.ffn;
  c["max_len"] = f.max_len;
  c["dropout"] = f.dropout;
  return c;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"number entity recognition toolkit"};
  app.require_subcommand(1);

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "generate a synthetic labeled corpus");
  std::string gen_config_path, gen_out = "corpus.jsonl";
  uint64_t gen_seed = 0;
  gen->add_option("--config", gen_config_path, "generator config JSON")->required();
  gen->add_option("--out", gen_out, "output dataset path (or directory)");
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "override the config seed");
  bool gen_no_vocab = false;
  gen->add_flag("--no-vocab", gen_no_vocab, "skip writing the vocabulary next to the corpus");

  // ---- split ----
  auto* split = app.add_subcommand("split", "shuffled train/val/test partition");
  std::string split_data, split_out_dir = ".";
  std::vector<double> split_ratios = {0.75, 0.10, 0.15};
  uint64_t split_seed = 0;
  split->add_option("--data", split_data, "input dataset")->required();
  split->add_option("--out-dir", split_out_dir, "output directory");
  split->add_option("--ratios", split_ratios, "train val test ratios")->expected(3);
  split->add_option("--seed", split_seed, "shuffle seed");

  // ---- train-tagger ----
  auto* tt = app.add_subcommand("train-tagger", "train the number-entity tagger");
  CommonTrainFlags ttf;
  add_train_flags(tt, ttf, 20, 2e-5, 32);

  // ---- eval-tagger ----
  auto* et = app.add_subcommand("eval-tagger", "per-entity precision/recall/F1");
  std::string et_ckpt, et_vocab, et_data, et_report, et_dataset = "test";
  uint64_t et_seed = 0;
  et->add_option("--ckpt", et_ckpt, "checkpoint")->required();
  et->add_option("--vocab", et_vocab, "vocabulary")->required();
  et->add_option("--data", et_data, "evaluation dataset")->required();
  et->add_option("--report", et_report, "output report JSON")->required();
  et->add_option("--dataset", et_dataset, "dataset name recorded in the report");
  et->add_option("--seed", et_seed, "seed recorded in the report");

  // ---- train-qa / eval-qa ----
  auto* tq = app.add_subcommand("train-qa", "train span-prediction question answering");
  CommonTrainFlags tqf;
  std::string tq_mode = "baseline";
  add_train_flags(tq, tqf, 2, 2e-5, 32);
  tq->add_option("--mode", tq_mode, "baseline | jem")->capture_default_str();

  auto* eq = app.add_subcommand("eval-qa", "exact match and token-overlap F1");
  std::string eq_ckpt, eq_vocab, eq_data, eq_report, eq_mode = "baseline", eq_tagger;
  uint64_t eq_seed = 0;
  eq->add_option("--ckpt", eq_ckpt, "checkpoint")->required();
  eq->add_option("--vocab", eq_vocab, "vocabulary")->required();
  eq->add_option("--data", eq_data, "evaluation dataset")->required();
  eq->add_option("--report", eq_report, "output report JSON")->required();
  eq->add_option("--mode", eq_mode, "baseline | jem")->capture_default_str();
  eq->add_option("--tagger-ckpt", eq_tagger,
                 "use this tagger's predicted entities instead of gold labels");
  eq->add_option("--seed", eq_seed, "seed recorded in the report");

  // ---- train-fitb / eval-fitb ----
  auto* tf = app.add_subcommand("train-fitb", "train masked-numeral prediction");
  CommonTrainFlags tff;
  std::string tf_mode = "baseline";
  add_train_flags(tf, tff, 3, 2e-4, 64);
  tf->add_option("--mode", tf_mode, "baseline | entity")->capture_default_str();

  auto* ef = app.add_subcommand("eval-fitb", "top-k accuracy and numeric distance");
  std::string ef_ckpt, ef_vocab, ef_data, ef_report, ef_mode = "baseline", ef_dump;
  std::string ef_baseline_ckpt, ef_train_data;
  std::vector<int> ef_ks = {1, 2, 5, 10};
  int ef_dump_k = 4, ef_dump_n = 8;
  uint64_t ef_seed = 0;
  ef->add_option("--ckpt", ef_ckpt, "checkpoint")->required();
  ef->add_option("--vocab", ef_vocab, "vocabulary")->required();
  ef->add_option("--data", ef_data, "evaluation dataset")->required();
  ef->add_option("--report", ef_report, "output report JSON")->required();
  ef->add_option("--mode", ef_mode, "baseline | entity")->capture_default_str();
  ef->add_option("--ks", ef_ks, "top-k cutoffs")->capture_default_str();
  ef->add_option("--dump", ef_dump, "write a qualitative side-by-side dump here");
  ef->add_option("--baseline-ckpt", ef_baseline_ckpt,
                 "baseline checkpoint for the qualitative dump");
  ef->add_option("--train-data", ef_train_data,
                 "training dataset for the dump's entity-consistency lookup");
  ef->add_option("--dump-k", ef_dump_k, "predictions per mode in the dump")
      ->capture_default_str();
  ef->add_option("--dump-n", ef_dump_n, "examples in the dump")->capture_default_str();
  ef->add_option("--seed", ef_seed, "seed recorded in the report");

  // ---- annotate / audit-sample ----
  auto* an = app.add_subcommand("annotate", "label an unlabeled corpus with a trained tagger");
  std::string an_ckpt, an_vocab, an_data, an_out;
  double an_threshold = 0.5;
  an->add_option("--ckpt", an_ckpt, "checkpoint")->required();
  an->add_option("--vocab", an_vocab, "vocabulary")->required();
  an->add_option("--data", an_data, "input dataset")->required();
  an->add_option("--out", an_out, "annotated output dataset")->required();
  an->add_option("--threshold", an_threshold, "confidence threshold (0 = plain argmax)")
      ->capture_default_str();

  auto* au = app.add_subcommand("audit-sample", "magnitude-preserving audit subset");
  std::string au_data, au_out;
  int au_n = 0;
  uint64_t au_seed = 0;
  au->add_option("--data", au_data, "input dataset")->required();
  au->add_option("--out", au_out, "output dataset")->required();
  au->add_option("--n", au_n, "subset size")->required();
  au->add_option("--seed", au_seed, "sampling seed");

  // ---- report ----
  auto* rp = app.add_subcommand("report", "merge per-seed metrics into tables");
  std::vector<std::string> rp_files;
  std::string rp_out, rp_text;
  rp->add_option("files", rp_files, "metric report files and qualitative dumps")->required();
  rp->add_option("--out", rp_out, "consolidated JSON output");
  rp->add_option("--text", rp_text, "rendered text output (also printed)");

  // ---- grad-check ----
  auto* gc = app.add_subcommand("grad-check", "finite-difference gradient verification");
  std::string gc_config;
  double gc_threshold = 1e-3;
  gc->add_option("--config", gc_config, "encoder config JSON (small defaults when omitted)");
  gc->add_option("--threshold", gc_threshold, "maximum relative error")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help
    }
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) {
      GenConfig cfg = parse_gen_config(load_json_file(gen_config_path));
      if (gen_seed_opt->count() > 0) cfg.seed = gen_seed;
      const Corpus corpus = generate_corpus(cfg);
      std::string out_path = gen_out;
      if (out_path.empty() || out_path.back() == '/' ||
          (fs::exists(out_path) && fs::is_directory(out_path))) {
        fs::create_directories(out_path.empty() ? "." : out_path);
        out_path = (fs::path(out_path) / "corpus.jsonl").string();
      }
      save_dataset(corpus, out_path);
      if (!gen_no_vocab) {
        const Vocabulary vocab = build_vocab(corpus, 1);
        vocab.save(fs::path(out_path).replace_extension(".vocab.json").string());
      }
      ordered_json c;
      c["config"] = gen_config_path;
      c["seed"] = cfg.seed;
      c["n_sentences"] = cfg.n_sentences;
      write_manifest(out_path, "gen", c, {gen_config_path});
      std::cout << "wrote " << corpus.sentences.size() << " sentences to " << out_path << "\n";
    } else if (split->parsed()) {
      const Corpus corpus = load_dataset(split_data);
      const auto [train, val, test] = split_corpus(
          corpus, {split_ratios[0], split_ratios[1], split_ratios[2]}, split_seed);
      fs::create_directories(split_out_dir);
      const std::string train_path = (fs::path(split_out_dir) / "train.jsonl").string();
      save_dataset(train, train_path);
      save_dataset(val, (fs::path(split_out_dir) / "val.jsonl").string());
      save_dataset(test, (fs::path(split_out_dir) / "test.jsonl").string());
      ordered_json c;
      c["data"] = split_data;
      c["ratios"] = split_ratios;
      c["seed"] = split_seed;
      write_manifest(train_path, "split", c, {split_data});
      std::cout << "split " << corpus.sentences.size() << " -> " << train.sentences.size() << "/"
                << val.sentences.size() << "/" << test.sentences.size() << "\n";
    } else if (tt->parsed()) {
      const Corpus train = load_dataset(ttf.train_path);
      const Corpus val = load_dataset(ttf.val_path);
      const Vocabulary vocab = load_or_build_vocab(ttf.vocab_path, train, ttf.ckpt_path);
      EncoderModel model = init_model(parse_encoder_flags(
          ttf.d_model, ttf.layers, ttf.heads, ttf.ffn, ttf.max_len, ttf.dropout, ttf.seed,
          vocab.size()));
      model.vocab_hash = vocab.content_hash();
      TrainOptions opts;
      opts.epochs = ttf.epochs;
      opts.lr = ttf.lr;
      opts.batch = ttf.batch;
      opts.seed = ttf.seed;
      opts.shards = ttf.shards;
      opts.verbose = !ttf.quiet;
      const TrainLog log = train_tagger(model, train, val, vocab, opts);
      save_checkpoint(model, ttf.ckpt_path);
      write_manifest(ttf.ckpt_path, "train-tagger", train_flags_json(ttf),
                     {ttf.train_path, ttf.val_path, ttf.vocab_path});
      std::cout << "best epoch " << log.best_epoch + 1 << "  val micro-F1 " << log.best_metric
                << "\n";
    } else if (et->parsed()) {
      const EncoderModel model = load_checkpoint(et_ckpt);
      const Vocabulary vocab = Vocabulary::load(et_vocab);
      if (!model.vocab_hash.empty() && model.vocab_hash != vocab.content_hash())
        throw SchemaError("vocabulary hash mismatch between checkpoint and vocabulary file");
      const Corpus data = load_dataset(et_data);
      const EntityMetrics m = evaluate_tagger(model, vocab, data);
      write_text_file(et_report, tagger_report_json(m, et_dataset, et_seed) + "\n");
      ordered_json c;
      c["ckpt"] = et_ckpt;
      c["data"] = et_data;
      c["dataset"] = et_dataset;
      c["seed"] = et_seed;
      write_manifest(et_report, "eval-tagger", c, {et_ckpt, et_vocab, et_data});
      std::cout << "micro F1 " << m.total.f1 << " (P " << m.total.precision << ", R "
                << m.total.recall << ")\n";
    } else if (tq->parsed()) {
      const Corpus train = load_dataset(tqf.train_path);
      const Corpus val = load_dataset(tqf.val_path);
      const Vocabulary vocab = load_or_build_vocab(tqf.vocab_path, train, tqf.ckpt_path);
      EncoderModel model = init_model(parse_encoder_flags(
          tqf.d_model, tqf.layers, tqf.heads, tqf.ffn, tqf.max_len, tqf.dropout, tqf.seed,
          vocab.size()));
      model.vocab_hash = vocab.content_hash();
      QaOptions opts;
      opts.epochs = tqf.epochs;
      opts.lr = tqf.lr;
      opts.batch = tqf.batch;
      opts.seed = tqf.seed;
      opts.shards = tqf.shards;
      opts.verbose = !tqf.quiet;
      opts.mode = qa_mode_from_name(tq_mode);
      const TrainLog log = train_qa(model, train, val, vocab, opts);
      save_checkpoint(model, tqf.ckpt_path);
      ordered_json c = train_flags_json(tqf);
      c["mode"] = tq_mode;
      write_manifest(tqf.ckpt_path, "train-qa", c, {tqf.train_path, tqf.val_path, tqf.vocab_path});
      std::cout << "best epoch " << log.best_epoch + 1 << "  val EM " << log.best_metric << "\n";
    } else if (eq->parsed()) {
      const EncoderModel model = load_checkpoint(eq_ckpt);
      const Vocabulary vocab = Vocabulary::load(eq_vocab);
      const Corpus data = load_dataset(eq_data);
      const QaMode mode = qa_mode_from_name(eq_mode);
      EncoderModel tagger_model;
      const EncoderModel* tagger_ptr = nullptr;
      if (!eq_tagger.empty()) {
        tagger_model = load_checkpoint(eq_tagger);
        tagger_ptr = &tagger_model;
      }
      const QaMetrics m = evaluate_qa(model, vocab, data, mode, tagger_ptr);
      write_text_file(eq_report, qa_report_json(m, mode, eq_seed) + "\n");
      ordered_json c;
      c["ckpt"] = eq_ckpt;
      c["data"] = eq_data;
      c["mode"] = eq_mode;
      c["seed"] = eq_seed;
      write_manifest(eq_report, "eval-qa", c, {eq_ckpt, eq_vocab, eq_data});
      std::cout << "EM " << m.exact_match << "  F1 " << m.f1 << "\n";
    } else if (tf->parsed()) {
      const Corpus train = load_dataset(tff.train_path);
      const Corpus val = load_dataset(tff.val_path);
      const Vocabulary vocab = load_or_build_vocab(tff.vocab_path, train, tff.ckpt_path);
      const NumeralVocab numerals = numeral_vocab_from(vocab);
      EncoderModel model = init_model(parse_encoder_flags(
          tff.d_model, tff.layers, tff.heads, tff.ffn, tff.max_len, tff.dropout, tff.seed,
          vocab.size()));
      model.vocab_hash = vocab.content_hash();
      FitbOptions opts;
      opts.epochs = tff.epochs;
      opts.lr = tff.lr;
      opts.batch = tff.batch;
      opts.seed = tff.seed;
      opts.shards = tff.shards;
      opts.verbose = !tff.quiet;
      opts.mode = fitb_mode_from_name(tf_mode);
      const TrainLog log = train_fitb(model, train, val, vocab, numerals, opts);
      save_checkpoint(model, tff.ckpt_path);
      ordered_json c = train_flags_json(tff);
      c["mode"] = tf_mode;
      write_manifest(tff.ckpt_path, "train-fitb", c,
                     {tff.train_path, tff.val_path, tff.vocab_path});
      std::cout << "best epoch " << log.best_epoch + 1 << "  val top-1 " << log.best_metric
                << "\n";
    } else if (ef->parsed()) {
      const EncoderModel model = load_checkpoint(ef_ckpt);
      const Vocabulary vocab = Vocabulary::load(ef_vocab);
      const NumeralVocab numerals = numeral_vocab_from(vocab);
      const Corpus data = load_dataset(ef_data);
      const FitbMode mode = fitb_mode_from_name(ef_mode);
      const FitbMetrics m = evaluate_fitb(model, vocab, numerals, data, mode, ef_ks);
      write_text_file(ef_report, fitb_report_json(m, mode, ef_seed) + "\n");
      std::vector<std::string> inputs = {ef_ckpt, ef_vocab, ef_data};
      if (!ef_dump.empty()) {
        if (ef_baseline_ckpt.empty() || ef_train_data.empty())
          throw std::invalid_argument("--dump requires --baseline-ckpt and --train-data");
        if (mode != FitbMode::kEntity)
          throw std::invalid_argument("--dump expects --mode entity (with --baseline-ckpt)");
        const EncoderModel baseline = load_checkpoint(ef_baseline_ckpt);
        const Corpus train = load_dataset(ef_train_data);
        Corpus sample;
        sample.provenance = data.provenance;
        const int take = std::min<int>(ef_dump_n, static_cast<int>(data.sentences.size()));
        sample.sentences.assign(data.sentences.begin(), data.sentences.begin() + take);
        const QualitativeStats qs =
            dump_qualitative(baseline, model, vocab, numerals, sample,
                             majority_entity_by_numeral(train), ef_dump_k, ef_dump);
        std::cout << "entity-consistency baseline " << qs.baseline_consistency << "  entity "
                  << qs.entity_consistency << "\n";
        inputs.push_back(ef_baseline_ckpt);
        inputs.push_back(ef_train_data);
      }
      ordered_json c;
      c["ckpt"] = ef_ckpt;
      c["data"] = ef_data;
      c["mode"] = ef_mode;
      c["ks"] = ef_ks;
      c["seed"] = ef_seed;
      write_manifest(ef_report, "eval-fitb", c, inputs);
      std::cout << "top-1 " << m.top_k.begin()->second << "  dist(1) " << m.dist.begin()->second
                << "\n";
    } else if (an->parsed()) {
      const EncoderModel model = load_checkpoint(an_ckpt);
      const Vocabulary vocab = Vocabulary::load(an_vocab);
      const Corpus raw = load_dataset(an_data);
      const Corpus annotated = annotate_corpus(model, vocab, raw, an_threshold);
      save_dataset(annotated, an_out);
      ordered_json c;
      c["ckpt"] = an_ckpt;
      c["data"] = an_data;
      c["threshold"] = an_threshold;
      write_manifest(an_out, "annotate", c, {an_ckpt, an_vocab, an_data});
      std::cout << "annotated " << annotated.sentences.size() << " sentences\n";
    } else if (au->parsed()) {
      const Corpus data = load_dataset(au_data);
      const Corpus subset = make_audit_subset(data, au_n, au_seed);
      save_dataset(subset, au_out);
      ordered_json c;
      c["data"] = au_data;
      c["n"] = au_n;
      c["seed"] = au_seed;
      write_manifest(au_out, "audit-sample", c, {au_data});
      std::cout << "sampled " << subset.sentences.size() << " sentences\n";
    } else if (rp->parsed()) {
      const Consolidated merged = consolidate_reports(rp_files);
      if (!rp_out.empty()) {
        write_text_file(rp_out, merged.json + "\n");
        write_manifest(rp_out, "report", ordered_json{{"files", rp_files}}, rp_files);
      }
      if (!rp_text.empty()) write_text_file(rp_text, merged.text);
      std::cout << merged.text;
    } else if (gc->parsed()) {
      EncoderConfig cfg;
      cfg.d_model = 16;
      cfg.n_layers = 2;
      cfg.n_heads = 2;
      cfg.d_ffn = 32;
      cfg.max_len = 12;
      cfg.vocab_size = 32;
      cfg.dropout = 0.0;
      if (!gc_config.empty()) {
        const ordered_json j = load_json_file(gc_config);
        if (j.contains("d_model")) cfg.d_model = j["d_model"].get<int>();
        if (j.contains("n_layers")) cfg.n_layers = j["n_layers"].get<int>();
        if (j.contains("n_heads")) cfg.n_heads = j["n_heads"].get<int>();
        if (j.contains("d_ffn")) cfg.d_ffn = j["d_ffn"].get<int>();
        if (j.contains("max_len")) cfg.max_len = j["max_len"].get<int>();
        if (j.contains("vocab_size")) cfg.vocab_size = j["vocab_size"].get<int>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
      }
      const double worst = run_full_grad_check(cfg, true);
      std::cout << "max relative error " << worst << " (threshold " << gc_threshold << ")\n";
      if (!(worst < gc_threshold)) {
        std::cerr << "error: invalid: gradient check failed\n";
        return 5;
      }
    }
    return 0;
  } catch (const IoError& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return 3;
  } catch (const SchemaError& e) {
    std::cerr << "error: schema: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: invalid: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace nuer::cli
