#include "nuer/fitb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "nuer/errors.hpp"
#include "nuer/kernels.hpp"
#include "nuer/nn.hpp"

namespace nuer {

FitbMode fitb_mode_from_name(const std::string& name) {
  if (name == "baseline") return FitbMode::kBaseline;
  if (name == "entity") return FitbMode::kEntity;
  throw std::invalid_argument("unknown fitb mode: " + name);
}

const std::string& fitb_mode_name(FitbMode mode) {
  static const std::string baseline = "baseline", entity = "entity";
  return mode == FitbMode::kBaseline ? baseline : entity;
}

int NumeralVocab::index_of(const std::string& token) const {
  if (!numeral_value(token)) return -1;
  const auto it = std::lower_bound(
      tokens.begin(), tokens.end(), token, [](const std::string& a, const std::string& b) {
        const double va = *numeral_value(a);
        const double vb = *numeral_value(b);
        return va != vb ? va < vb : a < b;
      });
  if (it != tokens.end() && *it == token) return static_cast<int>(it - tokens.begin());
  return -1;
}

NumeralVocab build_numeral_vocab(const Corpus& corpus) {
  std::vector<std::string> distinct;
  for (const Sentence& s : corpus.sentences) {
    for (const std::string& t : s.tokens) {
      if (numeral_value(t)) distinct.push_back(t);
    }
  }
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.empty()) throw std::invalid_argument("corpus contains no numerals");

  std::stable_sort(distinct.begin(), distinct.end(), [](const std::string& a, const std::string& b) {
    const double va = *numeral_value(a);
    const double vb = *numeral_value(b);
    return va != vb ? va < vb : a < b;
  });
  NumeralVocab nv;
  nv.tokens = std::move(distinct);
  for (const std::string& t : nv.tokens) nv.values.push_back(*numeral_value(t));
  return nv;
}

namespace {

struct FitbExample {
  EncodedSequence enc;
  int mask_pos = -1;    // encoded position of [MASK]
  int entity_row = -1;  // row into the entity projection (entity mode)
  int answer = -1;      // index into the numeral vocabulary
};

FitbExample prepare_example(const Sentence& s, const Vocabulary& vocab,
                            const NumeralVocab& numerals, int t_len, FitbMode mode) {
  if (!s.mask_index || !s.mask_entity || !s.mask_answer)
    throw std::invalid_argument("sentence \"" + s.id + "\" lacks mask fields");
  if (*s.mask_entity == EntityLabel::OTHER)
    throw std::invalid_argument("sentence \"" + s.id + "\": mask entity must not be O");
  FitbExample ex;
  EncodeOptions opts;
  opts.apply_mask = true;
  if (mode == FitbMode::kEntity) opts.entity_marker = *s.mask_entity;
  ex.enc = encode(s, vocab, t_len, opts);
  for (int i = 0; i < ex.enc.length(); ++i) {
    if (ex.enc.alignment[static_cast<size_t>(i)] == *s.mask_index) ex.mask_pos = i;
  }
  if (ex.mask_pos < 0)
    throw std::invalid_argument("sentence \"" + s.id + "\": mask position lost in encoding");
  ex.entity_row = static_cast<int>(*s.mask_entity) - 1;
  ex.answer = numerals.index_of(*s.mask_answer);
  if (ex.answer < 0)
    throw std::invalid_argument("sentence \"" + s.id + "\": answer numeral \"" + *s.mask_answer +
                                "\" not in the numeral vocabulary");
  return ex;
}

// Head forward: probs over V from the mask-position hidden state (and the
// entity projection row in entity mode). Returns the head input vector.
std::vector<double> head_input(const EncoderModel& model, const std::vector<double>& out,
                               const FitbExample& ex, FitbMode mode) {
  const int d = model.config.d_model;
  std::vector<double> in(out.begin() + static_cast<ptrdiff_t>(ex.mask_pos) * d,
                         out.begin() + static_cast<ptrdiff_t>(ex.mask_pos + 1) * d);
  if (mode == FitbMode::kEntity) {
    const double* row = model.fitb_proj->values.data() + static_cast<size_t>(ex.entity_row) * d;
    in.insert(in.end(), row, row + d);
  }
  return in;
}

std::vector<double> head_probs(const EncoderModel& model, const std::vector<double>& in) {
  const int width = model.fitb_w->shape[0];
  const int v = model.fitb_w->shape[1];
  if (static_cast<int>(in.size()) != width)
    throw std::invalid_argument("fitb head width mismatch");
  std::vector<double> logits(static_cast<size_t>(v));
  kern::linear_forward(logits.data(), in.data(), model.fitb_w->values.data(),
                       model.fitb_b->values.data(), 1, width, v);
  std::vector<double> probs(logits.size());
  kern::softmax_rows(probs.data(), logits.data(), 1, v);
  return probs;
}

}  // namespace

std::vector<double> fitb_forward(const EncoderModel& model, const NumeralVocab& numerals,
                                 const Vocabulary& vocab, const Sentence& example,
                                 FitbMode mode, int max_len) {
  if (!model.fitb_w) throw std::invalid_argument("model has no fitb head");
  const FitbExample ex = prepare_example(example, vocab, numerals, max_len, mode);
  const auto [cls, out] = encode_sequence(model, ex.enc);
  (void)cls;
  return head_probs(model, head_input(model, out, ex, mode));
}

std::vector<double> fitb_head_probs(const EncoderModel& model, const std::vector<double>& hidden,
                                    int entity_row) {
  if (!model.fitb_w) throw std::invalid_argument("model has no fitb head");
  std::vector<double> in = hidden;
  if (entity_row >= 0) {
    const int d = model.config.d_model;
    const double* row = model.fitb_proj->values.data() + static_cast<size_t>(entity_row) * d;
    in.insert(in.end(), row, row + d);
  }
  return head_probs(model, in);
}

namespace {
double top1_accuracy(const EncoderModel& model, const Vocabulary& vocab,
                     const NumeralVocab& numerals, const Corpus& data, FitbMode mode);
}  // namespace

NumeralVocab numeral_vocab_from(const Vocabulary& vocab) {
  Corpus wrapper;
  Sentence s;
  s.id = "v";
  for (int i = 0; i < vocab.size(); ++i) {
    const std::string& tok = vocab.token_of(i);
    if (numeral_value(tok)) s.tokens.push_back(tok);
  }
  s.labels.assign(s.tokens.size(), EntityLabel::OTHER);
  wrapper.sentences.push_back(std::move(s));
  return build_numeral_vocab(wrapper);
}

double fitb_loss_and_grad(const EncoderModel& model, const EncodedSequence& enc, int mask_pos,
                          int entity_row, int answer, double inv_batch, Rng* dropout_rng,
                          EncoderGrads& grads) {
  const int d = model.config.d_model;
  const int t = enc.length();
  const int width = model.fitb_w->shape[0];
  const int v = model.fitb_w->shape[1];
  const FitbMode mode = entity_row >= 0 ? FitbMode::kEntity : FitbMode::kBaseline;

  const EncoderActivations acts = encoder_forward(model, enc, nullptr, dropout_rng);
  const std::vector<double>& out = acts.output();
  FitbExample ex;
  ex.mask_pos = mask_pos;
  ex.entity_row = entity_row;
  const std::vector<double> in = head_input(model, out, ex, mode);

  std::vector<double> logits(static_cast<size_t>(v));
  kern::linear_forward(logits.data(), in.data(), model.fitb_w->values.data(),
                       model.fitb_b->values.data(), 1, width, v);
  std::vector<double> probs(logits.size());
  kern::softmax_rows(probs.data(), logits.data(), 1, v);

  const double loss = -std::log(std::max(probs[static_cast<size_t>(answer)], kProbFloor));

  std::vector<double> d_logits = probs;
  d_logits[static_cast<size_t>(answer)] -= 1.0;
  for (double& g : d_logits) g *= inv_batch;

  std::vector<double> d_in(static_cast<size_t>(width));
  kern::linear_backward(d_in.data(), grads.fitb_w, grads.fitb_b, d_logits.data(), in.data(),
                        model.fitb_w->values.data(), 1, width, v);

  std::vector<double> d_out(static_cast<size_t>(t) * d, 0.0);
  double* d_mask_row = d_out.data() + static_cast<size_t>(mask_pos) * d;
  for (int c = 0; c < d; ++c) d_mask_row[c] = d_in[static_cast<size_t>(c)];
  if (mode == FitbMode::kEntity) {
    double* d_row = grads.fitb_proj + static_cast<size_t>(entity_row) * d;
    for (int c = 0; c < d; ++c) d_row[c] += d_in[static_cast<size_t>(d + c)];
  }
  encoder_backward(model, acts, d_out, grads);
  return loss * inv_batch;
}

TrainLog train_fitb(EncoderModel& model, const Corpus& train, const Corpus& val,
                    const Vocabulary& vocab, const NumeralVocab& numerals,
                    const FitbOptions& opts) {
  if (train.sentences.empty()) throw std::invalid_argument("training corpus is empty");
  attach_fitb_head(model, numerals.size(), opts.mode == FitbMode::kEntity);

  const int t_len = fitted_max_len(train, model.config.max_len, opts.mode == FitbMode::kEntity);
  std::vector<FitbExample> examples;
  examples.reserve(train.sentences.size());
  for (const Sentence& s : train.sentences)
    examples.push_back(prepare_example(s, vocab, numerals, t_len, opts.mode));

  AdamHyper hyper;
  hyper.eta = opts.lr;
  const std::vector<ParamTensor*> params = model.params();
  BatchWorkspace workspace(model, opts.shards);

  TrainLog log;
  EncoderModel best;
  const int n = static_cast<int>(examples.size());
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(opts.seed, 3000 + static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += opts.batch) {
      const int bsz = std::min(opts.batch, n - start);
      const double inv_batch = 1.0 / bsz;
      const double batch_loss = workspace.run(bsz, [&](int bi, EncoderGrads& grads) {
        const int idx = order[static_cast<size_t>(start + bi)];
        Rng dropout_rng(derive_seed(opts.seed,
                                    0x30000000ull + static_cast<uint64_t>(epoch) * 1000003ull +
                                        static_cast<uint64_t>(idx)));
        Rng* rng = model.config.dropout > 0.0 ? &dropout_rng : nullptr;
        const FitbExample& ex = examples[static_cast<size_t>(idx)];
        return fitb_loss_and_grad(model, ex.enc, ex.mask_pos,
                                  opts.mode == FitbMode::kEntity ? ex.entity_row : -1, ex.answer,
                                  inv_batch, rng, grads);
      });
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch));
      epoch_loss += batch_loss;
      ++batches;
      adam_step(params, hyper);
    }

    EpochLog el;
    el.train_loss = epoch_loss / std::max(batches, 1);
    el.val_metric = top1_accuracy(model, vocab, numerals, val, opts.mode);
    log.epochs.push_back(el);
    if (opts.verbose)
      std::printf("epoch %2d  loss %.6f  val top-1 %.2f\n", epoch + 1, el.train_loss,
                  el.val_metric);
    if (log.best_epoch < 0 || el.val_metric > log.best_metric) {
      log.best_epoch = epoch;
      log.best_metric = el.val_metric;
      best = model;
    }
  }
  if (log.best_epoch >= 0) model = best;
  return log;
}

std::vector<int> top_k_indices(const std::vector<double>& probs, int k) {
  std::vector<int> idx(probs.size());
  std::iota(idx.begin(), idx.end(), 0);
  const int take = std::min<int>(k, static_cast<int>(probs.size()));
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return probs[static_cast<size_t>(a)] > probs[static_cast<size_t>(b)];
  });
  idx.resize(static_cast<size_t>(take));
  return idx;
}

FitbMetrics evaluate_fitb(const EncoderModel& model, const Vocabulary& vocab,
                          const NumeralVocab& numerals, const Corpus& data, FitbMode mode,
                          const std::vector<int>& ks) {
  const int t_len = fitted_max_len(data, model.config.max_len, mode == FitbMode::kEntity);
  const int n = static_cast<int>(data.sentences.size());
  const int max_k = *std::max_element(ks.begin(), ks.end());

  std::vector<std::vector<int>> tops(static_cast<size_t>(n));
  std::vector<int> golds(static_cast<size_t>(n));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const Sentence& s = data.sentences[static_cast<size_t>(i)];
    const FitbExample ex = prepare_example(s, vocab, numerals, t_len, mode);
    const auto [cls, out] = encode_sequence(model, ex.enc);
    (void)cls;
    const std::vector<double> probs = head_probs(model, head_input(model, out, ex, mode));
    tops[static_cast<size_t>(i)] = top_k_indices(probs, max_k);
    golds[static_cast<size_t>(i)] = ex.answer;
  }

  FitbMetrics m;
  for (int k : ks) {
    double hits = 0.0;
    double dist_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto& top = tops[static_cast<size_t>(i)];
      const int gold = golds[static_cast<size_t>(i)];
      const double gold_value = numerals.values[static_cast<size_t>(gold)];
      const int kk = std::min<int>(k, static_cast<int>(top.size()));
      double example_dist = 0.0;
      bool hit = false;
      for (int j = 0; j < kk; ++j) {
        const int pred = top[static_cast<size_t>(j)];
        if (pred == gold) hit = true;
        example_dist += std::abs(numerals.values[static_cast<size_t>(pred)] - gold_value);
      }
      if (hit) hits += 1.0;
      dist_sum += example_dist / kk;
    }
    m.top_k[k] = n > 0 ? 100.0 * hits / n : 0.0;
    m.dist[k] = n > 0 ? dist_sum / n : 0.0;
  }
  return m;
}

namespace {
double top1_accuracy(const EncoderModel& model, const Vocabulary& vocab,
                     const NumeralVocab& numerals, const Corpus& data, FitbMode mode) {
  if (data.sentences.empty()) return 0.0;
  return evaluate_fitb(model, vocab, numerals, data, mode, {1}).top_k.at(1);
}
}  // namespace

std::map<std::string, EntityLabel> majority_entity_by_numeral(const Corpus& corpus) {
  std::map<std::string, std::array<long, kNumLabels>> counts;
  for (const Sentence& s : corpus.sentences) {
    for (size_t i = 0; i < s.tokens.size(); ++i) {
      if (s.labels[i] == EntityLabel::OTHER) continue;
      auto& c = counts[s.tokens[i]];
      c[static_cast<size_t>(s.labels[i])] += 1;
    }
  }
  std::map<std::string, EntityLabel> out;
  for (const auto& [token, c] : counts) {
    int best = 1;
    for (int k = 2; k < kNumLabels; ++k)
      if (c[static_cast<size_t>(k)] > c[static_cast<size_t>(best)]) best = k;
    out[token] = static_cast<EntityLabel>(best);
  }
  return out;
}

QualitativeStats dump_qualitative(const EncoderModel& baseline_model,
                                  const EncoderModel& entity_model, const Vocabulary& vocab,
                                  const NumeralVocab& numerals, const Corpus& examples,
                                  const std::map<std::string, EntityLabel>& numeral_entity,
                                  int k, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  out << "nuer-fitb-dump-v1\n";

  long base_match = 0, base_total = 0, ent_match = 0, ent_total = 0;
  auto consistency = [&](const std::vector<int>& top, EntityLabel gold_entity, long& match,
                         long& total) {
    for (int idx : top) {
      const std::string& tok = numerals.tokens[static_cast<size_t>(idx)];
      const auto it = numeral_entity.find(tok);
      total += 1;
      if (it != numeral_entity.end() && it->second == gold_entity) match += 1;
    }
  };

  for (const Sentence& s : examples.sentences) {
    const std::vector<double> bp =
        fitb_forward(baseline_model, numerals, vocab, s,
                     FitbMode::kBaseline, baseline_model.config.max_len);
    const std::vector<double> ep = fitb_forward(entity_model, numerals, vocab, s,
                                                FitbMode::kEntity, entity_model.config.max_len);
    const std::vector<int> bt = top_k_indices(bp, k);
    const std::vector<int> et = top_k_indices(ep, k);
    consistency(bt, *s.mask_entity, base_match, base_total);
    consistency(et, *s.mask_entity, ent_match, ent_total);

    out << "sentence:";
    for (size_t i = 0; i < s.tokens.size(); ++i)
      out << " " << (static_cast<int>(i) == *s.mask_index ? "____" : s.tokens[i]);
    out << "\n";
    out << "entity: " << label_name(*s.mask_entity) << "   gold: " << *s.mask_answer << "\n";
    out << "baseline:";
    for (int idx : bt) out << " " << numerals.tokens[static_cast<size_t>(idx)];
    out << "\n";
    out << "entity-conditioned:";
    for (int idx : et) out << " " << numerals.tokens[static_cast<size_t>(idx)];
    out << "\n\n";
  }

  QualitativeStats stats;
  stats.baseline_consistency = base_total > 0 ? static_cast<double>(base_match) / base_total : 0.0;
  stats.entity_consistency = ent_total > 0 ? static_cast<double>(ent_match) / ent_total : 0.0;
  out << "entity-consistency baseline: " << stats.baseline_consistency
      << "  entity-conditioned: " << stats.entity_consistency << "\n";
  if (!out) throw IoError("write failed: " + path);
  return stats;
}

std::string fitb_report_json(const FitbMetrics& metrics, FitbMode mode, uint64_t seed) {
  nlohmann::ordered_json j;
  j["format"] = "nuer-report-v1";
  j["kind"] = "fitb";
  j["mode"] = fitb_mode_name(mode);
  j["seed"] = seed;
  nlohmann::ordered_json tk, dk;
  for (const auto& [k, v] : metrics.top_k) tk[std::to_string(k)] = v;
  for (const auto& [k, v] : metrics.dist) dk[std::to_string(k)] = v;
  j["top_k"] = tk;
  j["dist"] = dk;
  return j.dump(2);
}

}  // namespace nuer
