#include "nuer/qa.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "nuer/kernels.hpp"
#include "nuer/nn.hpp"

namespace nuer {

QaMode qa_mode_from_name(const std::string& name) {
  if (name == "baseline") return QaMode::kBaseline;
  if (name == "jem") return QaMode::kJem;
  throw std::invalid_argument("unknown qa mode: " + name);
}

const std::string& qa_mode_name(QaMode mode) {
  static const std::string baseline = "baseline", jem = "jem";
  return mode == QaMode::kBaseline ? baseline : jem;
}

namespace {

// Start/end logits for every encoded position; context positions are the
// aligned sentence tokens, everything else is pushed to -1e9 before softmax.
void span_logits(const EncoderModel& model, const std::vector<double>& out,
                 const EncodedSequence& enc, std::vector<double>& start,
                 std::vector<double>& end) {
  const int t = enc.length();
  const int d = model.config.d_model;
  start.resize(static_cast<size_t>(t));
  end.resize(static_cast<size_t>(t));
  kern::linear_forward(start.data(), out.data(), model.qa_start_w->values.data(), nullptr, t, d, 1);
  kern::linear_forward(end.data(), out.data(), model.qa_end_w->values.data(), nullptr, t, d, 1);
  for (int i = 0; i < t; ++i) {
    if (enc.alignment[static_cast<size_t>(i)] < 0) {
      start[static_cast<size_t>(i)] = -1e9;
      end[static_cast<size_t>(i)] = -1e9;
    }
  }
}

bool has_context(const EncodedSequence& enc) {
  for (int a : enc.alignment)
    if (a >= 0) return true;
  return false;
}

}  // namespace

QaDistributions qa_forward(const EncoderModel& model, const EncodedSequence& encoded,
                           const int* entity_codes) {
  if (!model.qa_start_w) throw std::invalid_argument("model has no span heads");
  if (!has_context(encoded)) throw std::invalid_argument("encoded sequence has no context segment");
  const auto [cls, out] = encode_sequence(model, encoded, entity_codes);
  (void)cls;
  QaDistributions dist;
  std::vector<double> sl, el;
  span_logits(model, out, encoded, sl, el);
  dist.start.resize(sl.size());
  dist.end.resize(el.size());
  kern::softmax_rows(dist.start.data(), sl.data(), 1, static_cast<int>(sl.size()));
  kern::softmax_rows(dist.end.data(), el.data(), 1, static_cast<int>(el.size()));
  return dist;
}

std::pair<int, int> select_span(const std::vector<double>& start_probs,
                                const std::vector<double>& end_probs, int max_span_len) {
  if (start_probs.size() != end_probs.size() || start_probs.empty())
    throw std::invalid_argument("select_span: distribution sizes mismatch");
  if (max_span_len < 1) throw std::invalid_argument("max_span_len must be positive");
  const int t = static_cast<int>(start_probs.size());
  int best_i = 0, best_j = 0;
  double best = -1.0;
  for (int i = 0; i < t; ++i) {
    for (int j = i; j < std::min(t, i + max_span_len); ++j) {
      const double score = start_probs[static_cast<size_t>(i)] * end_probs[static_cast<size_t>(j)];
      if (score > best) {
        best = score;
        best_i = i;
        best_j = j;
      }
    }
  }
  return {best_i, best_j};
}

namespace {

struct QaExample {
  EncodedSequence enc;
  std::vector<int> entity_codes;  // empty in baseline mode
  int gold_start = -1;            // encoded coordinates
  int gold_end = -1;
};

QaExample prepare_example(const Sentence& s, const Vocabulary& vocab, int t_len, QaMode mode) {
  if (!s.question || !s.answer_span)
    throw std::invalid_argument("sentence \"" + s.id + "\" lacks question or answer span");
  QaExample ex;
  ex.enc = encode(s, vocab, t_len);
  if (mode == QaMode::kJem) ex.entity_codes = entity_codes_for(s, ex.enc);
  for (int i = 0; i < ex.enc.length(); ++i) {
    const int src = ex.enc.alignment[static_cast<size_t>(i)];
    if (src == s.answer_span->start) ex.gold_start = i;
    if (src == s.answer_span->end) ex.gold_end = i;
  }
  if (ex.gold_start < 0 || ex.gold_end < 0)
    throw std::invalid_argument("sentence \"" + s.id + "\": answer span not present after encoding");
  return ex;
}

}  // namespace

double qa_loss_and_grad(const EncoderModel& model, const EncodedSequence& enc,
                        const int* entity_codes, int gold_start, int gold_end, double inv_batch,
                        Rng* dropout_rng, EncoderGrads& grads) {
  const int t = enc.length();
  const int d = model.config.d_model;
  const EncoderActivations acts = encoder_forward(model, enc, entity_codes, dropout_rng);
  const std::vector<double>& out = acts.output();

  std::vector<double> sl, el;
  span_logits(model, out, enc, sl, el);
  std::vector<double> sp(sl.size()), ep(el.size());
  kern::softmax_rows(sp.data(), sl.data(), 1, t);
  kern::softmax_rows(ep.data(), el.data(), 1, t);

  const double loss = 0.5 * (-std::log(std::max(sp[static_cast<size_t>(gold_start)], kProbFloor)) -
                             std::log(std::max(ep[static_cast<size_t>(gold_end)], kProbFloor)));

  // d(loss)/d(logit) = 0.5 * (p - y) per head, scaled for the batch mean.
  std::vector<double> dsl(sp), del(ep);
  dsl[static_cast<size_t>(gold_start)] -= 1.0;
  del[static_cast<size_t>(gold_end)] -= 1.0;
  for (int i = 0; i < t; ++i) {
    dsl[static_cast<size_t>(i)] *= 0.5 * inv_batch;
    del[static_cast<size_t>(i)] *= 0.5 * inv_batch;
  }

  std::vector<double> d_out(static_cast<size_t>(t) * d), d_tmp(static_cast<size_t>(t) * d);
  kern::linear_backward(d_out.data(), grads.qa_start_w, nullptr, dsl.data(), out.data(),
                        model.qa_start_w->values.data(), t, d, 1);
  kern::linear_backward(d_tmp.data(), grads.qa_end_w, nullptr, del.data(), out.data(),
                        model.qa_end_w->values.data(), t, d, 1);
  kern::add_inplace(d_out.data(), d_tmp.data(), d_out.size());
  encoder_backward(model, acts, d_out, grads);
  return loss * inv_batch;
}

TrainLog train_qa(EncoderModel& model, const Corpus& train, const Corpus& val,
                  const Vocabulary& vocab, const QaOptions& opts) {
  if (train.sentences.empty()) throw std::invalid_argument("training corpus is empty");
  attach_qa_heads(model);

  const int t_len = fitted_max_len(train, model.config.max_len);
  std::vector<QaExample> examples;
  examples.reserve(train.sentences.size());
  for (const Sentence& s : train.sentences)
    examples.push_back(prepare_example(s, vocab, t_len, opts.mode));

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
    Rng shuffle_rng(derive_seed(opts.seed, 2000 + static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += opts.batch) {
      const int bsz = std::min(opts.batch, n - start);
      const double inv_batch = 1.0 / bsz;
      const double batch_loss = workspace.run(bsz, [&](int bi, EncoderGrads& grads) {
        const int idx = order[static_cast<size_t>(start + bi)];
        Rng dropout_rng(derive_seed(opts.seed,
                                    0x20000000ull + static_cast<uint64_t>(epoch) * 1000003ull +
                                        static_cast<uint64_t>(idx)));
        Rng* rng = model.config.dropout > 0.0 ? &dropout_rng : nullptr;
        const QaExample& ex = examples[static_cast<size_t>(idx)];
        const int* codes = ex.entity_codes.empty() ? nullptr : ex.entity_codes.data();
        return qa_loss_and_grad(model, ex.enc, codes, ex.gold_start, ex.gold_end, inv_batch, rng,
                                grads);
      });
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch));
      epoch_loss += batch_loss;
      ++batches;
      adam_step(params, hyper);
    }

    const QaMetrics vm = evaluate_qa(model, vocab, val, opts.mode);
    EpochLog el;
    el.train_loss = epoch_loss / std::max(batches, 1);
    el.val_metric = vm.exact_match;
    log.epochs.push_back(el);
    if (opts.verbose)
      std::printf("epoch %2d  loss %.6f  val EM %.2f\n", epoch + 1, el.train_loss, el.val_metric);
    if (log.best_epoch < 0 || el.val_metric > log.best_metric) {
      log.best_epoch = epoch;
      log.best_metric = el.val_metric;
      best = model;
    }
  }
  if (log.best_epoch >= 0) model = best;
  return log;
}

QaMetrics evaluate_qa(const EncoderModel& model, const Vocabulary& vocab, const Corpus& data,
                      QaMode mode, const EncoderModel* entity_tagger) {
  const int t_len = fitted_max_len(data, model.config.max_len);
  const int n = static_cast<int>(data.sentences.size());
  std::vector<double> em(static_cast<size_t>(n), 0.0), f1(static_cast<size_t>(n), 0.0);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const Sentence& s = data.sentences[static_cast<size_t>(i)];
    Sentence input = s;
    if (mode == QaMode::kJem && entity_tagger) {
      input.labels =
          predict_labels(*entity_tagger, vocab, s, fitted_max_len(data, model.config.max_len));
    }
    const QaExample ex = prepare_example(input, vocab, t_len, mode);
    const int* codes = ex.entity_codes.empty() ? nullptr : ex.entity_codes.data();
    const QaDistributions dist = qa_forward(model, ex.enc, codes);
    const auto [pi, pj] = select_span(dist.start, dist.end);

    // Map predicted encoded span back to sentence token indices.
    const int src_i = ex.enc.alignment[static_cast<size_t>(pi)];
    const int src_j = ex.enc.alignment[static_cast<size_t>(pj)];
    const int gold_i = s.answer_span->start;
    const int gold_j = s.answer_span->end;
    if (src_i == gold_i && src_j == gold_j) em[static_cast<size_t>(i)] = 100.0;

    // Token-bag F1 between predicted and gold span tokens.
    std::map<std::string, int> gold_bag;
    for (int k = gold_i; k <= gold_j; ++k) gold_bag[s.tokens[static_cast<size_t>(k)]] += 1;
    int overlap = 0, pred_count = 0;
    if (src_i >= 0 && src_j >= src_i) {
      for (int k = src_i; k <= src_j; ++k) {
        ++pred_count;
        auto it = gold_bag.find(s.tokens[static_cast<size_t>(k)]);
        if (it != gold_bag.end() && it->second > 0) {
          ++overlap;
          it->second -= 1;
        }
      }
    }
    const int gold_count = gold_j - gold_i + 1;
    if (overlap > 0) {
      const double p = static_cast<double>(overlap) / pred_count;
      const double r = static_cast<double>(overlap) / gold_count;
      f1[static_cast<size_t>(i)] = 100.0 * 2.0 * p * r / (p + r);
    }
  }

  QaMetrics m;
  for (int i = 0; i < n; ++i) {
    m.exact_match += em[static_cast<size_t>(i)];
    m.f1 += f1[static_cast<size_t>(i)];
  }
  if (n > 0) {
    m.exact_match /= n;
    m.f1 /= n;
  }
  return m;
}

std::string qa_report_json(const QaMetrics& metrics, QaMode mode, uint64_t seed) {
  nlohmann::ordered_json j;
  j["format"] = "nuer-report-v1";
  j["kind"] = "qa";
  j["mode"] = qa_mode_name(mode);
  j["seed"] = seed;
  j["exact_match"] = metrics.exact_match;
  j["f1"] = metrics.f1;
  return j.dump(2);
}

}  // namespace nuer
