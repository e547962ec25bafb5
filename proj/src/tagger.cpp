#include "nuer/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "nuer/kernels.hpp"
#include "nuer/nn.hpp"

namespace nuer {

double f1_percent(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

int fitted_max_len(const Corpus& corpus, int max_len, bool marker_slot) {
  int need = 4;
  for (const Sentence& s : corpus.sentences) {
    int n = 2 + static_cast<int>(s.tokens.size());  // [CLS] ... [SEP]
    if (s.question) n += static_cast<int>(s.question->size()) + 1;
    if (marker_slot) n += 1;
    need = std::max(need, n);
  }
  return std::min(need, max_len);
}

std::vector<double> tag_logits(const EncoderModel& model, const EncodedSequence& encoded) {
  if (!model.tag_w) throw std::invalid_argument("model has no tag head");
  const auto [cls, out] = encode_sequence(model, encoded);
  (void)cls;
  const int t = encoded.length();
  std::vector<double> logits(static_cast<size_t>(t) * kNumLabels);
  kern::linear_forward(logits.data(), out.data(), model.tag_w->values.data(), nullptr, t,
                       model.config.d_model, kNumLabels);
  return logits;
}

namespace {

int argmax_label(const double* row) {
  int best = 0;
  for (int k = 1; k < kNumLabels; ++k) {
    if (row[k] > row[best]) best = k;  // ties keep the lower class code
  }
  return best;
}

}  // namespace

std::vector<EntityLabel> predict_labels(const EncoderModel& model, const Vocabulary& vocab,
                                        const Sentence& sentence, int max_len, double threshold,
                                        std::vector<double>* confidences) {
  const EncodedSequence enc = encode(sentence, vocab, max_len);
  const std::vector<double> logits = tag_logits(model, enc);

  std::vector<EntityLabel> out(sentence.tokens.size(), EntityLabel::OTHER);
  if (confidences) confidences->assign(sentence.tokens.size(), 0.0);
  for (int pos = 0; pos < enc.length(); ++pos) {
    const int src = enc.alignment[static_cast<size_t>(pos)];
    if (src < 0) continue;
    std::vector<double> row(logits.begin() + static_cast<ptrdiff_t>(pos) * kNumLabels,
                            logits.begin() + static_cast<ptrdiff_t>(pos + 1) * kNumLabels);
    const std::vector<double> probs = softmax(row);

    const std::string& token = sentence.tokens[static_cast<size_t>(src)];
    EntityLabel label = EntityLabel::OTHER;
    // Entity classes apply to numbers only; unknown tokens are OTHER by
    // definition.
    if (numeral_value(token) && enc.token_ids[static_cast<size_t>(pos)] != kUnkId) {
      const int best = argmax_label(probs.data());
      if (probs[static_cast<size_t>(best)] >= threshold) label = static_cast<EntityLabel>(best);
    }
    out[static_cast<size_t>(src)] = label;
    if (confidences)
      (*confidences)[static_cast<size_t>(src)] = probs[static_cast<size_t>(label)];
  }
  return out;
}

double tagger_loss_and_grad(const EncoderModel& model, const EncodedSequence& enc,
                            const std::vector<EntityLabel>& gold, double inv_batch,
                            Rng* dropout_rng, EncoderGrads& grads) {
  const int d = model.config.d_model;
  const int t = enc.length();
  const EncoderActivations acts = encoder_forward(model, enc, nullptr, dropout_rng);
  const std::vector<double>& out = acts.output();

  std::vector<double> logits(static_cast<size_t>(t) * kNumLabels);
  kern::linear_forward(logits.data(), out.data(), model.tag_w->values.data(), nullptr, t, d,
                       kNumLabels);

  double loss = 0.0;
  std::vector<double> d_logits(logits.size(), 0.0);
  for (int pos = 0; pos < t; ++pos) {
    const int src = enc.alignment[static_cast<size_t>(pos)];
    if (src < 0) continue;  // specials and padding carry no loss
    double* row = logits.data() + static_cast<size_t>(pos) * kNumLabels;
    double mx = row[0];
    for (int k = 1; k < kNumLabels; ++k) mx = std::max(mx, row[k]);
    double sum = 0.0;
    double probs[kNumLabels];
    for (int k = 0; k < kNumLabels; ++k) {
      probs[k] = std::exp(row[k] - mx);
      sum += probs[k];
    }
    const int y = static_cast<int>(gold[static_cast<size_t>(src)]);
    loss += -std::log(std::max(probs[y] / sum, kProbFloor));
    double* drow = d_logits.data() + static_cast<size_t>(pos) * kNumLabels;
    for (int k = 0; k < kNumLabels; ++k)
      drow[k] = (probs[k] / sum - (k == y ? 1.0 : 0.0)) * inv_batch;
  }

  std::vector<double> d_out(static_cast<size_t>(t) * d);
  kern::linear_backward(d_out.data(), grads.tag_w, nullptr, d_logits.data(), out.data(),
                        model.tag_w->values.data(), t, d, kNumLabels);
  encoder_backward(model, acts, d_out, grads);
  return loss * inv_batch;
}

TrainLog train_tagger(EncoderModel& model, const Corpus& train, const Corpus& val,
                      const Vocabulary& vocab, const TrainOptions& opts) {
  if (train.sentences.empty()) throw std::invalid_argument("training corpus is empty");
  attach_tag_head(model);

  const int t_len = fitted_max_len(train, model.config.max_len);
  std::vector<EncodedSequence> encoded;
  encoded.reserve(train.sentences.size());
  for (const Sentence& s : train.sentences) encoded.push_back(encode(s, vocab, t_len));

  AdamHyper hyper;
  hyper.eta = opts.lr;
  const std::vector<ParamTensor*> params = model.params();
  BatchWorkspace workspace(model, opts.shards);

  TrainLog log;
  EncoderModel best;
  const int n = static_cast<int>(train.sentences.size());
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(opts.seed, 1000 + static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += opts.batch) {
      const int bsz = std::min(opts.batch, n - start);
      const double inv_batch = 1.0 / bsz;
      const double batch_loss =
          workspace.run(bsz, [&](int bi, EncoderGrads& grads) {
            const int idx = order[static_cast<size_t>(start + bi)];
            Rng dropout_rng(derive_seed(opts.seed,
                                        0x10000000ull + static_cast<uint64_t>(epoch) * 1000003ull +
                                            static_cast<uint64_t>(idx)));
            Rng* rng = model.config.dropout > 0.0 ? &dropout_rng : nullptr;
            return tagger_loss_and_grad(model, encoded[static_cast<size_t>(idx)],
                                        train.sentences[static_cast<size_t>(idx)].labels,
                                        inv_batch, rng, grads);
          });
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch));
      epoch_loss += batch_loss;
      ++batches;
      adam_step(params, hyper);
    }

    const EntityMetrics vm = evaluate_tagger(model, vocab, val);
    EpochLog el;
    el.train_loss = epoch_loss / std::max(batches, 1);
    el.val_metric = vm.total.f1;
    log.epochs.push_back(el);
    if (opts.verbose)
      std::printf("epoch %2d  loss %.6f  val micro-F1 %.2f\n", epoch + 1, el.train_loss,
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

EntityMetrics evaluate_tagger(const EncoderModel& model, const Vocabulary& vocab,
                              const Corpus& data) {
  const int t_len = fitted_max_len(data, model.config.max_len);
  const int n = static_cast<int>(data.sentences.size());
  std::vector<std::vector<EntityLabel>> predictions(static_cast<size_t>(n));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    predictions[static_cast<size_t>(i)] =
        predict_labels(model, vocab, data.sentences[static_cast<size_t>(i)], t_len);
  }

  EntityMetrics m;
  for (EntityLabel e : entity_labels()) m.per_entity[e] = ClassMetrics{};
  for (int i = 0; i < n; ++i) {
    const Sentence& s = data.sentences[static_cast<size_t>(i)];
    const auto& pred = predictions[static_cast<size_t>(i)];
    for (size_t tkn = 0; tkn < s.tokens.size(); ++tkn) {
      const EntityLabel gold = s.labels[tkn];
      const EntityLabel hyp = pred[tkn];
      if (gold == hyp) {
        if (gold != EntityLabel::OTHER) m.per_entity[gold].tp += 1;
      } else {
        if (hyp != EntityLabel::OTHER) m.per_entity[hyp].fp += 1;
        if (gold != EntityLabel::OTHER) m.per_entity[gold].fn += 1;
      }
    }
  }

  auto finish = [](ClassMetrics& c) {
    c.precision = c.tp + c.fp > 0 ? 100.0 * c.tp / (c.tp + c.fp) : 0.0;
    c.recall = c.tp + c.fn > 0 ? 100.0 * c.tp / (c.tp + c.fn) : 0.0;
    c.f1 = f1_percent(c.precision, c.recall);
  };
  for (auto& [label, cm] : m.per_entity) {
    finish(cm);
    m.total.tp += cm.tp;
    m.total.fp += cm.fp;
    m.total.fn += cm.fn;
  }
  finish(m.total);
  return m;
}

Corpus few_shot_subset(const Corpus& train, int n_per_class,
                       const std::vector<EntityLabel>& classes) {
  if (n_per_class <= 0) throw std::invalid_argument("n_per_class must be positive");
  std::map<EntityLabel, int> taken;
  std::set<size_t> keep;
  for (size_t i = 0; i < train.sentences.size(); ++i) {
    const Sentence& s = train.sentences[i];
    for (EntityLabel c : classes) {
      if (taken[c] >= n_per_class) continue;
      if (std::find(s.labels.begin(), s.labels.end(), c) != s.labels.end()) {
        taken[c] += 1;
        keep.insert(i);
      }
    }
  }
  for (EntityLabel c : classes) {
    if (taken[c] == 0)
      throw std::invalid_argument("class " + label_name(c) + " has no instances");
  }
  Corpus out;
  out.provenance = train.provenance + ";few_shot:" + std::to_string(n_per_class);
  for (size_t i : keep) out.sentences.push_back(train.sentences[i]);
  return out;
}

std::string tagger_report_json(const EntityMetrics& metrics, const std::string& dataset,
                               uint64_t seed) {
  nlohmann::ordered_json j;
  j["format"] = "nuer-report-v1";
  j["kind"] = "tagger";
  j["dataset"] = dataset;
  j["seed"] = seed;
  auto cls = [](const ClassMetrics& c) {
    nlohmann::ordered_json e;
    e["precision"] = c.precision;
    e["recall"] = c.recall;
    e["f1"] = c.f1;
    e["tp"] = c.tp;
    e["fp"] = c.fp;
    e["fn"] = c.fn;
    return e;
  };
  nlohmann::ordered_json per;
  for (EntityLabel e : entity_labels()) per[label_name(e)] = cls(metrics.per_entity.at(e));
  j["per_entity"] = per;
  j["total"] = cls(metrics.total);
  return j.dump(2);
}

}  // namespace nuer
