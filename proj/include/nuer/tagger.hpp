#pragma once

#include <map>
#include <string>
#include <vector>

#include "nuer/corpus.hpp"
#include "nuer/encoder.hpp"
#include "nuer/tokenizer.hpp"

namespace nuer {

// F1 = 2PR/(P+R) on the percent scale, 0 when P+R == 0.
double f1_percent(double precision, double recall);

struct ClassMetrics {
  long tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;  // percent
};

struct EntityMetrics {
  std::map<EntityLabel, ClassMetrics> per_entity;  // six entity classes
  ClassMetrics total;                              // micro-averaged
};

// Smallest encoded length that fits every sentence (with question prefix and
// an optional entity-marker slot), capped at the model's max_len.
int fitted_max_len(const Corpus& corpus, int max_len, bool marker_slot = false);

// Position-wise logits W o_i as a T x 7 row-major matrix.
std::vector<double> tag_logits(const EncoderModel& model, const EncodedSequence& encoded);

// Shared prediction routine for evaluation and annotation: argmax with ties
// to the lower class code, forced OTHER on non-numeral and unknown tokens,
// and OTHER when the winning probability is below the threshold. Optional
// out-parameter receives the probability of each emitted label.
std::vector<EntityLabel> predict_labels(const EncoderModel& model, const Vocabulary& vocab,
                                        const Sentence& sentence, int max_len,
                                        double threshold = 0.0,
                                        std::vector<double>* confidences = nullptr);

// One forward/backward pass: summed cross-entropy over aligned positions,
// scaled by `scale` (1/batch for batch-mean training). Accumulates into the
// given gradient buffers and returns the scaled loss.
double tagger_loss_and_grad(const EncoderModel& model, const EncodedSequence& encoded,
                            const std::vector<EntityLabel>& gold, double scale,
                            Rng* dropout_rng, EncoderGrads& grads);

struct TrainOptions {
  int epochs = 20;
  double lr = 2e-5;
  int batch = 32;
  uint64_t seed = 0;
  int shards = 4;
  bool verbose = false;
};

struct EpochLog {
  double train_loss = 0.0;
  double val_metric = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  int best_epoch = -1;
  double best_metric = 0.0;
};

// Cross-entropy training over non-special positions; keeps the weights of
// the epoch with the best validation micro-F1. Deterministic given the seed.
TrainLog train_tagger(EncoderModel& model, const Corpus& train, const Corpus& val,
                      const Vocabulary& vocab, const TrainOptions& opts);

EntityMetrics evaluate_tagger(const EncoderModel& model, const Vocabulary& vocab,
                              const Corpus& data);

// Per listed class, the first n sentences (in corpus order) containing it;
// sentences picked for several classes are kept once.
Corpus few_shot_subset(const Corpus& train, int n_per_class,
                       const std::vector<EntityLabel>& classes);

std::string tagger_report_json(const EntityMetrics& metrics, const std::string& dataset,
                               uint64_t seed);

}  // namespace nuer
