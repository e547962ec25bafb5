#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nuer/corpus.hpp"
#include "nuer/encoder.hpp"
#include "nuer/tagger.hpp"
#include "nuer/tokenizer.hpp"

namespace nuer {

enum class QaMode { kBaseline, kJem };

QaMode qa_mode_from_name(const std::string& name);  // "baseline" | "jem"
const std::string& qa_mode_name(QaMode mode);

struct QaDistributions {
  std::vector<double> start;  // over encoded positions; zero outside context
  std::vector<double> end;
};

// Span-head forward; joint mode adds the entity embedding rows for the given
// per-position codes (gold labels by default). Throws when the sentence has
// no question/context pair.
QaDistributions qa_forward(const EncoderModel& model, const EncodedSequence& encoded,
                           const int* entity_codes);

// Best (start, end) pair with start <= end < start + max_span_len, maximizing
// start[i]*end[j]; ties prefer the smaller start, then the smaller end.
std::pair<int, int> select_span(const std::vector<double>& start_probs,
                                const std::vector<double>& end_probs, int max_span_len = 8);

// One forward/backward pass: averaged start/end cross-entropy at the gold
// encoded positions, scaled by `scale`. entity_codes may be null (baseline).
double qa_loss_and_grad(const EncoderModel& model, const EncodedSequence& encoded,
                        const int* entity_codes, int gold_start, int gold_end, double scale,
                        Rng* dropout_rng, EncoderGrads& grads);

struct QaOptions {
  int epochs = 2;
  double lr = 2e-5;
  int batch = 32;
  uint64_t seed = 0;
  int shards = 4;
  bool verbose = false;
  QaMode mode = QaMode::kBaseline;
};

TrainLog train_qa(EncoderModel& model, const Corpus& train, const Corpus& val,
                  const Vocabulary& vocab, const QaOptions& opts);

struct QaMetrics {
  double exact_match = 0.0;  // percent
  double f1 = 0.0;           // percent
};

// Exact match is span identity with the gold answer; F1 is the token-bag
// overlap harmonic mean, both averaged over examples. In joint mode the
// entity input defaults to gold labels; pass a tagger-head model to use
// predicted labels instead.
QaMetrics evaluate_qa(const EncoderModel& model, const Vocabulary& vocab, const Corpus& data,
                      QaMode mode, const EncoderModel* entity_tagger = nullptr);

std::string qa_report_json(const QaMetrics& metrics, QaMode mode, uint64_t seed);

}  // namespace nuer
