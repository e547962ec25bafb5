#pragma once

#include <map>
#include <string>
#include <vector>

#include "nuer/corpus.hpp"
#include "nuer/encoder.hpp"
#include "nuer/tagger.hpp"
#include "nuer/tokenizer.hpp"

namespace nuer {

enum class FitbMode { kBaseline, kEntity };

FitbMode fitb_mode_from_name(const std::string& name);  // "baseline" | "entity"
const std::string& fitb_mode_name(FitbMode mode);

// Closed output vocabulary: every distinct numeral token of the corpus,
// ordered by numeric value, then lexicographically.
struct NumeralVocab {
  std::vector<std::string> tokens;
  std::vector<double> values;

  int size() const { return static_cast<int>(tokens.size()); }
  // Index of a numeral token, -1 when absent.
  int index_of(const std::string& token) const;
};

NumeralVocab build_numeral_vocab(const Corpus& corpus);

// Probability over the numeral vocabulary for the masked position. In entity
// mode the encoder input carries the entity marker token after [CLS] and the
// head consumes [hidden ; projection-row] of width 2D; the baseline head
// consumes the hidden state alone.
std::vector<double> fitb_forward(const EncoderModel& model, const NumeralVocab& numerals,
                                 const Vocabulary& vocab, const Sentence& example,
                                 FitbMode mode, int max_len);

// Head-only forward from a fixed hidden state; entity_row < 0 selects the
// baseline path (head width D), otherwise [hidden ; proj-row] (width 2D).
std::vector<double> fitb_head_probs(const EncoderModel& model, const std::vector<double>& hidden,
                                    int entity_row);

// Numeral vocabulary derived from an existing token vocabulary (which keeps
// every numeral of the corpus it was built on).
NumeralVocab numeral_vocab_from(const Vocabulary& vocab);

// One forward/backward pass: cross-entropy over the numeral vocabulary at
// the masked encoded position, scaled by `scale`. entity_row < 0 selects the
// baseline head path.
double fitb_loss_and_grad(const EncoderModel& model, const EncodedSequence& encoded,
                          int mask_pos, int entity_row, int answer, double scale,
                          Rng* dropout_rng, EncoderGrads& grads);

struct FitbOptions {
  int epochs = 3;
  double lr = 2e-4;
  int batch = 64;
  uint64_t seed = 0;
  int shards = 4;
  bool verbose = false;
  FitbMode mode = FitbMode::kBaseline;
};

TrainLog train_fitb(EncoderModel& model, const Corpus& train, const Corpus& val,
                    const Vocabulary& vocab, const NumeralVocab& numerals,
                    const FitbOptions& opts);

struct FitbMetrics {
  std::map<int, double> top_k;  // percent
  std::map<int, double> dist;   // mean |value gap| over the top-k list
};

FitbMetrics evaluate_fitb(const EncoderModel& model, const Vocabulary& vocab,
                          const NumeralVocab& numerals, const Corpus& data, FitbMode mode,
                          const std::vector<int>& ks = {1, 2, 5, 10});

// Indices of the k highest-probability numerals; ties resolve in vocabulary
// order.
std::vector<int> top_k_indices(const std::vector<double>& probs, int k);

// Most frequent non-OTHER label per numeral token over a labeled corpus,
// used for the qualitative entity-consistency readout.
std::map<std::string, EntityLabel> majority_entity_by_numeral(const Corpus& corpus);

struct QualitativeStats {
  double baseline_consistency = 0.0;  // fraction in [0, 1]
  double entity_consistency = 0.0;
};

// Side-by-side dump of baseline vs entity-conditioned top-k predictions per
// example, with the blanked sentence and the gold numeral.
QualitativeStats dump_qualitative(const EncoderModel& baseline_model,
                                  const EncoderModel& entity_model, const Vocabulary& vocab,
                                  const NumeralVocab& numerals, const Corpus& examples,
                                  const std::map<std::string, EntityLabel>& numeral_entity,
                                  int k, const std::string& path);

std::string fitb_report_json(const FitbMetrics& metrics, FitbMode mode, uint64_t seed);

}  // namespace nuer
