#pragma once

#include <string>

#include "nuer/corpus.hpp"
#include "nuer/encoder.hpp"
#include "nuer/tokenizer.hpp"

namespace nuer {

struct AnnotationConfig {
  double threshold = 0.5;  // confidence threshold in [0, 1]
  int audit_n = 0;
  uint64_t seed = 0;
};

// Labels every numeral token with the tagger's argmax entity when its
// probability clears the threshold; non-numeral tokens are always OTHER.
// Emits per-token confidences. The vocabulary must be the one the checkpoint
// was trained with (hash-checked).
Corpus annotate_corpus(const EncoderModel& model, const Vocabulary& vocab, const Corpus& raw,
                       double threshold);

// Magnitude-distribution-preserving audit subset of an annotated corpus.
Corpus make_audit_subset(const Corpus& annotated, int n, uint64_t seed);

}  // namespace nuer
