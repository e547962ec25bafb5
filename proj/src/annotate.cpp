#include "nuer/annotate.hpp"

#include <stdexcept>

#include "nuer/errors.hpp"
#include "nuer/tagger.hpp"

namespace nuer {

Corpus annotate_corpus(const EncoderModel& model, const Vocabulary& vocab, const Corpus& raw,
                       double threshold) {
  if (threshold < 0.0)
    throw std::invalid_argument("annotation threshold must be nonnegative");
  if (!model.vocab_hash.empty() && model.vocab_hash != vocab.content_hash())
    throw SchemaError("vocabulary hash mismatch between checkpoint and encoding vocabulary");

  const int t_len = fitted_max_len(raw, model.config.max_len);
  const int n = static_cast<int>(raw.sentences.size());
  Corpus out;
  out.provenance = raw.provenance + ";annotated";
  out.sentences = raw.sentences;

  // Embarrassingly parallel over sentences; output slots keep input order.
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    Sentence& s = out.sentences[static_cast<size_t>(i)];
    std::vector<double> confidences;
    s.labels = predict_labels(model, vocab, s, t_len, threshold, &confidences);
    s.confidences = std::move(confidences);
  }
  return out;
}

Corpus make_audit_subset(const Corpus& annotated, int n, uint64_t seed) {
  return magnitude_audit_sample(annotated, n, seed);
}

}  // namespace nuer
