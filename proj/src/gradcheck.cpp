#include "nuer/gradcheck.hpp"

#include <cstdio>

#include "nuer/fitb.hpp"
#include "nuer/nn.hpp"
#include "nuer/qa.hpp"
#include "nuer/tagger.hpp"

namespace nuer {

namespace {

// Hand-built sequence: [CLS] w w w w w [SEP] [PAD] [PAD], with a question-
// style segment split so segment embeddings get gradient too.
EncodedSequence toy_sequence(const EncoderConfig& cfg, bool with_marker, int mask_at) {
  EncodedSequence enc;
  const int t = std::min(cfg.max_len, 10);
  Rng rng(derive_seed(cfg.seed, 7));
  for (int i = 0; i < t; ++i) {
    enc.token_ids.push_back(0);
    enc.segment_ids.push_back(i >= t / 2 ? 1 : 0);
    enc.attention_mask.push_back(1);
    enc.alignment.push_back(-1);
  }
  enc.token_ids[0] = kClsId;
  int pos = 1;
  if (with_marker) enc.token_ids[pos++] = Vocabulary::marker_id(EntityLabel::YEAR);
  int content = 0;
  while (pos < t - 3) {
    enc.token_ids[static_cast<size_t>(pos)] =
        kNumReserved + static_cast<int>(rng.next_below(
                           static_cast<uint64_t>(cfg.vocab_size - kNumReserved)));
    enc.alignment[static_cast<size_t>(pos)] = content++;
    ++pos;
  }
  if (mask_at >= 0) enc.token_ids[static_cast<size_t>(mask_at)] = kMaskId;
  enc.token_ids[static_cast<size_t>(pos)] = kSepId;
  for (int i = pos + 1; i < t; ++i) {
    enc.token_ids[static_cast<size_t>(i)] = kPadId;
    enc.attention_mask[static_cast<size_t>(i)] = 0;
    enc.segment_ids[static_cast<size_t>(i)] = 0;
  }
  return enc;
}

double check(const char* name, EncoderModel& model, const std::function<double()>& loss,
             bool verbose, double& worst) {
  const double err = grad_check(loss, model.params(), 1e-5, 200, model.config.seed);
  if (verbose) std::printf("grad-check %-14s max rel error %.3e\n", name, err);
  worst = std::max(worst, err);
  return err;
}

}  // namespace

double run_full_grad_check(const EncoderConfig& config, bool verbose) {
  EncoderConfig cfg = config;
  cfg.dropout = 0.0;  // finite differences need a deterministic loss
  validate_config(cfg);
  double worst = 0.0;

  {  // token classification head
    EncoderModel model = init_model(cfg);
    attach_tag_head(model);
    const EncodedSequence enc = toy_sequence(cfg, false, -1);
    std::vector<EntityLabel> gold;
    for (int i = 0; i < static_cast<int>(enc.alignment.size()); ++i)
      if (enc.alignment[static_cast<size_t>(i)] >= 0)
        gold.push_back(static_cast<EntityLabel>((enc.alignment[static_cast<size_t>(i)] % kNumEntities) + 1));
    check("tagger", model, [&]() {
      EncoderGrads g = grads_of(model);
      return tagger_loss_and_grad(model, enc, gold, 1.0, nullptr, g);
    }, verbose, worst);
  }

  {  // span heads, token-only input
    EncoderModel model = init_model(cfg);
    attach_qa_heads(model);
    const EncodedSequence enc = toy_sequence(cfg, false, -1);
    check("qa-baseline", model, [&]() {
      EncoderGrads g = grads_of(model);
      return qa_loss_and_grad(model, enc, nullptr, 2, 3, 1.0, nullptr, g);
    }, verbose, worst);
  }

  {  // span heads with joint entity embeddings
    EncoderModel model = init_model(cfg);
    attach_qa_heads(model);
    const EncodedSequence enc = toy_sequence(cfg, false, -1);
    std::vector<int> codes(enc.token_ids.size(), 0);
    for (size_t i = 0; i < enc.alignment.size(); ++i)
      if (enc.alignment[i] >= 0) codes[i] = (enc.alignment[i] % kNumEntities) + 1;
    check("qa-jem", model, [&]() {
      EncoderGrads g = grads_of(model);
      return qa_loss_and_grad(model, enc, codes.data(), 2, 3, 1.0, nullptr, g);
    }, verbose, worst);
  }

  const int v = 12;
  {  // masked-numeral head, hidden state only
    EncoderModel model = init_model(cfg);
    attach_fitb_head(model, v, false);
    const EncodedSequence enc = toy_sequence(cfg, false, 2);
    check("fitb-baseline", model, [&]() {
      EncoderGrads g = grads_of(model);
      return fitb_loss_and_grad(model, enc, 2, -1, 3, 1.0, nullptr, g);
    }, verbose, worst);
  }

  {  // masked-numeral head with marker token and entity projection
    EncoderModel model = init_model(cfg);
    attach_fitb_head(model, v, true);
    const EncodedSequence enc = toy_sequence(cfg, true, 3);
    check("fitb-entity", model, [&]() {
      EncoderGrads g = grads_of(model);
      return fitb_loss_and_grad(model, enc, 3, 2, 3, 1.0, nullptr, g);
    }, verbose, worst);
  }

  return worst;
}

}  // namespace nuer
