#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nuer/rng.hpp"
#include "nuer/tensor.hpp"
#include "nuer/tokenizer.hpp"

namespace nuer {

struct EncoderConfig {
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ffn = 256;
  int max_len = 64;
  int vocab_size = 0;
  double dropout = 0.1;  // applied in training mode only
  uint64_t seed = 0;
};

void validate_config(const EncoderConfig& config);

// One post-norm transformer layer: attention -> add&norm -> FFN -> add&norm.
// Linear weights are stored transposed (in, out); see kernels.hpp.
struct EncoderLayer {
  ParamTensor wq, bq, wk, bk, wv, bv, wo, bo;
  ParamTensor ln1_g, ln1_b;
  ParamTensor w1, b1, w2, b2;
  ParamTensor ln2_g, ln2_b;
};

struct EncoderModel {
  EncoderConfig config;
  std::string vocab_hash;  // sha256 of the paired vocabulary file content

  ParamTensor tok_emb;  // vocab_size x d
  ParamTensor pos_emb;  // max_len x d
  ParamTensor seg_emb;  // 2 x d
  ParamTensor ent_emb;  // 7 x d (row 0 = no entity); zero at init
  std::vector<EncoderLayer> layers;

  // Task heads, attached on demand. tag: d -> 7 with no bias; qa: two d -> 1
  // span scorers; fitb: entity projection rows plus the output layer over the
  // numeral vocabulary (input width d or 2d for the entity-conditioned mode).
  std::optional<ParamTensor> tag_w;
  std::optional<ParamTensor> qa_start_w, qa_end_w;
  std::optional<ParamTensor> fitb_proj;  // 6 x d
  std::optional<ParamTensor> fitb_w;     // (d | 2d) x V
  std::optional<ParamTensor> fitb_b;     // V

  std::vector<std::pair<std::string, ParamTensor*>> named_params();
  std::vector<std::pair<std::string, const ParamTensor*>> named_params() const;
  std::vector<ParamTensor*> params();
};

// Fresh model with truncated-normal(0, 0.02^2) weights, unit layer-norm
// gains, zero biases and a zero entity table. Deterministic given the seed.
EncoderModel init_model(const EncoderConfig& config);

void attach_tag_head(EncoderModel& model);
void attach_qa_heads(EncoderModel& model);
void attach_fitb_head(EncoderModel& model, int numeral_vocab_size, bool entity_conditioned);

// Per-position entity codes for joint-embedding input: the sentence label at
// aligned positions, 0 (none) on specials, question tokens and padding.
std::vector<int> entity_codes_for(const Sentence& sentence, const EncodedSequence& encoded);

// Embedding sum token + position + segment (+ entity when codes are given).
// Returns a T x d row-major matrix.
std::vector<double> embed(const EncoderModel& model, const EncodedSequence& encoded,
                          const int* entity_codes = nullptr);

struct LayerCache {
  std::vector<double> q, k, v, probs, ctx, attn_out;
  std::vector<double> res1, ln1, ln1_mean, ln1_rstd;
  std::vector<double> ffn_pre, ffn_act, ffn_out;
  std::vector<double> res2, ln2, ln2_mean, ln2_rstd;
  std::vector<double> drop_attn, drop_ffn;  // inverted-dropout multipliers
};

struct EncoderActivations {
  int t = 0;
  std::vector<int> token_ids, segments, attn_mask, positions;
  std::vector<int> entity_codes;  // empty when entities were not fed
  std::vector<double> x0;         // embeddings after dropout
  std::vector<double> drop_emb;
  std::vector<LayerCache> layers;

  const std::vector<double>& output() const { return layers.back().ln2; }
};

// Forward pass with caches for backprop. dropout_rng == nullptr disables
// dropout (evaluation / gradient-check mode).
EncoderActivations encoder_forward(const EncoderModel& model, const EncodedSequence& encoded,
                                   const int* entity_codes = nullptr,
                                   Rng* dropout_rng = nullptr);

// Destination gradient buffers, either the model's own (grads_of) or a
// shadow copy for deterministic sharded batch accumulation.
struct LayerGrads {
  double *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
  double *ln1_g, *ln1_b, *w1, *b1, *w2, *b2, *ln2_g, *ln2_b;
};

struct EncoderGrads {
  double *tok = nullptr, *pos = nullptr, *seg = nullptr, *ent = nullptr;
  std::vector<LayerGrads> layers;
  double *tag_w = nullptr;
  double *qa_start_w = nullptr, *qa_end_w = nullptr;
  double *fitb_proj = nullptr, *fitb_w = nullptr, *fitb_b = nullptr;
};

EncoderGrads grads_of(EncoderModel& model);

// Accumulates parameter gradients and returns nothing; d_output is the loss
// gradient at the final layer output (T x d).
void encoder_backward(const EncoderModel& model, const EncoderActivations& acts,
                      const std::vector<double>& d_output, EncoderGrads& grads);

// Frozen-model inference: (classification-token output, all contextual
// outputs as T x d).
std::pair<std::vector<double>, std::vector<double>> encode_sequence(
    const EncoderModel& model, const EncodedSequence& encoded,
    const int* entity_codes = nullptr);

// Shadow gradient storage aligned with the model's parameter order.
class ShadowGrads {
 public:
  explicit ShadowGrads(EncoderModel& model);
  void zero();
  EncoderGrads& grads() { return grads_; }
  // model.grad[i] += shadow[i]; called in fixed shard order by the batch
  // runner so results are thread-count independent.
  void add_into(EncoderModel& model);

 private:
  std::vector<std::vector<double>> store_;
  EncoderGrads grads_;
};

// Deterministic parallel batch execution: examples are distributed over a
// fixed number of shards (independent of the thread count), each shard
// accumulates serially into its own gradient buffers, and shards are reduced
// in index order.
class BatchWorkspace {
 public:
  explicit BatchWorkspace(EncoderModel& model, int shards = 8);
  // Runs fn(example_index, shard_grads) for every index in [0, n) and
  // reduces into the model's gradient buffers. Returns the summed loss.
  double run(int n, const std::function<double(int, EncoderGrads&)>& fn);

 private:
  EncoderModel* model_;
  int shards_;
  std::vector<ShadowGrads> shadow_;
};

// Versioned checkpoint: JSON manifest line + raw little-endian float32 blob.
void save_checkpoint(const EncoderModel& model, const std::string& path);
EncoderModel load_checkpoint(const std::string& path);

}  // namespace nuer
