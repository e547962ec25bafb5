#include "nuer/encoder.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <stdexcept>

#include "nuer/kernels.hpp"

namespace nuer {

void validate_config(const EncoderConfig& c) {
  if (c.d_model <= 0 || c.n_layers <= 0 || c.n_heads <= 0 || c.d_ffn <= 0)
    throw std::invalid_argument("encoder dimensions must be positive");
  if (c.d_model % c.n_heads != 0)
    throw std::invalid_argument("d_model must be divisible by n_heads");
  if (c.max_len < 4) throw std::invalid_argument("max_len must be at least 4");
  if (c.vocab_size < kNumReserved)
    throw std::invalid_argument("vocab_size smaller than the reserved token set");
  if (c.dropout < 0.0 || c.dropout >= 1.0)
    throw std::invalid_argument("dropout must be in [0, 1)");
}

namespace {

// Single walker defining the canonical parameter order used by the
// optimizer, gradient shadows and checkpoints.
template <class Model, class Fn>
void visit_params(Model& m, Fn&& fn) {
  fn("tok_emb", m.tok_emb);
  fn("pos_emb", m.pos_emb);
  fn("seg_emb", m.seg_emb);
  fn("ent_emb", m.ent_emb);
  for (size_t l = 0; l < m.layers.size(); ++l) {
    auto& lay = m.layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    fn(p + "wq", lay.wq); fn(p + "bq", lay.bq);
    fn(p + "wk", lay.wk); fn(p + "bk", lay.bk);
    fn(p + "wv", lay.wv); fn(p + "bv", lay.bv);
    fn(p + "wo", lay.wo); fn(p + "bo", lay.bo);
    fn(p + "ln1_g", lay.ln1_g); fn(p + "ln1_b", lay.ln1_b);
    fn(p + "w1", lay.w1); fn(p + "b1", lay.b1);
    fn(p + "w2", lay.w2); fn(p + "b2", lay.b2);
    fn(p + "ln2_g", lay.ln2_g); fn(p + "ln2_b", lay.ln2_b);
  }
  if (m.tag_w) fn("tag.w", *m.tag_w);
  if (m.qa_start_w) fn("qa.start_w", *m.qa_start_w);
  if (m.qa_end_w) fn("qa.end_w", *m.qa_end_w);
  if (m.fitb_proj) fn("fitb.proj", *m.fitb_proj);
  if (m.fitb_w) fn("fitb.w", *m.fitb_w);
  if (m.fitb_b) fn("fitb.b", *m.fitb_b);
}

void fill_trunc_normal(ParamTensor& t, Rng& rng, double std_dev = 0.02) {
  for (double& v : t.values) v = rng.next_trunc_normal(std_dev);
}

}  // namespace

std::vector<std::pair<std::string, ParamTensor*>> EncoderModel::named_params() {
  std::vector<std::pair<std::string, ParamTensor*>> out;
  visit_params(*this, [&](const std::string& n, ParamTensor& t) { out.emplace_back(n, &t); });
  return out;
}

std::vector<std::pair<std::string, const ParamTensor*>> EncoderModel::named_params() const {
  std::vector<std::pair<std::string, const ParamTensor*>> out;
  visit_params(*this, [&](const std::string& n, const ParamTensor& t) { out.emplace_back(n, &t); });
  return out;
}

std::vector<ParamTensor*> EncoderModel::params() {
  std::vector<ParamTensor*> out;
  visit_params(*this, [&](const std::string&, ParamTensor& t) { out.push_back(&t); });
  return out;
}

EncoderModel init_model(const EncoderConfig& config) {
  validate_config(config);
  EncoderModel m;
  m.config = config;
  const int d = config.d_model;

  m.tok_emb = ParamTensor({config.vocab_size, d});
  m.pos_emb = ParamTensor({config.max_len, d});
  m.seg_emb = ParamTensor({2, d});
  m.ent_emb = ParamTensor({kNumLabels, d});  // stays zero at init

  Rng rng(config.seed);
  fill_trunc_normal(m.tok_emb, rng);
  fill_trunc_normal(m.pos_emb, rng);
  fill_trunc_normal(m.seg_emb, rng);

  m.layers.resize(static_cast<size_t>(config.n_layers));
  for (auto& lay : m.layers) {
    lay.wq = ParamTensor({d, d}); lay.bq = ParamTensor({d});
    lay.wk = ParamTensor({d, d}); lay.bk = ParamTensor({d});
    lay.wv = ParamTensor({d, d}); lay.bv = ParamTensor({d});
    lay.wo = ParamTensor({d, d}); lay.bo = ParamTensor({d});
    lay.ln1_g = ParamTensor({d}); lay.ln1_b = ParamTensor({d});
    lay.w1 = ParamTensor({d, config.d_ffn}); lay.b1 = ParamTensor({config.d_ffn});
    lay.w2 = ParamTensor({config.d_ffn, d}); lay.b2 = ParamTensor({d});
    lay.ln2_g = ParamTensor({d}); lay.ln2_b = ParamTensor({d});
    fill_trunc_normal(lay.wq, rng);
    fill_trunc_normal(lay.wk, rng);
    fill_trunc_normal(lay.wv, rng);
    fill_trunc_normal(lay.wo, rng);
    fill_trunc_normal(lay.w1, rng);
    fill_trunc_normal(lay.w2, rng);
    std::fill(lay.ln1_g.values.begin(), lay.ln1_g.values.end(), 1.0);
    std::fill(lay.ln2_g.values.begin(), lay.ln2_g.values.end(), 1.0);
  }
  return m;
}

void attach_tag_head(EncoderModel& m) {
  if (m.tag_w) return;
  m.tag_w = ParamTensor({m.config.d_model, kNumLabels});
  Rng rng(derive_seed(m.config.seed, 101));
  fill_trunc_normal(*m.tag_w, rng);
}

void attach_qa_heads(EncoderModel& m) {
  if (m.qa_start_w) return;
  m.qa_start_w = ParamTensor({m.config.d_model, 1});
  m.qa_end_w = ParamTensor({m.config.d_model, 1});
  Rng rng(derive_seed(m.config.seed, 102));
  fill_trunc_normal(*m.qa_start_w, rng);
  fill_trunc_normal(*m.qa_end_w, rng);
}

void attach_fitb_head(EncoderModel& m, int numeral_vocab_size, bool entity_conditioned) {
  if (m.fitb_w) return;
  if (numeral_vocab_size <= 0)
    throw std::invalid_argument("numeral vocabulary must be nonempty");
  const int d = m.config.d_model;
  Rng rng(derive_seed(m.config.seed, 103));
  if (entity_conditioned) {
    m.fitb_proj = ParamTensor({kNumEntities, d});
    fill_trunc_normal(*m.fitb_proj, rng);
  }
  const int width = entity_conditioned ? 2 * d : d;
  m.fitb_w = ParamTensor({width, numeral_vocab_size});
  m.fitb_b = ParamTensor({numeral_vocab_size});
  fill_trunc_normal(*m.fitb_w, rng);
}

std::vector<int> entity_codes_for(const Sentence& sentence, const EncodedSequence& encoded) {
  std::vector<int> codes(static_cast<size_t>(encoded.length()), 0);
  for (int i = 0; i < encoded.length(); ++i) {
    const int src = encoded.alignment[static_cast<size_t>(i)];
    if (src >= 0) codes[static_cast<size_t>(i)] = static_cast<int>(sentence.labels[static_cast<size_t>(src)]);
  }
  return codes;
}

std::vector<double> embed(const EncoderModel& m, const EncodedSequence& enc,
                          const int* entity_codes) {
  const int d = m.config.d_model;
  const int t = enc.length();
  if (t > m.config.max_len)
    throw std::invalid_argument("sequence position " + std::to_string(t - 1) +
                                " exceeds max_len " + std::to_string(m.config.max_len));
  std::vector<double> x(static_cast<size_t>(t) * d);
  for (int i = 0; i < t; ++i) {
    const int id = enc.token_ids[static_cast<size_t>(i)];
    if (id < 0 || id >= m.config.vocab_size)
      throw std::invalid_argument("token id out of range: " + std::to_string(id));
    const int seg = enc.segment_ids[static_cast<size_t>(i)];
    const double* te = m.tok_emb.values.data() + static_cast<size_t>(id) * d;
    const double* pe = m.pos_emb.values.data() + static_cast<size_t>(i) * d;
    const double* se = m.seg_emb.values.data() + static_cast<size_t>(seg) * d;
    double* row = x.data() + static_cast<size_t>(i) * d;
    for (int c = 0; c < d; ++c) row[c] = te[c] + pe[c] + se[c];
    if (entity_codes) {
      const double* ee = m.ent_emb.values.data() + static_cast<size_t>(entity_codes[i]) * d;
      for (int c = 0; c < d; ++c) row[c] += ee[c];
    }
  }
  return x;
}

namespace {

// Inverted dropout: multiplier 0 with probability p, else 1/(1-p).
void apply_dropout(std::vector<double>& x, std::vector<double>& mask, double p, Rng* rng) {
  if (!rng || p <= 0.0) return;
  mask.resize(x.size());
  const double keep = 1.0 / (1.0 - p);
  for (size_t i = 0; i < x.size(); ++i) {
    mask[i] = rng->next_unit() < p ? 0.0 : keep;
    x[i] *= mask[i];
  }
}

void mul_mask(std::vector<double>& g, const std::vector<double>& mask) {
  if (mask.empty()) return;
  for (size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
}

}  // namespace

EncoderActivations encoder_forward(const EncoderModel& m, const EncodedSequence& enc,
                                   const int* entity_codes, Rng* dropout_rng) {
  const int d = m.config.d_model;
  const int f = m.config.d_ffn;
  const int heads = m.config.n_heads;
  const int dh = d / heads;
  const int t = enc.length();
  const double p = m.config.dropout;

  EncoderActivations acts;
  acts.t = t;
  acts.token_ids = enc.token_ids;
  acts.segments = enc.segment_ids;
  acts.attn_mask = enc.attention_mask;
  acts.positions.resize(static_cast<size_t>(t));
  for (int i = 0; i < t; ++i) acts.positions[static_cast<size_t>(i)] = i;
  if (entity_codes) acts.entity_codes.assign(entity_codes, entity_codes + t);

  acts.x0 = embed(m, enc, entity_codes);
  apply_dropout(acts.x0, acts.drop_emb, p, dropout_rng);

  const size_t td = static_cast<size_t>(t) * d;
  const size_t tf = static_cast<size_t>(t) * f;
  const double* x = acts.x0.data();
  acts.layers.resize(m.layers.size());
  for (size_t l = 0; l < m.layers.size(); ++l) {
    const EncoderLayer& lay = m.layers[l];
    LayerCache& c = acts.layers[l];
    c.q.resize(td); c.k.resize(td); c.v.resize(td);
    c.probs.resize(static_cast<size_t>(heads) * t * t);
    c.ctx.resize(td); c.attn_out.resize(td);
    c.res1.resize(td); c.ln1.resize(td);
    c.ln1_mean.resize(static_cast<size_t>(t)); c.ln1_rstd.resize(static_cast<size_t>(t));
    c.ffn_pre.resize(tf); c.ffn_act.resize(tf); c.ffn_out.resize(td);
    c.res2.resize(td); c.ln2.resize(td);
    c.ln2_mean.resize(static_cast<size_t>(t)); c.ln2_rstd.resize(static_cast<size_t>(t));

    kern::linear_forward(c.q.data(), x, lay.wq.values.data(), lay.bq.values.data(), t, d, d);
    kern::linear_forward(c.k.data(), x, lay.wk.values.data(), lay.bk.values.data(), t, d, d);
    kern::linear_forward(c.v.data(), x, lay.wv.values.data(), lay.bv.values.data(), t, d, d);
    kern::attention_forward(c.ctx.data(), c.probs.data(), c.q.data(), c.k.data(), c.v.data(),
                            acts.attn_mask.data(), t, heads, dh);
    kern::linear_forward(c.attn_out.data(), c.ctx.data(), lay.wo.values.data(),
                         lay.bo.values.data(), t, d, d);
    apply_dropout(c.attn_out, c.drop_attn, p, dropout_rng);
    for (size_t i = 0; i < td; ++i) c.res1[i] = x[i] + c.attn_out[i];
    kern::layernorm_forward(c.ln1.data(), c.ln1_mean.data(), c.ln1_rstd.data(), c.res1.data(),
                            lay.ln1_g.values.data(), lay.ln1_b.values.data(), t, d);
    kern::linear_forward(c.ffn_pre.data(), c.ln1.data(), lay.w1.values.data(),
                         lay.b1.values.data(), t, d, f);
    kern::gelu_forward(c.ffn_act.data(), c.ffn_pre.data(), tf);
    kern::linear_forward(c.ffn_out.data(), c.ffn_act.data(), lay.w2.values.data(),
                         lay.b2.values.data(), t, f, d);
    apply_dropout(c.ffn_out, c.drop_ffn, p, dropout_rng);
    for (size_t i = 0; i < td; ++i) c.res2[i] = c.ln1[i] + c.ffn_out[i];
    kern::layernorm_forward(c.ln2.data(), c.ln2_mean.data(), c.ln2_rstd.data(), c.res2.data(),
                            lay.ln2_g.values.data(), lay.ln2_b.values.data(), t, d);
    x = c.ln2.data();
  }
  return acts;
}

EncoderGrads grads_of(EncoderModel& m) {
  EncoderGrads g;
  g.tok = m.tok_emb.grad.data();
  g.pos = m.pos_emb.grad.data();
  g.seg = m.seg_emb.grad.data();
  g.ent = m.ent_emb.grad.data();
  for (auto& lay : m.layers) {
    LayerGrads lg;
    lg.wq = lay.wq.grad.data(); lg.bq = lay.bq.grad.data();
    lg.wk = lay.wk.grad.data(); lg.bk = lay.bk.grad.data();
    lg.wv = lay.wv.grad.data(); lg.bv = lay.bv.grad.data();
    lg.wo = lay.wo.grad.data(); lg.bo = lay.bo.grad.data();
    lg.ln1_g = lay.ln1_g.grad.data(); lg.ln1_b = lay.ln1_b.grad.data();
    lg.w1 = lay.w1.grad.data(); lg.b1 = lay.b1.grad.data();
    lg.w2 = lay.w2.grad.data(); lg.b2 = lay.b2.grad.data();
    lg.ln2_g = lay.ln2_g.grad.data(); lg.ln2_b = lay.ln2_b.grad.data();
    g.layers.push_back(lg);
  }
  if (m.tag_w) g.tag_w = m.tag_w->grad.data();
  if (m.qa_start_w) g.qa_start_w = m.qa_start_w->grad.data();
  if (m.qa_end_w) g.qa_end_w = m.qa_end_w->grad.data();
  if (m.fitb_proj) g.fitb_proj = m.fitb_proj->grad.data();
  if (m.fitb_w) g.fitb_w = m.fitb_w->grad.data();
  if (m.fitb_b) g.fitb_b = m.fitb_b->grad.data();
  return g;
}

void encoder_backward(const EncoderModel& m, const EncoderActivations& acts,
                      const std::vector<double>& d_output, EncoderGrads& g) {
  const int d = m.config.d_model;
  const int f = m.config.d_ffn;
  const int heads = m.config.n_heads;
  const int dh = d / heads;
  const int t = acts.t;
  const size_t td = static_cast<size_t>(t) * d;
  const size_t tf = static_cast<size_t>(t) * f;

  std::vector<double> gy = d_output;
  std::vector<double> d_res2(td), d_branch(td), d_ffn_act(tf), d_ffn_pre(tf), d_ln1(td);
  std::vector<double> d_res1(td), d_ctx(td), d_q(td), d_k(td), d_v(td), d_x(td), d_tmp(td);

  for (size_t li = m.layers.size(); li-- > 0;) {
    const EncoderLayer& lay = m.layers[li];
    const LayerCache& c = acts.layers[li];
    LayerGrads& lg = g.layers[li];
    const double* x_in = li == 0 ? acts.x0.data() : acts.layers[li - 1].ln2.data();

    kern::layernorm_backward(d_res2.data(), lg.ln2_g, lg.ln2_b, gy.data(), c.res2.data(),
                             c.ln2_mean.data(), c.ln2_rstd.data(), lay.ln2_g.values.data(), t, d);
    d_branch = d_res2;
    mul_mask(d_branch, c.drop_ffn);
    kern::linear_backward(d_ffn_act.data(), lg.w2, lg.b2, d_branch.data(), c.ffn_act.data(),
                          lay.w2.values.data(), t, f, d);
    kern::gelu_backward(d_ffn_pre.data(), d_ffn_act.data(), c.ffn_pre.data(), tf);
    kern::linear_backward(d_ln1.data(), lg.w1, lg.b1, d_ffn_pre.data(), c.ln1.data(),
                          lay.w1.values.data(), t, d, f);
    kern::add_inplace(d_ln1.data(), d_res2.data(), td);  // residual path
    kern::layernorm_backward(d_res1.data(), lg.ln1_g, lg.ln1_b, d_ln1.data(), c.res1.data(),
                             c.ln1_mean.data(), c.ln1_rstd.data(), lay.ln1_g.values.data(), t, d);
    d_branch = d_res1;
    mul_mask(d_branch, c.drop_attn);
    kern::linear_backward(d_ctx.data(), lg.wo, lg.bo, d_branch.data(), c.ctx.data(),
                          lay.wo.values.data(), t, d, d);
    kern::attention_backward(d_q.data(), d_k.data(), d_v.data(), d_ctx.data(), c.probs.data(),
                             c.q.data(), c.k.data(), c.v.data(), t, heads, dh);
    d_x = d_res1;  // residual path
    kern::linear_backward(d_tmp.data(), lg.wq, lg.bq, d_q.data(), x_in, lay.wq.values.data(), t, d, d);
    kern::add_inplace(d_x.data(), d_tmp.data(), td);
    kern::linear_backward(d_tmp.data(), lg.wk, lg.bk, d_k.data(), x_in, lay.wk.values.data(), t, d, d);
    kern::add_inplace(d_x.data(), d_tmp.data(), td);
    kern::linear_backward(d_tmp.data(), lg.wv, lg.bv, d_v.data(), x_in, lay.wv.values.data(), t, d, d);
    kern::add_inplace(d_x.data(), d_tmp.data(), td);
    gy = d_x;
  }

  mul_mask(gy, acts.drop_emb);
  kern::embedding_backward(g.tok, gy.data(), acts.token_ids.data(), t, d);
  kern::embedding_backward(g.pos, gy.data(), acts.positions.data(), t, d);
  kern::embedding_backward(g.seg, gy.data(), acts.segments.data(), t, d);
  if (!acts.entity_codes.empty())
    kern::embedding_backward(g.ent, gy.data(), acts.entity_codes.data(), t, d);
}

std::pair<std::vector<double>, std::vector<double>> encode_sequence(
    const EncoderModel& m, const EncodedSequence& enc, const int* entity_codes) {
  const EncoderActivations acts = encoder_forward(m, enc, entity_codes, nullptr);
  const std::vector<double>& out = acts.output();
  const int d = m.config.d_model;
  std::vector<double> cls(out.begin(), out.begin() + d);
  return {std::move(cls), out};
}

ShadowGrads::ShadowGrads(EncoderModel& model) {
  std::vector<double*> ptrs;
  visit_params(model, [&](const std::string&, ParamTensor& t) {
    store_.emplace_back(t.count(), 0.0);
    ptrs.push_back(store_.back().data());
  });
  // Re-walk to bind the struct-of-pointers view in the same order.
  size_t i = 0;
  auto next = [&]() { return ptrs[i++]; };
  grads_.tok = next(); grads_.pos = next(); grads_.seg = next(); grads_.ent = next();
  for (size_t l = 0; l < model.layers.size(); ++l) {
    LayerGrads lg;
    lg.wq = next(); lg.bq = next(); lg.wk = next(); lg.bk = next();
    lg.wv = next(); lg.bv = next(); lg.wo = next(); lg.bo = next();
    lg.ln1_g = next(); lg.ln1_b = next(); lg.w1 = next(); lg.b1 = next();
    lg.w2 = next(); lg.b2 = next(); lg.ln2_g = next(); lg.ln2_b = next();
    grads_.layers.push_back(lg);
  }
  if (model.tag_w) grads_.tag_w = next();
  if (model.qa_start_w) grads_.qa_start_w = next();
  if (model.qa_end_w) grads_.qa_end_w = next();
  if (model.fitb_proj) grads_.fitb_proj = next();
  if (model.fitb_w) grads_.fitb_w = next();
  if (model.fitb_b) grads_.fitb_b = next();
}

void ShadowGrads::zero() {
  for (auto& buf : store_) std::fill(buf.begin(), buf.end(), 0.0);
}

void ShadowGrads::add_into(EncoderModel& model) {
  size_t i = 0;
  visit_params(model, [&](const std::string&, ParamTensor& t) {
    kern::add_inplace(t.grad.data(), store_[i].data(), t.count());
    ++i;
  });
}

BatchWorkspace::BatchWorkspace(EncoderModel& model, int shards)
    : model_(&model), shards_(shards) {
  for (int s = 0; s < shards_; ++s) shadow_.emplace_back(model);
}

double BatchWorkspace::run(int n, const std::function<double(int, EncoderGrads&)>& fn) {
  std::vector<double> losses(static_cast<size_t>(shards_), 0.0);
#pragma omp parallel for schedule(static)
  for (int s = 0; s < shards_; ++s) {
    shadow_[static_cast<size_t>(s)].zero();
    for (int i = s; i < n; i += shards_)
      losses[static_cast<size_t>(s)] += fn(i, shadow_[static_cast<size_t>(s)].grads());
  }
  double total = 0.0;
  for (int s = 0; s < shards_; ++s) {
    total += losses[static_cast<size_t>(s)];
    shadow_[static_cast<size_t>(s)].add_into(*model_);
  }
  return total;
}

}  // namespace nuer
