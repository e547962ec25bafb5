#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "nuer/encoder.hpp"
#include "nuer/errors.hpp"
#include "nuer/gradcheck.hpp"
#include "nuer/tagger.hpp"
#include "test_util.hpp"

using namespace nuer;

namespace {

EncoderConfig tiny_config(uint64_t seed = 0) {
  EncoderConfig c;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ffn = 32;
  c.max_len = 12;
  c.vocab_size = 40;
  c.dropout = 0.0;
  c.seed = seed;
  return c;
}

EncodedSequence toy_encoded(int t, int content_from, int content_to, int pad_from) {
  EncodedSequence enc;
  for (int i = 0; i < t; ++i) {
    enc.token_ids.push_back(kNumReserved + i);
    enc.segment_ids.push_back(0);
    enc.attention_mask.push_back(i < pad_from ? 1 : 0);
    enc.alignment.push_back(i >= content_from && i <= content_to ? i - content_from : -1);
  }
  enc.token_ids[0] = kClsId;
  for (int i = pad_from; i < t; ++i) enc.token_ids[static_cast<size_t>(i)] = kPadId;
  return enc;
}

}  // namespace

TEST_CASE("init_model: deterministic, zero entity table, unit gains") {
  const EncoderModel a = init_model(tiny_config(7));
  const EncoderModel b = init_model(tiny_config(7));
  const auto pa = a.named_params();
  const auto pb = b.named_params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    CHECK(pa[i].second->values == pb[i].second->values);
  }
  for (double v : a.ent_emb.values) CHECK(v == 0.0);
  for (double v : a.layers[0].ln1_g.values) CHECK(v == 1.0);
  for (double v : a.layers[0].bq.values) CHECK(v == 0.0);

  const EncoderModel c = init_model(tiny_config(8));
  CHECK(c.tok_emb.values != a.tok_emb.values);

  // Weights respect the +-2 sigma truncation.
  for (double v : a.tok_emb.values) CHECK(std::abs(v) <= 2.0 * 0.02 + 1e-12);
}

TEST_CASE("parameter count matches the closed-form shape arithmetic") {
  const EncoderConfig cfg = tiny_config();
  EncoderModel m = init_model(cfg);
  size_t total = 0;
  for (ParamTensor* p : m.params()) total += p->count();

  const size_t d = cfg.d_model, f = cfg.d_ffn, vsize = cfg.vocab_size, ml = cfg.max_len;
  const size_t embeddings = vsize * d + ml * d + 2 * d + 7 * d;
  const size_t per_layer = 4 * (d * d + d)  // q,k,v,o projections with bias
                           + 2 * 2 * d      // two layer norms (gain + bias)
                           + (d * f + f) + (f * d + d);
  CHECK(total == embeddings + static_cast<size_t>(cfg.n_layers) * per_layer);
}

TEST_CASE("embed: entity table and table-lookup oracle") {
  const EncoderConfig cfg = tiny_config(3);
  const EncoderModel m = init_model(cfg);
  const EncodedSequence enc = toy_encoded(8, 1, 5, 7);

  // Zero entity table: embedding with entity codes equals embedding without.
  std::vector<int> codes(8, 0);
  codes[2] = 3;
  codes[4] = 1;
  CHECK(embed(m, enc) == embed(m, enc, codes.data()));

  // Row arithmetic against direct table reads.
  const int d = cfg.d_model;
  const std::vector<double> x = embed(m, enc);
  for (int i = 0; i < enc.length(); ++i) {
    const int id = enc.token_ids[static_cast<size_t>(i)];
    const int seg = enc.segment_ids[static_cast<size_t>(i)];
    for (int c = 0; c < d; ++c) {
      const double expect = m.tok_emb.values[static_cast<size_t>(id) * d + c] +
                            m.pos_emb.values[static_cast<size_t>(i) * d + c] +
                            m.seg_emb.values[static_cast<size_t>(seg) * d + c];
      CHECK(x[static_cast<size_t>(i) * d + c] == expect);
    }
  }

  // Nonzero entity rows shift exactly the coded positions.
  EncoderModel m2 = m;
  for (double& v : m2.ent_emb.values) v = 0.125;
  const std::vector<double> with_ent = embed(m2, enc, codes.data());
  for (int i = 0; i < enc.length(); ++i) {
    for (int c = 0; c < d; ++c) {
      CHECK(with_ent[static_cast<size_t>(i) * d + c] ==
            x[static_cast<size_t>(i) * d + c] + 0.125);
    }
  }

  EncodedSequence too_long = toy_encoded(8, 1, 5, 7);
  for (int i = 0; i < 5; ++i) {
    too_long.token_ids.push_back(kPadId);
    too_long.segment_ids.push_back(0);
    too_long.attention_mask.push_back(0);
    too_long.alignment.push_back(-1);
  }
  CHECK_THROWS_AS(embed(m, too_long), std::invalid_argument);  // position >= max_len
}

TEST_CASE("encode_sequence: shapes and PAD-content invariance") {
  const EncoderModel m = init_model(tiny_config(5));
  const EncodedSequence enc = toy_encoded(10, 1, 6, 8);
  const auto [cls, out] = encode_sequence(m, enc);
  CHECK(cls.size() == static_cast<size_t>(m.config.d_model));
  CHECK(out.size() == static_cast<size_t>(10 * m.config.d_model));

  // Changing token ids under PAD positions leaves non-PAD outputs unchanged.
  EncodedSequence permuted = enc;
  permuted.token_ids[8] = kNumReserved + 20;
  permuted.token_ids[9] = kNumReserved + 21;
  const auto [cls2, out2] = encode_sequence(m, permuted);
  CHECK(cls2 == cls);
  for (int i = 0; i < 8; ++i) {
    for (int c = 0; c < m.config.d_model; ++c) {
      CHECK(out2[static_cast<size_t>(i) * m.config.d_model + c] ==
            out[static_cast<size_t>(i) * m.config.d_model + c]);
    }
  }
}

// Independent single-head forward written with plain loops, no kernels.
TEST_CASE("one-layer one-head forward matches a naive oracle") {
  EncoderConfig cfg;
  cfg.d_model = 4;
  cfg.n_layers = 1;
  cfg.n_heads = 1;
  cfg.d_ffn = 8;
  cfg.max_len = 4;
  cfg.vocab_size = 16;
  cfg.dropout = 0.0;
  cfg.seed = 11;
  const EncoderModel m = init_model(cfg);

  EncodedSequence enc;
  enc.token_ids = {kClsId, 12};
  enc.segment_ids = {0, 0};
  enc.attention_mask = {1, 1};
  enc.alignment = {-1, 0};

  const int t = 2, d = 4, f = 8;
  const std::vector<double> x0 = embed(m, enc);
  auto matvec = [&](const ParamTensor& wt, const ParamTensor& b, const std::vector<double>& in,
                    int rows, int nin, int nout) {
    std::vector<double> y(static_cast<size_t>(rows) * nout);
    for (int r = 0; r < rows; ++r)
      for (int o = 0; o < nout; ++o) {
        double acc = b.values.empty() ? 0.0 : b.values[static_cast<size_t>(o)];
        for (int i = 0; i < nin; ++i)
          acc += in[static_cast<size_t>(r) * nin + i] * wt.values[static_cast<size_t>(i) * nout + o];
        y[static_cast<size_t>(r) * nout + o] = acc;
      }
    return y;
  };
  auto naive_ln = [&](const std::vector<double>& in, const ParamTensor& gain,
                      const ParamTensor& bias, int rows, int nd) {
    std::vector<double> y(in.size());
    for (int r = 0; r < rows; ++r) {
      double mu = 0.0;
      for (int i = 0; i < nd; ++i) mu += in[static_cast<size_t>(r) * nd + i];
      mu /= nd;
      double var = 0.0;
      for (int i = 0; i < nd; ++i) {
        const double c = in[static_cast<size_t>(r) * nd + i] - mu;
        var += c * c;
      }
      var /= nd;
      const double rs = 1.0 / std::sqrt(var + 1e-12);
      for (int i = 0; i < nd; ++i)
        y[static_cast<size_t>(r) * nd + i] =
            (in[static_cast<size_t>(r) * nd + i] - mu) * rs * gain.values[static_cast<size_t>(i)] +
            bias.values[static_cast<size_t>(i)];
    }
    return y;
  };

  const EncoderLayer& lay = m.layers[0];
  const auto q = matvec(lay.wq, lay.bq, x0, t, d, d);
  const auto k = matvec(lay.wk, lay.bk, x0, t, d, d);
  const auto v = matvec(lay.wv, lay.bv, x0, t, d, d);
  std::vector<double> ctx(static_cast<size_t>(t) * d);
  for (int i = 0; i < t; ++i) {
    double scores[2];
    for (int j = 0; j < t; ++j) {
      double s = 0.0;
      for (int c = 0; c < d; ++c)
        s += q[static_cast<size_t>(i) * d + c] * k[static_cast<size_t>(j) * d + c];
      scores[j] = s / std::sqrt(4.0);
    }
    const double mx = std::max(scores[0], scores[1]);
    double e0 = std::exp(scores[0] - mx), e1 = std::exp(scores[1] - mx);
    const double z = e0 + e1;
    for (int c = 0; c < d; ++c)
      ctx[static_cast<size_t>(i) * d + c] =
          (e0 * v[static_cast<size_t>(0) * d + c] + e1 * v[static_cast<size_t>(1) * d + c]) / z;
  }
  auto attn = matvec(lay.wo, lay.bo, ctx, t, d, d);
  std::vector<double> res1(attn.size());
  for (size_t i = 0; i < attn.size(); ++i) res1[i] = x0[i] + attn[i];
  const auto ln1 = naive_ln(res1, lay.ln1_g, lay.ln1_b, t, d);
  auto h1 = matvec(lay.w1, lay.b1, ln1, t, d, f);
  for (double& x : h1) x = 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
  const auto h2 = matvec(lay.w2, lay.b2, h1, t, f, d);
  std::vector<double> res2(ln1.size());
  for (size_t i = 0; i < ln1.size(); ++i) res2[i] = ln1[i] + h2[i];
  const auto expect = naive_ln(res2, lay.ln2_g, lay.ln2_b, t, d);

  const auto [cls, out] = encode_sequence(m, enc);
  REQUIRE(out.size() == expect.size());
  for (size_t i = 0; i < out.size(); ++i)
    CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-10));
}

TEST_CASE("end-to-end gradient check under 1e-3") {
  CHECK(run_full_grad_check(tiny_config(21), false) < 1e-3);
}

TEST_CASE("sharded batch accumulation equals serial accumulation bitwise") {
  EncoderModel model = init_model(tiny_config(13));
  attach_tag_head(model);
  const EncodedSequence enc = toy_encoded(8, 1, 5, 7);
  std::vector<EntityLabel> gold = {EntityLabel::YEAR, EntityLabel::COUNT, EntityLabel::OTHER,
                                   EntityLabel::AGE, EntityLabel::DATE};

  const int batch = 10;
  EncoderGrads direct = grads_of(model);
  double serial_loss = 0.0;
  for (int i = 0; i < batch; ++i)
    serial_loss += tagger_loss_and_grad(model, enc, gold, 1.0 / batch, nullptr, direct);
  std::vector<std::vector<double>> serial_grads;
  for (ParamTensor* p : model.params()) {
    serial_grads.push_back(p->grad);
    p->zero_grad();
  }

  for (int shards : {1, 3, 4, 8}) {
    BatchWorkspace ws(model, shards);
    const double loss = ws.run(batch, [&](int, EncoderGrads& g) {
      return tagger_loss_and_grad(model, enc, gold, 1.0 / batch, nullptr, g);
    });
    CHECK(loss == serial_loss);
    size_t i = 0;
    for (ParamTensor* p : model.params()) {
      CHECK(p->grad == serial_grads[i]);
      p->zero_grad();
      ++i;
    }
  }
}

TEST_CASE("checkpoint: byte-exact round trip and integrity errors") {
  test::TempDir tmp("ckpt");
  EncoderModel model = init_model(tiny_config(17));
  attach_tag_head(model);
  model.vocab_hash = "cafe";
  const std::string p1 = tmp.path("m1.ckpt");
  const std::string p2 = tmp.path("m2.ckpt");
  save_checkpoint(model, p1);
  EncoderModel loaded = load_checkpoint(p1);
  CHECK(loaded.vocab_hash == "cafe");
  CHECK(loaded.config.d_model == model.config.d_model);
  REQUIRE(loaded.tag_w.has_value());
  save_checkpoint(loaded, p2);
  CHECK(test::read_file(p1) == test::read_file(p2));

  // Corrupting one blob byte must fail the checksum, never load silently.
  std::string raw = test::read_file(p1);
  raw[raw.size() - 3] = static_cast<char>(raw[raw.size() - 3] ^ 0x40);
  std::ofstream(tmp.path("bad.ckpt"), std::ios::binary) << raw;
  CHECK_THROWS_WITH_AS(load_checkpoint(tmp.path("bad.ckpt")), doctest::Contains("hash mismatch"),
                       SchemaError);

  // Truncated blob.
  std::ofstream(tmp.path("trunc.ckpt"), std::ios::binary) << raw.substr(0, raw.size() - 64);
  CHECK_THROWS_WITH_AS(load_checkpoint(tmp.path("trunc.ckpt")), doctest::Contains("truncated"),
                       SchemaError);

  // Version mismatch.
  std::string wrong = raw;
  const size_t pos = wrong.find("nuer-ckpt-v1");
  wrong.replace(pos, 12, "nuer-ckpt-v9");
  std::ofstream(tmp.path("ver.ckpt"), std::ios::binary) << wrong;
  CHECK_THROWS_WITH_AS(load_checkpoint(tmp.path("ver.ckpt")), doctest::Contains("version"),
                       SchemaError);

  CHECK_THROWS_AS(load_checkpoint(tmp.path("missing.ckpt")), IoError);
}

TEST_CASE("checkpoint preserves evaluation behavior exactly") {
  test::TempDir tmp("ckpt2");
  const Corpus corpus = generate_corpus(test::small_gen_config(30, 41));
  const Vocabulary vocab = build_vocab(corpus, 1);
  EncoderConfig cfg = tiny_config(19);
  cfg.vocab_size = vocab.size();
  cfg.max_len = 32;
  EncoderModel model = init_model(cfg);
  attach_tag_head(model);
  model.vocab_hash = vocab.content_hash();

  save_checkpoint(model, tmp.path("m.ckpt"));
  const EncoderModel a = load_checkpoint(tmp.path("m.ckpt"));
  const EncoderModel b = load_checkpoint(tmp.path("m.ckpt"));
  const EntityMetrics ma = evaluate_tagger(a, vocab, corpus);
  const EntityMetrics mb = evaluate_tagger(b, vocab, corpus);
  CHECK(ma.total.tp == mb.total.tp);
  CHECK(ma.total.fp == mb.total.fp);
  CHECK(ma.total.fn == mb.total.fn);
  CHECK(ma.total.f1 == mb.total.f1);
}

TEST_CASE("config validation") {
  EncoderConfig c = tiny_config();
  c.d_model = 15;  // not divisible by heads
  CHECK_THROWS_AS(validate_config(c), std::invalid_argument);
  c = tiny_config();
  c.max_len = 2;
  CHECK_THROWS_AS(validate_config(c), std::invalid_argument);
  c = tiny_config();
  c.vocab_size = 3;
  CHECK_THROWS_AS(validate_config(c), std::invalid_argument);
  c = tiny_config();
  c.dropout = 1.0;
  CHECK_THROWS_AS(validate_config(c), std::invalid_argument);
}
