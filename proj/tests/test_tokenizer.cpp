#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "nuer/errors.hpp"
#include "nuer/tokenizer.hpp"
#include "test_util.hpp"

using namespace nuer;

TEST_CASE("reserved ids are fixed") {
  const auto& reserved = Vocabulary::reserved_tokens();
  REQUIRE(reserved.size() == kNumReserved);
  CHECK(reserved[0] == "[PAD]");
  CHECK(reserved[1] == "[UNK]");
  CHECK(reserved[2] == "[CLS]");
  CHECK(reserved[3] == "[SEP]");
  CHECK(reserved[4] == "[MASK]");
  CHECK(reserved[5] == "<size>");
  CHECK(reserved[6] == "<age>");
  CHECK(reserved[7] == "<count>");
  CHECK(reserved[8] == "<date>");
  CHECK(reserved[9] == "<year>");
  CHECK(reserved[10] == "<percentage>");
  CHECK(Vocabulary::marker_id(EntityLabel::SIZE) == 5);
  CHECK(Vocabulary::marker_id(EntityLabel::PERCENTAGE) == 10);
  CHECK_THROWS_AS(Vocabulary::marker_id(EntityLabel::OTHER), std::invalid_argument);
}

TEST_CASE("build_vocab counts, thresholds and numeral retention") {
  Corpus one;
  one.sentences.push_back(test::make_sentence("a", {"in", "2003"}, {EntityLabel::OTHER, EntityLabel::YEAR}));
  Vocabulary v = build_vocab(one, 1);
  CHECK(v.size() == 13);  // 11 reserved + "in" + "2003"
  CHECK(v.contains("in"));
  CHECK(v.contains("2003"));
  CHECK(v.id_of("absent") == kUnkId);

  // Below-threshold words drop; numerals always survive.
  Corpus two;
  two.sentences.push_back(test::make_sentence("a", {"alpha", "7"}, {EntityLabel::OTHER, EntityLabel::COUNT}));
  two.sentences.push_back(test::make_sentence("b", {"beta", "9"}, {EntityLabel::OTHER, EntityLabel::COUNT}));
  Vocabulary v2 = build_vocab(two, 2);
  CHECK(v2.size() == kNumReserved + 2);
  CHECK_FALSE(v2.contains("alpha"));
  CHECK_FALSE(v2.contains("beta"));
  CHECK(v2.contains("7"));
  CHECK(v2.contains("9"));

  CHECK_THROWS_AS(build_vocab(Corpus{}, 1), std::invalid_argument);
}

TEST_CASE("numeral_ids equal the brute-force distinct numeral count") {
  const Corpus corpus = generate_corpus(test::small_gen_config(2000, 17));
  const Vocabulary vocab = build_vocab(corpus, 1);
  std::set<std::string> distinct;
  for (const Sentence& s : corpus.sentences) {
    for (const std::string& t : s.tokens)
      if (numeral_value(t)) distinct.insert(t);
  }
  CHECK(vocab.numeral_ids().size() == distinct.size());
  for (int id : vocab.numeral_ids()) CHECK(numeral_value(vocab.token_of(id)).has_value());
}

TEST_CASE("encode layout: single sentence") {
  Corpus one;
  one.sentences.push_back(test::make_sentence("a", {"in", "2003"}, {EntityLabel::OTHER, EntityLabel::YEAR}));
  const Vocabulary v = build_vocab(one, 1);
  const EncodedSequence enc = encode(one.sentences[0], v, 8);
  REQUIRE(enc.length() == 8);
  CHECK(enc.token_ids == std::vector<int>{kClsId, v.id_of("in"), v.id_of("2003"), kSepId,
                                          kPadId, kPadId, kPadId, kPadId});
  CHECK(enc.attention_mask == std::vector<int>{1, 1, 1, 1, 0, 0, 0, 0});
  CHECK(enc.segment_ids == std::vector<int>{0, 0, 0, 0, 0, 0, 0, 0});
  CHECK(enc.alignment == std::vector<int>{-1, 0, 1, -1, -1, -1, -1, -1});

  // Entity marker occupies position 1 and shifts content right.
  EncodeOptions opts;
  opts.entity_marker = EntityLabel::YEAR;
  const EncodedSequence marked = encode(one.sentences[0], v, 8, opts);
  CHECK(marked.token_ids[1] == Vocabulary::marker_id(EntityLabel::YEAR));
  CHECK(marked.token_ids[2] == v.id_of("in"));
  CHECK(marked.alignment[2] == 0);
}

TEST_CASE("encode layout: question/context pair segments") {
  Sentence s = test::make_sentence("a", {"in", "2003"}, {EntityLabel::OTHER, EntityLabel::YEAR});
  s.question = std::vector<std::string>{"what", "year"};
  Corpus c;
  c.sentences.push_back(s);
  const Vocabulary v = build_vocab(c, 1);
  const EncodedSequence enc = encode(s, v, 7);
  REQUIRE(enc.length() == 7);
  // [CLS] what year [SEP] in 2003 [SEP]
  CHECK(enc.segment_ids == std::vector<int>{0, 0, 0, 0, 1, 1, 1});
  CHECK(enc.token_ids[0] == kClsId);
  CHECK(enc.token_ids[3] == kSepId);
  CHECK(enc.token_ids[6] == kSepId);
  CHECK(enc.alignment == std::vector<int>{-1, -1, -1, -1, 0, 1, -1});

  // Oracle: enumerate expected positions for arbitrary lengths.
  for (int qlen = 1; qlen <= 3; ++qlen) {
    Sentence t = s;
    t.question = std::vector<std::string>(static_cast<size_t>(qlen), "what");
    const int total = 1 + qlen + 1 + 2 + 1;
    const EncodedSequence e2 = encode(t, v, total);
    for (int i = 0; i < e2.length(); ++i) {
      const int expected = i <= 1 + qlen ? 0 : 1;
      CHECK(e2.segment_ids[static_cast<size_t>(i)] == expected);
    }
  }
}

TEST_CASE("encode truncation guards spans and masks") {
  Sentence s = test::make_sentence(
      "a", {"a1", "b2", "3", "4", "5", "6"},
      {EntityLabel::OTHER, EntityLabel::OTHER, EntityLabel::COUNT, EntityLabel::COUNT,
       EntityLabel::COUNT, EntityLabel::COUNT});
  Corpus c;
  c.sentences.push_back(s);
  const Vocabulary v = build_vocab(c, 1);

  const EncodedSequence enc = encode(s, v, 6);  // truncates the tail
  CHECK(enc.token_ids[0] == kClsId);
  CHECK(enc.token_ids[5] == kSepId);  // final [SEP] survives truncation
  CHECK(enc.alignment == std::vector<int>{-1, 0, 1, 2, 3, -1});

  Sentence with_span = s;
  with_span.answer_span = Span{5, 5};
  CHECK_THROWS_AS(encode(with_span, v, 6), std::invalid_argument);
  Sentence with_mask = s;
  with_mask.mask_index = 5;
  with_mask.mask_entity = EntityLabel::COUNT;
  CHECK_THROWS_AS(encode(with_mask, v, 6), std::invalid_argument);
  CHECK_THROWS_AS(encode(s, v, 3), std::invalid_argument);  // max_len >= 4
}

TEST_CASE("mask substitution at encode time") {
  Sentence s = test::make_sentence("a", {"in", "2003"}, {EntityLabel::OTHER, EntityLabel::YEAR});
  s.mask_index = 1;
  s.mask_entity = EntityLabel::YEAR;
  s.mask_answer = "2003";
  Corpus c;
  c.sentences.push_back(s);
  const Vocabulary v = build_vocab(c, 1);
  EncodeOptions opts;
  opts.apply_mask = true;
  const EncodedSequence enc = encode(s, v, 8, opts);
  CHECK(enc.token_ids[2] == kMaskId);
  const EncodedSequence plain = encode(s, v, 8);
  CHECK(plain.token_ids[2] == v.id_of("2003"));
}

TEST_CASE("attention mask is 1 exactly on non-PAD positions") {
  const Corpus corpus = generate_corpus(test::small_gen_config(50, 23, true));
  const Vocabulary v = build_vocab(corpus, 1);
  for (const Sentence& s : corpus.sentences) {
    const EncodedSequence enc = encode(s, v, 48);
    for (int i = 0; i < enc.length(); ++i) {
      const bool is_pad = enc.token_ids[static_cast<size_t>(i)] == kPadId;
      CHECK(enc.attention_mask[static_cast<size_t>(i)] == (is_pad ? 0 : 1));
    }
  }
}

TEST_CASE("decode round-trips and rejects unknown ids") {
  Corpus one;
  one.sentences.push_back(test::make_sentence("a", {"in", "2003"}, {EntityLabel::OTHER, EntityLabel::YEAR}));
  const Vocabulary v = build_vocab(one, 1);
  const EncodedSequence enc = encode(one.sentences[0], v, 8);
  const std::vector<std::string> tokens = decode(enc.token_ids, v);
  CHECK(tokens == std::vector<std::string>{"[CLS]", "in", "2003", "[SEP]", "[PAD]", "[PAD]",
                                           "[PAD]", "[PAD]"});
  CHECK(decode({kPadId}, v) == std::vector<std::string>{"[PAD]"});
  CHECK_THROWS_AS(decode({v.size()}, v), std::invalid_argument);
  CHECK_THROWS_AS(decode({-1}, v), std::invalid_argument);

  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> ids;
    for (int i = 0; i < 10; ++i)
      ids.push_back(static_cast<int>(rng.next_below(static_cast<uint64_t>(v.size()))));
    CHECK_NOTHROW(decode(ids, v));
  }
}

TEST_CASE("vocabulary file round-trip and hash stability") {
  test::TempDir tmp("vocab");
  const Corpus corpus = generate_corpus(test::small_gen_config(100, 31));
  const Vocabulary v = build_vocab(corpus, 1);
  const std::string path = tmp.path("v.json");
  v.save(path);
  const Vocabulary loaded = Vocabulary::load(path);
  CHECK(loaded.size() == v.size());
  for (int i = 0; i < v.size(); ++i) CHECK(loaded.token_of(i) == v.token_of(i));
  CHECK(loaded.content_hash() == v.content_hash());
  CHECK(loaded.numeral_ids() == v.numeral_ids());

  std::ofstream bad(tmp.path("bad.json"), std::ios::binary);
  bad << R"({"format":"nuer-vocab-v1","tokens":["[PAD]","[CLS]"]})";
  bad.close();
  CHECK_THROWS_AS(Vocabulary::load(tmp.path("bad.json")), SchemaError);
  CHECK_THROWS_AS(Vocabulary::load(tmp.path("missing.json")), IoError);
}
