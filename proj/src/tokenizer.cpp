#include "nuer/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

#include "nuer/errors.hpp"
#include "nuer/sha256.hpp"

namespace nuer {

using ordered_json = nlohmann::ordered_json;

const std::vector<std::string>& Vocabulary::reserved_tokens() {
  static const std::vector<std::string> reserved = {
      "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "<size>",
      "<age>", "<count>", "<date>", "<year>", "<percentage>"};
  return reserved;
}

int Vocabulary::marker_id(EntityLabel entity) {
  switch (entity) {
    case EntityLabel::SIZE: return 5;
    case EntityLabel::AGE: return 6;
    case EntityLabel::COUNT: return 7;
    case EntityLabel::DATE: return 8;
    case EntityLabel::YEAR: return 9;
    case EntityLabel::PERCENTAGE: return 10;
    case EntityLabel::OTHER: break;
  }
  throw std::invalid_argument("label O has no entity marker token");
}

int Vocabulary::id_of(const std::string& token) const {
  const auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || id >= size())
    throw std::invalid_argument("vocabulary id out of range: " + std::to_string(id));
  return id_to_token_[static_cast<size_t>(id)];
}

bool Vocabulary::contains(const std::string& token) const {
  return token_to_id_.count(token) != 0;
}

void Vocabulary::add_token(const std::string& token) {
  if (contains(token)) return;
  const int id = size();
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(token);
  if (numeral_value(token)) numeral_ids_.push_back(id);
}

Vocabulary build_vocab(const Corpus& corpus, int min_freq) {
  if (corpus.sentences.empty()) throw std::invalid_argument("corpus is empty");
  Vocabulary vocab;
  for (const std::string& t : Vocabulary::reserved_tokens()) vocab.add_token(t);

  // Frequencies in first-appearance order so id assignment is deterministic.
  std::unordered_map<std::string, int> freq;
  std::vector<const std::string*> order;
  auto visit = [&](const std::vector<std::string>& tokens) {
    for (const std::string& t : tokens) {
      auto [it, inserted] = freq.emplace(t, 0);
      if (inserted) order.push_back(&it->first);
      it->second += 1;
    }
  };
  for (const Sentence& s : corpus.sentences) {
    visit(s.tokens);
    if (s.question) visit(*s.question);
  }
  for (const std::string* t : order) {
    if (freq[*t] >= min_freq || numeral_value(*t)) vocab.add_token(*t);
  }
  return vocab;
}

namespace {
const char* kVocabFormat = "nuer-vocab-v1";

std::string vocab_json(const Vocabulary& vocab) {
  ordered_json j;
  j["format"] = kVocabFormat;
  std::vector<std::string> tokens;
  tokens.reserve(static_cast<size_t>(vocab.size()));
  for (int i = 0; i < vocab.size(); ++i) tokens.push_back(vocab.token_of(i));
  j["tokens"] = tokens;
  return j.dump();
}
}  // namespace

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  out << vocab_json(*this) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path + ": invalid JSON: " + e.what());
  }
  if (!j.is_object() || !j.contains("format") || j["format"] != kVocabFormat)
    throw SchemaError(path + ": not a nuer-vocab-v1 file");
  if (!j.contains("tokens") || !j["tokens"].is_array())
    throw SchemaError(path + ": missing tokens array");
  Vocabulary vocab;
  for (const auto& t : j["tokens"]) {
    if (!t.is_string()) throw SchemaError(path + ": tokens must be strings");
    vocab.add_token(t.get<std::string>());
  }
  const auto& reserved = reserved_tokens();
  if (vocab.size() < static_cast<int>(reserved.size()))
    throw SchemaError(path + ": vocabulary smaller than the reserved token set");
  for (size_t i = 0; i < reserved.size(); ++i) {
    if (vocab.token_of(static_cast<int>(i)) != reserved[i])
      throw SchemaError(path + ": reserved token mismatch at id " + std::to_string(i));
  }
  return vocab;
}

std::string Vocabulary::content_hash() const { return sha256_hex(vocab_json(*this)); }

EncodedSequence encode(const Sentence& sentence, const Vocabulary& vocab,
                       int max_len, const EncodeOptions& options) {
  if (max_len < 4) throw std::invalid_argument("max_len must be at least 4");

  std::vector<int> prefix_ids;  // [CLS] (marker) (question [SEP])
  prefix_ids.push_back(kClsId);
  if (options.entity_marker) prefix_ids.push_back(Vocabulary::marker_id(*options.entity_marker));
  const bool pair = sentence.question.has_value();
  if (pair) {
    for (const std::string& t : *sentence.question) prefix_ids.push_back(vocab.id_of(t));
    prefix_ids.push_back(kSepId);
  }

  // Room for sentence tokens after the prefix and before the final [SEP].
  const int budget = max_len - static_cast<int>(prefix_ids.size()) - 1;
  if (budget < 0)
    throw std::invalid_argument("max_len too small for the question prefix");
  const int n_tokens = static_cast<int>(sentence.tokens.size());
  const int kept = std::min(n_tokens, budget);
  if (sentence.answer_span && sentence.answer_span->end >= kept)
    throw std::invalid_argument("sentence \"" + sentence.id +
                                "\": answer span would be truncated at max_len " +
                                std::to_string(max_len));
  if (sentence.mask_index && *sentence.mask_index >= kept)
    throw std::invalid_argument("sentence \"" + sentence.id +
                                "\": mask position would be truncated at max_len " +
                                std::to_string(max_len));

  EncodedSequence enc;
  enc.token_ids.reserve(static_cast<size_t>(max_len));
  const int prefix_len = static_cast<int>(prefix_ids.size());
  for (int i = 0; i < prefix_len; ++i) {
    enc.token_ids.push_back(prefix_ids[static_cast<size_t>(i)]);
    enc.segment_ids.push_back(0);
    enc.attention_mask.push_back(1);
    enc.alignment.push_back(-1);
  }
  const int sentence_segment = pair ? 1 : 0;
  for (int i = 0; i < kept; ++i) {
    const bool masked = options.apply_mask && sentence.mask_index && *sentence.mask_index == i;
    enc.token_ids.push_back(masked ? kMaskId : vocab.id_of(sentence.tokens[static_cast<size_t>(i)]));
    enc.segment_ids.push_back(sentence_segment);
    enc.attention_mask.push_back(1);
    enc.alignment.push_back(i);
  }
  enc.token_ids.push_back(kSepId);
  enc.segment_ids.push_back(sentence_segment);
  enc.attention_mask.push_back(1);
  enc.alignment.push_back(-1);
  while (enc.length() < max_len) {
    enc.token_ids.push_back(kPadId);
    enc.segment_ids.push_back(0);
    enc.attention_mask.push_back(0);
    enc.alignment.push_back(-1);
  }
  return enc;
}

std::vector<std::string> decode(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(vocab.token_of(id));
  return out;
}

}  // namespace nuer
