#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "nuer/corpus.hpp"

namespace nuer {

// Reserved vocabulary ids. The marker order matches the six entity special
// tokens <size> <age> <count> <date> <year> <percentage>.
constexpr int kPadId = 0;
constexpr int kUnkId = 1;
constexpr int kClsId = 2;
constexpr int kSepId = 3;
constexpr int kMaskId = 4;
constexpr int kNumReserved = 11;

// Word-level vocabulary with fixed reserved ids and a numeral sub-vocabulary.
class Vocabulary {
 public:
  Vocabulary() = default;

  static const std::vector<std::string>& reserved_tokens();

  // Vocabulary id of the entity marker token for a non-OTHER label.
  static int marker_id(EntityLabel entity);

  int id_of(const std::string& token) const;  // kUnkId when absent
  const std::string& token_of(int id) const;  // throws on out-of-range id
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }

  // Ids of tokens with a parseable numeral value, ascending by id.
  const std::vector<int>& numeral_ids() const { return numeral_ids_; }

  void add_token(const std::string& token);  // no-op if already present

  // JSON vocabulary file {"format":"nuer-vocab-v1","tokens":[...]}.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  // Hash of the serialized form; stored in checkpoints to pin the pairing.
  std::string content_hash() const;

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::vector<int> numeral_ids_;
};

// Tokens with frequency >= min_freq plus all reserved tokens; numeral tokens
// are always kept so every maskable answer stays nameable.
Vocabulary build_vocab(const Corpus& corpus, int min_freq);

struct EncodedSequence {
  std::vector<int> token_ids;
  std::vector<int> segment_ids;     // question/prefix = 0, context = 1
  std::vector<int> attention_mask;  // 1 on non-PAD positions
  // Encoded position -> index into the sentence's tokens; -1 for specials,
  // question tokens and padding.
  std::vector<int> alignment;

  int length() const { return static_cast<int>(token_ids.size()); }
};

struct EncodeOptions {
  std::optional<EntityLabel> entity_marker;  // placed right after [CLS]
  bool apply_mask = false;  // replace the token at mask_index with [MASK]
};

// Layout: [CLS] (marker) tokens_a [SEP] (tokens_b [SEP]) [PAD]*; when a
// question is present it becomes segment 0 and the sentence tokens segment 1.
// Truncation drops sentence tokens from the tail, never [CLS]/[SEP]; an
// answer span or mask position that would be cut raises an error.
EncodedSequence encode(const Sentence& sentence, const Vocabulary& vocab,
                       int max_len, const EncodeOptions& options = {});

std::vector<std::string> decode(const std::vector<int>& ids, const Vocabulary& vocab);

}  // namespace nuer
