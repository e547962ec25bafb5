#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace nuer {

// Number entity classes. Codes are stable across serialization; OTHER is 0.
enum class EntityLabel : int {
  OTHER = 0,
  YEAR = 1,
  COUNT = 2,
  PERCENTAGE = 3,
  AGE = 4,
  SIZE = 5,
  DATE = 6,
};

constexpr int kNumLabels = 7;   // including OTHER
constexpr int kNumEntities = 6; // excluding OTHER

// The six entity values, in label-code order.
std::array<EntityLabel, kNumEntities> entity_labels();

// "O", "YEAR", ... exact uppercase strings used by the dataset format.
const std::string& label_name(EntityLabel label);
EntityLabel label_from_name(const std::string& name);  // throws SchemaError

struct Span {
  int start = 0;
  int end = 0;  // inclusive
};

struct Sentence {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<EntityLabel> labels;  // same length as tokens
  std::optional<std::vector<std::string>> question;
  std::optional<Span> answer_span;
  std::optional<int> mask_index;
  std::optional<EntityLabel> mask_entity;
  std::optional<std::string> mask_answer;
  std::optional<std::vector<double>> confidences;  // written by annotate

  bool operator==(const Sentence&) const = default;
};

struct Corpus {
  std::vector<Sentence> sentences;
  std::string provenance;

  bool operator==(const Corpus&) const = default;
};

// Validates per-sentence invariants (label count, numeral-only entities,
// span/mask ranges). Throws SchemaError naming the sentence on violation.
void validate_sentence(const Sentence& s);

struct ValueRange {
  long lo = 0;
  long hi = 0;
};

struct GenConfig {
  int n_sentences = 0;
  std::map<EntityLabel, double> entity_mix;  // weights over the six entities
  uint64_t seed = 0;
  int templates_per_entity = 0;  // 0 = all templates in the bank
  bool with_questions = false;   // attach question + answer span
  bool with_masks = false;       // attach mask_index/mask_entity/mask_answer
  int distractors = 2;           // extra clauses per sentence in question mode

  ValueRange year_range{1800, 2025};
  ValueRange age_range{1, 99};
  ValueRange percentage_range{0, 100};
  ValueRange count_range{1, 1000000};
  ValueRange size_range{1, 100000};
  ValueRange date_day_range{1, 31};
};

// Entity mix proportional to the reference annotation counts
// (count 1800, size 447, year 4355, percentage 291, date 418, age 82).
std::map<EntityLabel, double> default_entity_mix();

// Template bank: per-entity cue phrases with a value slot. Exposed so tests
// can enumerate the cue-word inventory.
struct TemplateBank {
  // Each template is a token sequence; the placeholder token "<NUM>" marks
  // the labeled value slot.
  std::map<EntityLabel, std::vector<std::vector<std::string>>> templates;
  // Question templates per entity, used when question generation is enabled.
  std::map<EntityLabel, std::vector<std::vector<std::string>>> questions;
  // Month words used by DATE (day slot) and some YEAR templates.
  std::vector<std::string> months;
  // Plural nouns for COUNT and unit words for SIZE.
  std::vector<std::string> count_nouns;
  std::vector<std::string> size_units;
};

const TemplateBank& default_template_bank();

Corpus generate_corpus(const GenConfig& config);
Corpus generate_corpus(const GenConfig& config, const TemplateBank& bank);

// Shuffled disjoint partition; sizes floor(N*ratio) with the remainder
// assigned to train. Deterministic given seed.
std::tuple<Corpus, Corpus, Corpus> split_corpus(const Corpus& corpus,
                                                std::array<double, 3> ratios,
                                                uint64_t seed);

// Parses plain integers, decimals and comma-grouped integers ("1,000").
// Returns nullopt for anything else; units/percent signs are separate tokens.
std::optional<double> numeral_value(const std::string& token);

// Order-of-magnitude bucket floor(log10(max(|v|, 1))).
int magnitude_bucket(double value);

// Stratified sample preserving the magnitude-bucket distribution of each
// sentence's first numeral. Deterministic given seed.
Corpus magnitude_audit_sample(const Corpus& corpus, int n, uint64_t seed);

// Line-oriented JSON dataset with a leading {"format":"nuer-v1"} header.
Corpus load_dataset(const std::string& path);
void save_dataset(const Corpus& corpus, const std::string& path);

}  // namespace nuer
