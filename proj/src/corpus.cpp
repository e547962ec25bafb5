#include "nuer/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "nuer/errors.hpp"
#include "nuer/rng.hpp"
#include "nuer/sha256.hpp"

namespace nuer {

using ordered_json = nlohmann::ordered_json;

std::array<EntityLabel, kNumEntities> entity_labels() {
  return {EntityLabel::YEAR, EntityLabel::COUNT, EntityLabel::PERCENTAGE,
          EntityLabel::AGE,  EntityLabel::SIZE,  EntityLabel::DATE};
}

const std::string& label_name(EntityLabel label) {
  static const std::array<std::string, kNumLabels> names = {
      "O", "YEAR", "COUNT", "PERCENTAGE", "AGE", "SIZE", "DATE"};
  return names.at(static_cast<size_t>(label));
}

EntityLabel label_from_name(const std::string& name) {
  for (int k = 0; k < kNumLabels; ++k) {
    const auto label = static_cast<EntityLabel>(k);
    if (label_name(label) == name) return label;
  }
  throw SchemaError("unknown entity label: \"" + name + "\"");
}

std::optional<double> numeral_value(const std::string& token) {
  if (token.empty()) return std::nullopt;
  size_t i = 0;
  std::string digits;

  // Integer part: either plain digits or comma-grouped (first group 1-3
  // digits, later groups exactly 3).
  size_t first_group = 0;
  while (i < token.size() && std::isdigit(static_cast<unsigned char>(token[i]))) {
    digits.push_back(token[i]);
    ++first_group;
    ++i;
  }
  if (first_group == 0) return std::nullopt;
  if (i < token.size() && token[i] == ',') {
    if (first_group > 3) return std::nullopt;
    while (i < token.size() && token[i] == ',') {
      ++i;
      for (int g = 0; g < 3; ++g) {
        if (i >= token.size() || !std::isdigit(static_cast<unsigned char>(token[i])))
          return std::nullopt;
        digits.push_back(token[i]);
        ++i;
      }
    }
  }

  std::string frac;
  if (i < token.size() && token[i] == '.') {
    ++i;
    while (i < token.size() && std::isdigit(static_cast<unsigned char>(token[i]))) {
      frac.push_back(token[i]);
      ++i;
    }
    if (frac.empty()) return std::nullopt;
  }
  if (i != token.size()) return std::nullopt;

  return std::stod(digits + (frac.empty() ? "" : "." + frac));
}

int magnitude_bucket(double value) {
  return static_cast<int>(std::floor(std::log10(std::max(std::abs(value), 1.0))));
}

void validate_sentence(const Sentence& s) {
  auto fail = [&](const std::string& field, const std::string& msg) {
    throw SchemaError("sentence \"" + s.id + "\": field " + field + ": " + msg);
  };
  const int n = static_cast<int>(s.tokens.size());
  if (static_cast<int>(s.labels.size()) != n)
    fail("labels", "length " + std::to_string(s.labels.size()) +
                       " does not match tokens length " + std::to_string(n));
  for (int i = 0; i < n; ++i) {
    if (s.labels[i] != EntityLabel::OTHER && !numeral_value(s.tokens[i]))
      fail("labels", "non-OTHER label on non-numeral token \"" + s.tokens[i] + "\"");
  }
  if (s.answer_span) {
    if (s.answer_span->start < 0 || s.answer_span->start > s.answer_span->end ||
        s.answer_span->end >= n)
      fail("answer_span", "out of range");
  }
  if (s.mask_index) {
    if (*s.mask_index < 0 || *s.mask_index >= n) fail("mask_index", "out of range");
    if (!s.mask_entity) fail("mask_entity", "required when mask_index is present");
    if (*s.mask_entity == EntityLabel::OTHER) fail("mask_entity", "must not be O");
    if (s.labels[*s.mask_index] != *s.mask_entity)
      fail("mask_entity", "does not match the label at mask_index");
  }
  if (s.mask_answer) {
    if (!s.mask_index) fail("mask_answer", "requires mask_index");
    if (s.tokens[*s.mask_index] != *s.mask_answer)
      fail("mask_answer", "does not match the token at mask_index");
  }
  if (s.confidences && static_cast<int>(s.confidences->size()) != n)
    fail("confidences", "length does not match tokens length");
}

std::map<EntityLabel, double> default_entity_mix() {
  return {{EntityLabel::COUNT, 1800}, {EntityLabel::SIZE, 447},
          {EntityLabel::YEAR, 4355},  {EntityLabel::PERCENTAGE, 291},
          {EntityLabel::DATE, 418},   {EntityLabel::AGE, 82}};
}

namespace {

// Largest-remainder apportionment of `total` over nonnegative weights.
// Ties go to the lower index.
std::vector<int> apportion(const std::vector<double>& weights, int total) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> counts(weights.size(), 0);
  std::vector<std::pair<double, size_t>> rema;
  int assigned = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    const double q = total * weights[i] / sum;
    counts[i] = static_cast<int>(std::floor(q));
    assigned += counts[i];
    rema.emplace_back(q - counts[i], i);
  }
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int r = 0; r < total - assigned; ++r) counts[rema[r % rema.size()].second] += 1;
  return counts;
}

std::string group_commas(long v) {
  std::string raw = std::to_string(v);
  std::string out;
  int run = 0;
  for (auto it = raw.rbegin(); it != raw.rend(); ++it) {
    if (run != 0 && run % 3 == 0) out.push_back(',');
    out.push_back(*it);
    ++run;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

void check_range(const ValueRange& r, const char* name) {
  if (r.lo > r.hi)
    throw std::invalid_argument(std::string("empty value range for ") + name);
}

// Round-number draw (mantissa 1-99 times a power of ten) within [lo, hi];
// values of 1,000 and above are comma-grouped, matching how counts and
// measurements are written in text.
std::string render_round_number(Rng& rng, const ValueRange& r) {
  int max_exp = 0;
  while (std::pow(10.0, max_exp + 1) <= static_cast<double>(r.hi)) ++max_exp;
  for (;;) {
    const long e = static_cast<long>(rng.next_below(static_cast<uint64_t>(max_exp) + 1));
    const long m = 1 + static_cast<long>(rng.next_below(99));
    const long v = m * static_cast<long>(std::llround(std::pow(10.0, static_cast<double>(e))));
    if (v < r.lo || v > r.hi) continue;
    return v >= 1000 ? group_commas(v) : std::to_string(v);
  }
}

std::string render_uniform(Rng& rng, const ValueRange& r) {
  const long v = r.lo + static_cast<long>(rng.next_below(static_cast<uint64_t>(r.hi - r.lo) + 1));
  return std::to_string(v);
}

std::string render_value(Rng& rng, EntityLabel entity, const GenConfig& cfg) {
  switch (entity) {
    case EntityLabel::YEAR:
      return render_uniform(rng, cfg.year_range);
    case EntityLabel::AGE:
      return render_uniform(rng, cfg.age_range);
    case EntityLabel::PERCENTAGE: {
      const std::string whole = render_uniform(rng, cfg.percentage_range);
      if (rng.next_below(2) == 0) return whole;
      return whole + "." + std::to_string(rng.next_below(10));
    }
    case EntityLabel::COUNT:
      return render_round_number(rng, cfg.count_range);
    case EntityLabel::SIZE:
      return render_round_number(rng, cfg.size_range);
    case EntityLabel::DATE:
      return render_uniform(rng, cfg.date_day_range);
    case EntityLabel::OTHER:
      break;
  }
  throw std::invalid_argument("cannot render a value for label O");
}

struct Clause {
  std::vector<std::string> tokens;
  std::vector<EntityLabel> labels;
  int num_index = -1;  // position of the labeled value token
};

Clause render_clause(Rng& rng, EntityLabel entity, const GenConfig& cfg,
                     const TemplateBank& bank) {
  const auto& pool = bank.templates.at(entity);
  size_t limit = pool.size();
  if (cfg.templates_per_entity > 0)
    limit = std::min<size_t>(limit, static_cast<size_t>(cfg.templates_per_entity));
  const auto& tpl = pool[rng.next_below(limit)];

  Clause c;
  for (const std::string& t : tpl) {
    if (t == "<NUM>") {
      c.num_index = static_cast<int>(c.tokens.size());
      c.tokens.push_back(render_value(rng, entity, cfg));
      c.labels.push_back(entity);
    } else if (t == "<MONTH>") {
      c.tokens.push_back(bank.months[rng.next_below(bank.months.size())]);
      c.labels.push_back(EntityLabel::OTHER);
    } else if (t == "<CNOUN>") {
      c.tokens.push_back(bank.count_nouns[rng.next_below(bank.count_nouns.size())]);
      c.labels.push_back(EntityLabel::OTHER);
    } else if (t == "<UNIT>") {
      c.tokens.push_back(bank.size_units[rng.next_below(bank.size_units.size())]);
      c.labels.push_back(EntityLabel::OTHER);
    } else {
      c.tokens.push_back(t);
      c.labels.push_back(EntityLabel::OTHER);
    }
  }
  return c;
}

std::string config_fingerprint(const GenConfig& cfg) {
  std::ostringstream ss;
  ss << "n=" << cfg.n_sentences << ";seed=" << cfg.seed
     << ";tpe=" << cfg.templates_per_entity << ";q=" << cfg.with_questions
     << ";m=" << cfg.with_masks << ";d=" << cfg.distractors << ";mix=";
  for (EntityLabel e : entity_labels()) {
    const auto it = cfg.entity_mix.find(e);
    ss << label_name(e) << ":" << (it == cfg.entity_mix.end() ? 0.0 : it->second) << ",";
  }
  ss << ";ranges=" << cfg.year_range.lo << "-" << cfg.year_range.hi << ","
     << cfg.age_range.lo << "-" << cfg.age_range.hi << ","
     << cfg.percentage_range.lo << "-" << cfg.percentage_range.hi << ","
     << cfg.count_range.lo << "-" << cfg.count_range.hi << ","
     << cfg.size_range.lo << "-" << cfg.size_range.hi << ","
     << cfg.date_day_range.lo << "-" << cfg.date_day_range.hi;
  return "gen:" + sha256_hex(ss.str());
}

}  // namespace

Corpus generate_corpus(const GenConfig& config) {
  return generate_corpus(config, default_template_bank());
}

Corpus generate_corpus(const GenConfig& config, const TemplateBank& bank) {
  if (config.n_sentences <= 0)
    throw std::invalid_argument("n_sentences must be positive");
  std::vector<EntityLabel> classes;
  std::vector<double> weights;
  for (EntityLabel e : entity_labels()) {
    const auto it = config.entity_mix.find(e);
    const double w = it == config.entity_mix.end() ? 0.0 : it->second;
    if (w < 0.0) throw std::invalid_argument("entity_mix weights must be nonnegative");
    if (w > 0.0) {
      classes.push_back(e);
      weights.push_back(w);
    }
  }
  if (classes.empty())
    throw std::invalid_argument("entity_mix must contain a positive weight");
  check_range(config.year_range, "YEAR");
  check_range(config.age_range, "AGE");
  check_range(config.percentage_range, "PERCENTAGE");
  check_range(config.count_range, "COUNT");
  check_range(config.size_range, "SIZE");
  check_range(config.date_day_range, "DATE");

  // Per-class sentence quotas, shuffled into a random class order.
  const std::vector<int> quota = apportion(weights, config.n_sentences);
  std::vector<EntityLabel> order;
  for (size_t i = 0; i < classes.size(); ++i)
    order.insert(order.end(), quota[i], classes[i]);
  Rng shuffle_rng(derive_seed(config.seed, 0));
  shuffle_rng.shuffle(order);

  Rng rng(derive_seed(config.seed, 1));
  Corpus corpus;
  corpus.provenance = config_fingerprint(config);
  corpus.sentences.reserve(order.size());

  for (size_t i = 0; i < order.size(); ++i) {
    const EntityLabel primary = order[i];
    Sentence s;
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "s%06zu", i);
    s.id = idbuf;

    std::vector<Clause> clauses;
    clauses.push_back(render_clause(rng, primary, config, bank));
    size_t primary_clause = 0;

    if (config.with_questions && classes.size() > 1) {
      for (int d = 0; d < config.distractors; ++d) {
        // Distractor entity drawn from the mix, excluding the primary class
        // so the question stays unambiguous.
        std::vector<double> w2 = weights;
        for (size_t k = 0; k < classes.size(); ++k)
          if (classes[k] == primary) w2[k] = 0.0;
        const EntityLabel other = classes[rng.next_weighted(w2)];
        clauses.push_back(render_clause(rng, other, config, bank));
      }
      std::vector<size_t> perm(clauses.size());
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(perm);
      std::vector<Clause> shuffled;
      for (size_t p : perm) {
        if (p == 0) primary_clause = shuffled.size();
        shuffled.push_back(std::move(clauses[p]));
      }
      clauses = std::move(shuffled);
    }

    int primary_pos = -1;
    for (size_t ci = 0; ci < clauses.size(); ++ci) {
      if (ci == primary_clause)
        primary_pos = static_cast<int>(s.tokens.size()) + clauses[ci].num_index;
      s.tokens.insert(s.tokens.end(), clauses[ci].tokens.begin(), clauses[ci].tokens.end());
      s.labels.insert(s.labels.end(), clauses[ci].labels.begin(), clauses[ci].labels.end());
    }

    if (config.with_questions) {
      const auto& qs = bank.questions.at(primary);
      s.question = qs[rng.next_below(qs.size())];
      s.answer_span = Span{primary_pos, primary_pos};
    }
    if (config.with_masks) {
      s.mask_index = primary_pos;
      s.mask_entity = primary;
      s.mask_answer = s.tokens[static_cast<size_t>(primary_pos)];
    }
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

std::tuple<Corpus, Corpus, Corpus> split_corpus(const Corpus& corpus,
                                                std::array<double, 3> ratios,
                                                uint64_t seed) {
  if (corpus.sentences.empty()) throw std::invalid_argument("cannot split an empty corpus");
  double sum = 0.0;
  for (double r : ratios) {
    if (r <= 0.0) throw std::invalid_argument("split ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split ratios must sum to 1");

  const int n = static_cast<int>(corpus.sentences.size());
  const int n_val = static_cast<int>(std::floor(n * ratios[1]));
  const int n_test = static_cast<int>(std::floor(n * ratios[2]));
  const int n_train = n - n_val - n_test;

  std::vector<size_t> perm(corpus.sentences.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(perm);

  auto take = [&](int from, int count, const char* part) {
    Corpus out;
    out.provenance = corpus.provenance + ";split:" + part;
    for (int i = from; i < from + count; ++i)
      out.sentences.push_back(corpus.sentences[perm[static_cast<size_t>(i)]]);
    return out;
  };
  return {take(0, n_train, "train"), take(n_train, n_val, "val"),
          take(n_train + n_val, n_test, "test")};
}

Corpus magnitude_audit_sample(const Corpus& corpus, int n, uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("sample size must be positive");
  if (n > static_cast<int>(corpus.sentences.size()))
    throw std::invalid_argument("sample size exceeds corpus size");

  // Key each sentence by the magnitude bucket of its first numeral
  // (bucket -1 for sentences without one).
  std::map<int, std::vector<size_t>> buckets;
  for (size_t i = 0; i < corpus.sentences.size(); ++i) {
    int bucket = -1;
    for (const std::string& tok : corpus.sentences[i].tokens) {
      if (const auto v = numeral_value(tok)) {
        bucket = magnitude_bucket(*v);
        break;
      }
    }
    buckets[bucket].push_back(i);
  }

  std::vector<double> sizes;
  for (const auto& [bucket, members] : buckets)
    sizes.push_back(static_cast<double>(members.size()));
  const std::vector<int> quota = apportion(sizes, n);

  Rng rng(seed);
  Corpus out;
  out.provenance = corpus.provenance + ";audit:" + std::to_string(n);
  size_t bi = 0;
  for (auto& [bucket, members] : buckets) {
    rng.shuffle(members);
    for (int k = 0; k < quota[bi]; ++k)
      out.sentences.push_back(corpus.sentences[members[static_cast<size_t>(k)]]);
    ++bi;
  }
  return out;
}

namespace {

const char* kDatasetFormat = "nuer-v1";

ordered_json sentence_to_json(const Sentence& s) {
  ordered_json j;
  j["id"] = s.id;
  j["tokens"] = s.tokens;
  std::vector<std::string> labels;
  labels.reserve(s.labels.size());
  for (EntityLabel l : s.labels) labels.push_back(label_name(l));
  j["labels"] = labels;
  if (s.question) j["question"] = *s.question;
  if (s.answer_span) j["answer_span"] = std::array<int, 2>{s.answer_span->start, s.answer_span->end};
  if (s.mask_index) j["mask_index"] = *s.mask_index;
  if (s.mask_entity) j["mask_entity"] = label_name(*s.mask_entity);
  if (s.mask_answer) j["mask_answer"] = *s.mask_answer;
  if (s.confidences) j["confidences"] = *s.confidences;
  return j;
}

[[noreturn]] void line_error(size_t line, const std::string& field, const std::string& msg) {
  throw SchemaError("line " + std::to_string(line) + ": field " + field + ": " + msg);
}

std::vector<std::string> parse_string_array(const ordered_json& j, size_t line,
                                            const std::string& field) {
  if (!j.is_array()) line_error(line, field, "expected an array of strings");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) line_error(line, field, "expected an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

Sentence sentence_from_json(const ordered_json& j, size_t line) {
  static const std::vector<std::string> known = {
      "id",         "tokens",      "labels",      "question", "answer_span",
      "mask_index", "mask_entity", "mask_answer", "confidences"};
  if (!j.is_object()) line_error(line, "record", "expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      line_error(line, key, "unknown field");
  }
  Sentence s;
  if (!j.contains("id") || !j["id"].is_string()) line_error(line, "id", "missing or not a string");
  s.id = j["id"].get<std::string>();
  if (!j.contains("tokens")) line_error(line, "tokens", "missing");
  s.tokens = parse_string_array(j["tokens"], line, "tokens");
  if (!j.contains("labels")) line_error(line, "labels", "missing");
  for (const std::string& name : parse_string_array(j["labels"], line, "labels")) {
    try {
      s.labels.push_back(label_from_name(name));
    } catch (const SchemaError& e) {
      line_error(line, "labels", e.what());
    }
  }
  if (j.contains("question")) s.question = parse_string_array(j["question"], line, "question");
  if (j.contains("answer_span")) {
    const auto& a = j["answer_span"];
    if (!a.is_array() || a.size() != 2 || !a[0].is_number_integer() || !a[1].is_number_integer())
      line_error(line, "answer_span", "expected [start, end] integers");
    s.answer_span = Span{a[0].get<int>(), a[1].get<int>()};
  }
  if (j.contains("mask_index")) {
    if (!j["mask_index"].is_number_integer()) line_error(line, "mask_index", "expected an integer");
    s.mask_index = j["mask_index"].get<int>();
  }
  if (j.contains("mask_entity")) {
    if (!j["mask_entity"].is_string()) line_error(line, "mask_entity", "expected a string");
    try {
      s.mask_entity = label_from_name(j["mask_entity"].get<std::string>());
    } catch (const SchemaError& e) {
      line_error(line, "mask_entity", e.what());
    }
  }
  if (j.contains("mask_answer")) {
    if (!j["mask_answer"].is_string()) line_error(line, "mask_answer", "expected a string");
    s.mask_answer = j["mask_answer"].get<std::string>();
  }
  if (j.contains("confidences")) {
    if (!j["confidences"].is_array()) line_error(line, "confidences", "expected an array");
    std::vector<double> conf;
    for (const auto& e : j["confidences"]) {
      if (!e.is_number()) line_error(line, "confidences", "expected numbers");
      conf.push_back(e.get<double>());
    }
    s.confidences = std::move(conf);
  }
  try {
    validate_sentence(s);
  } catch (const SchemaError& e) {
    throw SchemaError("line " + std::to_string(line) + ": " + e.what());
  }
  return s;
}

}  // namespace

void save_dataset(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  ordered_json header;
  header["format"] = kDatasetFormat;
  header["provenance"] = corpus.provenance;
  out << header.dump() << "\n";
  for (const Sentence& s : corpus.sentences) out << sentence_to_json(s).dump() << "\n";
  if (!out) throw IoError("write failed: " + path);
}

Corpus load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::string line;
  size_t line_no = 0;
  if (!std::getline(in, line)) throw SchemaError(path + ": empty file, missing header");
  ++line_no;
  ordered_json header;
  try {
    header = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("line 1: invalid JSON header: " + std::string(e.what()));
  }
  if (!header.is_object() || !header.contains("format") || !header["format"].is_string())
    throw SchemaError("line 1: missing format field");
  if (header["format"].get<std::string>() != kDatasetFormat)
    throw SchemaError("line 1: unsupported dataset format \"" +
                      header["format"].get<std::string>() + "\", expected nuer-v1");

  Corpus corpus;
  if (header.contains("provenance") && header["provenance"].is_string())
    corpus.provenance = header["provenance"].get<std::string>();
  else
    corpus.provenance = path;

  std::vector<std::string> seen_ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    corpus.sentences.push_back(sentence_from_json(j, line_no));
    seen_ids.push_back(corpus.sentences.back().id);
  }
  std::sort(seen_ids.begin(), seen_ids.end());
  if (std::adjacent_find(seen_ids.begin(), seen_ids.end()) != seen_ids.end())
    throw SchemaError(path + ": duplicate sentence id \"" +
                      *std::adjacent_find(seen_ids.begin(), seen_ids.end()) + "\"");
  return corpus;
}

}  // namespace nuer
