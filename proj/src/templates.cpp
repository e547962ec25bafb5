#include "nuer/corpus.hpp"

namespace nuer {

namespace {

std::vector<std::string> tok(std::initializer_list<const char*> words) {
  std::vector<std::string> out;
  for (const char* w : words) out.emplace_back(w);
  return out;
}

TemplateBank build_bank() {
  TemplateBank b;

  b.months = {"January", "February", "March",     "April",   "May",      "June",
              "July",    "August",   "September", "October", "November", "December"};
  b.count_nouns = {"people", "tickets", "books",  "soldiers",  "visitors",
                   "students", "cars",  "trees",  "votes",     "employees"};
  b.size_units = {"meters", "feet", "acres", "kilograms",
                  "miles",  "hectares", "tons", "kilometers"};

  b.templates[EntityLabel::YEAR] = {
      tok({"the", "treaty", "was", "signed", "in", "<NUM>", "."}),
      tok({"the", "company", "was", "founded", "in", "<NUM>", "."}),
      tok({"she", "moved", "abroad", "in", "<NUM>", "."}),
      tok({"construction", "began", "in", "<NUM>", "."}),
      tok({"the", "law", "passed", "in", "<NUM>", "."}),
      tok({"he", "retired", "in", "<MONTH>", ",", "<NUM>", "."}),
      tok({"the", "city", "hosted", "the", "games", "in", "<NUM>", "."}),
      tok({"records", "date", "back", "to", "<NUM>", "."}),
      tok({"by", "<NUM>", "the", "project", "was", "complete", "."}),
      tok({"since", "<NUM>", "the", "rules", "have", "changed", "."}),
  };
  b.templates[EntityLabel::AGE] = {
      tok({"he", "died", "at", "the", "age", "of", "<NUM>", "."}),
      tok({"she", "was", "<NUM>", "years", "old", "at", "the", "time", "."}),
      tok({"the", "singer", "turned", "<NUM>", "last", "month", "."}),
      tok({"at", "age", "<NUM>", "he", "wrote", "his", "first", "novel", "."}),
      tok({"patients", "older", "than", "<NUM>", "were", "excluded", "."}),
      tok({"she", "retired", "at", "the", "age", "of", "<NUM>", "."}),
  };
  b.templates[EntityLabel::PERCENTAGE] = {
      tok({"about", "<NUM>", "%", "of", "voters", "agreed", "."}),
      tok({"sales", "rose", "by", "<NUM>", "%", "this", "quarter", "."}),
      tok({"unemployment", "fell", "to", "<NUM>", "%", "."}),
      tok({"<NUM>", "%", "of", "the", "samples", "were", "valid", "."}),
      tok({"the", "rate", "dropped", "by", "<NUM>", "%", "."}),
      tok({"roughly", "<NUM>", "%", "of", "students", "passed", "."}),
  };
  b.templates[EntityLabel::COUNT] = {
      tok({"the", "festival", "drew", "<NUM>", "<CNOUN>", "."}),
      tok({"organizers", "counted", "<NUM>", "<CNOUN>", "in", "total", "."}),
      tok({"the", "museum", "holds", "<NUM>", "<CNOUN>", "."}),
      tok({"about", "<NUM>", "<CNOUN>", "attended", "the", "rally", "."}),
      tok({"they", "shipped", "<NUM>", "<CNOUN>", "overall", "."}),
      tok({"police", "reported", "<NUM>", "<CNOUN>", "at", "the", "scene", "."}),
  };
  b.templates[EntityLabel::SIZE] = {
      tok({"the", "bridge", "is", "<NUM>", "<UNIT>", "long", "."}),
      tok({"the", "farm", "covers", "<NUM>", "<UNIT>", "."}),
      tok({"the", "tower", "stands", "<NUM>", "<UNIT>", "tall", "."}),
      tok({"the", "parcel", "weighs", "<NUM>", "<UNIT>", "."}),
      tok({"divers", "descended", "<NUM>", "<UNIT>", "below", "."}),
      tok({"the", "road", "stretches", "<NUM>", "<UNIT>", "across", "."}),
  };
  b.templates[EntityLabel::DATE] = {
      tok({"the", "ceremony", "took", "place", "on", "<MONTH>", "<NUM>", "."}),
      tok({"voting", "ends", "on", "<MONTH>", "<NUM>", "."}),
      tok({"the", "store", "opened", "on", "<MONTH>", "<NUM>", "."}),
      tok({"her", "flight", "leaves", "on", "<MONTH>", "<NUM>", "."}),
      tok({"the", "deadline", "is", "<MONTH>", "<NUM>", "."}),
      tok({"rehearsals", "start", "on", "<MONTH>", "<NUM>", "."}),
  };

  b.questions[EntityLabel::YEAR] = {
      tok({"in", "what", "year", "did", "it", "happen", "?"}),
      tok({"which", "year", "is", "mentioned", "?"}),
  };
  b.questions[EntityLabel::AGE] = {
      tok({"at", "what", "age", "did", "it", "happen", "?"}),
      tok({"how", "old", "was", "the", "person", "?"}),
  };
  b.questions[EntityLabel::PERCENTAGE] = {
      tok({"what", "percentage", "is", "reported", "?"}),
      tok({"what", "percent", "is", "mentioned", "?"}),
  };
  b.questions[EntityLabel::COUNT] = {
      tok({"how", "many", "were", "counted", "?"}),
      tok({"what", "number", "of", "items", "is", "given", "?"}),
  };
  b.questions[EntityLabel::SIZE] = {
      tok({"what", "measurement", "is", "reported", "?"}),
      tok({"how", "large", "is", "it", "?"}),
  };
  b.questions[EntityLabel::DATE] = {
      tok({"on", "what", "day", "of", "the", "month", "was", "it", "?"}),
      tok({"which", "day", "is", "mentioned", "?"}),
  };

  return b;
}

}  // namespace

const TemplateBank& default_template_bank() {
  static const TemplateBank bank = build_bank();
  return bank;
}

}  // namespace nuer
