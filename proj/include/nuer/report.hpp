#pragma once

#include <string>
#include <vector>

namespace nuer {

// Population standard deviation (the reported spread over seeds).
double population_std(const std::vector<double>& xs);
double mean_of(const std::vector<double>& xs);

struct Consolidated {
  std::string json;  // merged per-seed metrics with means and stds
  std::string text;  // plain-text tables plus any qualitative sections
};

// Merges per-seed metric files (tagger/qa/fitb reports and qualitative
// dumps). All JSON inputs must carry the same report format version.
Consolidated consolidate_reports(const std::vector<std::string>& paths);

}  // namespace nuer
