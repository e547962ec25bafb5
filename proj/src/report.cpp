#include "nuer/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "nuer/corpus.hpp"
#include "nuer/errors.hpp"

namespace nuer {

using ordered_json = nlohmann::ordered_json;

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double population_std(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  const double mu = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

namespace {

constexpr const char* kReportFormat = "nuer-report-v1";
constexpr const char* kDumpMagic = "nuer-fitb-dump-v1";

struct Agg {
  std::vector<uint64_t> seeds;
  std::map<std::string, std::vector<double>> metrics;  // flattened name -> per-seed values
};

ordered_json stat_json(const std::vector<double>& xs) {
  ordered_json j;
  j["mean"] = mean_of(xs);
  j["std"] = population_std(xs);
  return j;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

void render_row(std::ostringstream& os, const std::string& head,
                const std::vector<std::string>& cells, size_t width = 12) {
  os << head;
  for (size_t i = head.size(); i < width; ++i) os << ' ';
  for (const std::string& c : cells) {
    os << c;
    for (size_t i = c.size(); i < width; ++i) os << ' ';
  }
  os << "\n";
}

const std::vector<std::string>& table_entity_order() {
  static const std::vector<std::string> order = {"YEAR", "COUNT", "PERCENTAGE",
                                                 "AGE",  "SIZE",  "DATE"};
  return order;
}

}  // namespace

Consolidated consolidate_reports(const std::vector<std::string>& paths) {
  if (paths.empty()) throw std::invalid_argument("no report files given");

  std::map<std::string, Agg> tagger;           // keyed by dataset
  std::map<std::string, Agg> qa;               // keyed by mode
  std::map<std::string, Agg> fitb;             // keyed by mode
  std::vector<std::string> qualitative;

  for (const std::string& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (content.rfind(kDumpMagic, 0) == 0) {
      qualitative.push_back(content.substr(std::string(kDumpMagic).size() + 1));
      continue;
    }
    ordered_json j;
    try {
      j = ordered_json::parse(content);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(path + ": not a report file: " + e.what());
    }
    if (!j.contains("format") || j["format"] != kReportFormat)
      throw SchemaError(path + ": report version mismatch (expected nuer-report-v1)");
    const std::string kind = j.value("kind", "");
    const uint64_t seed = j.value("seed", 0ull);

    if (kind == "tagger") {
      Agg& a = tagger[j.value("dataset", "")];
      a.seeds.push_back(seed);
      for (const auto& [entity, em] : j.at("per_entity").items()) {
        for (const char* metric : {"precision", "recall", "f1"})
          a.metrics[entity + std::string(".") + metric].push_back(em.at(metric).get<double>());
      }
      for (const char* metric : {"precision", "recall", "f1"})
        a.metrics[std::string("total.") + metric].push_back(j.at("total").at(metric).get<double>());
    } else if (kind == "qa") {
      Agg& a = qa[j.value("mode", "")];
      a.seeds.push_back(seed);
      a.metrics["exact_match"].push_back(j.at("exact_match").get<double>());
      a.metrics["f1"].push_back(j.at("f1").get<double>());
    } else if (kind == "fitb") {
      Agg& a = fitb[j.value("mode", "")];
      a.seeds.push_back(seed);
      for (const auto& [k, v] : j.at("top_k").items())
        a.metrics["top_k." + k].push_back(v.get<double>());
      for (const auto& [k, v] : j.at("dist").items())
        a.metrics["dist." + k].push_back(v.get<double>());
    } else {
      throw SchemaError(path + ": unknown report kind \"" + kind + "\"");
    }
  }

  ordered_json out;
  out["format"] = "nuer-report-consolidated-v1";
  out["std_definition"] = "population";
  out["note"] =
      "multi-seed mean and population std reported in place of formal significance tests";

  std::ostringstream text;

  if (!tagger.empty()) {
    ordered_json tj = ordered_json::object();
    for (const auto& [dataset, agg] : tagger) {
      ordered_json dj;
      dj["seeds"] = agg.seeds;
      ordered_json per = ordered_json::object();
      for (const std::string& e : table_entity_order()) {
        ordered_json ej;
        for (const char* metric : {"precision", "recall", "f1"}) {
          const auto it = agg.metrics.find(e + "." + metric);
          if (it != agg.metrics.end()) ej[metric] = stat_json(it->second);
        }
        per[e] = ej;
      }
      dj["per_entity"] = per;
      ordered_json tot;
      for (const char* metric : {"precision", "recall", "f1"})
        tot[metric] = stat_json(agg.metrics.at(std::string("total.") + metric));
      dj["total"] = tot;
      tj[dataset] = dj;

      text << "== Tagging (" << dataset << ", " << agg.seeds.size() << " seed"
           << (agg.seeds.size() == 1 ? "" : "s") << ") ==\n";
      std::vector<std::string> headers = {"Year", "Count", "Percentage", "Age", "Size", "Date",
                                          "Total"};
      render_row(text, "", headers);
      for (const char* metric : {"precision", "recall", "f1"}) {
        std::vector<std::string> cells;
        for (const std::string& e : table_entity_order())
          cells.push_back(fmt(mean_of(agg.metrics.at(e + "." + metric))));
        cells.push_back(fmt(mean_of(agg.metrics.at(std::string("total.") + metric))));
        std::string name(metric);
        name[0] = static_cast<char>(std::toupper(name[0]));
        render_row(text, name == "F1" || name == "F1 " ? "F1" : name, cells);
      }
      text << "\n";
    }
    out["tagger"] = tj;
  }

  if (!qa.empty()) {
    ordered_json arr = ordered_json::array();
    text << "== Question answering ==\n";
    render_row(text, "Version", {"Exact match", "F1"});
    for (const char* mode : {"baseline", "jem"}) {
      const auto it = qa.find(mode);
      if (it == qa.end()) continue;
      const Agg& agg = it->second;
      ordered_json mj;
      mj["mode"] = mode;
      mj["exact_match"] = mean_of(agg.metrics.at("exact_match"));
      mj["f1"] = mean_of(agg.metrics.at("f1"));
      mj["seeds"] = agg.seeds;
      ordered_json sj;
      sj["exact_match"] = population_std(agg.metrics.at("exact_match"));
      sj["f1"] = population_std(agg.metrics.at("f1"));
      mj["std"] = sj;
      arr.push_back(mj);
      render_row(text, mode == std::string("jem") ? "JEM" : "Baseline",
                 {fmt(mj["exact_match"].get<double>()) + " (" +
                      fmt(sj["exact_match"].get<double>()) + ")",
                  fmt(mj["f1"].get<double>()) + " (" + fmt(sj["f1"].get<double>()) + ")"});
    }
    text << "\n";
    out["qa"] = arr;
  }

  if (!fitb.empty()) {
    ordered_json arr = ordered_json::array();
    // Collect the k columns actually present, in numeric order.
    std::vector<int> ks;
    for (const auto& [mode, agg] : fitb) {
      for (const auto& [name, xs] : agg.metrics) {
        if (name.rfind("top_k.", 0) == 0) ks.push_back(std::stoi(name.substr(6)));
      }
    }
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

    text << "== Masked numeral prediction ==\n";
    std::vector<std::string> headers;
    for (int k : ks) headers.push_back("Top-" + std::to_string(k));
    render_row(text, "", headers);
    for (const char* mode : {"baseline", "entity"}) {
      const auto it = fitb.find(mode);
      if (it == fitb.end()) continue;
      const Agg& agg = it->second;
      ordered_json mj;
      mj["mode"] = mode;
      ordered_json tk, dk, stk, sdk;
      std::vector<std::string> acc_cells, dist_cells;
      for (int k : ks) {
        const std::string ks_str = std::to_string(k);
        tk[ks_str] = mean_of(agg.metrics.at("top_k." + ks_str));
        dk[ks_str] = mean_of(agg.metrics.at("dist." + ks_str));
        stk[ks_str] = population_std(agg.metrics.at("top_k." + ks_str));
        sdk[ks_str] = population_std(agg.metrics.at("dist." + ks_str));
        acc_cells.push_back(fmt(tk[ks_str].get<double>()));
        dist_cells.push_back(fmt(dk[ks_str].get<double>()));
      }
      mj["top_k"] = tk;
      mj["dist"] = dk;
      mj["seeds"] = agg.seeds;
      ordered_json sj;
      sj["top_k"] = stk;
      sj["dist"] = sdk;
      mj["std"] = sj;
      arr.push_back(mj);
      render_row(text, mode == std::string("entity") ? "Entity" : "Baseline", acc_cells);
      render_row(text, "  dist", dist_cells);
    }
    text << "\n";
    out["fitb"] = arr;
  }

  if (!qualitative.empty()) {
    text << "== Qualitative predictions ==\n";
    for (const std::string& q : qualitative) text << q << "\n";
  }

  Consolidated c;
  c.json = out.dump(2);
  c.text = text.str();
  return c;
}

}  // namespace nuer
