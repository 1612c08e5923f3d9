#include "biossl/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

#include "biossl/combo.hpp"
#include "json.hpp"

namespace biossl {

using nlohmann::json;

namespace {

std::string fixed(double v, int digits = 6) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::size_t catalogue_rank(const EvalReport& r) {
  const auto& cat = combo_catalogue();
  for (std::size_t k = 0; k < cat.size(); ++k) {
    if (cat[k].id == r.combo_id) return k;
  }
  return cat.size();
}

}  // namespace

void write_report_json(std::ostream& out, const EvalReport& r) {
  json j;
  j["combo_id"] = r.combo_id;
  j["combo"] = r.combo;
  j["tag"] = r.tag;
  j["modal_size"] = r.modal_size;
  j["scenario"] = std::string(to_string(r.scenario));
  j["repeats"] = r.repeats;
  j["config_hash"] = r.config_hash;
  json cells = json::array();
  for (const CellResult& c : r.cells) {
    json jc;
    jc["kind"] = std::string(to_string(c.kind));
    jc["auroc"] = c.auroc;
    jc["aupr"] = c.aupr;
    jc["chosen_lr"] = c.chosen_lr;
    jc["auroc_mean"] = mean_of(c.auroc);
    jc["auroc_std"] = std_of(c.auroc);
    jc["aupr_mean"] = mean_of(c.aupr);
    jc["aupr_std"] = std_of(c.aupr);
    cells.push_back(jc);
  }
  j["cells"] = cells;
  out << j.dump(2) << '\n';
}

EvalReport read_report_json(std::istream& in) {
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError(std::string("report is not valid JSON: ") + e.what());
  }
  try {
    EvalReport r;
    r.combo_id = j.at("combo_id").get<std::string>();
    r.combo = j.at("combo").get<std::string>();
    r.tag = j.at("tag").get<std::string>();
    r.modal_size = j.at("modal_size").get<int>();
    const auto sc = parse_scenario(j.at("scenario").get<std::string>());
    if (!sc) throw InputError("report has an unknown scenario");
    r.scenario = *sc;
    r.repeats = j.at("repeats").get<std::size_t>();
    r.config_hash = j.value("config_hash", "");
    for (const auto& jc : j.at("cells")) {
      CellResult c;
      const auto k = parse_link_kind(jc.at("kind").get<std::string>());
      if (!k) throw InputError("report has an unknown prediction kind");
      c.kind = *k;
      c.auroc = jc.at("auroc").get<std::vector<double>>();
      c.aupr = jc.at("aupr").get<std::vector<double>>();
      c.chosen_lr = jc.value("chosen_lr", std::vector<double>{});
      r.cells.push_back(std::move(c));
    }
    return r;
  } catch (const json::exception& e) {
    throw InputError(std::string("report is missing fields: ") + e.what());
  }
}

std::string report_table_csv(std::vector<EvalReport> reports) {
  std::stable_sort(reports.begin(), reports.end(), [](const EvalReport& a, const EvalReport& b) {
    const auto ra = catalogue_rank(a), rb = catalogue_rank(b);
    if (ra != rb) return ra < rb;
    return a.scenario < b.scenario;
  });
  std::string out =
      "id,combination,tag,modal_size,scenario,repeats,"
      "ddi_auroc,ddi_auroc_std,ddi_aupr,ddi_aupr_std,"
      "dti_auroc,dti_auroc_std,dti_aupr,dti_aupr_std\n";
  for (const EvalReport& r : reports) {
    out += r.combo_id + "," + r.combo + "," + r.tag + "," + std::to_string(r.modal_size) + "," +
           std::string(to_string(r.scenario)) + "," + std::to_string(r.repeats);
    for (LinkKind k : {LinkKind::DDI, LinkKind::DTI}) {
      const CellResult* c = r.cell(k);
      if (!c) {
        out += ",,,,";
        continue;
      }
      out += "," + fixed(mean_of(c->auroc)) + "," + fixed(std_of(c->auroc)) + "," + fixed(mean_of(c->aupr)) + "," +
             fixed(std_of(c->aupr));
    }
    out += "\n";
  }
  return out;
}

std::string report_heatmap_csv(const std::vector<EvalReport>& reports, ScenarioKind scenario) {
  std::vector<const EvalReport*> cols;
  for (const auto& r : reports) {
    if (r.scenario == scenario) cols.push_back(&r);
  }
  std::stable_sort(cols.begin(), cols.end(),
                   [](const EvalReport* a, const EvalReport* b) { return catalogue_rank(*a) < catalogue_rank(*b); });
  std::string out = "metric";
  for (const auto* r : cols) out += "," + r->combo;
  out += "\n";
  for (LinkKind k : {LinkKind::DDI, LinkKind::DTI}) {
    for (int metric = 0; metric < 2; ++metric) {
      std::vector<double> row;
      for (const auto* r : cols) {
        const CellResult* c = r->cell(k);
        row.push_back(c ? mean_of(metric == 0 ? c->auroc : c->aupr) : std::nan(""));
      }
      double lo = INFINITY, hi = -INFINITY;
      for (double v : row) {
        if (std::isnan(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      out += std::string(to_string(k)) + (metric == 0 ? "-AUROC" : "-AUPR");
      for (double v : row) {
        const double norm = std::isnan(v) ? v : (hi > lo ? (v - lo) / (hi - lo) : 0.0);
        out += "," + fixed(norm);
      }
      out += "\n";
    }
  }
  return out;
}

}  // namespace biossl
